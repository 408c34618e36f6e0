use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spincorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spincorr"))
        .args(args)
        .output()
        .expect("spawn spincorr")
}

fn json_line(out: &Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no JSON in {text:?}"));
    serde_json::from_str(line).unwrap()
}

fn simulate(path: &Path, args: &[&str]) {
    let mut all = vec!["simulate", "--out", path.to_str().unwrap()];
    all.extend_from_slice(args);
    let out = spincorr(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn equal_settings_give_perfect_anticorrelation() {
    let out = spincorr(&["simulate", "--model", "qm", "--theta-deg", "0", "--events", "500", "--seed", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("seq,"))
        .skip(1)
        .take_while(|l| !l.starts_with('{'))
        .collect();
    assert_eq!(rows.len(), 500);
    for row in rows {
        let f: Vec<i32> = row.split(',').skip(3).map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[0], -f[1], "{row}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    let args = ["--model", "conservation", "--spin", "3", "--kind", "adjacent", "--theta-deg", "37", "--events", "20000", "--seed", "99"];
    simulate(&x, &args);
    simulate(&y, &args);
    assert_eq!(std::fs::read(&x).unwrap(), std::fs::read(&y).unwrap());
}

#[test]
fn spin_two_outcomes_stay_on_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s2.csv");
    simulate(&path, &["--model", "conservation", "--spin", "4", "--theta-deg", "60", "--events", "5000", "--seed", "1"]);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("# two_s: 4\n"));
    for row in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        for v in row.split(',').skip(3) {
            let m: i32 = v.parse().unwrap();
            assert!([-4, -2, 0, 2, 4].contains(&m), "{row}");
        }
    }
}

#[test]
fn estimate_on_a_hand_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.csv");
    std::fs::write(
        &path,
        "# format_version: 1\n# model: qm\n# two_s: 1\n# seed: 0\n# events: 2\n\
         seq,theta_a_rad,theta_b_rad,outcome_a_2m,outcome_b_2m\n\
         0,0,1.0471975512,1,-1\n1,0,1.0471975512,1,1\n",
    )
    .unwrap();
    let out = spincorr(&["estimate", "--in", path.to_str().unwrap(), "--normalized"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_line(&out);
    assert_eq!(v["n"], 2);
    assert_eq!(v["plain"]["value"].as_f64().unwrap(), 0.0);
    assert!((v["theta_deg"].as_f64().unwrap() - 60.0).abs() < 1e-6);

    std::fs::write(
        &path,
        "# format_version: 1\n# model: qm\n# two_s: 1\n# seed: 0\n# events: 2\n\
         seq,theta_a_rad,theta_b_rad,outcome_a_2m,outcome_b_2m\n\
         0,0,0,1,-1\n1,0,0,-1,1\n",
    )
    .unwrap();
    let v = json_line(&spincorr(&["estimate", "--in", path.to_str().unwrap(), "--normalized"]));
    assert_eq!(v["plain"]["value"].as_f64().unwrap(), -1.0);
    assert_eq!(v["grouped"]["value"].as_f64().unwrap(), -1.0);
}

#[test]
fn audit_flags_lhv_and_passes_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let (lhv, cons) = (dir.path().join("lhv.csv"), dir.path().join("cons.csv"));
    simulate(&lhv, &["--model", "lhv", "--theta-deg", "60", "--events", "200000", "--seed", "3"]);
    simulate(&cons, &["--model", "conservation", "--spin", "2", "--theta-deg", "60", "--events", "200000", "--seed", "3"]);

    let v = json_line(&spincorr(&["audit", "--in", lhv.to_str().unwrap()]));
    assert_ne!(v["verdict"], "conserved", "{v}");
    let v = json_line(&spincorr(&["audit", "--in", cons.to_str().unwrap()]));
    assert_eq!(v["verdict"], "conserved", "{v}");
    assert_eq!(v["groups"].as_array().unwrap().len(), 3);
}

#[test]
fn chsh_with_coincident_settings() {
    // a = a′ and b = b′: M = |p − p| + |p + p| = 2|p| for any correlation.
    let out = spincorr(&["chsh", "--model", "qm", "--angles-deg", "0,0,0,0", "--events", "2000", "--seed", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_line(&out);
    assert_eq!(v["m"].as_f64().unwrap(), 2.0);
    assert_ne!(v["verdict"], "violates");
}

#[test]
fn chsh_from_four_files() {
    let dir = tempfile::tempdir().unwrap();
    // a = 0, a′ = 90, b = 45, b′ = 135; pairs (a,b), (a,b′), (a′,b′), (a′,b)
    let pairs = ["0,45", "0,135", "90,135", "90,45"];
    let mut files = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let p = dir.path().join(format!("p{i}.csv"));
        simulate(&p, &["--model", "qm", "--settings-deg", pair, "--events", "50000", "--seed", &i.to_string()]);
        files.push(p);
    }
    let mut args = vec!["chsh"];
    for f in &files {
        args.push("--in");
        args.push(f.to_str().unwrap());
    }
    let out = spincorr(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_line(&out);
    let m = v["m"].as_f64().unwrap();
    let se = v["se"].as_f64().unwrap();
    assert!((m - 2.0 * 2f64.sqrt()).abs() < 4.0 * se, "{v}");
    assert_eq!(v["verdict"], "violates");

    // Files from inconsistent setting sets are refused.
    args[8] = files[0].to_str().unwrap();
    assert_eq!(spincorr(&args).status.code(), Some(2));
}

#[test]
fn settings_pair_matches_relative_angle() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    simulate(&x, &["--model", "qm", "--theta-deg", "30", "--events", "10", "--seed", "2"]);
    simulate(&y, &["--model", "qm", "--settings-deg", "0,30", "--events", "10", "--seed", "2"]);
    assert_eq!(std::fs::read(&x).unwrap(), std::fs::read(&y).unwrap());
    simulate(&y, &["--model", "qm", "--settings-deg", "-20,10", "--events", "10", "--seed", "2"]);
    let v = json_line(&spincorr(&["estimate", "--in", y.to_str().unwrap()]));
    assert!((v["theta_deg"].as_f64().unwrap() - 30.0).abs() < 1e-6);
    assert_eq!(
        spincorr(&["simulate", "--model", "qm", "--theta-deg", "30", "--settings-deg", "0,30", "--events", "1"]).status.code(),
        Some(1)
    );
}

#[test]
fn exit_codes() {
    assert_eq!(spincorr(&["bogus"]).status.code(), Some(1));
    assert_eq!(spincorr(&["simulate", "--model", "qm", "--theta-deg", "0"]).status.code(), Some(1));
    assert_eq!(
        spincorr(&["simulate", "--model", "qm", "--spin", "2", "--theta-deg", "0", "--events", "3", "--seed", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(spincorr(&["estimate", "--in", "/nonexistent/x.csv"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# format_version: 1\n# model: qm\n# two_s: 1\n# seed: 0\n# events: 1\nseq,theta_a_rad,theta_b_rad,outcome_a_2m,outcome_b_2m\n0,0,0,3,-1\n").unwrap();
    let out = spincorr(&["estimate", "--in", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn optimize_reports_the_known_optima() {
    let v = json_line(&spincorr(&["optimize", "--function", "cos", "--grid-step-deg", "2"]));
    assert!((v["best"]["m_value"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-6);
    let v = json_line(&spincorr(&["optimize", "--function", "linear", "--grid-step-deg", "2"]));
    assert!((v["best"]["m_value"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(v["violating"], 0);
}
