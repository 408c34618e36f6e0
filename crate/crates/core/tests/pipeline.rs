use std::f64::consts::FRAC_PI_4;
use std::fs::File;
use std::io::BufReader;

use spincorr::cli::{cmd_estimate, InputArgs};
use spincorr::estimators::{grouped_correlation, plain_correlation};
use spincorr::eventlog::{accumulate_file, read_events, write_events, EventFileHeader};
use spincorr::models::{ConditionalKind, ModelSpec, Simulator, SpinMagnitude};

#[test]
fn file_round_trip_preserves_records() {
    let model = ModelSpec::ConservationSpin {
        spin: SpinMagnitude::new(3).unwrap(),
        kind: ConditionalKind::Adjacent,
    };
    let sim = Simulator::planar(model, 1.1, 21).unwrap();
    let n = 100_000;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.csv");
    let header = EventFileHeader::new(model, 21, n);
    write_events(&header, sim.events(0..n), File::create(&path).unwrap()).unwrap();

    let reader = read_events(BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(reader.header(), &header);
    let records: Vec<_> = reader.collect::<Result<_, _>>().unwrap();
    assert_eq!(records.len() as u64, n);
    for (got, want) in records.iter().zip(sim.events(0..n)) {
        assert_eq!(got.seq, want.seq);
        assert_eq!(got.outcome_a, want.outcome_a);
        assert_eq!(got.outcome_b, want.outcome_b);
        assert!(got.setting_b.approx_eq(&want.setting_b, 1e-11));
    }
}

#[test]
fn file_estimates_equal_in_memory_estimates() {
    let sim = Simulator::planar(ModelSpec::QmSingletHalf, FRAC_PI_4, 5).unwrap();
    let n = 1_000_000;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("qm.csv");
    let header = EventFileHeader::new(ModelSpec::QmSingletHalf, 5, n);
    write_events(&header, sim.events(0..n), File::create(&path).unwrap()).unwrap();

    let memory = sim.accumulate(0..n);
    let (_, from_file) = accumulate_file(BufReader::new(File::open(&path).unwrap())).unwrap();
    let (pm, pf) = (plain_correlation(&memory).unwrap(), plain_correlation(&from_file).unwrap());
    assert_eq!(pm, pf);
    assert_eq!(grouped_correlation(&memory).unwrap(), grouped_correlation(&from_file).unwrap());
    assert!((pm.normalized + FRAC_PI_4.cos()).abs() < 4.0 * pm.normalized_se);

    let report = cmd_estimate(&InputArgs {
        input: path,
        normalized: false,
    })
    .unwrap();
    assert_eq!(report.n, n);
    assert_eq!(report.plain.value, pm.value);
    assert_eq!(report.plain.se, pm.se);
}
