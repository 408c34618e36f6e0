//! Command-line front end.
//!
//! Every subcommand prints one JSON object on a single line followed by a
//! human-readable footer whose lines start with `#`. Angles are taken in
//! degrees and converted to radians on entry.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    chsh_from_events, conservation_residual, correlation_curve, grouped_correlation,
    plain_correlation, AccumulatorState, ChshSettings, CorrelationEstimate,
};
use crate::eventlog::{accumulate_file, write_events, EventFileHeader};
use crate::models::{
    analytic_correlation, check_theta, lhv_linear_corr, normalized_corr, relative_angle,
    ConditionalKind, ModelSpec, Setting, Simulator, SpinMagnitude,
};
use crate::optimizer::{maximize_chsh, violation_scan, ChshConfiguration};

const GENERATION_CHUNK: u64 = 1 << 16;
/// A CHSH estimate "violates" when it exceeds 2 by more than this many SEs.
pub const VERDICT_SIGMAS: f64 = 4.0;

#[derive(Debug, Parser, Serialize)]
#[command(name = "spincorr", version, about = "Two-particle spin-correlation simulator")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate an event file for one model and relative angle.
    Simulate(SimulateArgs),
    /// Plain and grouped correlation estimates from an event file.
    Estimate(InputArgs),
    /// Per-group conservation residuals from an event file.
    Audit(InputArgs),
    /// CHSH value from four batches, simulated or read from files.
    Chsh(ChshArgs),
    /// Correlation versus relative angle, empirical and analytic.
    Scan(ScanArgs),
    /// Search planar settings for the largest CHSH value.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Qm,
    Lhv,
    Conservation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindName {
    Extremal,
    Adjacent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionName {
    /// −cos θ
    Cos,
    /// −1 + 2θ/π
    Linear,
    /// 0
    Zero,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "qm")]
    pub model: ModelName,
    /// Spin as the integer 2S.
    #[arg(long, default_value_t = 1)]
    pub spin: u32,
    #[arg(long, value_enum, default_value = "extremal")]
    pub kind: KindName,
}

impl ModelArgs {
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let spin = SpinMagnitude::new(self.spin)?;
        let model = match self.model {
            ModelName::Qm => ModelSpec::QmSingletHalf,
            ModelName::Lhv => ModelSpec::LhvLinear,
            ModelName::Conservation => ModelSpec::ConservationSpin {
                spin,
                kind: match self.kind {
                    KindName::Extremal => ConditionalKind::Extremal,
                    KindName::Adjacent => ConditionalKind::Adjacent,
                },
            },
        };
        if model.spin() != spin {
            return Err(Error::validation(format!(
                "model '{}' is spin-1/2 only; got --spin {}",
                model.descriptor(),
                self.spin
            )));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Angle between the settings, with a at 0.
    #[arg(long, required_unless_present = "settings_deg", conflicts_with = "settings_deg")]
    pub theta_deg: Option<f64>,
    /// Absolute setting angles "a,b" instead of --theta-deg.
    #[arg(long, allow_hyphen_values = true)]
    pub settings_deg: Option<String>,
    #[arg(long)]
    pub events: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report values in ±1 units instead of ħ².
    #[arg(long)]
    pub normalized: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChshArgs {
    /// Four event files for (a,b), (a,b′), (a′,b′), (a′,b). Simulates when absent.
    #[arg(long = "in")]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Planar angles a,a′,b,b′ in degrees.
    #[arg(long, default_value = "0,90,45,135")]
    pub angles_deg: String,
    /// Events per batch.
    #[arg(long, default_value_t = 1_000_000)]
    pub events: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5.0)]
    pub grid_step_deg: f64,
    /// Events per grid angle.
    #[arg(long, default_value_t = 100_000)]
    pub events: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub normalized: bool,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeArgs {
    /// Use the analytic correlation of a model (normalized).
    #[arg(long, value_enum, conflicts_with = "function")]
    pub model: Option<ModelName>,
    #[arg(long, default_value_t = 1)]
    pub spin: u32,
    #[arg(long, value_enum, default_value = "extremal")]
    pub kind: KindName,
    /// Use a named correlation function.
    #[arg(long, value_enum)]
    pub function: Option<FunctionName>,
    #[arg(long, default_value_t = 1.0)]
    pub grid_step_deg: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub refine_tol: f64,
}

fn deg_to_theta(deg: f64) -> Result<f64> {
    let theta = deg.to_radians();
    check_theta(theta)?;
    Ok(theta)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| {
        std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
    })?))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileSummary {
    pub model: String,
    pub two_s: u32,
    pub seed: u64,
    pub events: u64,
}

impl From<&EventFileHeader> for FileSummary {
    fn from(h: &EventFileHeader) -> Self {
        FileSummary {
            model: h.model.descriptor(),
            two_s: h.spin().two_s(),
            seed: h.seed,
            events: h.events,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueWithError {
    pub value: f64,
    pub se: f64,
}

impl ValueWithError {
    fn pick(e: &CorrelationEstimate, normalized: bool) -> Self {
        if normalized {
            ValueWithError {
                value: e.normalized,
                se: e.normalized_se,
            }
        } else {
            ValueWithError {
                value: e.value,
                se: e.se,
            }
        }
    }
}

fn units(normalized: bool) -> &'static str {
    if normalized {
        "normalized"
    } else {
        "hbar2"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub config: SimulateArgs,
    pub model: String,
    pub theta_rad: f64,
    pub events_written: u64,
}

/// Generate events for one (model, θ, seed) and write them to `--out`, or
/// to `stdout` when no path is given.
pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<SimulateReport> {
    let model = args.model.model_spec()?;
    let (alpha, beta) = match (&args.settings_deg, args.theta_deg) {
        (Some(list), _) => {
            let v = parse_deg_list(list)?;
            let [a, b]: [f64; 2] = v.try_into().map_err(|v: Vec<f64>| {
                Error::validation(format!("--settings-deg takes two angles, got {}", v.len()))
            })?;
            (a.to_radians(), b.to_radians())
        }
        (None, Some(deg)) => (0.0, deg_to_theta(deg)?),
        (None, None) => return Err(Error::validation("--theta-deg or --settings-deg is required")),
    };
    if args.events < 1 {
        return Err(Error::validation("--events must be at least 1"));
    }
    let (sa, sb) = (Setting::from_angle(alpha), Setting::from_angle(beta));
    let theta = relative_angle(&sa, &sb);
    let sim = Simulator::new(model, sa, sb, args.seed)?;
    let n = args.events;
    let records = (0..n)
        .step_by(GENERATION_CHUNK as usize)
        .flat_map(|start| sim.events(start..(start + GENERATION_CHUNK).min(n)));
    let header = EventFileHeader::new(model, args.seed, n);
    let written = match &args.out {
        Some(path) => write_events(&header, records, File::create(path)?)?,
        None => write_events(&header, records, &mut *stdout)?,
    };
    Ok(SimulateReport {
        command: "simulate",
        config: args.clone(),
        model: model.descriptor(),
        theta_rad: theta,
        events_written: written,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub command: &'static str,
    pub config: InputArgs,
    pub file: FileSummary,
    pub theta_rad: f64,
    pub theta_deg: f64,
    pub units: &'static str,
    pub n: u64,
    pub plain: ValueWithError,
    pub grouped: Option<ValueWithError>,
    pub grouped_error: Option<String>,
    pub analytic: f64,
}

fn file_theta(acc: &AccumulatorState) -> Result<f64> {
    acc.settings()
        .map(|(a, b)| relative_angle(&a, &b))
        .ok_or_else(|| Error::InsufficientData("event file has no events".into()))
}

/// Plain and grouped estimates from an event file, with the analytic value
/// of the file's model as reference.
pub fn cmd_estimate(args: &InputArgs) -> Result<EstimateReport> {
    let (header, acc) = accumulate_file(open(&args.input)?)?;
    let theta = file_theta(&acc)?;
    let plain = plain_correlation(&acc)?;
    let (grouped, grouped_error) = match grouped_correlation(&acc) {
        Ok(g) => (Some(ValueWithError::pick(&g, args.normalized)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let analytic = analytic_correlation(&header.model, theta)?;
    Ok(EstimateReport {
        command: "estimate",
        config: args.clone(),
        file: FileSummary::from(&header),
        theta_rad: theta,
        theta_deg: theta.to_degrees(),
        units: units(args.normalized),
        n: acc.n(),
        plain: ValueWithError::pick(&plain, args.normalized),
        grouped,
        grouped_error,
        analytic: if args.normalized {
            normalized_corr(analytic, header.spin())
        } else {
            analytic
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditGroup {
    pub m_a: f64,
    pub n: u64,
    pub mean_b: Option<f64>,
    pub residual: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReportOut {
    pub command: &'static str,
    pub config: InputArgs,
    pub file: FileSummary,
    pub theta_rad: f64,
    pub theta_deg: f64,
    pub units: &'static str,
    pub groups: Vec<AuditGroup>,
    pub max_abs_residual: Option<f64>,
    /// "conserved" when every residual is within 4 SE of zero.
    pub verdict: &'static str,
}

/// Conservation residuals per group of fixed m_a. Normalized residuals are
/// in units of S.
pub fn cmd_audit(args: &InputArgs) -> Result<AuditReportOut> {
    let (header, acc) = accumulate_file(open(&args.input)?)?;
    let theta = file_theta(&acc)?;
    let report = conservation_residual(&acc, theta)?;
    let s = header.spin().s();
    let groups = report
        .groups
        .iter()
        .map(|g| {
            let scale = if args.normalized { s } else { 1.0 };
            AuditGroup {
                m_a: f64::from(g.two_m_a) / 2.0,
                n: g.n,
                mean_b: g.mean_b.map(|v| v / scale),
                residual: g.residual.map(|v| v / scale),
                se: g.se.map(|v| v / scale),
            }
        })
        .collect();
    Ok(AuditReportOut {
        command: "audit",
        config: args.clone(),
        file: FileSummary::from(&header),
        theta_rad: theta,
        theta_deg: theta.to_degrees(),
        units: units(args.normalized),
        groups,
        max_abs_residual: if args.normalized {
            report.max_abs_normalized_residual
        } else {
            report.max_abs_residual
        },
        verdict: if report.consistent_with_conservation(VERDICT_SIGMAS) {
            "conserved"
        } else {
            "violated"
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChshReport {
    pub command: &'static str,
    pub config: ChshArgs,
    pub angles_deg: Option<[f64; 4]>,
    /// Normalized correlations for (a,b), (a,b′), (a′,b′), (a′,b).
    pub correlations: [ValueWithError; 4],
    pub m: f64,
    pub se: f64,
    /// "violates" when M > 2 + 4·SE, otherwise "satisfies".
    pub verdict: &'static str,
}

fn parse_deg_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::validation(format!("bad angle list '{s}'")))
}

fn parse_angles(s: &str) -> Result<[f64; 4]> {
    <[f64; 4]>::try_from(parse_deg_list(s)?)
        .map_err(|_| Error::validation("--angles-deg needs four comma-separated values"))
}

/// CHSH value with standard error from four batches.
pub fn cmd_chsh(args: &ChshArgs) -> Result<ChshReport> {
    let (settings, accs, angles) = match args.inputs.len() {
        0 => {
            let model = args.model.model_spec()?;
            if args.events < 2 {
                return Err(Error::validation("--events must be at least 2"));
            }
            let deg = parse_angles(&args.angles_deg)?;
            let [a, ap, b, bp] = deg.map(f64::to_radians);
            let settings = ChshSettings::planar(a, ap, b, bp);
            let n = args.events;
            // Batch k draws seqs k·n .. (k+1)·n so the four streams are disjoint.
            let accs = settings
                .pairs()
                .iter()
                .zip(0u64..)
                .map(|((sa, sb), k)| {
                    Ok(Simulator::new(model, *sa, *sb, args.seed)?.accumulate(k * n..(k + 1) * n))
                })
                .collect::<Result<Vec<_>>>()?;
            (settings, accs, Some(deg))
        }
        4 => {
            let accs = args
                .inputs
                .iter()
                .map(|p| accumulate_file(open(p)?).map(|(_, acc)| acc))
                .collect::<Result<Vec<_>>>()?;
            let pair = |i: usize| {
                accs[i]
                    .settings()
                    .ok_or_else(|| Error::InsufficientData(format!("file {} is empty", i + 1)))
            };
            let (a, b) = pair(0)?;
            let (_, b_prime) = pair(1)?;
            let (a_prime, _) = pair(2)?;
            let settings = ChshSettings {
                a,
                a_prime,
                b,
                b_prime,
            };
            (settings, accs, None)
        }
        k => {
            return Err(Error::validation(format!(
                "chsh takes exactly four --in files, got {k}"
            )))
        }
    };
    let est = chsh_from_events(&settings, [&accs[0], &accs[1], &accs[2], &accs[3]])?;
    Ok(ChshReport {
        command: "chsh",
        config: args.clone(),
        angles_deg: angles,
        correlations: est.correlations.map(|c| ValueWithError::pick(&c, true)),
        m: est.m,
        se: est.se,
        verdict: if est.m > 2.0 + VERDICT_SIGMAS * est.se {
            "violates"
        } else {
            "satisfies"
        },
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub theta_deg: f64,
    pub theta_rad: f64,
    pub estimate: f64,
    pub se: f64,
    pub analytic: f64,
    /// |estimate − analytic| ≤ 4·SE (exact equality when SE is 0).
    pub within_4se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub command: &'static str,
    pub config: ScanArgs,
    pub model: String,
    pub units: &'static str,
    pub rows: Vec<ScanRow>,
}

/// Grid of angles from 0 to π inclusive with the given step in degrees.
pub fn theta_grid_deg(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg <= 180.0) {
        return Err(Error::validation("--grid-step-deg must lie in (0, 180]"));
    }
    let intervals = (180.0 / step_deg).round().max(1.0) as usize;
    Ok((0..=intervals)
        .map(|i| PI * i as f64 / intervals as f64)
        .collect())
}

/// Empirical correlation against the model's analytic curve.
pub fn cmd_scan(args: &ScanArgs) -> Result<ScanReport> {
    let model = args.model.model_spec()?;
    let thetas = theta_grid_deg(args.grid_step_deg)?;
    if args.events < 2 {
        return Err(Error::validation("--events must be at least 2"));
    }
    let rows: Vec<ScanRow> = correlation_curve(&model, &thetas, args.events, args.seed)?
        .iter()
        .map(|r| {
            let est = ValueWithError::pick(&r.estimate, args.normalized);
            let analytic = if args.normalized {
                r.analytic_normalized
            } else {
                r.analytic
            };
            ScanRow {
                theta_deg: r.theta.to_degrees(),
                theta_rad: r.theta,
                estimate: est.value,
                se: est.se,
                analytic,
                within_4se: (est.value - analytic).abs() <= 4.0 * est.se + 1e-12,
            }
        })
        .collect();
    if let Some(path) = &args.out {
        let mut f = std::io::BufWriter::new(File::create(path)?);
        writeln!(f, "theta_deg,theta_rad,estimate,se,analytic")?;
        for r in &rows {
            writeln!(
                f,
                "{},{},{},{},{}",
                r.theta_deg, r.theta_rad, r.estimate, r.se, r.analytic
            )?;
        }
        f.flush()?;
    }
    Ok(ScanReport {
        command: "scan",
        config: args.clone(),
        model: model.descriptor(),
        units: units(args.normalized),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigurationDeg {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub m_value: f64,
}

impl From<&ChshConfiguration> for ConfigurationDeg {
    fn from(c: &ChshConfiguration) -> Self {
        ConfigurationDeg {
            a: c.a.to_degrees(),
            a_prime: c.a_prime.to_degrees(),
            b: c.b.to_degrees(),
            b_prime: c.b_prime.to_degrees(),
            m_value: c.m_value,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub command: &'static str,
    pub config: OptimizeArgs,
    pub function: String,
    pub best: ChshConfiguration,
    pub best_deg: ConfigurationDeg,
    pub coarse_m: f64,
    pub refinement_rounds: usize,
    pub violation_fraction: f64,
    pub violating: u64,
    pub grid_configurations: u64,
}

/// Normalized analytic correlation selected by `--model` or `--function`.
pub fn correlation_function(args: &OptimizeArgs) -> Result<(String, Box<dyn Fn(f64) -> f64 + Sync>)> {
    match (args.model, args.function) {
        (Some(_), Some(_)) => Err(Error::validation("give --model or --function, not both")),
        (None, None) => Err(Error::validation("one of --model or --function is required")),
        (None, Some(FunctionName::Cos)) | (Some(ModelName::Qm), None) => {
            Ok(("-cos".into(), Box::new(|t: f64| -t.cos())))
        }
        (None, Some(FunctionName::Linear)) | (Some(ModelName::Lhv), None) => Ok((
            "linear".into(),
            Box::new(|t: f64| lhv_linear_corr(t).unwrap_or(f64::NAN)),
        )),
        (None, Some(FunctionName::Zero)) => Ok(("zero".into(), Box::new(|_| 0.0))),
        (Some(ModelName::Conservation), None) => {
            let spin = SpinMagnitude::new(args.spin)?;
            // −cos θ · S(S+1)/3 / S² = −cos θ · (2S+2)/(3·2S)
            let t = f64::from(spin.two_s());
            let factor = (t + 2.0) / (3.0 * t);
            Ok((
                format!("-cos*{factor}"),
                Box::new(move |theta: f64| -theta.cos() * factor),
            ))
        }
    }
}

pub fn cmd_optimize(args: &OptimizeArgs) -> Result<OptimizeReport> {
    let (name, corr) = correlation_function(args)?;
    let step = args.grid_step_deg.to_radians();
    let opt = maximize_chsh(&*corr, step, args.refine_tol)?;
    let scan = violation_scan(&*corr, step)?;
    Ok(OptimizeReport {
        command: "optimize",
        config: args.clone(),
        function: name,
        best_deg: ConfigurationDeg::from(&opt.best),
        best: opt.best,
        coarse_m: opt.coarse.m_value,
        refinement_rounds: opt.history.len() - 1,
        violation_fraction: scan.fraction,
        violating: scan.violating,
        grid_configurations: scan.total,
    })
}

fn emit<T: Serialize>(out: &mut dyn Write, report: &T, footer: &[String]) -> Result<()> {
    let json = serde_json::to_string(report).map_err(|e| Error::Io(e.into()))?;
    writeln!(out, "{json}")?;
    for line in footer {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

fn execute(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &config.command {
        Command::Simulate(args) => {
            let r = cmd_simulate(args, stdout)?;
            // Keep stdout clean when it carries the CSV.
            let sink: &mut dyn Write = if args.out.is_some() { stdout } else { stderr };
            emit(
                sink,
                &r,
                &[format!(
                    "simulated {} events of model {} at theta = {:.4} deg",
                    r.events_written, r.model, r.theta_rad.to_degrees()
                )],
            )
        }
        Command::Estimate(args) => {
            let r = cmd_estimate(args)?;
            let grouped = r
                .grouped
                .map_or_else(|| "n/a".into(), |g| format!("{:.6} ± {:.6}", g.value, g.se));
            emit(
                stdout,
                &r,
                &[
                    format!("theta = {:.4} deg, n = {}, units = {}", r.theta_deg, r.n, r.units),
                    format!("plain   = {:.6} ± {:.6}", r.plain.value, r.plain.se),
                    format!("grouped = {grouped}"),
                    format!("analytic ({}) = {:.6}", r.file.model, r.analytic),
                ],
            )
        }
        Command::Audit(args) => {
            let r = cmd_audit(args)?;
            let mut footer: Vec<String> = r
                .groups
                .iter()
                .map(|g| {
                    format!(
                        "m_a = {:+}: n = {}, residual = {} ± {}",
                        g.m_a,
                        g.n,
                        fmt_opt(g.residual),
                        fmt_opt(g.se)
                    )
                })
                .collect();
            footer.push(format!(
                "max |residual| = {} ({}), verdict: {}",
                fmt_opt(r.max_abs_residual),
                r.units,
                r.verdict
            ));
            emit(stdout, &r, &footer)
        }
        Command::Chsh(args) => {
            let r = cmd_chsh(args)?;
            emit(
                stdout,
                &r,
                &[format!("M = {:.5} ± {:.5}: {} the bound M <= 2", r.m, r.se, r.verdict)],
            )
        }
        Command::Scan(args) => {
            let r = cmd_scan(args)?;
            let mut footer = vec![format!("theta_deg  estimate  se  analytic ({})", r.units)];
            footer.extend(r.rows.iter().map(|row| {
                format!(
                    "{:8.3}  {:+.6}  {:.6}  {:+.6}",
                    row.theta_deg, row.estimate, row.se, row.analytic
                )
            }));
            emit(stdout, &r, &footer)
        }
        Command::Optimize(args) => {
            let r = cmd_optimize(args)?;
            let b = &r.best_deg;
            emit(
                stdout,
                &r,
                &[
                    format!(
                        "max M = {:.8} at a = {:.4}, a' = {:.4}, b = {:.4}, b' = {:.4} deg",
                        b.m_value, b.a, b.a_prime, b.b, b.b_prime
                    ),
                    format!(
                        "M > 2 on {} of {} grid configurations ({:.4}%)",
                        r.violating,
                        r.grid_configurations,
                        100.0 * r.violation_fraction
                    ),
                ],
            )
        }
    }
}

/// Parse `args`, run the subcommand and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(&config, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::Validation(_) => 1,
                _ => 2,
            }
        }
    }
}
