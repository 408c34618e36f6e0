use serde::Serialize;

use super::{plain_correlation, AccumulatorState, CorrelationEstimate, SETTING_MATCH_TOL};
use crate::error::{Error, Result};
use crate::models::Setting;

/// `|P(a,b) − P(a,b′)| + |P(a′,b′) + P(a′,b)|`.
pub fn chsh(p_ab: f64, p_abp: f64, p_apbp: f64, p_apb: f64) -> f64 {
    (p_ab - p_abp).abs() + (p_apbp + p_apb).abs()
}

/// The four analyzer settings of a CHSH experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSettings {
    pub a: Setting,
    pub a_prime: Setting,
    pub b: Setting,
    pub b_prime: Setting,
}

impl ChshSettings {
    pub fn planar(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        ChshSettings {
            a: Setting::from_angle(a),
            a_prime: Setting::from_angle(a_prime),
            b: Setting::from_angle(b),
            b_prime: Setting::from_angle(b_prime),
        }
    }

    /// Setting pairs in the order the combination consumes them:
    /// (a,b), (a,b′), (a′,b′), (a′,b).
    pub fn pairs(&self) -> [(Setting, Setting); 4] {
        [
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b_prime),
            (self.a_prime, self.b),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshEstimate {
    pub m: f64,
    pub se: f64,
    /// Estimates for (a,b), (a,b′), (a′,b′), (a′,b).
    pub correlations: [CorrelationEstimate; 4],
}

/// CHSH value from four accumulated batches, ordered as
/// [`ChshSettings::pairs`]. The error is the quadrature sum of the four
/// normalized standard errors.
pub fn chsh_from_events(
    settings: &ChshSettings,
    batches: [&AccumulatorState; 4],
) -> Result<ChshEstimate> {
    let labels = ["(a,b)", "(a,b')", "(a',b')", "(a',b)"];
    let mut correlations = Vec::with_capacity(4);
    for ((acc, (sa, sb)), label) in batches.iter().zip(settings.pairs()).zip(labels) {
        match acc.settings() {
            Some((a, b)) if a.approx_eq(&sa, SETTING_MATCH_TOL) && b.approx_eq(&sb, SETTING_MATCH_TOL) => {}
            Some(_) => {
                return Err(Error::Config(format!(
                    "batch for {label} was accumulated under a different setting pair"
                )))
            }
            None => return Err(Error::Config(format!("batch for {label} is empty"))),
        }
        correlations.push(plain_correlation(acc)?);
    }
    let c: [CorrelationEstimate; 4] = correlations.try_into().expect("four batches");
    let m = chsh(c[0].normalized, c[1].normalized, c[2].normalized, c[3].normalized);
    let se = c.iter().map(|e| e.normalized_se.powi(2)).sum::<f64>().sqrt();
    Ok(ChshEstimate {
        m,
        se,
        correlations: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelSpec, Simulator};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn chsh_examples() {
        assert_eq!(chsh(-1.0, -1.0, -1.0, -1.0), 2.0);
        assert_eq!(chsh(0.0, 0.0, 0.0, 0.0), 0.0);
        let h = FRAC_1_SQRT_2;
        let m = chsh(-h, h, -h, -h);
        assert!((m - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((m - 2.82843).abs() < 1e-5);
    }

    fn batches(model: ModelSpec, settings: &ChshSettings, n: u64) -> Vec<AccumulatorState> {
        settings
            .pairs()
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let sim = Simulator::new(model, *a, *b, 77).unwrap();
                let k = k as u64;
                sim.accumulate(k * n..(k + 1) * n)
            })
            .collect()
    }

    #[test]
    fn perfect_anticorrelation_everywhere_gives_two() {
        let settings = ChshSettings::planar(0.0, 0.0, 0.0, 0.0);
        let accs = batches(ModelSpec::QmSingletHalf, &settings, 1000);
        let est = chsh_from_events(&settings, [&accs[0], &accs[1], &accs[2], &accs[3]]).unwrap();
        assert_eq!(est.m, 2.0);
        assert_eq!(est.se, 0.0);
    }

    #[test]
    fn qm_batches_at_optimal_angles() {
        let settings = ChshSettings::planar(0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0);
        let accs = batches(ModelSpec::QmSingletHalf, &settings, 100_000);
        let est = chsh_from_events(&settings, [&accs[0], &accs[1], &accs[2], &accs[3]]).unwrap();
        assert!((est.m - 2.0 * 2f64.sqrt()).abs() < 4.0 * est.se, "{est:?}");
    }

    #[test]
    fn mismatched_batches_rejected() {
        let settings = ChshSettings::planar(0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0);
        let accs = batches(ModelSpec::QmSingletHalf, &settings, 10);
        let err = chsh_from_events(&settings, [&accs[1], &accs[0], &accs[2], &accs[3]]);
        assert!(matches!(err, Err(Error::Config(_))));
        let empty = AccumulatorState::new(crate::models::SpinMagnitude::HALF);
        assert!(chsh_from_events(&settings, [&empty, &accs[1], &accs[2], &accs[3]]).is_err());
    }
}
