//! Correlation estimators, the conservation audit and CHSH combinations.

mod accumulator;
mod chsh;
mod curve;

pub use accumulator::{AccumulatorState, GroupStats, SETTING_MATCH_TOL};
pub use chsh::{chsh, chsh_from_events, ChshEstimate, ChshSettings};
pub use curve::{correlation_curve, CurveRow};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{check_theta, SpinMagnitude};
use accumulator::sample_variance;

/// A correlation estimate in ħ² units with its normalized (±1) companion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub se: f64,
    pub normalized: f64,
    pub normalized_se: f64,
    pub n: u64,
}

impl CorrelationEstimate {
    fn new(value: f64, se: f64, n: u64, spin: SpinMagnitude) -> Self {
        let s2 = spin.s_squared();
        CorrelationEstimate {
            value,
            se,
            normalized: value / s2,
            normalized_se: se / s2,
            n,
        }
    }
}

/// Mean of the products m_a·m_b.
pub fn plain_correlation(acc: &AccumulatorState) -> Result<CorrelationEstimate> {
    let n = acc.n();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "plain correlation needs at least 2 events, have {n}"
        )));
    }
    let (sum, sum_sq) = acc.doubled_sums();
    let mean = sum as f64 / 4.0 / n as f64;
    // Products are in quarter units, variance in sixteenths.
    let var = sample_variance(n, i128::from(sum), sum_sq).max(0.0) / 16.0;
    Ok(CorrelationEstimate::new(
        mean,
        (var / n as f64).sqrt(),
        n,
        acc.spin(),
    ))
}

/// Correlation from conditional means within the groups of fixed m_a,
/// weighting each group by the uniform marginal 1/(2S+1).
///
/// For spin 1/2 in ±1 units this is `(mean(B|A=+1) − mean(B|A=−1))/2`.
/// The m_a = 0 group of an integer spin carries zero weight and may be empty.
pub fn grouped_correlation(acc: &AccumulatorState) -> Result<CorrelationEstimate> {
    let spin = acc.spin();
    let weight = 1.0 / f64::from(spin.multiplicity());
    let mut value = 0.0;
    let mut var = 0.0;
    for m_a in spin.projections().filter(|o| o.two_m() != 0) {
        let g = acc.group(m_a.two_m());
        let (Some(mean), Some(var_b)) = (g.mean_b(), g.var_b()) else {
            return Err(Error::InsufficientData(format!(
                "group m_a = {} has no events",
                m_a.m()
            )));
        };
        value += weight * m_a.m() * mean;
        var += (weight * m_a.m()).powi(2) * var_b / g.n as f64;
    }
    Ok(CorrelationEstimate::new(value, var.sqrt(), acc.n(), spin))
}

/// Conservation residual for one group of fixed m_a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupResidual {
    pub two_m_a: i32,
    pub n: u64,
    /// `None` when the group is empty.
    pub mean_b: Option<f64>,
    /// `mean(m_b | m_a) + m_a·cos θ`, ħ units.
    pub residual: Option<f64>,
    pub se: Option<f64>,
    /// Residual and its error divided by S.
    pub normalized_residual: Option<f64>,
    pub normalized_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub theta: f64,
    pub groups: Vec<GroupResidual>,
    pub max_abs_residual: Option<f64>,
    pub max_abs_normalized_residual: Option<f64>,
}

impl AuditReport {
    pub fn group(&self, two_m_a: i32) -> Option<&GroupResidual> {
        self.groups.iter().find(|g| g.two_m_a == two_m_a)
    }

    /// Whether every populated group lies within `k` standard errors of zero.
    pub fn consistent_with_conservation(&self, k: f64) -> bool {
        self.groups.iter().all(|g| match (g.residual, g.se) {
            (Some(r), Some(se)) => r.abs() <= k * se + 1e-12,
            _ => true,
        })
    }
}

/// Residuals `mean(m_b | m_a = m) + m·cos θ` for every projection m.
pub fn conservation_residual(acc: &AccumulatorState, theta: f64) -> Result<AuditReport> {
    check_theta(theta)?;
    let spin = acc.spin();
    let s = spin.s();
    let cos = theta.cos();
    let groups: Vec<GroupResidual> = spin
        .projections()
        .map(|m_a| {
            let g = acc.group(m_a.two_m());
            let residual = g.mean_b().map(|mean| mean + m_a.m() * cos);
            let se = g.var_b().map(|v| (v / g.n as f64).sqrt());
            GroupResidual {
                two_m_a: m_a.two_m(),
                n: g.n,
                mean_b: g.mean_b(),
                residual,
                se,
                normalized_residual: residual.map(|r| r / s),
                normalized_se: se.map(|e| e / s),
            }
        })
        .collect();
    let max_abs = |f: fn(&GroupResidual) -> Option<f64>| {
        groups.iter().filter_map(f).map(f64::abs).reduce(f64::max)
    };
    Ok(AuditReport {
        theta,
        max_abs_residual: max_abs(|g| g.residual),
        max_abs_normalized_residual: max_abs(|g| g.normalized_residual),
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{EventRecord, ModelSpec, Outcome, Setting, Simulator};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn half_acc(pairs: &[(i32, i32)]) -> AccumulatorState {
        spin_acc(SpinMagnitude::HALF, pairs)
    }

    fn spin_acc(spin: SpinMagnitude, pairs: &[(i32, i32)]) -> AccumulatorState {
        let s = Setting::from_angle(0.0);
        let mut acc = AccumulatorState::new(spin);
        for (seq, &(a, b)) in pairs.iter().enumerate() {
            acc.push(&EventRecord {
                seq: seq as u64,
                setting_a: s,
                setting_b: s,
                outcome_a: Outcome::new(a, spin).unwrap(),
                outcome_b: Outcome::new(b, spin).unwrap(),
            })
            .unwrap();
        }
        acc
    }

    #[test]
    fn plain_examples() {
        let est = plain_correlation(&half_acc(&[(1, -1), (-1, 1)])).unwrap();
        assert_eq!(est.normalized, -1.0);
        assert_eq!(est.value, -0.25);
        assert_eq!(est.se, 0.0);
        let est = plain_correlation(&half_acc(&[(1, 1), (1, -1)])).unwrap();
        assert_eq!(est.normalized, 0.0);
        assert!(matches!(
            plain_correlation(&half_acc(&[(1, 1)])),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn plain_se_matches_direct_formula() {
        let pairs = [(1, 1), (1, -1), (-1, 1), (1, -1), (-1, 1)];
        let est = plain_correlation(&half_acc(&pairs)).unwrap();
        let xs: Vec<f64> = pairs.iter().map(|&(a, b)| f64::from(a * b)).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((est.normalized - mean).abs() < 1e-15);
        assert!((est.normalized_se - (var / n).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grouped_examples() {
        let est = grouped_correlation(&half_acc(&[(1, -1), (-1, 1)])).unwrap();
        assert_eq!(est.normalized, -1.0);

        // mean(B|+) = −cos θ, mean(B|−) = +cos θ with cos θ = 1/2.
        let pairs = [(1, -1), (1, -1), (1, -1), (1, 1), (-1, 1), (-1, 1), (-1, 1), (-1, -1)];
        let est = grouped_correlation(&half_acc(&pairs)).unwrap();
        assert!((est.normalized + 0.5).abs() < 1e-12);

        match grouped_correlation(&half_acc(&[(1, -1), (1, 1)])) {
            Err(Error::InsufficientData(msg)) => assert!(msg.contains("-0.5"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grouped_uses_realized_counts() {
        // Unbalanced: three A=+1 events, one A=−1.
        let pairs = [(1, -1), (1, -1), (1, 1), (-1, 1)];
        let est = grouped_correlation(&half_acc(&pairs)).unwrap();
        let mean_plus = (-1.0 - 1.0 + 1.0) / 3.0;
        let mean_minus = 1.0;
        assert!((est.normalized - 0.5 * (mean_plus - mean_minus)).abs() < 1e-15);
        let plain = plain_correlation(&half_acc(&pairs)).unwrap();
        assert!((plain.normalized - est.normalized).abs() > 0.1);
    }

    #[test]
    fn grouped_spin_one_allows_empty_zero_group() {
        let one = SpinMagnitude::new(2).unwrap();
        let acc = spin_acc(one, &[(2, -2), (-2, 2)]);
        let est = grouped_correlation(&acc).unwrap();
        // Weight 1/3 on each of m = ±1: (1/3)(−1 − 1) = −2/3.
        assert!((est.value + 2.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        // Balanced sets: every group has the same count.
        #[test]
        fn grouped_equals_plain_on_balanced_sets(
            two_s in 1u32..=4,
            per_group in 1usize..12,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let spin = SpinMagnitude::new(two_s).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t = two_s as i32;
            let mut pairs = Vec::new();
            for m_a in spin.projections() {
                for _ in 0..per_group {
                    let k = rng.random_range(0..=t);
                    pairs.push((m_a.two_m(), 2 * k - t));
                }
            }
            let acc = spin_acc(spin, &pairs);
            if acc.n() >= 2 {
                let g = grouped_correlation(&acc).unwrap();
                let p = plain_correlation(&acc).unwrap();
                prop_assert!((g.value - p.value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residual_reports_undefined_groups() {
        let one = SpinMagnitude::new(2).unwrap();
        let acc = spin_acc(one, &[(2, -2), (2, -2)]);
        let report = conservation_residual(&acc, 0.0).unwrap();
        assert_eq!(report.groups.len(), 3);
        assert_eq!(report.group(2).unwrap().residual, Some(0.0));
        assert_eq!(report.group(0).unwrap().residual, None);
        assert_eq!(report.group(-2).unwrap().residual, None);
        assert_eq!(report.max_abs_residual, Some(0.0));
    }

    #[test]
    fn lhv_residual_at_zero_is_exact() {
        let sim = Simulator::planar(ModelSpec::LhvLinear, 0.0, 3).unwrap();
        let report = conservation_residual(&sim.accumulate(0..10_000), 0.0).unwrap();
        assert_eq!(report.max_abs_residual, Some(0.0));
    }

    #[test]
    fn qm_estimators_agree() {
        let sim = Simulator::planar(ModelSpec::QmSingletHalf, PI / 3.0, 8).unwrap();
        let acc = sim.accumulate(0..200_000);
        let plain = plain_correlation(&acc).unwrap();
        let grouped = grouped_correlation(&acc).unwrap();
        assert!((plain.normalized + 0.5).abs() < 4.0 * plain.normalized_se);
        assert!((grouped.normalized - plain.normalized).abs() < 5e-3);
        let audit = conservation_residual(&acc, PI / 3.0).unwrap();
        assert!(audit.consistent_with_conservation(4.0));
    }
}
