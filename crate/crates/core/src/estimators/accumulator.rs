use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{EventRecord, Setting, SpinMagnitude};

/// Settings from different sources are considered equal within this bound.
/// Covers angles serialized with 12 significant digits.
pub const SETTING_MATCH_TOL: f64 = 1e-9;

/// Per-group sums for events sharing one value of m_a.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GroupStats {
    pub n: u64,
    /// Σ 2m_b
    pub sum_b: i64,
    /// Σ (2m_b)²
    pub sum_b_sq: i64,
}

impl GroupStats {
    pub fn mean_b(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum_b as f64 / 2.0 / self.n as f64)
    }

    /// Sample variance of m_b within the group; zero for a single event.
    pub fn var_b(&self) -> Option<f64> {
        match self.n {
            0 => None,
            1 => Some(0.0),
            n => Some(sample_variance(n, i128::from(self.sum_b), i128::from(self.sum_b_sq)) / 4.0),
        }
    }
}

/// Unbiased variance from exact integer sums.
pub(crate) fn sample_variance(n: u64, sum: i128, sum_sq: i128) -> f64 {
    let n = i128::from(n);
    let num = n * sum_sq - sum * sum;
    num as f64 / (n * (n - 1)) as f64
}

/// Mergeable sufficient statistics for every estimator.
///
/// Sums are kept in doubled-projection integers, so merging is exact and
/// the result does not depend on how a stream was sharded.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatorState {
    spin: SpinMagnitude,
    settings: Option<(Setting, Setting)>,
    n: u64,
    /// Σ (2m_a)(2m_b)
    sum_prod: i64,
    /// Σ ((2m_a)(2m_b))²
    sum_prod_sq: i128,
    groups: BTreeMap<i32, GroupStats>,
}

impl AccumulatorState {
    /// Empty accumulator; the setting pair is fixed by the first event.
    pub fn new(spin: SpinMagnitude) -> Self {
        AccumulatorState {
            spin,
            settings: None,
            n: 0,
            sum_prod: 0,
            sum_prod_sq: 0,
            groups: BTreeMap::new(),
        }
    }

    pub fn with_settings(spin: SpinMagnitude, a: Setting, b: Setting) -> Self {
        AccumulatorState {
            settings: Some((a, b)),
            ..Self::new(spin)
        }
    }

    pub fn spin(&self) -> SpinMagnitude {
        self.spin
    }

    pub fn settings(&self) -> Option<(Setting, Setting)> {
        self.settings
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Σ m_a·m_b in ħ² units.
    pub fn sum_prod(&self) -> f64 {
        self.sum_prod as f64 / 4.0
    }

    pub(crate) fn doubled_sums(&self) -> (i64, i128) {
        (self.sum_prod, self.sum_prod_sq)
    }

    /// Group statistics keyed by `2m_a`.
    pub fn groups(&self) -> &BTreeMap<i32, GroupStats> {
        &self.groups
    }

    pub fn group(&self, two_m_a: i32) -> GroupStats {
        self.groups.get(&two_m_a).copied().unwrap_or_default()
    }

    fn check_settings(&mut self, a: &Setting, b: &Setting) -> bool {
        match &self.settings {
            None => {
                self.settings = Some((*a, *b));
                true
            }
            Some((sa, sb)) => sa.approx_eq(a, SETTING_MATCH_TOL) && sb.approx_eq(b, SETTING_MATCH_TOL),
        }
    }

    pub fn push(&mut self, ev: &EventRecord) -> Result<()> {
        ev.validate(self.spin)?;
        if !self.check_settings(&ev.setting_a, &ev.setting_b) {
            return Err(Error::data(
                Some(ev.seq),
                "event settings differ from the accumulator's setting pair",
            ));
        }
        self.push_unchecked(ev);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, ev: &EventRecord) {
        let prod = ev.doubled_product();
        self.n += 1;
        self.sum_prod += prod;
        self.sum_prod_sq += i128::from(prod) * i128::from(prod);
        let g = self.groups.entry(ev.outcome_a.two_m()).or_default();
        let b = i64::from(ev.outcome_b.two_m());
        g.n += 1;
        g.sum_b += b;
        g.sum_b_sq += b * b;
    }

    /// Fold `other` into `self`. Spins must agree, and setting pairs too
    /// when both are known.
    pub fn merge(&mut self, other: &AccumulatorState) -> Result<()> {
        if self.spin != other.spin {
            return Err(Error::Config(format!(
                "cannot merge accumulators for S = {} and S = {}",
                self.spin, other.spin
            )));
        }
        if let Some((a, b)) = other.settings {
            if !self.check_settings(&a, &b) {
                return Err(Error::Config(
                    "cannot merge accumulators with different setting pairs".into(),
                ));
            }
        }
        self.merge_unchecked(other);
        Ok(())
    }

    pub(crate) fn merge_unchecked(&mut self, other: &AccumulatorState) {
        if self.settings.is_none() {
            self.settings = other.settings;
        }
        self.n += other.n;
        self.sum_prod += other.sum_prod;
        self.sum_prod_sq += other.sum_prod_sq;
        for (k, g) in &other.groups {
            let mine = self.groups.entry(*k).or_default();
            mine.n += g.n;
            mine.sum_b += g.sum_b;
            mine.sum_b_sq += g.sum_b_sq;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelSpec, Outcome, Simulator};
    use proptest::prelude::*;

    fn record(seq: u64, a: i32, b: i32) -> EventRecord {
        let s = Setting::from_angle(0.0);
        EventRecord {
            seq,
            setting_a: s,
            setting_b: s,
            outcome_a: Outcome::new(a, SpinMagnitude::HALF).unwrap(),
            outcome_b: Outcome::new(b, SpinMagnitude::HALF).unwrap(),
        }
    }

    #[test]
    fn counts_and_groups() {
        let mut acc = AccumulatorState::new(SpinMagnitude::HALF);
        acc.push(&record(0, 1, -1)).unwrap();
        acc.push(&record(1, -1, 1)).unwrap();
        acc.push(&record(2, 1, 1)).unwrap();
        assert_eq!(acc.n(), 3);
        assert_eq!(acc.sum_prod(), -0.25);
        assert_eq!(acc.group(1).n, 2);
        assert_eq!(acc.group(1).sum_b, 0);
        assert_eq!(acc.group(-1).n, 1);
        assert_eq!(acc.groups().values().map(|g| g.n).sum::<u64>(), acc.n());
    }

    #[test]
    fn rejects_foreign_settings() {
        let mut acc = AccumulatorState::new(SpinMagnitude::HALF);
        acc.push(&record(0, 1, -1)).unwrap();
        let mut other = record(1, 1, -1);
        other.setting_b = Setting::from_angle(0.5);
        assert!(matches!(acc.push(&other), Err(Error::Data { seq: Some(1), .. })));

        let mut far = AccumulatorState::new(SpinMagnitude::HALF);
        far.push(&other).unwrap();
        assert!(matches!(acc.merge(&far), Err(Error::Config(_))));
        let spin_one = AccumulatorState::new(SpinMagnitude::new(2).unwrap());
        assert!(acc.merge(&spin_one).is_err());
    }

    fn sample_accumulator(seed: u64, range: std::ops::Range<u64>) -> AccumulatorState {
        let sim = Simulator::planar(ModelSpec::QmSingletHalf, 1.0, seed).unwrap();
        let mut acc = AccumulatorState::new(SpinMagnitude::HALF);
        for ev in sim.events(range) {
            acc.push(&ev).unwrap();
        }
        acc
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn merge_is_associative_and_commutative(
            seed in any::<u64>(),
            cut1 in 0u64..200,
            cut2 in 0u64..200,
        ) {
            let (lo, hi) = (cut1.min(cut2), cut1.max(cut2));
            let x = sample_accumulator(seed, 0..lo);
            let y = sample_accumulator(seed, lo..hi);
            let z = sample_accumulator(seed, hi..300);

            let mut left = x.clone();
            left.merge(&y).unwrap();
            left.merge(&z).unwrap();

            let mut yz = y.clone();
            yz.merge(&z).unwrap();
            let mut right = x.clone();
            right.merge(&yz).unwrap();

            let mut swapped = z.clone();
            swapped.merge(&y).unwrap();
            swapped.merge(&x).unwrap();

            let whole = sample_accumulator(seed, 0..300);
            prop_assert_eq!(&left, &whole);
            prop_assert_eq!(&right, &whole);
            prop_assert_eq!(swapped.n(), whole.n());
            prop_assert_eq!(swapped.groups(), whole.groups());
            prop_assert_eq!(swapped.doubled_sums(), whole.doubled_sums());
        }
    }
}
