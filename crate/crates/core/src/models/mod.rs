//! Settings, outcomes and the three sampling models.
//!
//! Projections are stored doubled (`two_m = 2m`, `two_s = 2S`) so that
//! half-integer spins stay on an exact integer lattice. Correlations in
//! ħ² units are `m_a·m_b`; the normalized (±1) convention divides by S².

mod analytic;
mod sampler;

pub use analytic::{
    analytic_correlation, check_theta, conservation_conditional, lhv_linear_corr,
    normalized_corr, qm_joint_prob, relative_angle, spin_s_corr, TwoPointConditional,
};
pub use sampler::{
    event_rng, sample_conservation_pair, sample_lhv_pair, sample_qm_pair, Simulator,
};

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on the Euclidean norm of a setting direction.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// An analyzer direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    direction: [f64; 3],
}

impl Setting {
    pub fn new(direction: [f64; 3]) -> Result<Self> {
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::validation(format!(
                "setting direction {direction:?} has norm {norm}, expected 1"
            )));
        }
        Ok(Setting { direction })
    }

    /// Planar setting at angle `theta` in the x-y plane.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Setting {
            direction: [c, s, 0.0],
        }
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    pub fn dot(&self, other: &Setting) -> f64 {
        self.direction
            .iter()
            .zip(other.direction.iter())
            .map(|(x, y)| x * y)
            .sum()
    }

    /// Angle in `[0, 2π)` for settings lying in the x-y plane, `None` otherwise.
    pub fn planar_angle(&self) -> Option<f64> {
        if self.direction[2].abs() > UNIT_NORM_TOL {
            return None;
        }
        let mut phi = self.direction[1].atan2(self.direction[0]);
        if phi < 0.0 {
            phi += TAU;
        }
        if phi >= TAU {
            phi = 0.0;
        }
        Some(phi)
    }

    pub fn approx_eq(&self, other: &Setting, tol: f64) -> bool {
        self.direction
            .iter()
            .zip(other.direction.iter())
            .all(|(x, y)| (x - y).abs() <= tol)
    }
}

/// Spin magnitude S, stored as `2S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct SpinMagnitude {
    two_s: u32,
}

impl SpinMagnitude {
    pub const HALF: SpinMagnitude = SpinMagnitude { two_s: 1 };

    pub fn new(two_s: u32) -> Result<Self> {
        if two_s == 0 {
            return Err(Error::validation("two_s must be at least 1"));
        }
        Ok(SpinMagnitude { two_s })
    }

    pub fn two_s(self) -> u32 {
        self.two_s
    }

    pub fn s(self) -> f64 {
        f64::from(self.two_s) / 2.0
    }

    pub fn s_squared(self) -> f64 {
        let t = f64::from(self.two_s);
        t * t / 4.0
    }

    /// Number of projections, 2S+1.
    pub fn multiplicity(self) -> u32 {
        self.two_s + 1
    }

    /// All valid projections from −S to +S.
    pub fn projections(self) -> impl Iterator<Item = Outcome> {
        let t = self.two_s as i32;
        (0..=t).map(move |k| Outcome { two_m: 2 * k - t })
    }
}

impl fmt::Display for SpinMagnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.two_s.is_multiple_of(2) {
            write!(f, "{}", self.two_s / 2)
        } else {
            write!(f, "{}/2", self.two_s)
        }
    }
}

/// A measured projection m, stored as `2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Outcome {
    two_m: i32,
}

impl Outcome {
    pub fn new(two_m: i32, spin: SpinMagnitude) -> Result<Self> {
        let outcome = Outcome { two_m };
        outcome.validate(spin)?;
        Ok(outcome)
    }

    pub fn two_m(self) -> i32 {
        self.two_m
    }

    pub fn m(self) -> f64 {
        f64::from(self.two_m) / 2.0
    }

    pub fn is_valid_for(self, spin: SpinMagnitude) -> bool {
        let t = spin.two_s as i32;
        self.two_m.abs() <= t && (self.two_m - t) % 2 == 0
    }

    pub fn validate(self, spin: SpinMagnitude) -> Result<()> {
        if self.is_valid_for(spin) {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "projection 2m = {} is not on the lattice for S = {spin}",
                self.two_m
            )))
        }
    }

    pub(crate) const fn from_two_m_unchecked(two_m: i32) -> Self {
        Outcome { two_m }
    }
}

/// Two-valued outcome of a spin-1/2 measurement, in ±1 units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn outcome(self) -> Outcome {
        Outcome::from_two_m_unchecked(self.value())
    }

    fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// One joint measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub seq: u64,
    pub setting_a: Setting,
    pub setting_b: Setting,
    pub outcome_a: Outcome,
    pub outcome_b: Outcome,
}

impl EventRecord {
    /// Product m_a·m_b in quarter-ħ² units (product of the doubled projections).
    pub fn doubled_product(&self) -> i64 {
        i64::from(self.outcome_a.two_m) * i64::from(self.outcome_b.two_m)
    }

    pub fn product(&self) -> f64 {
        self.doubled_product() as f64 / 4.0
    }

    pub fn validate(&self, spin: SpinMagnitude) -> Result<()> {
        for o in [self.outcome_a, self.outcome_b] {
            if !o.is_valid_for(spin) {
                return Err(Error::data(
                    Some(self.seq),
                    format!("projection 2m = {} is not on the lattice for S = {spin}", o.two_m),
                ));
            }
        }
        // Implied by the lattice check, kept as the stated bound on products.
        let bound = i64::from(spin.two_s) * i64::from(spin.two_s);
        if self.doubled_product().abs() > bound {
            return Err(Error::data(Some(self.seq), "product outside [-S², S²]"));
        }
        Ok(())
    }
}

/// Conditional distribution family for the conservation-constrained sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionalKind {
    /// Two-point support on {−S, +S}.
    Extremal,
    /// Two-point support on the lattice values bracketing the target mean.
    Adjacent,
}

impl FromStr for ConditionalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extremal" => Ok(ConditionalKind::Extremal),
            "adjacent" => Ok(ConditionalKind::Adjacent),
            other => Err(Error::validation(format!("unknown conditional kind '{other}'"))),
        }
    }
}

impl fmt::Display for ConditionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionalKind::Extremal => "extremal",
            ConditionalKind::Adjacent => "adjacent",
        })
    }
}

/// Which sampling theory generated a set of events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    /// Spin-1/2 quantum singlet.
    QmSingletHalf,
    /// Hidden-vector sign model with linear correlation.
    LhvLinear,
    /// Uniform marginal at A, conditional at B with the conserved mean.
    ConservationSpin {
        spin: SpinMagnitude,
        kind: ConditionalKind,
    },
}

impl ModelSpec {
    pub fn spin(&self) -> SpinMagnitude {
        match self {
            ModelSpec::QmSingletHalf | ModelSpec::LhvLinear => SpinMagnitude::HALF,
            ModelSpec::ConservationSpin { spin, .. } => *spin,
        }
    }

    /// Short name used in event file headers and on the command line.
    pub fn descriptor(&self) -> String {
        match self {
            ModelSpec::QmSingletHalf => "qm".to_string(),
            ModelSpec::LhvLinear => "lhv".to_string(),
            ModelSpec::ConservationSpin { kind, .. } => format!("conservation:{kind}"),
        }
    }

    /// Inverse of [`ModelSpec::descriptor`]; `two_s` supplies the spin.
    pub fn from_descriptor(descriptor: &str, two_s: u32) -> Result<Self> {
        let spin = SpinMagnitude::new(two_s)?;
        let model = match descriptor.split_once(':') {
            None if descriptor == "qm" => ModelSpec::QmSingletHalf,
            None if descriptor == "lhv" => ModelSpec::LhvLinear,
            None if descriptor == "conservation" => ModelSpec::ConservationSpin {
                spin,
                kind: ConditionalKind::Extremal,
            },
            Some(("conservation", kind)) => ModelSpec::ConservationSpin {
                spin,
                kind: kind.parse()?,
            },
            _ => {
                return Err(Error::validation(format!(
                    "unknown model descriptor '{descriptor}'"
                )))
            }
        };
        if model.spin() != spin {
            return Err(Error::validation(format!(
                "model '{descriptor}' requires two_s = 1, got {two_s}"
            )));
        }
        Ok(model)
    }
}
