use std::f64::consts::PI;

use super::{ConditionalKind, ModelSpec, Outcome, Setting, Sign, SpinMagnitude};
use crate::error::{Error, Result};

pub fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "relative angle {theta} rad outside [0, π]"
        )))
    }
}

/// Angle between two analyzer directions, in `[0, π]`.
pub fn relative_angle(a: &Setting, b: &Setting) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Singlet joint probability `(1 − oa·ob·cos θ)/4`.
pub fn qm_joint_prob(theta: f64, oa: Sign, ob: Sign) -> Result<f64> {
    check_theta(theta)?;
    let same = f64::from(oa.value() * ob.value());
    Ok((1.0 - same * theta.cos()) / 4.0)
}

/// Correlation of the hidden-vector sign model, `−1 + 2θ/π`.
pub fn lhv_linear_corr(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(-1.0 + 2.0 * theta / PI)
}

/// `−cos θ · S(S+1)/3` in ħ² units.
pub fn spin_s_corr(spin: SpinMagnitude, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    // S(S+1)/3 = 2S(2S+2)/12, exact in integers.
    let t = u64::from(spin.two_s());
    let numerator = t * (t + 2);
    Ok(-theta.cos() * (numerator as f64 / 12.0))
}

/// Rescale a ħ²-unit correlation to the ±1 convention.
pub fn normalized_corr(value: f64, spin: SpinMagnitude) -> f64 {
    value / spin.s_squared()
}

/// Analytic correlation of a model at relative angle `theta`, in ħ² units.
pub fn analytic_correlation(model: &ModelSpec, theta: f64) -> Result<f64> {
    match model {
        ModelSpec::QmSingletHalf => spin_s_corr(SpinMagnitude::HALF, theta),
        ModelSpec::LhvLinear => Ok(lhv_linear_corr(theta)? * SpinMagnitude::HALF.s_squared()),
        ModelSpec::ConservationSpin { spin, .. } => spin_s_corr(*spin, theta),
    }
}

/// A distribution over at most two adjacent-or-extremal projections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointConditional {
    pub lower: Outcome,
    pub upper: Outcome,
    /// Probability of `upper`; `lower` carries the rest.
    pub p_upper: f64,
}

impl TwoPointConditional {
    pub fn prob(&self, outcome: Outcome) -> f64 {
        if self.lower == self.upper {
            return if outcome == self.lower { 1.0 } else { 0.0 };
        }
        if outcome == self.upper {
            self.p_upper
        } else if outcome == self.lower {
            1.0 - self.p_upper
        } else {
            0.0
        }
    }

    pub fn mean(&self) -> f64 {
        self.lower.m() + self.p_upper * (self.upper.m() - self.lower.m())
    }

    /// Support points with non-zero probability.
    pub fn support(&self) -> impl Iterator<Item = (Outcome, f64)> + '_ {
        let pts = if self.lower == self.upper {
            [(self.lower, 1.0), (self.upper, 0.0)]
        } else {
            [(self.lower, 1.0 - self.p_upper), (self.upper, self.p_upper)]
        };
        pts.into_iter().filter(|&(_, p)| p > 0.0)
    }

    pub(crate) fn draw(&self, u: f64) -> Outcome {
        if u < self.p_upper {
            self.upper
        } else {
            self.lower
        }
    }
}

/// Distribution of m_b given m_a whose mean is exactly `−m_a·cos θ`.
pub fn conservation_conditional(
    m_a: Outcome,
    theta: f64,
    spin: SpinMagnitude,
    kind: ConditionalKind,
) -> Result<TwoPointConditional> {
    m_a.validate(spin)?;
    check_theta(theta)?;
    let t = spin.two_s() as i32;
    // Target mean in doubled units.
    let target = -f64::from(m_a.two_m()) * theta.cos();
    let dist = match kind {
        ConditionalKind::Extremal => {
            let p_upper = ((1.0 + target / f64::from(t)) / 2.0).clamp(0.0, 1.0);
            TwoPointConditional {
                lower: Outcome::from_two_m_unchecked(-t),
                upper: Outcome::from_two_m_unchecked(t),
                p_upper,
            }
        }
        ConditionalKind::Adjacent => {
            // Lattice index of the value at or below the target.
            let k = (((target + f64::from(t)) / 2.0).floor() as i32).clamp(0, t);
            let lower = 2 * k - t;
            if k == t {
                let point = Outcome::from_two_m_unchecked(lower);
                TwoPointConditional {
                    lower: point,
                    upper: point,
                    p_upper: 0.0,
                }
            } else {
                let p_upper = ((target - f64::from(lower)) / 2.0).clamp(0.0, 1.0);
                if p_upper == 0.0 {
                    let point = Outcome::from_two_m_unchecked(lower);
                    TwoPointConditional {
                        lower: point,
                        upper: point,
                        p_upper: 0.0,
                    }
                } else {
                    TwoPointConditional {
                        lower: Outcome::from_two_m_unchecked(lower),
                        upper: Outcome::from_two_m_unchecked(lower + 2),
                        p_upper,
                    }
                }
            }
        }
    };
    Ok(dist)
}
