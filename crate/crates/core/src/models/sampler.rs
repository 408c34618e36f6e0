//! Seeded event generation.
//!
//! Every event draws from its own ChaCha8 stream: the key is expanded from
//! the run seed and the stream id is the event's `seq`. An event is
//! therefore a pure function of `(model, settings, seed, seq)` and any
//! partitioning of a seq range over workers yields the same records.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::analytic::{check_theta, conservation_conditional, relative_angle, TwoPointConditional};
use super::{ConditionalKind, EventRecord, ModelSpec, Outcome, Setting, Sign, SpinMagnitude};
use crate::error::Result;
use crate::estimators::AccumulatorState;

fn chacha_key(seed: u64) -> <ChaCha8Rng as SeedableRng>::Seed {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

/// The random stream for event `seq` of a run seeded with `seed`.
pub fn event_rng(seed: u64, seq: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(chacha_key(seed));
    rng.set_stream(seq);
    rng
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> Sign {
    if rng.random::<bool>() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

fn qm_pair_with<R: Rng + ?Sized>(p_anti: f64, rng: &mut R) -> (Sign, Sign) {
    let oa = random_sign(rng);
    let ob = if rng.random::<f64>() < p_anti {
        oa.flip()
    } else {
        oa
    };
    (oa, ob)
}

/// Draw a singlet pair at relative angle `theta`.
pub fn sample_qm_pair<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<(Sign, Sign)> {
    check_theta(theta)?;
    Ok(qm_pair_with((1.0 + theta.cos()) / 2.0, rng))
}

/// Draw a pair from the hidden-vector sign model: `A = sign(a·h)`,
/// `B = −sign(b·h)` with h uniform on the sphere.
pub fn sample_lhv_pair<R: Rng + ?Sized>(a: &Setting, b: &Setting, rng: &mut R) -> (Sign, Sign) {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let h = Setting {
            direction: [v[0] / norm, v[1] / norm, v[2] / norm],
        };
        let (da, db) = (a.dot(&h), b.dot(&h));
        if da == 0.0 || db == 0.0 {
            continue;
        }
        return (Sign::of(da), Sign::of(db).flip());
    }
}

/// Draw `m_a` uniformly over the 2S+1 projections and `m_b` from the
/// conservation-constrained conditional.
pub fn sample_conservation_pair<R: Rng + ?Sized>(
    theta: f64,
    spin: SpinMagnitude,
    kind: ConditionalKind,
    rng: &mut R,
) -> Result<(Outcome, Outcome)> {
    check_theta(theta)?;
    let m_a = uniform_projection(spin, rng);
    let cond = conservation_conditional(m_a, theta, spin, kind)?;
    Ok((m_a, cond.draw(rng.random())))
}

fn uniform_projection<R: Rng + ?Sized>(spin: SpinMagnitude, rng: &mut R) -> Outcome {
    let t = spin.two_s() as i32;
    let k = rng.random_range(0..=t);
    Outcome::from_two_m_unchecked(2 * k - t)
}

enum Kernel {
    Qm { p_anti: f64 },
    Lhv,
    Conservation {
        spin: SpinMagnitude,
        // Indexed by (two_m_a + two_s) / 2.
        conditionals: Vec<TwoPointConditional>,
    },
}

/// Event generator for one model at one setting pair.
pub struct Simulator {
    model: ModelSpec,
    setting_a: Setting,
    setting_b: Setting,
    theta: f64,
    seed: u64,
    key: <ChaCha8Rng as SeedableRng>::Seed,
    kernel: Kernel,
}

impl Simulator {
    pub fn new(model: ModelSpec, setting_a: Setting, setting_b: Setting, seed: u64) -> Result<Self> {
        let theta = relative_angle(&setting_a, &setting_b);
        let kernel = match model {
            ModelSpec::QmSingletHalf => Kernel::Qm {
                p_anti: (1.0 + setting_a.dot(&setting_b).clamp(-1.0, 1.0)) / 2.0,
            },
            ModelSpec::LhvLinear => Kernel::Lhv,
            ModelSpec::ConservationSpin { spin, kind } => Kernel::Conservation {
                spin,
                conditionals: spin
                    .projections()
                    .map(|m_a| conservation_conditional(m_a, theta, spin, kind))
                    .collect::<Result<_>>()?,
            },
        };
        Ok(Simulator {
            model,
            setting_a,
            setting_b,
            theta,
            seed,
            key: chacha_key(seed),
            kernel,
        })
    }

    /// Planar convenience: `a` at angle 0, `b` at `theta`.
    pub fn planar(model: ModelSpec, theta: f64, seed: u64) -> Result<Self> {
        check_theta(theta)?;
        Self::new(model, Setting::from_angle(0.0), Setting::from_angle(theta), seed)
    }

    pub fn model(&self) -> ModelSpec {
        self.model
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn settings(&self) -> (Setting, Setting) {
        (self.setting_a, self.setting_b)
    }

    pub fn event(&self, seq: u64) -> EventRecord {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(seq);
        let (outcome_a, outcome_b) = match &self.kernel {
            Kernel::Qm { p_anti } => {
                let (oa, ob) = qm_pair_with(*p_anti, &mut rng);
                (oa.outcome(), ob.outcome())
            }
            Kernel::Lhv => {
                let (oa, ob) = sample_lhv_pair(&self.setting_a, &self.setting_b, &mut rng);
                (oa.outcome(), ob.outcome())
            }
            Kernel::Conservation { spin, conditionals } => {
                let m_a = uniform_projection(*spin, &mut rng);
                let idx = ((m_a.two_m() + spin.two_s() as i32) / 2) as usize;
                (m_a, conditionals[idx].draw(rng.random()))
            }
        };
        EventRecord {
            seq,
            setting_a: self.setting_a,
            setting_b: self.setting_b,
            outcome_a,
            outcome_b,
        }
    }

    /// Events for `seqs`, in seq order.
    pub fn events(&self, seqs: Range<u64>) -> Vec<EventRecord> {
        seqs.into_par_iter().map(|seq| self.event(seq)).collect()
    }

    /// Accumulate the events for `seqs` without materializing them.
    pub fn accumulate(&self, seqs: Range<u64>) -> AccumulatorState {
        let spin = self.model.spin();
        let (a, b) = self.settings();
        seqs.into_par_iter()
            .fold(
                || AccumulatorState::with_settings(spin, a, b),
                |mut acc, seq| {
                    acc.push_unchecked(&self.event(seq));
                    acc
                },
            )
            .reduce(
                || AccumulatorState::with_settings(spin, a, b),
                |mut x, y| {
                    x.merge_unchecked(&y);
                    x
                },
            )
    }
}
