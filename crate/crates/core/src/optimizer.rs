//! Search over coplanar settings {a, a′, b, b′} for the largest CHSH value
//! of a correlation function of the relative angle.
//!
//! `a` is pinned to 0: the combination depends only on relative angles, so
//! a common rotation changes nothing. The coarse stage evaluates every grid
//! point from a lookup table of the correlation at multiples of the grid
//! step; the fine stage is derivative-free coordinate descent because the
//! absolute values make the objective non-smooth.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::chsh;

/// Largest accepted grid step (5°).
pub const MAX_GRID_STEP: f64 = 5.0 * PI / 180.0;
/// A configuration violates the bound when `M > 2 + VIOLATION_TOL`.
pub const VIOLATION_TOL: f64 = 1e-9;
const MIN_REFINE_STEP: f64 = 1e-10;
const MAX_REFINE_ROUNDS: usize = 100_000;

pub type CorrFn<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshConfiguration {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub m_value: f64,
}

impl ChshConfiguration {
    /// Relative angles for (a,b), (a,b′), (a′,b′), (a′,b).
    pub fn relative_angles(&self) -> [f64; 4] {
        [
            planar_relative_angle(self.a, self.b),
            planar_relative_angle(self.a, self.b_prime),
            planar_relative_angle(self.a_prime, self.b_prime),
            planar_relative_angle(self.a_prime, self.b),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimization {
    pub best: ChshConfiguration,
    /// Best grid point before refinement.
    pub coarse: ChshConfiguration,
    /// Best value after the coarse stage and after each refinement round.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationScan {
    pub grid_points: usize,
    pub total: u64,
    pub violating: u64,
    pub fraction: f64,
    pub extremal: ChshConfiguration,
}

/// Angle between two planar directions, folded into `[0, π]`.
pub fn planar_relative_angle(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

fn eval(corr: CorrFn<'_>, theta: f64) -> Result<f64> {
    let value = corr(theta);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation { theta, value })
    }
}

/// CHSH value of `corr` at the four planar angles.
pub fn chsh_value(corr: CorrFn<'_>, a: f64, a_prime: f64, b: f64, b_prime: f64) -> Result<f64> {
    Ok(chsh(
        eval(corr, planar_relative_angle(a, b))?,
        eval(corr, planar_relative_angle(a, b_prime))?,
        eval(corr, planar_relative_angle(a_prime, b_prime))?,
        eval(corr, planar_relative_angle(a_prime, b))?,
    ))
}

fn configuration(corr: CorrFn<'_>, a_prime: f64, b: f64, b_prime: f64) -> Result<ChshConfiguration> {
    Ok(ChshConfiguration {
        a: 0.0,
        a_prime,
        b,
        b_prime,
        m_value: chsh_value(corr, 0.0, a_prime, b, b_prime)?,
    })
}

struct Grid {
    n: usize,
    step: f64,
    table: Vec<f64>,
}

impl Grid {
    fn new(corr: CorrFn<'_>, grid_step: f64) -> Result<Self> {
        if !(grid_step > 0.0 && grid_step <= MAX_GRID_STEP * (1.0 + 1e-12)) {
            return Err(Error::validation(format!(
                "grid step {grid_step} rad must lie in (0, 5°]"
            )));
        }
        let n = (TAU / grid_step).round() as usize;
        let step = TAU / n as f64;
        let table = (0..=n / 2)
            .map(|k| eval(corr, k as f64 * step))
            .collect::<Result<_>>()?;
        Ok(Grid { n, step, table })
    }

    fn corr(&self, i: usize, j: usize) -> f64 {
        let d = i.abs_diff(j);
        self.table[d.min(self.n - d)]
    }

    fn m(&self, ap: usize, b: usize, bp: usize) -> f64 {
        chsh(self.corr(0, b), self.corr(0, bp), self.corr(ap, bp), self.corr(ap, b))
    }

    /// Visit every grid point of one a′ slice.
    fn slice<F: FnMut(usize, usize, f64)>(&self, ap: usize, mut f: F) {
        for b in 0..self.n {
            for bp in 0..self.n {
                f(b, bp, self.m(ap, b, bp));
            }
        }
    }
}

type GridBest = (f64, [usize; 3]);

// Larger M wins; equal M goes to the lexicographically smallest indices.
fn better(x: GridBest, y: GridBest) -> GridBest {
    match x.0.partial_cmp(&y.0) {
        Some(Ordering::Greater) => x,
        Some(Ordering::Less) => y,
        _ => {
            if x.1 <= y.1 {
                x
            } else {
                y
            }
        }
    }
}

fn scan_grid(grid: &Grid) -> (GridBest, u64) {
    (0..grid.n)
        .into_par_iter()
        .map(|ap| {
            let mut best = (f64::NEG_INFINITY, [ap, 0, 0]);
            let mut violating = 0u64;
            grid.slice(ap, |b, bp, m| {
                if m > best.0 {
                    best = (m, [ap, b, bp]);
                }
                if m > 2.0 + VIOLATION_TOL {
                    violating += 1;
                }
            });
            (best, violating)
        })
        .reduce(
            || ((f64::NEG_INFINITY, [usize::MAX; 3]), 0),
            |(bx, vx), (by, vy)| (better(bx, by), vx + vy),
        )
}

/// Maximize the CHSH value of `corr` over planar settings with `a = 0`.
///
/// `corr` is evaluated on `[0, π]`; larger separations are folded.
pub fn maximize_chsh(corr: CorrFn<'_>, grid_step: f64, refine_tol: f64) -> Result<Optimization> {
    if refine_tol.is_nan() || refine_tol <= 0.0 {
        return Err(Error::validation("refine_tol must be positive"));
    }
    let grid = Grid::new(corr, grid_step)?;
    let ((_, [ap, b, bp]), _) = scan_grid(&grid);
    let s = grid.step;
    let coarse = configuration(corr, ap as f64 * s, b as f64 * s, bp as f64 * s)?;

    let mut x = [coarse.a_prime, coarse.b, coarse.b_prime];
    let mut best = coarse.m_value;
    let mut history = vec![best];
    let mut step = s / 2.0;
    for _ in 0..MAX_REFINE_ROUNDS {
        if step < MIN_REFINE_STEP {
            break;
        }
        let start = best;
        for coord in 0..3 {
            for dir in [1.0, -1.0] {
                let mut trial = x;
                trial[coord] += dir * step;
                let m = chsh_value(corr, 0.0, trial[0], trial[1], trial[2])?;
                if m > best {
                    best = m;
                    x = trial;
                }
            }
        }
        history.push(best);
        if best - start < refine_tol {
            step /= 2.0;
        }
    }
    let [ap, b, bp] = x.map(|v| v.rem_euclid(TAU));
    let best = configuration(corr, ap, b, bp)?;
    Ok(Optimization {
        best,
        coarse,
        history,
    })
}

/// Count grid configurations whose CHSH value exceeds 2.
pub fn violation_scan(corr: CorrFn<'_>, grid_step: f64) -> Result<ViolationScan> {
    let grid = Grid::new(corr, grid_step)?;
    let ((_, [ap, b, bp]), violating) = scan_grid(&grid);
    let s = grid.step;
    let total = (grid.n as u64).pow(3);
    Ok(ViolationScan {
        grid_points: grid.n,
        total,
        violating,
        fraction: violating as f64 / total as f64,
        extremal: configuration(corr, ap as f64 * s, b as f64 * s, bp as f64 * s)?,
    })
}
