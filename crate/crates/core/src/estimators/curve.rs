use serde::Serialize;

use super::{plain_correlation, CorrelationEstimate};
use crate::error::{Error, Result};
use crate::models::{analytic_correlation, check_theta, normalized_corr, ModelSpec, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub theta: f64,
    pub estimate: CorrelationEstimate,
    /// ħ² units.
    pub analytic: f64,
    pub analytic_normalized: f64,
}

/// Empirical and analytic correlation at each angle of `thetas`.
///
/// Point `i` simulates seqs `i·n .. (i+1)·n` under `seed`, so rows are
/// independent of each other and of evaluation order.
pub fn correlation_curve(
    model: &ModelSpec,
    thetas: &[f64],
    n_per_point: u64,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    if n_per_point < 2 {
        return Err(Error::validation("need at least 2 events per point"));
    }
    thetas.iter().try_for_each(|&t| check_theta(t))?;
    thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let sim = Simulator::planar(*model, theta, seed)?;
            let start = i as u64 * n_per_point;
            let estimate = plain_correlation(&sim.accumulate(start..start + n_per_point))?;
            let analytic = analytic_correlation(model, theta)?;
            Ok(CurveRow {
                theta,
                estimate,
                analytic,
                analytic_normalized: normalized_corr(analytic, model.spin()),
            })
        })
        .collect()
}
