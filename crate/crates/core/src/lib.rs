//! Monte Carlo simulation and estimation for two-particle spin-correlation
//! experiments.
//!
//! Three sampling models are provided: the spin-1/2 quantum singlet, a
//! local hidden-variable sign model whose correlation is linear in the
//! relative angle, and a conservation-constrained spin-S sampler whose
//! conditional averages at B are exactly `−m_a·cos θ`. Estimators work on
//! mergeable accumulators; the optimizer searches planar settings for the
//! largest CHSH value of any correlation function.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod eventlog;
pub mod models;
pub mod optimizer;

pub use error::{Error, Result};
