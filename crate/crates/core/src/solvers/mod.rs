//! Reconstruction solvers.
//!
//! * [`solve_analysis_bpdn`]: `min ||W x||₁ + γ ||y - A x||²` by monotone
//!   FISTA in the coefficient domain with continuation on `γ`.
//! * [`solve_analysis_tv`]: `min β₁ ||W x||₁ + β₂ TV(x)` subject to
//!   `||y - A x||² <= η`, by ADMM with continuation on `η`.
//! * [`high_precision_reference_solve`]: small dense penalized problems
//!   solved to a certified optimum.

mod bpdn;
mod cg;
mod reference;
mod tv;

pub use bpdn::solve_analysis_bpdn;
pub use reference::{high_precision_reference_solve, ReferenceSolution, MAX_REFERENCE_UNKNOWNS};
pub use tv::{solve_analysis_tv, solve_analysis_tv_from};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::operators::LinearOperator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub continuation_rounds: usize,
    /// Data weight of the BPDN objective.
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Squared radius of the residual ball.
    pub eta: f64,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            continuation_rounds: 3,
            gamma: 100.0,
            beta1: 1.0,
            beta2: 0.4,
            eta: 0.0,
            tol: 1e-4,
        }
    }
}

impl SolverOptions {
    /// Regularization weights used with macro-pixel ensembles. Scenes made of
    /// flat patches favour a heavy TV weight.
    pub fn macro_pixel() -> Self {
        SolverOptions {
            beta2: 4.0,
            ..Self::default()
        }
    }

    /// Regularization weights used with Walsh ensembles.
    pub fn walsh() -> Self {
        Self::macro_pixel()
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.continuation_rounds == 0 {
            return Err(Error::InvalidParameter("iteration counts must be positive".into()));
        }
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0 && self.beta1 + self.beta2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need beta1, beta2 >= 0 with a positive sum, got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: Image,
    pub iterations_used: usize,
    pub final_objective: f64,
    /// `||y - A x||₂`, recomputed from the returned solution.
    pub residual_norm: f64,
    pub converged: bool,
}

pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub(crate) fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub(crate) fn residual_norm(a: &dyn LinearOperator, x: &[f64], y: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.rows()];
    a.apply(x, &mut ax);
    ax.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

/// Side of the square image an operator's columns describe.
pub(crate) fn square_side(a: &dyn LinearOperator, y: &[f64]) -> Result<usize> {
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurements for an operator with {} rows",
            y.len(),
            a.rows()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("measurement {i}")));
    }
    let side = (a.cols() as f64).sqrt().round() as usize;
    if side * side != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} columns, not a square image",
            a.cols()
        )));
    }
    Ok(side)
}
