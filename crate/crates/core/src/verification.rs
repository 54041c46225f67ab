//! Symmetric Bregman distances and numerical checks of the refinement bound
//!
//! ```text
//! ½||A_R (x_C - x_R)||² + α ⟨p_C - p_R, W(x_C - x_R)⟩ <= ½||y_B - B x_C||²
//! ```
//!
//! where `x_C` and `x_R` solve the penalized l1 problem with the coarse
//! operator `A_C` and with `A_R = [A_C; B]`, and `p_C`, `p_R` are the
//! subgradients certified by the reference solver. Only noiseless data is
//! checked.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::high_precision_reference_solve;

pub const BOUND_SLACK: f64 = 1e-8;
const SUBGRADIENT_TOL: f64 = 1e-9;

/// `⟨p_C - p_R, x_C - x_R⟩` for l1 subgradients, which are validated entrywise.
pub fn symmetric_bregman_l1(x_c: &[f64], x_r: &[f64], p_c: &[f64], p_r: &[f64]) -> Result<f64> {
    let n = x_c.len();
    if x_r.len() != n || p_c.len() != n || p_r.len() != n {
        return Err(Error::DimensionMismatch("Bregman arguments differ in length".into()));
    }
    check_subgradient(x_c, p_c)?;
    check_subgradient(x_r, p_r)?;
    let d: f64 = (0..n).map(|i| (p_c[i] - p_r[i]) * (x_c[i] - x_r[i])).sum();
    // Convexity makes every term nonnegative; clip rounding.
    Ok(d.max(0.0))
}

/// `2 Σ |x_R - x_C|` over entries whose signs differ; equals the inner
/// product form when no entry is zero.
pub fn sign_mismatch_bregman(x_c: &[f64], x_r: &[f64]) -> f64 {
    x_c.iter()
        .zip(x_r)
        .filter(|(a, b)| sign(**a) != sign(**b))
        .map(|(a, b)| 2.0 * (a - b).abs())
        .sum()
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn check_subgradient(x: &[f64], p: &[f64]) -> Result<()> {
    for (i, (&xi, &pi)) in x.iter().zip(p).enumerate() {
        let ok = if xi != 0.0 {
            (pi - xi.signum()).abs() <= SUBGRADIENT_TOL
        } else {
            pi.abs() <= 1.0 + SUBGRADIENT_TOL
        };
        if !ok || !pi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "entry {i}: {pi} is not an l1 subgradient at {xi}"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `½||A_R(x_C - x_R)||²`.
    pub lhs_residual_term: f64,
    /// `α D(x_C, x_R)`.
    pub lhs_bregman_term: f64,
    /// `½||y_B - B x_C||²`, half the refinement indicator.
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn lhs(&self) -> f64 {
        self.lhs_residual_term + self.lhs_bregman_term
    }
}

/// A small noiseless instance: coarse rows `A_C`, refinement rows `B`, truth,
/// weight and an optional orthonormal analysis operator.
#[derive(Clone, Debug)]
pub struct BoundInstance {
    pub a_c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub x_true: DVector<f64>,
    pub alpha: f64,
    pub analysis: Option<DMatrix<f64>>,
}

impl BoundInstance {
    /// Rademacher rows scaled by `1/sqrt(rows)` and a Gaussian truth with
    /// roughly half its entries zeroed.
    pub fn random(n: usize, rows_c: usize, rows_b: usize, alpha: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_c = rademacher(rows_c, n, rows_c + rows_b, &mut rng);
        let b = rademacher(rows_b, n, rows_c + rows_b, &mut rng);
        let x_true = DVector::from_fn(n, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            if rng.random::<bool>() {
                v
            } else {
                0.0
            }
        });
        BoundInstance {
            a_c,
            b,
            x_true,
            alpha,
            analysis: None,
        }
    }

    fn refined_operator(&self) -> DMatrix<f64> {
        let (mc, mb, n) = (self.a_c.nrows(), self.b.nrows(), self.a_c.ncols());
        DMatrix::from_fn(
            mc + mb,
            n,
            |i, j| if i < mc { self.a_c[(i, j)] } else { self.b[(i - mc, j)] },
        )
    }
}

fn rademacher(rows: usize, cols: usize, norm_rows: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let s = 1.0 / (norm_rows.max(1) as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| if rng.random::<bool>() { s } else { -s })
}

pub fn check_refinement_bound(inst: &BoundInstance) -> Result<BoundCheck> {
    if inst.b.ncols() != inst.a_c.ncols() || inst.x_true.len() != inst.a_c.ncols() {
        return Err(Error::DimensionMismatch(
            "instance blocks disagree on the number of unknowns".into(),
        ));
    }
    let w = inst.analysis.as_ref();
    let a_r = inst.refined_operator();
    let y_c = &inst.a_c * &inst.x_true;
    let y_b = &inst.b * &inst.x_true;
    let y_r = &a_r * &inst.x_true;
    let coarse = high_precision_reference_solve(&inst.a_c, w, &y_c, inst.alpha)?;
    let refined = high_precision_reference_solve(&a_r, w, &y_r, inst.alpha)?;

    let diff = &coarse.x - &refined.x;
    let lhs_residual_term = 0.5 * (&a_r * &diff).norm_squared();
    let lhs_bregman_term = if inst.alpha > 0.0 {
        inst.alpha
            * symmetric_bregman_l1(
                coarse.coefficients.as_slice(),
                refined.coefficients.as_slice(),
                coarse.subgradient.as_slice(),
                refined.subgradient.as_slice(),
            )?
    } else {
        0.0
    };
    let rhs = 0.5 * (&y_b - &inst.b * &coarse.x).norm_squared();
    Ok(BoundCheck {
        lhs_residual_term,
        lhs_bregman_term,
        rhs,
        holds: lhs_residual_term + lhs_bregman_term <= rhs + BOUND_SLACK,
    })
}

/// Monte-Carlo summary of the bound with `B` redrawn per trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedBoundSummary {
    pub alpha: f64,
    pub n: usize,
    pub rows_c: usize,
    pub rows_b: usize,
    pub draws: usize,
    pub holds_rate: f64,
    pub mean_lhs: f64,
    pub mean_rhs: f64,
    /// Standard error of the mean of `lhs - rhs`.
    pub std_error: f64,
    /// `mean_lhs <= mean_rhs + 2 std_error`.
    pub passes: bool,
}

/// Keeps `A_C`, the truth and `α` of `base` and draws a fresh Rademacher `B`
/// with `rows_b` rows for each of `draws` trials.
pub fn check_expected_bound(
    base: &BoundInstance,
    rows_b: usize,
    draws: usize,
    seed: u64,
) -> Result<ExpectedBoundSummary> {
    if draws < 2 {
        return Err(Error::InvalidParameter("need at least two draws".into()));
    }
    let n = base.a_c.ncols();
    let norm_rows = base.a_c.nrows() + rows_b;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lhs, mut rhs, mut diffs) = (Vec::new(), Vec::new(), Vec::new());
    let mut holds = 0;
    for _ in 0..draws {
        let inst = BoundInstance {
            b: rademacher(rows_b, n, norm_rows, &mut rng),
            ..base.clone()
        };
        let c = check_refinement_bound(&inst)?;
        holds += usize::from(c.holds);
        lhs.push(c.lhs());
        rhs.push(c.rhs);
        diffs.push(c.lhs() - c.rhs);
    }
    let k = draws as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / k;
    let (mean_lhs, mean_rhs, mean_diff) = (mean(&lhs), mean(&rhs), mean(&diffs));
    let var = diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (k - 1.0);
    let std_error = (var / k).sqrt();
    Ok(ExpectedBoundSummary {
        alpha: base.alpha,
        n,
        rows_c: base.a_c.nrows(),
        rows_b,
        draws,
        holds_rate: holds as f64 / k,
        mean_lhs,
        mean_rhs,
        std_error,
        passes: mean_lhs <= mean_rhs + 2.0 * std_error,
    })
}

pub fn write_summary_csv(path: &Path, rows: &[ExpectedBoundSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
