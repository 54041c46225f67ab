//! Certified solver for small dense penalized problems
//! `min ½||A x - y||² + α ||W x||₁` with orthonormal `W` (identity if absent).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_REFERENCE_UNKNOWNS: usize = 256;

const FISTA_ITERS: usize = 400_000;
const FISTA_CHUNK: usize = 500;
const SUPPORT_TOL: f64 = 1e-9;
const CERT_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub x: DVector<f64>,
    /// `c = W x`.
    pub coefficients: DVector<f64>,
    /// Subgradient of `||·||₁` at `c` satisfying `Bᵀ(Bc - y) + α p = 0`
    /// with `B = A Wᵀ`.
    pub subgradient: DVector<f64>,
    /// `||Bᵀ(Bc - y) + α p||_∞`.
    pub optimality_residual: f64,
    pub iterations: usize,
}

pub fn high_precision_reference_solve(
    a: &DMatrix<f64>,
    w: Option<&DMatrix<f64>>,
    y: &DVector<f64>,
    alpha: f64,
) -> Result<ReferenceSolution> {
    let n = a.ncols();
    if n > MAX_REFERENCE_UNKNOWNS {
        return Err(Error::Capacity(format!(
            "reference solver handles at most {MAX_REFERENCE_UNKNOWNS} unknowns, got {n}"
        )));
    }
    if a.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} measurements",
            a.nrows(),
            y.len()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    let wt = match w {
        Some(w) => {
            if w.nrows() != n || w.ncols() != n {
                return Err(Error::DimensionMismatch("analysis operator must be square".into()));
            }
            let gram_err = (w * w.transpose() - DMatrix::identity(n, n)).amax();
            if gram_err > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "analysis operator is not orthonormal (error {gram_err:e})"
                )));
            }
            w.transpose()
        }
        None => DMatrix::identity(n, n),
    };
    let b = a * &wt;
    let bty = b.transpose() * y;

    if alpha == 0.0 {
        let c = pinv_apply(&b, y)?;
        let p = c.map(|v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        });
        let resid = (b.transpose() * (&b * &c) - &bty).amax();
        return Ok(ReferenceSolution {
            x: &wt * &c,
            coefficients: c,
            subgradient: p,
            optimality_residual: resid,
            iterations: 0,
        });
    }

    let gram = b.transpose() * &b;
    let lip = gram.symmetric_eigenvalues().max().max(1e-300);
    let mut c = DVector::zeros(n);
    let mut iterations = 0;
    while iterations < FISTA_ITERS {
        iterations += fista(&gram, &bty, alpha, lip, &mut c, FISTA_CHUNK);
        if let Some(sol) = polish(&b, &gram, &bty, y, alpha, &c)? {
            let (c_star, p, resid) = sol;
            return Ok(ReferenceSolution {
                x: &wt * &c_star,
                coefficients: c_star,
                subgradient: p,
                optimality_residual: resid,
                iterations,
            });
        }
    }
    Err(Error::Numerical("reference solve could not certify optimality".into()))
}

// Minimizes ½cᵀGc - cᵀ(Bᵀy) + α||c||₁ from the given start.
fn fista(gram: &DMatrix<f64>, bty: &DVector<f64>, alpha: f64, lip: f64, c: &mut DVector<f64>, iters: usize) -> usize {
    let step = 1.0 / lip;
    let obj = |v: &DVector<f64>| 0.5 * v.dot(&(gram * v)) - v.dot(bty) + alpha * v.lp_norm(1);
    let mut z = c.clone();
    let mut t = 1.0f64;
    let mut f = obj(c);
    for k in 0..iters {
        let g = gram * &z - bty;
        let next = (&z - g * step).map(|v| super::soft_threshold(v, alpha * step));
        let f_next = obj(&next);
        let change = (&next - &*c).amax();
        if f_next <= f {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &next + (&next - &*c) * ((t - 1.0) / t_next);
            *c = next;
            f = f_next;
            t = t_next;
        } else {
            z = c.clone();
            t = 1.0;
        }
        if change <= 1e-15 * (1.0 + c.amax()) && k > 10 {
            return k + 1;
        }
    }
    iters
}

type Certified = (DVector<f64>, DVector<f64>, f64);

const ACTIVE_SET_STEPS: usize = 200;

// Active-set refinement seeded with the support and signs of `c`: solve the
// optimality system on the current support, drop entries whose sign flips,
// add the most violating inactive entry, and accept only a point satisfying
// the l1 optimality conditions.
fn polish(
    b: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    bty: &DVector<f64>,
    y: &DVector<f64>,
    alpha: f64,
    c: &DVector<f64>,
) -> Result<Option<Certified>> {
    let n = c.len();
    let thr = SUPPORT_TOL * c.amax().max(1.0);
    let mut signs: Vec<f64> = (0..n)
        .map(|i| if c[i].abs() > thr { c[i].signum() } else { 0.0 })
        .collect();
    for _ in 0..ACTIVE_SET_STEPS {
        let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0.0).collect();
        let mut c_star = DVector::zeros(n);
        if !support.is_empty() {
            let k = support.len();
            let g_s = DMatrix::from_fn(k, k, |i, j| gram[(support[i], support[j])]);
            let rhs = DVector::from_fn(k, |i, _| bty[support[i]] - alpha * signs[support[i]]);
            let svd = g_s.svd(true, true);
            let sol = svd
                .solve(&rhs, 1e-13 * svd.singular_values.max())
                .map_err(|e| Error::Numerical(e.to_string()))?;
            let flipped: Vec<usize> = support
                .iter()
                .enumerate()
                .filter(|&(i, &j)| sol[i] * signs[j] <= 0.0)
                .map(|(_, &j)| j)
                .collect();
            if !flipped.is_empty() {
                for j in flipped {
                    signs[j] = 0.0;
                }
                continue;
            }
            for (i, &j) in support.iter().enumerate() {
                c_star[j] = sol[i];
            }
        }
        let corr = b.transpose() * (y - b * &c_star);
        let p = &corr / alpha;
        let worst = (0..n)
            .filter(|&i| signs[i] == 0.0)
            .max_by(|&i, &j| p[i].abs().total_cmp(&p[j].abs()));
        if let Some(j) = worst.filter(|&j| p[j].abs() > 1.0 + CERT_TOL) {
            signs[j] = p[j].signum();
            continue;
        }
        let on_support = (0..n).all(|i| c_star[i] == 0.0 || (p[i] - c_star[i].signum()).abs() <= CERT_TOL);
        if !on_support {
            return Ok(None);
        }
        let resid = (gram * &c_star - bty + &p * alpha).amax();
        return Ok(Some((c_star, p, resid)));
    }
    Ok(None)
}

fn pinv_apply(b: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = b.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1e-300);
    svd.solve(y, tol).map_err(|e| Error::Numerical(e.to_string()))
}
