use super::cg::conjugate_gradient;
use super::{l1, residual_norm, soft_threshold, square_side, SolveReport, SolverOptions};
use crate::error::Result;
use crate::imaging::Image;
use crate::operators::{estimate_frobenius_sq, estimate_norm_sq, LinearOperator};
use crate::transforms::{gradient, gradient_adjoint, TransformPlan, TransformSpec};

/// Radius floor relative to `||y||²`, so a noiseless `η = 0` still leaves a
/// ball that iterates can be certified to lie in.
pub const NOISELESS_ETA_FLOOR: f64 = 1e-8;

const PROBE_SEED: u64 = 0x7f4a;
const CG_ITERS: usize = 12;
const CG_TOL: f64 = 1e-5;
const MIN_ITERS_PER_ROUND: usize = 10;

/// `min β₁ ||W x||₁ + β₂ TV(x)` subject to `||y - A x||² <= η`.
pub fn solve_analysis_tv(
    a: &dyn LinearOperator,
    w: &TransformSpec,
    y: &[f64],
    opts: &SolverOptions,
) -> Result<SolveReport> {
    solve_analysis_tv_from(a, w, y, opts, None)
}

/// As [`solve_analysis_tv`], warm-started from `x0` when given.
///
/// ADMM on the splitting `z₁ = W x`, `z₂ = ∇x`, `z₃ = κ A x` with the data
/// term as the indicator of a ball around `κ y`; `κ² = n / ||A||_F²` puts the
/// three blocks on a comparable scale. The x-update solves
/// `(I + ∇ᵀ∇ + κ² AᵀA) x = rhs` by warm-started conjugate gradients. The
/// ball radius is annealed geometrically from a loose value down to `η`
/// over the continuation rounds. The returned solution is the feasible
/// iterate with the smallest regularizer (earliest on ties), or the last
/// iterate with `converged = false` if none was feasible. `converged` also
/// requires the ADMM residuals to have settled in the final round.
pub fn solve_analysis_tv_from(
    a: &dyn LinearOperator,
    w: &TransformSpec,
    y: &[f64],
    opts: &SolverOptions,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    opts.validate()?;
    let side = square_side(a, y)?;
    let plan = w.plan(side, side)?;
    let n = side * side;
    let m = a.rows();
    let y_sq: f64 = y.iter().map(|v| v * v).sum();
    let eta = opts.eta.max(NOISELESS_ETA_FLOOR * y_sq);
    let reg = Regularizer {
        plan: &plan,
        side,
        beta1: opts.beta1,
        beta2: opts.beta2,
    };

    if y_sq <= eta {
        let x = vec![0.0; n];
        return Ok(report(a, y, x, side, &reg, 0, true));
    }
    let fro = estimate_frobenius_sq(a, 8, PROBE_SEED);
    if fro == 0.0 {
        let x = vec![0.0; n];
        return Ok(report(a, y, x, side, &reg, 0, false));
    }
    let kappa = (n as f64 / fro).sqrt();

    let mut x = match x0 {
        Some(init) if init.len() == n => init.to_vec(),
        _ => {
            let l = estimate_norm_sq(a, 30, PROBE_SEED);
            let mut v = vec![0.0; n];
            a.apply_adjoint(y, &mut v);
            v.iter_mut().for_each(|e| *e /= l);
            v
        }
    };

    // K x = (W x, ∇x, κ A x)
    let mut wx = vec![0.0; n];
    let mut gx = vec![0.0; 2 * n];
    let mut ax = vec![0.0; m];
    let apply_k = |x: &[f64], wx: &mut [f64], gx: &mut [f64], ax: &mut [f64]| {
        plan.forward(x, wx);
        gradient(x, side, side, gx);
        a.apply(x, ax);
    };
    apply_k(&x, &mut wx, &mut gx, &mut ax);

    let mut z1 = wx.clone();
    let mut z2 = gx.clone();
    let mut z3: Vec<f64> = ax.iter().map(|v| kappa * v).collect();
    let (mut u1, mut u2, mut u3) = (vec![0.0; n], vec![0.0; 2 * n], vec![0.0; m]);
    let ky: Vec<f64> = y.iter().map(|v| kappa * v).collect();

    let scale = l1(&wx).max(1e-12) / n as f64;
    let mut rho = 10.0 * opts.beta1.max(opts.beta2) / scale.max(1e-6);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let rounds = opts.continuation_rounds;
    let eta0 = eta.max(1e-2 * y_sq);
    let ratio = if rounds > 1 {
        (eta0 / eta).powf(1.0 / (rounds - 1) as f64)
    } else {
        1.0
    };
    let per_round = (opts.max_iters / rounds).max(1);

    let mut rhs = vec![0.0; n];
    let mut tmp_n = vec![0.0; n];
    let mut tmp_g = vec![0.0; n];
    let mut tmp_m = vec![0.0; m];
    let mut d2 = vec![0.0; 2 * n];
    let mut g_buf = vec![0.0; 2 * n];
    let mut a_buf = vec![0.0; m];
    let mut at_buf = vec![0.0; n];
    let mut normal = |v: &[f64], out: &mut [f64]| {
        gradient(v, side, side, &mut g_buf);
        gradient_adjoint(&g_buf, side, side, out);
        a.apply(v, &mut a_buf);
        a.apply_adjoint(&a_buf, &mut at_buf);
        for i in 0..n {
            out[i] += v[i] + kappa * kappa * at_buf[i];
        }
    };
    let mut iterations = 0;
    let mut settled = false;

    for round in 0..rounds {
        let eta_k = eta * ratio.powi((rounds - 1 - round) as i32);
        let radius = kappa * eta_k.sqrt();
        let last = round + 1 == rounds;
        for it in 0..per_round {
            iterations += 1;
            // x-update
            for i in 0..n {
                tmp_n[i] = z1[i] - u1[i];
            }
            plan.inverse(&tmp_n, &mut rhs);
            for i in 0..2 * n {
                d2[i] = z2[i] - u2[i];
            }
            gradient_adjoint(&d2, side, side, &mut tmp_g);
            for i in 0..m {
                tmp_m[i] = z3[i] - u3[i];
            }
            a.apply_adjoint(&tmp_m, &mut tmp_n);
            for i in 0..n {
                rhs[i] += tmp_g[i] + kappa * tmp_n[i];
            }
            conjugate_gradient(&mut normal, &rhs, &mut x, CG_TOL, CG_ITERS);
            apply_k(&x, &mut wx, &mut gx, &mut ax);

            // z-updates
            let mut dz = 0.0;
            let t1 = opts.beta1 / rho;
            for i in 0..n {
                let v = soft_threshold(wx[i] + u1[i], t1);
                dz += (v - z1[i]).powi(2);
                z1[i] = v;
            }
            let t2 = opts.beta2 / rho;
            for i in 0..n {
                let (p, q) = (gx[i] + u2[i], gx[n + i] + u2[n + i]);
                let mag = (p * p + q * q).sqrt();
                let s = if mag > t2 { 1.0 - t2 / mag } else { 0.0 };
                let (zp, zq) = (s * p, s * q);
                dz += (zp - z2[i]).powi(2) + (zq - z2[n + i]).powi(2);
                z2[i] = zp;
                z2[n + i] = zq;
            }
            let mut dist = 0.0;
            for i in 0..m {
                tmp_m[i] = kappa * ax[i] + u3[i] - ky[i];
                dist += tmp_m[i] * tmp_m[i];
            }
            let dist = dist.sqrt();
            let shrink = if dist > radius { radius / dist } else { 1.0 };
            for i in 0..m {
                let v = ky[i] + shrink * tmp_m[i];
                dz += (v - z3[i]).powi(2);
                z3[i] = v;
            }

            // dual ascent and primal residual
            let mut r_pri = 0.0;
            let mut kx_sq = 0.0;
            let mut z_sq = 0.0;
            for i in 0..n {
                let r = wx[i] - z1[i];
                u1[i] += r;
                r_pri += r * r;
                kx_sq += wx[i] * wx[i];
                z_sq += z1[i] * z1[i];
            }
            for i in 0..2 * n {
                let r = gx[i] - z2[i];
                u2[i] += r;
                r_pri += r * r;
                kx_sq += gx[i] * gx[i];
                z_sq += z2[i] * z2[i];
            }
            for i in 0..m {
                let kax = kappa * ax[i];
                let r = kax - z3[i];
                u3[i] += r;
                r_pri += r * r;
                kx_sq += kax * kax;
                z_sq += z3[i] * z3[i];
            }
            let r_pri = r_pri.sqrt();
            let s_dual = rho * dz.sqrt();

            let res_sq: f64 = ax.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum();
            let feasible = res_sq <= eta * (1.0 + opts.tol);
            if feasible {
                let obj = reg.value_from(&wx, &gx);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, x.clone()));
                }
            }

            let eps_pri = opts.tol * kx_sq.sqrt().max(z_sq.sqrt());
            let u_norm = (sum_sq(&u1) + sum_sq(&u2) + sum_sq(&u3)).sqrt();
            let eps_dual = opts.tol * rho * u_norm;
            let settled_here = r_pri <= eps_pri && s_dual <= eps_dual && (feasible || !last);
            if it + 1 >= MIN_ITERS_PER_ROUND && settled_here {
                settled = last;
                break;
            }

            if it % 10 == 9 {
                let factor = if r_pri > 10.0 * s_dual {
                    2.0
                } else if s_dual > 10.0 * r_pri {
                    0.5
                } else {
                    1.0
                };
                if factor != 1.0 {
                    rho *= factor;
                    for u in u1.iter_mut().chain(u2.iter_mut()).chain(u3.iter_mut()) {
                        *u /= factor;
                    }
                }
            }
        }
    }
    match best {
        Some((_, xb)) => Ok(report(a, y, xb, side, &reg, iterations, settled)),
        None => Ok(report(a, y, x, side, &reg, iterations, false)),
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|e| e * e).sum()
}

struct Regularizer<'a> {
    plan: &'a TransformPlan,
    side: usize,
    beta1: f64,
    beta2: f64,
}

impl Regularizer<'_> {
    fn value_from(&self, wx: &[f64], gx: &[f64]) -> f64 {
        let n = wx.len();
        let tv: f64 = (0..n).map(|i| (gx[i] * gx[i] + gx[n + i] * gx[n + i]).sqrt()).sum();
        self.beta1 * l1(wx) + self.beta2 * tv
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut wx = vec![0.0; n];
        let mut gx = vec![0.0; 2 * n];
        self.plan.forward(x, &mut wx);
        gradient(x, self.side, self.side, &mut gx);
        self.value_from(&wx, &gx)
    }
}

fn report(
    a: &dyn LinearOperator,
    y: &[f64],
    x: Vec<f64>,
    side: usize,
    reg: &Regularizer,
    iterations: usize,
    converged: bool,
) -> SolveReport {
    let res = residual_norm(a, &x, y);
    let obj = reg.value(&x);
    SolveReport {
        solution: Image::new(side, side, x).expect("solver iterate has image shape"),
        iterations_used: iterations,
        final_objective: obj,
        residual_norm: res,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nmse;
    use crate::operators::{
        build_macro_mask_operator, build_walsh_operator, design_sampling_map, LevelFractions, MaskScheme,
    };
    use crate::solvers::solve_analysis_bpdn;

    fn two_level(side: usize) -> Image {
        Image::from_fn(side, side, |r, c| if (r / 4 + c / 6) % 2 == 0 { 0.8 } else { 0.2 })
    }

    #[test]
    fn huge_ball_gives_zero() {
        let map = design_sampling_map(16, 100, LevelFractions::DEFAULT, 1).unwrap();
        let a = build_walsh_operator(&map).unwrap();
        let y = a.measure(&two_level(16)).unwrap();
        let opts = SolverOptions {
            eta: 1e9,
            ..SolverOptions::default()
        };
        let r = solve_analysis_tv(&a, &TransformSpec::db8(1), &y, &opts).unwrap();
        assert!(r.solution.data().iter().all(|&v| v == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn full_walsh_sampling_recovers_exactly() {
        let f = LevelFractions {
            low: 1.0,
            mid: 0.0,
            high: 0.0,
        };
        let map = design_sampling_map(16, 256, f, 0).unwrap();
        let a = build_walsh_operator(&map).unwrap();
        let truth = two_level(16);
        let y = a.measure(&truth).unwrap();
        let r = solve_analysis_tv(&a, &TransformSpec::db8(2), &y, &SolverOptions::default()).unwrap();
        let e = nmse(&r.solution, &truth).unwrap();
        assert!(e <= 1e-6, "nmse {e}");
        assert!(r.residual_norm.powi(2) <= NOISELESS_ETA_FLOOR * y.iter().map(|v| v * v).sum::<f64>() * (1.0 + 1e-4));
    }

    #[test]
    fn feasible_and_deterministic_on_masks() {
        let a = build_macro_mask_operator(16, 2, MaskScheme::Binary01, 40, 3).unwrap();
        let truth = two_level(16);
        let y = a.measure(&truth).unwrap();
        let view = a.on_grid(2).unwrap();
        let opts = SolverOptions::default();
        let r1 = solve_analysis_tv(&view, &TransformSpec::db8(2), &y, &opts).unwrap();
        let r2 = solve_analysis_tv(&view, &TransformSpec::db8(2), &y, &opts).unwrap();
        assert_eq!(r1.solution, r2.solution);
        let y_sq: f64 = y.iter().map(|v| v * v).sum();
        assert!(r1.converged);
        assert!(r1.residual_norm.powi(2) <= NOISELESS_ETA_FLOOR * y_sq * (1.0 + opts.tol));
    }

    #[test]
    fn without_tv_matches_penalized_l1() {
        let map = design_sampling_map(16, 120, LevelFractions::DEFAULT, 5).unwrap();
        let a = build_walsh_operator(&map).unwrap();
        let y = a.measure(&two_level(16)).unwrap();
        let spec = TransformSpec::haar(2);
        let plan = spec.plan(16, 16).unwrap();
        for gamma in [2.0, 20.0] {
            let pen = solve_analysis_bpdn(
                &a,
                &spec,
                &y,
                &SolverOptions {
                    gamma,
                    tol: 1e-9,
                    ..SolverOptions::default()
                },
            )
            .unwrap();
            let opts = SolverOptions {
                beta1: 1.0,
                beta2: 0.0,
                eta: pen.residual_norm.powi(2),
                tol: 1e-6,
                ..SolverOptions::default()
            };
            let con = solve_analysis_tv(&a, &spec, &y, &opts).unwrap();
            let l1_of = |img: &Image| {
                let mut c = vec![0.0; 256];
                plan.forward(img.data(), &mut c);
                l1(&c)
            };
            let (p, q) = (l1_of(&pen.solution), l1_of(&con.solution));
            assert!((p - q).abs() <= 0.01 * p, "gamma {gamma}: {p} vs {q}");
        }
    }
}
