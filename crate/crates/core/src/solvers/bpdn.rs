use super::{l1, residual_norm, soft_threshold, square_side, SolveReport, SolverOptions};
use crate::error::Result;
use crate::imaging::Image;
use crate::operators::{estimate_norm_sq, LinearOperator};
use crate::transforms::TransformSpec;

const POWER_ITERS: usize = 30;
const POWER_SEED: u64 = 0x5eed;

/// `min ||W x||₁ + γ ||y - A x||²` over square images.
///
/// Works on `c = W x`. Each continuation round multiplies `γ` by ten up to
/// the requested value, warm-starting from the previous round. Within a
/// round, FISTA only accepts iterates that do not increase the objective and
/// restarts its momentum otherwise. Convergence means the gradient mapping
/// norm dropped below `tol sqrt(n)` in the final round; subgradients of the
/// l1 norm have entries in `[-1, 1]`, so this threshold is scale free.
pub fn solve_analysis_bpdn(
    a: &dyn LinearOperator,
    w: &TransformSpec,
    y: &[f64],
    opts: &SolverOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let side = square_side(a, y)?;
    let plan = w.plan(side, side)?;
    let n = side * side;
    let m = a.rows();
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();

    let lip_a = estimate_norm_sq(a, POWER_ITERS, POWER_SEED) * 1.01;
    let mut x = vec![0.0; n];
    if lip_a == 0.0 || y_norm == 0.0 {
        return Ok(finish(a, y, x, side, opts.gamma, &plan, 0, true));
    }
    a.apply_adjoint(y, &mut x);
    x.iter_mut().for_each(|v| *v /= lip_a);

    let mut c = vec![0.0; n];
    plan.forward(&x, &mut c);
    let mut ax_c = vec![0.0; m];
    a.apply(&x, &mut ax_c);

    let mut z = c.clone();
    let mut ax_z = ax_c.clone();
    let mut c_new = vec![0.0; n];
    let mut ax_new = vec![0.0; m];
    let mut r = vec![0.0; m];
    let mut grad_x = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut xbuf = vec![0.0; n];

    let rounds = opts.continuation_rounds;
    let per_round = (opts.max_iters / rounds).max(1);
    let mut iterations = 0;
    let mut converged = false;
    for round in 0..rounds {
        let gamma = opts.gamma / 10f64.powi((rounds - 1 - round) as i32);
        let lip = 2.0 * gamma * lip_a;
        let step = 1.0 / lip;
        let objective =
            |coef: &[f64], ax: &[f64]| l1(coef) + gamma * ax.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        let mut f_c = objective(&c, &ax_c);
        let mut t = 1.0f64;
        z.copy_from_slice(&c);
        ax_z.copy_from_slice(&ax_c);
        let last = round + 1 == rounds;
        for _ in 0..per_round {
            iterations += 1;
            for i in 0..m {
                r[i] = ax_z[i] - y[i];
            }
            a.apply_adjoint(&r, &mut grad_x);
            plan.forward(&grad_x, &mut grad);
            let mut gm = 0.0;
            for i in 0..n {
                let g = 2.0 * gamma * grad[i];
                c_new[i] = soft_threshold(z[i] - step * g, step);
                gm += (z[i] - c_new[i]).powi(2);
            }
            let gmap = lip * gm.sqrt();
            plan.inverse(&c_new, &mut xbuf);
            a.apply(&xbuf, &mut ax_new);
            let f_new = objective(&c_new, &ax_new);

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            if f_new <= f_c {
                let mom = (t - 1.0) / t_next;
                for i in 0..n {
                    z[i] = c_new[i] + mom * (c_new[i] - c[i]);
                }
                for i in 0..m {
                    ax_z[i] = ax_new[i] + mom * (ax_new[i] - ax_c[i]);
                }
                std::mem::swap(&mut c, &mut c_new);
                std::mem::swap(&mut ax_c, &mut ax_new);
                f_c = f_new;
                t = t_next;
            } else {
                // Restart from the last accepted iterate.
                z.copy_from_slice(&c);
                ax_z.copy_from_slice(&ax_c);
                t = 1.0;
            }
            if gmap <= opts.tol * (n as f64).sqrt() {
                converged = last;
                break;
            }
        }
    }
    plan.inverse(&c, &mut x);
    Ok(finish(a, y, x, side, opts.gamma, &plan, iterations, converged))
}

fn finish(
    a: &dyn LinearOperator,
    y: &[f64],
    x: Vec<f64>,
    side: usize,
    gamma: f64,
    plan: &crate::transforms::TransformPlan,
    iterations: usize,
    converged: bool,
) -> SolveReport {
    let res = residual_norm(a, &x, y);
    let mut c = vec![0.0; x.len()];
    plan.forward(&x, &mut c);
    let solution = Image::new(side, side, x).expect("solver iterate has image shape");
    SolveReport {
        solution,
        iterations_used: iterations,
        final_objective: l1(&c) + gamma * res * res,
        residual_norm: res,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_walsh_operator, design_sampling_map, Identity, LevelFractions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_data_gives_zero() {
        let r = solve_analysis_bpdn(
            &Identity(64),
            &TransformSpec::dct(),
            &[0.0; 64],
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(r.solution.data().iter().all(|&v| v == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn identity_problem_is_soft_thresholding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gamma = 50.0;
        let opts = SolverOptions {
            gamma,
            tol: 1e-12,
            ..SolverOptions::default()
        };
        let r = solve_analysis_bpdn(&Identity(16), &TransformSpec::identity(), &y, &opts).unwrap();
        for (x, v) in r.solution.data().iter().zip(&y) {
            assert!((x - soft_threshold(*v, 1.0 / (2.0 * gamma))).abs() < 1e-10);
        }
        assert!(r.converged);
    }

    #[test]
    fn recovers_wavelet_sparse_image_from_half_the_walsh_rows() {
        let side = 32;
        let spec = TransformSpec::db8(3);
        let plan = spec.plan(side, side).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut c = vec![0.0; side * side];
        for _ in 0..10 {
            let k = rng.random_range(0..64);
            c[k] = rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let mut x = vec![0.0; side * side];
        plan.inverse(&c, &mut x);
        let truth = Image::new(side, side, x).unwrap();
        let map = design_sampling_map(side, 512, LevelFractions::DEFAULT, 4).unwrap();
        let a = build_walsh_operator(&map).unwrap();
        let y = a.measure(&truth).unwrap();
        let opts = SolverOptions {
            gamma: 1e4,
            tol: 1e-7,
            ..SolverOptions::default()
        };
        let r = solve_analysis_bpdn(&a, &spec, &y, &opts).unwrap();
        let err = crate::metrics::nmse(&r.solution, &truth).unwrap();
        assert!(err <= 1e-4, "nmse {err}");
    }

    #[test]
    fn reproducible_with_recomputed_residual() {
        let map = design_sampling_map(16, 100, LevelFractions::DEFAULT, 1).unwrap();
        let a = build_walsh_operator(&map).unwrap();
        let truth = Image::from_fn(16, 16, |r, c| if r < 8 && c > 4 { 1.0 } else { 0.2 });
        let y = a.measure(&truth).unwrap();
        let opts = SolverOptions {
            gamma: 50.0,
            max_iters: 600,
            ..SolverOptions::default()
        };
        let r1 = solve_analysis_bpdn(&a, &TransformSpec::haar(2), &y, &opts).unwrap();
        let r2 = solve_analysis_bpdn(&a, &TransformSpec::haar(2), &y, &opts).unwrap();
        assert_eq!(r1.solution, r2.solution);
        assert!((r1.residual_norm - residual_norm(&a, r1.solution.data(), &y)).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_data() {
        let mut y = vec![0.0; 16];
        y[3] = f64::NAN;
        assert!(solve_analysis_bpdn(&Identity(16), &TransformSpec::identity(), &y, &SolverOptions::default()).is_err());
    }
}
