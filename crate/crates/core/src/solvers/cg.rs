/// Conjugate gradients for an SPD operator given as a closure, warm-started
/// from `x`. Stops when `||r|| <= rel_tol * ||b||` or after `max_iters`.
/// Returns the iteration count.
pub(crate) fn conjugate_gradient(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iters: usize,
) -> usize {
    let n = b.len();
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let target = rel_tol * b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for k in 0..max_iters {
        if rr.sqrt() <= target {
            return k;
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return k;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    max_iters
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let m = [[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let mut x = [0.0; 3];
        let mut apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = (0..3).map(|j| m[i][j] * v[j]).sum();
            }
        };
        conjugate_gradient(&mut apply, &b, &mut x, 1e-14, 50);
        let mut check = [0.0; 3];
        apply(&x, &mut check);
        for i in 0..3 {
            assert!((check[i] - b[i]).abs() < 1e-12);
        }
    }
}
