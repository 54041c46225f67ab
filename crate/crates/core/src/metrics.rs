//! Reconstruction quality: NMSE and SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Side of the uniform SSIM window.
pub const SSIM_WINDOW: usize = 8;
/// `(0.01 L)²` and `(0.03 L)²` for dynamic range `L = 1`.
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmse: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn compute(estimate: &Image, reference: &Image) -> Result<Self> {
        Ok(MetricReport {
            nmse: nmse(estimate, reference)?,
            ssim: ssim(estimate, reference)?,
        })
    }
}

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// `||x̂ - x||² / ||x||²`.
pub fn nmse(estimate: &Image, reference: &Image) -> Result<f64> {
    check_shapes(estimate, reference)?;
    let den: f64 = reference.data().iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::InvalidParameter("NMSE reference is identically zero".into()));
    }
    let num: f64 = estimate
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(num / den)
}

/// Local SSIM of every window position (top-left corner order), computed
/// from summed-area tables. Population statistics over the window.
pub fn ssim_map(estimate: &Image, reference: &Image) -> Result<Image> {
    check_shapes(estimate, reference)?;
    let (h, w) = (estimate.height(), estimate.width());
    let k = SSIM_WINDOW;
    if h < k || w < k {
        return Err(Error::DimensionMismatch(format!(
            "SSIM needs at least {k}x{k} pixels, got {h}x{w}"
        )));
    }
    let (x, y) = (estimate.data(), reference.data());
    let sat = |f: &dyn Fn(usize) -> f64| {
        let mut t = vec![0.0; (h + 1) * (w + 1)];
        for r in 0..h {
            let mut row = 0.0;
            for c in 0..w {
                row += f(r * w + c);
                t[(r + 1) * (w + 1) + c + 1] = t[r * (w + 1) + c + 1] + row;
            }
        }
        t
    };
    let sx = sat(&|i| x[i]);
    let sy = sat(&|i| y[i]);
    let sxx = sat(&|i| x[i] * x[i]);
    let syy = sat(&|i| y[i] * y[i]);
    let sxy = sat(&|i| x[i] * y[i]);
    let (oh, ow) = (h - k + 1, w - k + 1);
    let area = (k * k) as f64;
    let window_sum = |t: &[f64], r: usize, c: usize| {
        let s = w + 1;
        t[(r + k) * s + c + k] - t[r * s + c + k] - t[(r + k) * s + c] + t[r * s + c]
    };
    let out = Image::from_fn(oh, ow, |r, c| {
        let mx = window_sum(&sx, r, c) / area;
        let my = window_sum(&sy, r, c) / area;
        let vx = (window_sum(&sxx, r, c) / area - mx * mx).max(0.0);
        let vy = (window_sum(&syy, r, c) / area - my * my).max(0.0);
        let cxy = window_sum(&sxy, r, c) / area - mx * my;
        ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2)) / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
    });
    Ok(out)
}

/// Mean local SSIM over all 8x8 windows at stride 1.
pub fn ssim(estimate: &Image, reference: &Image) -> Result<f64> {
    Ok(ssim_map(estimate, reference)?.mean())
}

/// Mean local SSIM over windows for which `keep(row, col)` holds for the
/// window's top-left corner. Errors when no window qualifies.
pub fn ssim_where(estimate: &Image, reference: &Image, keep: impl Fn(usize, usize) -> bool) -> Result<f64> {
    let map = ssim_map(estimate, reference)?;
    let (mut total, mut count) = (0.0, 0usize);
    for r in 0..map.height() {
        for c in 0..map.width() {
            if keep(r, c) {
                total += map.get(r, c);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidParameter("no SSIM window satisfies the mask".into()));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn nmse_closed_forms() {
        let x = random(9, 7, 1);
        assert_eq!(nmse(&x, &x).unwrap(), 0.0);
        assert_eq!(nmse(&Image::zeros(9, 7), &x).unwrap(), 1.0);
        assert!((nmse(&x.scaled(2.0), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse(&x, &Image::zeros(9, 7)).is_err());
    }

    #[test]
    fn nmse_is_quadratic_in_the_error() {
        let x = random(8, 8, 2);
        let e = random(8, 8, 3);
        let add = |t: f64| Image::new(8, 8, x.data().iter().zip(e.data()).map(|(a, b)| a + t * b).collect()).unwrap();
        let (n1, n3) = (nmse(&add(0.1), &x).unwrap(), nmse(&add(0.3), &x).unwrap());
        assert!((n3 / n1 - 9.0).abs() < 1e-10);
    }

    #[test]
    fn ssim_identity_shift_and_symmetry() {
        let x = random(32, 32, 4);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let shifted = Image::new(32, 32, x.data().iter().map(|v| v + 0.5).collect()).unwrap();
        assert!(ssim(&shifted, &x).unwrap() < 1.0);
        let y = random(32, 32, 5);
        assert!((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs() < 1e-14);
        assert!(ssim(&Image::zeros(7, 20), &Image::zeros(7, 20)).is_err());
    }

    #[test]
    fn ssim_matches_direct_window_loops() {
        let x = random(32, 32, 6);
        let y = random(32, 32, 7);
        let mut total = 0.0;
        let mut count = 0.0;
        for r in 0..=24 {
            for c in 0..=24 {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..8 {
                    for j in 0..8 {
                        mx += x.get(r + i, c + j);
                        my += y.get(r + i, c + j);
                    }
                }
                mx /= 64.0;
                my /= 64.0;
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for i in 0..8 {
                    for j in 0..8 {
                        let (a, b) = (x.get(r + i, c + j) - mx, y.get(r + i, c + j) - my);
                        vx += a * a;
                        vy += b * b;
                        cxy += a * b;
                    }
                }
                vx /= 64.0;
                vy /= 64.0;
                cxy /= 64.0;
                total +=
                    ((2.0 * mx * my + 1e-4) * (2.0 * cxy + 9e-4)) / ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
                count += 1.0;
            }
        }
        assert!((ssim(&x, &y).unwrap() - total / count).abs() < 1e-10);
    }
}
