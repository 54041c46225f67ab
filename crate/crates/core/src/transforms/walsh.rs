//! Orthonormal 2D Walsh–Hadamard transform in sequency order.
//!
//! Coefficient `(u, v)` pairs the Walsh function with `u` sign changes down
//! the rows and `v` sign changes along the columns, so `(0, 0)` is DC and
//! low-frequency content sits in the top-left corner.
//!
//! Because of the reordering, `walsh2d` is not an involution: applying it
//! twice yields the input permuted by the sequency/natural index map. The
//! natural-ordered butterfly [`fwht_inplace`] scaled by `1/sqrt(n)` is.

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Unnormalized in-place fast Walsh–Hadamard transform, natural order.
pub fn fwht_inplace(buf: &mut [f64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// `perm[k]` is the natural (Hadamard) row index of the Walsh function with
/// sequency `k`: bit-reversal of the Gray code of `k`.
pub fn sequency_permutation(n: usize) -> Vec<usize> {
    assert!(n.is_power_of_two());
    let bits = n.trailing_zeros();
    (0..n)
        .map(|k| {
            let gray = k ^ (k >> 1);
            if bits == 0 {
                0
            } else {
                gray.reverse_bits() >> (usize::BITS - bits)
            }
        })
        .collect()
}

/// Precomputed permutations for a fixed grid.
#[derive(Clone, Debug)]
pub struct Walsh2dPlan {
    height: usize,
    width: usize,
    perm_h: Vec<usize>,
    perm_w: Vec<usize>,
}

impl Walsh2dPlan {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if !height.is_power_of_two() || !width.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "Walsh transform needs power-of-two sides, got {height}x{width}"
            )));
        }
        Ok(Walsh2dPlan {
            height,
            width,
            perm_h: sequency_permutation(height),
            perm_w: sequency_permutation(width),
        })
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        let mut tmp = vec![0.0; w.max(h)];
        let sw = 1.0 / (w as f64).sqrt();
        for r in 0..h {
            let t = &mut tmp[..w];
            t.copy_from_slice(&x[r * w..(r + 1) * w]);
            fwht_inplace(t);
            let row = &mut out[r * w..(r + 1) * w];
            for (k, o) in row.iter_mut().enumerate() {
                *o = t[self.perm_w[k]] * sw;
            }
        }
        let sh = 1.0 / (h as f64).sqrt();
        for c in 0..w {
            let t = &mut tmp[..h];
            for r in 0..h {
                t[r] = out[r * w + c];
            }
            fwht_inplace(t);
            for k in 0..h {
                out[k * w + c] = t[self.perm_h[k]] * sh;
            }
        }
    }

    pub fn inverse(&self, coeffs: &[f64], out: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        let mut tmp = vec![0.0; w.max(h)];
        let sh = 1.0 / (h as f64).sqrt();
        for c in 0..w {
            let t = &mut tmp[..h];
            for k in 0..h {
                t[self.perm_h[k]] = coeffs[k * w + c];
            }
            fwht_inplace(t);
            for r in 0..h {
                out[r * w + c] = t[r] * sh;
            }
        }
        let sw = 1.0 / (w as f64).sqrt();
        for r in 0..h {
            let t = &mut tmp[..w];
            for k in 0..w {
                t[self.perm_w[k]] = out[r * w + k];
            }
            fwht_inplace(t);
            for (c, o) in out[r * w..(r + 1) * w].iter_mut().enumerate() {
                *o = t[c] * sw;
            }
        }
    }
}

pub fn walsh2d(img: &Image) -> Result<Image> {
    let plan = Walsh2dPlan::new(img.height(), img.width())?;
    let mut out = vec![0.0; img.len()];
    plan.forward(img.data(), &mut out);
    Image::new(img.height(), img.width(), out)
}

pub fn iwalsh2d(coeffs: &Image) -> Result<Image> {
    let plan = Walsh2dPlan::new(coeffs.height(), coeffs.width())?;
    let mut out = vec![0.0; coeffs.len()];
    plan.inverse(coeffs.data(), &mut out);
    Image::new(coeffs.height(), coeffs.width(), out)
}
