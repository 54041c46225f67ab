use crate::error::Result;
use crate::imaging::Image;

/// Orthonormal DCT-II matrix, row-major `n x n`; row `k` is the `k`-th basis
/// cosine.
pub fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let alpha = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            m[k * n + i] = alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
        }
    }
    m
}

// out = Ch X Cw^T (forward) or Ch^T X Cw (inverse).
pub(super) fn separable(x: &[f64], out: &mut [f64], h: usize, w: usize, ch: &[f64], cw: &[f64], inverse: bool) {
    let mut tmp = vec![0.0; h * w];
    // rows
    for r in 0..h {
        let row = &x[r * w..(r + 1) * w];
        for k in 0..w {
            let mut s = 0.0;
            for i in 0..w {
                let c = if inverse { cw[i * w + k] } else { cw[k * w + i] };
                s += c * row[i];
            }
            tmp[r * w + k] = s;
        }
    }
    // columns
    for c in 0..w {
        for k in 0..h {
            let mut s = 0.0;
            for i in 0..h {
                let m = if inverse { ch[i * h + k] } else { ch[k * h + i] };
                s += m * tmp[i * w + c];
            }
            out[k * w + c] = s;
        }
    }
}

pub fn dct2d(img: &Image) -> Result<Image> {
    let (h, w) = (img.height(), img.width());
    let mut out = vec![0.0; h * w];
    separable(img.data(), &mut out, h, w, &dct_matrix(h), &dct_matrix(w), false);
    Image::new(h, w, out)
}

pub fn idct2d(coeffs: &Image) -> Result<Image> {
    let (h, w) = (coeffs.height(), coeffs.width());
    let mut out = vec![0.0; h * w];
    separable(coeffs.data(), &mut out, h, w, &dct_matrix(h), &dct_matrix(w), true);
    Image::new(h, w, out)
}
