use crate::imaging::Image;

/// Isotropic total variation with replicate boundary: differences that
/// would step past the last row or column are zero.
pub fn tv_value(img: &Image) -> f64 {
    let (h, w) = (img.height(), img.width());
    let x = img.data();
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            let v = x[r * w + c];
            let dv = if r + 1 < h { x[(r + 1) * w + c] - v } else { 0.0 };
            let dh = if c + 1 < w { x[r * w + c + 1] - v } else { 0.0 };
            total += (dv * dv + dh * dh).sqrt();
        }
    }
    total
}

/// Forward differences: `out[..n]` vertical, `out[n..]` horizontal.
pub fn gradient(x: &[f64], h: usize, w: usize, out: &mut [f64]) {
    let n = h * w;
    let (dv, dh) = out.split_at_mut(n);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            dv[i] = if r + 1 < h { x[i + w] - x[i] } else { 0.0 };
            dh[i] = if c + 1 < w { x[i + 1] - x[i] } else { 0.0 };
        }
    }
}

/// Adjoint of [`gradient`] (negative divergence).
pub fn gradient_adjoint(g: &[f64], h: usize, w: usize, out: &mut [f64]) {
    let n = h * w;
    let (dv, dh) = g.split_at(n);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut s = 0.0;
            if r + 1 < h {
                s -= dv[i];
            }
            if r > 0 {
                s += dv[i - w];
            }
            if c + 1 < w {
                s -= dh[i];
            }
            if c > 0 {
                s += dh[i - 1];
            }
            out[i] = s;
        }
    }
}
