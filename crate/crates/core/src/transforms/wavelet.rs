//! Periodized orthonormal 2D discrete wavelet transform.
//!
//! Coefficients are stored in place in Mallat layout: after `L` levels the
//! top-left `(h >> L) x (w >> L)` block holds the approximation band and the
//! detail bands surround it.

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Scaling filter of the Daubechies wavelet with 8 vanishing moments
/// (16 taps), in synthesis orientation.
const DB8: [f64; 16] = [
    0.054_415_842_243_104_01,
    0.312_871_590_914_299_95,
    0.675_630_736_297_289_8,
    0.585_354_683_654_206_7,
    -0.015_829_105_256_349_306,
    -0.284_015_542_961_546_9,
    0.000_472_484_573_913_282_8,
    0.128_747_426_620_478_47,
    -0.017_369_301_001_807_547,
    -0.044_088_253_930_794_755,
    0.013_981_027_917_398_282,
    0.008_746_094_047_405_777,
    -0.004_870_352_993_451_574,
    -0.000_391_740_373_376_947_05,
    0.000_675_449_406_450_569_3,
    -0.000_117_476_784_124_769_53,
];

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wavelet {
    Db8,
    Haar,
}

impl Wavelet {
    /// Low-pass scaling filter.
    pub fn scaling_filter(&self) -> &'static [f64] {
        match self {
            Wavelet::Db8 => &DB8,
            Wavelet::Haar => &HAAR,
        }
    }

    /// High-pass filter `g[n] = (-1)^n h[L-1-n]`.
    pub fn wavelet_filter(&self) -> Vec<f64> {
        let h = self.scaling_filter();
        let l = h.len();
        (0..l)
            .map(|n| if n % 2 == 0 { h[l - 1 - n] } else { -h[l - 1 - n] })
            .collect()
    }
}

pub(super) fn check_levels(height: usize, width: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidParameter("wavelet levels must be >= 1".into()));
    }
    let q = 1usize << levels;
    if height % q != 0 || width % q != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{height}x{width} grid is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

// a[k] = sum_n h[n] x[(2k+n) mod N], d[k] likewise with g.
fn analysis_1d(x: &[f64], out: &mut [f64], h: &[f64], g: &[f64]) {
    let n = x.len();
    let half = n / 2;
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (t, (&hl, &gl)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * k + t) % n];
            a += hl * v;
            d += gl * v;
        }
        out[k] = a;
        out[half + k] = d;
    }
}

fn synthesis_1d(c: &[f64], out: &mut [f64], h: &[f64], g: &[f64]) {
    let n = c.len();
    let half = n / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..half {
        let (a, d) = (c[k], c[half + k]);
        for (t, (&hl, &gl)) in h.iter().zip(g).enumerate() {
            out[(2 * k + t) % n] += hl * a + gl * d;
        }
    }
}

pub(super) fn forward_inplace(data: &mut [f64], height: usize, width: usize, levels: usize, wv: Wavelet) {
    let h = wv.scaling_filter();
    let g = wv.wavelet_filter();
    let mut src = vec![0.0; height.max(width)];
    let mut dst = vec![0.0; height.max(width)];
    for lvl in 0..levels {
        let (lh, lw) = (height >> lvl, width >> lvl);
        for r in 0..lh {
            let row = &mut data[r * width..r * width + lw];
            src[..lw].copy_from_slice(row);
            analysis_1d(&src[..lw], &mut dst[..lw], h, &g);
            row.copy_from_slice(&dst[..lw]);
        }
        for c in 0..lw {
            for r in 0..lh {
                src[r] = data[r * width + c];
            }
            analysis_1d(&src[..lh], &mut dst[..lh], h, &g);
            for r in 0..lh {
                data[r * width + c] = dst[r];
            }
        }
    }
}

pub(super) fn inverse_inplace(data: &mut [f64], height: usize, width: usize, levels: usize, wv: Wavelet) {
    let h = wv.scaling_filter();
    let g = wv.wavelet_filter();
    let mut src = vec![0.0; height.max(width)];
    let mut dst = vec![0.0; height.max(width)];
    for lvl in (0..levels).rev() {
        let (lh, lw) = (height >> lvl, width >> lvl);
        for c in 0..lw {
            for r in 0..lh {
                src[r] = data[r * width + c];
            }
            synthesis_1d(&src[..lh], &mut dst[..lh], h, &g);
            for r in 0..lh {
                data[r * width + c] = dst[r];
            }
        }
        for r in 0..lh {
            let row = &mut data[r * width..r * width + lw];
            src[..lw].copy_from_slice(row);
            synthesis_1d(&src[..lw], &mut dst[..lw], h, &g);
            row.copy_from_slice(&dst[..lw]);
        }
    }
}

pub fn dwt2d(img: &Image, levels: usize, wv: Wavelet) -> Result<Image> {
    check_levels(img.height(), img.width(), levels)?;
    let mut data = img.data().to_vec();
    forward_inplace(&mut data, img.height(), img.width(), levels, wv);
    Image::new(img.height(), img.width(), data)
}

pub fn idwt2d(coeffs: &Image, levels: usize, wv: Wavelet) -> Result<Image> {
    check_levels(coeffs.height(), coeffs.width(), levels)?;
    let mut data = coeffs.data().to_vec();
    inverse_inplace(&mut data, coeffs.height(), coeffs.width(), levels, wv);
    Image::new(coeffs.height(), coeffs.width(), data)
}
