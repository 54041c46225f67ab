//! Scene and region types plus macro-pixel grid arithmetic.
//!
//! Everything is stored row-major. A coarse image at macro size `m` has
//! dimensions `(h / m, w / m)`; [`macro_upsample`] lifts it back by pixel
//! replication, which is the lift used whenever a coarse solution is pushed
//! through a finer measurement operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D scalar field on a pixel grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    /// Wraps row-major data, rejecting empty grids, length mismatches and
    /// non-finite entries.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(format!(
                "image must be at least 1x1, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width} image needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("image sample {i}")));
        }
        Ok(Image { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image must be at least 1x1");
        Image {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Image { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.data.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn scaled(&self, factor: f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Copy clamped into `[0, 1]`; used only when exporting.
    pub fn clamped(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// An axis-aligned dyadic square window of the scene together with the
/// macro-pixel size it is currently resolved at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoIWindow {
    pub row_offset: usize,
    pub col_offset: usize,
    pub side: usize,
    pub current_macro: usize,
    pub label: u32,
}

impl RoIWindow {
    /// A window at the coarsest macro size 8.
    pub fn new(row_offset: usize, col_offset: usize, side: usize, label: u32) -> Result<Self> {
        Self::with_macro(row_offset, col_offset, side, 8, label)
    }

    pub fn with_macro(
        row_offset: usize,
        col_offset: usize,
        side: usize,
        current_macro: usize,
        label: u32,
    ) -> Result<Self> {
        if !side.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "window side {side} is not a power of two"
            )));
        }
        if !matches!(current_macro, 1 | 2 | 4 | 8) || side % current_macro != 0 {
            return Err(Error::InvalidParameter(format!(
                "macro size {current_macro} invalid for side {side}"
            )));
        }
        Ok(RoIWindow {
            row_offset,
            col_offset,
            side,
            current_macro,
            label,
        })
    }

    pub fn num_pixels(&self) -> usize {
        self.side * self.side
    }

    pub fn fits_in(&self, height: usize, width: usize) -> bool {
        self.row_offset + self.side <= height && self.col_offset + self.side <= width
    }

    pub fn overlaps(&self, other: &RoIWindow) -> bool {
        self.row_offset < other.row_offset + other.side
            && other.row_offset < self.row_offset + self.side
            && self.col_offset < other.col_offset + other.side
            && other.col_offset < self.col_offset + self.side
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row_offset
            && row < self.row_offset + self.side
            && col >= self.col_offset
            && col < self.col_offset + self.side
    }

    /// Halves the macro size; errors once the native resolution is reached.
    pub fn refined(&self) -> Result<RoIWindow> {
        if self.current_macro <= 1 {
            return Err(Error::InvalidParameter(format!(
                "RoI {} is already at native resolution",
                self.label
            )));
        }
        Ok(RoIWindow {
            current_macro: self.current_macro / 2,
            ..*self
        })
    }
}

/// Counting helper for a window binned into square macro pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroGrid {
    pub window_side: usize,
    pub macro_side: usize,
    pub num_macro_pixels: usize,
}

impl MacroGrid {
    pub fn new(window_side: usize, macro_side: usize) -> Result<Self> {
        if macro_side == 0 || window_side == 0 || window_side % macro_side != 0 {
            return Err(Error::DimensionMismatch(format!(
                "macro side {macro_side} does not divide window side {window_side}"
            )));
        }
        let per_side = window_side / macro_side;
        Ok(MacroGrid {
            window_side,
            macro_side,
            num_macro_pixels: per_side * per_side,
        })
    }

    /// Macro pixels along one side.
    pub fn side(&self) -> usize {
        self.window_side / self.macro_side
    }
}

/// Replaces every `macro_side`-square block with its mean.
pub fn macro_downsample(img: &Image, macro_side: usize) -> Result<Image> {
    if macro_side == 0 || img.height % macro_side != 0 || img.width % macro_side != 0 {
        return Err(Error::DimensionMismatch(format!(
            "macro side {macro_side} does not divide {}x{}",
            img.height, img.width
        )));
    }
    if macro_side.is_power_of_two() {
        // Repeated 2x2 averaging is a pairwise sum, which is exact on
        // replicated blocks.
        let mut cur = img.clone();
        let mut f = macro_side;
        while f > 1 {
            cur = halve(&cur);
            f /= 2;
        }
        return Ok(cur);
    }
    let (h, w) = (img.height / macro_side, img.width / macro_side);
    let mut out = vec![0.0; h * w];
    block_sum_into(&img.data, img.width, macro_side, &mut out);
    let inv = 1.0 / (macro_side * macro_side) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(Image {
        height: h,
        width: w,
        data: out,
    })
}

fn halve(img: &Image) -> Image {
    let (h, w) = (img.height / 2, img.width / 2);
    let x = &img.data;
    let iw = img.width;
    let data = (0..h * w)
        .map(|i| {
            let (r, c) = (2 * (i / w), 2 * (i % w));
            let top = x[r * iw + c] + x[r * iw + c + 1];
            let bottom = x[(r + 1) * iw + c] + x[(r + 1) * iw + c + 1];
            (top + bottom) * 0.25
        })
        .collect();
    Image {
        height: h,
        width: w,
        data,
    }
}

/// Pixel-replication lift: each pixel becomes a `macro_side`-square block.
pub fn macro_upsample(img: &Image, macro_side: usize) -> Image {
    assert!(macro_side >= 1, "macro side must be positive");
    let mut out = vec![0.0; img.len() * macro_side * macro_side];
    replicate_into(&img.data, img.width, macro_side, &mut out);
    Image {
        height: img.height * macro_side,
        width: img.width * macro_side,
        data: out,
    }
}

/// Sums `factor`-square blocks of a row-major buffer of width `width` into
/// `out`, which must hold `len / factor²` values.
pub(crate) fn block_sum_into(src: &[f64], width: usize, factor: usize, out: &mut [f64]) {
    if factor == 1 {
        out.copy_from_slice(src);
        return;
    }
    let height = src.len() / width;
    let ow = width / factor;
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in 0..height {
        let orow = (r / factor) * ow;
        let row = &src[r * width..(r + 1) * width];
        for (oc, chunk) in row.chunks_exact(factor).enumerate() {
            out[orow + oc] += chunk.iter().sum::<f64>();
        }
    }
}

/// Replicates each sample of a row-major buffer of width `width` into a
/// `factor`-square block of `out`.
pub(crate) fn replicate_into(src: &[f64], width: usize, factor: usize, out: &mut [f64]) {
    if factor == 1 {
        out.copy_from_slice(src);
        return;
    }
    let height = src.len() / width;
    let ow = width * factor;
    for r in 0..height {
        let srow = &src[r * width..(r + 1) * width];
        let first = r * factor * ow;
        {
            let dst = &mut out[first..first + ow];
            for (c, &v) in srow.iter().enumerate() {
                dst[c * factor..(c + 1) * factor].fill(v);
            }
        }
        for k in 1..factor {
            out.copy_within(first..first + ow, first + k * ow);
        }
    }
}

/// Copies the window out of the scene.
pub fn extract_window(scene: &Image, roi: &RoIWindow) -> Result<Image> {
    check_bounds(scene, roi)?;
    let mut data = Vec::with_capacity(roi.num_pixels());
    for r in roi.row_offset..roi.row_offset + roi.side {
        let start = r * scene.width + roi.col_offset;
        data.extend_from_slice(&scene.data[start..start + roi.side]);
    }
    Ok(Image {
        height: roi.side,
        width: roi.side,
        data,
    })
}

/// Returns a copy of the scene with the window replaced by `patch`.
pub fn paste_window(scene: &Image, roi: &RoIWindow, patch: &Image) -> Result<Image> {
    check_bounds(scene, roi)?;
    if patch.height != roi.side || patch.width != roi.side {
        return Err(Error::DimensionMismatch(format!(
            "patch is {}x{}, window side is {}",
            patch.height, patch.width, roi.side
        )));
    }
    let mut out = scene.clone();
    for r in 0..roi.side {
        let start = (roi.row_offset + r) * scene.width + roi.col_offset;
        out.data[start..start + roi.side].copy_from_slice(&patch.data[r * roi.side..(r + 1) * roi.side]);
    }
    Ok(out)
}

fn check_bounds(scene: &Image, roi: &RoIWindow) -> Result<()> {
    if !roi.fits_in(scene.height, scene.width) {
        return Err(Error::OutOfBounds(format!(
            "window at ({}, {}) side {} exceeds {}x{} scene",
            roi.row_offset, roi.col_offset, roi.side, scene.height, scene.width
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> Image {
        Image::from_fn(n, n, |r, c| (r * n + c) as f64)
    }

    #[test]
    fn rejects_bad_images() {
        assert!(Image::new(0, 3, vec![]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn downsample_constant_and_checkerboard() {
        let c = Image::filled(16, 16, 0.5);
        for m in [1, 2, 4, 8, 16] {
            let d = macro_downsample(&c, m).unwrap();
            assert_eq!(d.height(), 16 / m);
            assert!(d.data().iter().all(|&v| v == 0.5));
        }
        let x = Image::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(macro_downsample(&x, 2).unwrap().data(), &[0.5]);
    }

    #[test]
    fn downsample_ramp_matches_direct_block_sums() {
        let x = ramp(4);
        let d = macro_downsample(&x, 2).unwrap();
        for br in 0..2 {
            for bc in 0..2 {
                let mut s = 0.0;
                for r in 0..2 {
                    for c in 0..2 {
                        s += x.get(2 * br + r, 2 * bc + c);
                    }
                }
                assert_eq!(d.get(br, bc), s / 4.0);
            }
        }
        assert!(macro_downsample(&ramp(6), 4).is_err());
    }

    #[test]
    fn upsample_replicates() {
        let x = Image::new(1, 1, vec![0.7]).unwrap();
        let u = macro_upsample(&x, 4);
        assert_eq!((u.height(), u.width()), (4, 4));
        assert!(u.data().iter().all(|&v| v == 0.7));
        let y = Image::from_fn(4, 4, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.1);
        assert_eq!(macro_downsample(&macro_upsample(&y, 8), 8).unwrap(), y);
    }

    #[test]
    fn window_copy_semantics() {
        let scene = Image::from_fn(256, 256, |r, c| (r * 256 + c) as f64 / 65536.0);
        let roi = RoIWindow::new(0, 0, 32, 1).unwrap();
        let tl = extract_window(&scene, &roi).unwrap();
        assert_eq!(tl.get(31, 31), scene.get(31, 31));
        let roi = RoIWindow::new(64, 96, 64, 2).unwrap();
        let patch = extract_window(&scene, &roi).unwrap();
        assert_eq!(paste_window(&scene, &roi, &patch).unwrap(), scene);

        let zeroed = paste_window(&scene, &roi, &Image::zeros(64, 64)).unwrap();
        let changed = zeroed.data().iter().zip(scene.data()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 64 * 64);

        let outside = RoIWindow::new(240, 0, 32, 3).unwrap();
        assert!(matches!(extract_window(&scene, &outside), Err(Error::OutOfBounds(_))));
        assert!(paste_window(&scene, &roi, &Image::zeros(32, 32)).is_err());
    }

    #[test]
    fn roi_refinement_only_halves() {
        let w = RoIWindow::new(0, 0, 64, 1).unwrap();
        let w = w.refined().unwrap().refined().unwrap().refined().unwrap();
        assert_eq!(w.current_macro, 1);
        assert!(w.refined().is_err());
        assert!(RoIWindow::new(0, 0, 48, 1).is_err());
    }

    #[test]
    fn macro_grid_counts() {
        let g = MacroGrid::new(256, 8).unwrap();
        assert_eq!(g.num_macro_pixels, 1024);
        assert_eq!(MacroGrid::new(256, 4).unwrap().num_macro_pixels, 4096);
        assert!(MacroGrid::new(256, 3).is_err());
    }

    proptest! {
        #[test]
        fn downsample_preserves_mean(vals in prop::collection::vec(-1.0f64..1.0, 64), m in prop::sample::select(vec![1usize, 2, 4, 8])) {
            let x = Image::new(8, 8, vals).unwrap();
            let d = macro_downsample(&x, m).unwrap();
            prop_assert!((d.mean() - x.mean()).abs() < 1e-12);
        }

        #[test]
        fn block_projection_is_idempotent(vals in prop::collection::vec(-1.0f64..1.0, 64), m in prop::sample::select(vec![1usize, 2, 4, 8])) {
            let x = Image::new(8, 8, vals).unwrap();
            let p = |i: &Image| macro_upsample(&macro_downsample(i, m).unwrap(), m);
            let once = p(&x);
            let twice = p(&once);
            for (a, b) in once.data().iter().zip(twice.data()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            if m == 1 {
                prop_assert_eq!(once, x);
            }
        }
    }
}
