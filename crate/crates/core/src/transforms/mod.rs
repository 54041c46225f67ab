//! Orthonormal sparsifying transforms and the total-variation functional.
//!
//! All transforms here are orthonormal, so the adjoint of each forward map is
//! its inverse and solver step sizes only depend on the measurement operator.

mod dct;
mod tv;
mod walsh;
mod wavelet;

pub use dct::{dct2d, dct_matrix, idct2d};
pub use tv::{gradient, gradient_adjoint, tv_value};
pub use walsh::{fwht_inplace, iwalsh2d, sequency_permutation, walsh2d, Walsh2dPlan};
pub use wavelet::{dwt2d, idwt2d, Wavelet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Which sparsifying basis a solver works in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Identity,
    Walsh2D,
    Dct2D,
    DwtDb8,
    DwtHaar,
}

/// A transform choice plus its level count (wavelets only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub levels: usize,
}

impl TransformSpec {
    pub fn identity() -> Self {
        TransformSpec {
            kind: TransformKind::Identity,
            levels: 0,
        }
    }

    pub fn walsh() -> Self {
        TransformSpec {
            kind: TransformKind::Walsh2D,
            levels: 0,
        }
    }

    pub fn dct() -> Self {
        TransformSpec {
            kind: TransformKind::Dct2D,
            levels: 0,
        }
    }

    pub fn db8(levels: usize) -> Self {
        TransformSpec {
            kind: TransformKind::DwtDb8,
            levels,
        }
    }

    pub fn haar(levels: usize) -> Self {
        TransformSpec {
            kind: TransformKind::DwtHaar,
            levels,
        }
    }

    /// db8 with as many levels as the grid supports, capped at `max_levels`,
    /// keeping the coarsest band at least 2 wide.
    pub fn db8_for_grid(side: usize, max_levels: usize) -> Self {
        let mut levels = 0;
        while levels < max_levels && side % (1 << (levels + 1)) == 0 && side >> (levels + 1) >= 2 {
            levels += 1;
        }
        Self::db8(levels.max(1).min(max_levels.max(1)))
    }

    /// Validates the grid and precomputes whatever the transform needs.
    pub fn plan(&self, height: usize, width: usize) -> Result<TransformPlan> {
        let inner = match self.kind {
            TransformKind::Identity => PlanInner::Identity,
            TransformKind::Walsh2D => PlanInner::Walsh(Walsh2dPlan::new(height, width)?),
            TransformKind::Dct2D => PlanInner::Dct(dct_matrix(height), dct_matrix(width)),
            TransformKind::DwtDb8 | TransformKind::DwtHaar => {
                let wavelet = if self.kind == TransformKind::DwtDb8 {
                    Wavelet::Db8
                } else {
                    Wavelet::Haar
                };
                wavelet::check_levels(height, width, self.levels)?;
                PlanInner::Dwt(wavelet, self.levels)
            }
        };
        Ok(TransformPlan { height, width, inner })
    }
}

enum PlanInner {
    Identity,
    Walsh(Walsh2dPlan),
    Dct(Vec<f64>, Vec<f64>),
    Dwt(Wavelet, usize),
}

/// A transform bound to a grid size; forward is analysis, inverse synthesis.
pub struct TransformPlan {
    height: usize,
    width: usize,
    inner: PlanInner,
}

impl TransformPlan {
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.len());
        match &self.inner {
            PlanInner::Identity => out.copy_from_slice(x),
            PlanInner::Walsh(p) => p.forward(x, out),
            PlanInner::Dct(ch, cw) => dct::separable(x, out, self.height, self.width, ch, cw, false),
            PlanInner::Dwt(wv, levels) => {
                out.copy_from_slice(x);
                wavelet::forward_inplace(out, self.height, self.width, *levels, *wv);
            }
        }
    }

    pub fn inverse(&self, c: &[f64], out: &mut [f64]) {
        debug_assert_eq!(c.len(), self.len());
        match &self.inner {
            PlanInner::Identity => out.copy_from_slice(c),
            PlanInner::Walsh(p) => p.inverse(c, out),
            PlanInner::Dct(ch, cw) => dct::separable(c, out, self.height, self.width, ch, cw, true),
            PlanInner::Dwt(wv, levels) => {
                out.copy_from_slice(c);
                wavelet::inverse_inplace(out, self.height, self.width, *levels, *wv);
            }
        }
    }

    pub fn forward_image(&self, img: &Image) -> Result<Image> {
        self.check(img)?;
        let mut out = vec![0.0; self.len()];
        self.forward(img.data(), &mut out);
        Image::new(self.height, self.width, out)
    }

    pub fn inverse_image(&self, img: &Image) -> Result<Image> {
        self.check(img)?;
        let mut out = vec![0.0; self.len()];
        self.inverse(img.data(), &mut out);
        Image::new(self.height, self.width, out)
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.height() != self.height || img.width() != self.width {
            return Err(Error::DimensionMismatch(format!(
                "transform planned for {}x{}, got {}x{}",
                self.height,
                self.width,
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }
}
