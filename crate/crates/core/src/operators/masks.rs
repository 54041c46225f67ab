//! Random macro-pixel mask ensembles.
//!
//! Each mask assigns one bit per macro pixel. Bits are packed eight macro
//! pixels to a byte and stored group-major (`bytes[group * rows + mask]`), so
//! a forward or adjoint pass walks each group once with a 256-entry subset
//! table instead of touching every bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on packed mask storage.
pub const MAX_MASK_BYTES: usize = 256 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskScheme {
    /// Mirrors ON (1) or OFF (0); one DMD cycle per mask.
    Binary01,
    /// Entries ±1; realised as two complementary 0/1 exposures.
    Rademacher,
}

/// Parameters that fully determine a mask ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskEnsemble {
    pub window_side: usize,
    pub macro_side: usize,
    pub scheme: MaskScheme,
    pub num_masks: usize,
    pub seed: u64,
}

impl MaskEnsemble {
    pub fn grid_side(&self) -> usize {
        self.window_side / self.macro_side
    }

    pub fn num_macro_pixels(&self) -> usize {
        self.grid_side() * self.grid_side()
    }

    pub fn validate(&self) -> Result<()> {
        if self.macro_side == 0 || self.window_side == 0 || self.window_side % self.macro_side != 0 {
            return Err(Error::DimensionMismatch(format!(
                "macro side {} does not divide window side {}",
                self.macro_side, self.window_side
            )));
        }
        if self.num_masks == 0 {
            return Err(Error::InvalidParameter("mask ensemble needs at least one mask".into()));
        }
        let bytes = self.num_macro_pixels().div_ceil(8).saturating_mul(self.num_masks);
        if bytes > MAX_MASK_BYTES {
            return Err(Error::Capacity(format!(
                "{} masks over {} macro pixels need {bytes} bytes",
                self.num_masks,
                self.num_macro_pixels()
            )));
        }
        Ok(())
    }

    /// 1/sqrt of the expected squared column norm.
    pub fn column_scale(&self) -> f64 {
        let m = self.num_masks as f64;
        match self.scheme {
            MaskScheme::Binary01 => (2.0 / m).sqrt(),
            MaskScheme::Rademacher => (1.0 / m).sqrt(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct PackedMasks {
    pub(crate) params: MaskEnsemble,
    groups: usize,
    bytes: Vec<u8>,
}

impl PackedMasks {
    pub(crate) fn generate(params: MaskEnsemble) -> Result<Self> {
        params.validate()?;
        let g = params.num_macro_pixels();
        let groups = g.div_ceil(8);
        let rows = params.num_masks;
        let tail = g % 8;
        let mut bytes = vec![0u8; groups * rows];
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        // Mask-major draw order keeps a mask's bits independent of how many
        // masks follow it.
        for i in 0..rows {
            for q in 0..groups {
                let mut b: u8 = rng.random();
                if tail != 0 && q == groups - 1 {
                    b &= (1u8 << tail) - 1;
                }
                bytes[q * rows + i] = b;
            }
        }
        Ok(PackedMasks { params, groups, bytes })
    }

    pub(crate) fn rows(&self) -> usize {
        self.params.num_masks
    }

    #[cfg(test)]
    /// Entry of mask `row` at macro pixel `k` (0/1 or ±1, unscaled).
    pub(crate) fn entry(&self, row: usize, k: usize) -> f64 {
        let bit = (self.bytes[(k / 8) * self.rows() + row] >> (k % 8)) & 1;
        match (self.params.scheme, bit) {
            (MaskScheme::Binary01, b) => b as f64,
            (MaskScheme::Rademacher, 1) => 1.0,
            (MaskScheme::Rademacher, _) => -1.0,
        }
    }

    /// `y = scale * M z` for a macro-grid vector `z`.
    pub(crate) fn forward(&self, z: &[f64], y: &mut [f64], scale: f64) {
        let rows = self.rows();
        let g = z.len();
        let mut acc = vec![0.0; rows];
        let mut table = [0.0f64; 256];
        for q in 0..self.groups {
            let base = 8 * q;
            let width = (g - base).min(8);
            table[0] = 0.0;
            for b in 1usize..256 {
                let low = b.trailing_zeros() as usize;
                table[b] = if low < width {
                    table[b & (b - 1)] + z[base + low]
                } else {
                    table[b & (b - 1)]
                };
            }
            let col = &self.bytes[q * rows..(q + 1) * rows];
            for (a, &byte) in acc.iter_mut().zip(col) {
                *a += table[byte as usize];
            }
        }
        match self.params.scheme {
            MaskScheme::Binary01 => {
                for (o, a) in y.iter_mut().zip(&acc) {
                    *o = scale * a;
                }
            }
            MaskScheme::Rademacher => {
                let total: f64 = z.iter().sum();
                for (o, a) in y.iter_mut().zip(&acc) {
                    *o = scale * (2.0 * a - total);
                }
            }
        }
    }

    /// `z = scale * M^T y` on the macro grid.
    pub(crate) fn adjoint(&self, y: &[f64], z: &mut [f64], scale: f64) {
        let rows = self.rows();
        let g = z.len();
        let mut hist = [0.0f64; 256];
        let offset = match self.params.scheme {
            MaskScheme::Binary01 => 0.0,
            MaskScheme::Rademacher => y.iter().sum::<f64>(),
        };
        let two = match self.params.scheme {
            MaskScheme::Binary01 => 1.0,
            MaskScheme::Rademacher => 2.0,
        };
        for q in 0..self.groups {
            hist.iter_mut().for_each(|h| *h = 0.0);
            let col = &self.bytes[q * rows..(q + 1) * rows];
            for (&byte, &v) in col.iter().zip(y) {
                hist[byte as usize] += v;
            }
            let base = 8 * q;
            let width = (g - base).min(8);
            // Folding the top half onto the bottom leaves hist[b] summed over
            // every byte whose low bits equal b, so bit k's total is the upper
            // half just before the fold that drops it.
            let mut len = 256;
            for k in (0..8).rev() {
                let half = len / 2;
                let (lo, hi) = hist[..len].split_at_mut(half);
                if k < width {
                    z[base + k] = scale * (two * hi.iter().sum::<f64>() - offset);
                }
                lo.iter_mut().zip(hi.iter()).for_each(|(a, b)| *a += b);
                len = half;
            }
        }
    }
}
