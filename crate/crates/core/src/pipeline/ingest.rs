//! Scene ingestion: graymaps, raw float images and headerless multi-band cubes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::io::{read_pgm, read_raw_f64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleType {
    U8,
    U16Le,
    U16Be,
    I16Le,
    I16Be,
    F32Le,
    F64Le,
}

impl SampleType {
    pub fn bytes(self) -> usize {
        match self {
            SampleType::U8 => 1,
            SampleType::U16Le | SampleType::U16Be | SampleType::I16Le | SampleType::I16Be => 2,
            SampleType::F32Le => 4,
            SampleType::F64Le => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            SampleType::U8 => f64::from(b[0]),
            SampleType::U16Le => f64::from(u16::from_le_bytes([b[0], b[1]])),
            SampleType::U16Be => f64::from(u16::from_be_bytes([b[0], b[1]])),
            SampleType::I16Le => f64::from(i16::from_le_bytes([b[0], b[1]])),
            SampleType::I16Be => f64::from(i16::from_be_bytes([b[0], b[1]])),
            SampleType::F32Le => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            SampleType::F64Le => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

/// Sample order of a band-interleaved cube (ENVI naming).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interleave {
    /// Band, row, column.
    Bsq,
    /// Row, band, column.
    Bil,
    /// Row, column, band.
    Bip,
}

/// Layout of a headerless cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub sample: SampleType,
    pub interleave: Interleave,
    /// Bytes to skip before the first sample.
    #[serde(default)]
    pub header_bytes: usize,
}

impl BandSpec {
    fn index(&self, band: usize, r: usize, c: usize) -> usize {
        let (h, w, b) = (self.height, self.width, self.bands);
        match self.interleave {
            Interleave::Bsq => (band * h + r) * w + c,
            Interleave::Bil => (r * b + band) * w + c,
            Interleave::Bip => (r * w + c) * b + band,
        }
    }

    /// Splits a cube into bands.
    pub fn decode(&self, bytes: &[u8]) -> Result<Vec<Image>> {
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return Err(Error::Config(format!("cube dimensions must be positive, got {self:?}")));
        }
        let size = self.sample.bytes();
        let need = self.header_bytes + self.height * self.width * self.bands * size;
        if bytes.len() != need {
            return Err(Error::Codec(format!(
                "cube should hold {need} bytes, found {}",
                bytes.len()
            )));
        }
        let body = &bytes[self.header_bytes..];
        (0..self.bands)
            .map(|band| {
                let img = Image::from_fn(self.height, self.width, |r, c| {
                    let at = self.index(band, r, c) * size;
                    self.sample.decode(&body[at..at + size])
                });
                if img.data().iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("band {band}")));
                }
                Ok(img)
            })
            .collect()
    }
}

/// Rescales to `[0, 1]`; a constant band cannot be rescaled.
pub fn min_max_normalize(img: &Image, band: usize) -> Result<Image> {
    let (lo, hi) = img.min_max();
    if hi <= lo {
        return Err(Error::DegenerateBand { band, value: lo });
    }
    let span = hi - lo;
    Ok(Image::from_fn(img.height(), img.width(), |r, c| {
        (img.get(r, c) - lo) / span
    }))
}

/// Per-band min-max normalization followed by the per-pixel mean.
pub fn average_bands(bands: &[Image]) -> Result<Image> {
    let first = bands
        .first()
        .ok_or_else(|| Error::InvalidParameter("no bands to average".into()))?;
    let mut acc = vec![0.0; first.len()];
    for (i, b) in bands.iter().enumerate() {
        if !b.same_shape(first) {
            return Err(Error::DimensionMismatch(format!(
                "band {i} differs in shape from band 0"
            )));
        }
        let n = min_max_normalize(b, i)?;
        acc.iter_mut().zip(n.data()).for_each(|(a, v)| *a += v);
    }
    let k = bands.len() as f64;
    Image::new(first.height(), first.width(), acc.into_iter().map(|v| v / k).collect())
}

/// Top-left `side`x`side` crop; short dimensions are padded by repeating
/// the last row or column.
pub fn crop_or_pad(img: &Image, side: usize) -> Image {
    let (h, w) = (img.height(), img.width());
    Image::from_fn(side, side, |r, c| img.get(r.min(h - 1), c.min(w - 1)))
}

/// Loads a scene as a single normalized `side`x`side` channel.
///
/// With a band spec the file is a headerless cube; otherwise `.f64` files
/// use the raw float format and anything else is read as a graymap.
pub fn ingest_scene(path: &Path, bands: Option<&BandSpec>, side: usize) -> Result<Image> {
    let single = match bands {
        Some(spec) => average_bands(&spec.decode(&std::fs::read(path)?)?)?,
        None => {
            let raw = if path.extension().is_some_and(|e| e == "f64") {
                read_raw_f64(path)?
            } else {
                read_pgm(path)?
            };
            if raw.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(path.display().to_string()));
            }
            min_max_normalize(&raw, 0)?
        }
    };
    if single.is_empty() {
        return Err(Error::Codec(format!("{} holds no pixels", path.display())));
    }
    Ok(crop_or_pad(&single, side))
}
