//! Image files: 8- and 16-bit portable graymaps and a raw float64 format
//! (little-endian `u32` height, `u32` width, then row-major `f64` samples).

use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Reads a graymap, scaling samples by the maximum of their bit depth so
/// values land in `[0, 1]`.
pub fn read_pgm(path: &Path) -> Result<Image> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::Codec(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect(),
        other => other
            .to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect(),
    };
    Image::new(h, w, data)
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Binary `P5` graymap; values are clamped to `[0, 1]` and rounded.
pub fn write_pgm8(path: &Path, img: &Image) -> Result<()> {
    let body = img.data().iter().map(|&v| quantize(v, 255.0) as u8);
    write_graymap(path, img, 255, body.collect())
}

/// As [`write_pgm8`] with big-endian 16-bit samples.
pub fn write_pgm16(path: &Path, img: &Image) -> Result<()> {
    let body = img
        .data()
        .iter()
        .flat_map(|&v| (quantize(v, 65535.0) as u16).to_be_bytes());
    write_graymap(path, img, 65535, body.collect())
}

fn write_graymap(path: &Path, img: &Image, maxval: u32, body: Vec<u8>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    out.extend(body);
    std::fs::write(path, out)?;
    Ok(())
}

pub fn encode_raw_f64(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * img.len());
    out.extend((img.height() as u32).to_le_bytes());
    out.extend((img.width() as u32).to_le_bytes());
    for v in img.data() {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn decode_raw_f64(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 8 {
        return Err(Error::Codec("raw image shorter than its header".into()));
    }
    let h = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let w = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    if body.len() != 8 * h * w {
        return Err(Error::Codec(format!(
            "raw image declares {h}x{w} but holds {} bytes of samples",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Image::new(h, w, data)
}

pub fn write_raw_f64(path: &Path, img: &Image) -> Result<()> {
    std::fs::write(path, encode_raw_f64(img))?;
    Ok(())
}

pub fn read_raw_f64(path: &Path) -> Result<Image> {
    decode_raw_f64(&std::fs::read(path)?)
}
