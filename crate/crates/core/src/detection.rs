//! Region-of-interest detection on the low-resolution reconstruction.
//!
//! The scene is tiled into square cells and each cell is scored by a
//! normalized contrast measure. Cells scoring at least a fraction of the best
//! cell are grouped when their gap is within the merge radius (measured in
//! coarse pixels), each group's bounding box is snapped to a dyadic square,
//! and overlaps are resolved in score order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Image, RoIWindow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionScore {
    /// Cell variance over global variance.
    BlockVariance,
    /// Cell range over global range.
    Contrast,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub max_regions: usize,
    /// In coarse pixels.
    pub merge_radius: usize,
    pub score: DetectionScore,
    pub min_side: usize,
    pub max_side: usize,
    /// Side of the scoring cells, in pixels.
    pub cell: usize,
    /// Side of one coarse (macro) pixel of the low-resolution image.
    pub coarse_pixel: usize,
    /// Cells scoring below this fraction of the best cell are ignored.
    pub min_relative_score: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            max_regions: 10,
            merge_radius: 1,
            score: DetectionScore::BlockVariance,
            min_side: 32,
            max_side: 128,
            cell: 16,
            coarse_pixel: 8,
            min_relative_score: 0.1,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_regions == 0 {
            return Err(Error::InvalidParameter("max_regions must be at least 1".into()));
        }
        if !self.min_side.is_power_of_two() || !self.max_side.is_power_of_two() || self.min_side > self.max_side {
            return Err(Error::InvalidParameter(format!(
                "window sides must be powers of two with min <= max, got {} and {}",
                self.min_side, self.max_side
            )));
        }
        if self.cell == 0 || self.coarse_pixel == 0 {
            return Err(Error::InvalidParameter(
                "cell and coarse pixel sizes must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_relative_score) {
            return Err(Error::InvalidParameter("min_relative_score must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedRoi {
    pub window: RoIWindow,
    pub score: f64,
}

/// Detected windows, best first, labelled 1, 2, ... by rank.
pub fn detect_rois(lowres: &Image, params: &DetectionParams) -> Result<Vec<RoIWindow>> {
    Ok(detect_rois_scored(lowres, params)?
        .into_iter()
        .map(|d| d.window)
        .collect())
}

pub fn detect_rois_scored(lowres: &Image, params: &DetectionParams) -> Result<Vec<DetectedRoi>> {
    params.validate()?;
    let (h, w) = (lowres.height(), lowres.width());
    if h % params.min_side != 0 || w % params.min_side != 0 || h % params.cell != 0 || w % params.cell != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{h}x{w} image is not divisible by min side {} and cell {}",
            params.min_side, params.cell
        )));
    }
    let (lo, hi) = lowres.min_max();
    if hi - lo <= 1e-12 * lo.abs().max(hi.abs()) {
        return Ok(Vec::new());
    }
    let scores = cell_scores(lowres, params);
    let best = scores.iter().map(|s| s.2).fold(0.0, f64::max);
    if best <= 0.0 {
        return Ok(Vec::new());
    }
    let cutoff = (params.min_relative_score * best).max(f64::MIN_POSITIVE);
    let boxes: Vec<(Rect, f64)> = scores
        .iter()
        .filter(|s| s.2 >= cutoff)
        .map(|&(r, c, s)| (Rect::new(r, c, params.cell, params.cell), s))
        .collect();
    let gap = params.merge_radius * params.coarse_pixel;
    let mut groups = merge_boxes(&boxes, gap);
    groups.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.key().cmp(&b.0.key())));
    groups.truncate(params.max_regions);

    let mut placed: Vec<DetectedRoi> = Vec::new();
    for (rect, score) in groups {
        let side = snap_side(
            rect.height().max(rect.width()),
            params.min_side,
            params.max_side.min(h).min(w),
        );
        let Some((r0, c0)) = place(&rect, side, h, w, &placed) else {
            continue;
        };
        let label = placed.len() as u32 + 1;
        placed.push(DetectedRoi {
            window: RoIWindow::new(r0, c0, side, label)?,
            score,
        });
    }
    Ok(placed)
}

/// Coalesces windows whose gap is at most `merge_radius` pixels, transitively,
/// into bounding windows snapped up to a power-of-two side and kept inside
/// the `height x width` scene. Each merged window keeps the smallest label of
/// its members; output is ordered by label.
pub fn merge_rois(rois: &[RoIWindow], merge_radius: usize, height: usize, width: usize) -> Vec<RoIWindow> {
    let boxes: Vec<(Rect, f64)> = rois
        .iter()
        .map(|r| (Rect::new(r.row_offset, r.col_offset, r.side, r.side), -(r.label as f64)))
        .collect();
    let mut out: Vec<RoIWindow> = merge_boxes(&boxes, merge_radius)
        .into_iter()
        .map(|(rect, neg_label)| {
            let side = snap_side(rect.height().max(rect.width()), 1, height.min(width));
            let (r0, c0) = centered(&rect, side, height, width);
            let label = (-neg_label) as u32;
            RoIWindow {
                row_offset: r0,
                col_offset: c0,
                side,
                current_macro: rois
                    .iter()
                    .find(|r| r.label == label)
                    .map_or(1, |r| r.current_macro)
                    .min(side),
                label,
            }
        })
        .collect();
    out.sort_by_key(|r| r.label);
    out
}

/// Label image: 0 outside all windows, `1 - (k - 1) / count` inside the
/// window ranked `k`, so higher-ranked windows are brighter.
pub fn label_mask(rois: &[RoIWindow], height: usize, width: usize) -> Image {
    let n = rois.len().max(1) as f64;
    Image::from_fn(height, width, |r, c| {
        rois.iter()
            .enumerate()
            .find(|(_, w)| w.contains(r, c))
            .map_or(0.0, |(k, _)| 1.0 - k as f64 / n)
    })
}

fn cell_scores(img: &Image, params: &DetectionParams) -> Vec<(usize, usize, f64)> {
    let (h, w) = (img.height(), img.width());
    let k = params.cell;
    let (gmin, gmax) = img.min_max();
    let gvar = img.variance();
    let mut out = Vec::new();
    for r in (0..h).step_by(k) {
        for c in (0..w).step_by(k) {
            let (mut s, mut s2, mut lo, mut hi) = (0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY);
            for i in r..r + k {
                for j in c..c + k {
                    let v = img.get(i, j);
                    s += v;
                    s2 += v * v;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let n = (k * k) as f64;
            let score = match params.score {
                DetectionScore::BlockVariance if gvar > 0.0 => ((s2 / n - (s / n).powi(2)).max(0.0)) / gvar,
                DetectionScore::Contrast if gmax > gmin => (hi - lo) / (gmax - gmin),
                _ => 0.0,
            };
            // Rounding noise on flat cells is not contrast.
            let score = if score < 1e-12 { 0.0 } else { score };
            out.push((r, c, score));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Rect {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
}

impl Rect {
    fn new(r: usize, c: usize, h: usize, w: usize) -> Self {
        Rect {
            r0: r,
            c0: c,
            r1: r + h,
            c1: c + w,
        }
    }

    fn height(&self) -> usize {
        self.r1 - self.r0
    }

    fn width(&self) -> usize {
        self.c1 - self.c0
    }

    fn gap(&self, o: &Rect) -> usize {
        let gr = o.r0.saturating_sub(self.r1).max(self.r0.saturating_sub(o.r1));
        let gc = o.c0.saturating_sub(self.c1).max(self.c0.saturating_sub(o.c1));
        gr.max(gc)
    }

    fn union(&self, o: &Rect) -> Rect {
        Rect {
            r0: self.r0.min(o.r0),
            c0: self.c0.min(o.c0),
            r1: self.r1.max(o.r1),
            c1: self.c1.max(o.c1),
        }
    }

    fn key(&self) -> (usize, usize) {
        (self.r0, self.c0)
    }
}

// Transitive closure of "gap <= radius"; each group carries its best score.
fn merge_boxes(boxes: &[(Rect, f64)], radius: usize) -> Vec<(Rect, f64)> {
    let n = boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if boxes[i].0.gap(&boxes[j].0) <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Rect, f64)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => {
                g.1 = g.1.union(&boxes[i].0);
                g.2 = g.2.max(boxes[i].1);
            }
            None => groups.push((root, boxes[i].0, boxes[i].1)),
        }
    }
    // Merged bounding boxes can swallow or touch other groups; repeat until stable.
    let merged: Vec<(Rect, f64)> = groups.into_iter().map(|g| (g.1, g.2)).collect();
    if merged.len() < n && merged.len() > 1 {
        let again = merge_boxes(&merged, radius);
        if again.len() < merged.len() {
            return again;
        }
    }
    merged
}

fn snap_side(extent: usize, min_side: usize, max_side: usize) -> usize {
    extent.next_power_of_two().clamp(min_side, max_side.max(min_side))
}

fn centered(rect: &Rect, side: usize, h: usize, w: usize) -> (usize, usize) {
    let center = |lo: usize, hi: usize, limit: usize| {
        let mid2 = lo + hi;
        let start = mid2.saturating_sub(side) / 2;
        start.min(limit.saturating_sub(side))
    };
    (center(rect.r0, rect.r1, h), center(rect.c0, rect.c1, w))
}

// Centered placement, or the nearest shift on the coarse lattice that avoids
// every window already placed.
fn place(rect: &Rect, side: usize, h: usize, w: usize, placed: &[DetectedRoi]) -> Option<(usize, usize)> {
    let (r0, c0) = centered(rect, side, h, w);
    let free = |r: usize, c: usize| {
        let cand = RoIWindow {
            row_offset: r,
            col_offset: c,
            side,
            current_macro: 1,
            label: 0,
        };
        cand.fits_in(h, w) && placed.iter().all(|p| !p.window.overlaps(&cand))
    };
    if free(r0, c0) {
        return Some((r0, c0));
    }
    let step = 8.min(side);
    let max_shift = side as isize;
    let mut best: Option<(isize, (usize, usize))> = None;
    let mut dr = -max_shift;
    while dr <= max_shift {
        let mut dc = -max_shift;
        while dc <= max_shift {
            let (r, c) = (r0 as isize + dr, c0 as isize + dc);
            if r >= 0 && c >= 0 && free(r as usize, c as usize) {
                let d = dr.abs().max(dc.abs());
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, (r as usize, c as usize)));
                }
            }
            dc += step as isize;
        }
        dr += step as isize;
    }
    best.map(|b| b.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(r: usize, c: usize, size: usize) -> Image {
        Image::from_fn(256, 256, |i, j| {
            if i >= r && i < r + size && j >= c && j < c + size {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn constant_image_has_no_regions() {
        assert!(detect_rois(&Image::filled(256, 256, 0.3), &DetectionParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn single_blob_gets_one_32_window() {
        let img = blob(97, 161, 30);
        let rois = detect_rois(&img, &DetectionParams::default()).unwrap();
        assert_eq!(rois.len(), 1);
        let w = rois[0];
        assert_eq!(w.side, 32);
        assert_eq!(w.label, 1);
        for (r, c) in [(97, 161), (126, 190)] {
            assert!(w.contains(r, c));
        }
    }

    #[test]
    fn blobs_one_coarse_pixel_apart_merge() {
        // 24-pixel blobs on the coarse grid with one 8-pixel macro pixel between them.
        let a = blob(64, 64, 24);
        let b = blob(64, 96, 24);
        let img = Image::new(256, 256, a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()).unwrap();
        let rois = detect_rois(&img, &DetectionParams::default()).unwrap();
        assert_eq!(rois.len(), 1);
        assert_eq!(rois[0].side, 64);
        let far = Image::new(
            256,
            256,
            a.data()
                .iter()
                .zip(blob(200, 200, 24).data())
                .map(|(x, y)| x + y)
                .collect(),
        )
        .unwrap();
        assert_eq!(detect_rois(&far, &DetectionParams::default()).unwrap().len(), 2);
    }

    #[test]
    fn merge_rules() {
        let w = |r, c, s, l| RoIWindow::with_macro(r, c, s, 1, l).unwrap();
        let far = [w(0, 0, 32, 1), w(200, 200, 32, 2)];
        assert_eq!(merge_rois(&far, 8, 256, 256), far.to_vec());
        let adjacent = merge_rois(&[w(0, 0, 32, 1), w(0, 32, 32, 2)], 8, 256, 256);
        assert_eq!(adjacent.len(), 1);
        assert_eq!(adjacent[0].side, 64);
        let chain = merge_rois(&[w(0, 0, 32, 3), w(0, 36, 32, 1), w(0, 72, 32, 2)], 4, 256, 256);
        assert_eq!(chain.len(), 1);
        assert_eq!(chain[0].label, 1);
        assert_eq!(chain[0].side, 128);
    }

    #[test]
    fn scale_invariant_and_disjoint() {
        let mut img = blob(32, 32, 60);
        img = Image::new(
            256,
            256,
            img.data()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v + if (i / 256) > 150 && (i % 256) > 150 && (i / 256 + i % 256) % 3 == 0 {
                        0.6
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap();
        let p = DetectionParams::default();
        let a = detect_rois_scored(&img, &p).unwrap();
        let b = detect_rois_scored(&img.scaled(3.5), &p).unwrap();
        assert_eq!(
            a.iter().map(|d| d.window).collect::<Vec<_>>(),
            b.iter().map(|d| d.window).collect::<Vec<_>>()
        );
        for (i, x) in a.iter().enumerate() {
            assert!(x.window.fits_in(256, 256));
            for y in &a[i + 1..] {
                assert!(!x.window.overlaps(&y.window));
                assert!(x.score >= y.score);
            }
        }
    }

    #[test]
    fn adding_a_far_region_keeps_existing_windows() {
        let base = blob(16, 16, 40);
        let more = Image::new(
            256,
            256,
            base.data()
                .iter()
                .zip(blob(192, 192, 40).data())
                .map(|(x, y)| x + y)
                .collect(),
        )
        .unwrap();
        let p = DetectionParams::default();
        let a = detect_rois(&base, &p).unwrap();
        let b = detect_rois(&more, &p).unwrap();
        assert!(b
            .iter()
            .any(|w| w.row_offset == a[0].row_offset && w.col_offset == a[0].col_offset && w.side == a[0].side));
    }

    #[test]
    fn contrast_score_and_label_mask() {
        let p = DetectionParams {
            score: DetectionScore::Contrast,
            ..DetectionParams::default()
        };
        let rois = detect_rois(&blob(97, 161, 30), &p).unwrap();
        assert_eq!(rois.len(), 1);
        let mask = label_mask(&rois, 256, 256);
        let inside = mask.data().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(inside, rois[0].num_pixels());
        assert!(detect_rois(&Image::zeros(100, 100), &DetectionParams::default()).is_err());
    }
}
