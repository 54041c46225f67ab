use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::fixtures::textured_composite;
use super::ingest::ingest_scene;
use crate::detection::detect_rois;
use crate::error::{Error, Result};
use crate::imaging::{extract_window, Image, RoIWindow};
use crate::io::{write_pgm16, write_raw_f64};
use crate::metrics::{nmse, ssim, ssim_where, MetricReport, SSIM_WINDOW};
use crate::rps::{run_rps, AcquisitionBackend, RpsOutcome, SimulatedBackend, StageRecord};

/// A scene plus the regions its metrics are reported on, when known.
#[derive(Clone, Debug)]
pub struct Scene {
    pub image: Image,
    pub regions: Option<Vec<RoIWindow>>,
}

/// The configured input, or the built-in composite when there is none.
pub fn load_scene(cfg: &RunConfig) -> Result<Scene> {
    match &cfg.input {
        Some(path) => Ok(Scene {
            image: ingest_scene(path, None, cfg.scene_side)?,
            regions: None,
        }),
        None => {
            if cfg.scene_side != 256 {
                return Err(Error::Config(
                    "the built-in scene is 256x256; set input for other sizes".into(),
                ));
            }
            let f = textured_composite();
            Ok(Scene {
                image: f.scene,
                regions: Some(f.regions),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub label: u32,
    pub window: RoIWindow,
    pub nmse: f64,
    pub ssim: f64,
}

pub fn region_scores(estimate: &Image, truth: &Image, regions: &[RoIWindow]) -> Result<Vec<RegionScore>> {
    regions
        .iter()
        .map(|w| {
            let (e, t) = (extract_window(estimate, w)?, extract_window(truth, w)?);
            Ok(RegionScore {
                label: w.label,
                window: *w,
                nmse: nmse(&e, &t)?,
                ssim: ssim(&e, &t)?,
            })
        })
        .collect()
}

/// Mean SSIM over windows that touch none of the regions.
pub fn background_ssim(estimate: &Image, truth: &Image, regions: &[RoIWindow]) -> Result<f64> {
    let k = SSIM_WINDOW;
    ssim_where(estimate, truth, |r, c| {
        regions.iter().all(|w| {
            r + k <= w.row_offset || r >= w.row_offset + w.side || c + k <= w.col_offset || c >= w.col_offset + w.side
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiSummary {
    pub window: RoIWindow,
    pub dropped: bool,
    pub final_macro: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub budget: usize,
    pub spent: usize,
    pub physical_spent: usize,
    pub selection_order: Vec<u32>,
    pub rois: Vec<RoiSummary>,
    pub lowres: MetricReport,
    pub composite: MetricReport,
    /// Scores on the evaluation regions: the scene's known regions, or the
    /// detected RoIs otherwise.
    pub regions: Vec<RegionScore>,
    pub background_ssim: Option<f64>,
}

pub struct RunReport {
    pub summary: RunSummary,
    pub outcome: RpsOutcome,
    pub history: Vec<StageRecord>,
    pub scene: Image,
    pub composite: Image,
}

#[derive(Serialize)]
struct StageRow {
    label: u32,
    resolution: String,
    rows: usize,
    iterations: usize,
    residual_norm: f64,
    converged: bool,
    nmse: f64,
    ssim: f64,
}

pub(crate) fn layout(out: &Path) -> Result<[PathBuf; 4]> {
    let dirs = ["images", "logs", "metrics", "config"].map(|d| out.join(d));
    for d in &dirs {
        std::fs::create_dir_all(d)?;
    }
    Ok(dirs)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs the prioritised acquisition on the configured scene and writes
/// images/, logs/, metrics/ and config/ under `out`.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let scene = load_scene(cfg)?;
    let mut backend = SimulatedBackend::new(scene.image.clone(), cfg.simulation())?;
    let det = cfg.detection();
    let outcome = run_rps(&mut backend, cfg.budget, cfg.normalized_ri, |lr| detect_rois(lr, &det))?;
    if outcome.ledger.spent() > cfg.budget {
        return Err(Error::BudgetInfeasible(format!(
            "spent {} of a {} budget",
            outcome.ledger.spent(),
            cfg.budget
        )));
    }
    let windows: Vec<RoIWindow> = outcome.rois.iter().map(|s| s.window).collect();
    let composite = backend.composite(&windows)?;
    let regions = scene.regions.clone().unwrap_or_else(|| windows.clone());
    let summary = RunSummary {
        budget: cfg.budget,
        spent: outcome.ledger.spent(),
        physical_spent: outcome.ledger.physical_spent(),
        selection_order: outcome.log.selection_order(),
        rois: outcome
            .rois
            .iter()
            .map(|s| RoiSummary {
                window: s.window,
                dropped: s.dropped,
                final_macro: s.window.current_macro,
            })
            .collect(),
        lowres: MetricReport::compute(&outcome.lowres, &scene.image)?,
        composite: MetricReport::compute(&composite, &scene.image)?,
        regions: region_scores(&composite, &scene.image, &regions)?,
        background_ssim: background_ssim(&composite, &scene.image, &regions).ok(),
    };

    let [images, logs, metrics, config] = layout(out)?;
    write_pgm16(&images.join("scene.pgm"), &scene.image)?;
    write_pgm16(&images.join("lowres.pgm"), &outcome.lowres)?;
    write_pgm16(&images.join("composite.pgm"), &composite)?;
    write_raw_f64(&images.join("composite.f64"), &composite)?;
    for h in backend.history() {
        let name = format!("roi-{}-{}x{}.pgm", h.label, h.macro_side, h.macro_side);
        write_pgm16(&images.join(name), &h.image)?;
    }
    outcome.log.write_csv(&logs.join("evolution.csv"))?;
    outcome.log.write_json(&logs.join("evolution.json"))?;
    outcome.ledger.write_audit_csv(&logs.join("ledger.csv"))?;
    write_json(&logs.join("rois.json"), &summary.rois)?;

    let mut w = csv::Writer::from_path(metrics.join("stages.csv")).map_err(crate::verification::csv_err)?;
    for h in backend.history() {
        w.serialize(StageRow {
            label: h.label,
            resolution: format!("{}x{}", h.macro_side, h.macro_side),
            rows: h.rows,
            iterations: h.iterations,
            residual_norm: h.residual_norm,
            converged: h.converged,
            nmse: h.metrics.nmse,
            ssim: h.metrics.ssim,
        })
        .map_err(crate::verification::csv_err)?;
    }
    w.flush()?;
    write_json(&metrics.join("summary.json"), &summary)?;
    let mut replay = cfg.clone();
    replay.output_dir = None;
    std::fs::write(config.join("run.json"), replay.to_json()? + "\n")?;

    Ok(RunReport {
        summary,
        history: backend.history().to_vec(),
        outcome,
        scene: scene.image,
        composite,
    })
}

/// Low-resolution acquisition and detection alone.
pub fn detect_only(cfg: &RunConfig) -> Result<(Image, Vec<RoIWindow>)> {
    cfg.validate()?;
    let scene = load_scene(cfg)?;
    let mut backend = SimulatedBackend::new(scene.image, cfg.simulation())?;
    let lowres = backend.acquire_lowres()?;
    let windows = detect_rois(&lowres, &cfg.detection())?;
    Ok((lowres, windows))
}
