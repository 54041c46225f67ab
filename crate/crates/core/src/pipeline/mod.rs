//! End-to-end runs: configuration, scene ingestion, the prioritised
//! acquisition with its artifacts, and whole-scene baselines.

mod baseline;
mod config;
pub mod fixtures;
mod ingest;
mod run;

pub use baseline::{run_baseline, BaselineMethod, BaselineReport, BaselineSummary};
pub use config::{RunConfig, BASELINE_ITERS, OUTPUT_ROOT_ENV};
pub use ingest::{average_bands, crop_or_pad, ingest_scene, min_max_normalize, BandSpec, Interleave, SampleType};
pub use run::{
    background_ssim, detect_only, load_scene, region_scores, run_pipeline, RegionScore, RoiSummary, RunReport,
    RunSummary, Scene,
};
