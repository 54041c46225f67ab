use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::{DetectionParams, DetectionScore};
use crate::error::{Error, Result};
use crate::rps::{Ensemble, SimulationSettings};
use crate::solvers::SolverOptions;

/// Iteration cap for whole-scene baseline reconstructions, which start from
/// zero rather than a coarser solution.
pub const BASELINE_ITERS: usize = 300;

/// Everything a run depends on, as one flat document.
///
/// `input = None` selects the built-in textured composite generated from
/// `seed`. `ri_fraction = None` means the ensemble's default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub scene_side: usize,
    pub ensemble: Ensemble,
    pub budget: usize,
    pub lowres_count: usize,
    pub lowres_macro: usize,
    pub ri_fraction: Option<f64>,
    /// Rank RoIs by RI per refinement measurement instead of raw RI.
    pub normalized_ri: bool,
    pub max_regions: usize,
    pub merge_radius: usize,
    pub detection_score: DetectionScore,
    pub min_side: usize,
    pub max_side: usize,
    pub min_relative_score: f64,
    pub max_iters: usize,
    pub baseline_iters: usize,
    pub continuation_rounds: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub tol: f64,
    pub lowres_kappa: f64,
    pub wavelet_levels: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimulationSettings::new(Ensemble::MacroBinary01, 0);
        let det = DetectionParams::default();
        RunConfig {
            input: None,
            scene_side: 256,
            ensemble: sim.ensemble,
            budget: 9830,
            lowres_count: sim.lowres_count,
            lowres_macro: sim.lowres_macro,
            ri_fraction: None,
            normalized_ri: false,
            max_regions: det.max_regions,
            merge_radius: det.merge_radius,
            detection_score: det.score,
            min_side: det.min_side,
            max_side: det.max_side,
            min_relative_score: det.min_relative_score,
            max_iters: sim.solver.max_iters,
            baseline_iters: BASELINE_ITERS,
            continuation_rounds: sim.solver.continuation_rounds,
            beta1: sim.solver.beta1,
            beta2: sim.solver.beta2,
            tol: sim.solver.tol,
            lowres_kappa: sim.lowres_kappa,
            wavelet_levels: sim.wavelet_levels,
            seed: 0,
            noise_sigma: 0.0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Pretty JSON with every default spelled out; feeding it back reproduces the run.
    pub fn to_json(&self) -> Result<String> {
        let mut resolved = self.clone();
        resolved.ri_fraction = Some(self.ri_fraction());
        Ok(serde_json::to_string_pretty(&resolved)?)
    }

    pub fn ri_fraction(&self) -> f64 {
        self.ri_fraction.unwrap_or_else(|| self.ensemble.default_ri_fraction())
    }

    pub fn detection(&self) -> DetectionParams {
        DetectionParams {
            max_regions: self.max_regions,
            merge_radius: self.merge_radius,
            score: self.detection_score,
            min_side: self.min_side,
            max_side: self.max_side,
            coarse_pixel: self.lowres_macro,
            min_relative_score: self.min_relative_score,
            ..DetectionParams::default()
        }
    }

    pub fn solver(&self, max_iters: usize) -> SolverOptions {
        SolverOptions {
            max_iters,
            continuation_rounds: self.continuation_rounds,
            beta1: self.beta1,
            beta2: self.beta2,
            tol: self.tol,
            ..self.ensemble.default_solver()
        }
    }

    pub fn simulation(&self) -> SimulationSettings {
        SimulationSettings {
            ensemble: self.ensemble,
            lowres_count: self.lowres_count,
            lowres_macro: self.lowres_macro,
            ri_fraction: self.ri_fraction(),
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            lowres_kappa: self.lowres_kappa,
            wavelet_levels: self.wavelet_levels,
            solver: self.solver(self.max_iters),
        }
    }

    /// Checks every invariant and reports the first violation as a config error.
    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        if !self.scene_side.is_power_of_two() || self.scene_side < self.lowres_macro.max(1) {
            return Err(Error::Config(format!(
                "scene_side must be a power of two of at least the low-resolution macro size, got {}",
                self.scene_side
            )));
        }
        if self.budget == 0 || self.baseline_iters == 0 {
            return Err(Error::Config("budget and baseline_iters must be positive".into()));
        }
        if let Some(f) = self.ri_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("ri_fraction must lie in (0, 1], got {f}")));
            }
        }
        self.simulation().validate().map_err(as_config)?;
        self.detection().validate().map_err(as_config)
    }

    /// `output_dir`, else `$RPS_OUTPUT_ROOT/<stem>`, else `./rps-output/<stem>`.
    pub fn resolve_output_dir(&self, stem: &str) -> PathBuf {
        if let Some(d) = &self.output_dir {
            return d.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("rps-output"));
        root.join(stem)
    }
}

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "RPS_OUTPUT_ROOT";
