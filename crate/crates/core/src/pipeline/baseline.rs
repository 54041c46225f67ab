use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{background_ssim, detect_only, layout, load_scene, region_scores, write_json, RegionScore};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::io::{write_pgm16, write_raw_f64};
use crate::metrics::MetricReport;
use crate::operators::{
    build_macro_mask_operator, build_walsh_operator, cycle_cost, design_sampling_map, LevelFractions, LinearOperator,
    MaskScheme, MeasurementOperator,
};
use crate::rps::stage_seed;
use crate::solvers::{solve_analysis_tv, SolverOptions};
use crate::transforms::TransformSpec;

/// Whole-scene acquisition spending the entire budget at native resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    /// Rademacher masks of single mirrors.
    ClassicalCs,
    /// A multilevel Walsh sampling map over the whole scene.
    MultilevelCs,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::ClassicalCs => "classical-cs",
            BaselineMethod::MultilevelCs => "multilevel-cs",
        }
    }
}

const BASELINE_STAGE: u64 = 0xba5e;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub method: BaselineMethod,
    pub budget: usize,
    pub rows: usize,
    pub physical: usize,
    pub iterations: usize,
    pub converged: bool,
    pub scene: MetricReport,
    pub regions: Vec<RegionScore>,
    pub background_ssim: Option<f64>,
}

pub struct BaselineReport {
    pub summary: BaselineSummary,
    pub image: Image,
}

fn operator(cfg: &RunConfig, method: BaselineMethod) -> Result<MeasurementOperator> {
    let side = cfg.scene_side;
    let n = side * side;
    if cfg.budget > n {
        return Err(Error::BudgetInfeasible(format!(
            "a whole-scene baseline can use at most {n} measurements, budget is {}",
            cfg.budget
        )));
    }
    let seed = stage_seed(cfg.seed, 0, BASELINE_STAGE);
    match method {
        BaselineMethod::ClassicalCs => build_macro_mask_operator(side, 1, MaskScheme::Rademacher, cfg.budget, seed),
        BaselineMethod::MultilevelCs => build_walsh_operator(&design_sampling_map(
            side,
            cfg.budget,
            LevelFractions::for_side(side),
            seed,
        )?),
    }
}

/// Reconstructs the whole scene from `cfg.budget` measurements and reports
/// metrics on the same regions a prioritised run is scored on.
pub fn run_baseline(cfg: &RunConfig, method: BaselineMethod, out: &Path) -> Result<BaselineReport> {
    cfg.validate()?;
    let scene = load_scene(cfg)?;
    let regions = match &scene.regions {
        Some(r) => r.clone(),
        None => detect_only(cfg)?.1,
    };
    let op = operator(cfg, method)?;
    let mut y = op.measure(&scene.image)?;
    if cfg.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(cfg.seed, 0, BASELINE_STAGE + 1));
        let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    let opts = SolverOptions {
        eta: cfg.noise_sigma.powi(2) * op.rows() as f64 * 1.1,
        ..cfg.solver(cfg.baseline_iters)
    };
    let spec = TransformSpec::db8_for_grid(cfg.scene_side, cfg.wavelet_levels);
    let report = solve_analysis_tv(&op, &spec, &y, &opts)?;
    if !report.solution.data().iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!(
            "{} reconstruction is not finite",
            method.name()
        )));
    }
    let image = report.solution;
    let summary = BaselineSummary {
        method,
        budget: cfg.budget,
        rows: op.rows(),
        physical: cycle_cost(&op).physical,
        iterations: report.iterations_used,
        converged: report.converged,
        scene: MetricReport::compute(&image, &scene.image)?,
        regions: region_scores(&image, &scene.image, &regions)?,
        background_ssim: background_ssim(&image, &scene.image, &regions).ok(),
    };

    let [images, _, metrics, config] = layout(out)?;
    let name = method.name();
    write_pgm16(&images.join(format!("baseline-{name}.pgm")), &image)?;
    write_raw_f64(&images.join(format!("baseline-{name}.f64")), &image)?;
    write_json(&metrics.join(format!("baseline-{name}.json")), &summary)?;
    let mut replay = cfg.clone();
    replay.output_dir = None;
    std::fs::write(config.join(format!("baseline-{name}.json")), replay.to_json()? + "\n")?;
    Ok(BaselineReport { summary, image })
}
