use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{compute_ri, ri_budget, AcquisitionBackend};
use crate::error::{Error, Result};
use crate::imaging::{extract_window, macro_upsample, paste_window, Image, RoIWindow};
use crate::metrics::MetricReport;
use crate::operators::{
    build_macro_mask_operator, build_walsh_level_operator, cycle_cost, design_sampling_map, CycleCost, LevelFractions,
    LinearOperator, MaskScheme, MeasurementOperator, WalshSamplingMap,
};
use crate::solvers::{solve_analysis_bpdn, solve_analysis_tv_from, SolveReport, SolverOptions};
use crate::transforms::TransformSpec;

/// Measurement family used for the RoIs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// 0/1 macro-pixel masks at every scale.
    MacroBinary01,
    /// 0/1 coarse masks, ±1 masks for refinements.
    MacroRademacher,
    /// Walsh coefficients of a three-level map; the low-resolution image
    /// stands in for the first coarse solution.
    WalshMultilevel,
}

impl Ensemble {
    pub fn default_ri_fraction(self) -> f64 {
        match self {
            Ensemble::WalshMultilevel => 0.20,
            _ => 0.10,
        }
    }

    pub fn default_solver(self) -> SolverOptions {
        match self {
            Ensemble::WalshMultilevel => SolverOptions::walsh(),
            _ => SolverOptions::macro_pixel(),
        }
    }

    fn refinement_scheme(self) -> MaskScheme {
        match self {
            Ensemble::MacroRademacher => MaskScheme::Rademacher,
            _ => MaskScheme::Binary01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub ensemble: Ensemble,
    pub lowres_count: usize,
    pub lowres_macro: usize,
    /// Fraction of a RoI's pixels bought per scale.
    pub ri_fraction: f64,
    /// Standard deviation of additive Gaussian measurement noise.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Low-resolution BPDN uses `γ = lowres_kappa / (2 max_k |(W Aᵀ y)_k|)`
    /// with the DC coefficient left out of the maximum.
    pub lowres_kappa: f64,
    pub wavelet_levels: usize,
    pub solver: SolverOptions,
}

impl SimulationSettings {
    pub fn new(ensemble: Ensemble, seed: u64) -> Self {
        SimulationSettings {
            ensemble,
            lowres_count: 1000,
            lowres_macro: 8,
            ri_fraction: ensemble.default_ri_fraction(),
            noise_sigma: 0.0,
            seed,
            lowres_kappa: 2.0e4,
            wavelet_levels: 3,
            solver: SolverOptions {
                max_iters: RPS_SOLVER_ITERS,
                ..ensemble.default_solver()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lowres_count == 0 || !self.lowres_macro.is_power_of_two() {
            return Err(Error::Config(format!(
                "need a positive low-resolution count and a power-of-two macro size, got {} and {}",
                self.lowres_count, self.lowres_macro
            )));
        }
        if !(self.ri_fraction > 0.0 && self.ri_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "ri_fraction must lie in (0, 1], got {}",
                self.ri_fraction
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.lowres_kappa > 0.0) || self.wavelet_levels == 0 {
            return Err(Error::Config("lowres_kappa and wavelet_levels must be positive".into()));
        }
        if self.ensemble == Ensemble::WalshMultilevel && self.lowres_macro != 8 {
            return Err(Error::Config(
                "the Walsh ensemble has three levels and needs low-resolution macro 8".into(),
            ));
        }
        self.solver.validate()
    }
}

/// Seed for one acquisition, mixed from the run seed, RoI label and stage.
pub fn stage_seed(master: u64, label: u32, stage: u64) -> u64 {
    let mut z = master ^ (u64::from(label) << 32) ^ stage.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Warm starts carry most of the work between scales, so each solve is short.
pub const RPS_SOLVER_ITERS: usize = 150;

const STAGE_COARSE: u64 = 1 << 8;
const STAGE_REFINE: u64 = 2 << 8;
const STAGE_MAP: u64 = 3 << 8;
const NOISE_SALT: u64 = 0x6e6f_6973_65;

/// A reconstruction of one RoI at one macro size.
#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub label: u32,
    pub macro_side: usize,
    /// At native resolution.
    #[serde(skip)]
    pub image: Image,
    pub metrics: MetricReport,
    pub rows: usize,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

struct RoiSim {
    truth: Image,
    parts: Vec<MeasurementOperator>,
    data: Vec<f64>,
    pending: Option<(MeasurementOperator, Vec<f64>)>,
    /// On the grid of the current macro size (native in Walsh mode).
    coarse: Image,
    map: Option<WalshSamplingMap>,
    levels_done: usize,
}

/// Measures a known scene.
pub struct SimulatedBackend {
    scene: Image,
    settings: SimulationSettings,
    lowres: Option<Image>,
    lowres_report: Option<SolveReport>,
    rois: BTreeMap<u32, RoiSim>,
    history: Vec<StageRecord>,
}

impl SimulatedBackend {
    pub fn new(scene: Image, settings: SimulationSettings) -> Result<Self> {
        settings.validate()?;
        let side = scene.height();
        if scene.width() != side || side % settings.lowres_macro != 0 {
            return Err(Error::DimensionMismatch(format!(
                "scene must be square with a side divisible by {}, got {}x{}",
                settings.lowres_macro,
                scene.height(),
                scene.width()
            )));
        }
        Ok(SimulatedBackend {
            scene,
            settings,
            lowres: None,
            lowres_report: None,
            rois: BTreeMap::new(),
            history: Vec::new(),
        })
    }

    pub fn settings(&self) -> &SimulationSettings {
        &self.settings
    }

    pub fn scene(&self) -> &Image {
        &self.scene
    }

    pub fn lowres(&self) -> Option<&Image> {
        self.lowres.as_ref()
    }

    pub fn lowres_report(&self) -> Option<&SolveReport> {
        self.lowres_report.as_ref()
    }

    /// Every RoI reconstruction in the order it was produced.
    pub fn history(&self) -> &[StageRecord] {
        &self.history
    }

    /// Latest reconstruction of a RoI at native resolution.
    pub fn roi_image(&self, label: u32) -> Option<Image> {
        let r = self.rois.get(&label)?;
        Some(macro_upsample(&r.coarse, r.truth.height() / r.coarse.height()))
    }

    /// Low-resolution background with the latest RoI reconstructions pasted in.
    pub fn composite(&self, windows: &[RoIWindow]) -> Result<Image> {
        let mut out = self
            .lowres
            .clone()
            .ok_or_else(|| Error::InvalidParameter("no low-resolution acquisition yet".into()))?;
        for w in windows {
            if let Some(img) = self.roi_image(w.label) {
                out = paste_window(&out, w, &img)?;
            }
        }
        Ok(out)
    }

    fn sim(&self, label: u32) -> Result<&RoiSim> {
        self.rois
            .get(&label)
            .ok_or_else(|| Error::InvalidParameter(format!("RoI {label} has no coarse acquisition")))
    }

    fn measure(&self, op: &MeasurementOperator, truth: &Image, seed: u64) -> Result<Vec<f64>> {
        let mut y = op.measure(truth)?;
        if self.settings.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_SALT);
            let normal =
                Normal::new(0.0, self.settings.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
        Ok(y)
    }

    fn eta(&self, rows: usize) -> f64 {
        self.settings.noise_sigma.powi(2) * rows as f64 * 1.1
    }

    fn rows_per_scale(&self, roi: &RoIWindow) -> Result<usize> {
        ri_budget(roi, self.settings.ri_fraction * 100.0)
    }

    fn walsh_map(&self, roi: &RoIWindow) -> Result<WalshSamplingMap> {
        design_sampling_map(
            roi.side,
            self.rows_per_scale(roi)?,
            LevelFractions::for_side(roi.side),
            stage_seed(self.settings.seed, roi.label, STAGE_MAP),
        )
    }

    // Operator for the batch one scale finer than `roi.current_macro`.
    fn refinement_operator(&self, roi: &RoIWindow) -> Result<MeasurementOperator> {
        if roi.current_macro < 2 {
            return Err(Error::InvalidParameter(format!(
                "RoI {} is already at native resolution",
                roi.label
            )));
        }
        match self.settings.ensemble {
            Ensemble::WalshMultilevel => {
                let sim = self.sim(roi.label)?;
                let map = sim.map.as_ref().expect("Walsh RoIs carry a map");
                if sim.levels_done >= 3 {
                    return Err(Error::InvalidParameter(format!(
                        "RoI {} has used every Walsh level",
                        roi.label
                    )));
                }
                build_walsh_level_operator(map, &[sim.levels_done])
            }
            e => build_macro_mask_operator(
                roi.side,
                roi.current_macro / 2,
                e.refinement_scheme(),
                self.rows_per_scale(roi)?,
                stage_seed(
                    self.settings.seed,
                    roi.label,
                    STAGE_REFINE | roi.current_macro as u64 / 2,
                ),
            ),
        }
    }

    fn solve(&self, op: &MeasurementOperator, factor: usize, y: &[f64], x0: &Image) -> Result<SolveReport> {
        let view = op.on_grid(factor)?;
        let grid = op.window_side() / factor;
        let spec = TransformSpec::db8_for_grid(grid, self.settings.wavelet_levels);
        let opts = SolverOptions {
            eta: self.eta(op.rows()),
            ..self.settings.solver
        };
        solve_analysis_tv_from(&view, &spec, y, &opts, Some(x0.data()))
    }

    fn record(&mut self, label: u32, macro_side: usize, rows: usize, report: Option<&SolveReport>) -> Result<()> {
        let sim = self.sim(label)?;
        let image = macro_upsample(&sim.coarse, sim.truth.height() / sim.coarse.height());
        let metrics = MetricReport::compute(&image, &sim.truth)?;
        self.history.push(StageRecord {
            label,
            macro_side,
            image,
            metrics,
            rows,
            iterations: report.map_or(0, |r| r.iterations_used),
            residual_norm: report.map_or(0.0, |r| r.residual_norm),
            converged: report.is_none_or(|r| r.converged),
        });
        Ok(())
    }
}

impl AcquisitionBackend for SimulatedBackend {
    fn lowres_cost(&self) -> CycleCost {
        CycleCost {
            logical: self.settings.lowres_count,
            physical: self.settings.lowres_count,
        }
    }

    fn acquire_lowres(&mut self) -> Result<Image> {
        let s = self.settings;
        let side = self.scene.height();
        let op = build_macro_mask_operator(
            side,
            s.lowres_macro,
            MaskScheme::Binary01,
            s.lowres_count,
            stage_seed(s.seed, 0, STAGE_COARSE | s.lowres_macro as u64),
        )?;
        let y = self.measure(&op, &self.scene, stage_seed(s.seed, 0, STAGE_COARSE))?;
        let view = op.on_grid(s.lowres_macro)?;
        let grid = side / s.lowres_macro;
        let plan = TransformSpec::dct().plan(grid, grid)?;
        let mut aty = vec![0.0; grid * grid];
        view.apply_adjoint(&y, &mut aty);
        let mut c = vec![0.0; grid * grid];
        plan.forward(&aty, &mut c);
        // 0/1 masks all see the scene mean, so the DC term would dominate the scale.
        let peak = c[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gamma = if peak > 0.0 { s.lowres_kappa / (2.0 * peak) } else { 1.0 };
        let opts = SolverOptions {
            gamma,
            max_iters: 6000,
            ..SolverOptions::default()
        };
        let report = solve_analysis_bpdn(&view, &TransformSpec::dct(), &y, &opts)?;
        let img = macro_upsample(&report.solution, s.lowres_macro);
        self.lowres = Some(img.clone());
        self.lowres_report = Some(report);
        Ok(img)
    }

    fn coarse_cost(&self, roi: &RoIWindow) -> Result<CycleCost> {
        Ok(match self.settings.ensemble {
            Ensemble::WalshMultilevel => CycleCost::default(),
            _ => {
                let n = self.rows_per_scale(roi)?;
                CycleCost {
                    logical: n,
                    physical: n,
                }
            }
        })
    }

    fn acquire_coarse(&mut self, roi: &RoIWindow) -> Result<()> {
        let truth = extract_window(&self.scene, roi)?;
        let m = roi.current_macro;
        if self.settings.ensemble == Ensemble::WalshMultilevel {
            let lowres = self
                .lowres
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("no low-resolution acquisition yet".into()))?;
            let coarse = extract_window(lowres, roi)?;
            let map = self.walsh_map(roi)?;
            self.rois.insert(
                roi.label,
                RoiSim {
                    truth,
                    parts: Vec::new(),
                    data: Vec::new(),
                    pending: None,
                    coarse,
                    map: Some(map),
                    levels_done: 0,
                },
            );
            return self.record(roi.label, m, 0, None);
        }
        let seed = stage_seed(self.settings.seed, roi.label, STAGE_COARSE | m as u64);
        let op = build_macro_mask_operator(roi.side, m, MaskScheme::Binary01, self.rows_per_scale(roi)?, seed)?;
        let y = self.measure(&op, &truth, seed)?;
        let grid = roi.side / m;
        let report = self.solve(&op, m, &y, &Image::zeros(grid, grid))?;
        let rows = op.rows();
        self.rois.insert(
            roi.label,
            RoiSim {
                truth,
                parts: vec![op],
                data: y,
                pending: None,
                coarse: report.solution.clone(),
                map: None,
                levels_done: 0,
            },
        );
        self.record(roi.label, m, rows, Some(&report))
    }

    fn refinement_cost(&self, roi: &RoIWindow) -> Result<CycleCost> {
        Ok(cycle_cost(&self.refinement_operator(roi)?))
    }

    fn acquire_refinement(&mut self, roi: &RoIWindow) -> Result<f64> {
        let op = self.refinement_operator(roi)?;
        let seed = stage_seed(
            self.settings.seed,
            roi.label,
            STAGE_REFINE | roi.current_macro as u64 / 2,
        );
        let sim = self.sim(roi.label)?;
        let y = self.measure(&op, &sim.truth, seed)?;
        let ri = compute_ri(&y, &op, &sim.coarse)?;
        self.rois.get_mut(&roi.label).expect("checked above").pending = Some((op, y));
        Ok(ri)
    }

    fn refine(&mut self, roi: &RoIWindow) -> Result<()> {
        let walsh = self.settings.ensemble == Ensemble::WalshMultilevel;
        let next = roi.current_macro / 2;
        let sim = self
            .rois
            .get_mut(&roi.label)
            .ok_or_else(|| Error::InvalidParameter(format!("RoI {} has no coarse acquisition", roi.label)))?;
        let (op, y) = sim
            .pending
            .take()
            .ok_or_else(|| Error::InvalidParameter(format!("RoI {} has no refinement measurements", roi.label)))?;
        sim.parts.push(op);
        sim.data.extend(y);
        sim.levels_done += 1;
        let stacked = MeasurementOperator::stacked(sim.parts.clone())?;
        let data = sim.data.clone();
        // Walsh rows are resolved on the native grid at every stage.
        let (factor, x0) = if walsh {
            (1, sim.coarse.clone())
        } else {
            (next, macro_upsample(&sim.coarse, 2))
        };
        let report = self.solve(&stacked, factor, &data, &x0)?;
        if !report.solution.data().iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "RoI {} reconstruction is not finite",
                roi.label
            )));
        }
        self.rois.get_mut(&roi.label).expect("checked above").coarse = report.solution.clone();
        self.record(roi.label, next, stacked.rows(), Some(&report))
    }
}
