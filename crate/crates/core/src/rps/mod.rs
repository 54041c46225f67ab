//! Refinement-prioritised sampling.
//!
//! After a low-resolution acquisition of the whole scene and RoI detection,
//! every RoI gets a coarse reconstruction and one batch of measurements at
//! the next finer scale, from which its Refinement Indicator is computed.
//! The loop then repeatedly refines the RoI with the largest RI, buys its
//! next batch if the budget allows, and stops when no RoI has a pending RI.
//!
//! Acquisition and reconstruction sit behind [`AcquisitionBackend`]:
//! [`SimulatedBackend`] measures a known scene, [`ScriptedBackend`] replays
//! fixed costs and RI values so the prioritisation logic can be checked on
//! its own.

mod engine;
mod ledger;
mod log;
mod scripted;
mod simulated;

pub use engine::{run_rps, AcquisitionBackend, RpsOutcome};
pub use ledger::{Account, Debit, Ledger, Purpose};
pub use log::{EvolutionLog, LogRow};
pub use scripted::{ScriptedBackend, ScriptedRoi};
pub use simulated::{stage_seed, Ensemble, SimulatedBackend, SimulationSettings, StageRecord, RPS_SOLVER_ITERS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Image, RoIWindow};
use crate::operators::MeasurementOperator;

/// Prioritisation state of one RoI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoIState {
    pub window: RoIWindow,
    /// RI of the pending refinement measurements, if any were bought.
    pub ri: Option<f64>,
    /// Number of measurements behind `ri`.
    pub ri_rows: usize,
    /// At native resolution, or out of the prioritisation list.
    pub resolved: bool,
    /// Left the list because the next batch was unaffordable.
    pub dropped: bool,
}

impl RoIState {
    pub fn new(window: RoIWindow) -> Self {
        RoIState {
            window,
            ri: None,
            ri_rows: 0,
            resolved: false,
            dropped: false,
        }
    }

    pub fn is_live(&self) -> bool {
        !self.resolved && self.ri.is_some()
    }
}

/// `floor(percent / 100 * side²)`.
pub fn ri_budget(window: &RoIWindow, percent: f64) -> Result<usize> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::InvalidParameter(format!(
            "percent must lie in (0, 100], got {percent}"
        )));
    }
    // Decimal percentages such as 10 are not exact in binary; nudge before flooring.
    Ok((percent / 100.0 * window.num_pixels() as f64 + 1e-9).floor() as usize)
}

/// `||y_B - B x_C||²` with `x_C` given on a grid that divides the window.
pub fn compute_ri(y_b: &[f64], b: &MeasurementOperator, x_c: &Image) -> Result<f64> {
    use crate::operators::LinearOperator;
    let side = b.window_side();
    if x_c.height() != x_c.width() || x_c.height() == 0 || side % x_c.height() != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} coarse solution does not tile a {side}x{side} window",
            x_c.height(),
            x_c.width()
        )));
    }
    if y_b.len() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurements for {} rows",
            y_b.len(),
            b.rows()
        )));
    }
    let view = b.on_grid(side / x_c.height())?;
    let mut pred = vec![0.0; b.rows()];
    view.apply(x_c.data(), &mut pred);
    Ok(y_b.iter().zip(&pred).map(|(y, p)| (y - p).powi(2)).sum())
}

/// Live RoI with the largest RI (or RI per measurement when `normalized`),
/// ties going to the larger window and then the smaller label.
pub fn select_next(states: &[RoIState], normalized: bool) -> Option<u32> {
    let score = |s: &RoIState| {
        let ri = s.ri.unwrap_or(0.0);
        if normalized {
            ri / s.ri_rows.max(1) as f64
        } else {
            ri
        }
    };
    states
        .iter()
        .filter(|s| s.is_live())
        .max_by(|a, b| {
            score(a)
                .total_cmp(&score(b))
                .then(a.window.side.cmp(&b.window.side))
                .then(b.window.label.cmp(&a.window.label))
        })
        .map(|s| s.window.label)
}
