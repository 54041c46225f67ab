use serde::{Deserialize, Serialize};

use super::{select_next, Account, EvolutionLog, Ledger, LogRow, Purpose, RoIState};
use crate::error::{Error, Result};
use crate::imaging::{Image, RoIWindow};
use crate::operators::CycleCost;

/// Acquisition and reconstruction steps the prioritisation loop drives.
///
/// Windows passed in carry the RoI's current macro size: `acquire_coarse`
/// works at that size, `refinement_cost` and `acquire_refinement` concern the
/// measurements one scale finer, and `refine` moves the RoI to that scale.
pub trait AcquisitionBackend {
    fn lowres_cost(&self) -> CycleCost;
    fn acquire_lowres(&mut self) -> Result<Image>;
    fn coarse_cost(&self, roi: &RoIWindow) -> Result<CycleCost>;
    fn acquire_coarse(&mut self, roi: &RoIWindow) -> Result<()>;
    fn refinement_cost(&self, roi: &RoIWindow) -> Result<CycleCost>;
    /// Buys the refinement measurements and returns the RI.
    fn acquire_refinement(&mut self, roi: &RoIWindow) -> Result<f64>;
    fn refine(&mut self, roi: &RoIWindow) -> Result<()>;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RpsOutcome {
    pub lowres: Image,
    pub rois: Vec<RoIState>,
    pub log: EvolutionLog,
    pub ledger: Ledger,
}

/// Runs low-resolution acquisition, detection (`detect`), coarse and first
/// refinement acquisitions for every RoI, then the prioritisation loop.
pub fn run_rps(
    backend: &mut dyn AcquisitionBackend,
    budget: usize,
    normalized_ri: bool,
    detect: impl FnOnce(&Image) -> Result<Vec<RoIWindow>>,
) -> Result<RpsOutcome> {
    let mut ledger = Ledger::new(budget);
    let lowres_cost = backend.lowres_cost();
    if !ledger.can_afford(lowres_cost) {
        return Err(Error::BudgetInfeasible(format!(
            "budget {budget} is below the {} low-resolution measurements",
            lowres_cost.logical
        )));
    }
    ledger.debit(Account::Lowres, Purpose::Lowres, 0, lowres_cost)?;
    let lowres = backend.acquire_lowres()?;
    let windows = detect(&lowres)?;

    let mut states: Vec<RoIState> = windows.into_iter().map(RoIState::new).collect();
    for s in states.iter_mut() {
        let cost = backend.coarse_cost(&s.window)?;
        if ledger.can_afford(cost) {
            ledger.debit(
                Account::Roi(s.window.label),
                Purpose::Coarse,
                s.window.current_macro,
                cost,
            )?;
            backend.acquire_coarse(&s.window)?;
        } else {
            s.resolved = true;
            s.dropped = true;
        }
    }
    for s in states.iter_mut().filter(|s| !s.resolved) {
        buy_refinement(backend, &mut ledger, s)?;
    }

    let mut log = EvolutionLog::new(states.iter().map(|s| s.window.label).collect());
    while let Some(label) = select_next(&states, normalized_ri) {
        let available = ledger.available();
        let ri = states.iter().map(|s| if s.is_live() { s.ri } else { None }).collect();
        let s = states
            .iter_mut()
            .find(|s| s.window.label == label)
            .expect("selected label exists");
        backend.refine(&s.window)?;
        s.window = s.window.refined()?;
        s.ri = None;
        s.ri_rows = 0;
        log.rows.push(LogRow {
            iteration: log.rows.len() + 1,
            ri,
            selected: label,
            refined_macro: s.window.current_macro,
            available,
        });
        if s.window.current_macro == 1 {
            s.resolved = true;
        } else {
            buy_refinement(backend, &mut ledger, s)?;
        }
    }
    Ok(RpsOutcome {
        lowres,
        rois: states,
        log,
        ledger,
    })
}

fn buy_refinement(backend: &mut dyn AcquisitionBackend, ledger: &mut Ledger, s: &mut RoIState) -> Result<()> {
    let cost = backend.refinement_cost(&s.window)?;
    if !ledger.can_afford(cost) {
        s.resolved = true;
        s.dropped = true;
        return Ok(());
    }
    ledger.debit(
        Account::Roi(s.window.label),
        Purpose::Refinement,
        s.window.current_macro / 2,
        cost,
    )?;
    let ri = backend.acquire_refinement(&s.window)?;
    if !(ri >= 0.0 && ri.is_finite()) {
        return Err(Error::Numerical(format!("RI of RoI {} is {ri}", s.window.label)));
    }
    s.ri = Some(ri);
    s.ri_rows = cost.logical;
    Ok(())
}
