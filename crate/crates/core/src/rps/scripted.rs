use std::collections::BTreeMap;

use super::AcquisitionBackend;
use crate::error::{Error, Result};
use crate::imaging::{Image, RoIWindow};
use crate::operators::CycleCost;

/// Costs and RI values for one RoI, keyed by the macro size the RoI is at.
#[derive(Clone, Debug, Default)]
pub struct ScriptedRoi {
    pub coarse: CycleCost,
    pub refinement: BTreeMap<usize, CycleCost>,
    pub ri: BTreeMap<usize, f64>,
}

/// Backend that replays fixed costs and RI values and records every call.
#[derive(Clone, Debug)]
pub struct ScriptedBackend {
    pub lowres: CycleCost,
    pub scene_side: usize,
    pub rois: BTreeMap<u32, ScriptedRoi>,
    pub calls: Vec<String>,
}

impl ScriptedBackend {
    pub fn new(lowres: CycleCost, scene_side: usize) -> Self {
        ScriptedBackend {
            lowres,
            scene_side,
            rois: BTreeMap::new(),
            calls: Vec::new(),
        }
    }

    fn roi(&self, w: &RoIWindow) -> Result<&ScriptedRoi> {
        self.rois
            .get(&w.label)
            .ok_or_else(|| Error::InvalidParameter(format!("no script for RoI {}", w.label)))
    }
}

impl AcquisitionBackend for ScriptedBackend {
    fn lowres_cost(&self) -> CycleCost {
        self.lowres
    }

    fn acquire_lowres(&mut self) -> Result<Image> {
        self.calls.push("lowres".into());
        Ok(Image::zeros(self.scene_side, self.scene_side))
    }

    fn coarse_cost(&self, roi: &RoIWindow) -> Result<CycleCost> {
        Ok(self.roi(roi)?.coarse)
    }

    fn acquire_coarse(&mut self, roi: &RoIWindow) -> Result<()> {
        self.calls.push(format!("coarse {} @{}", roi.label, roi.current_macro));
        Ok(())
    }

    fn refinement_cost(&self, roi: &RoIWindow) -> Result<CycleCost> {
        self.roi(roi)?
            .refinement
            .get(&roi.current_macro)
            .copied()
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "no refinement cost for RoI {} at {}",
                    roi.label, roi.current_macro
                ))
            })
    }

    fn acquire_refinement(&mut self, roi: &RoIWindow) -> Result<f64> {
        self.calls
            .push(format!("refinement {} @{}", roi.label, roi.current_macro));
        self.roi(roi)?
            .ri
            .get(&roi.current_macro)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("no RI for RoI {} at {}", roi.label, roi.current_macro)))
    }

    fn refine(&mut self, roi: &RoIWindow) -> Result<()> {
        self.calls.push(format!("refine {} @{}", roi.label, roi.current_macro));
        Ok(())
    }
}
