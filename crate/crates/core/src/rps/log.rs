use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::verification::csv_err;

/// One prioritisation step: the RI of every live RoI when the choice was
/// made, the choice, the macro size it was refined to and the measurements
/// available at the start of the step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    /// Aligned with [`EvolutionLog::labels`]; `None` for RoIs no longer live.
    pub ri: Vec<Option<f64>>,
    pub selected: u32,
    pub refined_macro: usize,
    pub available: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionLog {
    pub labels: Vec<u32>,
    pub rows: Vec<LogRow>,
}

impl EvolutionLog {
    pub fn new(labels: Vec<u32>) -> Self {
        EvolutionLog {
            labels,
            rows: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn selection_order(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.selected).collect()
    }

    pub fn available_trajectory(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.available).collect()
    }

    /// Columns: iteration, one RI column per RoI, selected RoI, refined
    /// resolution as `MxM`, available measurements.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["iteration".to_string()];
        header.extend(self.labels.iter().map(|l| format!("ri_roi_{l}")));
        header.extend(["selected", "resolution", "available"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.iteration.to_string()];
            rec.extend(r.ri.iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
            rec.push(r.selected.to_string());
            rec.push(format!("{0}x{0}", r.refined_macro));
            rec.push(r.available.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
