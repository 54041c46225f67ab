use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::CycleCost;
use crate::verification::csv_err;

/// Who a debit is charged to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Account {
    Lowres,
    Roi(u32),
}

impl std::fmt::Display for Account {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Account::Lowres => write!(f, "lowres"),
            Account::Roi(l) => write!(f, "roi-{l}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Purpose {
    Lowres,
    Coarse,
    Refinement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Debit {
    pub account: Account,
    pub purpose: Purpose,
    /// Macro size the measurements were taken at.
    pub macro_side: usize,
    pub logical: usize,
    pub physical: usize,
}

/// Measurement budget with an audit trail of every debit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    budget: usize,
    spent: usize,
    physical_spent: usize,
    audit: Vec<Debit>,
}

impl Ledger {
    pub fn new(budget: usize) -> Self {
        Ledger {
            budget,
            spent: 0,
            physical_spent: 0,
            audit: Vec::new(),
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn spent(&self) -> usize {
        self.spent
    }

    pub fn physical_spent(&self) -> usize {
        self.physical_spent
    }

    pub fn available(&self) -> usize {
        self.budget - self.spent
    }

    pub fn audit(&self) -> &[Debit] {
        &self.audit
    }

    pub fn can_afford(&self, cost: CycleCost) -> bool {
        cost.logical <= self.available()
    }

    pub fn debit(&mut self, account: Account, purpose: Purpose, macro_side: usize, cost: CycleCost) -> Result<()> {
        if !self.can_afford(cost) {
            return Err(Error::BudgetInfeasible(format!(
                "{account} needs {} measurements, {} available",
                cost.logical,
                self.available()
            )));
        }
        self.spent += cost.logical;
        self.physical_spent += cost.physical;
        self.audit.push(Debit {
            account,
            purpose,
            macro_side,
            logical: cost.logical,
            physical: cost.physical,
        });
        Ok(())
    }

    /// Rebuilds a ledger from an audit trail, failing if it overdraws.
    pub fn replay(budget: usize, audit: &[Debit]) -> Result<Ledger> {
        let mut l = Ledger::new(budget);
        for d in audit {
            l.debit(
                d.account,
                d.purpose,
                d.macro_side,
                CycleCost {
                    logical: d.logical,
                    physical: d.physical,
                },
            )?;
        }
        Ok(l)
    }

    /// Logical spend attributed to one account.
    pub fn spent_by(&self, account: Account) -> usize {
        self.audit
            .iter()
            .filter(|d| d.account == account)
            .map(|d| d.logical)
            .sum()
    }

    pub fn write_audit_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["account", "purpose", "macro_side", "logical", "physical"])
            .map_err(csv_err)?;
        for d in &self.audit {
            let purpose = match d.purpose {
                Purpose::Lowres => "lowres",
                Purpose::Coarse => "coarse",
                Purpose::Refinement => "refinement",
            };
            w.write_record([
                d.account.to_string(),
                purpose.to_string(),
                d.macro_side.to_string(),
                d.logical.to_string(),
                d.physical.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}
