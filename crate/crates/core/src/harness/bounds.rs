use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::{lower_bound_queries, Setting};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub setting: Setting,
    /// Number `kn` of values whose mean is estimated.
    pub kn: u64,
    pub eps1: f64,
}

impl BoundsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kn < 1 {
            return Err(Error::invalid("kn must be at least 1"));
        }
        if !(self.eps1 > 0.0 && self.eps1.is_finite()) {
            return Err(Error::invalid(format!(
                "eps1 must be positive and finite, got {}",
                self.eps1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub setting: Setting,
    pub kn: u64,
    pub eps1: f64,
    pub formula: String,
    pub queries: u64,
}

pub fn run_bounds_calc(spec: &BoundsSpec) -> Result<BoundsReport> {
    spec.validate()?;
    let formula = match spec.setting {
        Setting::Randomized => "min{kn, ceil((1/eps1)^2)}",
        Setting::Quantum => "min{kn, ceil(1/eps1)}",
    };
    Ok(BoundsReport {
        setting: spec.setting,
        kn: spec.kn,
        eps1: spec.eps1,
        formula: formula.to_string(),
        queries: lower_bound_queries(spec.setting, spec.kn, spec.eps1)?,
    })
}
