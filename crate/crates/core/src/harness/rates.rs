use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_rate, ErrorColumn, RateFit};
use super::spec::Tolerances;
use crate::bspline::{build_bump_family, MAX_SPLINE_DEGREE};
use crate::error::{Error, Result};
use crate::model::{PureTimeRhs, SmoothnessClass};
use crate::reduction::MAX_ORDER;
use crate::solvers::{deterministic_kfold_solver, randomized_cv_solver, SolverConfig, SolverMode};

/// Largest accepted grid exponent (costs up to `2^MAX_GRID_EXPONENT`).
pub const MAX_GRID_EXPONENT: u32 = 24;

fn default_samples() -> usize {
    4
}

/// Cost targets are `2^grid_lo, ..., 2^grid_hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub mode: SolverMode,
    pub r: usize,
    pub k: usize,
    pub grid_lo: u32,
    pub grid_hi: u32,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples_per_cell: usize,
    /// Keep every per-trial error in the table.
    #[serde(default)]
    pub dump_trials: bool,
}

impl RateSpec {
    pub fn new(
        mode: SolverMode,
        r: usize,
        k: usize,
        grid: (u32, u32),
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            mode,
            r,
            k,
            grid_lo: grid.0,
            grid_hi: grid.1,
            trials,
            seed,
            samples_per_cell: default_samples(),
            dump_trials: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..MAX_SPLINE_DEGREE).contains(&self.r) {
            return Err(Error::invalid(format!(
                "r must be in 1..={}, got {}",
                MAX_SPLINE_DEGREE - 1,
                self.r
            )));
        }
        if !(1..=MAX_ORDER).contains(&self.k) {
            return Err(Error::invalid(format!(
                "k must be in 1..={MAX_ORDER}, got {}",
                self.k
            )));
        }
        if self.grid_lo > self.grid_hi || self.grid_hi > MAX_GRID_EXPONENT {
            return Err(Error::invalid(format!(
                "cost grid {}:{} must satisfy LO <= HI <= {MAX_GRID_EXPONENT}",
                self.grid_lo, self.grid_hi
            )));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.mode == SolverMode::Randomized && self.samples_per_cell < 1 {
            return Err(Error::invalid(
                "randomized mode needs at least one sample per cell",
            ));
        }
        Ok(())
    }

    /// Deterministic runs are repeated once: every trial would be identical.
    pub fn effective_trials(&self) -> usize {
        match self.mode {
            SolverMode::Deterministic => 1,
            SolverMode::Randomized => self.trials,
        }
    }

    pub fn solver_config(&self, cells: usize, seed: u64) -> SolverConfig {
        match self.mode {
            SolverMode::Deterministic => SolverConfig::deterministic(cells, self.r - 1),
            SolverMode::Randomized => {
                SolverConfig::randomized(cells, self.r - 1, self.samples_per_cell, seed)
            }
        }
    }

    /// Theoretical decay exponent in the cost.
    pub fn expected_exponent(&self) -> f64 {
        match self.mode {
            SolverMode::Deterministic => self.r as f64,
            SolverMode::Randomized => self.r as f64 + 0.5,
        }
    }

    pub fn fit_column(&self) -> ErrorColumn {
        match self.mode {
            SolverMode::Deterministic => ErrorColumn::Max,
            SolverMode::Randomized => ErrorColumn::Rms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub target_cost: u64,
    /// Evaluations actually spent per solve.
    pub cost: u64,
    pub cells: usize,
    pub error_mean: f64,
    pub error_rms: f64,
    pub error_max: f64,
    pub trials: usize,
}

/// A cost target that could not be run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRow {
    pub target_cost: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedRow>,
    /// Absolute endpoint errors per row and trial, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_trial: Option<Vec<Vec<f64>>>,
}

impl ConvergenceTable {
    pub fn from_rows(rows: Vec<ConvergenceRow>) -> Self {
        Self {
            rows,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub table: ConvergenceTable,
    pub column: ErrorColumn,
    pub fit: Option<RateFit>,
    pub expected_exponent: f64,
    pub band: f64,
    pub passed: bool,
}

/// The test right-hand side for `cells` solver cells: one bump of the class
/// on every cell, all with weight one, so each cell carries a worst-case
/// residual. Returns it with its exact k-fold integral over the interval.
pub fn rate_test_rhs(
    class: &SmoothnessClass,
    cells: usize,
    k: usize,
) -> Result<(PureTimeRhs, f64)> {
    let family = build_bump_family(class, cells)?;
    let all: Vec<(usize, f64)> = (0..cells).map(|i| (i, 1.0)).collect();
    let poly = family.assemble(&all)?;
    let truth = family.all_kfold_integrals(k)?.iter().sum();
    Ok((PureTimeRhs::from_piecewise(poly, class.clone()), truth))
}

/// Runs `trials` seeded solves per cost target on the unit class over
/// `[0, 1]` and tabulates endpoint errors.
pub fn run_rate_experiment(spec: &RateSpec) -> Result<ConvergenceTable> {
    spec.validate()?;
    let class = SmoothnessClass::unit(spec.r, 0.0, 1.0)?;
    let per_cell = spec.solver_config(1, 0).cost_per_cell() as u64;
    let trials = spec.effective_trials();
    let mut table = ConvergenceTable::default();
    let mut dump = Vec::new();
    let mut last_cells = 0;
    for e in spec.grid_lo..=spec.grid_hi {
        let target = 1u64 << e;
        let cells = (target / per_cell) as usize;
        if cells < 1 {
            table.skipped.push(SkippedRow {
                target_cost: target,
                reason: format!("budget below the {per_cell} evaluations of one cell"),
            });
            continue;
        }
        if cells == last_cells {
            table.skipped.push(SkippedRow {
                target_cost: target,
                reason: format!("same cell count ({cells}) as the previous row"),
            });
            continue;
        }
        last_cells = cells;
        let (rhs, truth) = rate_test_rhs(&class, cells, spec.k)?;
        let outcomes: Vec<(f64, u64)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let config = spec.solver_config(cells, spec.seed ^ t as u64);
                let res = match spec.mode {
                    SolverMode::Deterministic => deterministic_kfold_solver(&rhs, spec.k, &config),
                    SolverMode::Randomized => randomized_cv_solver(&rhs, spec.k, &config),
                }
                .map_err(|source| Error::Trial {
                    trial: t,
                    source: Box::new(source),
                })?;
                Ok(((res.endpoint_value - truth).abs(), res.cost))
            })
            .collect::<Result<_>>()?;
        let cost = outcomes[0].1;
        if outcomes.iter().any(|o| o.1 != cost) || cost != cells as u64 * per_cell {
            return Err(Error::invalid(format!(
                "inconsistent solver cost at {cells} cells"
            )));
        }
        let errors: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
        let n = errors.len() as f64;
        table.rows.push(ConvergenceRow {
            target_cost: target,
            cost,
            cells,
            error_mean: errors.iter().sum::<f64>() / n,
            error_rms: (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
            error_max: errors.iter().copied().fold(0.0, f64::max),
            trials,
        });
        dump.push(errors);
    }
    if spec.dump_trials {
        table.per_trial = Some(dump);
    }
    Ok(table)
}

/// Rate experiment plus fit and the band check around the theoretical exponent.
pub(crate) fn run_rate_report(spec: &RateSpec, tol: &Tolerances) -> Result<RateReport> {
    let table = run_rate_experiment(spec)?;
    let column = spec.fit_column();
    let fit = match fit_rate(&table, column) {
        Ok(fit) => Some(fit),
        Err(Error::TooFewRows { .. }) => None,
        Err(e) => return Err(e),
    };
    let expected = spec.expected_exponent();
    let passed = fit
        .as_ref()
        .is_some_and(|f| (f.exponent - expected).abs() <= tol.rate_band);
    Ok(RateReport {
        table,
        column,
        fit,
        expected_exponent: expected,
        band: tol.rate_band,
        passed,
    })
}
