//! Verification suites, convergence experiments, the adversary pipeline and
//! report emission. Every run is a pure function of its [`ExperimentSpec`].

mod adversary;
mod bounds;
mod emit;
mod fit;
mod rates;
mod spec;
mod verify;

pub use adversary::{run_adversary_pipeline, AdversaryReport, AdversarySpec, AdversaryTrial};
pub use bounds::{run_bounds_calc, BoundsReport, BoundsSpec};
pub use emit::{emit, emit_string, Emit, OutputFormat, SCHEMA_VERSION};
pub use fit::{fit_rate, ErrorColumn, RateFit, FIT_FLOOR};
pub use rates::{
    rate_test_rhs, run_rate_experiment, ConvergenceRow, ConvergenceTable, RateReport, RateSpec,
    SkippedRow,
};
pub use spec::{load_spec, Experiment, ExperimentSpec, Fault, ToleranceProfile, Tolerances};
pub use verify::{
    run_verification_suite, verify_reduction, verify_spline, ResidualRow, VerificationReport,
    VerifyReductionSpec, VerifySplineSpec,
};

use serde::Serialize;

use crate::error::Result;

/// Output of any experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "result", rename_all = "kebab-case")]
pub enum Outcome {
    Verification(VerificationReport),
    Rates(RateReport),
    Adversary(AdversaryReport),
    Bounds(BoundsReport),
}

impl Outcome {
    /// False when some checked invariant or tolerance failed.
    pub fn passed(&self) -> bool {
        match self {
            Outcome::Verification(r) => r.passed,
            Outcome::Rates(r) => r.passed,
            Outcome::Adversary(r) => r.passed,
            Outcome::Bounds(_) => true,
        }
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        match self {
            Outcome::Verification(r) => {
                let failed = r.rows.iter().filter(|row| !row.passed).count();
                format!("{}: {} checks, {} failed", r.suite, r.rows.len(), failed)
            }
            Outcome::Rates(r) => match &r.fit {
                Some(fit) => format!(
                    "rates: exponent {:.4} (expected {} +/- {}), residual {:.3e}",
                    fit.exponent, r.expected_exponent, r.band, fit.residual
                ),
                None => format!("rates: no fit ({} usable rows)", r.table.rows.len()),
            },
            Outcome::Adversary(r) => format!(
                "adversary: observed rms {:.3e}, eps1 {:.3e}, ratio {}, lower bound {}",
                r.observed_rms,
                r.eps1,
                r.ratio.map_or("n/a".to_string(), |v| format!("{v:.4}")),
                r.lower_bound.map_or("n/a".to_string(), |v| v.to_string()),
            ),
            Outcome::Bounds(r) => format!("bounds-calc: {} = {}", r.formula, r.queries),
        }
    }
}

/// Runs any experiment.
pub fn run(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    let tol = spec.tolerance_profile.tolerances();
    Ok(match &spec.experiment {
        Experiment::VerifySpline(s) => Outcome::Verification(verify_spline(s, &tol)?),
        Experiment::VerifyReduction(s) => Outcome::Verification(verify_reduction(s, &tol)?),
        Experiment::Rates(s) => Outcome::Rates(rates::run_rate_report(s, &tol)?),
        Experiment::Adversary(s) => Outcome::Adversary(run_adversary_pipeline(s, &tol)?),
        Experiment::BoundsCalc(s) => Outcome::Bounds(run_bounds_calc(s)?),
    })
}
