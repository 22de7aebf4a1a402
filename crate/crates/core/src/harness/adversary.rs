use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::Tolerances;
use crate::bspline::MAX_SPLINE_DEGREE;
use crate::error::{Error, Result};
use crate::model::SmoothnessClass;
use crate::reduction::{
    assemble_adversarial_rhs, build_reduction_plan, exact_integrals, lower_bound_queries,
    median_amplify, recover_mean, MeanInstance, ReductionPlan, Setting, MAX_ORDER,
};
use crate::solvers::{randomized_cv_solver, SolverConfig};

fn default_samples() -> usize {
    4
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub setting: Setting,
    pub k: usize,
    pub r: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples_per_cell: usize,
    /// Independent solves per integral; their median is used.
    #[serde(default = "one")]
    pub repeats: usize,
    /// Replace the solver by the exact closed-form integrals.
    #[serde(default)]
    pub oracle: bool,
}

impl AdversarySpec {
    pub fn new(setting: Setting, k: usize, r: usize, n: usize, trials: usize, seed: u64) -> Self {
        Self {
            setting,
            k,
            r,
            n,
            trials,
            seed,
            samples_per_cell: default_samples(),
            repeats: 1,
            oracle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ORDER).contains(&self.k) {
            return Err(Error::invalid(format!(
                "k must be in 1..={MAX_ORDER}, got {}",
                self.k
            )));
        }
        if !(1..MAX_SPLINE_DEGREE).contains(&self.r) {
            return Err(Error::invalid(format!(
                "r must be in 1..={}, got {}",
                MAX_SPLINE_DEGREE - 1,
                self.r
            )));
        }
        if self.n < 1 {
            return Err(Error::invalid(format!(
                "n must be at least 1, got {}",
                self.n
            )));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.samples_per_cell < 1 || self.repeats < 1 {
            return Err(Error::invalid(
                "samples per cell and repeats must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryTrial {
    pub trial: usize,
    pub mean: f64,
    pub estimate: f64,
    pub abs_error: f64,
    /// `A_j - I_j` for each shifted problem.
    pub integral_errors: Vec<f64>,
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub setting: Setting,
    /// "randomized" or "quantum (analysis only)".
    pub bound_label: String,
    pub count: u64,
    pub cells: usize,
    /// Largest per-integral RMS error over the k shifted problems.
    pub epsilon: f64,
    /// `epsilon` times the amplification `(kn)^r C sum |c_j|`.
    pub eps1: f64,
    pub amplification: f64,
    pub observed_rms: f64,
    pub observed_max: f64,
    /// `observed_rms / eps1`; absent in oracle mode.
    pub ratio: Option<f64>,
    /// Query lower bound at the achieved `eps1`; absent when `eps1 = 0`.
    pub lower_bound: Option<u64>,
    pub cost_per_trial: u64,
    pub passed: bool,
    pub trials: Vec<AdversaryTrial>,
}

fn run_trial(spec: &AdversarySpec, plan: &ReductionPlan, t: usize) -> Result<AdversaryTrial> {
    let shift = plan.shift();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ t as u64);
    let lambdas: Vec<f64> = (0..shift.count())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let inst = MeanInstance::new(lambdas)?;
    let exact = exact_integrals(shift, &inst)?;
    let mut approx = Vec::with_capacity(spec.k);
    let mut cost = 0;
    for (j, truth) in exact.iter().enumerate() {
        if spec.oracle {
            approx.push(*truth);
            continue;
        }
        let rhs = assemble_adversarial_rhs(shift, &inst, j)?;
        let mut runs = Vec::with_capacity(spec.repeats);
        for _ in 0..spec.repeats {
            let config = SolverConfig::randomized(
                shift.cells(),
                spec.r - 1,
                spec.samples_per_cell,
                rng.random(),
            );
            let res = randomized_cv_solver(&rhs, spec.k, &config)?;
            cost += res.cost;
            runs.push(res.endpoint_value);
        }
        approx.push(median_amplify(&runs)?);
    }
    let recovered = recover_mean(plan, &approx, 0.0)?;
    Ok(AdversaryTrial {
        trial: t,
        mean: inst.mean(),
        estimate: recovered.estimate,
        abs_error: (recovered.estimate - inst.mean()).abs(),
        integral_errors: approx.iter().zip(&exact).map(|(a, i)| a - i).collect(),
        cost,
    })
}

/// Draws `lambda_i` in `{-1, 1}`, solves the k shifted problems, recovers the
/// mean and compares the observed mean error with the amplified
/// per-integral error.
pub fn run_adversary_pipeline(spec: &AdversarySpec, tol: &Tolerances) -> Result<AdversaryReport> {
    spec.validate()?;
    let class = SmoothnessClass::unit(spec.r, 0.0, 1.0)?;
    let plan = build_reduction_plan(spec.k, spec.n, &class)?;
    let trials: Vec<AdversaryTrial> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(spec, &plan, t).map_err(|source| Error::Trial {
                trial: t,
                source: Box::new(source),
            })
        })
        .collect::<Result<_>>()?;
    let m = trials.len() as f64;
    let epsilon = (0..spec.k)
        .map(|j| {
            (trials
                .iter()
                .map(|t| t.integral_errors[j].powi(2))
                .sum::<f64>()
                / m)
                .sqrt()
        })
        .fold(0.0, f64::max);
    let amplification = plan.amplification();
    let eps1 = amplification * epsilon;
    let observed_rms = (trials.iter().map(|t| t.abs_error.powi(2)).sum::<f64>() / m).sqrt();
    let observed_max = trials.iter().map(|t| t.abs_error).fold(0.0, f64::max);
    let count = plan.shift().count() as u64;
    let (ratio, lower_bound) = if eps1 > 0.0 {
        (
            Some(observed_rms / eps1),
            Some(lower_bound_queries(spec.setting, count, eps1)?),
        )
    } else {
        (None, None)
    };
    let passed = if spec.oracle {
        observed_max <= tol.oracle_abs
    } else {
        ratio.is_some_and(|q| q <= tol.adversary_ratio)
    };
    let bound_label = match spec.setting {
        Setting::Randomized => "randomized: min{kn, ceil((1/eps1)^2)}",
        Setting::Quantum => "quantum (analysis only): min{kn, ceil(1/eps1)}",
    };
    Ok(AdversaryReport {
        setting: spec.setting,
        bound_label: bound_label.to_string(),
        count,
        cells: plan.shift().cells(),
        epsilon,
        eps1,
        amplification,
        observed_rms,
        observed_max,
        ratio,
        lower_bound,
        cost_per_trial: trials[0].cost,
        passed,
        trials,
    })
}
