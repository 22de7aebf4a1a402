use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{Experiment, ExperimentSpec, Fault, Tolerances};
use crate::bspline::{
    build_bump_family, build_perfect_bspline, phi_r_m, scaling_alpha, sign_pattern, BumpFamily,
    PerfectBSpline, ScaledBump, SignPattern, MAX_SPLINE_DEGREE,
};
use crate::error::{Error, Result};
use crate::model::SmoothnessClass;
use crate::quadrature::KfoldOracle;
use crate::reduction::{
    build_reduction_plan, exact_integrals, recover_mean, telescoped_sum, verify_weight_identities,
    MeanInstance, ReductionPlan, MAX_ORDER,
};

/// Quadrature tolerance for the oracle comparisons.
const ORACLE_TOL: f64 = 1e-13;
/// Relative slack on `sup |phi^(j)| <= D_j`.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySplineSpec {
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

impl VerifySplineSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..MAX_SPLINE_DEGREE).contains(&self.r) {
            return Err(Error::invalid(format!(
                "r must be in 1..={}, got {}",
                MAX_SPLINE_DEGREE - 1,
                self.r
            )));
        }
        if self.fault == Some(Fault::Weights) {
            return Err(Error::invalid(
                "the weights fault applies to verify-reduction only",
            ));
        }
        Ok(())
    }
}

fn default_instances() -> usize {
    100
}

fn default_r() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReductionSpec {
    pub k: usize,
    pub n: usize,
    #[serde(default = "default_r")]
    pub r: usize,
    /// Random mean instances for the exact roundtrip.
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

impl VerifyReductionSpec {
    pub fn new(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            r: 1,
            instances: default_instances(),
            seed: 0,
            fault: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ORDER).contains(&self.k) {
            return Err(Error::invalid(format!(
                "k must be in 1..={MAX_ORDER}, got {}",
                self.k
            )));
        }
        if self.n < 1 {
            return Err(Error::invalid(format!(
                "n must be at least 1, got {}",
                self.n
            )));
        }
        if !(1..MAX_SPLINE_DEGREE).contains(&self.r) {
            return Err(Error::invalid(format!(
                "r must be in 1..={}, got {}",
                MAX_SPLINE_DEGREE - 1,
                self.r
            )));
        }
        if self.instances < 1 {
            return Err(Error::invalid("at least one roundtrip instance is needed"));
        }
        if self.fault == Some(Fault::SignPattern) {
            return Err(Error::invalid(
                "the sign-pattern fault applies to verify-spline only",
            ));
        }
        Ok(())
    }
}

/// One checked quantity: passes iff `value <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub rows: Vec<ResidualRow>,
    pub passed: bool,
}

impl VerificationReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.to_string(),
            rows: Vec::new(),
            passed: true,
        }
    }

    fn push(&mut self, check: impl Into<String>, value: f64, tolerance: f64) {
        // NaN fails.
        let passed = value <= tolerance;
        self.passed &= passed;
        self.rows.push(ResidualRow {
            check: check.into(),
            value,
            tolerance,
            passed,
        });
    }

    /// Largest `value / tolerance` over all rows.
    pub fn worst_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.value / r.tolerance)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResidualRow> {
        self.rows.iter().filter(|r| !r.passed)
    }
}

/// Dispatches to the spline or reduction suite.
pub fn run_verification_suite(spec: &ExperimentSpec) -> Result<VerificationReport> {
    spec.validate()?;
    let tol = spec.tolerance_profile.tolerances();
    match &spec.experiment {
        Experiment::VerifySpline(s) => verify_spline(s, &tol),
        Experiment::VerifyReduction(s) => verify_reduction(s, &tol),
        _ => Err(Error::invalid(
            "verification suite needs a verify-spline or verify-reduction spec",
        )),
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

fn pattern_for(spec: &VerifySplineSpec) -> Result<SignPattern> {
    let pattern = sign_pattern(spec.r)?;
    match spec.fault {
        Some(Fault::SignPattern) => {
            let knots = pattern.knots().iter().map(|t| 0.9 * t).collect();
            SignPattern::from_knots(knots, pattern.rightmost_sign())
        }
        _ => Ok(pattern),
    }
}

/// Classes on which bumps are generated: unit bounds on `[0, 1]` and growing
/// bounds `D_j = 2^j` on `[-1, 2]`.
fn spline_classes(r: usize) -> Result<Vec<SmoothnessClass>> {
    let growing = (0..=r).map(|j| 2f64.powi(j as i32)).collect();
    Ok(vec![
        SmoothnessClass::unit(r, 0.0, 1.0)?,
        SmoothnessClass::new(r, growing, (-1.0, 2.0))?,
    ])
}

/// Sign-pattern orthogonality, spline endpoint behaviour, bump class
/// membership and vanishing endpoint derivatives, the iterated-integral
/// constants against quadrature, and the closed-form bump-family integrals.
pub fn verify_spline(spec: &VerifySplineSpec, tol: &Tolerances) -> Result<VerificationReport> {
    spec.validate()?;
    let r = spec.r;
    let mut report = VerificationReport::new("verify-spline");
    let pattern = pattern_for(spec)?;
    for p in 0..=r {
        report.push(
            format!("orthogonality p={p}"),
            pattern.moment(p).abs(),
            tol.orthogonality,
        );
    }
    let psi = PerfectBSpline::from_sign_pattern(pattern)?;
    let right = psi
        .right_endpoint_derivatives()
        .iter()
        .chain(&psi.left_endpoint_derivatives())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    report.push("psi endpoint derivatives", right, tol.endpoint);
    let highest = psi.body().nth_derivative(r + 1);
    let sign_defect = psi
        .pattern()
        .intervals()
        .iter()
        .map(|&(lo, hi, s)| (highest.eval(0.5 * (lo + hi)) - s).abs())
        .fold(0.0, f64::max);
    report.push("psi top derivative is the sign pattern", sign_defect, 1e-9);

    if r == 1 && spec.fault.is_none() {
        let psi1 = build_perfect_bspline(1)?;
        let defect = (0..=200)
            .map(|i| {
                let x = -1.0 + i as f64 / 100.0;
                (psi1.eval(x) - (x.abs() - 1.0)).abs()
            })
            .fold(0.0, f64::max);
        report.push("psi_1 = |x| - 1", defect, 1e-14);
    }

    for class in spline_classes(r)? {
        let alpha = scaling_alpha(&psi, &class)?;
        let (a, b) = class.interval();
        let intervals = [
            (a, a + 0.999 * (b - a).min(2.0)),
            (a + 0.25, a + 0.375),
            (0.3, 0.31),
        ];
        for (c, d) in intervals {
            let bump = ScaledBump::from_spline(&psi, c, d, alpha)?;
            let label = format!("bump [{c}, {d}] D={:?}", class.derivative_bounds());
            report.push(
                format!("{label} endpoint derivatives"),
                bump.endpoint_residual(&class),
                tol.endpoint,
            );
            let worst = (0..=r)
                .map(|j| bump.body().nth_derivative(j).sup_abs() / class.derivative_bounds()[j])
                .fold(0.0, f64::max);
            report.push(
                format!("{label} sup|phi^(j)|/D_j"),
                worst,
                1.0 + BOUND_SLACK,
            );
        }
    }

    // Iterated-integral constants on [0, 1] under unit bounds.
    let unit = SmoothnessClass::unit(r, 0.0, 1.0)?;
    let alpha = scaling_alpha(&psi, &unit)?;
    let bump = ScaledBump::from_spline(&psi, 0.0, 1.0, alpha)?;
    let oracle = KfoldOracle::new(ORACLE_TOL).breakpoints(bump.body().breakpoints());
    for m in 1..=3 {
        let closed = phi_r_m(r, m, alpha)?.value;
        let quad = oracle.integrate(|x| bump.eval(x), 0.0, 1.0, m)?;
        report.push(
            format!("phi_{r}^{m} closed form vs quadrature"),
            rel_err(closed, quad),
            tol.constants_rel,
        );
    }
    if r == 1 {
        let closed = phi_r_m(1, 1, alpha)?.value;
        report.push("phi_1^1 = alpha/16", rel_err(closed, alpha / 16.0), 1e-14);
    }

    if spec.fault.is_none() {
        for n in [2, 4] {
            let family = build_bump_family(&unit, n)?;
            for k in 1..=3 {
                report.push(
                    format!("bump family n={n} k={k} closed form vs quadrature"),
                    family_integral_residual(&family, k)?,
                    tol.family_integrals_rel,
                );
            }
        }
    }
    Ok(report)
}

/// Largest relative gap between the closed-form k-fold integrals of the
/// family and kernel quadrature.
pub(crate) fn family_integral_residual(family: &BumpFamily, k: usize) -> Result<f64> {
    let (a, b) = family.class().interval();
    let mut breaks: Vec<f64> = Vec::new();
    for i in 0..family.n() {
        breaks.extend_from_slice(family.bump(i).body().breakpoints());
    }
    let oracle = KfoldOracle::new(ORACLE_TOL).breakpoints(&breaks);
    let closed = family.all_kfold_integrals(k)?;
    let mut worst: f64 = 0.0;
    for (i, want) in closed.iter().enumerate() {
        let quad = oracle.integrate(|x| family.eval(i, x), a, b, k)?;
        worst = worst.max(rel_err(*want, quad));
    }
    Ok(worst)
}

fn plan_for(spec: &VerifyReductionSpec) -> Result<ReductionPlan> {
    let class = SmoothnessClass::unit(spec.r, 0.0, 1.0)?;
    let plan = build_reduction_plan(spec.k, spec.n, &class)?;
    match spec.fault {
        Some(Fault::Weights) => {
            let mut c = plan.weights().weights.clone();
            c[0] += 1e-3 * plan.weights().abs_sum();
            plan.with_weights(c)
        }
        _ => Ok(plan),
    }
}

/// Weight identities, closed-form weight fixtures, the collapse identity and
/// the exact mean-recovery roundtrip over random instances.
pub fn verify_reduction(
    spec: &VerifyReductionSpec,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    spec.validate()?;
    let mut report = VerificationReport::new("verify-reduction");
    let plan = plan_for(spec)?;
    let ids = verify_weight_identities(&plan);
    report.push(
        "weights: sum c_j w_j^(k-1) = 1",
        ids.max_sum_one_residual / ids.scale,
        tol.weights_rel,
    );
    report.push(
        "weights: sum c_j w_j^(k-m) = 0",
        ids.max_sum_zero_residual / ids.scale,
        tol.weights_rel,
    );

    let fixture: Option<&[f64]> = match spec.k {
        1 => Some(&[1.0]),
        2 => Some(&[-4.0, 4.0]),
        _ => None,
    };
    if let Some(want) = fixture {
        let gap = plan
            .weights()
            .weights
            .iter()
            .zip(want)
            .map(|(c, w)| (c - w).abs())
            .fold(0.0, f64::max);
        report.push(format!("weights fixture k={}", spec.k), gap, 1e-12);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = plan.shift().count();
    let mut worst_roundtrip: f64 = 0.0;
    let mut worst_collapse: f64 = 0.0;
    for _ in 0..spec.instances {
        let lambdas: Vec<f64> = (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let inst = MeanInstance::new(lambdas)?;
        let exact = exact_integrals(plan.shift(), &inst)?;
        let recovered = recover_mean(&plan, &exact, 0.0)?;
        let scale = inst.mean().abs().max(inst.abs_mean());
        worst_roundtrip = worst_roundtrip.max((recovered.estimate - inst.mean()).abs() / scale);
        let combined: f64 = plan
            .weights()
            .weights
            .iter()
            .zip(&exact)
            .map(|(c, i)| c * i)
            .sum();
        let collapsed = telescoped_sum(plan.shift(), &inst)?;
        let collapse_scale =
            telescoped_sum(plan.shift(), &MeanInstance::new(vec![1.0; count])?)?.abs() * scale;
        worst_collapse = worst_collapse.max((combined - collapsed).abs() / collapse_scale);
    }
    report.push(
        "collapse identity (relative)",
        worst_collapse,
        tol.roundtrip_rel,
    );
    report.push(
        "mean roundtrip with exact integrals (relative)",
        worst_roundtrip,
        tol.roundtrip_rel,
    );
    Ok(report)
}
