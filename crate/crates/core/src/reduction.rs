//! Reduction from mean estimation to k-fold integration.
//!
//! Split `[a, b]` into `2kn` cells of width `hbar = (b - a)/(2kn)` carrying
//! bumps `f_0, ..., f_{2kn-1}`. For a vector `lambda` of `kn` numbers in
//! `[-1, 1]` and each shift `X_j(i) = n(k - j) + i - 1`, the right-hand side
//! `g_j = sum_i lambda_i f_{X_j(i)}` stays in `G^r_1`. Weights `c_j` chosen so
//! that `w(x) = sum_j c_j (1/2 + j/(2k) - x)^{k-1}` is identically one make
//! the combination `sum_j c_j I_j` of the k-fold integrals `I_j` collapse to a
//! multiple of the mean of `lambda`. Any integrator with error `eps` therefore
//! yields a mean estimator with error `eps_1 = (kn)^r C sum_j |c_j| eps`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bspline::{build_bump_family, BumpFamily};
use crate::error::{Error, Result};
use crate::model::{PureTimeRhs, SmoothnessClass};
use crate::poly::{binomial, factorial};

/// Largest supported problem order for the weight system.
pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "rand")]
    Randomized,
    #[serde(rename = "quant")]
    Quantum,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Randomized => "rand",
            Setting::Quantum => "quant",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rand" | "randomized" => Ok(Setting::Randomized),
            "quant" | "quantum" => Ok(Setting::Quantum),
            other => Err(Error::invalid(format!(
                "unknown setting {other:?} (expected rand or quant)"
            ))),
        }
    }
}

/// The `2kn`-cell partition and the shift mappings `X_j`.
#[derive(Debug, Clone)]
pub struct ShiftPlan {
    k: usize,
    n: usize,
    family: BumpFamily,
}

pub fn build_shift_plan(k: usize, n: usize, class: &SmoothnessClass) -> Result<ShiftPlan> {
    if k < 1 || n < 1 {
        return Err(Error::invalid(format!(
            "shift plan needs k >= 1 and n >= 1, got k = {k}, n = {n}"
        )));
    }
    if k > MAX_ORDER {
        return Err(Error::invalid(format!(
            "order k = {k} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    let cells = 2 * k * n;
    let mesh = class.length() / cells as f64;
    if mesh >= 2.0 {
        return Err(Error::invalid(format!(
            "mesh (b - a)/(2kn) = {mesh} must be below 2 (k = {k}, n = {n})"
        )));
    }
    Ok(ShiftPlan {
        k,
        n,
        family: build_bump_family(class, cells)?,
    })
}

impl ShiftPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of means `kn`.
    pub fn count(&self) -> usize {
        self.k * self.n
    }

    pub fn cells(&self) -> usize {
        2 * self.k * self.n
    }

    pub fn mesh(&self) -> f64 {
        self.family.h()
    }

    pub fn family(&self) -> &BumpFamily {
        &self.family
    }

    pub fn class(&self) -> &SmoothnessClass {
        self.family.class()
    }

    /// `X_j(i) = n(k - j) + i - 1`.
    pub fn mapping(&self, j: usize, i: usize) -> usize {
        self.n * (self.k - j) + i - 1
    }

    pub fn image(&self, j: usize) -> Vec<usize> {
        (0..self.count()).map(|i| self.mapping(j, i)).collect()
    }
}

/// Weights `c_j` with `sum_j c_j (1/2 + j/(2k) - x)^{k-1} = 1` for all `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub k: usize,
    pub weights: Vec<f64>,
    /// 1-norm condition number of the coefficient-matching matrix.
    pub condition_estimate: f64,
}

impl WeightVector {
    /// `w(x) = sum_j c_j (1/2 + j/(2k) - x)^{k-1}`.
    pub fn w(&self, x: f64) -> f64 {
        let k = self.k;
        self.weights
            .iter()
            .enumerate()
            .map(|(j, c)| c * node(j, k, x).powi(k as i32 - 1))
            .sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.weights.iter().map(|c| c.abs()).sum()
    }
}

fn node(j: usize, k: usize, x: f64) -> f64 {
    0.5 + j as f64 / (2 * k) as f64 - x
}

/// Solves the transposed-Vandermonde system from matching the coefficients
/// of `x^0, ..., x^{k-1}` in `w(x)` against `(1, 0, ..., 0)`.
pub fn solve_weights(k: usize) -> Result<WeightVector> {
    if !(1..=MAX_ORDER).contains(&k) {
        return Err(Error::invalid(format!(
            "weight order k must be in 1..={MAX_ORDER}, got {k}"
        )));
    }
    // Coefficient of x^p in (beta_j - x)^{k-1}.
    let matrix: Vec<Vec<f64>> = (0..k)
        .map(|p| {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            (0..k)
                .map(|j| sign * binomial(k - 1, p) * node(j, k, 0.0).powi((k - 1 - p) as i32))
                .collect()
        })
        .collect();
    let lu = Lu::factor(matrix)?;
    let mut rhs = vec![0.0; k];
    rhs[0] = 1.0;
    let weights = lu.solve(&rhs);
    Ok(WeightVector {
        k,
        weights,
        condition_estimate: lu.condition_1(),
    })
}

/// Dense LU factorization with partial pivoting for the small weight system.
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
    norm_1: f64,
}

impl Lu {
    fn factor(mut a: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        let norm_1 = (0..n)
            .map(|j| (0..n).map(|i| a[i][j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .expect("nonempty pivot range");
            let pivot = a[pivot_row][col];
            if pivot.abs() <= f64::EPSILON * norm_1 {
                return Err(Error::Singular { column: col, pivot });
            }
            a.swap(col, pivot_row);
            perm.swap(col, pivot_row);
            let (upper, lower) = a.split_at_mut(col + 1);
            let pivot_row = &upper[col];
            for row in lower.iter_mut() {
                let factor = row[col] / pivot_row[col];
                row[col] = factor;
                for (x, p) in row[col + 1..].iter_mut().zip(&pivot_row[col + 1..]) {
                    *x -= factor * p;
                }
            }
        }
        Ok(Self {
            lu: a,
            perm,
            norm_1,
        })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i][j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[i][j] * y[j];
            }
            y[i] /= self.lu[i][i];
        }
        y
    }

    fn condition_1(&self) -> f64 {
        let n = self.lu.len();
        let mut inv_norm: f64 = 0.0;
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            inv_norm = inv_norm.max(self.solve(&e).iter().map(|v| v.abs()).sum());
        }
        self.norm_1 * inv_norm
    }
}

/// Shift plan, weights and the normalising constant
/// `C = (b - a)^{-(k+r)} 2^{r+1} (k-1)! / phi_r^1`.
#[derive(Debug, Clone)]
pub struct ReductionPlan {
    shift: ShiftPlan,
    weights: WeightVector,
    constant: f64,
}

pub fn build_reduction_plan(k: usize, n: usize, class: &SmoothnessClass) -> Result<ReductionPlan> {
    let shift = build_shift_plan(k, n, class)?;
    let weights = solve_weights(k)?;
    ReductionPlan::new(shift, weights)
}

impl ReductionPlan {
    pub fn new(shift: ShiftPlan, weights: WeightVector) -> Result<Self> {
        if weights.k != shift.k || weights.weights.len() != shift.k {
            return Err(Error::invalid(format!(
                "weights for k = {} do not match the shift plan with k = {}",
                weights.k, shift.k
            )));
        }
        let class = shift.class();
        let (k, r) = (shift.k, class.r());
        let phi1 = shift.family.iterated_constants(1)[0];
        let constant =
            class.length().powi(-((k + r) as i32)) * 2f64.powi(r as i32 + 1) * factorial(k - 1)
                / phi1;
        Ok(Self {
            shift,
            weights,
            constant,
        })
    }

    /// Replaces the weights, keeping everything else. Used for fixtures.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let mut w = self.weights.clone();
        if weights.len() != w.weights.len() {
            return Err(Error::invalid("replacement weights have the wrong length"));
        }
        w.weights = weights;
        Self::new(self.shift.clone(), w)
    }

    pub fn shift(&self) -> &ShiftPlan {
        &self.shift
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn class(&self) -> &SmoothnessClass {
        self.shift.class()
    }

    /// `(kn)^r C`.
    pub fn scale(&self) -> f64 {
        (self.shift.count() as f64).powi(self.class().r() as i32) * self.constant
    }

    /// `(kn)^r |C| sum_j |c_j|`, the factor turning integral error into mean
    /// error. `C` takes the sign of `phi_r^1`, which alternates with `r`.
    pub fn amplification(&self) -> f64 {
        self.scale().abs() * self.weights.abs_sum()
    }
}

/// `kn` numbers with `|lambda_i| <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanInstance {
    lambdas: Vec<f64>,
}

impl MeanInstance {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if let Some((i, l)) = lambdas.iter().enumerate().find(|(_, l)| !(l.abs() <= 1.0)) {
            return Err(Error::invalid(format!(
                "|lambda_{i}| = {} exceeds 1",
                l.abs()
            )));
        }
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn mean(&self) -> f64 {
        self.lambdas.iter().sum::<f64>() / self.lambdas.len() as f64
    }

    /// `mean |lambda_i|`, the natural size of the mean.
    pub fn abs_mean(&self) -> f64 {
        self.lambdas.iter().map(|l| l.abs()).sum::<f64>() / self.lambdas.len() as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lambdas: self.lambdas.iter().map(|l| l * factor).collect(),
        }
    }

    fn check_len(&self, plan: &ShiftPlan) -> Result<()> {
        if self.lambdas.len() != plan.count() {
            return Err(Error::invalid(format!(
                "instance has {} values but the plan needs kn = {}",
                self.lambdas.len(),
                plan.count()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveredMean {
    pub estimate: f64,
    pub epsilon_in: f64,
    /// `eps_1 = (kn)^r C sum_j |c_j| eps_in`.
    pub epsilon_out: f64,
}

/// Residuals of the identities `sum_j c_j (1 - (X_j(i)+1)/(2kn))^{k-1} = 1`
/// and `sum_j c_j (1 - (X_j(i)+1)/(2kn))^{k-m} = 0` for `m = 2..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightResidualReport {
    pub k: usize,
    pub n: usize,
    pub max_sum_one_residual: f64,
    pub max_sum_zero_residual: f64,
    /// `sum_j |c_j|`.
    pub scale: f64,
}

impl WeightResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.max_sum_one_residual.max(self.max_sum_zero_residual)
    }

    pub fn relative(&self) -> f64 {
        self.max_residual() / self.scale
    }
}

pub fn verify_weight_identities(plan: &ReductionPlan) -> WeightResidualReport {
    let shift = &plan.shift;
    let (k, n) = (shift.k, shift.n);
    let cells = shift.cells() as f64;
    let c = &plan.weights.weights;
    let mut one: f64 = 0.0;
    let mut zero: f64 = 0.0;
    for i in 0..shift.count() {
        let bases: Vec<f64> = (0..k)
            .map(|j| 1.0 - (shift.mapping(j, i) + 1) as f64 / cells)
            .collect();
        let sum = |power: usize| -> f64 {
            c.iter()
                .zip(&bases)
                .map(|(cj, b)| cj * b.powi(power as i32))
                .sum()
        };
        one = one.max((sum(k - 1) - 1.0).abs());
        for m in 2..=k {
            zero = zero.max(sum(k - m).abs());
        }
    }
    WeightResidualReport {
        k,
        n,
        max_sum_one_residual: one,
        max_sum_zero_residual: zero,
        scale: plan.weights.abs_sum(),
    }
}

/// `g_j = sum_i lambda_i f_{X_j(i)}` as a piecewise polynomial.
pub fn assemble_adversarial_rhs(
    plan: &ShiftPlan,
    inst: &MeanInstance,
    j: usize,
) -> Result<PureTimeRhs> {
    inst.check_len(plan)?;
    if j >= plan.k {
        return Err(Error::invalid(format!(
            "shift index j = {j} out of range 0..{}",
            plan.k
        )));
    }
    let weights: Vec<(usize, f64)> = inst
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| (plan.mapping(j, i), l))
        .collect();
    let poly = plan.family.assemble(&weights)?;
    Ok(PureTimeRhs::from_piecewise(poly, plan.class().clone()))
}

/// `I_j = sum_i lambda_i int^k f_{X_j(i)}` from the closed-form bump integrals.
pub fn exact_integrals(plan: &ShiftPlan, inst: &MeanInstance) -> Result<Vec<f64>> {
    inst.check_len(plan)?;
    let per_bump = plan.family.all_kfold_integrals(plan.k)?;
    Ok((0..plan.k)
        .map(|j| {
            inst.lambdas
                .iter()
                .enumerate()
                .map(|(i, l)| l * per_bump[plan.mapping(j, i)])
                .sum()
        })
        .collect())
}

/// Right-hand side of the collapse identity:
/// `hbar^{r+1} (b - a)^{k-1} phi_r^1 / (k-1)! sum_i lambda_i`.
pub fn telescoped_sum(plan: &ShiftPlan, inst: &MeanInstance) -> Result<f64> {
    inst.check_len(plan)?;
    let class = plan.class();
    let (k, r) = (plan.k, class.r());
    let phi1 = plan.family.iterated_constants(1)[0];
    let total: f64 = inst.lambdas.iter().sum();
    Ok(
        plan.mesh().powi(r as i32 + 1) * class.length().powi(k as i32 - 1) * phi1
            / factorial(k - 1)
            * total,
    )
}

/// Mean estimate `(kn)^r C sum_j c_j A_j` from approximations `A_j` of
/// `I_j`, each assumed accurate to `epsilon_in`.
pub fn recover_mean(
    plan: &ReductionPlan,
    approximations: &[f64],
    epsilon_in: f64,
) -> Result<RecoveredMean> {
    if approximations.len() != plan.shift.k {
        return Err(Error::invalid(format!(
            "expected {} integral approximations, got {}",
            plan.shift.k,
            approximations.len()
        )));
    }
    if !(epsilon_in >= 0.0) {
        return Err(Error::invalid(format!(
            "input error must be nonnegative, got {epsilon_in}"
        )));
    }
    let combined: f64 = plan
        .weights
        .weights
        .iter()
        .zip(approximations)
        .map(|(c, a)| c * a)
        .sum();
    Ok(RecoveredMean {
        estimate: plan.scale() * combined,
        epsilon_in,
        epsilon_out: plan.amplification() * epsilon_in,
    })
}

/// Lower median of repeated estimates.
pub fn median_amplify(estimates: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("median of an empty list"));
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[(sorted.len() - 1) / 2])
}

/// Ceiling that treats values within `1e-9` (relative) of an integer as that
/// integer, so `1 / 0.01` is 100 despite rounding.
fn snapped_ceil(v: f64) -> f64 {
    let nearest = v.round();
    if (v - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        v.ceil()
    }
}

/// Argument of the query lower bound for computing the mean of `kn` numbers
/// to accuracy `eps1`: `min{kn, ceil(1/eps1)}` (quantum) or
/// `min{kn, ceil((1/eps1)^2)}` (randomized). Constants are suppressed, so
/// the value is an order of magnitude, not a certified count.
pub fn lower_bound_queries(setting: Setting, count: u64, epsilon1: f64) -> Result<u64> {
    if count < 1 {
        return Err(Error::invalid("mean-estimation size kn must be at least 1"));
    }
    if !(epsilon1 > 0.0) {
        return Err(Error::invalid(format!(
            "eps1 must be positive, got {epsilon1}"
        )));
    }
    let inv = 1.0 / epsilon1;
    let arg = match setting {
        Setting::Quantum => inv,
        Setting::Randomized => inv * inv,
    };
    let arg = snapped_ceil(arg);
    Ok(if arg >= count as f64 {
        count
    } else {
        arg as u64
    })
}

/// `n = ceil((1/eps)^{1/(r+1)})` (quantum) or `ceil((1/eps)^{1/(r+1/2)})`
/// (randomized), raised if needed so that `(b - a)/(2kn) < 2`. Order-only,
/// with constant one.
pub fn suggest_n(
    setting: Setting,
    epsilon: f64,
    k: usize,
    class: &SmoothnessClass,
) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "eps must be positive, got {epsilon}"
        )));
    }
    if k < 1 {
        return Err(Error::invalid("order k must be at least 1"));
    }
    let r = class.r() as f64;
    let exponent = match setting {
        Setting::Quantum => 1.0 / (r + 1.0),
        Setting::Randomized => 1.0 / (r + 0.5),
    };
    let n = snapped_ceil((1.0 / epsilon).powf(exponent)).max(1.0) as usize;
    let min_n = (class.length() / (4.0 * k as f64)).floor() as usize + 1;
    Ok(n.max(min_n))
}
