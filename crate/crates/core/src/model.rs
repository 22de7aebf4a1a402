//! Problem and function-class definitions.
//!
//! A k-th order scalar problem `u^(k)(x) = g(x, u, ..., u^(q))` with
//! `u^(j)(a) = u_a^j` is represented by [`ScalarIvp`]. For right-hand sides
//! depending on `x` only ([`PureTimeRhs`]) the solution is the Taylor
//! polynomial of the initial data plus a k-fold integral of `g`.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{factorial, PiecewisePolynomial};

/// Default grid size for [`sup_error`].
pub const DEFAULT_SUP_GRID: usize = 10_000;
/// Default grid size for class-membership checks.
pub const DEFAULT_MEMBERSHIP_GRID: usize = 100_000;

pub type UnivariateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Right-hand side `g(x, y_0, ..., y_q)`.
pub type RhsFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Functions on `[a, b]` with `sup |g^(j)| <= D_j` for `j = 0..=r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClass {
    r: usize,
    derivative_bounds: Vec<f64>,
    interval: (f64, f64),
}

impl SmoothnessClass {
    pub fn new(r: usize, derivative_bounds: Vec<f64>, interval: (f64, f64)) -> Result<Self> {
        if r < 1 {
            return Err(Error::invalid(format!(
                "smoothness r must be at least 1, got {r}"
            )));
        }
        if derivative_bounds.len() != r + 1 {
            return Err(Error::invalid(format!(
                "expected {} derivative bounds D_0..D_{r}, got {}",
                r + 1,
                derivative_bounds.len()
            )));
        }
        if let Some((j, d)) = derivative_bounds
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(Error::invalid(format!(
                "derivative bound D_{j} = {d} must be positive"
            )));
        }
        let (a, b) = interval;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!(
                "interval [{a}, {b}] must satisfy a < b"
            )));
        }
        Ok(Self {
            r,
            derivative_bounds,
            interval,
        })
    }

    /// All bounds equal to one on `[a, b]`.
    pub fn unit(r: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(r, vec![1.0; r + 1], (a, b))
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn derivative_bounds(&self) -> &[f64] {
        &self.derivative_bounds
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn a(&self) -> f64 {
        self.interval.0
    }

    pub fn b(&self) -> f64 {
        self.interval.1
    }

    pub fn length(&self) -> f64 {
        self.interval.1 - self.interval.0
    }
}

/// Counts right-hand side evaluations. Each solver run or trial owns one.
#[derive(Debug, Default)]
pub struct CostCounter {
    evaluations: AtomicU64,
}

impl CostCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn increment(&self) {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Evaluates `g` at `x`, recording one call.
    pub fn eval(&self, g: &PureTimeRhs, x: f64) -> f64 {
        self.increment();
        g.eval(x)
    }
}

/// A right-hand side depending on `x` only: the subclass `G^r_1`.
#[derive(Clone)]
pub struct PureTimeRhs {
    g: UnivariateFn,
    class: SmoothnessClass,
    piecewise: Option<Arc<PiecewisePolynomial>>,
}

impl fmt::Debug for PureTimeRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PureTimeRhs")
            .field("class", &self.class)
            .field("piecewise", &self.piecewise.is_some())
            .finish()
    }
}

/// Grid-based `sup |g^(j)|` against `D_j` for each `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub grid_sup: Vec<f64>,
    pub bounds: Vec<f64>,
    pub passed: bool,
}

impl MembershipReport {
    /// Largest `sup|g^(j)| / D_j` over `j`.
    pub fn worst_ratio(&self) -> f64 {
        self.grid_sup
            .iter()
            .zip(&self.bounds)
            .map(|(s, d)| s / d)
            .fold(0.0, f64::max)
    }
}

impl PureTimeRhs {
    /// Wraps a black-box evaluator. Membership in the class is trusted.
    pub fn from_fn<F>(g: F, class: SmoothnessClass) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            g: Arc::new(g),
            class,
            piecewise: None,
        }
    }

    /// A piecewise polynomial right-hand side; membership is checkable.
    pub fn from_piecewise(poly: PiecewisePolynomial, class: SmoothnessClass) -> Self {
        let poly = Arc::new(poly);
        let eval = Arc::clone(&poly);
        Self {
            g: Arc::new(move |x| eval.eval(x)),
            class,
            piecewise: Some(poly),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn class(&self) -> &SmoothnessClass {
        &self.class
    }

    pub fn piecewise(&self) -> Option<&PiecewisePolynomial> {
        self.piecewise.as_deref()
    }

    pub fn evaluator(&self) -> UnivariateFn {
        Arc::clone(&self.g)
    }

    /// Grid check of `sup |g^(j)| <= D_j`, `j = 0..=r`, with a relative slack
    /// of `1e-12` for rounding. Only available for piecewise inputs.
    pub fn check_membership(&self, grid_points: usize) -> Result<MembershipReport> {
        let poly = self.piecewise.as_ref().ok_or_else(|| {
            Error::invalid(
                "class membership can only be checked for piecewise-polynomial right-hand sides",
            )
        })?;
        Ok(membership_of(poly, &self.class, grid_points))
    }
}

pub(crate) fn membership_of(
    poly: &PiecewisePolynomial,
    class: &SmoothnessClass,
    grid_points: usize,
) -> MembershipReport {
    let bounds = class.derivative_bounds().to_vec();
    let grid_sup: Vec<f64> = (0..=class.r())
        .map(|j| poly.grid_sup_abs_derivative(j, grid_points))
        .collect();
    let passed = grid_sup
        .iter()
        .zip(&bounds)
        .all(|(s, d)| *s <= d * (1.0 + 1e-12));
    MembershipReport {
        grid_sup,
        bounds,
        passed,
    }
}

/// `u^(k) = g(x, u, ..., u^(q))`, `u^(j)(a) = u_a^j`.
#[derive(Clone)]
pub struct ScalarIvp {
    order: usize,
    dependence: usize,
    rhs: RhsFn,
    initial_values: Vec<f64>,
    class: SmoothnessClass,
}

impl fmt::Debug for ScalarIvp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarIvp")
            .field("order", &self.order)
            .field("dependence", &self.dependence)
            .field("initial_values", &self.initial_values)
            .field("class", &self.class)
            .finish()
    }
}

impl ScalarIvp {
    pub fn new<F>(
        order: usize,
        dependence: usize,
        rhs: F,
        initial_values: Vec<f64>,
        class: SmoothnessClass,
    ) -> Result<Self>
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        if order < 1 {
            return Err(Error::invalid("problem order k must be at least 1"));
        }
        if dependence >= order {
            return Err(Error::invalid(format!(
                "derivative dependence q = {dependence} must be below the order k = {order}"
            )));
        }
        if initial_values.len() != order {
            return Err(Error::invalid(format!(
                "expected {order} initial values, got {}",
                initial_values.len()
            )));
        }
        Ok(Self {
            order,
            dependence,
            rhs: Arc::new(rhs),
            initial_values,
            class,
        })
    }

    /// A problem with right-hand side depending on `x` only (`q = 0`).
    pub fn pure_time(order: usize, rhs: &PureTimeRhs, initial_values: Vec<f64>) -> Result<Self> {
        let g = rhs.evaluator();
        Self::new(
            order,
            0,
            move |x, _| g(x),
            initial_values,
            rhs.class().clone(),
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dependence(&self) -> usize {
        self.dependence
    }

    pub fn initial_values(&self) -> &[f64] {
        &self.initial_values
    }

    pub fn class(&self) -> &SmoothnessClass {
        &self.class
    }

    pub fn rhs(&self, x: f64, y: &[f64]) -> f64 {
        (self.rhs)(x, y)
    }
}

/// The order-one companion system with state `(u_0, ..., u_k)`, where
/// `u_0 = x` and `u_1, ..., u_k` are `u, u', ..., u^(k-1)`.
#[derive(Clone)]
pub struct FirstOrderSystem {
    dimension: usize,
    field: VectorField,
    initial_state: Vec<f64>,
    interval: (f64, f64),
}

impl fmt::Debug for FirstOrderSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstOrderSystem")
            .field("dimension", &self.dimension)
            .field("initial_state", &self.initial_state)
            .field("interval", &self.interval)
            .finish()
    }
}

impl FirstOrderSystem {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Writes the vector field at `state` into `out`.
    pub fn eval(&self, state: &[f64], out: &mut [f64]) {
        (self.field)(state, out)
    }
}

/// Builds the companion system `u_0' = 1`, `u_i' = u_{i+1}` for
/// `1 <= i < k`, `u_k' = g(u_0, u_1, ..., u_{q+1})`.
pub fn to_first_order_system(p: &ScalarIvp) -> Result<FirstOrderSystem> {
    let k = p.order;
    if k < 1 {
        return Err(Error::invalid("problem order k must be at least 1"));
    }
    let q = p.dependence;
    let rhs = Arc::clone(&p.rhs);
    let field: VectorField = Arc::new(move |state: &[f64], out: &mut [f64]| {
        out[0] = 1.0;
        out[1..k].copy_from_slice(&state[2..=k]);
        out[k] = rhs(state[0], &state[1..=q + 1]);
    });
    let mut initial_state = Vec::with_capacity(k + 1);
    initial_state.push(p.class.a());
    initial_state.extend_from_slice(&p.initial_values);
    Ok(FirstOrderSystem {
        dimension: k + 1,
        field,
        initial_state,
        interval: p.class.interval(),
    })
}

/// Taylor part of the solution, `sum_j u_a^j (x - a)^j / j!`.
pub fn polynomial_part(p: &ScalarIvp, x: f64) -> Result<f64> {
    let (a, b) = p.class.interval();
    if !(a <= x && x <= b) {
        return Err(Error::invalid(format!("x = {x} lies outside [{a}, {b}]")));
    }
    Ok(p.initial_values
        .iter()
        .enumerate()
        .map(|(j, u)| u * (x - a).powi(j as i32) / factorial(j))
        .sum())
}

/// Grid values of an approximate solution with piecewise-linear evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionApproximation {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl SolutionApproximation {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::invalid(format!(
                "need at least two nodes with one value each (got {} nodes, {} values)",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("solution nodes must be strictly increasing"));
        }
        Ok(Self { nodes, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    /// Linear interpolation between neighbouring nodes, clamped to the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let i = self
            .nodes
            .partition_point(|&n| n <= x)
            .clamp(1, self.nodes.len() - 1);
        let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// `max |u_ref(x) - l(x)|` over a uniform grid of `grid_size` points spanning
/// the nodes of `l`. This underestimates the true supremum.
pub fn sup_error<F>(u_ref: F, l: &SolutionApproximation, grid_size: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if grid_size < 2 {
        return Err(Error::invalid(format!(
            "sup-error grid needs at least 2 points, got {grid_size}"
        )));
    }
    let (a, b) = l.domain();
    Ok((0..grid_size)
        .map(|i| {
            let x = if i + 1 == grid_size {
                b
            } else {
                a + (b - a) * i as f64 / (grid_size - 1) as f64
            };
            (u_ref(x) - l.eval(x)).abs()
        })
        .fold(0.0, f64::max))
}
