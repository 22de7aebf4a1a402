//! Adaptive Gauss-Kronrod quadrature and the k-fold integral oracle.
//!
//! The oracle computes
//! `int_a^x int_a^{t_{k-1}} ... int_a^{t_1} g(t_0) dt_0 ... dt_{k-1}`
//! either through the single-kernel form
//! `int_a^x (x - t)^{k-1} / (k-1)! g(t) dt` or by literally nesting one
//! adaptive quadrature inside another. The nested mode costs exponentially
//! in `k` and exists to cross-check the kernel identity.

use std::cell::RefCell;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::poly::factorial;

pub const DEFAULT_MAX_SUBDIVISIONS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    abs_value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_value = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_value += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        abs_value: abs_value * half.abs(),
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Globally adaptive 7/15-point Gauss-Kronrod integration of `f` over
/// `[a, b]` to absolute tolerance `tol`.
///
/// `breakpoints` inside `(a, b)` seed the initial partition, which helps at
/// known kinks. The requested tolerance is floored at a small multiple of
/// machine precision times `int |f|`.
pub fn integrate<F>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    breakpoints: &[f64],
    max_subdivisions: usize,
) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    if !(a <= b) {
        return Err(Error::invalid(format!(
            "quadrature interval [{a}, {b}] is reversed"
        )));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let mut marks = vec![a];
    marks.extend(breakpoints.iter().copied().filter(|&p| a < p && p < b));
    marks.push(b);
    marks.sort_by(f64::total_cmp);
    marks.dedup();

    let mut heap: BinaryHeap<Segment> = marks.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    let mut evaluations = 15 * heap.len();
    let mut subdivisions = 0;
    // Segments too narrow to split any further.
    let mut frozen: Vec<Segment> = Vec::new();
    loop {
        let error: f64 = heap.iter().chain(&frozen).map(|s| s.error).sum();
        let abs: f64 = heap.iter().chain(&frozen).map(|s| s.abs_value).sum();
        let target = tol.max(50.0 * f64::EPSILON * abs);
        if error <= target || heap.is_empty() {
            let value = heap.iter().chain(&frozen).map(|s| s.value).sum();
            return Ok(Integral {
                value,
                error_estimate: error,
                evaluations,
            });
        }
        if subdivisions >= max_subdivisions {
            return Err(Error::NotConverged {
                subdivisions,
                error_estimate: error,
                tolerance: tol,
            });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            frozen.push(worst);
            continue;
        }
        heap.push(gk15(&f, worst.lo, mid));
        heap.push(gk15(&f, mid, worst.hi));
        evaluations += 30;
        subdivisions += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// One quadrature of `(x - t)^{k-1} / (k-1)! g(t)`.
    Kernel,
    /// `k` literally nested adaptive quadratures.
    Nested,
}

/// Brute-force k-fold integral oracle.
#[derive(Debug, Clone)]
pub struct KfoldOracle {
    tol: f64,
    mode: OracleMode,
    breakpoints: Vec<f64>,
    max_subdivisions: usize,
}

impl KfoldOracle {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            mode: OracleMode::Kernel,
            breakpoints: Vec::new(),
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }

    pub fn mode(mut self, mode: OracleMode) -> Self {
        self.mode = mode;
        self
    }

    /// Known kinks of `g`, used to seed every quadrature partition.
    pub fn breakpoints(mut self, breakpoints: &[f64]) -> Self {
        self.breakpoints = breakpoints.to_vec();
        self
    }

    pub fn max_subdivisions(mut self, cap: usize) -> Self {
        self.max_subdivisions = cap;
        self
    }

    pub fn integrate<G>(&self, g: G, a: f64, x: f64, k: usize) -> Result<f64>
    where
        G: Fn(f64) -> f64,
    {
        if k < 1 {
            return Err(Error::invalid("k-fold integral needs k >= 1"));
        }
        if !(a <= x) {
            return Err(Error::invalid(format!(
                "k-fold integral needs a <= x, got a = {a}, x = {x}"
            )));
        }
        match self.mode {
            OracleMode::Kernel => {
                let scale = 1.0 / factorial(k - 1);
                let kernel = |t: f64| (x - t).powi(k as i32 - 1) * scale * g(t);
                Ok(integrate(
                    kernel,
                    a,
                    x,
                    self.tol,
                    &self.breakpoints,
                    self.max_subdivisions,
                )?
                .value)
            }
            OracleMode::Nested => self.nested(&g, a, x, k, self.tol),
        }
    }

    fn nested(&self, g: &dyn Fn(f64) -> f64, a: f64, x: f64, k: usize, tol: f64) -> Result<f64> {
        if k == 1 {
            return Ok(integrate(g, a, x, tol, &self.breakpoints, self.max_subdivisions)?.value);
        }
        let inner_tol = tol / (10.0 * (x - a).max(1.0));
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let inner = |t: f64| match self.nested(g, a, t, k - 1, inner_tol) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        let outer = integrate(inner, a, x, tol, &self.breakpoints, self.max_subdivisions);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(outer?.value)
    }
}

/// Kernel-form k-fold integral of `g` from `a` to `x` with absolute
/// tolerance `tol`.
pub fn kfold_integral_oracle<G>(g: G, a: f64, x: f64, k: usize, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    KfoldOracle::new(tol).integrate(g, a, x, k)
}
