//! Integrators for `u^(k) = g(x)` on `[a, b]` with zero initial data, plus an
//! RK4 reference integrator for companion systems.
//!
//! Both k-fold solvers split `[a, b]` into equal cells and, on each, replace
//! `g` by its interpolant `p` at Chebyshev points. The kernel integrals
//! `int (H - s)^e / e! p(s) ds` are exact. The randomized solver adds a
//! Monte Carlo estimate of the residual `int (H - s)^e / e! (g - p)(s) ds`,
//! so `p` acts as a control variate and the statistical error scales with the
//! interpolation residual. Values `u^(j)` are carried from cell to cell by
//! Taylor shifts, so only per-cell work is needed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostCounter, FirstOrderSystem, PureTimeRhs, SolutionApproximation};
use crate::poly::{factorial, horner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    Deterministic,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cells: usize,
    /// Degree of the per-cell interpolant, normally `r - 1`.
    pub local_degree: usize,
    /// Monte Carlo samples per cell (randomized mode only).
    pub mc_samples_per_cell: usize,
    pub seed: u64,
    pub mode: SolverMode,
}

impl SolverConfig {
    pub fn deterministic(cells: usize, local_degree: usize) -> Self {
        Self {
            cells,
            local_degree,
            mc_samples_per_cell: 0,
            seed: 0,
            mode: SolverMode::Deterministic,
        }
    }

    pub fn randomized(cells: usize, local_degree: usize, samples: usize, seed: u64) -> Self {
        Self {
            cells,
            local_degree,
            mc_samples_per_cell: samples,
            seed,
            mode: SolverMode::Randomized,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 1 {
            return Err(Error::invalid("solver needs at least one cell"));
        }
        if self.mode == SolverMode::Randomized && self.mc_samples_per_cell < 1 {
            return Err(Error::invalid(
                "randomized solver needs at least one sample per cell",
            ));
        }
        Ok(())
    }

    /// Evaluations of `g` spent per cell.
    pub fn cost_per_cell(&self) -> usize {
        match self.mode {
            SolverMode::Deterministic => self.local_degree + 1,
            SolverMode::Randomized => self.local_degree + 1 + self.mc_samples_per_cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    /// Approximation of `u(b)`.
    pub endpoint_value: f64,
    pub approximation: SolutionApproximation,
    /// Number of right-hand side evaluations.
    pub cost: u64,
    pub seed_used: u64,
}

/// Deterministic interpolatory k-fold integration.
pub fn deterministic_kfold_solver(
    rhs: &PureTimeRhs,
    k: usize,
    config: &SolverConfig,
) -> Result<SolverResult> {
    if config.mode != SolverMode::Deterministic {
        return Err(Error::invalid(
            "deterministic solver given a randomized configuration",
        ));
    }
    kfold_solve(rhs, k, config)
}

/// Randomized control-variate k-fold integration; unbiased for `u(b)`.
pub fn randomized_cv_solver(
    rhs: &PureTimeRhs,
    k: usize,
    config: &SolverConfig,
) -> Result<SolverResult> {
    if config.mode != SolverMode::Randomized {
        return Err(Error::invalid(
            "randomized solver given a deterministic configuration",
        ));
    }
    kfold_solve(rhs, k, config)
}

/// Chebyshev points of the first kind on `[0, width]`.
fn chebyshev_nodes(degree: usize, width: f64) -> Vec<f64> {
    let count = degree + 1;
    (0..count)
        .map(|i| {
            let theta = (2 * i + 1) as f64 * PI / (2 * count) as f64;
            0.5 * width * (1.0 - theta.cos())
        })
        .collect()
}

/// Power-basis coefficients of the interpolant through `(nodes, values)`.
fn interpolate(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut dd = values.to_vec();
    for level in 1..n {
        for i in (level..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - level]);
        }
    }
    let mut poly = vec![dd[n - 1]];
    for i in (0..n - 1).rev() {
        // poly <- poly * (s - nodes[i]) + dd[i]
        let mut next = vec![0.0; poly.len() + 1];
        for (p, c) in poly.iter().enumerate() {
            next[p + 1] += c;
            next[p] -= c * nodes[i];
        }
        next[0] += dd[i];
        poly = next;
    }
    poly
}

/// `int_0^H (H - s)^e / e! s^i ds = H^{e+i+1} i! / (e+i+1)!`.
fn kernel_integral(poly: &[f64], width: f64, e: usize) -> f64 {
    poly.iter()
        .enumerate()
        .map(|(i, c)| c * width.powi((e + i + 1) as i32) * factorial(i) / factorial(e + i + 1))
        .sum()
}

fn kfold_solve(rhs: &PureTimeRhs, k: usize, config: &SolverConfig) -> Result<SolverResult> {
    if k < 1 {
        return Err(Error::invalid("problem order k must be at least 1"));
    }
    config.validate()?;
    let (a, b) = rhs.class().interval();
    let cells = config.cells;
    let width = (b - a) / cells as f64;
    let counter = CostCounter::new();
    let local = chebyshev_nodes(config.local_degree, width);
    let inv_fact: Vec<f64> = (0..k).map(|e| 1.0 / factorial(e)).collect();

    let mut nodes = Vec::with_capacity(cells + 1);
    let mut values = Vec::with_capacity(cells + 1);
    // derivs[j] = u^(j) at the current cell's left end.
    let mut derivs = vec![0.0; k];
    nodes.push(a);
    values.push(0.0);
    let mut kernel = vec![0.0; k];
    for cell in 0..cells {
        let left = a + cell as f64 * width;
        let samples: Vec<f64> = local.iter().map(|s| counter.eval(rhs, left + s)).collect();
        let poly = interpolate(&local, &samples);
        for (e, slot) in kernel.iter_mut().enumerate() {
            *slot = kernel_integral(&poly, width, e);
        }
        if config.mode == SolverMode::Randomized {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(cell as u64);
            let m = config.mc_samples_per_cell;
            let mut residual = vec![0.0; k];
            for _ in 0..m {
                let s = width * rng.random::<f64>();
                let diff = counter.eval(rhs, left + s) - horner(&poly, s);
                let mut pow = 1.0;
                for (e, acc) in residual.iter_mut().enumerate() {
                    *acc += pow * inv_fact[e] * diff;
                    pow *= width - s;
                }
            }
            for (slot, acc) in kernel.iter_mut().zip(&residual) {
                *slot += width * acc / m as f64;
            }
        }
        // u^(j)(left + H) = sum_{l >= j} u^(l)(left) H^{l-j}/(l-j)! + kernel[k-1-j]
        let next: Vec<f64> = (0..k)
            .map(|j| {
                let taylor: f64 = (j..k)
                    .map(|l| derivs[l] * width.powi((l - j) as i32) * inv_fact[l - j])
                    .sum();
                taylor + kernel[k - 1 - j]
            })
            .collect();
        derivs = next;
        nodes.push(if cell + 1 == cells {
            b
        } else {
            a + (cell + 1) as f64 * width
        });
        values.push(derivs[0]);
    }
    Ok(SolverResult {
        endpoint_value: derivs[0],
        approximation: SolutionApproximation::new(nodes, values)?,
        cost: counter.count(),
        seed_used: config.seed,
    })
}

/// Classical fourth-order Runge-Kutta on the companion system with `steps`
/// equal steps. Returns component `u_1`. The observed order is
/// `min(4, smoothness of g + 1)`.
pub fn rk4_reference_solver(system: &FirstOrderSystem, steps: usize) -> Result<SolverResult> {
    if steps < 1 {
        return Err(Error::invalid("RK4 needs at least one step"));
    }
    let (a, b) = system.interval();
    let dim = system.dimension();
    let h = (b - a) / steps as f64;
    let counter = CostCounter::new();
    let field = |state: &[f64], out: &mut [f64]| {
        counter.increment();
        system.eval(state, out);
    };
    let mut y = system.initial_state().to_vec();
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    nodes.push(a);
    values.push(y[1]);
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    let mut tmp = vec![0.0; dim];
    for step in 0..steps {
        field(&y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        field(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        field(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * k3[i];
        }
        field(&tmp, &mut k4);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let x = if step + 1 == steps {
            b
        } else {
            a + (step + 1) as f64 * h
        };
        // Keep the time component exact.
        y[0] = x;
        nodes.push(x);
        values.push(y[1]);
    }
    Ok(SolverResult {
        endpoint_value: y[1],
        approximation: SolutionApproximation::new(nodes, values)?,
        cost: counter.count(),
        seed_used: 0,
    })
}
