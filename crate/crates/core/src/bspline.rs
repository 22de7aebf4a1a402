//! Perfect B-splines on `[-1, 1]` and the bump functions built from them.
//!
//! The perfect B-spline of degree `d` is
//! `psi_d(x) = 1/(d-1)! int_{-1}^{1} (x - t)_+^{d-1} sgn U_d(t) dt`,
//! where `U_d` is the Chebyshev polynomial of the second kind. Its `d`-th
//! derivative is `sgn U_d`, and because `sgn U_d` is orthogonal to all
//! polynomials of degree below `d`, `psi_d` and its first `d - 1`
//! derivatives vanish at both ends of `[-1, 1]`.
//!
//! Scaled copies of `psi_{r+1}` give bumps in the class `G^r_1` whose
//! iterated integrals have closed forms; those closed forms are the
//! building blocks of the mean-estimation reduction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{membership_of, MembershipReport, SmoothnessClass};
use crate::poly::{factorial, horner, shifted_power, PiecewisePolynomial};

pub const MAX_CHEBYSHEV_DEGREE: usize = 30;
/// Largest supported perfect B-spline degree. Power-basis pieces lose
/// accuracy beyond this.
pub const MAX_SPLINE_DEGREE: usize = 12;

/// Chebyshev polynomial of the second kind in the power basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevU {
    degree: usize,
    coefficients: Vec<f64>,
}

impl ChebyshevU {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coefficients, x)
    }

    /// Zeros `cos(i pi / (n + 1))`, `i = n, ..., 1`, in ascending order.
    pub fn zeros(&self) -> Vec<f64> {
        let n = self.degree;
        (1..=n)
            .rev()
            .map(|i| (i as f64 * PI / (n + 1) as f64).cos())
            .collect()
    }
}

/// `U_0 = 1`, `U_1 = 2x`, `U_{n+1} = 2x U_n - U_{n-1}`.
pub fn chebyshev_u(degree: usize) -> Result<ChebyshevU> {
    if degree > MAX_CHEBYSHEV_DEGREE {
        return Err(Error::invalid(format!(
            "Chebyshev degree {degree} exceeds the supported maximum {MAX_CHEBYSHEV_DEGREE}"
        )));
    }
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 2.0];
    if degree == 0 {
        return Ok(ChebyshevU {
            degree,
            coefficients: prev,
        });
    }
    for _ in 1..degree {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    Ok(ChebyshevU {
        degree,
        coefficients: cur,
    })
}

/// A piecewise-constant `±1` function on `[-1, 1]` with sign changes at the
/// knots. For the Chebyshev pattern of order `n` this is `sgn U_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignPattern {
    knots: Vec<f64>,
    rightmost_sign: f64,
}

impl SignPattern {
    /// `sgn U_order` with `+1` on the interval adjacent to `t = 1`.
    pub fn chebyshev(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::invalid(
                "sign pattern needs a Chebyshev order of at least 1",
            ));
        }
        Self::from_knots(chebyshev_u(order)?.zeros(), 1.0)
    }

    /// Arbitrary knots in `(-1, 1)`; used for test fixtures and negative
    /// controls.
    pub fn from_knots(knots: Vec<f64>, rightmost_sign: f64) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("sign pattern needs at least one knot"));
        }
        if knots.iter().any(|&t| !(-1.0 < t && t < 1.0)) {
            return Err(Error::invalid(format!(
                "knots must lie strictly inside (-1, 1): {knots:?}"
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!(
                "knots must be strictly increasing: {knots:?}"
            )));
        }
        if rightmost_sign.abs() != 1.0 {
            return Err(Error::invalid(format!(
                "rightmost sign must be +1 or -1, got {rightmost_sign}"
            )));
        }
        Ok(Self {
            knots,
            rightmost_sign,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn rightmost_sign(&self) -> f64 {
        self.rightmost_sign
    }

    /// `(lo, hi, sign)` for each of the `knots + 1` intervals, left to right.
    pub fn intervals(&self) -> Vec<(f64, f64, f64)> {
        let count = self.knots.len() + 1;
        let mut edges = Vec::with_capacity(count + 1);
        edges.push(-1.0);
        edges.extend_from_slice(&self.knots);
        edges.push(1.0);
        (0..count)
            .map(|l| {
                let sign = if (count - 1 - l).is_multiple_of(2) {
                    self.rightmost_sign
                } else {
                    -self.rightmost_sign
                };
                (edges[l], edges[l + 1], sign)
            })
            .collect()
    }

    /// `int_{-1}^{1} t^p s(t) dt` from exact antiderivatives.
    pub fn moment(&self, p: usize) -> f64 {
        let e = p as i32 + 1;
        self.intervals()
            .iter()
            .map(|&(lo, hi, s)| s * (hi.powi(e) - lo.powi(e)))
            .sum::<f64>()
            / (p + 1) as f64
    }

    /// `int_{-1}^{1} (1 - t)^p s(t) dt` from the antiderivative
    /// `-(1 - t)^{p+1} / (p + 1)`.
    pub fn kernel_moment(&self, p: usize) -> f64 {
        let e = p as i32 + 1;
        self.intervals()
            .iter()
            .map(|&(lo, hi, s)| s * ((1.0 - lo).powi(e) - (1.0 - hi).powi(e)))
            .sum::<f64>()
            / (p + 1) as f64
    }

    /// Largest `|moment(p)|` for `p = 0..=max_power`.
    pub fn max_moment_residual(&self, max_power: usize) -> f64 {
        (0..=max_power)
            .map(|p| self.moment(p).abs())
            .fold(0.0, f64::max)
    }

    /// The pattern as a piecewise-constant function.
    pub fn to_piecewise(&self) -> PiecewisePolynomial {
        let iv = self.intervals();
        PiecewisePolynomial::from_segments(iv.into_iter().map(|(lo, hi, s)| (lo, hi, vec![s])))
            .expect("sign pattern intervals are contiguous")
    }
}

/// `sgn U_{r+1}`, the pattern behind the bumps of smoothness `r`.
pub fn sign_pattern(r: usize) -> Result<SignPattern> {
    if r < 1 {
        return Err(Error::invalid(format!(
            "smoothness r must be at least 1, got {r}"
        )));
    }
    SignPattern::chebyshev(r + 1)
}

/// The perfect B-spline `psi_d` on `[-1, 1]` with its derivative sup norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectBSpline {
    degree: usize,
    pattern: SignPattern,
    body: PiecewisePolynomial,
    sup_norms: Vec<f64>,
}

impl PerfectBSpline {
    /// Materializes `1/(d-1)! int (x - t)_+^{d-1} s(t) dt` exactly, where the
    /// degree `d` is the number of knots of `pattern`.
    pub fn from_sign_pattern(pattern: SignPattern) -> Result<Self> {
        let degree = pattern.knots().len();
        if degree > MAX_SPLINE_DEGREE {
            return Err(Error::invalid(format!(
                "perfect B-spline degree {degree} exceeds the supported maximum {MAX_SPLINE_DEGREE}"
            )));
        }
        let body = truncated_power_integral(&pattern);
        let mut spline = Self {
            degree,
            pattern,
            body,
            sup_norms: Vec::new(),
        };
        spline.sup_norms = (0..=degree)
            .map(|j| spline.body.nth_derivative(j).sup_abs())
            .collect();
        Ok(spline)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pattern(&self) -> &SignPattern {
        &self.pattern
    }

    pub fn body(&self) -> &PiecewisePolynomial {
        &self.body
    }

    /// `m_j = sup_{[-1,1]} |psi^(j)|` for `j = 0..=degree`.
    pub fn sup_norms(&self) -> &[f64] {
        &self.sup_norms
    }

    /// `psi(x)` for any real `x`: zero left of `-1`, the truncated-power
    /// integral over all of `[-1, 1]` right of `1`.
    pub fn eval(&self, x: f64) -> f64 {
        if x < -1.0 {
            0.0
        } else if x <= 1.0 {
            self.body.eval(x)
        } else {
            let d = self.degree as i32;
            self.pattern
                .intervals()
                .iter()
                .map(|&(lo, hi, s)| s * ((x - lo).powi(d) - (x - hi).powi(d)))
                .sum::<f64>()
                / factorial(self.degree)
        }
    }

    /// `psi^(j)(1)` as the left limit, for `j = 0..degree`.
    pub fn right_endpoint_derivatives(&self) -> Vec<f64> {
        let last = self.body.num_pieces() - 1;
        (0..self.degree)
            .map(|j| self.body.nth_derivative(j).piece_right_value(last))
            .collect()
    }

    /// `psi^(j)(-1)` for `j = 0..degree`.
    pub fn left_endpoint_derivatives(&self) -> Vec<f64> {
        (0..self.degree)
            .map(|j| self.body.eval_derivative(-1.0, j))
            .collect()
    }
}

fn truncated_power_integral(pattern: &SignPattern) -> PiecewisePolynomial {
    let d = pattern.knots().len();
    let scale = 1.0 / factorial(d);
    let intervals = pattern.intervals();
    let segments = intervals.iter().enumerate().map(|(p, &(lo, hi, sign))| {
        // Local variable y = x - lo. Full intervals left of the piece contribute
        // s_l [(x - t_l)^d - (x - t_{l+1})^d] / d, the current one s_p (x - lo)^d / d.
        let mut coeffs = vec![0.0; d + 1];
        for &(tl, tr, s) in &intervals[..p] {
            let left = shifted_power(d, lo - tl);
            let right = shifted_power(d, lo - tr);
            for i in 0..=d {
                coeffs[i] += s * (left[i] - right[i]);
            }
        }
        coeffs[d] += sign;
        for c in &mut coeffs {
            *c *= scale;
        }
        (lo, hi, coeffs)
    });
    PiecewisePolynomial::from_segments(segments.collect::<Vec<_>>())
        .expect("sign pattern intervals are contiguous")
}

/// `psi_degree` from the Chebyshev sign pattern `sgn U_degree`.
pub fn build_perfect_bspline(degree: usize) -> Result<PerfectBSpline> {
    if !(1..=MAX_SPLINE_DEGREE).contains(&degree) {
        return Err(Error::invalid(format!(
            "perfect B-spline degree must be in 1..={MAX_SPLINE_DEGREE}, got {degree}"
        )));
    }
    PerfectBSpline::from_sign_pattern(SignPattern::chebyshev(degree)?)
}

/// `sup_{[-1,1]} |psi^(j)|` from per-piece critical points.
pub fn sup_norm_of_derivative(s: &PerfectBSpline, j: usize) -> Result<f64> {
    if j > s.degree {
        return Err(Error::invalid(format!(
            "derivative order {j} exceeds spline degree {}",
            s.degree
        )));
    }
    Ok(s.body.nth_derivative(j).sup_abs())
}

/// `alpha = min_{j=0..r} D_j / m_j` with `m_j` from `psi_{r+1}`.
pub fn scaling_alpha(psi: &PerfectBSpline, class: &SmoothnessClass) -> Result<f64> {
    let r = class.r();
    if psi.degree() != r + 1 {
        return Err(Error::invalid(format!(
            "bumps of smoothness {r} need psi of degree {}, got {}",
            r + 1,
            psi.degree()
        )));
    }
    Ok((0..=r)
        .map(|j| class.derivative_bounds()[j] / psi.sup_norms()[j])
        .fold(f64::INFINITY, f64::min))
}

/// `phi_r([c, d], x) = alpha ((d - c)/2)^r psi_{r+1}(2x/(d - c) - (d + c)/(d - c))`
/// on `[c, d]`, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledBump {
    interval: (f64, f64),
    alpha: f64,
    r: usize,
    body: PiecewisePolynomial,
}

impl ScaledBump {
    pub fn from_spline(psi: &PerfectBSpline, c: f64, d: f64, alpha: f64) -> Result<Self> {
        if !(c < d) {
            return Err(Error::invalid(format!("bump interval [{c}, {d}] is empty")));
        }
        if d - c >= 2.0 {
            return Err(Error::invalid(format!(
                "bump width {} must be below 2 for class membership",
                d - c
            )));
        }
        let r = psi.degree() - 1;
        let scale = alpha * ((d - c) / 2.0).powi(r as i32);
        Ok(Self {
            interval: (c, d),
            alpha,
            r,
            body: psi.body().affine_image(c, d, scale)?,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn body(&self) -> &PiecewisePolynomial {
        &self.body
    }

    /// Value with zero extension outside `[c, d]`.
    pub fn eval(&self, x: f64) -> f64 {
        let (c, d) = self.interval;
        if x < c || x > d {
            0.0
        } else {
            self.body.eval(x)
        }
    }

    pub fn eval_derivative(&self, x: f64, order: usize) -> f64 {
        let (c, d) = self.interval;
        if x < c || x > d {
            0.0
        } else {
            self.body.eval_derivative(x, order)
        }
    }

    /// The bump on `[a, b] ⊇ [c, d]` with explicit zero pieces.
    pub fn extended_on(&self, a: f64, b: f64) -> Result<PiecewisePolynomial> {
        let (c, d) = self.interval;
        if a > c || b < d {
            return Err(Error::invalid(format!(
                "[{a}, {b}] does not contain [{c}, {d}]"
            )));
        }
        let mut segments = Vec::new();
        if a < c {
            segments.push((a, c, vec![0.0]));
        }
        segments.extend(body_segments(&self.body, 1.0));
        if d < b {
            segments.push((d, b, vec![0.0]));
        }
        PiecewisePolynomial::from_segments(segments)
    }

    /// Largest `|phi^(j)|` at `c` and `d` over `j = 0..=r`, each scaled by
    /// `1 / max(1, D_j)`.
    pub fn endpoint_residual(&self, class: &SmoothnessClass) -> f64 {
        let last = self.body.num_pieces() - 1;
        let (c, _) = self.interval;
        (0..=self.r)
            .map(|j| {
                let dj = self.body.nth_derivative(j);
                let scale = class.derivative_bounds()[j].max(1.0);
                dj.eval(c).abs().max(dj.piece_right_value(last).abs()) / scale
            })
            .fold(0.0, f64::max)
    }

    pub fn check_membership(
        &self,
        class: &SmoothnessClass,
        grid_points: usize,
    ) -> MembershipReport {
        membership_of(&self.body, class, grid_points)
    }
}

fn body_segments(
    body: &PiecewisePolynomial,
    weight: f64,
) -> impl Iterator<Item = (f64, f64, Vec<f64>)> + '_ {
    let bp = body.breakpoints();
    body.pieces()
        .iter()
        .enumerate()
        .map(move |(i, p)| (bp[i], bp[i + 1], p.iter().map(|c| c * weight).collect()))
}

/// Builds `phi_r([c, d], .)` for the smoothness and bounds of `class`.
pub fn build_scaled_bump(c: f64, d: f64, class: &SmoothnessClass) -> Result<ScaledBump> {
    let psi = build_perfect_bspline(class.r() + 1)?;
    let alpha = scaling_alpha(&psi, class)?;
    ScaledBump::from_spline(&psi, c, d, alpha)
}

/// `phi_r^m`: the m-fold integral of `phi_r([c, d], .)` over `[c, d]` is
/// `(d - c)^{r+m} phi_r^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IteratedIntegralConstant {
    pub r: usize,
    pub m: usize,
    pub value: f64,
}

/// `phi_r^m = (1/2)^{r+m} alpha/(r+m)! int_{-1}^{1} (1 - t)^{r+m} sgn U_{r+1}(t) dt`.
pub fn phi_r_m(r: usize, m: usize, alpha: f64) -> Result<IteratedIntegralConstant> {
    if m < 1 {
        return Err(Error::invalid(
            "iterated integral order m must be at least 1",
        ));
    }
    let pattern = sign_pattern(r)?;
    Ok(IteratedIntegralConstant {
        r,
        m,
        value: iterated_constant(&pattern, r, m, alpha),
    })
}

fn iterated_constant(pattern: &SignPattern, r: usize, m: usize, alpha: f64) -> f64 {
    let p = r + m;
    0.5f64.powi(p as i32) * alpha / factorial(p) * pattern.kernel_moment(p)
}

/// The translated bumps `f_i = phi_r([a_i, a_{i+1}], .)`, `i = 0..n`, on a
/// uniform grid `a_i = a + i h`, `h = (b - a)/n`.
#[derive(Debug, Clone)]
pub struct BumpFamily {
    class: SmoothnessClass,
    n: usize,
    h: f64,
    anchors: Vec<f64>,
    psi: PerfectBSpline,
    alpha: f64,
    bumps: Vec<ScaledBump>,
}

/// Builds `n` bumps on the uniform grid over the class interval.
pub fn build_bump_family(class: &SmoothnessClass, n: usize) -> Result<BumpFamily> {
    let psi = build_perfect_bspline(class.r() + 1)?;
    BumpFamily::with_spline(class, n, psi)
}

impl BumpFamily {
    pub fn with_spline(class: &SmoothnessClass, n: usize, psi: PerfectBSpline) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("bump family needs n >= 1"));
        }
        let (a, b) = class.interval();
        let h = (b - a) / n as f64;
        if h >= 2.0 {
            return Err(Error::invalid(format!(
                "mesh h = {h} must be below 2 (n = {n} on [{a}, {b}])"
            )));
        }
        let alpha = scaling_alpha(&psi, class)?;
        let anchors: Vec<f64> = (0..=n)
            .map(|i| if i == n { b } else { a + i as f64 * h })
            .collect();
        let bumps = anchors
            .windows(2)
            .map(|w| ScaledBump::from_spline(&psi, w[0], w[1], alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            class: class.clone(),
            n,
            h,
            anchors,
            psi,
            alpha,
            bumps,
        })
    }

    pub fn class(&self) -> &SmoothnessClass {
        &self.class
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn r(&self) -> usize {
        self.class.r()
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn spline(&self) -> &PerfectBSpline {
        &self.psi
    }

    pub fn bump(&self, i: usize) -> &ScaledBump {
        &self.bumps[i]
    }

    /// `f_i(x)`, zero outside `[a_i, a_{i+1}]`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        self.bumps[i].eval(x)
    }

    /// `phi_r^m` for `m = 1..=k` (index `m - 1`).
    pub fn iterated_constants(&self, k: usize) -> Vec<f64> {
        let r = self.r();
        (1..=k)
            .map(|m| iterated_constant(self.psi.pattern(), r, m, self.alpha))
            .collect()
    }

    /// Closed-form k-fold integral of `f_i` over `[a, b]`:
    /// `h^{r+k} sum_{m=1}^{k} phi_r^m (n - i - 1)^{k-m} / (k - m)!`.
    pub fn bump_kfold_integral(&self, i: usize, k: usize) -> Result<f64> {
        self.check_index(i, k)?;
        Ok(self.kfold_with(&self.iterated_constants(k), i, k))
    }

    /// Closed-form k-fold integrals of every bump.
    pub fn all_kfold_integrals(&self, k: usize) -> Result<Vec<f64>> {
        self.check_index(0, k)?;
        let phis = self.iterated_constants(k);
        Ok((0..self.n).map(|i| self.kfold_with(&phis, i, k)).collect())
    }

    fn kfold_with(&self, phis: &[f64], i: usize, k: usize) -> f64 {
        let r = self.r();
        let dist = (self.n - i - 1) as f64;
        let sum: f64 = (1..=k)
            .map(|m| phis[m - 1] * dist.powi((k - m) as i32) / factorial(k - m))
            .sum();
        self.h.powi((r + k) as i32) * sum
    }

    /// `int_a^x int_a^{y_{k-1}} ... f_i` for `x` in `[a, b]`: zero before the
    /// bump, the local iterated integral on it, and the polynomial tail
    /// `sum_m h^{r+m} phi_r^m (x - a_{i+1})^{k-m} / (k-m)!` after it.
    pub fn bump_partial_kfold_integral(&self, i: usize, k: usize, x: f64) -> Result<f64> {
        self.check_index(i, k)?;
        let (a, b) = self.class.interval();
        if !(a <= x && x <= b) {
            return Err(Error::invalid(format!("x = {x} lies outside [{a}, {b}]")));
        }
        let (lo, hi) = (self.anchors[i], self.anchors[i + 1]);
        if x < lo {
            return Ok(0.0);
        }
        if x <= hi {
            return Ok(self.bumps[i].body().nth_antiderivative(k).eval(x));
        }
        let r = self.r();
        let phis = self.iterated_constants(k);
        Ok((1..=k)
            .map(|m| {
                self.h.powi((r + m) as i32) * phis[m - 1] * (x - hi).powi((k - m) as i32)
                    / factorial(k - m)
            })
            .sum())
    }

    fn check_index(&self, i: usize, k: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::invalid(format!(
                "bump index {i} out of range 0..{}",
                self.n
            )));
        }
        if k < 1 {
            return Err(Error::invalid("k-fold integral needs k >= 1"));
        }
        Ok(())
    }

    /// `sum_i w_i f_i` over `[a, b]` as one piecewise polynomial. Cells
    /// without a weight contribute a zero piece.
    pub fn assemble(&self, weights: &[(usize, f64)]) -> Result<PiecewisePolynomial> {
        let mut per_cell = vec![None; self.n];
        for &(i, w) in weights {
            if i >= self.n {
                return Err(Error::invalid(format!(
                    "bump index {i} out of range 0..{}",
                    self.n
                )));
            }
            if per_cell[i].replace(w).is_some() {
                return Err(Error::invalid(format!("bump index {i} assigned twice")));
            }
        }
        let mut segments = Vec::new();
        for (i, w) in per_cell.into_iter().enumerate() {
            match w {
                Some(w) => segments.extend(body_segments(self.bumps[i].body(), w)),
                None => segments.push((self.anchors[i], self.anchors[i + 1], vec![0.0])),
            }
        }
        PiecewisePolynomial::from_segments(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{KfoldOracle, OracleMode};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn chebyshev_low_degrees() {
        assert_eq!(chebyshev_u(0).unwrap().coefficients(), &[1.0]);
        assert_eq!(chebyshev_u(1).unwrap().coefficients(), &[0.0, 2.0]);
        assert_eq!(chebyshev_u(2).unwrap().coefficients(), &[-1.0, 0.0, 4.0]);
        assert_eq!(
            chebyshev_u(3).unwrap().coefficients(),
            &[0.0, -4.0, 0.0, 8.0]
        );
        assert!(chebyshev_u(31).is_err());
    }

    #[test]
    fn chebyshev_zero_and_recurrence() {
        let u5 = chebyshev_u(5).unwrap();
        assert_abs_diff_eq!(u5.eval((PI / 6.0).cos()), 0.0, epsilon = 1e-12);
        // U_n(cos θ) = sin((n+1)θ) / sin θ
        for n in 0..=10 {
            let u = chebyshev_u(n).unwrap();
            for theta in [0.3, 1.1, 2.0] {
                let want = ((n + 1) as f64 * theta).sin() / f64::sin(theta);
                assert_abs_diff_eq!(u.eval(f64::cos(theta)), want, epsilon = 1e-10);
            }
            for z in u.zeros() {
                assert_abs_diff_eq!(u.eval(z), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn sign_pattern_examples() {
        let p = sign_pattern(1).unwrap();
        assert_abs_diff_eq!(p.knots()[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.knots()[1], 0.5, epsilon = 1e-15);
        let signs: Vec<f64> = p.intervals().iter().map(|iv| iv.2).collect();
        assert_eq!(signs, vec![1.0, -1.0, 1.0]);

        let p = sign_pattern(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in p.knots().iter().zip([-s, 0.0, s]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let signs: Vec<f64> = p.intervals().iter().map(|iv| iv.2).collect();
        assert_eq!(signs, vec![-1.0, 1.0, -1.0, 1.0]);
        assert!(sign_pattern(0).is_err());
    }

    #[test]
    fn sign_pattern_matches_chebyshev_sign() {
        for order in 1..=9 {
            let u = chebyshev_u(order).unwrap();
            let p = SignPattern::chebyshev(order).unwrap();
            for (lo, hi, s) in p.intervals() {
                assert_eq!(u.eval(0.5 * (lo + hi)).signum(), s);
            }
        }
    }

    #[test]
    fn orthogonality_moments_vanish() {
        for r in 1..=8 {
            let p = sign_pattern(r).unwrap();
            assert!(p.moment(0).abs() <= 1e-10);
            assert!(p.max_moment_residual(r) <= 1e-10, "r = {r}");
            // Not orthogonal one degree higher.
            assert!(p.moment(r + 1).abs() > 1e-3);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(SignPattern::from_knots(vec![], 1.0).is_err());
        assert!(SignPattern::from_knots(vec![0.5, 0.1], 1.0).is_err());
        assert!(SignPattern::from_knots(vec![1.0], 1.0).is_err());
        assert!(SignPattern::from_knots(vec![0.0], 0.5).is_err());
    }

    #[test]
    fn psi_1_is_abs_minus_one() {
        let psi = build_perfect_bspline(1).unwrap();
        for i in 0..=40 {
            let x = -1.0 + i as f64 / 20.0;
            assert_abs_diff_eq!(psi.eval(x), x.abs() - 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(
            sup_norm_of_derivative(&psi, 0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            sup_norm_of_derivative(&psi, 1).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn psi_2_fixture() {
        let psi = build_perfect_bspline(2).unwrap();
        // 0.875 - 1.0 + 0.125 from the three sign intervals.
        assert_abs_diff_eq!(psi.eval(1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.eval(-1.0), 0.0, epsilon = 1e-15);
        // psi_2' = x + 1, -x, x - 1 on the three pieces; psi_2(0) = 1/4.
        assert_abs_diff_eq!(psi.eval(0.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.eval(-0.5), 0.125, epsilon = 1e-15);
        assert_eq!(psi.sup_norms().len(), 3);
        assert_abs_diff_eq!(psi.sup_norms()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.sup_norms()[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.sup_norms()[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn psi_vanishes_left_and_highest_derivative_is_sign() {
        for degree in 1..=MAX_SPLINE_DEGREE {
            let psi = build_perfect_bspline(degree).unwrap();
            assert_eq!(psi.eval(-1.5), 0.0);
            for v in psi.left_endpoint_derivatives() {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
            }
            let top = psi.body().nth_derivative(degree);
            for (lo, hi, s) in psi.pattern().intervals() {
                assert_abs_diff_eq!(top.eval(0.5 * (lo + hi)), s, epsilon = 1e-9);
            }
            assert_abs_diff_eq!(
                sup_norm_of_derivative(&psi, degree).unwrap(),
                1.0,
                epsilon = 1e-9
            );
            assert!(psi.sup_norms().iter().all(|&m| m > 0.0));
        }
        assert!(build_perfect_bspline(0).is_err());
        assert!(build_perfect_bspline(MAX_SPLINE_DEGREE + 1).is_err());
    }

    #[test]
    fn psi_matches_repeated_antiderivative_of_sign() {
        for degree in 1..=10 {
            let psi = build_perfect_bspline(degree).unwrap();
            let other = psi.pattern().to_piecewise().nth_antiderivative(degree);
            for i in 0..=50 {
                let x = -1.0 + i as f64 / 25.0;
                assert_abs_diff_eq!(psi.eval(x), other.eval(x), epsilon = 1e-13);
            }
            // Continuity of psi and derivatives below the degree.
            for j in 0..degree {
                assert!(psi.body().nth_derivative(j).continuity_defect() <= 1e-10);
            }
        }
    }

    #[test]
    fn psi_right_endpoint_vanishes_for_bump_degrees() {
        for r in 1..=11 {
            let psi = build_perfect_bspline(r + 1).unwrap();
            for (j, v) in psi.right_endpoint_derivatives().iter().enumerate() {
                assert!(v.abs() <= 1e-9, "degree {} derivative {j}: {v}", r + 1);
            }
            // eval beyond 1 is the zero polynomial once all moments vanish.
            assert!(psi.eval(1.3).abs() <= 1e-9);
        }
    }

    #[test]
    fn sup_norms_dominate_dense_grid() {
        for degree in [2, 3, 5] {
            let psi = build_perfect_bspline(degree).unwrap();
            for j in 0..=degree {
                let grid = psi.body().grid_sup_abs_derivative(j, 20_001);
                let exact = psi.sup_norms()[j];
                assert!(exact >= grid * (1.0 - 1e-12));
                assert!(exact <= grid * (1.0 + 1e-3) + 1e-12);
            }
        }
    }

    #[test]
    fn scaled_bump_r1_unit_interval() {
        let class = SmoothnessClass::unit(1, 0.0, 1.0).unwrap();
        let bump = build_scaled_bump(0.0, 1.0, &class).unwrap();
        // m_0 = 1/4, m_1 = 1/2 for psi_2 gives alpha = min(4, 2) = 2.
        assert_abs_diff_eq!(bump.alpha(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bump.eval(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bump.eval(1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bump.eval_derivative(0.0, 1), 0.0, epsilon = 1e-15);
        assert!(bump.endpoint_residual(&class) <= 1e-9);
        assert_eq!(bump.eval(1.5), 0.0);
        assert!(build_scaled_bump(0.0, 2.0, &class).is_err());
        assert!(build_scaled_bump(1.0, 1.0, &class).is_err());
    }

    #[test]
    fn scaled_bump_second_derivative_bounded() {
        let class = SmoothnessClass::unit(2, 0.0, 1.0).unwrap();
        let bump = build_scaled_bump(0.0, 0.5, &class).unwrap();
        let rep = bump.check_membership(&class, 100_001);
        assert!(rep.passed, "{rep:?}");
        assert!(rep.grid_sup[2] <= 1.0 + 1e-12);
        assert!(bump.endpoint_residual(&class) <= 1e-9);
    }

    #[test]
    fn scaled_bump_with_unequal_bounds() {
        let class = SmoothnessClass::new(3, vec![0.01, 2.0, 5.0, 0.7], (-1.0, 2.0)).unwrap();
        let bump = build_scaled_bump(-0.3, 1.4, &class).unwrap();
        assert!(bump.check_membership(&class, 50_001).passed);
        assert!(bump.endpoint_residual(&class) <= 1e-9);
        let ext = bump.extended_on(-1.0, 2.0).unwrap();
        assert_eq!(ext.domain(), (-1.0, 2.0));
        assert_eq!(ext.eval(-0.5), 0.0);
        assert_abs_diff_eq!(ext.eval(0.5), bump.eval(0.5), epsilon = 1e-15);
    }

    #[test]
    fn phi_1_1_is_alpha_over_16() {
        // int (1-t)^2 sgn U_2 = 0.5, so phi = (1/4)(alpha/2)(0.5).
        assert_abs_diff_eq!(
            sign_pattern(1).unwrap().kernel_moment(2),
            0.5,
            epsilon = 1e-15
        );
        for alpha in [1.0, 0.3] {
            assert_relative_eq!(
                phi_r_m(1, 1, alpha).unwrap().value,
                alpha / 16.0,
                max_relative = 1e-15
            );
        }
        assert!(phi_r_m(1, 0, 1.0).is_err());
        assert!(phi_r_m(0, 1, 1.0).is_err());
    }

    #[test]
    fn phi_1_1_matches_quadrature_of_bump() {
        let class = SmoothnessClass::unit(1, -1.0, 1.0).unwrap();
        let bump = build_scaled_bump(-0.9, 0.9, &class).unwrap();
        let oracle = KfoldOracle::new(1e-14).breakpoints(bump.body().breakpoints());
        let quad = oracle.integrate(|x| bump.eval(x), -0.9, 0.9, 1).unwrap();
        let closed = 1.8f64.powi(2) * phi_r_m(1, 1, bump.alpha()).unwrap().value;
        assert_relative_eq!(quad, closed, max_relative = 1e-8);
    }

    #[test]
    fn phi_r_m_nonzero() {
        for r in 1..=6 {
            for m in 1..=6 {
                assert!(phi_r_m(r, m, 1.0).unwrap().value.abs() > 0.0);
            }
        }
    }

    #[test]
    fn bump_family_layout() {
        let class = SmoothnessClass::unit(1, 0.0, 2.0).unwrap();
        let fam = build_bump_family(&class, 4).unwrap();
        assert_eq!(fam.anchors(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(fam.bump(2).interval(), (1.0, 1.5));
        let single = build_bump_family(&SmoothnessClass::unit(1, 0.0, 1.0).unwrap(), 1).unwrap();
        assert_eq!(single.bump(0).interval(), (0.0, 1.0));
        for t in 0..=400 {
            let x = t as f64 / 200.0;
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert_eq!(fam.eval(i, x) * fam.eval(j, x), 0.0);
                    }
                }
            }
        }
        let wide = SmoothnessClass::unit(1, 0.0, 4.0).unwrap();
        assert!(build_bump_family(&wide, 2).is_err());
        assert!(build_bump_family(&wide, 0).is_err());
    }

    #[test]
    fn family_closed_form_special_cases() {
        let class = SmoothnessClass::unit(2, 0.0, 1.0).unwrap();
        let fam = build_bump_family(&class, 5).unwrap();
        let phi = fam.iterated_constants(4);
        let h = fam.h();
        for i in 0..5 {
            assert_relative_eq!(
                fam.bump_kfold_integral(i, 1).unwrap(),
                h.powi(3) * phi[0],
                max_relative = 1e-14
            );
        }
        for k in 1..=4 {
            assert_relative_eq!(
                fam.bump_kfold_integral(4, k).unwrap(),
                h.powi(2 + k as i32) * phi[k - 1],
                max_relative = 1e-14
            );
        }
        assert!(fam.bump_kfold_integral(5, 1).is_err());
        assert!(fam.bump_kfold_integral(0, 0).is_err());
    }

    #[test]
    fn family_integrals_match_nested_quadrature() {
        let class = SmoothnessClass::unit(1, 0.0, 2.0).unwrap();
        let fam = build_bump_family(&class, 4).unwrap();
        let g = |x: f64| fam.eval(1, x);
        let oracle = KfoldOracle::new(1e-14)
            .mode(OracleMode::Nested)
            .breakpoints(fam.bump(1).body().breakpoints());
        let quad = oracle.integrate(g, 0.0, 2.0, 2).unwrap();
        assert_relative_eq!(
            fam.bump_kfold_integral(1, 2).unwrap(),
            quad,
            max_relative = 1e-6
        );
    }

    #[test]
    fn partial_integral_cases() {
        let class = SmoothnessClass::unit(2, 0.0, 1.0).unwrap();
        let fam = build_bump_family(&class, 4).unwrap();
        for k in 1..=3 {
            for i in 0..4 {
                let a_i = fam.anchors()[i];
                let a_next = fam.anchors()[i + 1];
                assert_eq!(fam.bump_partial_kfold_integral(i, k, a_i).unwrap(), 0.0);
                assert_relative_eq!(
                    fam.bump_partial_kfold_integral(i, k, 1.0).unwrap(),
                    fam.bump_kfold_integral(i, k).unwrap(),
                    max_relative = 1e-12
                );
                // Middle branch at a_{i+1} against the tail formula just after it.
                let middle = fam.bump_partial_kfold_integral(i, k, a_next).unwrap();
                let phis = fam.iterated_constants(k);
                let tail_at_edge = fam.h().powi(2 + k as i32) * phis[k - 1];
                assert_abs_diff_eq!(middle, tail_at_edge, epsilon = 1e-10);
                if i < 3 {
                    let right = fam
                        .bump_partial_kfold_integral(i, k, a_next + 1e-12)
                        .unwrap();
                    assert_abs_diff_eq!(middle, right, epsilon = 1e-10);
                }
            }
        }
        assert!(fam.bump_partial_kfold_integral(0, 1, 1.5).is_err());
    }

    #[test]
    fn assemble_places_weighted_bumps() {
        let class = SmoothnessClass::unit(1, 0.0, 1.0).unwrap();
        let fam = build_bump_family(&class, 6).unwrap();
        let g = fam.assemble(&[(1, 0.5), (4, -1.0)]).unwrap();
        assert_eq!(g.domain(), (0.0, 1.0));
        for t in 0..=600 {
            let x = t as f64 / 600.0;
            let want = 0.5 * fam.eval(1, x) - fam.eval(4, x);
            assert_abs_diff_eq!(g.eval(x), want, epsilon = 1e-15);
        }
        assert!(fam.assemble(&[(1, 1.0), (1, 1.0)]).is_err());
        assert!(fam.assemble(&[(6, 1.0)]).is_err());
        let zero = fam.assemble(&[]).unwrap();
        assert_eq!(zero.sup_abs(), 0.0);
    }
}
