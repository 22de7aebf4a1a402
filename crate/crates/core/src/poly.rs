//! Polynomials and piecewise polynomials.
//!
//! Single polynomials are plain coefficient slices in ascending power order.
//! A [`PiecewisePolynomial`] stores each piece in the local variable
//! `y = x - x_i`, where `x_i` is the left breakpoint of the piece. The local
//! basis keeps narrow pieces far from the origin well conditioned and makes
//! translated copies share coefficients.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluates `sum c[i] x^i` by Horner's rule.
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * i as f64)
        .collect()
}

/// Antiderivative vanishing at zero.
pub fn antiderivative(coeffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    out.push(0.0);
    out.extend(coeffs.iter().enumerate().map(|(i, &c)| c / (i + 1) as f64));
    out
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients of `(y + shift)^n` in powers of `y`.
pub fn shifted_power(n: usize, shift: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| binomial(n, i) * shift.powi((n - i) as i32))
        .collect()
}

fn degree_of(coeffs: &[f64]) -> Option<usize> {
    coeffs.iter().rposition(|&c| c != 0.0)
}

/// Real roots of a polynomial inside `[lo, hi]`.
///
/// Roots are isolated recursively between the critical points of the
/// polynomial (where it is monotone) and refined by bisection. Roots of even
/// multiplicity that do not produce a sign change are only reported when the
/// polynomial evaluates to exactly zero there.
pub fn roots_in(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let Some(deg) = degree_of(coeffs) else {
        return Vec::new();
    };
    if deg == 0 || lo > hi {
        return Vec::new();
    }
    let coeffs = &coeffs[..=deg];
    let mut marks = vec![lo];
    marks.extend(roots_in(&derivative(coeffs), lo, hi));
    marks.push(hi);

    let mut roots: Vec<f64> = Vec::new();
    for w in marks.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let f0 = horner(coeffs, x0);
        let f1 = horner(coeffs, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            roots.push(bisect(coeffs, x0, x1, f0));
        }
    }
    if horner(coeffs, hi) == 0.0 {
        roots.push(hi);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= f64::EPSILON * b.abs().max(1.0));
    roots
}

fn bisect(coeffs: &[f64], mut x0: f64, mut x1: f64, mut f0: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (x0 + x1);
        if mid <= x0 || mid >= x1 {
            break;
        }
        let fm = horner(coeffs, mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == f0.signum() {
            x0 = mid;
            f0 = fm;
        } else {
            x1 = mid;
        }
    }
    0.5 * (x0 + x1)
}

/// Maximum of `|p|` over `[lo, hi]` from endpoints and interior critical points.
pub fn sup_abs_on(coeffs: &[f64], lo: f64, hi: f64) -> f64 {
    let mut best = horner(coeffs, lo).abs().max(horner(coeffs, hi).abs());
    for x in roots_in(&derivative(coeffs), lo, hi) {
        best = best.max(horner(coeffs, x).abs());
    }
    best
}

/// A piecewise polynomial on `[x_0, x_N]` with pieces in local power bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePolynomial {
    /// `pieces[i]` holds the coefficients of piece `i` in powers of
    /// `x - breakpoints[i]`.
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::invalid(
                "piecewise polynomial needs at least two breakpoints",
            ));
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::invalid(format!(
                "{} breakpoints require {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!(
                "breakpoints must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        let pieces = pieces
            .into_iter()
            .map(|p| if p.is_empty() { vec![0.0] } else { p })
            .collect();
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    pub fn zero(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![vec![0.0]])
    }

    /// Builds a piecewise polynomial from consecutive `(left, right, coeffs)`
    /// segments. Each segment must start where the previous one ended.
    pub fn from_segments<I>(segments: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64, Vec<f64>)>,
    {
        let mut breakpoints = Vec::new();
        let mut pieces = Vec::new();
        for (left, right, coeffs) in segments {
            match breakpoints.last() {
                None => breakpoints.push(left),
                Some(&last) if last != left => {
                    return Err(Error::invalid(format!(
                        "segment starting at {left} does not continue from {last}"
                    )))
                }
                Some(_) => {}
            }
            breakpoints.push(right);
            pieces.push(coeffs);
        }
        Self::new(breakpoints, pieces)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn max_degree(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| degree_of(p).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Index of the piece containing `x`; pieces are closed on the left and
    /// points outside the domain map to the nearest end piece.
    pub fn locate(&self, x: f64) -> usize {
        let last = self.pieces.len() - 1;
        match self.breakpoints.partition_point(|&b| b <= x) {
            0 => 0,
            i => (i - 1).min(last),
        }
    }

    /// Value at `x`. Outside the domain the end pieces are extrapolated.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.locate(x);
        horner(&self.pieces[i], x - self.breakpoints[i])
    }

    pub fn eval_derivative(&self, x: f64, order: usize) -> f64 {
        let i = self.locate(x);
        let mut c = self.pieces[i].clone();
        for _ in 0..order {
            c = derivative(&c);
        }
        horner(&c, x - self.breakpoints[i])
    }

    /// Value of piece `i` at its right breakpoint (left limit there).
    pub fn piece_right_value(&self, i: usize) -> f64 {
        horner(
            &self.pieces[i],
            self.breakpoints[i + 1] - self.breakpoints[i],
        )
    }

    pub fn derivative(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| derivative(p)).collect(),
        }
    }

    pub fn nth_derivative(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |p, _| p.derivative())
    }

    /// Continuous antiderivative vanishing at the left end of the domain.
    pub fn antiderivative(&self) -> Self {
        let mut acc = 0.0;
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (i, p) in self.pieces.iter().enumerate() {
            let mut q = antiderivative(p);
            q[0] = acc;
            acc = horner(&q, self.breakpoints[i + 1] - self.breakpoints[i]);
            pieces.push(q);
        }
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces,
        }
    }

    pub fn nth_antiderivative(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |p, _| p.antiderivative())
    }

    /// Exact integral over the whole domain.
    pub fn integral(&self) -> f64 {
        let anti = self.antiderivative();
        anti.piece_right_value(anti.num_pieces() - 1)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|c| c * factor).collect())
                .collect(),
        }
    }

    /// Composes with the affine map sending `[left, right]` onto the current
    /// domain and multiplies values by `value_scale`.
    pub fn affine_image(&self, left: f64, right: f64, value_scale: f64) -> Result<Self> {
        if !(left < right) {
            return Err(Error::invalid(format!(
                "empty target interval [{left}, {right}]"
            )));
        }
        let (s0, s1) = self.domain();
        let stretch = (right - left) / (s1 - s0);
        let last = self.breakpoints.len() - 1;
        let breakpoints = self
            .breakpoints
            .iter()
            .enumerate()
            .map(|(i, &s)| match i {
                0 => left,
                i if i == last => right,
                _ => left + (s - s0) * stretch,
            })
            .collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let mut pow = value_scale;
                p.iter()
                    .map(|&c| {
                        let v = c * pow;
                        pow /= stretch;
                        v
                    })
                    .collect()
            })
            .collect();
        Self::new(breakpoints, pieces)
    }

    /// Exact `sup |p|` over the domain using per-piece critical points.
    pub fn sup_abs(&self) -> f64 {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, p)| sup_abs_on(p, 0.0, self.breakpoints[i + 1] - self.breakpoints[i]))
            .fold(0.0, f64::max)
    }

    /// Largest jump between adjacent pieces at interior breakpoints.
    pub fn continuity_defect(&self) -> f64 {
        (0..self.pieces.len() - 1)
            .map(|i| (self.piece_right_value(i) - self.pieces[i + 1][0]).abs())
            .fold(0.0, f64::max)
    }

    /// `max |p^(order)|` over a uniform grid of `points` nodes.
    pub fn grid_sup_abs_derivative(&self, order: usize, points: usize) -> f64 {
        let d = self.nth_derivative(order);
        let (a, b) = self.domain();
        let points = points.max(2);
        (0..points)
            .map(|i| {
                let x = a + (b - a) * i as f64 / (points - 1) as f64;
                d.eval(x).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Writes one CSV record per piece: left, right, c0, c1, ...
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let width = self.max_degree() + 1;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["left".to_string(), "right".to_string()];
        header.extend((0..width).map(|i| format!("c{i}")));
        w.write_record(&header)?;
        for (i, p) in self.pieces.iter().enumerate() {
            let mut rec = vec![
                self.breakpoints[i].to_string(),
                self.breakpoints[i + 1].to_string(),
            ];
            rec.extend((0..width).map(|j| p.get(j).copied().unwrap_or(0.0).to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn horner_and_derivative() {
        let p = [1.0, -2.0, 3.0];
        assert_eq!(horner(&p, 2.0), 9.0);
        assert_eq!(derivative(&p), vec![-2.0, 6.0]);
        assert_eq!(antiderivative(&[2.0, 3.0]), vec![0.0, 2.0, 1.5]);
    }

    #[test]
    fn binomials_and_factorials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(factorial(0), 1.0);
    }

    #[test]
    fn shifted_power_matches_expansion() {
        let c = shifted_power(3, 2.0);
        for y in [-1.0, 0.3, 2.5] {
            assert_abs_diff_eq!(horner(&c, y), (y + 2.0f64).powi(3), epsilon = 1e-12);
        }
    }

    #[test]
    fn roots_of_cubic() {
        // (x - 0.2)(x + 0.5)(x - 0.9)
        let p = [0.09, -0.37, -0.6, 1.0];
        let r = roots_in(&p, -1.0, 1.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-0.5, 0.2, 0.9]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert!(roots_in(&[1.0, 0.0, 1.0], -2.0, 2.0).is_empty());
        assert!(roots_in(&[3.0], -2.0, 2.0).is_empty());
    }

    #[test]
    fn sup_abs_finds_interior_extremum() {
        // 1 - (x - 0.3)^2 on [0, 1]
        let p = [0.91, 0.6, -1.0];
        assert_abs_diff_eq!(sup_abs_on(&p, 0.0, 1.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(PiecewisePolynomial::new(vec![0.0], vec![]).is_err());
        assert!(PiecewisePolynomial::new(vec![0.0, 1.0], vec![]).is_err());
        assert!(PiecewisePolynomial::new(vec![0.0, 0.0], vec![vec![1.0]]).is_err());
        assert!(PiecewisePolynomial::from_segments(vec![
            (0.0, 1.0, vec![1.0]),
            (1.5, 2.0, vec![1.0]),
        ])
        .is_err());
    }

    #[test]
    fn hat_function_roundtrip() {
        // |x| on [-1, 1]
        let p =
            PiecewisePolynomial::new(vec![-1.0, 0.0, 1.0], vec![vec![1.0, -1.0], vec![0.0, 1.0]])
                .unwrap();
        assert_eq!(p.eval(-0.5), 0.5);
        assert_eq!(p.eval(1.0), 1.0);
        assert_eq!(p.eval_derivative(0.5, 1), 1.0);
        assert_abs_diff_eq!(p.integral(), 1.0, epsilon = 1e-15);
        assert_eq!(p.continuity_defect(), 0.0);
        assert_eq!(p.sup_abs(), 1.0);
        let anti = p.antiderivative();
        assert_abs_diff_eq!(anti.eval(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(anti.derivative().eval(0.3), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn affine_image_rescales_argument_and_value() {
        let p =
            PiecewisePolynomial::new(vec![-1.0, 0.0, 1.0], vec![vec![1.0, -1.0], vec![0.0, 1.0]])
                .unwrap();
        let q = p.affine_image(2.0, 3.0, 0.5).unwrap();
        assert_eq!(q.domain(), (2.0, 3.0));
        for x in [2.0, 2.2, 2.5, 2.9, 3.0] {
            let s = 2.0 * (x - 2.0) - 1.0;
            assert_abs_diff_eq!(q.eval(x), 0.5 * p.eval(s), epsilon = 1e-14);
            assert_abs_diff_eq!(
                q.eval_derivative(x, 1),
                0.5 * 2.0 * p.eval_derivative(s, 1),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let p =
            PiecewisePolynomial::new(vec![0.0, 1.0, 2.0], vec![vec![1.0], vec![1.0, 2.0]]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "left,right,c0,c1\n0,1,1,0\n1,2,1,2\n");
    }

    proptest! {
        #[test]
        fn antiderivative_inverts_derivative(
            c in prop::collection::vec(-3.0f64..3.0, 1..6),
            x in 0.0f64..2.0,
        ) {
            let p = PiecewisePolynomial::new(vec![0.0, 0.7, 2.0], vec![c.clone(), c]).unwrap();
            let back = p.antiderivative().derivative();
            prop_assert!((back.eval(x) - p.eval(x)).abs() <= 1e-12 * (1.0 + p.eval(x).abs()));
        }

        #[test]
        fn sup_abs_dominates_grid(c in prop::collection::vec(-3.0f64..3.0, 1..7)) {
            let p = PiecewisePolynomial::new(vec![-1.0, 0.25, 1.0], vec![c.clone(), c]).unwrap();
            let exact = p.sup_abs();
            let grid = p.grid_sup_abs_derivative(0, 2001);
            prop_assert!(exact >= grid * (1.0 - 1e-12));
            let slack = 1e-3 * p.derivative().sup_abs();
            prop_assert!(exact <= grid + slack + 1e-12);
        }
    }
}
