//! Compactly supported piecewise polynomials and finite atomic measures.
//!
//! Each piece is stored in the local basis `(x - x_i)^j` of its left
//! breakpoint. Outside `[x_0, x_m]` the function vanishes.

mod atomic;
mod norms;
mod oracle;

pub use atomic::{chain_difference_measure, AtomicMeasure, Distributional};
pub use norms::DEFAULT_LP_TOL;
pub use oracle::{grid_oracle_convolve, uniform_grid, uniform_oracle_convolve};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::poly;

pub const DEGREE_CAP: usize = 64;

/// Relative tolerance for merging nearly coincident breakpoints.
pub const BREAK_TOL: f64 = 4e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise")]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawPiecewise {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl TryFrom<RawPiecewise> for PiecewisePoly {
    type Error = Error;
    fn try_from(raw: RawPiecewise) -> Result<Self> {
        PiecewisePoly::new(raw.breakpoints, raw.pieces)
    }
}

/// `H_a = a^{-1} 1_{[0,a]}`.
pub fn box_fn(a: f64) -> Result<PiecewisePoly> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::NonPositiveWidth(a));
    }
    Ok(PiecewisePoly {
        breakpoints: vec![0.0, a],
        pieces: vec![vec![1.0 / a]],
    })
}

/// `Φ = H_{a_1} * ... * H_{a_k}`, support `[0, Σ a_l]`.
pub fn iterated_box(widths: &[f64]) -> Result<PiecewisePoly> {
    if widths.is_empty() {
        return Err(Error::InvalidParameter("empty width list".into()));
    }
    if let Some(&a) = widths.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::NonPositiveWidth(a));
    }
    if widths.len() > DEGREE_CAP + 1 {
        return Err(Error::DegreeCapExceeded {
            degree: widths.len() - 1,
            cap: DEGREE_CAP,
        });
    }
    let mut sorted = widths.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut f = box_fn(sorted[0])?;
    for &a in &sorted[1..] {
        f = f.convolve_box(a)?;
    }
    Ok(f)
}

/// Sorted union of two breakpoint lists, merging points closer than
/// `tol`.
pub(crate) fn merge_breaks(a: &[f64], b: &[f64], tol: f64) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&last) if x - last <= tol => {}
            _ => out.push(x),
        }
    }
    out
}

fn scale_of(breaks: &[f64]) -> f64 {
    match (breaks.first(), breaks.last()) {
        (Some(&a), Some(&b)) => a.abs().max(b.abs()).max(b - a).max(f64::MIN_POSITIVE),
        _ => 1.0,
    }
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.is_empty() && pieces.is_empty() {
            return Ok(Self::zero());
        }
        if breakpoints.len() != pieces.len() + 1 || pieces.is_empty() {
            return Err(Error::BadBreakpoints);
        }
        if breakpoints.iter().any(|x| !x.is_finite())
            || breakpoints.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::BadBreakpoints);
        }
        for c in &pieces {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteCoefficient);
            }
            let d = poly::degree(c);
            if d > DEGREE_CAP {
                return Err(Error::DegreeCapExceeded {
                    degree: d,
                    cap: DEGREE_CAP,
                });
            }
        }
        let pieces = pieces
            .into_iter()
            .map(|mut c| {
                if c.is_empty() {
                    c.push(0.0);
                }
                c
            })
            .collect();
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    pub fn zero() -> Self {
        Self {
            breakpoints: Vec::new(),
            pieces: Vec::new(),
        }
    }

    /// A polynomial in the global variable `x`, restricted to `[lo, hi]`.
    pub fn from_global_poly(lo: f64, hi: f64, coeffs: &[f64]) -> Result<Self> {
        Self::new(vec![lo, hi], vec![poly::taylor_shift(coeffs, lo)])
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
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

    pub fn support(&self) -> Option<(f64, f64)> {
        Some((*self.breakpoints.first()?, *self.breakpoints.last()?))
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|c| poly::degree(c)).max().unwrap_or(0)
    }

    fn width(&self, i: usize) -> f64 {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    /// Index of the piece whose half-open interval `[x_i, x_{i+1})`
    /// contains `x`.
    fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.support()?;
        if x < lo || x >= hi {
            return None;
        }
        let i = self.breakpoints.partition_point(|&b| b <= x);
        Some(i - 1)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => poly::eval(&self.pieces[i], x - self.breakpoints[i]),
            None => 0.0,
        }
    }

    /// Left limit at `x`.
    pub fn eval_left(&self, x: f64) -> f64 {
        let Some((lo, hi)) = self.support() else {
            return 0.0;
        };
        if x <= lo || x > hi {
            return 0.0;
        }
        let i = self.breakpoints.partition_point(|&b| b < x) - 1;
        poly::eval(&self.pieces[i], x - self.breakpoints[i])
    }

    /// Exact integral.
    pub fn mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for (i, c) in self.pieces.iter().enumerate() {
            s.add(poly::integral(c, self.width(i)));
        }
        s.value()
    }

    /// Exact integral over `[u, v]`.
    pub fn integral_on(&self, u: f64, v: f64) -> f64 {
        let mut s = CompensatedSum::new();
        for (i, c) in self.pieces.iter().enumerate() {
            let (b0, b1) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let lo = u.max(b0);
            let hi = v.min(b1);
            if hi > lo {
                let anti = poly::antiderivative(c);
                s.add(poly::eval(&anti, hi - b0) - poly::eval(&anti, lo - b0));
            }
        }
        s.value()
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|x| x * c).collect())
                .collect(),
        }
    }

    /// `x ↦ f(x - h)`.
    pub fn translate(&self, h: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|x| x + h).collect(),
            pieces: self.pieces.clone(),
        }
    }

    /// `x ↦ f((x - x0)/s)` for `s > 0`, i.e. dilation about `x0`.
    pub fn dilate(&self, x0: f64, s: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|x| x0 + s * x).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| {
                    let mut f = 1.0;
                    p.iter()
                        .map(|&c| {
                            let v = c * f;
                            f /= s;
                            v
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.linear_combination(&[(1.0, other)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.linear_combination(&[(-1.0, other)])
    }

    /// `self + Σ c_i g_i` on the union of breakpoints.
    pub fn linear_combination(&self, terms: &[(f64, &Self)]) -> Self {
        let mut all: Vec<(f64, &Self)> = vec![(1.0, self)];
        all.extend(terms.iter().copied());
        sum_of(&all)
    }

    /// Drop breakpoints between pieces that agree as polynomials and trim
    /// vanishing pieces at the ends.
    pub fn simplify(&self, tol: f64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut breaks = vec![self.breakpoints[0]];
        let mut pieces: Vec<Vec<f64>> = Vec::new();
        for (i, c) in self.pieces.iter().enumerate() {
            if let Some(prev) = pieces.last() {
                let shifted = poly::taylor_shift(prev, self.breakpoints[i] - breaks[breaks.len() - 2]);
                let n = shifted.len().max(c.len());
                let same = (0..n).all(|j| {
                    let a = shifted.get(j).copied().unwrap_or(0.0);
                    let b = c.get(j).copied().unwrap_or(0.0);
                    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
                });
                if same {
                    *breaks.last_mut().unwrap() = self.breakpoints[i + 1];
                    continue;
                }
            }
            pieces.push(c.clone());
            breaks.push(self.breakpoints[i + 1]);
        }
        while pieces.first().is_some_and(|c| c.iter().all(|&x| x == 0.0)) {
            pieces.remove(0);
            breaks.remove(0);
        }
        while pieces.last().is_some_and(|c| c.iter().all(|&x| x == 0.0)) {
            pieces.pop();
            breaks.pop();
        }
        if pieces.is_empty() {
            return Self::zero();
        }
        Self {
            breakpoints: breaks,
            pieces,
        }
    }

    /// Exact `f * H_a` via `a^{-1}(F(x) - F(x - a))`.
    pub fn convolve_box(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NonPositiveWidth(a));
        }
        if self.is_zero() {
            return Ok(Self::zero());
        }
        let deg = self.degree() + 1;
        if deg > DEGREE_CAP {
            return Err(Error::DegreeCapExceeded {
                degree: deg,
                cap: DEGREE_CAP,
            });
        }
        let b = &self.breakpoints;
        let n = self.pieces.len();
        let shifted: Vec<f64> = b.iter().map(|x| x + a).collect();
        let tol = BREAK_TOL * scale_of(&[b[0], b[n] + a]);
        let ys = merge_breaks(b, &shifted, tol);

        let anti_left: Vec<Vec<f64>> = self.pieces.iter().map(|c| poly::antiderivative(c)).collect();
        let anti_right: Vec<Vec<f64>> = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, c)| poly::antiderivative(&poly::taylor_shift(c, self.width(i))))
            .collect();
        let masses: Vec<f64> = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, c)| poly::integral(c, self.width(i)))
            .collect();
        let window: Vec<Vec<f64>> = self.pieces.iter().map(|c| window_difference(c, a)).collect();

        let out: Vec<Vec<f64>> = ys
            .par_windows(2)
            .map(|w| {
                let (y0, y1) = (w[0], w[1]);
                let m = 0.5 * (y0 + y1);
                let ml = m - a;
                let start = b.partition_point(|&x| x <= ml).saturating_sub(1);
                let end = b.partition_point(|&x| x < m).min(n);
                let mut acc = vec![0.0; deg + 1];
                let mut direct = vec![0.0; deg + 1];
                let mut full = CompensatedSum::new();
                for i in start..end {
                    let (b0, b1) = (b[i], b[i + 1]);
                    if b1 <= ml || b0 >= m {
                        continue;
                    }
                    let hi_in = b0 < m && m < b1;
                    let lo_in = b0 < ml && ml < b1;
                    match (lo_in, hi_in) {
                        (false, false) => full.add(masses[i]),
                        (false, true) => {
                            poly::add_into(&mut acc, &poly::taylor_shift(&anti_left[i], y0 - b0), 1.0)
                        }
                        (true, false) => poly::add_into(
                            &mut acc,
                            &poly::taylor_shift(&anti_right[i], y0 - a - b1),
                            -1.0,
                        ),
                        (true, true) => {
                            poly::add_into(&mut direct, &poly::taylor_shift(&window[i], y0 - b0), 1.0)
                        }
                    }
                }
                acc[0] += full.value();
                for (x, d) in acc.iter_mut().zip(direct) {
                    *x = *x / a + d;
                }
                acc
            })
            .collect();
        Ok(Self {
            breakpoints: ys,
            pieces: out,
        })
    }

    /// Pointwise derivative on each open piece.
    pub fn regular_derivative(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|c| poly::derivative(c)).collect(),
        }
    }

    /// Jumps `f(x+) - f(x-)` at every breakpoint, including the support
    /// ends. Jumps below `rel_tol` times the largest endpoint value are
    /// treated as continuity.
    pub fn jumps(&self, rel_tol: f64) -> AtomicMeasure {
        if self.is_zero() {
            return AtomicMeasure::empty();
        }
        let n = self.pieces.len();
        let left_vals: Vec<f64> = (0..n).map(|i| self.pieces[i][0]).collect();
        let right_vals: Vec<f64> = (0..n).map(|i| poly::eval(&self.pieces[i], self.width(i))).collect();
        let scale = left_vals
            .iter()
            .chain(right_vals.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let thresh = rel_tol * scale;
        let mut atoms = Vec::new();
        for k in 0..=n {
            let before = if k == 0 { 0.0 } else { right_vals[k - 1] };
            let after = if k == n { 0.0 } else { left_vals[k] };
            let j = after - before;
            if j.abs() > thresh {
                atoms.push((self.breakpoints[k], j));
            }
        }
        AtomicMeasure::from_sorted_unchecked(atoms)
    }

    /// Distributional derivative of order `n`. Jumps at the last order are
    /// returned as atoms; jumps at lower orders would produce derivatives
    /// of Dirac masses and are rejected.
    pub fn derivative(&self, n: usize) -> Result<Distributional> {
        const JUMP_TOL: f64 = 1e-9;
        let mut cur = self.clone();
        if n == 0 {
            return Ok(Distributional {
                regular: cur,
                singular: AtomicMeasure::empty(),
            });
        }
        for order in 1..=n {
            let jumps = cur.jumps(JUMP_TOL);
            let reg = cur.regular_derivative();
            if order == n {
                return Ok(Distributional {
                    regular: reg,
                    singular: jumps,
                });
            }
            if !jumps.is_empty() {
                return Err(Error::DistributionalDerivative { order });
            }
            cur = reg;
        }
        unreachable!()
    }

    /// Largest and smallest values over the whole line (zero included
    /// when the support is bounded).
    pub fn extrema(&self) -> (f64, f64) {
        match self.support() {
            Some((lo, hi)) => {
                let (mn, mx) = self.extrema_on(lo, hi);
                (mn.min(0.0), mx.max(0.0))
            }
            None => (0.0, 0.0),
        }
    }

    /// Exact min and max of `f` on `[u, v] ∩ supp`, counting both one-sided
    /// limits at breakpoints. Points of `[u,v]` outside the support
    /// contribute 0.
    pub fn extrema_on(&self, u: f64, v: f64) -> (f64, f64) {
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        let Some((lo, hi)) = self.support() else {
            return (0.0, 0.0);
        };
        if u < lo || v > hi {
            mn = 0.0;
            mx = 0.0;
        }
        let pieces: Vec<(f64, f64)> = (0..self.pieces.len())
            .into_par_iter()
            .filter_map(|i| {
                let (b0, b1) = (self.breakpoints[i], self.breakpoints[i + 1]);
                let l = u.max(b0);
                let r = v.min(b1);
                if r < l {
                    return None;
                }
                Some(piece_extrema(&self.pieces[i], l - b0, r - b0))
            })
            .collect();
        for (a, b) in pieces {
            mn = mn.min(a);
            mx = mx.max(b);
        }
        if !mn.is_finite() {
            (0.0, 0.0)
        } else {
            (mn, mx)
        }
    }

    /// Exact `sup |f|` from per-piece critical points.
    pub fn sup_norm(&self) -> f64 {
        let (mn, mx) = self.extrema();
        mn.abs().max(mx.abs())
    }

    /// Primitive `F(x) = ∫_{-∞}^x f` on the support, and its constant
    /// value to the right of the support.
    pub fn primitive(&self) -> (Self, f64) {
        if self.is_zero() {
            return (Self::zero(), 0.0);
        }
        let mut acc = CompensatedSum::new();
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (i, c) in self.pieces.iter().enumerate() {
            let mut a = poly::antiderivative(c);
            a[0] = acc.value();
            acc.add(poly::integral(c, self.width(i)));
            pieces.push(a);
        }
        (
            Self {
                breakpoints: self.breakpoints.clone(),
                pieces,
            },
            acc.value(),
        )
    }

    /// `n + 1` equally spaced samples over the support.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let Some((lo, hi)) = self.support() else {
            return Vec::new();
        };
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / n as f64;
                (x, self.eval(x))
            })
            .collect()
    }
}

fn piece_extrema(c: &[f64], l: f64, r: f64) -> (f64, f64) {
    let dc = poly::derivative(c);
    let mut mn = poly::eval(c, l).min(poly::eval(c, r));
    let mut mx = poly::eval(c, l).max(poly::eval(c, r));
    for t in poly::real_roots(&dc, l, r, 0.0) {
        let v = poly::eval(c, t);
        mn = mn.min(v);
        mx = mx.max(v);
    }
    (mn, mx)
}

/// Coefficients in `u` of `a^{-1}(A(u) - A(u - a))`, with `A` the
/// antiderivative of `c`; the division by `a` is carried out symbolically.
fn window_difference(c: &[f64], a: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    for (j, &cj) in c.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        let jp = j + 1;
        let mut binom = 1.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..=j {
            let sign = if (jp - i) % 2 == 0 { 1.0 } else { -1.0 };
            out[i] -= cj / jp as f64 * binom * sign * a.powi((j - i) as i32);
            binom = binom * (jp - i) as f64 / (i + 1) as f64;
        }
    }
    out
}

fn sum_of(terms: &[(f64, &PiecewisePoly)]) -> PiecewisePoly {
    let live: Vec<&(f64, &PiecewisePoly)> = terms
        .iter()
        .filter(|(c, f)| *c != 0.0 && !f.is_zero())
        .collect();
    if live.is_empty() {
        return PiecewisePoly::zero();
    }
    let mut breaks: Vec<f64> = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, f) in &live {
        let (a, b) = f.support().unwrap();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let tol = BREAK_TOL * scale_of(&[lo, hi]);
    for (_, f) in &live {
        breaks = merge_breaks(&breaks, &f.breakpoints, tol);
    }
    let deg = live.iter().map(|(_, f)| f.degree()).max().unwrap_or(0);
    let pieces: Vec<Vec<f64>> = breaks
        .windows(2)
        .map(|w| {
            let m = 0.5 * (w[0] + w[1]);
            let mut acc = vec![0.0; deg + 1];
            for (c, f) in &live {
                if let Some(i) = f.locate(m) {
                    let shifted = poly::taylor_shift(&f.pieces[i], w[0] - f.breakpoints[i]);
                    poly::add_into(&mut acc, &shifted, *c);
                }
            }
            acc
        })
        .collect();
    PiecewisePoly {
        breakpoints: breaks,
        pieces,
    }
}
