//! Compensated summation and Gauss–Legendre quadrature.

use std::sync::OnceLock;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Sum in iteration order with compensation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut s = CompensatedSum::new();
    s.extend(iter);
    s.value()
}

pub const GL_POINTS: usize = 16;

/// Nodes on [-1,1] and weights of the 16-point Gauss–Legendre rule.
pub fn gauss_legendre_16() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static RULE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    RULE.get_or_init(legendre_rule::<GL_POINTS>)
}

fn legendre_rule<const N: usize>() -> ([f64; N], [f64; N]) {
    let mut nodes = [0.0; N];
    let mut weights = [0.0; N];
    let n = N as f64;
    for i in 0..N {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(N, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(N, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One application of the 16-point rule on [a,b].
pub fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_16();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = CompensatedSum::new();
    for (x, w) in nodes.iter().zip(weights.iter()) {
        s.add(w * f(mid + half * x));
    }
    half * s.value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOutcome {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
}

/// Adaptive halving with the 16-point rule; intervals are accepted when the
/// two-halves estimate agrees with the whole-interval estimate to `tol`
/// relative (or `abs_floor` absolute).
pub fn adaptive_gl<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    abs_floor: f64,
    max_depth: u32,
) -> QuadratureOutcome {
    let whole = gl16(f, a, b);
    let mut acc = CompensatedSum::new();
    let mut err = CompensatedSum::new();
    let mut converged = true;
    let mut stack = vec![(a, b, whole, 0u32)];
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl16(f, lo, mid);
        let right = gl16(f, mid, hi);
        let refined = left + right;
        let diff = (refined - est).abs();
        if diff <= tol * refined.abs() || diff <= abs_floor || mid <= lo || mid >= hi {
            acc.add(refined);
            err.add(diff);
        } else if depth >= max_depth {
            converged = false;
            acc.add(refined);
            err.add(diff);
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    QuadratureOutcome {
        value: acc.value(),
        error_estimate: err.value(),
        converged,
    }
}

/// `log Σ exp(x_i)`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + compensated_sum(xs.iter().map(|x| (x - m).exp())).ln()
}
