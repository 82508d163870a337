//! Dense polynomials in a local variable, ascending coefficients.

use crate::numerics::CompensatedSum;

pub fn eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

/// Value and first derivative by Horner.
pub fn eval_with_derivative(c: &[f64], t: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut d = 0.0;
    for &x in c.iter().rev() {
        d = d * t + p;
        p = p * t + x;
    }
    (p, d)
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(j, &x)| j as f64 * x)
        .collect()
}

/// Antiderivative vanishing at 0.
pub fn antiderivative(c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(0.0);
    out.extend(c.iter().enumerate().map(|(j, &x)| x / (j as f64 + 1.0)));
    out
}

/// Coefficients of t ↦ p(h + t).
pub fn taylor_shift(c: &[f64], h: f64) -> Vec<f64> {
    let mut out = c.to_vec();
    if h == 0.0 {
        return out;
    }
    let n = out.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            out[j] += h * out[j + 1];
        }
    }
    out
}

pub fn add_into(acc: &mut Vec<f64>, c: &[f64], scale: f64) {
    if acc.len() < c.len() {
        acc.resize(c.len(), 0.0);
    }
    for (a, &x) in acc.iter_mut().zip(c) {
        *a += scale * x;
    }
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Drop trailing zero coefficients, keeping at least one.
pub fn trim(c: &mut Vec<f64>) {
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    if c.is_empty() {
        c.push(0.0);
    }
}

pub fn degree(c: &[f64]) -> usize {
    c.iter().rposition(|&x| x != 0.0).unwrap_or(0)
}

/// Exact integral over [0,w].
pub fn integral(c: &[f64], w: f64) -> f64 {
    let mut s = CompensatedSum::new();
    let mut pw = w;
    for (j, &x) in c.iter().enumerate() {
        s.add(x * pw / (j as f64 + 1.0));
        pw *= w;
    }
    s.value()
}

/// Upper bound on |p| over [0,w] from absolute coefficients.
pub fn abs_bound(c: &[f64], w: f64) -> f64 {
    let aw = w.abs();
    c.iter().rev().fold(0.0, |acc, &x| acc * aw + x.abs())
}

/// Real roots of `c` in the open interval (lo, hi), sorted. Touching zeros
/// (even multiplicity) are reported once. `zero_tol` is the absolute size
/// below which a critical value counts as a zero.
pub fn real_roots(c: &[f64], lo: f64, hi: f64, zero_tol: f64) -> Vec<f64> {
    let mut c = c.to_vec();
    trim(&mut c);
    let d = degree(&c);
    if d == 0 || !(hi > lo) {
        return Vec::new();
    }
    if d == 1 {
        let r = -c[0] / c[1];
        return if r > lo && r < hi { vec![r] } else { Vec::new() };
    }
    let dc = derivative(&c);
    let crit = real_roots(&dc, lo, hi, 0.0);
    let mut knots = Vec::with_capacity(crit.len() + 2);
    knots.push(lo);
    knots.extend(crit.iter().copied());
    knots.push(hi);
    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fa = eval(&c, a);
        let fb = eval(&c, b);
        if fa == 0.0 && a > lo {
            push_root(&mut roots, a);
            continue;
        }
        if fa.signum() != fb.signum() && fa != 0.0 && fb != 0.0 {
            push_root(&mut roots, bisect_newton(&c, a, b, fa));
        }
    }
    for &x in &crit {
        if eval(&c, x).abs() <= zero_tol {
            push_root(&mut roots, x);
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + a.abs()));
    roots.retain(|&r| r > lo && r < hi);
    roots
}

fn push_root(roots: &mut Vec<f64>, r: f64) {
    roots.push(r);
}

/// Root of a polynomial known to change sign once on [a,b].
fn bisect_newton(c: &[f64], mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = eval(c, m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
        if (b - a) <= 1e-12 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..4 {
        let (p, dp) = eval_with_derivative(c, x);
        if dp == 0.0 {
            break;
        }
        let nx = x - p / dp;
        if !(nx >= a && nx <= b) {
            break;
        }
        x = nx;
    }
    x
}
