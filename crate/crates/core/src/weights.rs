//! Weight sequences `M = {M_n}` held in log-domain, and the scalar
//! functionals built on them: the p-characteristic κ(p,M), associated
//! sequences, regularity classes, Denjoy–Carleman verdicts and minorants.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    None,
    LogLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Constant { c: f64 },
    /// `M_n = (n!)^σ`
    Gevrey { sigma: f64 },
    Factorial,
    /// `M_n = exp(c (1-p)^{-n})`
    ExpChar { c: f64, p: f64 },
    /// `M_n = 1` for `n ≤ k`, `+∞` beyond.
    SobolevDegenerate { k: usize },
    /// `M_n = C_1 exp(c_0 (n+1)^{-1} (1-p)^{-n})`
    Minorant { c0: f64, p: f64, log_c1: f64 },
    Table { log_m: Vec<f64>, tail: TailRule },
}

/// `log M_n = family(n + shift) + log_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub family: Family,
    pub shift: usize,
    pub log_scale: f64,
}

fn ln_factorial(m: usize) -> f64 {
    if m < 2 {
        0.0
    } else {
        ln_gamma(m as f64 + 1.0)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p = {p} must lie in (0,1)")))
    }
}

impl WeightSequence {
    fn from_family(family: Family) -> Self {
        Self {
            family,
            shift: 0,
            log_scale: 0.0,
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::NonPositiveWeight { n: 0 });
        }
        Ok(Self::from_family(Family::Constant { c }))
    }

    pub fn gevrey(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gevrey exponent {sigma}")));
        }
        Ok(Self::from_family(Family::Gevrey { sigma }))
    }

    pub fn factorial() -> Self {
        Self::from_family(Family::Factorial)
    }

    pub fn exp_char(c: f64, p: f64) -> Result<Self> {
        check_p(p)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("expchar constant {c}")));
        }
        Ok(Self::from_family(Family::ExpChar { c, p }))
    }

    pub fn sobolev(k: usize) -> Self {
        Self::from_family(Family::SobolevDegenerate { k })
    }

    pub fn minorant_family(c0: f64, p: f64, log_c1: f64) -> Result<Self> {
        check_p(p)?;
        if !(c0 > 0.0 && c0.is_finite() && log_c1.is_finite()) {
            return Err(Error::InvalidParameter("minorant constants".into()));
        }
        Ok(Self::from_family(Family::Minorant { c0, p, log_c1 }))
    }

    pub fn table(log_m: Vec<f64>, tail: TailRule) -> Result<Self> {
        if log_m.is_empty() {
            return Err(Error::TableTooShort { len: 0 });
        }
        if tail == TailRule::LogLinear && log_m.len() < 2 {
            return Err(Error::TableTooShort { len: log_m.len() });
        }
        let mut seen_inf = false;
        for (n, &v) in log_m.iter().enumerate() {
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::NonPositiveWeight { n });
            }
            if v == f64::INFINITY {
                seen_inf = true;
            } else if seen_inf {
                return Err(Error::DegenerateInfinite { n });
            }
        }
        Ok(Self::from_family(Family::Table { log_m, tail }))
    }

    /// `log M'_n = log M_{n+k}`.
    pub fn shift(&self, k: usize) -> Self {
        match &self.family {
            Family::Constant { .. } => self.clone(),
            Family::Table { log_m, tail } => {
                let keep = if k < log_m.len() {
                    log_m[k..].to_vec()
                } else {
                    // shifting past the table: materialise from the tail rule
                    let v = self.log_m(k).unwrap_or(f64::INFINITY);
                    let w = self.log_m(k + 1).unwrap_or(f64::INFINITY);
                    vec![v, w]
                };
                Self {
                    family: Family::Table {
                        log_m: keep,
                        tail: *tail,
                    },
                    shift: 0,
                    log_scale: self.log_scale,
                }
            }
            _ => Self {
                family: self.family.clone(),
                shift: self.shift + k,
                log_scale: self.log_scale,
            },
        }
    }

    /// `M'_n = c M_n`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale {c}")));
        }
        let mut out = self.clone();
        out.log_scale += c.ln();
        Ok(out)
    }

    pub fn is_sobolev(&self) -> bool {
        matches!(self.family, Family::SobolevDegenerate { .. })
    }

    pub fn is_table(&self) -> bool {
        matches!(self.family, Family::Table { .. })
    }

    /// Largest index with a stored value, for tables without a tail rule.
    pub fn explicit_len(&self) -> Option<usize> {
        match &self.family {
            Family::Table {
                log_m,
                tail: TailRule::None,
            } => Some(log_m.len()),
            _ => None,
        }
    }

    /// `log M_n`; `+∞` is possible for degenerate sequences.
    pub fn log_m(&self, n: usize) -> Result<f64> {
        let m = n + self.shift;
        let base = match &self.family {
            Family::Constant { c } => c.ln(),
            Family::Gevrey { sigma } => sigma * ln_factorial(m),
            Family::Factorial => ln_factorial(m),
            Family::ExpChar { c, p } => c * (-(m as f64) * (1.0 - p).ln()).exp(),
            Family::SobolevDegenerate { k } => {
                if m <= *k {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Family::Minorant { c0, p, log_c1 } => {
                log_c1 + c0 * (-(m as f64) * (1.0 - p).ln()).exp() / (m as f64 + 1.0)
            }
            Family::Table { log_m, tail } => {
                if m < log_m.len() {
                    log_m[m]
                } else {
                    match tail {
                        TailRule::None => return Err(Error::OutOfRange { n }),
                        TailRule::LogLinear => {
                            let last = log_m[log_m.len() - 1];
                            let prev = log_m[log_m.len() - 2];
                            if last == f64::INFINITY {
                                f64::INFINITY
                            } else {
                                last + (m - (log_m.len() - 1)) as f64 * (last - prev)
                            }
                        }
                    }
                }
            }
        };
        Ok(base + self.log_scale)
    }

    /// `e^{log_w} log M_n` evaluated without forming `log M_n` when it
    /// would overflow.
    pub fn weighted_log_m(&self, n: usize, log_w: f64) -> Result<f64> {
        let m = (n + self.shift) as f64;
        let w = log_w.exp();
        match &self.family {
            Family::ExpChar { c, p } => {
                Ok(c * (log_w - m * (1.0 - p).ln()).exp() + w * self.log_scale)
            }
            Family::Minorant { c0, p, log_c1 } => Ok(c0 * (log_w - m * (1.0 - p).ln()).exp() / (m + 1.0)
                + w * (log_c1 + self.log_scale)),
            _ => {
                let v = self.log_m(n)?;
                Ok(if v == 0.0 { 0.0 } else { w * v })
            }
        }
    }

    /// Evaluate `log M_n` on `0..=n_end`, rejecting `-∞`/NaN.
    pub fn log_m_range(&self, n_end: usize) -> Result<Vec<f64>> {
        (0..=n_end)
            .map(|n| {
                let v = self.log_m(n)?;
                if v.is_nan() || v == f64::NEG_INFINITY {
                    Err(Error::NonPositiveWeight { n })
                } else {
                    Ok(v)
                }
            })
            .collect()
    }

    /// Largest index that can be evaluated, capped at `n_max`.
    pub fn eval_limit(&self, n_max: usize) -> usize {
        match self.explicit_len() {
            Some(len) => n_max.min(len - 1),
            None => n_max,
        }
    }

    /// Bound on `Σ_{j>j0} (1-p)^j |log M_j|`, when one is certifiable.
    pub fn tail_majorant(&self, p: f64, j0: usize) -> Option<f64> {
        let q = 1.0 - p;
        let s = self.shift as f64;
        let lsc = self.log_scale.abs();
        let geo = q.powi(j0 as i32 + 1) / p;
        match &self.family {
            Family::Constant { c } => Some((c.ln() + self.log_scale).abs() * geo),
            Family::Gevrey { sigma } => gevrey_tail(*sigma, s, lsc, q, j0),
            Family::Factorial => gevrey_tail(1.0, s, lsc, q, j0),
            Family::ExpChar { c, p: pb } => {
                let qb = 1.0 - pb;
                let r = q / qb;
                if r >= 1.0 {
                    return None;
                }
                Some(c * qb.powf(-s) * r.powi(j0 as i32 + 1) / (1.0 - r) + lsc * geo)
            }
            Family::Minorant { c0, p: pn, log_c1 } => {
                let qn = 1.0 - pn;
                let r = q / qn;
                if r >= 1.0 {
                    return None;
                }
                Some(
                    c0 * qn.powf(-s) * r.powi(j0 as i32 + 1) / ((j0 as f64 + s + 2.0) * (1.0 - r))
                        + (log_c1.abs() + lsc) * geo,
                )
            }
            Family::SobolevDegenerate { .. } => None,
            Family::Table { log_m, tail } => {
                if *tail == TailRule::None {
                    return None;
                }
                let last_idx = log_m.len() - 1;
                let a = log_m[last_idx] + self.log_scale;
                let b = log_m[last_idx] - log_m[last_idx - 1];
                if !a.is_finite() || !b.is_finite() {
                    return None;
                }
                let mut s = CompensatedSum::new();
                for (j, lm) in log_m.iter().enumerate().take(last_idx + 1).skip(j0 + 1) {
                    s.add(q.powi(j as i32) * (lm + self.log_scale).abs());
                }
                // beyond the table: |A + B (j - N)| ≤ |A| + |B|(j - N)
                let start = (j0 + 1).max(last_idx + 1);
                let qs = q.powi(start as i32);
                let sum_q = qs / p;
                let sum_jq = qs * (start as f64) / p + qs * q / (p * p);
                s.add(a.abs() * sum_q + b.abs() * (sum_jq - last_idx as f64 * sum_q));
                Some(s.value())
            }
        }
    }
}

/// Tail bound for `|L| + σ ln((j+s)!)` ≤ `g(j) = |L| + σ (j+s) ln(j+s)`;
/// `ln g` is concave once `j + s ≥ 4|L|/(3σ)`, so the term ratio is
/// non-increasing from there on.
fn gevrey_tail(sigma: f64, s: f64, lsc: f64, q: f64, j0: usize) -> Option<f64> {
    let g = |j: f64| lsc + sigma * (j + s) * (j + s).max(1.0).ln();
    let j1 = j0 as f64 + 1.0;
    if sigma == 0.0 {
        return Some(lsc * q.powf(j1) / (1.0 - q));
    }
    if j1 + s < (4.0 * lsc / (3.0 * sigma)).max(1.0) {
        return None;
    }
    let g1 = g(j1);
    if g1 == 0.0 {
        let g2 = g(j1 + 1.0);
        let ratio = q * g(j1 + 2.0) / g2;
        if ratio >= 1.0 {
            return None;
        }
        return Some(q.powf(j1 + 1.0) * g2 / (1.0 - ratio));
    }
    let ratio = q * g(j1 + 1.0) / g1;
    if ratio >= 1.0 {
        return None;
    }
    Some(q.powf(j1) * g1 / (1.0 - ratio))
}

// ---------------------------------------------------------------------
// log-convexity and the product bound

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogConvexity {
    pub convex: bool,
    pub first_violation: Option<usize>,
}

/// `log M_{n+1} + log M_{n-1} ≥ 2 log M_n` for interior `n` of
/// `[n_lo, n_hi]`, with relative tolerance 1e-12.
pub fn is_log_convex(m: &WeightSequence, n_lo: usize, n_hi: usize) -> Result<LogConvexity> {
    let hi = m.eval_limit(n_hi);
    if hi < n_lo + 2 {
        return Ok(LogConvexity {
            convex: true,
            first_violation: None,
        });
    }
    let v: Vec<f64> = (n_lo..=hi).map(|n| m.log_m(n)).collect::<Result<_>>()?;
    for (i, w) in v.windows(3).enumerate() {
        let (a, b, c) = (w[0], w[1], w[2]);
        if c == f64::INFINITY {
            continue;
        }
        let slack = a + c - 2.0 * b;
        let tol = 1e-12 * (1.0f64).max(a.abs()).max(b.abs()).max(c.abs());
        if slack < -tol {
            return Ok(LogConvexity {
                convex: false,
                first_violation: Some(n_lo + i + 1),
            });
        }
    }
    Ok(LogConvexity {
        convex: true,
        first_violation: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductBound {
    /// `min_j [log M_0 + log M_n - log M_j - log M_{n-j}]`
    pub min_slack: f64,
    pub argmin: usize,
}

/// Slack in `M_j M_{n-j} ≤ M_0 M_n`, `0 ≤ j ≤ n`.
pub fn product_bound_check(m: &WeightSequence, n: usize) -> Result<ProductBound> {
    let lc = is_log_convex(m, 0, n)?;
    if let Some(v) = lc.first_violation {
        return Err(Error::NotLogConvex { n: v });
    }
    let v = m.log_m_range(n)?;
    let mut best = ProductBound {
        min_slack: f64::INFINITY,
        argmin: 0,
    };
    for j in 0..=n {
        let s = if v[n] == f64::INFINITY {
            f64::INFINITY
        } else {
            (v[0] - v[j]) + (v[n] - v[n - j])
        };
        if s < best.min_slack {
            best = ProductBound {
                min_slack: s,
                argmin: j,
            };
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------
// the p-characteristic

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaStatus {
    Finite,
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    /// Number of terms summed.
    pub terms: usize,
    pub partial_sum: f64,
    /// Every term from index 1 on is at least this large (or, for the
    /// harmonic case, at least this constant over `n + 1`).
    pub term_lower_bound: f64,
    pub harmonic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub status: KappaStatus,
    pub value: Option<f64>,
    pub partial_sum: f64,
    pub truncation_index: usize,
    pub tail_bound: f64,
    pub witness: Option<DivergenceWitness>,
    pub degenerate: bool,
    pub closed_form: bool,
}

impl KappaResult {
    pub fn is_finite(&self) -> bool {
        self.status == KappaStatus::Finite
    }
    pub fn is_diverged(&self) -> bool {
        self.status == KappaStatus::Diverged
    }
}

pub const DEFAULT_N_MAX: usize = 200;
pub const DEFAULT_KAPPA_TOL: f64 = 1e-12;

/// `κ(p, M) = Σ_{j≥1} (1-p)^j log M_j`.
pub fn kappa(m: &WeightSequence, p: f64, tol: f64, n_max: usize) -> Result<KappaResult> {
    check_p(p)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let q = 1.0 - p;
    let lq = q.ln();
    let check_hi = m.eval_limit(n_max.min(100));
    m.log_m_range(check_hi)?;
    if let Some(v) = is_log_convex(m, 0, check_hi)?.first_violation {
        return Err(Error::NotLogConvex { n: v });
    }

    let partial = |terms: usize| -> Result<f64> {
        let mut s = CompensatedSum::new();
        for j in 1..=terms {
            s.add(m.weighted_log_m(j, j as f64 * lq)?);
        }
        Ok(s.value())
    };
    let s = m.shift as f64;

    match &m.family {
        Family::SobolevDegenerate { k } => {
            let first_inf = (k + 1).saturating_sub(m.shift).max(1);
            Ok(KappaResult {
                status: KappaStatus::Diverged,
                value: None,
                partial_sum: f64::INFINITY,
                truncation_index: first_inf,
                tail_bound: f64::INFINITY,
                witness: Some(DivergenceWitness {
                    terms: first_inf,
                    partial_sum: f64::INFINITY,
                    term_lower_bound: f64::INFINITY,
                    harmonic: false,
                }),
                degenerate: true,
                closed_form: true,
            })
        }
        Family::Constant { c } => {
            let l = c.ln() + m.log_scale;
            Ok(closed(l * q / p))
        }
        Family::ExpChar { c, p: pb } => {
            let qb = 1.0 - pb;
            let r = q / qb;
            if r >= 1.0 {
                let lower = c * qb.powf(-s) - m.log_scale.abs() * q;
                Ok(diverged(partial(n_max)?, n_max, lower, false))
            } else {
                Ok(closed(c * qb.powf(-s) * r / (1.0 - r) + m.log_scale * q / p))
            }
        }
        Family::Minorant { c0, p: pn, log_c1 } => {
            let qn = 1.0 - pn;
            let r = q / qn;
            let lin = (log_c1 + m.log_scale) * q / p;
            if r >= 1.0 {
                let lower = c0 * qn.powf(-s);
                Ok(diverged(partial(n_max)?, n_max, lower, true))
            } else if m.shift == 0 {
                Ok(closed(c0 * (-(1.0 - r).ln() - r) / r + lin))
            } else {
                numeric(m, p, tol, n_max)
            }
        }
        Family::Table { log_m, tail } => {
            let last = *log_m.last().unwrap();
            if last == f64::INFINITY {
                let first_inf = log_m.iter().position(|v| *v == f64::INFINITY).unwrap();
                return Ok(KappaResult {
                    status: KappaStatus::Diverged,
                    value: None,
                    partial_sum: f64::INFINITY,
                    truncation_index: first_inf,
                    tail_bound: f64::INFINITY,
                    witness: Some(DivergenceWitness {
                        terms: first_inf,
                        partial_sum: f64::INFINITY,
                        term_lower_bound: f64::INFINITY,
                        harmonic: false,
                    }),
                    degenerate: true,
                    closed_form: false,
                });
            }
            if *tail == TailRule::None {
                let terms = m.eval_limit(n_max);
                return Ok(KappaResult {
                    status: KappaStatus::Inconclusive,
                    value: None,
                    partial_sum: partial(terms)?,
                    truncation_index: terms,
                    tail_bound: f64::INFINITY,
                    witness: None,
                    degenerate: false,
                    closed_form: false,
                });
            }
            numeric(m, p, tol, n_max)
        }
        Family::Gevrey { .. } | Family::Factorial => numeric(m, p, tol, n_max),
    }
}

fn closed(value: f64) -> KappaResult {
    KappaResult {
        status: KappaStatus::Finite,
        value: Some(value),
        partial_sum: value,
        truncation_index: 0,
        tail_bound: 0.0,
        witness: None,
        degenerate: false,
        closed_form: true,
    }
}

fn diverged(partial_sum: f64, terms: usize, lower: f64, harmonic: bool) -> KappaResult {
    KappaResult {
        status: KappaStatus::Diverged,
        value: None,
        partial_sum,
        truncation_index: terms,
        tail_bound: f64::INFINITY,
        witness: Some(DivergenceWitness {
            terms,
            partial_sum,
            term_lower_bound: lower,
            harmonic,
        }),
        degenerate: false,
        closed_form: true,
    }
}

fn numeric(m: &WeightSequence, p: f64, tol: f64, n_max: usize) -> Result<KappaResult> {
    let lq = (1.0 - p).ln();
    let mut s = CompensatedSum::new();
    for j in 1..=n_max {
        s.add(m.weighted_log_m(j, j as f64 * lq)?);
        if let Some(t) = m.tail_majorant(p, j) {
            if t < tol {
                return Ok(KappaResult {
                    status: KappaStatus::Finite,
                    value: Some(s.value()),
                    partial_sum: s.value(),
                    truncation_index: j,
                    tail_bound: t,
                    witness: None,
                    degenerate: false,
                    closed_form: false,
                });
            }
        }
    }
    Ok(KappaResult {
        status: KappaStatus::Inconclusive,
        value: None,
        partial_sum: s.value(),
        truncation_index: n_max,
        tail_bound: m.tail_majorant(p, n_max).unwrap_or(f64::INFINITY),
        witness: None,
        degenerate: false,
        closed_form: false,
    })
}

// ---------------------------------------------------------------------
// associated sequence

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociatedN {
    pub n: usize,
    pub log_n: f64,
    pub terms: usize,
    pub truncation_bound: f64,
}

/// `log N_{n,θ} = θ(1-p)^{-n} + Σ_{j≥1} (1-p)^{j-1} p log M_{n+j}`,
/// truncated at `K` terms (doubled until the certified tail is below
/// `tol`, up to 2^16 terms).
pub fn associated_n(
    m: &WeightSequence,
    p: f64,
    theta: f64,
    n: usize,
    k: usize,
    tol: f64,
) -> Result<AssociatedN> {
    check_p(p)?;
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!("theta = {theta}")));
    }
    let kap = kappa(m, p, DEFAULT_KAPPA_TOL.max(tol * 1e-3), DEFAULT_N_MAX)?;
    match kap.status {
        KappaStatus::Diverged => return Err(Error::DivergentTail),
        KappaStatus::Inconclusive if m.explicit_len().is_some() => {
            return Err(Error::Inconclusive("kappa(p, M) not certified for this table".into()))
        }
        _ => {}
    }
    associated_n_unchecked(m, p, theta, n, k, tol)
}

pub(crate) fn associated_n_unchecked(
    m: &WeightSequence,
    p: f64,
    theta: f64,
    n: usize,
    k: usize,
    tol: f64,
) -> Result<AssociatedN> {
    let q = 1.0 - p;
    let lq = q.ln();
    let lp = p.ln();
    let head = if theta == 0.0 {
        0.0
    } else {
        theta * (-(n as f64) * lq).exp()
    };
    let mut k = k.max(1);
    loop {
        let mut s = CompensatedSum::new();
        s.add(head);
        for j in 1..=k {
            s.add(m.weighted_log_m(n + j, (j as f64 - 1.0) * lq + lp)?);
        }
        let tail = m
            .tail_majorant(p, n + k)
            .map(|t| p * t * (-(n as f64 + 1.0) * lq).exp())
            .unwrap_or(f64::INFINITY);
        if tail <= tol || k >= 1 << 16 {
            return Ok(AssociatedN {
                n,
                log_n: s.value(),
                terms: k,
                truncation_bound: tail,
            });
        }
        k *= 2;
    }
}

// ---------------------------------------------------------------------
// Denjoy–Carleman

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quasianalyticity {
    Quasianalytic,
    NonQuasianalytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Analytic,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcVerdict {
    pub verdict: Quasianalyticity,
    pub confidence: Confidence,
    pub note: String,
}

fn dc(verdict: Quasianalyticity, confidence: Confidence, note: &str) -> DcVerdict {
    DcVerdict {
        verdict,
        confidence,
        note: note.to_string(),
    }
}

/// Quasianalyticity of `C_M` via `Σ M_n / M_{n+1}`.
pub fn denjoy_carleman(m: &WeightSequence, n_max: usize) -> Result<DcVerdict> {
    use Confidence::*;
    use Quasianalyticity::*;
    let hi = m.eval_limit(n_max.min(100));
    if let Some(v) = is_log_convex(m, 0, hi)?.first_violation {
        return Err(Error::NotLogConvex { n: v });
    }
    Ok(match &m.family {
        Family::Constant { .. } => dc(Quasianalytic, Analytic, "terms are identically 1"),
        Family::Factorial => dc(Quasianalytic, Analytic, "terms 1/(n+1): harmonic series"),
        Family::Gevrey { sigma } => {
            if *sigma <= 1.0 {
                dc(Quasianalytic, Analytic, "terms (n+1)^-sigma with sigma <= 1 diverge")
            } else {
                dc(NonQuasianalytic, Analytic, "terms (n+1)^-sigma with sigma > 1 converge")
            }
        }
        Family::ExpChar { .. } | Family::Minorant { .. } => dc(
            NonQuasianalytic,
            Analytic,
            "log M_{n+1} - log M_n grows geometrically",
        ),
        Family::SobolevDegenerate { .. } => dc(
            NonQuasianalytic,
            Analytic,
            "degenerate: terms vanish beyond the Sobolev order",
        ),
        Family::Table { log_m, tail } => {
            if *tail == TailRule::LogLinear {
                let n = log_m.len() - 1;
                let slope = log_m[n] - log_m[n - 1];
                if slope.is_finite() {
                    return Ok(dc(
                        Quasianalytic,
                        Analytic,
                        "log-linear tail: terms are eventually constant",
                    ));
                }
            }
            let terms: Vec<f64> = (0..hi)
                .map(|n| Ok((m.log_m(n)? - m.log_m(n + 1)?).exp()))
                .collect::<Result<_>>()?;
            table_dc(&terms)?
        }
    })
}

/// Window heuristics on `t_n = M_n/M_{n+1}` (index `n` starting at 0)
/// over the top half: Raabe's form of the ratio test for summability,
/// and `n t_n` bounded below for divergence.
pub(crate) fn table_dc(terms: &[f64]) -> Result<DcVerdict> {
    let n = terms.len();
    if n < 8 {
        return Err(Error::Inconclusive("too few terms for a window test".into()));
    }
    let lo = n / 2;
    let raabe: Vec<f64> = (lo..n - 1)
        .map(|i| {
            if terms[i + 1] == 0.0 {
                f64::INFINITY
            } else {
                (i + 1) as f64 * (terms[i] / terms[i + 1] - 1.0)
            }
        })
        .collect();
    let r_min = raabe.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = raabe.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if r_min > 1.05 {
        return Ok(dc(
            Quasianalyticity::NonQuasianalytic,
            Confidence::Heuristic,
            "ratio test (Raabe form) indicates a convergent series",
        ));
    }
    let scaled: Vec<f64> = (lo..n).map(|i| (i + 1) as f64 * terms[i]).collect();
    let first = scaled[0];
    let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    if r_max < 1.05 && first > 0.0 && min >= 0.5 * first {
        return Ok(dc(
            Quasianalyticity::Quasianalytic,
            Confidence::Heuristic,
            "n * t_n bounded below on the window",
        ));
    }
    Err(Error::Inconclusive("neither the ratio test nor the harmonic test fired".into()))
}

// ---------------------------------------------------------------------
// regularity classes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityClause {
    /// `liminf (1-p)^n log M_n > 0`
    I,
    /// `(1-p)^n log M_n → 0` and `n log n ≤ (δ' + o(1)) log M_n`, `δ' < 1`
    Ii,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRegularity {
    pub regular: bool,
    pub clause: Option<RegularityClause>,
    /// Estimate of `liminf (1-p)^n log M_n` (may be `+∞`).
    pub c0: f64,
    /// Estimate of `liminf log M_n / (n log n)` (may be `+∞`).
    pub delta: f64,
    pub confidence: Confidence,
    /// Clause (ii) is tested as `delta > 1`, i.e. `δ' = 1/delta < 1`.
    pub convention: String,
}

const DELTA_CONVENTION: &str =
    "clause (ii) tested as liminf log M_n/(n log n) > 1 (reciprocal of the definition's delta)";

/// p-regularity; defined only when κ(p,M) = +∞.
pub fn p_regular(m: &WeightSequence, p: f64, n_max: usize) -> Result<PRegularity> {
    check_p(p)?;
    let kap = kappa(m, p, DEFAULT_KAPPA_TOL, n_max)?;
    if kap.is_finite() {
        return Err(Error::NotApplicable("kappa(p, M) is finite".into()));
    }
    if kap.degenerate {
        return Err(Error::NotApplicable("degenerate Sobolev weights".into()));
    }
    let q = 1.0 - p;
    let s = m.shift as f64;
    let mk = |regular: bool, clause, c0, delta, confidence| PRegularity {
        regular,
        clause,
        c0,
        delta,
        confidence,
        convention: DELTA_CONVENTION.to_string(),
    };
    match &m.family {
        Family::ExpChar { c, p: pb } => {
            let qb = 1.0 - pb;
            let c0 = if q > qb { f64::INFINITY } else { c * qb.powf(-s) };
            Ok(mk(true, Some(RegularityClause::I), c0, f64::INFINITY, Confidence::Analytic))
        }
        Family::Minorant { p: pn, .. } => {
            let qn = 1.0 - pn;
            if q > qn {
                Ok(mk(true, Some(RegularityClause::I), f64::INFINITY, f64::INFINITY, Confidence::Analytic))
            } else {
                Ok(mk(true, Some(RegularityClause::Ii), 0.0, f64::INFINITY, Confidence::Analytic))
            }
        }
        _ => {
            let hi = m.eval_limit(n_max);
            if hi < 8 {
                return Err(Error::Inconclusive("too few entries for a window estimate".into()));
            }
            let lo = hi / 2;
            let lq = q.ln();
            let mut scaled = Vec::new();
            let mut ratio = Vec::new();
            for n in lo..=hi {
                scaled.push(m.weighted_log_m(n, n as f64 * lq)?);
                let nf = n as f64;
                ratio.push(m.log_m(n)? / (nf * nf.ln()));
            }
            let c0 = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            let delta = ratio.iter().cloned().fold(f64::INFINITY, f64::min);
            let first = scaled[0];
            let last = *scaled.last().unwrap();
            if c0 > 0.0 && last >= 0.75 * first {
                Ok(mk(true, Some(RegularityClause::I), c0, delta, Confidence::Heuristic))
            } else if last < 0.75 * first && delta > 1.0 {
                Ok(mk(true, Some(RegularityClause::Ii), c0.max(0.0), delta, Confidence::Heuristic))
            } else {
                Ok(mk(false, None, c0, delta, Confidence::Heuristic))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClause {
    EpsilonFit,
    Summable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRegularity {
    pub regular: bool,
    pub via: Option<DecayClause>,
    /// Fitted `ε` with `M_n/M_{n+1} ≥ ε^n`, if the fit succeeded.
    pub epsilon: Option<f64>,
    pub summable: Option<bool>,
    pub confidence: Confidence,
}

/// Decay-regularity; defined only when κ(p,M) < ∞.
pub fn decay_regular(m: &WeightSequence, p: f64, n_max: usize) -> Result<DecayRegularity> {
    check_p(p)?;
    let kap = kappa(m, p, DEFAULT_KAPPA_TOL, n_max)?;
    if kap.is_diverged() {
        return Err(Error::NotApplicable("kappa(p, M) diverges".into()));
    }
    use Confidence::*;
    use DecayClause::*;
    let s = m.shift as f64;
    let out = |via: Option<DecayClause>, epsilon: Option<f64>, summable: Option<bool>, confidence| DecayRegularity {
        regular: via.is_some(),
        via,
        epsilon,
        summable,
        confidence,
    };
    match &m.family {
        Family::Constant { .. } => Ok(out(Some(EpsilonFit), Some(1.0), Some(false), Analytic)),
        Family::Gevrey { sigma } => {
            // Δ_n / n = σ ln(n+1+s)/n is largest at n = 1
            let eps = (-sigma * (2.0 + s).ln()).exp();
            Ok(out(Some(EpsilonFit), Some(eps), Some(*sigma > 1.0), Analytic))
        }
        Family::Factorial => {
            let eps = 1.0 / (2.0 + s);
            Ok(out(Some(EpsilonFit), Some(eps), Some(false), Analytic))
        }
        Family::ExpChar { .. } | Family::Minorant { .. } => Ok(out(Some(Summable), None, Some(true), Analytic)),
        Family::SobolevDegenerate { .. } => Err(Error::NotApplicable("degenerate Sobolev weights".into())),
        Family::Table { .. } => {
            let hi = m.eval_limit(n_max);
            if hi < 8 {
                return Err(Error::Inconclusive("too few entries for a window estimate".into()));
            }
            let mut lambda = Vec::with_capacity(hi);
            let mut terms = Vec::with_capacity(hi);
            for n in 1..hi {
                let d = m.log_m(n + 1)? - m.log_m(n)?;
                lambda.push(d / n as f64);
                terms.push((-d).exp());
            }
            let half = lambda.len() / 2;
            let early = lambda[..half].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let late = lambda[half..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let epsilon = if late <= early { Some((-early.max(0.0)).exp()) } else { None };
            let summable = table_dc(&terms)
                .ok()
                .map(|v| v.verdict == Quasianalyticity::NonQuasianalytic);
            let via = if epsilon.is_some() {
                Some(EpsilonFit)
            } else if summable == Some(true) {
                Some(Summable)
            } else {
                None
            };
            Ok(out(via, epsilon, summable, Heuristic))
        }
    }
}

// ---------------------------------------------------------------------
// minorant

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorantInfo {
    pub c0: f64,
    /// `c0` as measured; `+∞` when clause (i) holds with infinite liminf.
    pub measured_c0: f64,
    pub log_c1: f64,
    pub scan_limit: usize,
}

/// `N_n = C_1 exp(c_0 (n+1)^{-1} (1-p)^{-n})` with `C_1` the smallest
/// ratio `M_n / exp(c_0 (n+1)^{-1} (1-p)^{-n})` over the scanned range.
pub fn minorant(m: &WeightSequence, p: f64, n_max: usize) -> Result<(WeightSequence, MinorantInfo)> {
    let reg = p_regular(m, p, n_max)?;
    if reg.clause != Some(RegularityClause::I) {
        return Err(Error::NotApplicable("clause (i) of p-regularity does not hold".into()));
    }
    let c0 = if reg.c0.is_finite() { reg.c0 } else { 1.0 };
    if !(c0 > 0.0) {
        return Err(Error::NotApplicable("measured c0 is not positive".into()));
    }
    let q = 1.0 - p;
    let lq = q.ln();
    let scan = m.eval_limit(n_max);
    let mut log_c1 = f64::INFINITY;
    for n in 0..=scan {
        let growth = c0 * (-(n as f64) * lq).exp() / (n as f64 + 1.0);
        let lm = m.log_m(n)?;
        if !lm.is_finite() || !growth.is_finite() {
            break;
        }
        log_c1 = log_c1.min(lm - growth);
    }
    let seq = WeightSequence::minorant_family(c0, p, log_c1)?;
    Ok((
        seq,
        MinorantInfo {
            c0,
            measured_c0: reg.c0,
            log_c1,
            scan_limit: scan,
        },
    ))
}

/// Routes `M` through its minorant when clause (i) holds; otherwise
/// returns `M` unchanged.
pub fn regularised_for_mollifier(m: &WeightSequence, p: f64, n_max: usize) -> Result<(WeightSequence, Option<MinorantInfo>)> {
    let reg = p_regular(m, p, n_max)?;
    if !reg.regular {
        return Err(Error::NotApplicable("sequence is not p-regular".into()));
    }
    if reg.clause == Some(RegularityClause::I) {
        let (n, info) = minorant(m, p, n_max)?;
        Ok((n, Some(info)))
    } else {
        Ok((m.clone(), None))
    }
}

/// `liminf log M_n / (n log n)` on the window, used for the Carleman
/// design parameters.
pub fn delta_estimate(m: &WeightSequence, p: f64, n_max: usize) -> Result<f64> {
    Ok(p_regular(m, p, n_max)?.delta)
}
