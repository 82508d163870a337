//! Invisible mollifiers: non-negative unit-mass box-spline chains with
//! small support and small Sobolev or Carleman quasinorm.
//!
//! Widths are held in log-domain because the schedules shrink
//! doubly-exponentially. Only the prefix of widths that can be resolved in
//! `f64` relative to the leading width is materialised as a
//! [`PiecewisePoly`]; norms of derivatives of the full chain come from the
//! factorisation `Φ^{(n)} = D_n * Φ_{n+1,∞}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{hermite_derivative_sup, HermiteFunction};
use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, log_sum_exp, CompensatedSum};
use crate::pwpoly::{iterated_box, PiecewisePoly, DEFAULT_LP_TOL};
use crate::weights::{kappa, p_regular, regularised_for_mollifier, MinorantInfo, WeightSequence, DEFAULT_KAPPA_TOL, DEFAULT_N_MAX};

/// Widths below this fraction of the leading one are not materialised.
pub const RESOLVE_RATIO: f64 = 1e-9;
/// At most this many boxes are convolved explicitly.
pub const MATERIALIZE_CAP: usize = 12;
pub const K_START: usize = 8;
/// Shortest tameness window for Carleman certificates, whatever `n_check`.
pub const TAMENESS_MIN_WINDOW: usize = 12;
pub const K_MAX: usize = 4096;
const MASS_TOL: f64 = 1e-12;
const NONNEG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Exact up to quadrature and an explicit tail enclosure.
    Computed,
    /// Rigorous upper bound only.
    Bound,
}

/// `‖Φ^{(n)}‖_p^p` in log-domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderNorm {
    pub n: usize,
    /// Upper value.
    pub log_value: f64,
    /// Lower enclosure (`-inf` when only a bound is known).
    pub log_lower: f64,
    pub kind: NormKind,
}

/// A box chain `H_{a_1} * H_{a_2} * ...` given by log-widths, plus an
/// upper bound `tail` on the summed widths past the listed ones (the
/// chain continues with unspecified smaller boxes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogChain {
    log_a: Vec<f64>,
    tail: f64,
    /// `suffix[j] = log Σ_{l≥j} a_l`, tail included.
    #[serde(skip)]
    suffix: Vec<f64>,
}

impl LogChain {
    pub fn new(log_a: Vec<f64>, tail: f64) -> Result<Self> {
        if log_a.is_empty() {
            return Err(Error::InvalidParameter("empty width list".into()));
        }
        if let Some((index, &w)) = log_a.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(Error::UnderflowWidth { index: index + 1, log_width: w });
        }
        if !(tail >= 0.0 && tail.is_finite()) {
            return Err(Error::InvalidParameter(format!("tail bound {tail}")));
        }
        let mut suffix = vec![0.0; log_a.len() + 1];
        suffix[log_a.len()] = tail.ln();
        for j in (0..log_a.len()).rev() {
            suffix[j] = log_sum_exp(&[log_a[j], suffix[j + 1]]);
        }
        Ok(Self { log_a, tail, suffix })
    }

    pub fn from_widths(a: &[f64]) -> Result<Self> {
        if let Some(&w) = a.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::NonPositiveWidth(w));
        }
        Self::new(a.iter().map(|w| w.ln()).collect(), 0.0)
    }

    pub fn len(&self) -> usize {
        self.log_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_a.is_empty()
    }

    pub fn log_widths(&self) -> &[f64] {
        &self.log_a
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// `log Σ_{l>j} a_l` (0-based `j`: widths from index `j` on).
    pub fn log_suffix(&self, j: usize) -> f64 {
        self.suffix[j.min(self.log_a.len())]
    }

    pub fn support_len(&self) -> f64 {
        self.suffix[0].exp()
    }

    /// `a_j ≥ Σ_{l>j} a_l` for the first `n` widths. Then the `2^n`
    /// translates in `D_n * Φ_{n+1,∞}` have disjoint supports.
    pub fn super_increasing_through(&self, n: usize) -> bool {
        (0..n.min(self.log_a.len())).all(|j| self.log_a[j] >= self.suffix[j + 1] - 1e-12)
    }

    /// The prefix of widths with `a_l ≥ RESOLVE_RATIO · a_1`, convolved
    /// explicitly, and the number of boxes used.
    ///
    /// Widths are snapped to a dyadic grid fine enough for the support, so
    /// every breakpoint is an exact sum and thin pieces keep their true
    /// width. Without this a piece of width `1e-9 a_1` carries a relative
    /// endpoint error near `1e-7`.
    pub fn materialize(&self) -> Result<(PiecewisePoly, usize)> {
        let a1 = self.log_a[0].exp();
        if !(a1 > 0.0) {
            return Err(Error::UnderflowWidth {
                index: 1,
                log_width: self.log_a[0],
            });
        }
        let widths: Vec<f64> = resolvable(&self.log_a, 0).iter().map(|w| w * a1).collect();
        let total: f64 = widths.iter().sum();
        let q = 2f64.powi(total.log2().ceil() as i32 - 52);
        let widths: Vec<f64> = widths.iter().map(|w| ((w / q).round() * q).max(q)).collect();
        Ok((iterated_box(&widths)?, widths.len()))
    }

    /// Normalised remainder `Φ_{n+1,∞}(a_{n+1} x) a_{n+1}`: resolvable
    /// prefix widths and the summed normalised widths left out.
    fn remainder(&self, n: usize) -> (Vec<f64>, f64) {
        let base = self.log_a[n];
        let widths = resolvable(&self.log_a, n);
        let used = n + widths.len();
        let rest = (self.suffix[used] - base).exp();
        (widths, if used == self.log_a.len() && self.tail == 0.0 { 0.0 } else { rest })
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if n >= self.log_a.len() {
            if self.tail == 0.0 {
                return Err(Error::DistributionalDerivative { order: n });
            }
            return Err(Error::NotApplicable(format!(
                "order {n} needs more than the {} listed widths",
                self.log_a.len()
            )));
        }
        Ok(())
    }

    /// `log [2^n (a_1⋯a_{n+1})^{-p} Σ_{l≥n+1} a_l]`, the atomic bound on
    /// `‖Φ^{(n)}‖_p^p`.
    pub fn log_atomic_bound(&self, n: usize, p: f64) -> Result<f64> {
        self.check_order(n)?;
        let prod = compensated_sum(self.log_a[..=n].iter().cloned());
        Ok(n as f64 * std::f64::consts::LN_2 - p * prod + self.suffix[n])
    }

    /// `‖Φ^{(n)}‖_p^p` of the whole chain.
    pub fn lp_derivative(&self, n: usize, p: f64) -> Result<OrderNorm> {
        self.check_order(n)?;
        let (widths, s) = self.remainder(n);
        let psi = iterated_box(&widths)?;
        let lower = psi.lp_quasinorm(p, DEFAULT_LP_TOL)?;
        // Box chains are unimodal, so averaging over shifts in [0, s] is
        // dominated by the running max, whose p-th power integrates to
        // lower + s·sup^p.
        let correction = if s == 0.0 { 0.0 } else { s * psi.sup_norm().powf(p) };
        let total: f64 = widths.iter().sum::<f64>() + s;
        // Hölder with unit mass
        let holder = total.powf(1.0 - p);
        let upper = (lower + correction).min(holder).max(lower);
        let prod = compensated_sum(self.log_a[..n].iter().cloned());
        let log_scale = n as f64 * std::f64::consts::LN_2 - p * prod + (1.0 - p) * self.log_a[n];
        let exact = self.super_increasing_through(n);
        let tight = upper - lower <= 1e-6 * upper;
        Ok(OrderNorm {
            n,
            log_value: log_scale + upper.ln(),
            log_lower: if exact { log_scale + lower.ln() } else { f64::NEG_INFINITY },
            kind: if exact && tight { NormKind::Computed } else { NormKind::Bound },
        })
    }

    /// `log ‖Φ^{(n)}‖_∞` (upper value) of the whole chain.
    pub fn log_sup_derivative(&self, n: usize) -> Result<(f64, NormKind)> {
        self.check_order(n)?;
        let prod = compensated_sum(self.log_a[..=n].iter().cloned());
        if self.super_increasing_through(n) {
            let (widths, _) = self.remainder(n);
            // convolving with the neglected probability measure cannot raise the sup
            let sup = iterated_box(&widths)?.sup_norm();
            Ok((-prod + sup.ln(), NormKind::Computed))
        } else {
            Ok((n as f64 * std::f64::consts::LN_2 - prod, NormKind::Bound))
        }
    }
}

impl LogChain {
    /// Lower bound on `log ‖Φ^{(n)}‖_∞`. Just right of 0 only the atom of
    /// `D_n` at 0 acts, and when `a_{n+1} ≤ a_n` dominates the remaining
    /// widths the remainder chain reaches `1/a_{n+1}` there.
    pub fn log_sup_lower(&self, n: usize) -> Option<f64> {
        if n >= self.log_a.len() {
            return None;
        }
        let here = self.log_a[n];
        let nested = n == 0 || here <= self.log_a[n - 1];
        if nested && here >= self.suffix[n + 1] {
            Some(-compensated_sum(self.log_a[..=n].iter().cloned()))
        } else {
            None
        }
    }
}

/// Widths from `from` on, relative to `a_from`, down to `RESOLVE_RATIO`.
fn resolvable(log_a: &[f64], from: usize) -> Vec<f64> {
    let base = log_a[from];
    let cut = RESOLVE_RATIO.ln();
    log_a[from..]
        .iter()
        .take(MATERIALIZE_CAP)
        .take_while(|&&w| w - base >= cut)
        .map(|&w| (w - base).exp())
        .collect()
}

// ---------------------------------------------------------------------
// plans and certificates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MollifierMode {
    Sobolev { k: usize },
    /// `k` is the truncation index of the products `b_{l,k}`.
    Carleman { k: usize, r: f64, rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTrial {
    pub k: usize,
    /// `c · α_{1,k}`
    pub support_bound: f64,
    pub log_b1: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanData {
    /// The sequence the schedule is built from (the minorant when one was needed).
    pub regularised: WeightSequence,
    pub minorant: Option<MinorantInfo>,
    pub delta: f64,
    /// `c_l = l^{-(1+ρ)}`
    pub c: Vec<f64>,
    /// Upper bound on `Σ_l c_l`.
    pub c_sum: f64,
    /// `log b_{l,k}` for `l = 1..=len+2`
    pub log_b: Vec<f64>,
    /// `log α_{l,k}` for `l = 1..=len+1`
    pub log_alpha: Vec<f64>,
    pub trials: Vec<KTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierPlan {
    pub mode: MollifierMode,
    pub p: f64,
    pub epsilon: f64,
    pub log_a: Vec<f64>,
    /// `exp(log_a)`; entries may be 0 where `f64` underflows.
    pub a: Vec<f64>,
    /// Upper bound on the widths past the listed ones.
    pub tail_bound: f64,
    /// Upper bound on `Σ_l a_l`.
    pub support_len: f64,
    pub carleman: Option<CarlemanData>,
}

impl MollifierPlan {
    pub fn chain(&self) -> Result<LogChain> {
        LogChain::new(self.log_a.clone(), self.tail_bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn le(measured: f64, bound: f64) -> Self {
        Self {
            measured,
            bound,
            pass: measured <= bound,
        }
    }
    pub fn lt(measured: f64, bound: f64) -> Self {
        Self {
            measured,
            bound,
            pass: measured < bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderCertificate {
    pub n: usize,
    /// `‖Φ^{(n)}‖_p^p`
    pub lp_p: f64,
    pub log_lp_p: f64,
    pub log_lower: f64,
    pub log_target: f64,
    pub kind: NormKind,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamenessPoint {
    pub n: usize,
    /// `(1-p)^n log ‖f^{(n)}‖_∞`
    pub value: f64,
    /// Same, from a lower enclosure of the sup-norm.
    pub lower: Option<f64>,
    pub kind: NormKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamenessWindow {
    pub points: Vec<TamenessPoint>,
    /// Max over the top half of the window.
    pub theta_hat: f64,
    /// Max of the lower values over the top half, where known.
    pub theta_lower: Option<f64>,
}

impl TamenessWindow {
    fn from_points(points: Vec<TamenessPoint>) -> Self {
        let half = points.len() / 2;
        let theta_hat = points[half..]
            .iter()
            .map(|t| t.value)
            .fold(f64::NEG_INFINITY, f64::max);
        let theta_lower = points[half..].iter().filter_map(|t| t.lower).reduce(f64::max);
        Self {
            points,
            theta_hat,
            theta_lower,
        }
    }

    /// Strictly decreasing past its maximum, and ending below it.
    pub fn decreasing_tail(&self) -> bool {
        let v: Vec<f64> = self.points.iter().map(|t| t.value).collect();
        if v.len() < 2 {
            return false;
        }
        let peak = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, &x)| if x > v[best] { i } else { best });
        peak + 1 < v.len() && v[peak..].windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub mass: Check,
    pub support: Check,
    pub nonnegative: Check,
    /// Sobolev: `Σ_{n≤k} ‖Φ^{(n)}‖_p^p < ε^p`. Carleman: `max_n ‖Φ^{(n)}‖_p / M_n ≤ ε`.
    pub quasinorm: Check,
    pub orders: Vec<OrderCertificate>,
    pub tameness: TamenessWindow,
    pub tameness_decreasing: Option<bool>,
    pub all_pass: bool,
}

impl Certificates {
    pub fn first_failure(&self) -> Option<Error> {
        let named = [
            ("mass", &self.mass),
            ("support", &self.support),
            ("nonnegative", &self.nonnegative),
            ("quasinorm", &self.quasinorm),
        ];
        for (name, c) in named {
            if !c.pass {
                return Some(Error::CertificateFailure {
                    quantity: name.into(),
                    measured: c.measured,
                    bound: c.bound,
                });
            }
        }
        if let Some(o) = self.orders.iter().find(|o| !o.pass) {
            return Some(Error::CertificateFailure {
                quantity: format!("log ||Phi^({})||_p^p", o.n),
                measured: o.log_lp_p,
                bound: o.log_target,
            });
        }
        if self.tameness_decreasing == Some(false) {
            return Some(Error::CertificateFailure {
                quantity: "tameness window".into(),
                measured: self.tameness.theta_hat,
                bound: 0.0,
            });
        }
        None
    }

    fn finish(mut self) -> Self {
        self.all_pass = self.mass.pass
            && self.support.pass
            && self.nonnegative.pass
            && self.quasinorm.pass
            && self.orders.iter().all(|o| o.pass)
            && self.tameness_decreasing != Some(false);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub plan: MollifierPlan,
    /// The materialised prefix of the chain.
    pub phi: PiecewisePoly,
    pub materialized: usize,
    pub certificates: Certificates,
}

fn check_p_eps(p: f64, eps: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in (0,1)")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {eps}")));
    }
    Ok(())
}

fn common_checks(plan: &MollifierPlan, phi: &PiecewisePoly) -> (Check, Check, Check) {
    let mass = phi.mass();
    let mass = Check {
        measured: mass,
        bound: MASS_TOL,
        pass: (mass - 1.0).abs() <= MASS_TOL,
    };
    let hi = phi.support().map(|s| s.1).unwrap_or(0.0);
    let support = Check::le(plan.support_len.max(hi), plan.epsilon);
    let (lo, up) = phi.extrema();
    let floor = -NONNEG_TOL * up.max(1.0);
    let nonnegative = Check {
        measured: lo,
        bound: floor,
        pass: lo >= floor,
    };
    (mass, support, nonnegative)
}

fn chain_tameness(chain: &LogChain, p: f64, n_hi: usize) -> Result<TamenessWindow> {
    let q = 1.0 - p;
    let points = (0..=n_hi)
        .map(|n| {
            let (v, kind) = chain.log_sup_derivative(n)?;
            let w = q.powi(n as i32);
            Ok(TamenessPoint {
                n,
                value: w * v,
                lower: chain.log_sup_lower(n).map(|l| w * l),
                kind,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TamenessWindow::from_points(points))
}

// ---------------------------------------------------------------------
// Sobolev mode

/// The explicit halving schedule with `k + 1` widths.
pub fn sobolev_schedule(k: usize, p: f64, eps: f64) -> Result<MollifierPlan> {
    check_p_eps(p, eps)?;
    let kk = (k as f64 + 1.0).ln();
    let e = 1.0 / (1.0 - p);
    let ln2 = std::f64::consts::LN_2;
    let mut log_a: Vec<f64> = Vec::with_capacity(k + 1);
    let mut prod = CompensatedSum::new();
    for l in 1..=k + 1 {
        let v = if l == 1 {
            ((p * eps.ln() - ln2 - kk) * e).min(eps.ln() - ln2)
        } else {
            let growth = (p * eps.ln() + p * prod.value() - l as f64 * ln2 - kk) * e;
            growth.min(log_a[l - 2] - ln2)
        };
        if !v.is_finite() {
            return Err(Error::UnderflowWidth { index: l, log_width: v });
        }
        prod.add(v);
        log_a.push(v);
    }
    let support_len = log_sum_exp(&log_a).exp();
    Ok(MollifierPlan {
        mode: MollifierMode::Sobolev { k },
        p,
        epsilon: eps,
        a: log_a.iter().map(|v| v.exp()).collect(),
        log_a,
        tail_bound: 0.0,
        support_len,
        carleman: None,
    })
}

/// Builds `Φ = H_{a_1} * ... * H_{a_{k+1}}` and certifies mass, support
/// and `‖Φ‖_{k,p} < ε`.
pub fn build_invisible_sobolev(k: usize, p: f64, eps: f64) -> Result<Mollifier> {
    let m = assess_invisible_sobolev(k, p, eps)?;
    match m.certificates.first_failure() {
        Some(e) => Err(e),
        None => Ok(m),
    }
}

/// As [`build_invisible_sobolev`], returning failed certificates instead
/// of an error.
pub fn assess_invisible_sobolev(k: usize, p: f64, eps: f64) -> Result<Mollifier> {
    let plan = sobolev_schedule(k, p, eps)?;
    let chain = plan.chain()?;
    let (phi, materialized) = chain.materialize()?;
    let (mass, support, nonnegative) = common_checks(&plan, &phi);
    let per_order = p * eps.ln() - (k as f64 + 1.0).ln();
    let norms = (0..=k)
        .into_par_iter()
        .map(|n| chain.lp_derivative(n, p))
        .collect::<Result<Vec<_>>>()?;
    let orders: Vec<OrderCertificate> = norms
        .iter()
        .map(|o| OrderCertificate {
            n: o.n,
            lp_p: o.log_value.exp(),
            log_lp_p: o.log_value,
            log_lower: o.log_lower,
            log_target: per_order,
            kind: o.kind,
            pass: o.log_value <= per_order,
        })
        .collect();
    let total = log_sum_exp(&norms.iter().map(|o| o.log_value).collect::<Vec<_>>());
    let quasinorm = Check::lt(total.exp(), eps.powf(p));
    let tameness = chain_tameness(&chain, p, k)?;
    let certificates = Certificates {
        mass,
        support,
        nonnegative,
        quasinorm,
        orders,
        tameness,
        tameness_decreasing: None,
        all_pass: false,
    }
    .finish();
    Ok(Mollifier {
        plan,
        phi,
        materialized,
        certificates,
    })
}

// ---------------------------------------------------------------------
// Carleman mode

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    pub regularised: WeightSequence,
    pub minorant: Option<MinorantInfo>,
    pub delta: f64,
    pub r: f64,
    pub rho: f64,
}

/// Routes `M` through its minorant when needed and picks `(r, ρ)` with
/// `p - r ≥ δ^{-1}(1+ρ)p`.
pub fn carleman_params(m: &WeightSequence, p: f64) -> Result<CarlemanParams> {
    let kap = kappa(m, p, DEFAULT_KAPPA_TOL, DEFAULT_N_MAX)?;
    if !kap.is_diverged() || kap.degenerate {
        return Err(Error::NotApplicable(
            "the Carleman mollifier needs a non-degenerate sequence with kappa(p, M) = +inf".into(),
        ));
    }
    let (regularised, minorant) = regularised_for_mollifier(m, p, DEFAULT_N_MAX)?;
    let delta = p_regular(&regularised, p, DEFAULT_N_MAX)?.delta;
    let (r, rho) = if delta == f64::INFINITY {
        (p / 2.0, 1.0)
    } else if delta > 1.0 {
        let rho = (delta - 1.0) / 4.0;
        let r = (p * (1.0 - (1.0 + rho) / delta)).min(p);
        if !(r > 0.0) {
            return Err(Error::NotApplicable(format!("no admissible r for delta = {delta}")));
        }
        (r, rho)
    } else {
        return Err(Error::NotApplicable(format!("delta = {delta} is not above 1")));
    };
    Ok(CarlemanParams {
        regularised,
        minorant,
        delta,
        r,
        rho,
    })
}

/// Upper bound on `ζ(1+ρ)`.
fn zeta_upper(rho: f64) -> f64 {
    let n = 10_000usize;
    let head = compensated_sum((1..=n).map(|l| (l as f64).powf(-(1.0 + rho))));
    head + (n as f64).powf(-rho) / rho
}

fn log_b(seq: &WeightSequence, p: f64, r: f64, k: usize, l: usize) -> Result<f64> {
    let lq = (1.0 - p).ln();
    let lr = r.ln();
    let mut s = CompensatedSum::new();
    for j in 0..=k {
        s.add(seq.weighted_log_m(l - 1 + j, lr + j as f64 * lq)?);
    }
    Ok(s.value())
}

/// The schedule `a_l = l^{-(1+ρ)} b_{l,k}/b_{l+1,k}` at a fixed
/// truncation index `k`, with `len` widths listed.
pub fn carleman_schedule_at(
    params: &CarlemanParams,
    p: f64,
    eps: f64,
    k: usize,
    len: usize,
) -> Result<MollifierPlan> {
    check_p_eps(p, eps)?;
    let len = len.max(2);
    let (r, rho) = (params.r, params.rho);
    let log_b = (1..=len + 2)
        .into_par_iter()
        .map(|l| log_b(&params.regularised, p, r, k, l))
        .collect::<Result<Vec<_>>>()?;
    let log_alpha: Vec<f64> = log_b.windows(2).map(|w| w[0] - w[1]).collect();
    let c: Vec<f64> = (1..=len).map(|l| (l as f64).powf(-(1.0 + rho))).collect();
    let c_sum = zeta_upper(rho);
    let log_a: Vec<f64> = (0..len)
        .map(|i| -(1.0 + rho) * ((i + 1) as f64).ln() + log_alpha[i])
        .collect();
    // Σ_{l>len} c_l α_l ≤ α_{len+1} len^{-ρ}/ρ
    let tail_bound = (log_alpha[len] - rho * (len as f64).ln() - rho.ln()).exp();
    let support_len = log_sum_exp(&log_a).exp() + tail_bound;
    let trial = KTrial {
        k,
        support_bound: c_sum * log_alpha[0].exp(),
        log_b1: log_b[0],
        accepted: c_sum * log_alpha[0].exp() <= eps && log_b[0] >= 0.0,
    };
    Ok(MollifierPlan {
        mode: MollifierMode::Carleman { k, r, rho },
        p,
        epsilon: eps,
        a: log_a.iter().map(|v| v.exp()).collect(),
        log_a,
        tail_bound,
        support_len,
        carleman: Some(CarlemanData {
            regularised: params.regularised.clone(),
            minorant: params.minorant.clone(),
            delta: params.delta,
            c,
            c_sum,
            log_b,
            log_alpha,
            trials: vec![trial],
        }),
    })
}

fn listed_len(n_check: usize) -> usize {
    (n_check + 8).max(16)
}

/// Doubling search `k = 8, 16, ...` up to `k_max` for the first
/// truncation index with `c·α_{1,k} ≤ ε` and `log b_{1,k} ≥ 0`.
pub fn carleman_schedule(m: &WeightSequence, p: f64, eps: f64, k_max: usize) -> Result<MollifierPlan> {
    check_p_eps(p, eps)?;
    let params = carleman_params(m, p)?;
    let mut trials = Vec::new();
    let mut k = K_START;
    while k <= k_max {
        let mut plan = carleman_schedule_at(&params, p, eps, k, listed_len(0))?;
        let data = plan.carleman.as_mut().unwrap();
        trials.push(data.trials[0].clone());
        if data.trials[0].accepted {
            data.trials = trials;
            return Ok(plan);
        }
        k *= 2;
    }
    Err(Error::KExhausted { k_max })
}

fn certify_carleman(m: &WeightSequence, plan: MollifierPlan, n_check: usize) -> Result<Mollifier> {
    let p = plan.p;
    let eps = plan.epsilon;
    let chain = plan.chain()?;
    let (phi, materialized) = chain.materialize()?;
    let (mass, mut support, nonnegative) = common_checks(&plan, &phi);
    let data = plan.carleman.as_ref().unwrap();
    let k_ok = data.trials.last().map(|t| t.accepted).unwrap_or(false);
    support.pass &= k_ok;
    let log_m = m.log_m_range(n_check)?;
    let norms = (0..=n_check)
        .into_par_iter()
        .map(|n| chain.lp_derivative(n, p))
        .collect::<Result<Vec<_>>>()?;
    let orders: Vec<OrderCertificate> = norms
        .iter()
        .map(|o| {
            let target = p * (eps.ln() + log_m[o.n]);
            OrderCertificate {
                n: o.n,
                lp_p: o.log_value.exp(),
                log_lp_p: o.log_value,
                log_lower: o.log_lower,
                log_target: target,
                kind: o.kind,
                pass: o.log_value <= target,
            }
        })
        .collect();
    let worst = norms
        .iter()
        .map(|o| (o.log_value / p - log_m[o.n]).exp())
        .fold(0.0, f64::max);
    let quasinorm = Check::le(worst, eps);
    let tameness = chain_tameness(&chain, p, n_check.max(TAMENESS_MIN_WINDOW))?;
    let decreasing = tameness.decreasing_tail() && tameness.points.last().map(|t| t.value > 0.0).unwrap_or(false);
    let certificates = Certificates {
        mass,
        support,
        nonnegative,
        quasinorm,
        orders,
        tameness,
        tameness_decreasing: Some(decreasing),
        all_pass: false,
    }
    .finish();
    Ok(Mollifier {
        plan,
        phi,
        materialized,
        certificates,
    })
}

/// Searches `k = 8, 16, ...` up to `k_max` for a truncation index whose
/// chain passes every certificate for `n ≤ n_check`. Norm certificates
/// are taken against the input `M`.
pub fn build_invisible_carleman(
    m: &WeightSequence,
    p: f64,
    eps: f64,
    k_max: usize,
    n_check: usize,
) -> Result<Mollifier> {
    check_p_eps(p, eps)?;
    let params = carleman_params(m, p)?;
    let mut trials = Vec::new();
    let mut k = K_START;
    while k <= k_max {
        let mut plan = carleman_schedule_at(&params, p, eps, k, listed_len(n_check))?;
        let data = plan.carleman.as_mut().unwrap();
        trials.push(data.trials[0].clone());
        data.trials = trials.clone();
        if data.trials.last().unwrap().accepted {
            let moll = certify_carleman(m, plan, n_check)?;
            if moll.certificates.all_pass {
                return Ok(moll);
            }
        }
        k *= 2;
    }
    Err(Error::KExhausted { k_max })
}

/// Certificates at one fixed truncation index, pass or fail.
pub fn assess_invisible_carleman(m: &WeightSequence, p: f64, eps: f64, k: usize, n_check: usize) -> Result<Mollifier> {
    check_p_eps(p, eps)?;
    let params = carleman_params(m, p)?;
    let plan = carleman_schedule_at(&params, p, eps, k, listed_len(n_check))?;
    certify_carleman(m, plan, n_check)
}

// ---------------------------------------------------------------------
// tameness diagnostic

/// A function whose derivative sup-norms can be evaluated.
#[derive(Debug, Clone, Copy)]
pub enum FunctionModel<'a> {
    Piecewise(&'a PiecewisePoly),
    Chain(&'a LogChain),
    Hermite(&'a HermiteFunction),
}

impl FunctionModel<'_> {
    /// `log ‖f^{(n)}‖_∞`, or `None` once `f^{(n)}` is not a function.
    pub fn log_sup(&self, n: usize) -> Result<Option<(f64, NormKind)>> {
        match self {
            FunctionModel::Piecewise(f) => match f.derivative(n) {
                Ok(d) if d.is_regular() => Ok(Some((d.regular.sup_norm().ln(), NormKind::Computed))),
                Ok(_) | Err(Error::DistributionalDerivative { .. }) => Ok(None),
                Err(e) => Err(e),
            },
            FunctionModel::Chain(c) => match c.log_sup_derivative(n) {
                Ok(v) => Ok(Some(v)),
                Err(Error::DistributionalDerivative { .. } | Error::NotApplicable(_)) => Ok(None),
                Err(e) => Err(e),
            },
            FunctionModel::Hermite(h) => Ok(Some((hermite_derivative_sup(h, n)?.measured.ln(), NormKind::Computed))),
        }
    }
}

/// `(n, (1-p)^n log ‖f^{(n)}‖_∞)` over `n_lo..=n_hi`, stopping early where
/// the model has no further classical derivatives.
pub fn tameness_diagnostic(f: FunctionModel<'_>, p: f64, n_lo: usize, n_hi: usize) -> Result<TamenessWindow> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in (0,1)")));
    }
    let q = 1.0 - p;
    let mut points = Vec::new();
    for n in n_lo..=n_hi {
        let w = q.powi(n as i32);
        match f.log_sup(n)? {
            Some((v, kind)) => points.push(TamenessPoint {
                n,
                value: w * v,
                lower: match (&f, kind) {
                    (_, NormKind::Computed) => Some(w * v),
                    (FunctionModel::Chain(c), _) => c.log_sup_lower(n).map(|l| w * l),
                    _ => None,
                },
                kind,
            }),
            None => break,
        }
    }
    if points.is_empty() {
        return Err(Error::DistributionalDerivative { order: n_lo });
    }
    Ok(TamenessWindow::from_points(points))
}
