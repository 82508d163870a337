//! Regime classification: the coupling boundary given by `κ(p, M)`,
//! quasianalyticity of the tame classes, and explicit witnesses that the
//! tameness index `θ` matters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mollifier::{tameness_diagnostic, Check, FunctionModel, LogChain, NormKind, OrderCertificate, TamenessWindow};
use crate::pwpoly::PiecewisePoly;
use crate::weights::{
    associated_n, decay_regular, is_log_convex, kappa, p_regular, table_dc, Confidence, DcVerdict, DecayRegularity,
    Family, KappaResult, KappaStatus, PRegularity, TailRule, WeightSequence, DEFAULT_KAPPA_TOL,
    DEFAULT_N_MAX,
};

/// Diagnostic window for the tameness index of witnesses.
pub const DIAG_LO: usize = 10;
pub const DIAG_HI: usize = 24;
/// Terms in the truncated products of `N_{n,θ}` before tail control.
pub const DEFAULT_K_TERMS: usize = 64;
const N_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-10;
const NONNEG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    CoupledSmooth,
    Disconnected,
    SobolevDegenerate,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaVerdict {
    No,
    /// Equivalent to quasianalyticity of `C_N`; `of_n` holds that verdict
    /// when one could be reached.
    Deferred,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasianalyticReport {
    pub verdict: QaVerdict,
    pub confidence: Option<Confidence>,
    pub of_n: Option<DcVerdict>,
    pub note: String,
}

impl QuasianalyticReport {
    fn new(verdict: QaVerdict, confidence: Option<Confidence>, note: impl Into<String>) -> Self {
        Self {
            verdict,
            confidence,
            of_n: None,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub log_convex: Option<bool>,
    pub p_regular: Option<bool>,
    pub decay_regular: Option<bool>,
    pub p_regularity: Option<PRegularity>,
    pub decay: Option<DecayRegularity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub n_max: usize,
    pub kappa_tol: f64,
    /// How many `log N_{n,θ}` to report.
    pub n_prefix: usize,
    /// Length of the `N` sequence fed to the Denjoy–Carleman heuristics.
    pub n_dc: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            kappa_tol: DEFAULT_KAPPA_TOL,
            n_prefix: 8,
            n_dc: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub p: f64,
    pub theta: f64,
    /// `None` when `κ` could not be evaluated (the reason is in `notes`).
    pub kappa: Option<KappaResult>,
    pub phase: Phase,
    pub regularity: Regularity,
    pub quasianalytic: QuasianalyticReport,
    /// `log N_{n,θ}` for `n = 0, 1, ...` (empty unless `κ` is finite).
    pub n_prefix: Vec<f64>,
    pub notes: Vec<String>,
}

fn check_p_theta(p: f64, theta: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in (0,1)")));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!("theta = {theta}")));
    }
    Ok(())
}

fn log_n_prefix(m: &WeightSequence, p: f64, theta: f64, count: usize) -> Result<Vec<f64>> {
    (0..count)
        .into_par_iter()
        .map(|n| Ok(associated_n(m, p, theta, n, DEFAULT_K_TERMS, N_TOL)?.log_n))
        .collect()
}

/// Quasianalyticity of `C_N` from the window heuristics on `N_n / N_{n+1}`.
fn dc_of_n(log_n: &[f64]) -> Result<DcVerdict> {
    let terms: Vec<f64> = log_n.windows(2).map(|w| (w[0] - w[1]).exp()).collect();
    table_dc(&terms)
}

/// Phase and quasianalyticity of `C_M^{p,θ}`. Numerical trouble shows up
/// as `Inconclusive` states and notes rather than errors.
pub fn classify(m: &WeightSequence, p: f64, theta: f64, opts: &ClassifyOptions) -> Result<RegimeReport> {
    check_p_theta(p, theta)?;
    let mut notes = Vec::new();
    let mut regularity = Regularity {
        log_convex: None,
        p_regular: None,
        decay_regular: None,
        p_regularity: None,
        decay: None,
    };
    match is_log_convex(m, 0, opts.n_max.min(100)) {
        Ok(v) => regularity.log_convex = Some(v.convex),
        Err(e) => notes.push(format!("log-convexity: {e}")),
    }
    let kap = match kappa(m, p, opts.kappa_tol, opts.n_max) {
        Ok(k) => Some(k),
        Err(e) => {
            notes.push(format!("kappa: {e}"));
            None
        }
    };
    let mut report = RegimeReport {
        p,
        theta,
        kappa: kap.clone(),
        phase: Phase::Inconclusive,
        regularity,
        quasianalytic: QuasianalyticReport::new(QaVerdict::NotApplicable, None, ""),
        n_prefix: Vec::new(),
        notes,
    };

    if m.is_sobolev() {
        report.phase = Phase::SobolevDegenerate;
        report.quasianalytic = QuasianalyticReport::new(
            QaVerdict::NotApplicable,
            Some(Confidence::Analytic),
            "degenerate weights: the completion splits isometrically into a sum of L^p spaces",
        );
        return Ok(report);
    }
    let Some(kap) = kap else {
        report.quasianalytic.note = "kappa unavailable".into();
        return Ok(report);
    };

    match kap.status {
        KappaStatus::Diverged => {
            match p_regular(m, p, opts.n_max) {
                Ok(r) => {
                    report.regularity.p_regular = Some(r.regular);
                    report.phase = if r.regular {
                        Phase::Disconnected
                    } else {
                        report.notes.push("kappa diverges but p-regularity is not certified".into());
                        Phase::Inconclusive
                    };
                    report.regularity.p_regularity = Some(r);
                }
                Err(e) => report.notes.push(format!("p-regularity: {e}")),
            }
            report.quasianalytic = QuasianalyticReport::new(
                QaVerdict::NotApplicable,
                None,
                "kappa diverges: the sup-norm bootstrap is unavailable",
            );
        }
        KappaStatus::Inconclusive => {
            report.quasianalytic =
                QuasianalyticReport::new(QaVerdict::NotApplicable, None, "kappa not certified on this input");
        }
        KappaStatus::Finite => {
            report.phase = Phase::CoupledSmooth;
            match decay_regular(m, p, opts.n_max) {
                Ok(d) => {
                    report.regularity.decay_regular = Some(d.regular);
                    report.regularity.decay = Some(d);
                }
                Err(e) => report.notes.push(format!("decay-regularity: {e}")),
            }
            let confidence = if m.is_table() {
                Confidence::Heuristic
            } else {
                Confidence::Analytic
            };
            let want = opts.n_prefix.max(if theta == 0.0 { opts.n_dc } else { 0 });
            let log_n = match log_n_prefix(m, p, theta, want) {
                Ok(v) => v,
                Err(e) => {
                    report.notes.push(format!("associated sequence: {e}"));
                    Vec::new()
                }
            };
            report.n_prefix = log_n.iter().take(opts.n_prefix).cloned().collect();
            report.quasianalytic = if theta > 0.0 {
                QuasianalyticReport::new(
                    QaVerdict::No,
                    Some(confidence),
                    "theta > 0 with finite kappa: never quasianalytic",
                )
            } else if report.regularity.decay_regular == Some(true) {
                let mut q = QuasianalyticReport::new(
                    QaVerdict::Deferred,
                    Some(Confidence::Heuristic),
                    "equivalent to quasianalyticity of C_N",
                );
                if log_n.len() >= 2 {
                    match dc_of_n(&log_n) {
                        Ok(v) => q.of_n = Some(v),
                        Err(e) => q.note = format!("equivalent to quasianalyticity of C_N; {e}"),
                    }
                }
                q
            } else {
                QuasianalyticReport::new(
                    QaVerdict::Deferred,
                    None,
                    "decay-regularity not certified; the C_N criterion may not apply",
                )
            };
        }
    }
    Ok(report)
}

/// [`classify`] over a list of `p` values, in order.
pub fn classify_grid(m: &WeightSequence, ps: &[f64], theta: f64, opts: &ClassifyOptions) -> Result<Vec<RegimeReport>> {
    ps.par_iter().map(|&p| classify(m, p, theta, opts)).collect()
}

// ---------------------------------------------------------------------
// quasianalyticity witness

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaWitness {
    pub p: f64,
    pub theta_prime: f64,
    /// `log N_{n,θ'}` for `n = 0..log_a.len()`.
    pub log_n: Vec<f64>,
    /// `a_1 = 1/N_0`, `a_n = N_{n-2}/N_{n-1}`, so `a_1⋯a_{n+1} = 1/N_n`.
    pub log_a: Vec<f64>,
    /// `a_{n+1}/a_n`
    pub ratios: Vec<f64>,
    pub rho: f64,
    /// Ratios nonincreasing from `a_3/a_2` on.
    pub ratios_monotone: bool,
    pub tail_bound: f64,
    pub support_len: f64,
    pub phi: PiecewisePoly,
    pub materialized: usize,
    pub mass: Check,
    pub support: Check,
    pub nonnegative: Check,
    /// `‖Φ^{(n)}‖_p^p ≤ 2^n M_n^p / (1-ρ)`
    pub orders: Vec<OrderCertificate>,
    pub tameness: TamenessWindow,
    pub all_pass: bool,
}

impl QaWitness {
    pub fn chain(&self) -> Result<LogChain> {
        LogChain::new(self.log_a.clone(), self.tail_bound)
    }

    pub fn theta_hat(&self) -> f64 {
        self.tameness.theta_hat
    }
}

fn bounded_below(m: &WeightSequence, n_max: usize) -> Result<bool> {
    Ok(match &m.family {
        Family::Table { log_m, tail } => {
            let hi = m.eval_limit(n_max);
            let min = (0..=hi).map(|n| m.log_m(n)).collect::<Result<Vec<_>>>()?;
            let finite = min.iter().all(|v| v.is_finite());
            let rising_tail = *tail == TailRule::None || log_m[log_m.len() - 1] >= log_m[log_m.len() - 2];
            finite && rising_tail
        }
        Family::SobolevDegenerate { .. } => false,
        _ => true,
    })
}

/// A compactly supported `Φ` of tameness index `θ'` in `C_M^{p,θ'}`,
/// built from `a_1 = 1/N_{0,θ'}` and `a_n = N_{n-2,θ'}/N_{n-1,θ'}`.
/// `k_terms` is the truncation of the products defining `N`.
pub fn quasianalyticity_witness(
    m: &WeightSequence,
    p: f64,
    theta_prime: f64,
    k_terms: usize,
    n_check: usize,
) -> Result<QaWitness> {
    check_p_theta(p, theta_prime)?;
    if theta_prime <= 0.0 {
        return Err(Error::InvalidParameter("theta' must be positive".into()));
    }
    let kap = kappa(m, p, DEFAULT_KAPPA_TOL, DEFAULT_N_MAX)?;
    if !kap.is_finite() {
        return Err(Error::NotApplicable("kappa(p, M) is not finite".into()));
    }
    let hi = m.eval_limit(100);
    if let Some(v) = is_log_convex(m, 0, hi)?.first_violation {
        return Err(Error::NotLogConvex { n: v });
    }
    if !bounded_below(m, hi)? {
        return Err(Error::NotApplicable("M is not bounded away from 0".into()));
    }

    let listed = n_check.max(DIAG_HI) + 8;
    // N_0 .. N_listed, enough for a_1 .. a_{listed+1}
    let log_n: Vec<f64> = (0..=listed)
        .into_par_iter()
        .map(|n| Ok(associated_n(m, p, theta_prime, n, k_terms.max(1), N_TOL)?.log_n))
        .collect::<Result<_>>()?;
    let mut log_a = vec![-log_n[0]];
    for n in 2..=listed + 1 {
        log_a.push(log_n[n - 2] - log_n[n - 1]);
    }
    let ratios: Vec<f64> = log_a.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    // a_2/a_1 = M_1^{2p}-type factor is not governed by the decay of N
    let rho = ratios.iter().skip(1).cloned().fold(0.0, f64::max);
    if !(rho < 1.0) {
        return Err(Error::RhoNotFound);
    }
    let ratios_monotone = ratios.windows(2).skip(1).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let extra = log_a.pop().unwrap();
    let last_ratio = *ratios.last().unwrap();
    // ratios keep decreasing past the window (log-convexity of N)
    let tail_bound = extra.exp() / (1.0 - last_ratio);
    let chain = LogChain::new(log_a.clone(), tail_bound)?;
    let support_len = chain.support_len();
    let (phi, materialized) = chain.materialize()?;

    let mass = phi.mass();
    let mass = Check {
        measured: mass,
        bound: MASS_TOL,
        pass: (mass - 1.0).abs() <= MASS_TOL,
    };
    let support = Check::le(support_len, log_a[0].exp() + log_a[1].exp() / (1.0 - rho));
    let (lo, up) = phi.extrema();
    let floor = -NONNEG_TOL * up.max(1.0);
    let nonnegative = Check {
        measured: lo,
        bound: floor,
        pass: lo >= floor,
    };
    let orders = (0..=n_check)
        .into_par_iter()
        .map(|n| {
            let o = chain.lp_derivative(n, p)?;
            let target = n as f64 * std::f64::consts::LN_2 + p * m.log_m(n)? - (1.0 - rho).ln();
            Ok(OrderCertificate {
                n,
                lp_p: o.log_value.exp(),
                log_lp_p: o.log_value,
                log_lower: o.log_lower,
                log_target: target,
                kind: o.kind,
                pass: o.log_value <= target,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tameness = tameness_diagnostic(FunctionModel::Chain(&chain), p, DIAG_LO, DIAG_HI)?;
    let all_pass = mass.pass && support.pass && nonnegative.pass && orders.iter().all(|o| o.pass);
    let w = QaWitness {
        p,
        theta_prime,
        log_n,
        log_a,
        ratios,
        rho,
        ratios_monotone,
        tail_bound,
        support_len,
        phi,
        materialized,
        mass,
        support,
        nonnegative,
        orders,
        tameness,
        all_pass,
    };
    if let Some(e) = witness_failure(&w) {
        return Err(e);
    }
    Ok(w)
}

fn witness_failure(w: &QaWitness) -> Option<Error> {
    let named = [("mass", &w.mass), ("support", &w.support), ("nonnegative", &w.nonnegative)];
    for (name, c) in named {
        if !c.pass {
            return Some(Error::CertificateFailure {
                quantity: name.into(),
                measured: c.measured,
                bound: c.bound,
            });
        }
    }
    w.orders.iter().find(|o| !o.pass).map(|o| Error::CertificateFailure {
        quantity: format!("log ||Phi^({})||_p^p", o.n),
        measured: o.log_lp_p,
        bound: o.log_target,
    })
}

// ---------------------------------------------------------------------
// θ-strictness

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub theta: f64,
    pub theta_prime: f64,
    pub theta_hat: f64,
    /// Lower enclosure of `theta_hat`; the pass decision uses it.
    pub theta_lower: Option<f64>,
    pub margin: f64,
    pub window: (usize, usize),
    /// Every tameness value in the window is computed, not just bounded.
    pub computed: bool,
    pub witness: QaWitness,
    pub pass: bool,
}

/// A witness of tameness index `θ'` whose measured index exceeds `θ` by
/// the margin `(θ'-θ)/4`: an element of the `θ'` class outside the `θ`
/// class.
pub fn theta_strictness_witness(m: &WeightSequence, p: f64, theta: f64, theta_prime: f64) -> Result<ThetaReport> {
    check_p_theta(p, theta)?;
    if !(theta_prime > theta) {
        return Err(Error::InvalidParameter(format!(
            "need theta < theta', got {theta} and {theta_prime}"
        )));
    }
    let witness = quasianalyticity_witness(m, p, theta_prime, DEFAULT_K_TERMS, 6)?;
    let margin = 0.25 * (theta_prime - theta);
    let theta_hat = witness.theta_hat();
    let theta_lower = witness.tameness.theta_lower;
    let computed = witness.tameness.points.iter().all(|t| t.kind == NormKind::Computed);
    Ok(ThetaReport {
        theta,
        theta_prime,
        theta_hat,
        theta_lower,
        margin,
        window: (DIAG_LO, DIAG_HI),
        computed,
        pass: theta_lower.is_some_and(|l| l > theta + margin),
        witness,
    })
}
