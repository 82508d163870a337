//! Witnesses of the uncoupled regime: the skewed sawtooth, smoothing of
//! step functions by invisible mollifiers, and the oscillation-partition
//! lift that trades a function for a primitive of small quasinorm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mollifier::{build_invisible_carleman, build_invisible_sobolev, LogChain, Mollifier, NormKind, K_MAX, MATERIALIZE_CAP, RESOLVE_RATIO};
use crate::numerics::CompensatedSum;
use crate::pwpoly::{iterated_box, PiecewisePoly, DEFAULT_LP_TOL};
use crate::weights::{Family, WeightSequence};

/// Relative slack in `measured ≤ bound`.
pub const WITNESS_TOL: f64 = 1e-9;
/// Halvings allowed below a unit cell.
pub const MAX_DEPTH: usize = 48;
/// Default exponent in `ε_j = j^{-3}`.
pub const DEFAULT_EPS_POWER: f64 = 3.0;
const IDENTITY_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-10;
// mollifiers are built a little inside the admissible ε_n so that
// rounding their widths to the grid cannot push them over
const EPS_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    Douady,
    Beta,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessQuantity {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub kind: NormKind,
    pub pass: bool,
}

impl WitnessQuantity {
    fn new(name: impl Into<String>, measured: f64, bound: f64, kind: NormKind) -> Self {
        let pass = measured <= bound + WITNESS_TOL * bound.abs();
        Self {
            name: name.into(),
            measured,
            bound,
            kind,
            pass,
        }
    }

    fn computed(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, bound, NormKind::Computed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub witness: WitnessKind,
    pub j: Option<usize>,
    pub p: f64,
    pub eps: f64,
    pub quantities: Vec<WitnessQuantity>,
    /// Auxiliary values that carry no bound.
    pub values: Vec<(String, f64)>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl WitnessReport {
    fn new(witness: WitnessKind, j: Option<usize>, p: f64, eps: f64) -> Self {
        Self {
            witness,
            j,
            p,
            eps,
            quantities: Vec::new(),
            values: Vec::new(),
            notes: Vec::new(),
            pass: false,
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.quantities.iter().all(|q| q.pass);
        self
    }

    pub fn quantity(&self, name: &str) -> Option<&WitnessQuantity> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p = {p} must lie in (0,1)")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon = {eps}")))
    }
}

// ---------------------------------------------------------------------
// sawtooth

/// Rises with slope 1 for `1/j`, then drops with slope `-1/(j ε_j)` back
/// to 0; period `1/j + ε_j`, restricted to `[0, 1]`.
pub fn sawtooth(j: usize, eps_j: f64) -> Result<PiecewisePoly> {
    if j == 0 {
        return Err(Error::InvalidParameter("j must be at least 1".into()));
    }
    let jf = j as f64;
    if !(eps_j > 0.0 && eps_j < 1.0 / jf) {
        return Err(Error::BadPeriod);
    }
    let period = 1.0 / jf + eps_j;
    let drop = -1.0 / (jf * eps_j);
    let mut breaks = vec![0.0];
    let mut pieces: Vec<Vec<f64>> = Vec::new();
    let mut k = 0usize;
    loop {
        let start = k as f64 * period;
        if start >= 1.0 {
            break;
        }
        let top = (start + 1.0 / jf).min(1.0);
        pieces.push(vec![0.0, 1.0]);
        breaks.push(top);
        if top >= 1.0 {
            break;
        }
        let end = ((k + 1) as f64 * period).min(1.0);
        pieces.push(vec![1.0 / jf, drop]);
        breaks.push(end);
        if end >= 1.0 {
            break;
        }
        k += 1;
    }
    PiecewisePoly::new(breaks, pieces)
}

/// Number of complete drops of the sawtooth inside `[0, 1]`.
pub fn sawtooth_drops(j: usize, eps_j: f64) -> usize {
    let period = 1.0 / j as f64 + eps_j;
    (1.0 / period + 1e-12).floor() as usize
}

/// `ε_j = j^{-3}` unless given.
pub fn default_eps(j: usize) -> f64 {
    (j as f64).powf(-DEFAULT_EPS_POWER)
}

/// `‖f_j‖_p^p ≤ j^{-p}` and `‖1 - f_j'‖_p^p ≤ (j ε_j)^{1-p}` on `[0, 1]`.
pub fn douady_witness(p: f64, j: usize, eps_j: Option<f64>) -> Result<WitnessReport> {
    check_p(p)?;
    let eps_j = eps_j.unwrap_or_else(|| default_eps(j.max(1)));
    let f = sawtooth(j, eps_j)?;
    let jf = j as f64;
    let one = PiecewisePoly::from_global_poly(0.0, 1.0, &[1.0])?;
    let defect = one.sub(&f.regular_derivative());
    let mut r = WitnessReport::new(WitnessKind::Douady, Some(j), p, eps_j);
    r.quantities.push(WitnessQuantity::computed("sup f_j", f.sup_norm(), 1.0 / jf));
    r.quantities
        .push(WitnessQuantity::computed("||f_j||_p^p", f.lp_quasinorm(p, DEFAULT_LP_TOL)?, jf.powf(-p)));
    r.quantities.push(WitnessQuantity::computed(
        "||1-f_j'||_p^p",
        defect.lp_quasinorm(p, DEFAULT_LP_TOL)?,
        (jf * eps_j).powf(1.0 - p),
    ));
    let drops = sawtooth_drops(j, eps_j);
    let per_drop = eps_j * (1.0 + 1.0 / (jf * eps_j)).powf(p);
    r.values.push(("full_drops".into(), drops as f64));
    r.values.push(("drop_contribution".into(), drops as f64 * per_drop));
    Ok(r.finish())
}

// ---------------------------------------------------------------------
// mollifiers for a weight sequence

/// How the invisible mollifiers for a sequence are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    /// `M_n` finite exactly for `n ≤ top` (none when `top` is `None`).
    Sobolev { top: Option<usize> },
    Carleman,
}

fn route(m: &WeightSequence) -> Route {
    match m.family {
        Family::SobolevDegenerate { k } => Route::Sobolev {
            top: k.checked_sub(m.shift),
        },
        _ => Route::Carleman,
    }
}

/// Orders `n` (from 0) at which the mollifier must be small against `m`.
fn finite_orders(m: &WeightSequence, n_check: usize) -> Vec<usize> {
    match route(m) {
        Route::Sobolev { top } => top.map(|t| (0..=t.min(n_check)).collect()).unwrap_or_default(),
        Route::Carleman => (0..=n_check).collect(),
    }
}

/// A mollifier with support in `[0, eps]` and `‖Φ^{(n)}‖_p ≤ eps · M_n`.
fn mollifier_for(m: &WeightSequence, p: f64, eps: f64, n_check: usize) -> Result<Mollifier> {
    match route(m) {
        Route::Sobolev { top } => {
            let k = top.unwrap_or(0);
            let eps = eps * m.log_scale.exp().min(1.0);
            build_invisible_sobolev(k, p, eps)
        }
        Route::Carleman => build_invisible_carleman(m, p, eps, K_MAX, n_check),
    }
}

// ---------------------------------------------------------------------
// β lift

/// `1_{[a,b]} * Φ`.
pub fn smooth_indicator(a: f64, b: f64, phi: &PiecewisePoly) -> Result<PiecewisePoly> {
    if !(a < b && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("interval [{a}, {b}]")));
    }
    Ok(phi.convolve_box(b - a)?.scale(b - a).translate(a))
}

/// `Σ c_i 1_{[a_i,b_i]}`.
pub fn step_function(steps: &[(f64, f64, f64)]) -> Result<PiecewisePoly> {
    let parts = steps
        .iter()
        .map(|&(a, b, c)| PiecewisePoly::from_global_poly(a, b, &[c]))
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<(f64, &PiecewisePoly)> = parts.iter().map(|f| (1.0, f)).collect();
    Ok(PiecewisePoly::zero().linear_combination(&terms))
}

/// `(Σ c_i 1_{[a_i,b_i]}) * Φ`, built term by term.
pub fn smooth_step_function(steps: &[(f64, f64, f64)], phi: &PiecewisePoly) -> Result<PiecewisePoly> {
    let parts = steps
        .iter()
        .map(|&(a, b, c)| Ok(smooth_indicator(a, b, phi)?.scale(c)))
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<(f64, &PiecewisePoly)> = parts.iter().map(|f| (1.0, f)).collect();
    Ok(PiecewisePoly::zero().linear_combination(&terms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaWitness {
    pub g_j: PiecewisePoly,
    pub mollifier: Mollifier,
    pub report: WitnessReport,
}

/// Smooths `1_{[a,b]}` by a mollifier invisible for `M_1`, and checks
/// `‖g - g_j‖_p^p ≤ 2ε_j` and `‖g_j^{(n)}‖_p ≤ 2^{1/p} ε_j M_n` for
/// `1 ≤ n ≤ n_check`.
pub fn lift_beta_witness(
    a: f64,
    b: f64,
    p: f64,
    m: &WeightSequence,
    eps_j: f64,
    n_check: usize,
) -> Result<BetaWitness> {
    check_p(p)?;
    check_eps(eps_j)?;
    let m1 = m.shift(1);
    let moll = mollifier_for(&m1, p, eps_j, n_check.saturating_sub(1))?;
    let g = PiecewisePoly::from_global_poly(a, b, &[1.0])?;
    let g_j = smooth_indicator(a, b, &moll.phi)?;
    let chain = moll.plan.chain()?;
    let mut r = WitnessReport::new(WitnessKind::Beta, None, p, eps_j);
    r.quantities.push(WitnessQuantity::computed(
        "||g-g_j||_p^p",
        g.sub(&g_j).lp_quasinorm(p, DEFAULT_LP_TOL)?,
        2.0 * eps_j,
    ));
    // g_j^{(n)} = (δ_a - δ_b) * Φ^{(n-1)}: two copies, disjoint when b - a
    // exceeds the support, otherwise the p-triangle inequality
    let disjoint = b - a >= chain.support_len();
    let mut window = f64::NEG_INFINITY;
    let mut window_kind = NormKind::Computed;
    for n0 in finite_orders(&m1, n_check.saturating_sub(1)) {
        let n = n0 + 1;
        if n > n_check {
            break;
        }
        let o = chain.lp_derivative(n0, p)?;
        let kind = if disjoint { o.kind } else { NormKind::Bound };
        let log_norm = (std::f64::consts::LN_2 + o.log_value) / p;
        let log_m = m.log_m(n)?;
        let log_bound = std::f64::consts::LN_2 / p + eps_j.ln() + log_m;
        r.quantities.push(WitnessQuantity::new(
            format!("||g_j^({n})||_p"),
            log_norm.exp(),
            log_bound.exp(),
            kind,
        ));
        window = window.max(log_norm - log_m);
        if kind == NormKind::Bound {
            window_kind = NormKind::Bound;
        }
    }
    if window.is_finite() {
        r.quantities.push(WitnessQuantity::new(
            "||g_j'||_{p,M_1}",
            window.exp(),
            2f64.powf(1.0 / p) * eps_j,
            window_kind,
        ));
    }
    r.values.push(("support".into(), chain.support_len()));
    r.values.push(("materialized_boxes".into(), moll.materialized as f64));
    if !disjoint {
        r.notes
            .push("interval shorter than the mollifier support; derivative norms are p-triangle bounds".into());
    }
    Ok(BetaWitness {
        g_j,
        mollifier: moll,
        report: r.finish(),
    })
}

// ---------------------------------------------------------------------
// oscillation partition

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    /// Index of the unit cell it came from.
    pub unit: usize,
    pub depth: usize,
    pub mean: f64,
    /// `sup_I |f - mean_I f|`
    pub osc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub cells: Vec<Cell>,
    /// `Σ |I| osc_I^p`
    pub sum: f64,
    pub p: f64,
    pub eps: f64,
}

/// Mean and oscillation of `f` on `[lo, hi]`, from exact extrema.
pub fn oscillation(f: &PiecewisePoly, lo: f64, hi: f64) -> (f64, f64) {
    let mean = f.integral_on(lo, hi) / (hi - lo);
    let (mn, mx) = f.extrema_on(lo, hi);
    (mean, (mx - mean).max(mean - mn).max(0.0))
}

#[allow(clippy::too_many_arguments)]
fn refine(f: &PiecewisePoly, p: f64, thresh: f64, unit: usize, lo: f64, hi: f64, depth: usize, out: &mut Vec<Cell>) -> Result<()> {
    let (mean, osc) = oscillation(f, lo, hi);
    if osc.powf(p) <= thresh {
        out.push(Cell {
            lo,
            hi,
            unit,
            depth,
            mean,
            osc,
        });
        return Ok(());
    }
    let mid = 0.5 * (lo + hi);
    if depth >= MAX_DEPTH || !(lo < mid && mid < hi) {
        return Err(Error::DepthExhausted);
    }
    refine(f, p, thresh, unit, lo, mid, depth + 1, out)?;
    refine(f, p, thresh, unit, mid, hi, depth + 1, out)
}

/// Unit cells from the left end of the support (the last one clipped to
/// the support), halved until `osc^p ≤ eps · 2^{-m}` in unit cell `m`.
pub fn oscillation_partition(f: &PiecewisePoly, p: f64, eps: f64) -> Result<Partition> {
    check_p(p)?;
    check_eps(eps)?;
    let Some((s0, s1)) = f.support() else {
        return Ok(Partition {
            cells: vec![Cell {
                lo: 0.0,
                hi: 1.0,
                unit: 0,
                depth: 0,
                mean: 0.0,
                osc: 0.0,
            }],
            sum: 0.0,
            p,
            eps,
        });
    };
    let units = ((s1 - s0).ceil() as usize).max(1);
    let per_unit = (0..units)
        .into_par_iter()
        .map(|m| {
            let lo = s0 + m as f64;
            let hi = if m + 1 == units { s1 } else { s0 + (m + 1) as f64 };
            let mut out = Vec::new();
            refine(f, p, eps * 0.5f64.powi(m as i32), m, lo, hi, 0, &mut out)?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<Cell> = per_unit.into_iter().flatten().collect();
    let mut sum = CompensatedSum::new();
    for c in &cells {
        sum.add((c.hi - c.lo) * c.osc.powf(p));
    }
    Ok(Partition {
        cells,
        sum: sum.value(),
        p,
        eps,
    })
}

// ---------------------------------------------------------------------
// γ lift

/// Spacing of a grid on which every breakpoint up to `reach` in modulus,
/// and sums of such, are exact in `f64`.
fn grid_quantum(reach: f64) -> f64 {
    let e = reach.max(1.0).log2().ceil() as i32;
    2f64.powi(e - 52)
}

fn on_grid(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

/// The chain actually placed in every interval: the resolvable prefix of
/// the mollifier's widths rounded to the grid (so translated copies are
/// bit-identical), followed by the remaining widths as a model.
fn gridded_chain(moll: &Mollifier, q: f64) -> Result<(LogChain, PiecewisePoly, usize)> {
    let log_a = &moll.plan.log_a;
    let a1 = log_a[0].exp();
    let floor = (RESOLVE_RATIO * a1).max(4.0 * q);
    let mut widths = Vec::new();
    for &la in log_a.iter().take(MATERIALIZE_CAP) {
        let a = la.exp();
        if a < floor {
            break;
        }
        widths.push(on_grid(a, q));
    }
    if widths.is_empty() {
        return Err(Error::UnderflowWidth {
            index: 1,
            log_width: log_a[0],
        });
    }
    let mut used: Vec<f64> = widths.iter().map(|w| w.ln()).collect();
    used.extend_from_slice(&log_a[widths.len()..]);
    let chain = LogChain::new(used, moll.plan.tail_bound)?;
    let phi = iterated_box(&widths)?;
    Ok((chain, phi, widths.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    pub lo: f64,
    pub hi: f64,
    /// Mean of the primitive on the interval.
    pub lambda: f64,
    pub delta: f64,
    /// Achieved `‖Φ_n‖_{p,M_1}`.
    pub eps_n: f64,
    /// Left ends of the two mollifier copies.
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaWitness {
    /// The input, minus a unit box of mass `∫g` when that mass is nonzero.
    pub g: PiecewisePoly,
    pub mass_correction: f64,
    pub f: PiecewisePoly,
    pub partition: Partition,
    pub intervals: Vec<GammaInterval>,
    pub phi: PiecewisePoly,
    pub u: PiecewisePoly,
    pub report: WitnessReport,
}

/// `φ = Σ λ_n (Φ_{n,1} - Φ_{n,2})` with the copies at the grid points
/// `x1`, `x2` of each interval.
fn assemble_correction(intervals: &[GammaInterval], phi: &PiecewisePoly) -> Result<PiecewisePoly> {
    let base = phi.breakpoints();
    let mut breaks: Vec<f64> = Vec::new();
    let mut pieces: Vec<Vec<f64>> = Vec::new();
    let place = |x: f64, c: f64, breaks: &mut Vec<f64>, pieces: &mut Vec<Vec<f64>>| {
        if let Some(&last) = breaks.last() {
            if last < x + base[0] {
                pieces.push(vec![0.0]);
                breaks.push(x + base[0]);
            }
        } else {
            breaks.push(x + base[0]);
        }
        for (i, cs) in phi.pieces().iter().enumerate() {
            pieces.push(cs.iter().map(|v| c * v).collect());
            breaks.push(x + base[i + 1]);
        }
    };
    for iv in intervals.iter().filter(|iv| iv.lambda != 0.0) {
        place(iv.x1, iv.lambda, &mut breaks, &mut pieces);
        place(iv.x2, -iv.lambda, &mut breaks, &mut pieces);
    }
    if pieces.is_empty() {
        return Ok(PiecewisePoly::zero());
    }
    PiecewisePoly::new(breaks, pieces)
}

/// Lifts `g` to `u` with `u' - g = -φ` small in the `M_1` quasinorm and
/// `‖u‖_p^p ≤ (2^{1+p} ‖f‖_∞^p + 1) ε`, where `f` is the primitive of `g`.
pub fn lift_gamma_witness(g: &PiecewisePoly, p: f64, m: &WeightSequence, eps: f64, n_check: usize) -> Result<GammaWitness> {
    check_p(p)?;
    check_eps(eps)?;
    let mut r = WitnessReport::new(WitnessKind::Gamma, None, p, eps);
    let Some((s0, s1)) = g.support() else {
        let zero = PiecewisePoly::zero();
        r.quantities.push(WitnessQuantity::computed("||u||_p^p", 0.0, eps));
        r.quantities.push(WitnessQuantity::computed("||u'-g||_{p,M_1}^p", 0.0, 0.0));
        return Ok(GammaWitness {
            g: zero.clone(),
            mass_correction: 0.0,
            f: zero.clone(),
            partition: oscillation_partition(&zero, p, eps / 3.0)?,
            intervals: Vec::new(),
            phi: zero.clone(),
            u: zero,
            report: r.finish(),
        });
    };

    // a primitive with compact support needs ∫g = 0
    let total = g.mass();
    let scale = g.sup_norm() * (s1 - s0);
    let (g, mass_correction, s_end) = if total.abs() > 1e-14 * scale.max(f64::MIN_POSITIVE) {
        let w = 0.5 * eps;
        let bump = PiecewisePoly::from_global_poly(s1, s1 + w, &[total / w])?;
        r.notes.push(format!(
            "integral {total:e} removed with a box of width {w:e} placed at the right end of the support"
        ));
        (g.sub(&bump), total, s1 + w)
    } else {
        (g.clone(), 0.0, s1)
    };
    let (f, _) = g.primitive();
    let f_sup = f.sup_norm();

    let partition = oscillation_partition(&f, p, eps / 3.0)?;
    let n_cells = partition.cells.len();
    let deltas: Vec<f64> = partition
        .cells
        .iter()
        .map(|c| (eps / n_cells as f64).min(0.25 * (c.hi - c.lo)))
        .collect();
    let delta_min = deltas.iter().cloned().fold(f64::INFINITY, f64::min);

    // one mollifier, built for the smallest interval, serves every interval
    let m1 = m.shift(1);
    let orders = finite_orders(&m1, n_check);
    let target = EPS_SAFETY * delta_min.powf(1.0 / p);
    let moll = mollifier_for(&m1, p, target, n_check)?;
    let q = grid_quantum(s0.abs().max(s_end.abs()));
    let (chain, phi_local, placed) = gridded_chain(&moll, q)?;
    let span = chain.support_len();
    let norms = orders
        .iter()
        .map(|&n| chain.lp_derivative(n, p))
        .collect::<Result<Vec<_>>>()?;
    let log_m1 = orders.iter().map(|&n| m1.log_m(n)).collect::<Result<Vec<_>>>()?;
    let eps_n = norms
        .iter()
        .zip(&log_m1)
        .map(|(o, lm)| o.log_value / p - lm)
        .fold(f64::NEG_INFINITY, f64::max)
        .exp();
    let norm_kind = if norms.iter().all(|o| o.kind == NormKind::Computed) {
        NormKind::Computed
    } else {
        NormKind::Bound
    };

    let intervals: Vec<GammaInterval> = partition
        .cells
        .iter()
        .zip(&deltas)
        .map(|(c, &d)| {
            let inset = 0.5 * (d - span);
            GammaInterval {
                lo: c.lo,
                hi: c.hi,
                lambda: c.mean,
                delta: d,
                eps_n,
                x1: on_grid(c.lo + inset, q),
                x2: on_grid(c.hi - d + inset, q),
            }
        })
        .collect();
    let placed_inside = intervals.iter().all(|iv| {
        iv.x1 >= iv.lo && iv.x1 + span <= iv.lo + iv.delta && iv.x2 >= iv.hi - iv.delta && iv.x2 + span <= iv.hi
    });
    let phi = assemble_correction(&intervals, &phi_local)?;
    let h = g.sub(&phi);
    let (u, tail) = h.primitive();

    // certificates
    let u_norm = u.lp_quasinorm(p, DEFAULT_LP_TOL)?;
    let fp = f_sup.powf(p);
    r.quantities.push(WitnessQuantity::computed(
        "||u||_p^p",
        u_norm,
        (2f64.powf(1.0 + p) * fp + 1.0) * eps,
    ));
    r.quantities
        .push(WitnessQuantity::computed("oscillation sum", partition.sum, eps));
    let mut sd = CompensatedSum::new();
    let mut se = CompensatedSum::new();
    let mut sl = CompensatedSum::new();
    for iv in &intervals {
        sd.add(iv.delta);
        se.add(iv.eps_n.powf(p));
        sl.add(iv.lambda.abs().powf(p));
    }
    r.quantities.push(WitnessQuantity::computed("sum delta_n", sd.value(), eps));
    r.quantities.push(WitnessQuantity::computed("sum eps_n^p", se.value(), eps));
    // the copies have disjoint supports, so the p-th powers add exactly
    let phi_norm = norms
        .iter()
        .zip(&log_m1)
        .map(|(o, lm)| 2.0 * sl.value() * (o.log_value - p * lm).exp())
        .fold(0.0, f64::max);
    r.quantities.push(WitnessQuantity::new(
        "||u'-g||_{p,M_1}^p",
        phi_norm,
        2.0 * fp * se.value(),
        norm_kind,
    ));

    let du = u.regular_derivative();
    let phi_sup = phi.sup_norm();
    let value_scale = 1f64.max(phi_sup).max(g.sup_norm());
    let mids: Vec<f64> = u.breakpoints().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let identity = mids
        .par_iter()
        .map(|&x| (du.eval(x) - g.eval(x) + phi.eval(x)).abs())
        .reduce(|| 0.0, f64::max);
    r.quantities.push(WitnessQuantity::computed(
        "max |u'-g+phi|",
        identity,
        IDENTITY_TOL * value_scale,
    ));
    r.quantities
        .push(WitnessQuantity::computed("|integral(g-phi)|", tail.abs(), MASS_TOL));
    let (u_lo, u_hi) = u.support().unwrap_or((s0, s0));
    let overshoot = (s0 - u_lo).max(u_hi - (s1 + eps)).max(0.0);
    r.quantities
        .push(WitnessQuantity::computed("support overshoot", overshoot, 0.0));
    r.quantities.push(WitnessQuantity::computed(
        "copies outside J_n",
        if placed_inside { 0.0 } else { 1.0 },
        0.0,
    ));

    r.values.push(("sup f".into(), f_sup));
    r.values.push(("intervals".into(), n_cells as f64));
    r.values.push(("delta_min".into(), delta_min));
    r.values.push(("eps_n".into(), eps_n));
    r.values.push(("mollifier support".into(), span));
    r.values.push(("grid quantum".into(), q));
    r.values.push(("materialized boxes".into(), placed as f64));
    r.values.push(("sup phi".into(), phi_sup));
    r.notes.push(
        "one mollifier serves every interval; a rescaled copy Φ_s(x) = Φ(x/s)/s would have ‖Φ_s^(n)‖_p^p = s^(1-p-np) ‖Φ^(n)‖_p^p, here s = 1"
            .into(),
    );
    if placed < chain.len() || chain.tail() > 0.0 {
        r.notes.push(format!(
            "{placed} boxes placed explicitly; the remaining widths (total {:e}) enter the norms but not u",
            chain.log_suffix(placed).exp()
        ));
    }
    Ok(GammaWitness {
        g,
        mass_correction,
        f,
        partition,
        intervals,
        phi,
        u,
        report: r.finish(),
    })
}
