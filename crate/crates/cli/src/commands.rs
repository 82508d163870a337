//! Subcommand definitions and the computations behind them. Nothing here
//! writes to disk; `run` in the crate root does that.

use std::path::PathBuf;

use anyhow::Result;
use carleman_core::bootstrap::{bootstrap_chain_check, bootstrap_step_check, verify_sup_control, ChainCheck, StepCheck, SupControlCheck, DEFAULT_N_WIN};
use carleman_core::classify::{classify, quasianalyticity_witness, theta_strictness_witness, ClassifyOptions, RegimeReport, DEFAULT_K_TERMS};
use carleman_core::disconnexion::{default_eps, douady_witness, lift_beta_witness, lift_gamma_witness, sawtooth, WitnessReport};
use carleman_core::mollifier::{assess_invisible_carleman, assess_invisible_sobolev, build_invisible_carleman, Certificates, Mollifier, MollifierPlan};
use carleman_core::pwpoly::PiecewisePoly;
use carleman_core::weights::{kappa, KappaResult, DEFAULT_KAPPA_TOL, DEFAULT_N_MAX};
use carleman_core::Error as CoreError;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::render::{Cell, Samples, Table};
use crate::spec::{check_p, parse_grid, parse_usize_list, FunctionSpec, WeightSpec};
use crate::ConfigError;

#[derive(Parser, Debug, Clone)]
#[command(name = "carleman-lab", version, about = "Weighted L^p smoothness classes for 0<p<1: certificates, witnesses and regime tables")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Write the JSON report here; stdout then gets the text table.
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Record the wall-clock time in the JSON report.
    #[arg(long, global = true)]
    pub timestamp: bool,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// The p-characteristic κ(p, M).
    Kappa(KappaArgs),
    /// Phase, regularity and quasianalyticity of a weighted class.
    Classify(ClassifyArgs),
    /// Build an invisible mollifier and certify it.
    #[command(subcommand)]
    Mollifier(MollifierCmd),
    /// Disconnexion witnesses.
    #[command(subcommand)]
    Disconnect(DisconnectCmd),
    /// Check the interpolation inequalities on a test function.
    Bootstrap(BootstrapArgs),
    /// Witnesses for quasianalyticity and for strictness in θ.
    #[command(subcommand)]
    Witness(WitnessCmd),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kappa(_) => "kappa",
            Command::Classify(_) => "classify",
            Command::Mollifier(MollifierCmd::Sobolev(_)) => "mollifier sobolev",
            Command::Mollifier(MollifierCmd::Carleman(_)) => "mollifier carleman",
            Command::Disconnect(DisconnectCmd::Douady(_)) => "disconnect douady",
            Command::Disconnect(DisconnectCmd::Beta(_)) => "disconnect beta",
            Command::Disconnect(DisconnectCmd::Gamma(_)) => "disconnect gamma",
            Command::Bootstrap(_) => "bootstrap",
            Command::Witness(WitnessCmd::Quasianalytic(_)) => "witness quasianalytic",
            Command::Witness(WitnessCmd::Theta(_)) => "witness theta",
        }
    }
}

/// One `p`, or a sweep.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[group(required = true, multiple = false)]
pub struct PSelect {
    #[arg(short)]
    pub p: Option<f64>,
    /// Sweep, e.g. `p=0.1:0.9:0.1`.
    #[arg(long)]
    pub grid: Option<String>,
}

impl PSelect {
    fn values(&self) -> Result<Vec<f64>, ConfigError> {
        match (&self.grid, self.p) {
            (Some(g), _) => parse_grid(g),
            (None, Some(p)) => check_p(p).map(|_| vec![p]),
            (None, None) => Err(ConfigError::new("give -p or --grid")),
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaArgs {
    /// Weight spec, e.g. `gevrey:1.5|shift:1`.
    #[arg(short, long)]
    pub weights: String,
    #[command(flatten)]
    pub ps: PSelect,
    #[arg(long, default_value_t = DEFAULT_KAPPA_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    pub n_max: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyArgs {
    #[arg(short, long)]
    pub weights: String,
    #[command(flatten)]
    pub ps: PSelect,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    pub n_max: usize,
    #[arg(long, default_value_t = DEFAULT_KAPPA_TOL)]
    pub kappa_tol: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleArgs {
    /// Write plot samples as CSV.
    #[arg(long, value_name = "PATH", num_args = 0..=1, default_missing_value = "samples.csv")]
    pub emit_samples: Option<PathBuf>,
    /// Number of sample intervals.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierCmd {
    /// Invisible for the first k derivatives.
    Sobolev(SobolevArgs),
    /// Invisible in a weighted class.
    Carleman(CarlemanArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevArgs {
    #[arg(short)]
    pub k: usize,
    #[arg(short)]
    pub p: f64,
    #[arg(long)]
    pub eps: f64,
    /// Highest derivative written with the samples.
    #[arg(long, default_value_t = 2)]
    pub derivatives: usize,
    #[command(flatten)]
    pub out: SampleArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanArgs {
    #[arg(short, long)]
    pub weights: String,
    #[arg(short)]
    pub p: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 4096)]
    pub k_max: usize,
    #[arg(long, default_value_t = 6)]
    pub n_check: usize,
    #[arg(long, default_value_t = 2)]
    pub derivatives: usize,
    #[command(flatten)]
    pub out: SampleArgs,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisconnectCmd {
    /// Sawtooth functions with f_j → 0 and f_j' → 1.
    Douady(DouadyArgs),
    /// Smoothed indicator of an interval.
    Beta(BetaArgs),
    /// Lift of a function with small primitive.
    Gamma(GammaArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DouadyArgs {
    #[arg(short)]
    pub p: f64,
    #[arg(short, default_value = "2,4,8,16")]
    pub j: String,
    /// Use ε_j = j^(-s); the default is s = 3.
    #[arg(long)]
    pub eps_power: Option<f64>,
    #[command(flatten)]
    pub out: SampleArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaArgs {
    #[arg(short, long)]
    pub weights: String,
    #[arg(short)]
    pub p: f64,
    #[arg(short, default_value_t = 0.0)]
    pub a: f64,
    #[arg(short, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 3)]
    pub n_check: usize,
    #[command(flatten)]
    pub out: SampleArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaArgs {
    /// Piecewise function to lift, e.g. `boxes:1,1,1,1|d`.
    #[arg(short, long)]
    pub g: String,
    #[arg(short, long)]
    pub weights: String,
    #[arg(short)]
    pub p: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 3)]
    pub n_check: usize,
    #[command(flatten)]
    pub out: SampleArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapArgs {
    /// Test function, e.g. `hermite:-1,0,1` or `boxes:1,0.5,0.25`.
    #[arg(short, long)]
    pub function: String,
    /// Weights for the sup-norm control; skipped when absent.
    #[arg(short, long)]
    pub weights: Option<String>,
    #[arg(short)]
    pub p: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Highest order of the chained inequality.
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    /// Highest k for the sup-norm control.
    #[arg(short, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_N_WIN)]
    pub n_win: usize,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessCmd {
    /// A compactly supported function of given tameness index.
    Quasianalytic(QaArgs),
    /// A function in the θ' class but not the θ class.
    Theta(ThetaArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaArgs {
    #[arg(short, long)]
    pub weights: String,
    #[arg(short)]
    pub p: f64,
    #[arg(long)]
    pub theta_prime: f64,
    #[arg(long, default_value_t = DEFAULT_K_TERMS)]
    pub k_terms: usize,
    #[arg(long, default_value_t = 6)]
    pub n_check: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaArgs {
    #[arg(short, long)]
    pub weights: String,
    #[arg(short)]
    pub p: f64,
    #[arg(long)]
    pub theta: f64,
    #[arg(long)]
    pub theta_prime: f64,
}

/// What a subcommand produced, before anything is written.
pub struct Run {
    pub pass: bool,
    pub result: serde_json::Value,
    pub table: Table,
    pub samples: Option<(PathBuf, Samples)>,
}

impl Run {
    fn new<T: Serialize>(pass: bool, result: &T, table: Table) -> Result<Self> {
        Ok(Self {
            pass,
            result: serde_json::to_value(result)?,
            table,
            samples: None,
        })
    }
}

/// The serde name of a unit enum variant.
fn tag<T: Serialize>(x: &T) -> String {
    match serde_json::to_value(x) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn positive(x: f64, what: &str) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(format!("{what} must be positive and finite, got {x}")))
    }
}

fn nonneg(x: f64, what: &str) -> Result<(), ConfigError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(format!("{what} must be nonnegative and finite, got {x}")))
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

pub fn execute(cmd: &Command) -> Result<Run> {
    match cmd {
        Command::Kappa(a) => run_kappa(a),
        Command::Classify(a) => run_classify(a),
        Command::Mollifier(MollifierCmd::Sobolev(a)) => run_sobolev(a),
        Command::Mollifier(MollifierCmd::Carleman(a)) => run_carleman(a),
        Command::Disconnect(DisconnectCmd::Douady(a)) => run_douady(a),
        Command::Disconnect(DisconnectCmd::Beta(a)) => run_beta(a),
        Command::Disconnect(DisconnectCmd::Gamma(a)) => run_gamma(a),
        Command::Bootstrap(a) => run_bootstrap(a),
        Command::Witness(WitnessCmd::Quasianalytic(a)) => run_qa(a),
        Command::Witness(WitnessCmd::Theta(a)) => run_theta(a),
    }
}

// ---------------------------------------------------------------------
// kappa and classify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub p: f64,
    pub kappa: KappaResult,
}

fn run_kappa(a: &KappaArgs) -> Result<Run> {
    let spec = WeightSpec::parse(&a.weights)?;
    let ps = a.ps.values()?;
    positive(a.tol, "tol")?;
    if a.n_max == 0 {
        return Err(ConfigError::new("n-max must be positive").into());
    }
    let mut rows = ps
        .par_iter()
        .map(|&p| {
            let m = spec.resolve(p)?;
            Ok(KappaRow {
                p,
                kappa: kappa(&m, p, a.tol, a.n_max)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|x, y| x.p.total_cmp(&y.p));
    let mut t = Table::new(&["p", "status", "kappa", "partial_sum", "truncation_index", "tail_bound", "degenerate"]);
    for r in &rows {
        let k = &r.kappa;
        t.push(vec![
            r.p.into(),
            tag(&k.status).into(),
            k.value.into(),
            k.partial_sum.into(),
            k.truncation_index.into(),
            k.tail_bound.into(),
            k.degenerate.into(),
        ]);
    }
    Run::new(true, &rows, t)
}

pub const CLASSIFY_COLUMNS: [&str; 11] = [
    "p",
    "theta",
    "phase",
    "kappa_status",
    "kappa",
    "log_convex",
    "p_regular",
    "decay_regular",
    "quasianalytic",
    "of_n",
    "confidence",
];

/// One row per report, sorted by `p`.
pub fn classify_table(reports: &[RegimeReport]) -> Table {
    let mut t = Table::new(&CLASSIFY_COLUMNS);
    for r in reports {
        t.push(vec![
            r.p.into(),
            r.theta.into(),
            tag(&r.phase).into(),
            r.kappa.as_ref().map(|k| tag(&k.status)).unwrap_or_default().into(),
            r.kappa.as_ref().and_then(|k| k.value).into(),
            r.regularity.log_convex.into(),
            r.regularity.p_regular.into(),
            r.regularity.decay_regular.into(),
            tag(&r.quasianalytic.verdict).into(),
            r.quasianalytic.of_n.as_ref().map(|d| tag(&d.verdict)).unwrap_or_default().into(),
            r.quasianalytic.confidence.as_ref().map(tag).unwrap_or_default().into(),
        ]);
    }
    t.sort_by_column("p");
    t
}

fn run_classify(a: &ClassifyArgs) -> Result<Run> {
    let spec = WeightSpec::parse(&a.weights)?;
    let ps = a.ps.values()?;
    nonneg(a.theta, "theta")?;
    positive(a.kappa_tol, "kappa-tol")?;
    if a.n_max == 0 {
        return Err(ConfigError::new("n-max must be positive").into());
    }
    let opts = ClassifyOptions {
        n_max: a.n_max,
        kappa_tol: a.kappa_tol,
        ..ClassifyOptions::default()
    };
    let mut reports = ps
        .par_iter()
        .map(|&p| Ok(classify(&spec.resolve(p)?, p, a.theta, &opts)?))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|x, y| x.p.total_cmp(&y.p));
    let t = classify_table(&reports);
    Run::new(true, &reports, t)
}

// ---------------------------------------------------------------------
// mollifiers

/// The mollifier without its materialised polynomial, which can be large.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierReport {
    pub plan: MollifierPlan,
    pub materialized: usize,
    pub pieces: usize,
    pub certificates: Certificates,
}

fn certificate_table(c: &Certificates) -> Table {
    let mut t = Table::new(&["certificate", "order", "measured", "bound", "pass"]);
    t.push(vec![
        "mass_error".into(),
        Cell::Empty,
        (c.mass.measured - 1.0).abs().into(),
        c.mass.bound.into(),
        c.mass.pass.into(),
    ]);
    for (name, chk) in [("support", &c.support), ("nonnegative", &c.nonnegative), ("quasinorm", &c.quasinorm)] {
        t.push(vec![name.into(), Cell::Empty, chk.measured.into(), chk.bound.into(), chk.pass.into()]);
    }
    for o in &c.orders {
        t.push(vec![
            "log_lp_p".into(),
            o.n.into(),
            o.log_lp_p.into(),
            o.log_target.into(),
            o.pass.into(),
        ]);
    }
    t.push(vec![
        "tameness_decreasing".into(),
        Cell::Empty,
        c.tameness.theta_hat.into(),
        Cell::Empty,
        c.tameness_decreasing.into(),
    ]);
    t
}

fn mollifier_samples(phi: &PiecewisePoly, derivatives: usize, n: usize) -> Result<Samples> {
    let (lo, hi) = phi.support().unwrap_or((0.0, 0.0));
    let x = grid(lo, hi, n);
    let mut columns = vec!["phi".to_string()];
    let mut values = vec![x.iter().map(|&t| phi.eval(t)).collect::<Vec<_>>()];
    for k in 1..=derivatives {
        let d = match phi.derivative(k) {
            Ok(d) if d.is_regular() => d.regular,
            _ => break,
        };
        columns.push(format!("phi_d{k}"));
        values.push(x.iter().map(|&t| d.eval(t)).collect());
    }
    Ok(Samples { columns, x, values })
}

fn mollifier_run(m: Mollifier, out: &SampleArgs, derivatives: usize) -> Result<Run> {
    let report = MollifierReport {
        plan: m.plan,
        materialized: m.materialized,
        pieces: m.phi.num_pieces(),
        certificates: m.certificates,
    };
    let t = certificate_table(&report.certificates);
    let mut run = Run::new(report.certificates.all_pass, &report, t)?;
    if let Some(path) = &out.emit_samples {
        run.samples = Some((path.clone(), mollifier_samples(&m.phi, derivatives, out.samples)?));
    }
    Ok(run)
}

fn run_sobolev(a: &SobolevArgs) -> Result<Run> {
    check_p(a.p)?;
    positive(a.eps, "eps")?;
    let m = assess_invisible_sobolev(a.k, a.p, a.eps)?;
    mollifier_run(m, &a.out, a.derivatives)
}

fn run_carleman(a: &CarlemanArgs) -> Result<Run> {
    check_p(a.p)?;
    positive(a.eps, "eps")?;
    let m = WeightSpec::parse(&a.weights)?.resolve(a.p)?;
    let moll = match build_invisible_carleman(&m, a.p, a.eps, a.k_max, a.n_check) {
        Ok(moll) => moll,
        // report the certificates at the largest K tried
        Err(CoreError::KExhausted { .. }) if a.k_max >= 8 => {
            let k = 8usize << (usize::BITS - 1 - (a.k_max / 8).leading_zeros());
            assess_invisible_carleman(&m, a.p, a.eps, k, a.n_check)?
        }
        Err(e) => return Err(e.into()),
    };
    mollifier_run(moll, &a.out, a.derivatives)
}

// ---------------------------------------------------------------------
// disconnexion

fn witness_table(reports: &[WitnessReport]) -> Table {
    let mut t = Table::new(&["j", "eps", "quantity", "measured", "bound", "pass"]);
    for r in reports {
        for q in &r.quantities {
            t.push(vec![
                r.j.map_or(Cell::Empty, Cell::from),
                r.eps.into(),
                q.name.clone().into(),
                q.measured.into(),
                q.bound.into(),
                q.pass.into(),
            ]);
        }
    }
    t
}

fn run_douady(a: &DouadyArgs) -> Result<Run> {
    check_p(a.p)?;
    let js = parse_usize_list(&a.j)?;
    if js.contains(&0) {
        return Err(ConfigError::new("j must be positive").into());
    }
    if let Some(s) = a.eps_power {
        positive(s, "eps-power")?;
    }
    let eps = |j: usize| a.eps_power.map_or(default_eps(j), |s| (j as f64).powf(-s));
    let reports = js
        .par_iter()
        .map(|&j| Ok(douady_witness(a.p, j, Some(eps(j)))?))
        .collect::<Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.pass);
    let t = witness_table(&reports);
    let mut run = Run::new(pass, &reports, t)?;
    if let Some(path) = &a.out.emit_samples {
        let x = grid(0.0, 1.0, a.out.samples);
        let mut columns = Vec::new();
        let mut values = Vec::new();
        for &j in &js {
            let f = sawtooth(j, eps(j))?;
            columns.push(format!("f_{j}"));
            values.push(x.iter().map(|&t| f.eval(t)).collect());
        }
        run.samples = Some((path.clone(), Samples { columns, x, values }));
    }
    Ok(run)
}

fn run_beta(a: &BetaArgs) -> Result<Run> {
    check_p(a.p)?;
    positive(a.eps, "eps")?;
    if !(a.a < a.b) {
        return Err(ConfigError::new(format!("need a < b, got [{}, {}]", a.a, a.b)).into());
    }
    let m = WeightSpec::parse(&a.weights)?.resolve(a.p)?;
    let w = lift_beta_witness(a.a, a.b, a.p, &m, a.eps, a.n_check)?;
    let reports = vec![w.report];
    let t = witness_table(&reports);
    let mut run = Run::new(reports[0].pass, &reports, t)?;
    if let Some(path) = &a.out.emit_samples {
        let (lo, hi) = w.g_j.support().unwrap_or((a.a, a.b));
        let x = grid(lo.min(a.a), hi.max(a.b), a.out.samples);
        let values = vec![x.iter().map(|&t| w.g_j.eval(t)).collect()];
        run.samples = Some((path.clone(), Samples { columns: vec!["g_j".into()], x, values }));
    }
    Ok(run)
}

fn run_gamma(a: &GammaArgs) -> Result<Run> {
    check_p(a.p)?;
    positive(a.eps, "eps")?;
    let g = FunctionSpec::parse(&a.g)?.piecewise()?;
    let m = WeightSpec::parse(&a.weights)?.resolve(a.p)?;
    let w = lift_gamma_witness(&g, a.p, &m, a.eps, a.n_check)?;
    let reports = vec![w.report.clone()];
    let t = witness_table(&reports);
    let mut run = Run::new(reports[0].pass, &reports, t)?;
    if let Some(path) = &a.out.emit_samples {
        let span = [&w.g, &w.u].iter().filter_map(|f| f.support()).fold(None, |acc: Option<(f64, f64)>, s| {
            Some(acc.map_or(s, |a| (a.0.min(s.0), a.1.max(s.1))))
        });
        let (lo, hi) = span.unwrap_or((0.0, 1.0));
        let x = grid(lo, hi, a.out.samples);
        let cols: [(&str, &PiecewisePoly); 4] = [("g", &w.g), ("f", &w.f), ("phi", &w.phi), ("u", &w.u)];
        let values = cols.iter().map(|(_, f)| x.iter().map(|&t| f.eval(t)).collect()).collect();
        let columns = cols.iter().map(|(n, _)| n.to_string()).collect();
        run.samples = Some((path.clone(), Samples { columns, x, values }));
    }
    Ok(run)
}

// ---------------------------------------------------------------------
// bootstrap

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub step: StepCheck,
    pub chain: Vec<ChainCheck>,
    pub sup_control: Vec<SupControlCheck>,
    pub notes: Vec<String>,
}

fn run_bootstrap(a: &BootstrapArgs) -> Result<Run> {
    check_p(a.p)?;
    nonneg(a.theta, "theta")?;
    let f = FunctionSpec::parse(&a.function)?;
    let model = f.model();
    let mut notes = Vec::new();
    let step = bootstrap_step_check(model, a.p)?;
    let mut chain = Vec::new();
    for n in 1..=a.order {
        match bootstrap_chain_check(model, a.p, n) {
            Ok(c) => chain.push(c),
            Err(CoreError::DistributionalDerivative { order }) => {
                notes.push(format!("chain stops at n = {}: derivative {order} is not a function", n - 1));
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut sup_control = Vec::new();
    if let Some(w) = &a.weights {
        let m = WeightSpec::parse(w)?.resolve(a.p)?;
        for k in 0..=a.k {
            sup_control.push(verify_sup_control(model, &m, a.p, a.theta, k, a.n_win)?);
        }
    }
    let report = BootstrapReport {
        step,
        chain,
        sup_control,
        notes,
    };
    let mut t = Table::new(&["inequality", "order", "lhs", "rhs", "slack", "pass"]);
    t.push(vec![
        "step".into(),
        1usize.into(),
        step.lhs.into(),
        step.rhs.into(),
        step.slack.into(),
        step.pass.into(),
    ]);
    for c in &report.chain {
        t.push(vec![
            "chain_log".into(),
            c.n.into(),
            c.log_lhs.into(),
            c.log_rhs.into(),
            c.log_slack.into(),
            c.pass.into(),
        ]);
    }
    for s in &report.sup_control {
        t.push(vec![
            "sup_control_log".into(),
            s.k.into(),
            s.lhs.ln().into(),
            (s.log_bound + s.window.value.ln()).into(),
            s.log_slack.into(),
            s.pass.into(),
        ]);
    }
    let pass = step.pass && report.chain.iter().all(|c| c.pass) && report.sup_control.iter().all(|s| s.pass);
    Run::new(pass, &report, t)
}

// ---------------------------------------------------------------------
// witnesses

fn tameness_rows(t: &mut Table, points: &[carleman_core::mollifier::TamenessPoint]) {
    for pt in points {
        t.push(vec![pt.n.into(), pt.value.into(), pt.lower.into(), tag(&pt.kind).into()]);
    }
}

fn run_qa(a: &QaArgs) -> Result<Run> {
    check_p(a.p)?;
    positive(a.theta_prime, "theta-prime")?;
    let m = WeightSpec::parse(&a.weights)?.resolve(a.p)?;
    let w = quasianalyticity_witness(&m, a.p, a.theta_prime, a.k_terms, a.n_check)?;
    let mut t = Table::new(&["n", "tameness", "lower", "kind"]);
    tameness_rows(&mut t, &w.tameness.points);
    Run::new(w.all_pass, &w, t)
}

fn run_theta(a: &ThetaArgs) -> Result<Run> {
    check_p(a.p)?;
    nonneg(a.theta, "theta")?;
    positive(a.theta_prime, "theta-prime")?;
    let m = WeightSpec::parse(&a.weights)?.resolve(a.p)?;
    let r = theta_strictness_witness(&m, a.p, a.theta, a.theta_prime)?;
    let mut t = Table::new(&["n", "tameness", "lower", "kind"]);
    tameness_rows(&mut t, &r.witness.tameness.points);
    Run::new(r.pass, &r, t)
}
