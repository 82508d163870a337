//! The small languages used on the command line: weight sequences,
//! test functions, `p` grids and integer lists.
//!
//! ```text
//! const:c  gevrey:σ  expchar:c[@p]  factorial  sobolev:k  table:<path.csv>
//!     modifiers: |shift:k  |scale:c  |tail:loglinear
//! gaussian  hermite:q0,q1,...  boxes:a1,a2,...
//!     modifier: |d[:n]  (classical derivative of a box chain)
//! ```

use std::path::Path;

use carleman_core::bootstrap::HermiteFunction;
use carleman_core::mollifier::{FunctionModel, LogChain};
use carleman_core::pwpoly::{iterated_box, PiecewisePoly};
use carleman_core::weights::{TailRule, WeightSequence};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

type Result<T> = std::result::Result<T, ConfigError>;

fn num(field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| ConfigError::new(format!("{what}: cannot parse '{field}' as a number")))?;
    if !v.is_finite() {
        return Err(ConfigError::new(format!("{what}: '{field}' is not finite")));
    }
    Ok(v)
}

fn count(field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| ConfigError::new(format!("{what}: cannot parse '{field}' as a count")))
}

fn core_err(e: carleman_core::Error) -> ConfigError {
    ConfigError::new(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaseWeight {
    Const { c: f64 },
    Gevrey { sigma: f64 },
    /// `p = None` takes the run's `p`.
    Expchar { c: f64, p: Option<f64> },
    Factorial,
    Sobolev { k: usize },
    Table { log_m: Vec<f64> },
}

/// A parsed weight spec; `resolve` turns it into a sequence for one `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub base: BaseWeight,
    pub shift: usize,
    pub scale: f64,
    pub tail: TailRule,
}

impl WeightSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split('|');
        let head = parts.next().unwrap_or("").trim();
        let (name, arg) = match head.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (head, None),
        };
        let need = |what: &str| arg.ok_or_else(|| ConfigError::new(format!("weight '{name}' needs an argument ({what})")));
        let base = match name {
            "const" => BaseWeight::Const { c: num(need("c")?, "const")? },
            "gevrey" => BaseWeight::Gevrey {
                sigma: num(need("sigma")?, "gevrey")?,
            },
            "expchar" => {
                let a = need("c[@p]")?;
                match a.split_once('@') {
                    Some((c, p)) => BaseWeight::Expchar {
                        c: num(c, "expchar")?,
                        p: Some(num(p, "expchar")?),
                    },
                    None => BaseWeight::Expchar {
                        c: num(a, "expchar")?,
                        p: None,
                    },
                }
            }
            "factorial" => BaseWeight::Factorial,
            "sobolev" => BaseWeight::Sobolev {
                k: count(need("k")?, "sobolev")?,
            },
            "table" => BaseWeight::Table {
                log_m: read_table(Path::new(need("path")?))?,
            },
            "" => return Err(ConfigError::new("empty weight spec")),
            other => return Err(ConfigError::new(format!("unknown weight family '{other}'"))),
        };
        let mut spec = WeightSpec {
            base,
            shift: 0,
            scale: 1.0,
            tail: TailRule::None,
        };
        for m in parts {
            match m.trim().split_once(':') {
                Some(("shift", k)) => spec.shift += count(k, "shift")?,
                Some(("scale", c)) => spec.scale *= num(c, "scale")?,
                Some(("tail", "loglinear")) => spec.tail = TailRule::LogLinear,
                Some(("tail", "none")) => spec.tail = TailRule::None,
                _ => return Err(ConfigError::new(format!("unknown weight modifier '{}'", m.trim()))),
            }
        }
        if !(spec.scale > 0.0) {
            return Err(ConfigError::new(format!("scale must be positive, got {}", spec.scale)));
        }
        // catch bad family parameters before any run starts
        spec.resolve(0.5)?;
        Ok(spec)
    }

    pub fn resolve(&self, p: f64) -> Result<WeightSequence> {
        let base = match &self.base {
            BaseWeight::Const { c } => WeightSequence::constant(*c),
            BaseWeight::Gevrey { sigma } => WeightSequence::gevrey(*sigma),
            BaseWeight::Expchar { c, p: q } => WeightSequence::exp_char(*c, q.unwrap_or(p)),
            BaseWeight::Factorial => Ok(WeightSequence::factorial()),
            BaseWeight::Sobolev { k } => Ok(WeightSequence::sobolev(*k)),
            BaseWeight::Table { log_m } => WeightSequence::table(log_m.clone(), self.tail),
        }
        .map_err(core_err)?;
        let shifted = base.shift(self.shift);
        if self.scale == 1.0 {
            Ok(shifted)
        } else {
            shifted.scale(self.scale).map_err(core_err)
        }
    }
}

/// Rows `n,logM` with `n = 0, 1, 2, ...`; a non-numeric first row is a header.
fn read_table(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| ConfigError::new(format!("table {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ConfigError::new(format!("table {}: {e}", path.display())))?;
        if rec.len() != 2 {
            return Err(ConfigError::new(format!(
                "table {}: expected 2 columns n,logM, got {}",
                path.display(),
                rec.len()
            )));
        }
        if i == 0 && rec[0].parse::<f64>().is_err() {
            continue;
        }
        let n = count(&rec[0], "table index")?;
        if n != out.len() {
            return Err(ConfigError::new(format!(
                "table {}: expected n = {}, found {n}",
                path.display(),
                out.len()
            )));
        }
        let v: f64 = match rec[1].to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" => f64::INFINITY,
            s => s
                .parse()
                .map_err(|_| ConfigError::new(format!("table {}: bad logM '{s}'", path.display())))?,
        };
        out.push(v);
    }
    if out.is_empty() {
        return Err(ConfigError::new(format!("table {} is empty", path.display())));
    }
    Ok(out)
}

/// A test function for `bootstrap` and the γ lift.
#[derive(Debug, Clone)]
pub enum FunctionSpec {
    Hermite(HermiteFunction),
    Chain(LogChain),
    Piecewise(PiecewisePoly),
}

impl FunctionSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split('|');
        let head = parts.next().unwrap_or("").trim();
        let (name, arg) = match head.split_once(':') {
            Some((n, a)) => (n.trim(), a.trim()),
            None => (head, ""),
        };
        let list = || -> Result<Vec<f64>> {
            if arg.is_empty() {
                return Err(ConfigError::new(format!("function '{name}' needs a comma list")));
            }
            arg.split(',').map(|f| num(f, name)).collect()
        };
        let mut derivs = 0usize;
        for m in parts {
            match m.trim().split_once(':') {
                None if m.trim() == "d" => derivs += 1,
                Some(("d", n)) => derivs += count(n, "derivative order")?,
                _ => return Err(ConfigError::new(format!("unknown function modifier '{}'", m.trim()))),
            }
        }
        let out = match name {
            "gaussian" => FunctionSpec::Hermite(HermiteFunction::gaussian()),
            "hermite" => FunctionSpec::Hermite(HermiteFunction::new(list()?).map_err(core_err)?),
            "boxes" => {
                let w = list()?;
                if derivs == 0 {
                    FunctionSpec::Chain(LogChain::from_widths(&w).map_err(core_err)?)
                } else {
                    let f = iterated_box(&w).map_err(core_err)?;
                    let d = f.derivative(derivs).map_err(core_err)?;
                    if !d.is_regular() {
                        return Err(ConfigError::new(format!(
                            "derivative of order {derivs} of {} boxes is not a function",
                            w.len()
                        )));
                    }
                    return Ok(FunctionSpec::Piecewise(d.regular));
                }
            }
            "" => return Err(ConfigError::new("empty function spec")),
            other => return Err(ConfigError::new(format!("unknown function '{other}'"))),
        };
        if derivs > 0 {
            return Err(ConfigError::new("the derivative modifier applies to box chains only"));
        }
        Ok(out)
    }

    pub fn model(&self) -> FunctionModel<'_> {
        match self {
            FunctionSpec::Hermite(h) => FunctionModel::Hermite(h),
            FunctionSpec::Chain(c) => FunctionModel::Chain(c),
            FunctionSpec::Piecewise(f) => FunctionModel::Piecewise(f),
        }
    }

    /// The function as a piecewise polynomial, when it is one.
    pub fn piecewise(&self) -> Result<PiecewisePoly> {
        match self {
            FunctionSpec::Piecewise(f) => Ok(f.clone()),
            FunctionSpec::Chain(c) => {
                let (f, used) = c.materialize().map_err(core_err)?;
                if used < c.len() {
                    return Err(ConfigError::new("box chain too long to materialise"));
                }
                Ok(f)
            }
            FunctionSpec::Hermite(_) => Err(ConfigError::new("a piecewise polynomial is needed here")),
        }
    }
}

/// `p=a:b:s`, inclusive of `b` up to rounding. `a > b` gives an empty sweep.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let body = s
        .trim()
        .strip_prefix("p=")
        .ok_or_else(|| ConfigError::new(format!("grid '{s}' must look like p=a:b:s")))?;
    let f: Vec<&str> = body.split(':').collect();
    if f.len() != 3 {
        return Err(ConfigError::new(format!("grid '{s}' must look like p=a:b:s")));
    }
    let (a, b, step) = (num(f[0], "grid")?, num(f[1], "grid")?, num(f[2], "grid")?);
    if !(step > 0.0) {
        return Err(ConfigError::new("grid step must be positive"));
    }
    if a > b {
        return Ok(Vec::new());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    // trim the drift of repeated addition so 0.1:0.9:0.1 prints as typed
    let ps: Vec<f64> = (0..=n).map(|i| ((a + step * i as f64) * 1e12).round() / 1e12).collect();
    for &p in &ps {
        check_p(p)?;
    }
    Ok(ps)
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|f| count(f, "list")).collect()
}

pub fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(ConfigError::new(format!("p = {p} must lie in (0,1)")))
    }
}
