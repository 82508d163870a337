//! Command-line front end for `carleman-core`.
//!
//! Every subcommand produces a JSON report (`"schema": 1`) and a table.
//! Exit status is 0 when every certificate passes, 1 when one fails and 2
//! for a bad configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::fs;
use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

pub mod commands;
pub mod render;
pub mod spec;

pub use commands::{execute, Command, Run, RunConfig};
use render::{Envelope, SCHEMA};

pub const THREADS_ENV: &str = "CARLEMAN_LAB_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CERTIFICATE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

/// Bad input, inputs outside an operation's hypotheses and unwritable
/// paths are configuration errors; anything the numerics could not
/// establish counts as a failed certificate.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use carleman_core::Error as E;
    if err.downcast_ref::<ConfigError>().is_some() || err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::InvalidParameter(_)
            | E::NonPositiveWidth(_)
            | E::BadPeriod
            | E::NonPositiveWeight { .. }
            | E::DegenerateInfinite { .. }
            | E::TableTooShort { .. }
            | E::OutOfRange { .. }
            | E::NotLogConvex { .. }
            | E::NotApplicable(_)
            | E::DivergentKappa
            | E::DivergentTail,
        ) => EXIT_CONFIG,
        _ => EXIT_CERTIFICATE,
    }
}

/// The JSON text of a finished run.
pub fn render_json(cfg: &RunConfig, run: &Run) -> Result<String> {
    let timestamp = cfg.timestamp.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let env = Envelope {
        schema: SCHEMA,
        command: cfg.command.name().to_string(),
        config: &cfg.command,
        pass: run.pass,
        timestamp,
        result: &run.result,
    };
    Ok(env.to_json()?)
}

/// Runs the command and writes its artifacts one after another. Returns
/// whether every certificate passed.
pub fn run(cfg: &RunConfig) -> Result<bool> {
    let out = execute(&cfg.command)?;
    let json = render_json(cfg, &out)?;
    let stdout = std::io::stdout();
    match &cfg.json {
        Some(path) => {
            fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
            stdout.lock().write_all(out.table.to_text().as_bytes())?;
        }
        None => stdout.lock().write_all(json.as_bytes())?,
    }
    if let Some(path) = &cfg.csv {
        fs::write(path, out.table.to_csv_string()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some((path, samples)) = &out.samples {
        samples
            .write_csv(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(out.pass)
}

/// Sizes the global worker pool from `CARLEMAN_LAB_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::new(format!("{THREADS_ENV}={v} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}
