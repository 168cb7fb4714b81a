//! Run configuration: command-line flags merged with an optional TOML file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Phillips,
    Alpha,
    Beta,
    Det,
}

/// Options shared by every subcommand. Values from `--config` replace flag values.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Spectral-flow method.
    #[arg(long, value_enum, global = true)]
    pub method: Option<MethodArg>,
    /// Order of the α form.
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Exponent of the β form.
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Determinant order.
    #[arg(long, global = true)]
    pub p: Option<u32>,
    /// Absolute quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Number of energies in a λ-sweep table (requires --out).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Partial-wave cutoff for radial sweeps.
    #[arg(long, global = true)]
    pub lmax: Option<usize>,
    /// Worker threads; 1 gives bitwise-reproducible records.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for `records.jsonl` and CSV tables.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML file whose keys override the flags above.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl Options {
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        if let Some(path) = self.config.clone() {
            let file = load(&path)?;
            macro_rules! take {
                ($($f:ident),*) => { $( if file.$f.is_some() { self.$f = file.$f; } )* };
            }
            take!(method, n, r, p, tol, grid, lmax, jobs, seed, out);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(ConfigError::Invalid(format!("--tol must be positive, got {tol}")));
            }
        }
        if let Some(r) = self.r {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(ConfigError::Invalid(format!("--r must be non-negative, got {r}")));
            }
        }
        if self.p == Some(0) {
            return Err(ConfigError::Invalid("--p must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(ConfigError::Invalid("--jobs must be at least 1".into()));
        }
        if self.grid.is_some() && self.out.is_none() {
            return Err(ConfigError::Invalid("--grid writes a CSV table and needs --out".into()));
        }
        Ok(())
    }
}

fn load(path: &Path) -> Result<Options, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })
}

/// Parses `key=value,key=value` into pairs.
pub fn key_values(text: &str) -> Result<Vec<(String, f64)>, ConfigError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| ConfigError::Invalid(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| ConfigError::Invalid(format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Looks up the named keys in a `key=value` list, rejecting unknown or missing ones.
pub fn named<const N: usize>(text: &str, keys: [&str; N]) -> Result<[f64; N], ConfigError> {
    let pairs = key_values(text)?;
    let mut out = [f64::NAN; N];
    for (k, v) in pairs {
        let idx = keys
            .iter()
            .position(|&name| name == k)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown key `{k}`; expected {keys:?}")))?;
        out[idx] = v;
    }
    if let Some(i) = out.iter().position(|v| v.is_nan()) {
        return Err(ConfigError::Invalid(format!("missing key `{}` in `{text}`", keys[i])));
    }
    Ok(out)
}
