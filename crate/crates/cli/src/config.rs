//! Run configuration: defaults, then an optional TOML config file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub center: Option<Vec<f64>>,
    pub radii: Option<String>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub scales: Option<usize>,
    pub rho0: Option<f64>,
    pub k0: Option<usize>,
    pub q0: Option<usize>,
    pub seed: Option<u64>,
    pub cells: Option<usize>,
    pub half: Option<f64>,
    pub dim: Option<usize>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved parameters of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: &'static str,
    pub field: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub center: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub theta: f64,
    pub scales: usize,
    pub rho0: f64,
    pub k0: Option<usize>,
    pub q0: Option<usize>,
    pub seed: Option<u64>,
    pub cells: usize,
    pub half: f64,
    pub dim: usize,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(command: &'static str, file: &ConfigFile) -> anyhow::Result<Self> {
        Ok(RunConfig {
            command,
            field: None,
            out: None,
            center: file.center.clone(),
            radii: file.radii.as_deref().map(parse_radii).transpose()?,
            alpha: file.alpha,
            theta: file.theta.unwrap_or(0.5),
            scales: file.scales.unwrap_or(4),
            rho0: file.rho0.unwrap_or(1.0),
            k0: file.k0,
            q0: file.q0,
            seed: file.seed,
            cells: file.cells.unwrap_or(256),
            half: file.half.unwrap_or(1.0),
            dim: file.dim.unwrap_or(2),
            threads: file.threads,
        })
    }

    /// Center of analysis, defaulting to the origin in `n` dimensions.
    pub fn center_or_origin(&self, n: usize) -> anyhow::Result<Vec<f64>> {
        match &self.center {
            Some(c) if c.len() != n => bail!("center has {} coordinates, the field has n = {n}", c.len()),
            Some(c) => Ok(c.clone()),
            None => Ok(vec![0.0; n]),
        }
    }
}

/// Comma-separated list `a,b,c`, or `lo:hi:count` for evenly spaced radii.
pub fn parse_radii(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let radii = if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().context("radii range start")?;
        let hi: f64 = parts[1].trim().parse().context("radii range end")?;
        let count: usize = parts[2].trim().parse().context("radii range count")?;
        if count < 2 || !(hi > lo) {
            bail!("radii range needs lo < hi and at least two points");
        }
        (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
    } else {
        parse_list(s)?
    };
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        bail!("radii must be positive and finite");
    }
    Ok(radii)
}

pub fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().with_context(|| format!("not a number: {t:?}"))).collect()
}

/// `--threads`, else `QVAL_THREADS`, else the config file, else rayon's
/// default.
pub fn resolve_threads(flag: Option<usize>, env: Option<String>, file: Option<usize>) -> anyhow::Result<Option<usize>> {
    let t = match (flag, env) {
        (Some(t), _) => Some(t),
        (None, Some(v)) => Some(v.trim().parse::<usize>().with_context(|| format!("QVAL_THREADS={v:?}"))?),
        (None, None) => file,
    };
    if t == Some(0) {
        bail!("thread count must be positive");
    }
    Ok(t)
}
