//! Run configuration: flat `key = value` files overlaid by command-line values.

use crate::error::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Settings shared by all suites. `None` means "the suite's own default".
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub t_max: Option<f64>,
    pub n: Option<usize>,
    pub dz: Option<f64>,
    pub horizon: f64,
    pub nu: Vec<f64>,
    pub replicas: Option<u64>,
    pub seed: u64,
    pub tail_tol: f64,
    #[serde(skip)]
    pub out: PathBuf,
    /// 0 selects one worker per available core.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_max: None,
            n: None,
            dz: None,
            horizon: 1.0,
            nu: vec![1.0],
            replicas: None,
            seed: 20_251_017,
            tail_tol: 1e-8,
            out: PathBuf::from("."),
            workers: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::config(format!("cannot parse {key} = {value:?}")))
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "t_max" | "tmax" => self.t_max = Some(parse(key, value)?),
            "n" => self.n = Some(parse(key, value)?),
            "dz" => self.dz = Some(parse(key, value)?),
            "Z" | "horizon" => self.horizon = parse(key, value)?,
            "nu" => self.nu = value.split(',').map(|v| parse(key, v)).collect::<Result<_>>()?,
            "replicas" => self.replicas = Some(parse(key, value)?),
            "seed" => self.seed = parse(key, value)?,
            "tail_tol" => self.tail_tol = parse(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "workers" => self.workers = parse(key, value)?,
            other => return Err(Error::config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Checks the settings that do not depend on the suite.
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config(format!("t_max must be positive and finite, got {t}")));
            }
        }
        if let Some(n) = self.n {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::config(format!("n must be a power of two, got {n}")));
            }
        }
        if let Some(dz) = self.dz {
            if !(dz > 0.0 && dz.is_finite()) {
                return Err(Error::config(format!("dz must be positive, got {dz}")));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!("Z must be positive, got {}", self.horizon)));
        }
        if self.nu.is_empty() {
            return Err(Error::config("nu list is empty"));
        }
        if let Some(bad) = self.nu.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::config(format!("nu must be positive, got {bad}")));
        }
        if self.replicas.is_some_and(|r| r < 2) {
            return Err(Error::config("at least two replicas are required"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::config(format!("tail_tol must lie in (0, 1), got {}", self.tail_tol)));
        }
        Ok(())
    }
}
