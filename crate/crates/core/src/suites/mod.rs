//! Verification suites behind a common trait, selected by name from a registry.

mod cov;
mod drift;
mod evolve;
mod ops;
mod spde;

pub use cov::CovSuite;
pub use drift::DriftSuite;
pub use evolve::EvolveSuite;
pub use ops::OpsSuite;
pub use spde::SpdeSuite;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::stats::VerificationReport;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Per-run context handed to a suite.
pub struct RunContext {
    pool: rayon::ThreadPool,
}

impl RunContext {
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self { pool })
    }

    /// Runs `f(0..count)` on the pool and returns the results in replica order,
    /// so reductions over them do not depend on the worker count.
    pub fn replicas<T, F>(&self, count: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(&f).collect())
    }
}

/// Seed of a sub-experiment: master seed XOR suite tag XOR sub tag.
pub fn derive_seed(master: u64, suite_tag: u64, sub_tag: u64) -> u64 {
    master ^ suite_tag ^ sub_tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Sets the name and statistic of a report built by a generic test.
pub(crate) fn named(mut r: VerificationReport, name: &str, statistic: &str) -> VerificationReport {
    r.name = name.to_string();
    r.statistic = statistic.to_string();
    r
}

pub trait Suite: Send + Sync {
    /// Registry key, e.g. `ops`.
    fn name(&self) -> &'static str;

    /// Fixed tag XORed into the master seed.
    fn tag(&self) -> u64;

    /// Checks the configuration before any work; failures are usage errors.
    fn validate(&self, cfg: &RunConfig) -> Result<()>;

    /// Runs the checks. Extra artifacts go under `out`.
    fn run(&self, cfg: &RunConfig, ctx: &RunContext, out: &Path) -> Result<Vec<VerificationReport>>;

    fn report_file(&self) -> String {
        format!("{}_report.json", self.name())
    }
}

/// Name → suite lookup.
pub struct SuiteRegistry {
    suites: Vec<Box<dyn Suite>>,
}

impl Default for SuiteRegistry {
    fn default() -> Self {
        Self {
            suites: vec![
                Box::new(OpsSuite),
                Box::new(CovSuite),
                Box::new(DriftSuite),
                Box::new(SpdeSuite),
                Box::new(EvolveSuite),
            ],
        }
    }
}

impl SuiteRegistry {
    pub fn empty() -> Self {
        Self { suites: Vec::new() }
    }

    pub fn register(&mut self, suite: Box<dyn Suite>) -> Result<()> {
        if self.get(suite.name()).is_some() {
            return Err(Error::config(format!("suite {} registered twice", suite.name())));
        }
        self.suites.push(suite);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn Suite> {
        self.suites.iter().find(|s| s.name() == name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.suites.iter().map(|s| s.name()).collect()
    }

    /// Validates, runs and writes `<name>_report.json` under `cfg.out`.
    pub fn run(&self, name: &str, cfg: &RunConfig) -> Result<SuiteOutcome> {
        let suite = self.get(name).ok_or_else(|| Error::config(format!("unknown suite {name:?}; known: {}", self.names().join(", "))))?;
        cfg.validate()?;
        suite.validate(cfg)?;
        std::fs::create_dir_all(&cfg.out)?;
        let ctx = RunContext::new(cfg.workers)?;
        let reports = suite.run(cfg, &ctx, &cfg.out)?;
        let doc = ReportDocument {
            timestamp: unix_seconds(),
            suite: suite.name(),
            config: cfg,
            all_pass: reports.iter().all(|r| r.pass),
            reports: &reports,
        };
        let path = cfg.out.join(suite.report_file());
        std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(SuiteOutcome { all_pass: doc.all_pass, reports, path })
    }
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    timestamp: u64,
    suite: &'a str,
    config: &'a RunConfig,
    all_pass: bool,
    reports: &'a [VerificationReport],
}

fn unix_seconds() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Removes the `timestamp` line of a report file, leaving the part covered by the determinism contract.
pub fn strip_timestamp(report_json: &str) -> String {
    report_json.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub all_pass: bool,
    pub reports: Vec<VerificationReport>,
    pub path: PathBuf,
}
