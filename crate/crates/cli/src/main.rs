//! `heatlab`: runs one verification suite and writes its JSON report.
//!
//! Exit codes: 0 when every check passes, 1 when any check fails, 2 when the
//! configuration is invalid or the run could not produce a report.

use clap::{Args, Parser, Subcommand};
use heatlab_core::config::RunConfig;
use heatlab_core::suites::SuiteRegistry;
use heatlab_core::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Verification suites for the stochastic heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fractional-operator identities and l_nu properties.
    VerifyOps(Flags),
    /// Covariance, Gram matrices and U/dU independence from sheet samples.
    VerifyCov(Flags),
    /// Drift field form vs sheet-integral form, and the Laplace identity.
    VerifyDrift(Flags),
    /// Weak-form residual law.
    VerifySpde(Flags),
    /// Stationarity of the spatial SDE; also writes a trajectory CSV and the final state.
    Evolve(Flags),
}

impl Command {
    fn split(&self) -> (&'static str, &Flags) {
        match self {
            Command::VerifyOps(f) => ("ops", f),
            Command::VerifyCov(f) => ("cov", f),
            Command::VerifyDrift(f) => ("drift", f),
            Command::VerifySpde(f) => ("spde", f),
            Command::Evolve(f) => ("evolve", f),
        }
    }
}

#[derive(Args)]
struct Flags {
    /// key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    dz: Option<f64>,
    #[arg(long = "Z")]
    horizon: Option<f64>,
    /// Comma-separated rates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    nu: Option<Vec<f64>>,
    #[arg(long)]
    replicas: Option<u32>,
    /// 0 uses every core.
    #[arg(long)]
    workers: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.tmax {
            cfg.t_max = Some(v);
        }
        if let Some(v) = self.n {
            cfg.n = Some(v as usize);
        }
        if let Some(v) = self.dz {
            cfg.dz = Some(v);
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = &self.nu {
            cfg.nu = v.clone();
        }
        if let Some(v) = self.replicas {
            cfg.replicas = Some(v as u64);
        }
        if let Some(v) = self.workers {
            cfg.workers = v as usize;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (suite, flags) = cli.command.split();
    let outcome = flags.resolve().and_then(|cfg| SuiteRegistry::default().run(suite, &cfg));
    match outcome {
        Ok(o) => {
            for r in &o.reports {
                println!("{} {} estimate={:e} target={:e}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.estimate, r.target);
            }
            println!("report: {}", o.path.display());
            if o.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if e.is_usage() {
                eprintln!("heatlab: invalid configuration: {e}");
            } else {
                eprintln!("heatlab: run failed: {e}");
            }
            ExitCode::from(2)
        }
    }
}
