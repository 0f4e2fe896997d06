//! Stationarity of the spatial SDE: start from the stationary law, evolve to Z and
//! compare the pairings with their Gram targets.

use super::{derive_seed, named, RunContext, Suite};
use crate::config::RunConfig;
use crate::error::Result;
use crate::fracops::SpectralPlan;
use crate::gaussfield::{cov_u_gram, cov_v_gram};
use crate::grid::{TestFunction, TimeGrid};
use crate::io::write_csv;
use crate::sde::{evolve, DriftOperator, EvolveConfig, StationarySampler, Trajectory};
use crate::stats::{z_test, CovAccumulator, GridDescriptor, Rule, VerificationReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::Path;

pub struct EvolveSuite;

pub const EVOLVE_T_MAX: f64 = 16.0;
pub const EVOLVE_N: usize = 256;
pub const EVOLVE_DZ: f64 = 0.005;
pub const EVOLVE_REPLICAS: u64 = 5000;
pub const EVOLVE_OBSERVABLES: [(f64, f64); 2] = [(2.0, 1.0), (4.0, 1.5)];
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const FINAL_STATE_FILE: &str = "final_state.bin";
const K: f64 = 4.0;

impl EvolveSuite {
    fn setup(cfg: &RunConfig) -> Result<(TimeGrid, EvolveConfig)> {
        let grid = TimeGrid::new(cfg.t_max.unwrap_or(EVOLVE_T_MAX), cfg.n.unwrap_or(EVOLVE_N))?;
        let observables = EVOLVE_OBSERVABLES.iter().map(|&(c, r)| TestFunction::on_grid(c, r, 1.0, grid)).collect::<Result<Vec<_>>>()?;
        let ecfg = EvolveConfig { dz: cfg.dz.unwrap_or(EVOLVE_DZ), horizon: cfg.horizon, observables, seed: 0, stream: 0, noise: true };
        ecfg.steps(&grid)?;
        Ok((grid, ecfg))
    }
}

impl Suite for EvolveSuite {
    fn name(&self) -> &'static str {
        "evolve"
    }

    fn tag(&self) -> u64 {
        0x6576_6f00
    }

    fn validate(&self, cfg: &RunConfig) -> Result<()> {
        Self::setup(cfg).map(|_| ())
    }

    fn run(&self, cfg: &RunConfig, ctx: &RunContext, out: &Path) -> Result<Vec<VerificationReport>> {
        let (grid, base) = Self::setup(cfg)?;
        let op = DriftOperator::new(SpectralPlan::new(&grid, 2)?);
        // Cell-average basis: the dual-basis reconstruction is exact and the Grams are closed form.
        let sampler = StationarySampler::cell_box(grid)?;
        let replicas = cfg.replicas.unwrap_or(EVOLVE_REPLICAS);
        let init_seed = derive_seed(cfg.seed, self.tag(), 0);
        let noise_seed = derive_seed(cfg.seed, self.tag(), 1);
        let m = base.observables.len();

        let results = ctx.replicas(replicas, |r| {
            let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
            rng.set_stream(r);
            let init = sampler.sample(&mut rng);
            let ecfg = EvolveConfig { seed: noise_seed, stream: r, ..base.clone() };
            let t = evolve(&init, &ecfg, &op)?;
            let last = t.z.len() - 1;
            let row: Vec<f64> = t.u_obs[last].iter().chain(&t.v_obs[last]).copied().collect();
            Ok((row, (r == 0).then_some(t)))
        })?;

        let mut acc = CovAccumulator::new(2 * m);
        let mut first: Option<Trajectory> = None;
        for (row, t) in results {
            acc.push(&row);
            if t.is_some() {
                first = t;
            }
        }
        let cov = acc.covariance();
        let se = acc.covariance_se();
        let mse = acc.mean_se();
        let gu = cov_u_gram(&base.observables)?;
        let gv = cov_v_gram(&base.observables)?;
        let desc = GridDescriptor { t_max: Some(grid.t_max()), n: Some(grid.n()), dt: Some(grid.dt()), dz: Some(base.dz), dy: None, ds: None };
        let tag = |r: VerificationReport| {
            r.with_replicas(replicas, cfg.seed).with_grid(desc.clone()).with_detail("Z", base.horizon).with_detail("band_limit", PI / grid.dt())
        };
        let mut reports = Vec::new();
        for i in 0..m {
            let (u, v) = (i, m + i);
            reports.push(tag(named(z_test(cov[(u, u)], se[(u, u)], gu[(i, i)], K), &format!("stationary_u_variance_h{i}"), "sample variance of <u_Z; h> vs <h; C1 h>")));
            reports.push(tag(named(z_test(cov[(v, v)], se[(v, v)], gv[(i, i)], K), &format!("stationary_v_variance_h{i}"), "sample variance of <v_Z; h> vs <h; C2 h>")));
            reports.push(tag(named(z_test(acc.mean[u], mse[u], 0.0, K), &format!("stationary_u_mean_h{i}"), "sample mean of <u_Z; h>")));
            reports.push(tag(named(z_test(acc.mean[v], mse[v], 0.0, K), &format!("stationary_v_mean_h{i}"), "sample mean of <v_Z; h>")));
            reports.push(tag(named(z_test(cov[(u, v)], se[(u, v)], 0.0, K), &format!("stationary_uv_covariance_h{i}"), "sample covariance of <u_Z; h>, <v_Z; h>")));
        }

        let t = first.expect("replica 0 is always run");
        let n = t.z.len();
        let drift_sum: f64 = t.v_obs[..n - 1].iter().map(|r| r[0] * base.dz).sum();
        let gap = (t.u_obs[n - 1][0] - t.u_obs[0][0] - drift_sum).abs();
        reports.push(tag(VerificationReport::new("bookkeeping_identity", "|<u_Z;h> - <u_0;h> - sum <v_z;h> dz| on replica 0", gap, 0.0, 1e-10, Rule::AtMost)));

        let (cols, rows) = t.csv_rows();
        write_csv(&out.join(TRAJECTORY_FILE), &cols, &rows)?;
        t.final_state.dump(&out.join(FINAL_STATE_FILE), &grid, noise_seed, 0)?;
        Ok(reports)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stability_violation_is_a_usage_error() {
        let cfg = RunConfig { dz: Some(0.05), ..RunConfig::default() };
        let err = EvolveSuite.validate(&cfg).unwrap_err();
        assert!(err.is_usage() && err.to_string().contains("stability"), "{err}");
        EvolveSuite.validate(&RunConfig::default()).unwrap();
    }

    #[test]
    fn short_run_writes_artifacts() {
        let dir = std::env::temp_dir().join(format!("heatlab-evolve-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = RunConfig { replicas: Some(20), horizon: 0.05, n: Some(128), dz: Some(0.005), ..RunConfig::default() };
        let reports = EvolveSuite.run(&cfg, &RunContext::new(1).unwrap(), &dir).unwrap();
        assert!(reports.iter().any(|r| r.name == "bookkeeping_identity" && r.pass));
        let csv = std::fs::read_to_string(dir.join(TRAJECTORY_FILE)).unwrap();
        assert!(csv.starts_with("z,u_0,u_1,v_0,v_1\n0.0,"));
        assert_eq!(csv.lines().count(), 12);
        let (h, data) = crate::io::read_matrix(&dir.join(FINAL_STATE_FILE)).unwrap();
        assert_eq!((h.rows, h.cols, data.len()), (2, 128, 256));
        assert!((h.ds - 0.05).abs() < 1e-12);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
