//! Weak-form residual η(f): centred with variance ‖f‖² and covariance ⟨f, g⟩.

use super::{derive_seed, named, RunContext, Suite};
use crate::config::RunConfig;
use crate::error::Result;
use crate::gaussfield::{gaussian_reach, sheet_sample, weakform_functional, SheetGeometry, SpaceBump, TensorTestFunction};
use crate::grid::{TestFunction, TimeGrid};
use crate::stats::{z_test, CovAccumulator, GridDescriptor, VerificationReport};
use std::path::Path;

pub struct SpdeSuite;

pub const SPDE_T_MAX: f64 = 8.0;
pub const SPDE_N: usize = 256;
pub const SPDE_DY: f64 = 0.1;
pub const SPDE_REPLICAS: u64 = 10_000;
/// ((x center, x radius), (t center, t radius)) of the two tensor bumps.
pub const SPDE_BUMPS: [((f64, f64), (f64, f64)); 2] = [((0.0, 1.0), (2.0, 1.0)), ((0.5, 0.75), (3.0, 1.5))];
const K: f64 = 4.0;

impl SpdeSuite {
    fn grid(cfg: &RunConfig) -> Result<TimeGrid> {
        TimeGrid::new(cfg.t_max.unwrap_or(SPDE_T_MAX), cfg.n.unwrap_or(SPDE_N))
    }

    fn test_functions(grid: TimeGrid) -> Result<Vec<TensorTestFunction>> {
        SPDE_BUMPS
            .iter()
            .map(|&((xc, xr), (tc, tr))| Ok(TensorTestFunction::single(SpaceBump::new(xc, xr)?, TestFunction::on_grid(tc, tr, 1.0, grid)?)))
            .collect()
    }

    fn geometry(grid: TimeGrid, fs: &[TensorTestFunction], tail_tol: f64) -> Result<SheetGeometry> {
        let (lo, hi) = fs.iter().map(|f| f.x_support()).fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        SheetGeometry::aligned(lo, hi, gaussian_reach(grid.t_max(), tail_tol), grid.t_max(), SPDE_DY, grid.dt())
    }
}

impl Suite for SpdeSuite {
    fn name(&self) -> &'static str {
        "spde"
    }

    fn tag(&self) -> u64 {
        0x7370_6400
    }

    fn validate(&self, cfg: &RunConfig) -> Result<()> {
        let grid = Self::grid(cfg)?;
        let fs = Self::test_functions(grid)?;
        Self::geometry(grid, &fs, cfg.tail_tol)?;
        Ok(())
    }

    fn run(&self, cfg: &RunConfig, ctx: &RunContext, _out: &Path) -> Result<Vec<VerificationReport>> {
        let grid = Self::grid(cfg)?;
        let fs = Self::test_functions(grid)?;
        let geom = Self::geometry(grid, &fs, cfg.tail_tol)?;
        let functionals = fs.iter().map(|f| weakform_functional(&geom, f, cfg.tail_tol)).collect::<Result<Vec<_>>>()?;
        let replicas = cfg.replicas.unwrap_or(SPDE_REPLICAS);
        let seed = derive_seed(cfg.seed, self.tag(), 0);
        let rows = ctx.replicas(replicas, |r| {
            let sheet = sheet_sample(geom.rect(), geom.dy, geom.ds, seed, r)?;
            functionals.iter().map(|f| f.eval(&sheet)).collect::<Result<Vec<f64>>>()
        })?;
        let mut acc = CovAccumulator::new(fs.len());
        for row in &rows {
            acc.push(row);
        }
        let cov = acc.covariance();
        let se = acc.covariance_se();
        let mse = acc.mean_se();
        let desc = GridDescriptor { t_max: Some(grid.t_max()), n: Some(grid.n()), dt: Some(grid.dt()), dy: Some(geom.dy), ds: Some(geom.ds), dz: None };
        let tag = |r: VerificationReport| r.with_replicas(replicas, cfg.seed).with_grid(desc.clone());
        let mut out = Vec::new();
        for (i, f) in fs.iter().enumerate() {
            let norm = f.norm_sq()?;
            out.push(tag(named(z_test(acc.mean[i], mse[i], 0.0, K), &format!("weakform_mean_f{i}"), "sample mean of eta(f)")));
            out.push(
                tag(named(z_test(cov[(i, i)], se[(i, i)], norm, K), &format!("weakform_variance_f{i}"), "sample variance of eta(f) vs ||f||^2"))
                    .with_detail("discrete_variance", functionals[i].variance()),
            );
        }
        // ⟨f₀, f₁⟩ from the polarization identity.
        let sum = TensorTestFunction::new(fs.iter().flat_map(|f| f.terms().to_vec()).collect())?;
        let inner = (sum.norm_sq()? - fs[0].norm_sq()? - fs[1].norm_sq()?) / 2.0;
        out.push(
            tag(named(z_test(cov[(0, 1)], se[(0, 1)], inner, K), "weakform_covariance_f0_f1", "sample covariance of eta(f0), eta(f1) vs <f0, f1>"))
                .with_detail("discrete_covariance", functionals[0].covariance(&functionals[1])),
        );
        Ok(out)
    }
}
