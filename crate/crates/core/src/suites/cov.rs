//! Law of U(x,·) and ∂ₓU(x,·) from sheet samples: variance at a point, Gram
//! matrices, U/∂U independence and invariance under shifts in x.

use super::{derive_seed, named, RunContext, Suite};
use crate::config::RunConfig;
use crate::error::Result;
use crate::gaussfield::{
    cov_u, cov_u_gram, cov_v_gram, effective_extent, greenrep_functional, pair_functional, sheet_sample, FieldObservable, KernelRule,
    PairKind, SheetGeometry,
};
use crate::grid::{TestFunction, TimeGrid, TimeProfile};
use crate::stats::{ks_two_sample, matrix_compare, z_test, CovAccumulator, GridDescriptor, Moments, Rule, VerificationReport};
use nalgebra::DMatrix;
use std::path::Path;

pub struct CovSuite;

pub const COV_T_MAX: f64 = 8.0;
pub const COV_N: usize = 1024;
pub const COV_REPLICAS: u64 = 20_000;
pub const COV_DY: f64 = 0.1;
pub const COV_DS: f64 = 1.0 / 32.0;
/// (center, radius) of the eight test functions.
pub const COV_BUMPS: [(f64, f64); 8] = [(0.8, 0.6), (1.2, 0.8), (1.6, 1.0), (2.0, 0.7), (2.4, 1.2), (2.9, 0.9), (3.4, 1.1), (3.9, 0.8)];
/// Second location for the shift-invariance check.
const SHIFT: f64 = 2.0;
const K: f64 = 4.0;

impl CovSuite {
    fn grid(cfg: &RunConfig) -> Result<TimeGrid> {
        TimeGrid::new(cfg.t_max.unwrap_or(COV_T_MAX), cfg.n.unwrap_or(COV_N))
    }

    fn bumps(grid: TimeGrid) -> Result<Vec<TestFunction>> {
        COV_BUMPS.iter().map(|&(c, r)| TestFunction::on_grid(c, r, 1.0, grid)).collect()
    }
}

impl Suite for CovSuite {
    fn name(&self) -> &'static str {
        "cov"
    }

    fn tag(&self) -> u64 {
        0x636f_7600
    }

    fn validate(&self, cfg: &RunConfig) -> Result<()> {
        Self::bumps(Self::grid(cfg)?)?;
        Ok(())
    }

    fn run(&self, cfg: &RunConfig, ctx: &RunContext, _out: &Path) -> Result<Vec<VerificationReport>> {
        let grid = Self::grid(cfg)?;
        let hs = Self::bumps(grid)?;
        let profiles: Vec<&dyn TimeProfile> = hs.iter().map(|h| h as &dyn TimeProfile).collect();
        let m = hs.len();
        let replicas = cfg.replicas.unwrap_or(COV_REPLICAS);
        let seed = derive_seed(cfg.seed, self.tag(), 0);

        let (horizon, reach) = hs.iter().map(|h| effective_extent(h, cfg.tail_tol)).collect::<Result<Vec<_>>>()?.into_iter().fold((1.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        let geom = SheetGeometry::aligned(0.0, SHIFT, reach, horizon, COV_DY, COV_DS)?;
        let point = greenrep_functional(&geom, 0.0, 1.0, KernelRule::CellIsometric, cfg.tail_tol)?;
        let obs = FieldObservable::new(&geom, 0.0, &profiles, cfg.tail_tol)?;
        let shifted = pair_functional(&geom, SHIFT, &hs[0], PairKind::U, cfg.tail_tol)?;

        let rows = ctx.replicas(replicas, |r| {
            let sheet = sheet_sample(geom.rect(), geom.dy, geom.ds, seed, r)?;
            let mut v = obs.eval(&sheet)?;
            v.push(point.eval(&sheet)?);
            v.push(shifted.eval(&sheet)?);
            Ok(v)
        })?;

        let mut acc = CovAccumulator::new(2 * m);
        let mut pt = Moments::default();
        for row in &rows {
            acc.push(&row[..2 * m]);
            pt.push(row[2 * m]);
        }
        let desc = GridDescriptor { t_max: Some(grid.t_max()), n: Some(grid.n()), dt: Some(grid.dt()), dy: Some(COV_DY), ds: Some(COV_DS), dz: None };
        let tag = |r: VerificationReport| r.with_replicas(replicas, cfg.seed).with_grid(desc.clone());
        let mut out = Vec::new();

        let target = cov_u(1.0, 1.0);
        out.push(tag(named(z_test(pt.variance(), pt.variance_se(), target, K), "greenrep_variance_x0_t1", "sample variance of U(0,1)"))
            .with_detail("discrete_variance", point.variance()));
        out.push(tag(named(z_test(pt.mean, pt.se(), 0.0, K), "greenrep_mean_x0_t1", "sample mean of U(0,1)")));

        let cov = acc.covariance();
        let se = acc.covariance_se();
        let block = |a: &DMatrix<f64>, r0: usize, c0: usize| a.view((r0, c0), (m, m)).into_owned();
        let gu = cov_u_gram(&hs)?;
        let gv = cov_v_gram(&hs)?;
        out.push(tag(named(matrix_compare(&block(&cov, 0, 0), &gu, &block(&se, 0, 0), K)?, "gram_u", "fraction of U Gram entries within 4 se")));
        out.push(tag(named(matrix_compare(&block(&cov, m, m), &gv, &block(&se, m, m), K)?, "gram_v", "fraction of dU Gram entries within 4 se")));
        out.push(tag(named(
            matrix_compare(&block(&cov, 0, m), &DMatrix::zeros(m, m), &block(&se, 0, m), K)?,
            "cross_uv",
            "fraction of U/dU cross-covariances within 4 se of 0",
        )));
        for i in 0..2 * m {
            let (kind, idx) = if i < m { ("u", i) } else { ("v", i - m) };
            out.push(tag(named(z_test(acc.mean[i], acc.mean_se()[i], 0.0, K), &format!("mean_{kind}{idx}"), "sample mean of the pairing")));
        }

        // Disjoint replica halves keep the two KS samples independent.
        let half = rows.len() / 2;
        let a: Vec<f64> = rows[..half].iter().map(|r| r[0]).collect();
        let b: Vec<f64> = rows[half..].iter().map(|r| r[2 * m + 1]).collect();
        let (stat, p) = ks_two_sample(&a, &b)?;
        out.push(tag(VerificationReport::new("shift_invariance_ks", "KS p-value of U(0,h0) vs U(2,h0)", p, 0.0, 1e-3, Rule::PValue).with_detail("ks_statistic", stat)));
        Ok(out)
    }
}
