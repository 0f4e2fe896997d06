//! The drift of the enlarged filtration: field form against sheet-integral form
//! pathwise and in law, plus the Laplace-domain identity behind it.

use super::{derive_seed, named, RunContext, Suite};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gaussfield::{
    drift_extent, drift_field_functional, drift_integral_functional, drift_variance_closed_form, sheet_sample, verify_cameron_martin_laplace,
    SheetFunctional, SheetGeometry, SheetSample,
};
use crate::stats::{ks_two_sample, z_test, GridDescriptor, Moments, Rule, VerificationReport};
use std::path::Path;

pub struct DriftSuite;

pub const DRIFT_REPLICAS: u64 = 20_000;
/// Cell sizes at ν = 1; they scale as dy ∝ ν^{-1/2}, ds ∝ ν^{-1}.
pub const DRIFT_DY: f64 = 0.1;
pub const DRIFT_DS: f64 = 0.1;
pub const DRIFT_Y_COUNT: usize = 20;
pub const DRIFT_RMS_TOL: f64 = 5e-2;
const CM_RATES: [f64; 2] = [1.0, 2.0];
const K: f64 = 4.0;

/// Sums 2×2 blocks of a fine sheet into the cells of `coarse`, which must tile it exactly.
pub fn coarsen(fine: &SheetSample, coarse: SheetGeometry) -> Result<SheetSample> {
    let f = fine.geometry();
    if f.ny != 2 * coarse.ny || f.ns != 2 * coarse.ns || (f.y_min - coarse.y_min).abs() > 1e-12 * coarse.dy {
        return Err(Error::domain("fine sheet does not tile the coarse layout by 2x2 blocks"));
    }
    let mut data = vec![0.0; coarse.cells()];
    for j in 0..coarse.ny {
        for k in 0..coarse.ns {
            data[coarse.index(j, k)] =
                fine.increment(2 * j, 2 * k) + fine.increment(2 * j + 1, 2 * k) + fine.increment(2 * j, 2 * k + 1) + fine.increment(2 * j + 1, 2 * k + 1);
        }
    }
    SheetSample::from_data(coarse, data, fine.seed(), fine.stream())
}

/// Field and integral functionals at y = 0, dy, 2dy, ... (row shifts of the y = 0 pair).
fn form_pairs(geom: &SheetGeometry, nu: f64, tail_tol: f64, count: usize, stride: usize) -> Result<Vec<(SheetFunctional, SheetFunctional)>> {
    let field = drift_field_functional(geom, 0.0, nu, tail_tol)?;
    let integral = drift_integral_functional(geom, 0.0, nu, tail_tol)?;
    (0..count).map(|i| Ok((field.shifted((i * stride) as isize)?, integral.shifted((i * stride) as isize)?))).collect()
}

/// √(Σ(field − integral)² / Σ integral²) over the pairs.
fn relative_rms(pairs: &[(SheetFunctional, SheetFunctional)], sheet: &SheetSample) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (f, i) in pairs {
        let (a, b) = (f.eval(sheet)?, i.eval(sheet)?);
        num += (a - b) * (a - b);
        den += b * b;
    }
    Ok((num / den).sqrt())
}

impl DriftSuite {
    fn cells(nu: f64) -> (f64, f64) {
        (DRIFT_DY / nu.sqrt(), DRIFT_DS / nu)
    }

    /// Layout covering the 20 y values at spacing `dy` with the field form's two-sided reach.
    fn geometry(nu: f64, tail_tol: f64) -> Result<SheetGeometry> {
        let (horizon, reach) = drift_extent(nu, tail_tol)?;
        let (dy, ds) = Self::cells(nu);
        SheetGeometry::aligned(0.0, (DRIFT_Y_COUNT - 1) as f64 * dy, reach, horizon, dy, ds)
    }

    fn pathwise(&self, cfg: &RunConfig, nu: f64) -> Result<Vec<VerificationReport>> {
        let coarse = Self::geometry(nu, cfg.tail_tol)?;
        let fine = SheetGeometry { dy: coarse.dy / 2.0, ny: 2 * coarse.ny, ds: coarse.ds / 2.0, ns: 2 * coarse.ns, ..coarse };
        let seed = derive_seed(cfg.seed, self.tag(), nu.to_bits());
        let fine_sheet = sheet_sample(fine.rect(), fine.dy, fine.ds, seed, 0)?;
        let coarse_sheet = coarsen(&fine_sheet, coarse)?;
        let e_coarse = relative_rms(&form_pairs(&coarse, nu, cfg.tail_tol, DRIFT_Y_COUNT, 1)?, &coarse_sheet)?;
        let e_fine = relative_rms(&form_pairs(&fine, nu, cfg.tail_tol, DRIFT_Y_COUNT, 2)?, &fine_sheet)?;
        let desc = GridDescriptor::sheet(coarse.dy, coarse.ds);
        Ok(vec![
            VerificationReport::new(&format!("drift_forms_rms_nu{nu}"), "relative RMS of field form - integral form over 20 y", e_coarse, 0.0, DRIFT_RMS_TOL, Rule::AtMost)
                .with_grid(desc.clone())
                .with_replicas(1, cfg.seed)
                .with_detail("rms_half_cells", e_fine),
            VerificationReport::new(&format!("drift_forms_refinement_nu{nu}"), "relative RMS ratio when cells are halved", e_coarse / e_fine, 0.0, 1.0, Rule::AtLeast)
                .with_grid(desc)
                .with_replicas(1, cfg.seed),
        ])
    }

    fn in_law(&self, cfg: &RunConfig, ctx: &RunContext, nu: f64) -> Result<Vec<VerificationReport>> {
        let geom = Self::geometry(nu, cfg.tail_tol)?;
        let pairs = form_pairs(&geom, nu, cfg.tail_tol, DRIFT_Y_COUNT, 1)?;
        let last = DRIFT_Y_COUNT - 1;
        let replicas = cfg.replicas.unwrap_or(DRIFT_REPLICAS);
        let seed = derive_seed(cfg.seed, self.tag(), nu.to_bits() ^ 1);
        let rows = ctx.replicas(replicas, |r| {
            let sheet = sheet_sample(geom.rect(), geom.dy, geom.ds, seed, r)?;
            Ok([pairs[0].0.eval(&sheet)?, pairs[0].1.eval(&sheet)?, pairs[last].1.eval(&sheet)?])
        })?;
        let target = drift_variance_closed_form(nu)?;
        let desc = GridDescriptor::sheet(geom.dy, geom.ds);
        let tag = |r: VerificationReport| r.with_replicas(replicas, cfg.seed).with_grid(desc.clone()).with_detail("nu", nu);
        let mut out = Vec::new();
        for (col, form, f) in [(0, "field", &pairs[0].0), (1, "integral", &pairs[0].1)] {
            let m = Moments::from_slice(&rows.iter().map(|r| r[col]).collect::<Vec<_>>());
            out.push(tag(named(z_test(m.variance(), m.variance_se(), target, K), &format!("drift_{form}_variance_nu{nu}"), "sample variance of the drift at y = 0"))
                .with_detail("discrete_variance", f.variance()));
            out.push(tag(named(z_test(m.mean, m.se(), 0.0, K), &format!("drift_{form}_mean_nu{nu}"), "sample mean of the drift at y = 0")));
        }
        let half = rows.len() / 2;
        let a: Vec<f64> = rows[..half].iter().map(|r| r[1]).collect();
        let b: Vec<f64> = rows[half..].iter().map(|r| r[2]).collect();
        let (stat, p) = ks_two_sample(&a, &b)?;
        out.push(tag(
            VerificationReport::new(&format!("drift_shift_invariance_nu{nu}"), "KS p-value of the integral form at y = 0 vs the last y", p, 0.0, 1e-3, Rule::PValue)
                .with_detail("ks_statistic", stat),
        ));
        Ok(out)
    }
}

impl Suite for DriftSuite {
    fn name(&self) -> &'static str {
        "drift"
    }

    fn tag(&self) -> u64 {
        0x6472_6600
    }

    fn validate(&self, cfg: &RunConfig) -> Result<()> {
        for &nu in &cfg.nu {
            Self::geometry(nu, cfg.tail_tol)?;
        }
        Ok(())
    }

    fn run(&self, cfg: &RunConfig, ctx: &RunContext, _out: &Path) -> Result<Vec<VerificationReport>> {
        let mut out = Vec::new();
        for a in CM_RATES {
            for b in CM_RATES {
                out.push(verify_cameron_martin_laplace(a, b, 0.0)?);
            }
        }
        for &nu in &cfg.nu {
            out.extend(self.pathwise(cfg, nu)?);
            out.extend(self.in_law(cfg, ctx, nu)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussfield::Rect;

    #[test]
    fn coarsening_preserves_block_sums() {
        let coarse = SheetGeometry::new(Rect::new(-1.0, 1.0, 1.0).unwrap(), 0.5, 0.25).unwrap();
        let fine = SheetGeometry { dy: 0.25, ny: 8, ds: 0.125, ns: 8, ..coarse };
        let s = sheet_sample(fine.rect(), fine.dy, fine.ds, 3, 1).unwrap();
        let c = coarsen(&s, coarse).unwrap();
        assert_eq!(c.geometry(), &coarse);
        let total: f64 = s.data().iter().sum();
        assert!((c.data().iter().sum::<f64>() - total).abs() < 1e-12);
        let block = s.increment(2, 4) + s.increment(3, 4) + s.increment(2, 5) + s.increment(3, 5);
        assert_eq!(c.increment(1, 2), block);
        assert!(coarsen(&c, coarse).is_err());
    }

    #[test]
    fn expected_gap_shrinks_with_the_cells() {
        // Exact L² distance between the two discretizations, relative to the variance.
        let nu = 1.0;
        let coarse = DriftSuite::geometry(nu, 1e-8).unwrap();
        let fine = SheetGeometry { dy: coarse.dy / 2.0, ny: 2 * coarse.ny, ds: coarse.ds / 2.0, ns: 2 * coarse.ns, ..coarse };
        let gap = |g: &SheetGeometry| {
            let (f, i) = (drift_field_functional(g, 0.0, nu, 1e-8).unwrap(), drift_integral_functional(g, 0.0, nu, 1e-8).unwrap());
            (f.distance_sq(&i).unwrap() / i.variance()).sqrt()
        };
        let (a, b) = (gap(&coarse), gap(&fine));
        assert!(a < DRIFT_RMS_TOL / 2.0 && a / b > 1.5, "{a} {b}");
    }

    #[test]
    fn bad_rate_is_a_usage_error() {
        let cfg = RunConfig { nu: vec![0.0], ..RunConfig::default() };
        assert!(DriftSuite.validate(&cfg).unwrap_err().is_usage());
    }
}
