//! Operator identities and l_ν properties. Deterministic: no replicas.

use super::{RunContext, Suite};
use crate::config::RunConfig;
use crate::error::Result;
use crate::fracops::{a1_eigen_error, a1a2_residual, a2_spectral_error, halfroot_lnu_error, inversion_error, IDENTITY_PADDING};
use crate::grid::{bump, sup_norm, TimeGrid};
use crate::kernels::{l_nu, l_nu_laplace, lnu_laplace_quadrature, lnu_scaled_sup, LnuSpec};
use crate::stats::{GridDescriptor, Rule, VerificationReport};
use std::f64::consts::PI;
use std::path::Path;

pub struct OpsSuite;

pub const OPS_T_MAX: f64 = 8.0;
pub const OPS_N: usize = 4096;
const BUMP: (f64, f64) = (2.0, 1.0);
const EIGEN_RATES: [f64; 2] = [1.0, 4.0];

impl OpsSuite {
    fn grid(cfg: &RunConfig) -> Result<TimeGrid> {
        TimeGrid::new(cfg.t_max.unwrap_or(OPS_T_MAX), cfg.n.unwrap_or(OPS_N))
    }
}

impl Suite for OpsSuite {
    fn name(&self) -> &'static str {
        "ops"
    }

    fn tag(&self) -> u64 {
        0x6f70_7300
    }

    fn validate(&self, cfg: &RunConfig) -> Result<()> {
        let g = Self::grid(cfg)?;
        bump(BUMP.0, BUMP.1, g.t_max(), g.n())?;
        Ok(())
    }

    fn run(&self, cfg: &RunConfig, _ctx: &RunContext, _out: &Path) -> Result<Vec<VerificationReport>> {
        let g = Self::grid(cfg)?;
        let desc = GridDescriptor::time(g.t_max(), g.n());
        let h = bump(BUMP.0, BUMP.1, g.t_max(), g.n())?;
        let fine = bump(BUMP.0, BUMP.1, g.t_max(), 2 * g.n())?;
        let hn = h.sup_norm();
        let mut out = Vec::new();

        let (e, e_fine) = (a2_spectral_error(&h, IDENTITY_PADDING)?, a2_spectral_error(&fine, IDENTITY_PADDING)?);
        out.push(
            VerificationReport::new("a2_identity", "max abs error of A2 h - sqrt2 |tau|^(1/2) h^a", e, 0.0, 0.0, Rule::AbsTol { tol: 1e-2 * hn })
                .with_grid(desc.clone())
                .with_detail("error_half_dt", e_fine),
        );
        out.push(
            VerificationReport::new("a2_refinement", "error ratio when dt is halved", e / e_fine, 0.0, 1.8, Rule::AtLeast).with_grid(desc.clone()),
        );

        out.push(
            VerificationReport::new("inversion_identity", "max abs error of (4 pi |.|)^(-1/2) * (A2 h)^a - h", inversion_error(&h)?, 0.0, 0.0, Rule::AbsTol {
                tol: 1e-2 * hn,
            })
            .with_grid(desc.clone()),
        );

        let (r, r_fine) = (a1a2_residual(&h, IDENTITY_PADDING)?, a1a2_residual(&fine, IDENTITY_PADDING)?);
        let dn = sup_norm(h.derivs());
        out.push(
            VerificationReport::new("a1a2_identity", "max abs residual of A1 A2 h + h' - |tau| h^a", r, 0.0, 0.0, Rule::AbsTol { tol: 2e-2 * dn })
                .with_grid(desc.clone())
                .with_detail("residual_half_dt", r_fine),
        );
        out.push(VerificationReport::new("a1a2_refinement", "residual ratio when dt is halved", r / r_fine, 0.0, 1.8, Rule::AtLeast).with_grid(desc.clone()));

        for nu in EIGEN_RATES {
            out.push(
                VerificationReport::new(&format!("a1_eigen_nu{nu}"), "max relative error of A1 e^(-nu t) vs sqrt(nu) e^(-nu t) on [0, 4]", a1_eigen_error(nu, g, 4.0)?, 0.0, 1e-3, Rule::AtMost)
                    .with_grid(desc.clone()),
            );
        }

        for &nu in &cfg.nu {
            let spec = LnuSpec::new(nu)?;
            out.push(VerificationReport::new(&format!("lnu_at_zero_nu{nu}"), "|l_nu(0)|", l_nu(&spec, 0.0)?.abs(), 0.0, 0.0, Rule::AtMost));
            // l_ν(t) ~ t^{-3/2}/(√(4π)ν²) for large t.
            let limit = 1.0 / ((4.0 * PI).sqrt() * nu * nu);
            out.push(VerificationReport::new(&format!("lnu_decay_nu{nu}"), "sup of t^(3/2) l_nu(t) on [10, 1000]", lnu_scaled_sup(nu)?, 0.0, limit, Rule::RelTol { tol: 0.05 }));
            out.push(
                VerificationReport::new(&format!("halfroot_lnu_nu{nu}"), "max abs error of (4 pi |.|)^(-1/2) * (e^(-nu .))^a - l_nu", halfroot_lnu_error(nu, g)?, 0.0, 0.0, Rule::AbsTol { tol: 1e-3 })
                    .with_grid(desc.clone()),
            );
        }
        out.push(
            VerificationReport::new("lnu_laplace_nu1_nu1", "Laplace transform of l_1 at rate 1", lnu_laplace_quadrature(1.0, 1.0)?, 0.0, 0.25, Rule::AbsTol { tol: 1e-4 })
                .with_detail("closed_form", l_nu_laplace(1.0, 1.0)),
        );
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_run_passes() {
        let cfg = RunConfig { n: Some(1024), ..RunConfig::default() };
        let reports = OpsSuite.run(&cfg, &RunContext::new(1).unwrap(), Path::new(".")).unwrap();
        for r in &reports {
            assert!(r.pass, "{}: {} vs {}", r.name, r.estimate, r.target);
        }
    }

    #[test]
    fn bad_grid_is_a_usage_error() {
        let cfg = RunConfig { n: Some(4095), ..RunConfig::default() };
        assert!(OpsSuite.validate(&cfg).unwrap_err().to_string().contains("n must be a power of two"));
        let cfg = RunConfig { t_max: Some(2.5), ..RunConfig::default() };
        assert!(OpsSuite.validate(&cfg).unwrap_err().is_usage());
    }
}
