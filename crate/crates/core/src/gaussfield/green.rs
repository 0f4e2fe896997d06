//! Riemann–Itô discretization of U(x,t) = ∬ g(y,s;x,t) B(dy,ds).

use super::sheet::{SheetFunctional, SheetGeometry, SheetSample};
use crate::error::{Error, Result};
use crate::kernels::gauss;
use crate::quad::{integrate, QuadSettings};
use crate::special::{erf, erfc};
use std::f64::consts::PI;

/// Default bound on the Gaussian mass left outside the sheet.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// How a cell's kernel weight is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelRule {
    /// g at the cell center.
    Midpoint,
    /// √(∫∫_cell g² / (dy·ds)): the cell's contribution to the variance is exact.
    CellIsometric,
}

/// Half-width of the kernel's effective support for elapsed time `t`.
pub fn gaussian_reach(t: f64, tail_tol: f64) -> f64 {
    (4.0 * t * (1.0 / tail_tol).ln()).sqrt()
}

pub(crate) fn check_tail_tol(tail_tol: f64) -> Result<()> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::config(format!("tail_tol must lie in (0, 1), got {tail_tol}")));
    }
    Ok(())
}

/// erf(b) − erf(a) without cancellation in the tails.
fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        erfc(a) - erfc(b)
    } else if b <= 0.0 {
        erfc(-b) - erfc(-a)
    } else {
        erf(b) - erf(a)
    }
}

/// ∫_{τ0}^{τ1} ∫_a^b g(d, τ)² dd dτ, with the d-integral in closed form and τ = q².
pub fn cell_kernel_energy(a: f64, b: f64, tau0: f64, tau1: f64) -> Result<f64> {
    if tau1 <= tau0.max(0.0) {
        return Ok(0.0);
    }
    let c = 1.0 / (2.0 * (2.0 * PI).sqrt());
    let f = |q: f64| {
        if q == 0.0 {
            c * (b.signum() - a.signum())
        } else {
            let r = std::f64::consts::SQRT_2 * q;
            c * erf_diff(a / r, b / r)
        }
    };
    let settings = QuadSettings { abs_tol: 1e-16, rel_tol: 1e-10, max_intervals: 200 };
    Ok(integrate(f, tau0.max(0.0).sqrt(), tau1.sqrt(), settings)?.value)
}

/// Weights of U(x,t) on `geom`.
pub fn greenrep_functional(geom: &SheetGeometry, x: f64, t: f64, rule: KernelRule, tail_tol: f64) -> Result<SheetFunctional> {
    check_tail_tol(tail_tol)?;
    if !(t >= 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("field point must have finite x and t >= 0, got ({x}, {t})")));
    }
    let reach = gaussian_reach(t, tail_tol);
    geom.require_cover(x - reach, x + reach, t)?;
    let rows = geom.rows_between(x - reach, x + reach);
    let cols = geom.cols_below(t);
    let (dy, ds) = (geom.dy, geom.ds);
    SheetFunctional::build(*geom, rows, cols, |j, k| match rule {
        KernelRule::Midpoint => Ok(gauss(x - geom.y_center(j), t - geom.s_center(k))),
        KernelRule::CellIsometric => {
            let a = geom.y_lower(j) - x;
            let s_lo = k as f64 * ds;
            let energy = cell_kernel_energy(a, a + dy, t - s_lo - ds, t - s_lo)?;
            Ok((energy.max(0.0) / (dy * ds)).sqrt())
        }
    })
}

/// Σ_cells w_{jk}(x,t)·ΔB_{jk} with cell-isometric weights and the default tail tolerance.
pub fn greenrep_eval(sheet: &SheetSample, x: f64, t: f64) -> Result<f64> {
    greenrep_functional(sheet.geometry(), x, t, KernelRule::CellIsometric, DEFAULT_TAIL_TOL)?.eval(sheet)
}
