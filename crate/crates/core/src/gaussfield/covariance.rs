//! Covariance kernels of U(x,·) and ∂ₓU(x,·) and their Gram matrices.

use crate::error::{Error, Result};
use crate::fracops::{halfroot_conv, Toeplitz};
use crate::grid::{antisym_extend, pair, restrict, TestFunction, TimeGrid, TimeProfile};
use crate::quad::{integrate, integrate_to_inf, QuadSettings};
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn inv_sqrt_4pi() -> f64 {
    1.0 / (4.0 * PI).sqrt()
}

/// Cov(U(x,t), U(x,t2)) = (√(t+t2) − √|t−t2|)/√(4π).
pub fn cov_u(t: f64, t2: f64) -> f64 {
    ((t + t2).sqrt() - (t - t2).abs().sqrt()) * inv_sqrt_4pi()
}

/// Kernel of C₂: (|t−t2|^{−1/2} − (t+t2)^{−1/2})/(2√(4π)); infinite on the diagonal.
pub fn cov_v_kernel(t: f64, t2: f64) -> f64 {
    ((t - t2).abs().powf(-0.5) - (t + t2).powf(-0.5)) * 0.5 * inv_sqrt_4pi()
}

/// Cov(U(x+dx,t), U(x,t2)) = (1/(2√(4π))) ∫_{|t−t2|}^{t+t2} r^{−1/2} e^{−dx²/(4r)} dr.
pub fn cov_u_cross(dx: f64, t: f64, t2: f64) -> Result<f64> {
    if t < 0.0 || t2 < 0.0 {
        return Err(Error::domain(format!("times must be nonnegative, got ({t}, {t2})")));
    }
    let d2 = dx * dx;
    // r = q² removes the r^{−1/2} endpoint singularity.
    let f = |q: f64| if q == 0.0 { 0.0 } else { (-d2 / (4.0 * q * q)).exp() };
    let est = integrate(f, (t - t2).abs().sqrt(), (t + t2).sqrt(), QuadSettings { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 500 })?;
    Ok(est.value * inv_sqrt_4pi())
}

/// Which of the two covariance operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovKind {
    /// C₁, the covariance operator of U(x,·).
    U,
    /// C₂, the covariance operator of ∂ₓU(x,·).
    V,
}

/// C₁h = −(√|·|/√(4π)) ∗ h^a on the grid, with exact cell integrals of the kernel.
pub fn apply_c1(grid: &TimeGrid, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != grid.n() {
        return Err(Error::domain(format!("expected {} samples, got {}", grid.n(), h.len())));
    }
    let dt = grid.dt();
    let prim = |u: f64| (2.0 / 3.0) * u.signum() * u.abs().powf(1.5);
    let c = inv_sqrt_4pi();
    let sym = grid.sym();
    let op = Toeplitz::new(sym.len(), |m| {
        let m = m as f64;
        -(prim((m + 0.5) * dt) - prim((m - 0.5) * dt)) * c
    });
    let out = op.apply(&antisym_extend(h));
    Ok(restrict(&out).to_vec())
}

/// C₂h = ½·(4π|·|)^{−1/2} ∗ h^a.
pub fn apply_c2(h: &TestFunction) -> Result<Vec<f64>> {
    Ok(halfroot_conv(&h.as_grid_function())?.iter().map(|v| 0.5 * v).collect())
}

fn common_grid(h_list: &[TestFunction]) -> Result<TimeGrid> {
    let first = h_list.first().ok_or_else(|| Error::domain("Gram matrix needs at least one test function"))?;
    let grid = *first.grid();
    if h_list.iter().any(|h| *h.grid() != grid) {
        return Err(Error::domain("all test functions must share one grid"));
    }
    Ok(grid)
}

fn gram(h_list: &[TestFunction], kind: CovKind) -> Result<DMatrix<f64>> {
    let grid = common_grid(h_list)?;
    let images = h_list
        .iter()
        .map(|h| match kind {
            CovKind::U => apply_c1(&grid, h.values()),
            CovKind::V => apply_c2(h),
        })
        .collect::<Result<Vec<_>>>()?;
    let n = h_list.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = pair(&grid, h_list[i].values(), &images[j])?;
        }
    }
    let sym = (&g + g.transpose()) * 0.5;
    psd_factor(&sym)?;
    Ok(sym)
}

/// G_ij = ⟨h_i; C₁h_j⟩.
pub fn cov_u_gram(h_list: &[TestFunction]) -> Result<DMatrix<f64>> {
    gram(h_list, CovKind::U)
}

/// G_ij = ⟨h_i; C₂h_j⟩.
pub fn cov_v_gram(h_list: &[TestFunction]) -> Result<DMatrix<f64>> {
    gram(h_list, CovKind::V)
}

/// Lower Cholesky factor of G + 10⁻¹²·(trace/n)·I.
pub fn psd_factor(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !g.is_square() || g.nrows() == 0 {
        return Err(Error::domain("factorization needs a nonempty square matrix"));
    }
    let n = g.nrows();
    let jitter = 1e-12 * g.trace().abs() / n as f64;
    let shifted = g + DMatrix::identity(n, n) * jitter;
    match shifted.cholesky() {
        Some(c) => Ok(c.l()),
        None => Err(Error::Numerical(format!("{n}x{n} covariance matrix is not positive semidefinite after jitter {jitter:e}"))),
    }
}

/// ∬ f(t) k(t,t′) g(t′) dt dt′ by nested adaptive quadrature, splitting the inner
/// integral at t′ = t with t′ = t ∓ w² so that the diagonal singularity is removed.
pub fn bilinear_quadrature(kind: CovKind, f: &dyn TimeProfile, g: &dyn TimeProfile) -> Result<f64> {
    let c = inv_sqrt_4pi();
    let inner_settings = QuadSettings { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 400 };
    let outer_settings = QuadSettings { abs_tol: 1e-12, rel_tol: 1e-9, max_intervals: 400 };
    let (glo, ghi) = g.support();
    // Integrand in w for t′ = t + σw², σ = ±1, including the Jacobian 2w.
    let piece = move |t: f64, tp: f64, w: f64| -> f64 {
        let gv = g.value(tp);
        if gv == 0.0 {
            return 0.0;
        }
        match kind {
            CovKind::U => 2.0 * w * gv * ((t + tp).sqrt() - w) * c,
            CovKind::V => gv * (2.0 - 2.0 * w / (t + tp).sqrt()) * 0.5 * c,
        }
    };
    let inner = |t: f64| -> Result<f64> {
        let mut total = 0.0;
        if glo < t {
            let top = (t - glo).sqrt();
            let bottom = if ghi < t { (t - ghi).sqrt() } else { 0.0 };
            total += integrate(|w| piece(t, t - w * w, w), bottom, top, inner_settings)?.value;
        }
        if ghi > t {
            let bottom = if glo > t { (glo - t).sqrt() } else { 0.0 };
            total += if ghi.is_finite() {
                integrate(|w| piece(t, t + w * w, w), bottom, (ghi - t).sqrt(), inner_settings)?.value
            } else {
                integrate_to_inf(|w| piece(t, t + w * w, w), bottom, inner_settings)?.value
            };
        }
        Ok(total)
    };
    let failure = std::cell::Cell::new(None);
    let outer = |t: f64| {
        let fv = f.value(t);
        if fv == 0.0 {
            return 0.0;
        }
        match inner(t) {
            Ok(v) => fv * v,
            Err(e) => {
                failure.set(Some(e.to_string()));
                f64::NAN
            }
        }
    };
    let (flo, fhi) = f.support();
    let est = if fhi.is_finite() { integrate(outer, flo.max(0.0), fhi, outer_settings) } else { integrate_to_inf(outer, flo.max(0.0), outer_settings) };
    if let Some(msg) = failure.take() {
        return Err(Error::Numerical(format!("inner covariance quadrature failed: {msg}")));
    }
    Ok(est?.value)
}
