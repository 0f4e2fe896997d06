//! Discrepancies between independent discretizations of the operator identities.

use super::abel::{halfroot_conv, op_a1, op_a2};
use super::{frac_laplacian, SpectralPlan};
use crate::error::Result;
use crate::grid::{antisym_extend, restrict, sup_norm, ExpProfile, GridFunction, TestFunction, TimeGrid};
use crate::kernels::{l_nu, LnuSpec};
use crate::stats::{GridDescriptor, Rule, VerificationReport};

/// Zero-padding used by the identity checks, wide enough that periodic images
/// of the slowly decaying spectral outputs sit below the refinement signal.
pub const IDENTITY_PADDING: usize = 16;

/// max |𝔄₂h − √2·(−∂²)^{1/4}h^a| over the grid nodes.
pub fn a2_spectral_error(h: &TestFunction, padding: usize) -> Result<f64> {
    let plan = SpectralPlan::new(h.grid(), padding)?;
    let spectral = frac_laplacian(&antisym_extend(h.values()), 0.5, &plan)?;
    let a2 = op_a2(h);
    Ok(max_abs_diff(&a2.values, restrict(&spectral), std::f64::consts::SQRT_2))
}

/// max |(4π|·|)^{-1/2} ∗ (𝔄₂h)^a − h|.
pub fn inversion_error(h: &TestFunction) -> Result<f64> {
    let back = halfroot_conv(&op_a2(h))?;
    Ok(max_abs_diff(&back, h.values(), 1.0))
}

/// max |𝔄₁𝔄₂h + h′ − (−∂²)^{1/2}h^a| on [0, t_max].
pub fn a1a2_residual(h: &TestFunction, padding: usize) -> Result<f64> {
    let plan = SpectralPlan::new(h.grid(), padding)?;
    let lap = frac_laplacian(&antisym_extend(h.values()), 1.0, &plan)?;
    let a1a2 = op_a1(&op_a2(h))?;
    Ok(a1a2
        .iter()
        .zip(h.derivs())
        .zip(restrict(&lap))
        .map(|((a, d), l)| (a + d - l).abs())
        .fold(0.0, f64::max))
}

/// max relative error of 𝔄₁e^{−ν·} against √ν e^{−ν·} on nodes t ≤ t_hi.
pub fn a1_eigen_error(nu: f64, grid: TimeGrid, t_hi: f64) -> Result<f64> {
    let f = GridFunction::from_profile(grid, &ExpProfile::new(nu)?);
    let a1 = op_a1(&f)?;
    let mut worst = 0.0f64;
    for (k, v) in a1.iter().enumerate() {
        let t = grid.node(k);
        if t > t_hi {
            break;
        }
        let exact = nu.sqrt() * (-nu * t).exp();
        worst = worst.max((v - exact).abs() / exact);
    }
    Ok(worst)
}

/// max |(4π|·|)^{-1/2} ∗ (e^{−ν·})^a − l_ν| over the grid nodes.
pub fn halfroot_lnu_error(nu: f64, grid: TimeGrid) -> Result<f64> {
    let f = GridFunction::from_profile(grid, &ExpProfile::new(nu)?);
    let conv = halfroot_conv(&f)?;
    let spec = LnuSpec::new(nu)?;
    let mut worst = 0.0f64;
    for (k, v) in conv.iter().enumerate() {
        worst = worst.max((v - l_nu(&spec, grid.node(k))?).abs());
    }
    Ok(worst)
}

/// Residual of 𝔄₁𝔄₂h = −h′ + (−∂²)^{1/2}h^a against 2·10⁻²·‖h′‖∞.
pub fn verify_a1a2_identity(h: &TestFunction) -> Result<VerificationReport> {
    let residual = a1a2_residual(h, IDENTITY_PADDING)?;
    let tol = 2e-2 * sup_norm(h.derivs());
    let g = h.grid();
    Ok(VerificationReport::new("a1a2_identity", "max abs residual of A1 A2 h + h' - |tau| h^a", residual, 0.0, 0.0, Rule::AbsTol { tol })
        .with_grid(GridDescriptor::time(g.t_max(), g.n()))
        .with_detail("dt", g.dt())
        .with_detail("padding", IDENTITY_PADDING as f64))
}

fn max_abs_diff(a: &[f64], b: &[f64], scale_b: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - scale_b * y).abs()).fold(0.0, f64::max)
}
