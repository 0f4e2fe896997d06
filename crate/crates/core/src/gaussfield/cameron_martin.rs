//! Laplace transform of C_y e^{−ν·} against ĝ_y(ν̃)ĝ_y(ν)/((√ν̃+√ν)(ν̃+ν)).

use crate::error::{Error, Result};
use crate::kernels::laplace_g;
use crate::special::erfcx;
use crate::stats::{Rule, VerificationReport};
use std::f64::consts::PI;

/// Simpson panels per axis used by [`verify_cameron_martin_laplace`].
pub const CM_PANELS: usize = 128;
/// Relative tolerance of the identity check.
pub const CM_TOL: f64 = 1e-4;

fn simpson_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let m = 2 * panels;
    let h = (b - a) / m as f64;
    (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, w * h / 3.0)
        })
        .collect()
}

/// ν̃ ↦ Laplace transform of C_y e^{−ν·}, written as a double integral over
/// w ∈ [0, √(40/ν̃)] and v ∈ [0, 1] with the spatial integral in closed form.
pub fn laplace_of_cy(nu: f64, nu2: f64, y_gap: f64, panels: usize) -> Result<f64> {
    if !(nu > 0.0 && nu2 > 0.0) {
        return Err(Error::domain(format!("rates must be positive, got nu={nu}, nu2={nu2}")));
    }
    if !(y_gap >= 0.0) {
        return Err(Error::domain(format!("y_gap must be nonnegative, got {y_gap}")));
    }
    if panels == 0 {
        return Err(Error::config("at least one Simpson panel is required"));
    }
    let w_max = (40.0 / nu2).sqrt();
    let rn = nu.sqrt();
    let ws = simpson_nodes(0.0, w_max, panels);
    let vs = simpson_nodes(0.0, 1.0, panels);
    let mut total = 0.0;
    for &(w, ww) in &ws {
        let outer = 2.0 * w * w * (-nu2 * w * w).exp() / PI.sqrt();
        if outer == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for &(v, wv) in &vs {
            let u = w * v;
            if u <= 0.0 {
                continue;
            }
            let z = y_gap / (2.0 * u) + rn * u;
            let inner = u * PI.sqrt() / (2.0 * rn) * erfcx(z) * (-y_gap * y_gap / (4.0 * u * u) - y_gap * rn).exp();
            let val = (-nu * w * w * (1.0 - v * v)).exp() * inner;
            if val.is_finite() {
                row += wv * val;
            }
        }
        total += ww * outer * row;
    }
    Ok(total)
}

/// ĝ_y(ν̃)·ĝ_y(ν)/((√ν̃+√ν)(ν̃+ν)).
pub fn cameron_martin_target(nu: f64, nu2: f64, y_gap: f64) -> Result<f64> {
    Ok(laplace_g(y_gap, nu2)? * laplace_g(y_gap, nu)? / ((nu2.sqrt() + nu.sqrt()) * (nu2 + nu)))
}

pub fn cameron_martin_error(nu: f64, nu2: f64, y_gap: f64, panels: usize) -> Result<f64> {
    let target = cameron_martin_target(nu, nu2, y_gap)?;
    Ok((laplace_of_cy(nu, nu2, y_gap, panels)? / target - 1.0).abs())
}

/// Relative error of the transform identity at [`CM_PANELS`], with the error at half the panels as detail.
pub fn verify_cameron_martin_laplace(nu: f64, nu2: f64, y_gap: f64) -> Result<VerificationReport> {
    let fine = cameron_martin_error(nu, nu2, y_gap, CM_PANELS)?;
    let coarse = cameron_martin_error(nu, nu2, y_gap, CM_PANELS / 2)?;
    Ok(VerificationReport::new(
        &format!("cameron_martin_laplace_nu{nu}_nu2{nu2}_y{y_gap}"),
        "relative error of the Laplace transform of C_y e^{-nu t}",
        fine,
        0.0,
        CM_TOL,
        Rule::AtMost,
    )
    .with_detail("nu", nu)
    .with_detail("nu2", nu2)
    .with_detail("y_gap", y_gap)
    .with_detail("panels", CM_PANELS as f64)
    .with_detail("error_half_panels", coarse))
}
