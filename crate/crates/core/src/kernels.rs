//! Heat kernel family: free-space kernel, its spatial derivative, the Dirichlet
//! image kernel, Laplace transforms and the auxiliary function l_ν.

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_inf, QuadSettings};
use std::f64::consts::PI;

/// Source point (y, s) and field point (x, t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelPoint {
    pub y: f64,
    pub s: f64,
    pub x: f64,
    pub t: f64,
}

impl KernelPoint {
    pub fn new(y: f64, s: f64, x: f64, t: f64) -> Self {
        Self { y, s, x, t }
    }
}

/// g(y,s;x,t) = (4π(t−s))^{-1/2} exp(−(x−y)²/(4(t−s))) on t > s, zero otherwise.
pub fn heat_kernel(p: KernelPoint) -> f64 {
    gauss(p.x - p.y, p.t - p.s)
}

/// Heat kernel as a function of displacement and elapsed time.
#[inline]
pub fn gauss(d: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    (-d * d / (4.0 * tau)).exp() / (4.0 * PI * tau).sqrt()
}

/// ∂g/∂x = −((x−y)/(2(t−s)))·g.
pub fn heat_kernel_dx(p: KernelPoint) -> f64 {
    gauss_dx(p.x - p.y, p.t - p.s)
}

#[inline]
pub fn gauss_dx(d: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    -d / (2.0 * tau) * gauss(d, tau)
}

/// Laplace transform in time of g(y,0;x0,·) at rate `nu`, with dist = |y − x0|.
pub fn laplace_g(dist: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::domain(format!("laplace_g needs nu > 0, got {nu}")));
    }
    if dist < 0.0 {
        return Err(Error::domain(format!("laplace_g needs dist >= 0, got {dist}")));
    }
    let r = nu.sqrt();
    Ok((-r * dist).exp() / (2.0 * r))
}

/// Dirichlet kernel on the half-line beyond x0: g(y,s;x,t) − g(2x0−y,s;x,t).
pub fn image_green(p: KernelPoint, x0: f64) -> f64 {
    let mirrored = KernelPoint { y: 2.0 * x0 - p.y, ..p };
    heat_kernel(p) - heat_kernel(mirrored)
}

/// Boundary kernel 2∂₁g(x0,s;x,t) = ((x−x0)/(t−s))·g(x0,s;x,t), defined for x > x0.
pub fn boundary_kernel(s: f64, x: f64, t: f64, x0: f64) -> Result<f64> {
    if x <= x0 {
        return Err(Error::domain(format!("boundary_kernel needs x > x0, got x={x}, x0={x0}")));
    }
    let tau = t - s;
    if tau <= 0.0 {
        return Ok(0.0);
    }
    Ok((x - x0) / tau * gauss(x - x0, tau))
}

/// Parameters of l_ν.
#[derive(Clone, Copy, Debug)]
pub struct LnuSpec {
    pub nu: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl LnuSpec {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::domain(format!("l_nu needs nu > 0, got {nu}")));
        }
        Ok(Self { nu, abs_tol: 1e-9, max_intervals: 2000 })
    }
}

/// l_ν(t) = √t/√(4π) ∫₀^∞ (|1−r|^{-1/2} − (1+r)^{-1/2}) e^{−νtr} dr.
///
/// The r-integral is split at 1 and 2: r = 1 ∓ w² removes the square-root
/// singularity on either side of 1, and r = 1/q² maps [2, ∞) onto (0, 1/√2].
pub fn l_nu(spec: &LnuSpec, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::domain(format!("l_nu needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let a = spec.nu * t;
    let scale = t.sqrt() / (4.0 * PI).sqrt();
    let settings = QuadSettings {
        abs_tol: spec.abs_tol / (3.0 * scale),
        rel_tol: 0.0,
        max_intervals: spec.max_intervals,
    };
    let below = integrate(|w: f64| (2.0 - 2.0 * w / (2.0 - w * w).sqrt()) * (-a * (1.0 - w * w)).exp(), 0.0, 1.0, settings)?;
    let above = integrate(|w: f64| (2.0 - 2.0 * w / (2.0 + w * w).sqrt()) * (-a * (1.0 + w * w)).exp(), 0.0, 1.0, settings)?;
    let far = integrate(
        |q: f64| {
            if q == 0.0 {
                return 0.0;
            }
            let r = 1.0 / (q * q);
            let (lo, hi) = ((r - 1.0).sqrt(), (r + 1.0).sqrt());
            let diff = 2.0 / (lo * hi * (hi + lo));
            diff * (-a * r).exp() * 2.0 / (q * q * q)
        },
        0.0,
        std::f64::consts::FRAC_1_SQRT_2,
        settings,
    )?;
    Ok(scale * (below.value + above.value + far.value))
}

/// Closed-form Laplace transform of l_ν at rate ν̃: 1/((√ν̃+√ν)(ν̃+ν)).
pub fn l_nu_laplace(nu: f64, nu_tilde: f64) -> f64 {
    1.0 / ((nu_tilde.sqrt() + nu.sqrt()) * (nu_tilde + nu))
}

/// sup of t^{3/2} l_ν(t) over log-spaced t in [10, 1000].
pub fn lnu_scaled_sup(nu: f64) -> Result<f64> {
    let spec = LnuSpec::new(nu)?;
    let mut worst = 0.0f64;
    for i in 0..=100 {
        let t = 10f64 * 100f64.powf(i as f64 / 100.0);
        worst = worst.max(t.powf(1.5) * l_nu(&spec, t)?.abs());
    }
    Ok(worst)
}

/// ∫₀^∞ e^{−ν̃t} l_ν(t) dt by quadrature.
pub fn lnu_laplace_quadrature(nu: f64, nu_tilde: f64) -> Result<f64> {
    let spec = LnuSpec { abs_tol: 1e-11, ..LnuSpec::new(nu)? };
    let failure = std::cell::RefCell::new(None);
    let v = integrate_to_inf(
        |t| match l_nu(&spec, t) {
            Ok(l) => (-nu_tilde * t).exp() * l,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        QuadSettings { abs_tol: 1e-10, rel_tol: 1e-9, max_intervals: 400 },
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(v?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_to_inf;

    #[test]
    fn heat_kernel_reference_values() {
        let p = KernelPoint::new(0.0, 0.0, 0.0, 1.0 / (4.0 * PI));
        assert!((heat_kernel(p) - 1.0).abs() < 1e-14);
        assert_eq!(heat_kernel(KernelPoint::new(0.0, 1.0, 0.0, 0.5)), 0.0);
        let v = heat_kernel(KernelPoint::new(0.0, 0.0, 2.0, 1.0));
        assert!((v - (-1.0f64).exp() / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert!((v - 0.103777).abs() < 1e-6);
    }

    #[test]
    fn equal_times_are_outside_support() {
        assert_eq!(heat_kernel(KernelPoint::new(0.0, 1.0, 0.0, 1.0)), 0.0);
        assert_eq!(heat_kernel_dx(KernelPoint::new(0.0, 1.0, 0.3, 1.0)), 0.0);
    }

    #[test]
    fn dx_against_central_difference() {
        let h = 1e-6;
        let fd = (heat_kernel(KernelPoint::new(0.0, 0.0, 2.0 + h, 1.0)) - heat_kernel(KernelPoint::new(0.0, 0.0, 2.0 - h, 1.0))) / (2.0 * h);
        let an = heat_kernel_dx(KernelPoint::new(0.0, 0.0, 2.0, 1.0));
        assert!((an - fd).abs() / an.abs() < 1e-6);
        assert!((an + 0.103777).abs() < 1e-6);
        assert_eq!(heat_kernel_dx(KernelPoint::new(0.7, 0.0, 0.7, 2.0)), 0.0);
    }

    #[test]
    fn laplace_g_values_and_domain() {
        assert!((laplace_g(0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((laplace_g(0.0, 4.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((laplace_g(1.0, 1.0).unwrap() - 0.183940).abs() < 1e-6);
        assert!(laplace_g(1.0, 0.0).is_err());
        assert!(laplace_g(1.0, -2.0).is_err());
    }

    #[test]
    fn laplace_g_matches_time_quadrature() {
        for &dist in &[0.0, 0.5, 1.0, 2.0] {
            for &nu in &[0.5, 1.0, 4.0] {
                // τ = w² keeps the integrand bounded at the origin.
                let num = integrate_to_inf(|w| 2.0 * w * gauss(dist, w * w) * (-nu * w * w).exp(), 0.0, QuadSettings::rel(1e-11))
                    .unwrap()
                    .value;
                let exact = laplace_g(dist, nu).unwrap();
                assert!((num - exact).abs() / exact < 1e-6, "dist={dist} nu={nu}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        let (y, x, t1, t2) = (0.3, -0.4, 0.5, 1.5);
        let conv = integrate(
            |z| heat_kernel(KernelPoint::new(y, 0.0, z, t1)) * heat_kernel(KernelPoint::new(z, t1, x, t2)),
            -30.0,
            30.0,
            QuadSettings::abs(1e-12),
        )
        .unwrap()
        .value;
        assert!((conv - heat_kernel(KernelPoint::new(y, 0.0, x, t2))).abs() < 1e-6);
    }

    #[test]
    fn image_kernel_vanishes_on_boundary_and_source() {
        let x0 = 0.4;
        assert_eq!(image_green(KernelPoint::new(x0, 0.0, 1.3, 1.0), x0), 0.0);
        assert!(image_green(KernelPoint::new(1.1, 0.2, x0, 1.0), x0).abs() < 1e-16);
        let v = image_green(KernelPoint::new(x0 + 1.0, 0.0, x0 + 1.0, 1.0), x0);
        assert!((v - (1.0 - (-1.0f64).exp()) / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert!((v - 0.178317).abs() < 1e-6);
    }

    #[test]
    fn boundary_kernel_values() {
        assert_eq!(boundary_kernel(2.0, 1.0, 1.5, 0.0).unwrap(), 0.0);
        let v = boundary_kernel(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!((v - (-0.25f64).exp() / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert!(boundary_kernel(0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn boundary_kernel_harmonic_measure() {
        // ∫₀ᵗ 2∂₁g ds = erfc(d/(2√t)) → 1 as d → 0⁺.
        let t = 1.0;
        let mut prev = 0.0;
        for &d in &[0.2, 0.05, 0.01] {
            let mass = integrate(|s| boundary_kernel(s, d, t, 0.0).unwrap(), 0.0, t, QuadSettings::abs(1e-12)).unwrap().value;
            assert!((mass - crate::special::erfc(d / 2.0)).abs() < 1e-8);
            assert!(mass > prev);
            prev = mass;
        }
        assert!((prev - 1.0).abs() < 1e-2);
    }

    /// Dawson's integral F(x) = ∫₀ˣ e^{u²−x²} du by direct quadrature.
    fn dawson(x: f64) -> f64 {
        integrate(|u| ((u - x) * (u + x)).exp(), 0.0, x, QuadSettings::rel(1e-13)).unwrap().value
    }

    fn l_nu_closed(nu: f64, t: f64) -> f64 {
        let a = nu * t;
        let sa = a.sqrt();
        let c = (PI / nu).sqrt();
        (2.0 / nu.sqrt() * dawson(sa) + (-a).exp() * c - crate::special::erfcx(sa) * c) / (4.0 * PI).sqrt()
    }

    #[test]
    fn l_nu_against_dawson_closed_form() {
        for &nu in &[0.5, 1.0, 4.0] {
            let spec = LnuSpec::new(nu).unwrap();
            for &t in &[1e-3, 0.1, 0.7, 2.0, 5.0, 20.0] {
                let q = l_nu(&spec, t).unwrap();
                let c = l_nu_closed(nu, t);
                assert!((q - c).abs() < 1e-8, "nu={nu} t={t}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn l_nu_origin_and_domain() {
        let spec = LnuSpec::new(1.0).unwrap();
        assert_eq!(l_nu(&spec, 0.0).unwrap(), 0.0);
        assert!(l_nu(&spec, -1.0).is_err());
        assert!(LnuSpec::new(0.0).is_err());
    }

    #[test]
    fn l_nu_laplace_target() {
        assert!((l_nu_laplace(1.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lnu_laplace_quadrature_matches_closed_form() {
        for (a, b) in [(1.0, 1.0), (1.0, 2.0), (4.0, 0.5)] {
            let q = lnu_laplace_quadrature(a, b).unwrap();
            assert!((q - l_nu_laplace(a, b)).abs() < 1e-6, "{a} {b}: {q}");
        }
    }

    #[test]
    fn lnu_scaled_sup_is_near_the_asymptote() {
        let s = lnu_scaled_sup(1.0).unwrap();
        let limit = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        assert!(s > limit && s < 1.05 * limit, "{s}");
    }

}
