//! The drift term U(y, √ν e^{−ν·}) + ∂₁U(y, e^{−ν·}) and its sheet-integral form
//! ∬_{y′>y} e^{−νs′} e^{−√ν(y′−y)} B(dy′, ds′).

use super::covariance::{bilinear_quadrature, CovKind};
use super::green::{check_tail_tol, DEFAULT_TAIL_TOL};
use super::pairing::{pair_functional, PairKind};
use super::sheet::{SheetFunctional, SheetGeometry, SheetSample};
use crate::error::{Error, Result};
use crate::grid::ExpProfile;

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain(format!("nu must be positive, got {nu}")));
    }
    Ok(())
}

/// (s-horizon, y-reach) beyond which e^{−νs}e^{−√ν·dist} < tail_tol.
pub fn drift_extent(nu: f64, tail_tol: f64) -> Result<(f64, f64)> {
    check_nu(nu)?;
    check_tail_tol(tail_tol)?;
    let l = (1.0 / tail_tol).ln();
    Ok((l / nu, l / nu.sqrt()))
}

/// Weights of U(y, √ν e^{−ν·}) + ∂₁U(y, e^{−ν·}), each pairing with its inner time integral by quadrature.
pub fn drift_field_functional(geom: &SheetGeometry, y: f64, nu: f64, tail_tol: f64) -> Result<SheetFunctional> {
    check_nu(nu)?;
    let e = ExpProfile::new(nu)?;
    let u = pair_functional(geom, y, &e, PairKind::U, tail_tol)?;
    let v = pair_functional(geom, y, &e, PairKind::V, tail_tol)?;
    u.combine(nu.sqrt(), &v, 1.0)
}

/// Exact cell averages of e^{−νs′}e^{−√ν(y′−y)}·1_{y′>y}.
pub fn drift_integral_functional(geom: &SheetGeometry, y: f64, nu: f64, tail_tol: f64) -> Result<SheetFunctional> {
    let (horizon, reach) = drift_extent(nu, tail_tol)?;
    geom.require_cover(y, y + reach, horizon)?;
    let rows = geom.rows_between(y, y + reach);
    let cols = geom.cols_below(horizon);
    let (dy, ds) = (geom.dy, geom.ds);
    let r = nu.sqrt();
    SheetFunctional::build(*geom, rows, cols, |j, k| {
        let lo = geom.y_lower(j).max(y);
        let hi = geom.y_lower(j) + dy;
        if hi <= y {
            return Ok(0.0);
        }
        let ypart = ((-r * (lo - y)).exp() - (-r * (hi - y)).exp()) / (r * dy);
        let s_lo = k as f64 * ds;
        let spart = (-nu * s_lo).exp() * -(-nu * ds).exp_m1() / (nu * ds);
        Ok(ypart * spart)
    })
}

pub fn drift_field_form(sheet: &SheetSample, y: f64, nu: f64) -> Result<f64> {
    drift_field_functional(sheet.geometry(), y, nu, DEFAULT_TAIL_TOL)?.eval(sheet)
}

pub fn drift_integral_form(sheet: &SheetSample, y: f64, nu: f64) -> Result<f64> {
    drift_integral_functional(sheet.geometry(), y, nu, DEFAULT_TAIL_TOL)?.eval(sheet)
}

/// ∬_{y′>y} e^{−2νs′}e^{−2√ν(y′−y)} = (1/(2ν))·(1/(2√ν)).
pub fn drift_variance_closed_form(nu: f64) -> Result<f64> {
    check_nu(nu)?;
    Ok(1.0 / (2.0 * nu) / (2.0 * nu.sqrt()))
}

/// ν⟨e^{−ν·}; C₁e^{−ν·}⟩ + ⟨e^{−ν·}; C₂e^{−ν·}⟩ by double quadrature.
pub fn drift_variance_quadrature(nu: f64) -> Result<f64> {
    check_nu(nu)?;
    let e = ExpProfile::new(nu)?;
    Ok(nu * bilinear_quadrature(CovKind::U, &e, &e)? + bilinear_quadrature(CovKind::V, &e, &e)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussfield::sheet::sheet_sample;
    use crate::quad::{integrate_to_inf, QuadSettings};

    fn geom(nu: f64, dy: f64, ds: f64) -> SheetGeometry {
        let (h, reach) = drift_extent(nu, DEFAULT_TAIL_TOL).unwrap();
        SheetGeometry::aligned(0.0, 0.0, reach, h, dy, ds).unwrap()
    }

    #[test]
    fn variance_closed_form_against_quadrature() {
        for nu in [0.5, 1.0, 4.0] {
            let q = integrate_to_inf(|s| (-2.0 * nu * s).exp(), 0.0, QuadSettings::rel(1e-12)).unwrap().value
                * integrate_to_inf(|y| (-2.0 * f64::sqrt(nu) * y).exp(), 0.0, QuadSettings::rel(1e-12)).unwrap().value;
            assert!((drift_variance_closed_form(nu).unwrap() - q).abs() < 1e-10 * q);
            assert!((drift_variance_quadrature(nu).unwrap() - q).abs() < 1e-6 * q);
        }
    }

    #[test]
    fn discrete_variances_are_close_to_the_target() {
        let nu = 1.0;
        let g = geom(nu, 0.1, 0.1);
        let target = drift_variance_closed_form(nu).unwrap();
        let fi = drift_integral_functional(&g, 0.0, nu, DEFAULT_TAIL_TOL).unwrap();
        let ff = drift_field_functional(&g, 0.0, nu, DEFAULT_TAIL_TOL).unwrap();
        assert!((fi.variance() / target - 1.0).abs() < 5e-3, "{}", fi.variance());
        assert!((ff.variance() / target - 1.0).abs() < 5e-3, "{}", ff.variance());
    }

    #[test]
    fn forms_agree_and_converge() {
        let nu = 1.0;
        let mut gaps = vec![];
        for h in [0.2, 0.1] {
            let g = geom(nu, h, h);
            let fi = drift_integral_functional(&g, 0.0, nu, DEFAULT_TAIL_TOL).unwrap();
            let ff = drift_field_functional(&g, 0.0, nu, DEFAULT_TAIL_TOL).unwrap();
            gaps.push((fi.distance_sq(&ff).unwrap() / fi.variance()).sqrt());
        }
        assert!(gaps[1] < 5e-2 && gaps[1] < gaps[0] / 1.8, "{gaps:?}");
    }

    #[test]
    fn zero_sheet_and_bad_nu() {
        let g = geom(1.0, 0.2, 0.2);
        let z = SheetSample::zeros(g).unwrap();
        assert_eq!(drift_field_form(&z, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(drift_integral_form(&z, 0.0, 1.0).unwrap(), 0.0);
        assert!(drift_integral_form(&z, 0.0, 0.0).unwrap_err().is_usage());
        assert!(drift_field_form(&z, 0.0, -1.0).unwrap_err().is_usage());
    }

    #[test]
    fn pathwise_values_match_on_one_sheet() {
        let g = geom(1.0, 0.1, 0.1);
        let s = sheet_sample(g.rect(), g.dy, g.ds, 42, 0).unwrap();
        let a = drift_field_form(&s, 0.0, 1.0).unwrap();
        let b = drift_integral_form(&s, 0.0, 1.0).unwrap();
        let sd = drift_variance_closed_form(1.0).unwrap().sqrt();
        assert!((a - b).abs() < 0.1 * sd, "{a} vs {b}");
    }

    #[test]
    fn row_shift_equals_rebuilding_at_the_shifted_point() {
        let (h, reach) = drift_extent(1.0, DEFAULT_TAIL_TOL).unwrap();
        let g = SheetGeometry::aligned(0.0, 1.0, reach, h, 0.2, 0.2).unwrap();
        for build in [drift_field_functional, drift_integral_functional] {
            let base = build(&g, 0.0, 1.0, DEFAULT_TAIL_TOL).unwrap();
            let moved = build(&g, 0.6, 1.0, DEFAULT_TAIL_TOL).unwrap();
            let shifted = base.shifted(3).unwrap();
            assert!(moved.distance_sq(&shifted).unwrap() < 1e-20 * moved.variance());
        }
        let base = drift_integral_functional(&g, 0.0, 1.0, DEFAULT_TAIL_TOL).unwrap();
        assert!(base.shifted(-1000).is_err());
    }
}
