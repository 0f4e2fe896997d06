//! Pairings U(x,h) = ∬ B(dy,ds) ∫ g(y,s;x,t)h(t)dt and ∂₁U(x,h) with ∂₃g.

use super::green::{check_tail_tol, gaussian_reach, DEFAULT_TAIL_TOL};
use super::sheet::{SheetFunctional, SheetGeometry, SheetSample};
use crate::error::{Error, Result};
use crate::grid::{TailModel, TimeProfile};
use crate::quad::{integrate, integrate_to_inf, QuadSettings};
use std::f64::consts::PI;

/// U(x,h) or ∂₁U(x,h).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    U,
    V,
}

/// (time horizon, spatial reach) outside of which the profile's kernel weights are below `tail_tol`.
pub fn effective_extent(h: &dyn TimeProfile, tail_tol: f64) -> Result<(f64, f64)> {
    check_tail_tol(tail_tol)?;
    let log_inv = (1.0 / tail_tol).ln();
    let (_, hi) = h.support();
    if hi.is_finite() {
        return Ok((hi, gaussian_reach(hi, tail_tol)));
    }
    match h.tail() {
        TailModel::Exponential { rate } => Ok((log_inv / rate, log_inv / rate.sqrt())),
        other => Err(Error::config(format!("cannot bound the sheet extent of a profile with tail {other:?}"))),
    }
}

const INNER: QuadSettings = QuadSettings { abs_tol: 1e-13, rel_tol: 1e-9, max_intervals: 400 };

/// ∫ K(x−y, t−s) h(t) dt at one cell center, with t = s + u².
fn inner_weight(kind: PairKind, d: f64, s: f64, h: &dyn TimeProfile) -> Result<f64> {
    let (lo, hi) = h.support();
    if s >= hi {
        return Ok(0.0);
    }
    let c = 1.0 / (4.0 * PI).sqrt();
    let f = |u: f64| {
        let hv = h.value(s + u * u);
        if hv == 0.0 {
            return 0.0;
        }
        if u == 0.0 {
            return if kind == PairKind::U && d == 0.0 { 2.0 * c * hv } else { 0.0 };
        }
        let e = (-d * d / (4.0 * u * u)).exp();
        match kind {
            PairKind::U => 2.0 * c * e * hv,
            PairKind::V => -d / (u * u) * c * e * hv,
        }
    };
    let start = (lo - s).max(0.0).sqrt();
    let est = if hi.is_finite() { integrate(f, start, (hi - s).sqrt(), INNER)? } else { integrate_to_inf(f, start, INNER)? };
    Ok(est.value)
}

/// Cell weights of the pairing at position x; the inner t-integral is done per cell center.
pub fn pair_functional(geom: &SheetGeometry, x: f64, h: &dyn TimeProfile, kind: PairKind, tail_tol: f64) -> Result<SheetFunctional> {
    let (horizon, reach) = effective_extent(h, tail_tol)?;
    geom.require_cover(x - reach, x + reach, horizon)?;
    let rows = geom.rows_between(x - reach, x + reach);
    let cols = geom.cols_below(horizon);
    SheetFunctional::build(*geom, rows, cols, |j, k| inner_weight(kind, x - geom.y_center(j), geom.s_center(k), h))
}

/// U(x,h) on one sheet.
pub fn pair_u(sheet: &SheetSample, x: f64, h: &dyn TimeProfile) -> Result<f64> {
    pair_functional(sheet.geometry(), x, h, PairKind::U, DEFAULT_TAIL_TOL)?.eval(sheet)
}

/// ∂₁U(x,h) on one sheet.
pub fn pair_v(sheet: &SheetSample, x: f64, h: &dyn TimeProfile) -> Result<f64> {
    pair_functional(sheet.geometry(), x, h, PairKind::V, DEFAULT_TAIL_TOL)?.eval(sheet)
}

/// U(x,h) and ∂₁U(x,h) for a list of test functions at one location.
#[derive(Clone, Debug)]
pub struct FieldObservable {
    pub x: f64,
    pub u: Vec<SheetFunctional>,
    pub v: Vec<SheetFunctional>,
}

impl FieldObservable {
    pub fn new(geom: &SheetGeometry, x: f64, hs: &[&dyn TimeProfile], tail_tol: f64) -> Result<Self> {
        let u = hs.iter().map(|h| pair_functional(geom, x, *h, PairKind::U, tail_tol)).collect::<Result<Vec<_>>>()?;
        let v = hs.iter().map(|h| pair_functional(geom, x, *h, PairKind::V, tail_tol)).collect::<Result<Vec<_>>>()?;
        Ok(Self { x, u, v })
    }

    /// (U(x,h_i))_i followed by (∂₁U(x,h_i))_i.
    pub fn eval(&self, sheet: &SheetSample) -> Result<Vec<f64>> {
        self.u.iter().chain(&self.v).map(|f| f.eval(sheet)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussfield::covariance::{bilinear_quadrature, CovKind};
    use crate::gaussfield::sheet::{sheet_sample, Rect};
    use crate::grid::{bump, ExpProfile, TestFunction};

    fn geom_for(h: &dyn TimeProfile, dy: f64, ds: f64) -> SheetGeometry {
        let (t, reach) = effective_extent(h, DEFAULT_TAIL_TOL).unwrap();
        SheetGeometry::aligned(0.0, 0.0, reach, t, dy, ds).unwrap()
    }

    #[test]
    fn exponential_weights_have_closed_forms() {
        // ∫ g(d,τ)e^{−ν(s+τ)}dτ = e^{−νs}e^{−√ν|d|}/(2√ν); the x-derivative is −sgn(d)e^{−νs}e^{−√ν|d|}/2.
        let nu = 2.0;
        let e = ExpProfile::new(nu).unwrap();
        for &(d, s) in &[(0.05, 0.0), (-0.7, 0.3), (2.0, 1.5)] {
            let wu = inner_weight(PairKind::U, d, s, &e).unwrap();
            let wv = inner_weight(PairKind::V, d, s, &e).unwrap();
            let base = (-nu * s).exp() * (-nu.sqrt() * f64::abs(d)).exp();
            assert!((wu - base / (2.0 * nu.sqrt())).abs() < 1e-10 * base, "{wu}");
            assert!((wv + d.signum() * base / 2.0).abs() < 1e-9 * base, "{wv}");
        }
    }

    #[test]
    fn variances_approach_the_gram_values() {
        let h = bump(2.0, 1.0, 8.0, 256).unwrap();
        let g = geom_for(&h, 0.1, 1.0 / 32.0);
        let fu = pair_functional(&g, 0.0, &h, PairKind::U, DEFAULT_TAIL_TOL).unwrap();
        let fv = pair_functional(&g, 0.0, &h, PairKind::V, DEFAULT_TAIL_TOL).unwrap();
        let qu = bilinear_quadrature(CovKind::U, &h, &h).unwrap();
        let qv = bilinear_quadrature(CovKind::V, &h, &h).unwrap();
        assert!((fu.variance() / qu - 1.0).abs() < 5e-3, "{} vs {qu}", fu.variance());
        assert!((fv.variance() / qv - 1.0).abs() < 2e-2, "{} vs {qv}", fv.variance());
        // U and ∂U are uncorrelated at a cell boundary by parity of the weights.
        assert!(fu.covariance(&fv).abs() < 1e-12 * (qu * qv).sqrt());
    }

    #[test]
    fn zero_sheet_and_linearity() {
        let h1 = bump(1.5, 0.5, 8.0, 128).unwrap();
        let h2 = bump(2.5, 0.7, 8.0, 128).unwrap();
        let g = geom_for(&h2, 0.2, 0.1);
        assert_eq!(pair_u(&SheetSample::zeros(g).unwrap(), 0.0, &h1).unwrap(), 0.0);
        let s = sheet_sample(g.rect(), 0.2, 0.1, 3, 1).unwrap();
        let comb = Sum(&h1, 2.0, &h2, -1.5);
        for kind in [PairKind::U, PairKind::V] {
            let f = |h: &dyn TimeProfile| pair_functional(&g, 0.0, h, kind, DEFAULT_TAIL_TOL).unwrap().eval(&s).unwrap();
            let lhs = f(&comb);
            let rhs = 2.0 * f(&h1) - 1.5 * f(&h2);
            assert!((lhs - rhs).abs() < 1e-10, "{kind:?}: {lhs} vs {rhs}");
        }
    }

    struct Sum<'a>(&'a TestFunction, f64, &'a TestFunction, f64);

    impl TimeProfile for Sum<'_> {
        fn value(&self, t: f64) -> f64 {
            self.1 * self.0.value(t) + self.3 * self.2.value(t)
        }
        fn derivative(&self, t: f64) -> f64 {
            self.1 * self.0.derivative(t) + self.3 * self.2.derivative(t)
        }
        fn second_derivative(&self, t: f64) -> f64 {
            self.1 * self.0.second_derivative(t) + self.3 * self.2.second_derivative(t)
        }
        fn support(&self) -> (f64, f64) {
            (self.0.support().0.min(self.2.support().0), self.0.support().1.max(self.2.support().1))
        }
        fn tail(&self) -> TailModel {
            TailModel::Compact
        }
    }

    #[test]
    fn coverage_is_checked() {
        let h = bump(2.0, 1.0, 8.0, 128).unwrap();
        let g = SheetGeometry::new(Rect::new(-5.0, 5.0, 3.0).unwrap(), 0.1, 0.1).unwrap();
        assert!(pair_functional(&g, 0.0, &h, PairKind::U, DEFAULT_TAIL_TOL).unwrap_err().is_usage());
        struct Opaque;
        impl TimeProfile for Opaque {
            fn value(&self, _: f64) -> f64 {
                1.0
            }
            fn derivative(&self, _: f64) -> f64 {
                0.0
            }
            fn second_derivative(&self, _: f64) -> f64 {
                0.0
            }
            fn support(&self) -> (f64, f64) {
                (0.0, f64::INFINITY)
            }
            fn tail(&self) -> TailModel {
                TailModel::Unknown
            }
        }
        assert!(matches!(effective_extent(&Opaque, 1e-8), Err(Error::Config(_))));
    }
}
