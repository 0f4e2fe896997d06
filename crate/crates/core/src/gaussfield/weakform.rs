//! Weak-form residual η(f) = ∬ U·[∂ₓ²f + (−∂t²)^{1/2}f^a − √2 ∂ₓ(−∂t²)^{1/4}f^a] dx dt.
//!
//! The fast path exchanges the order of integration: η(f) = ∬ W(y,s) B(dy,ds) with
//! W(y,s) = ∫_s^{t_max} (G_{t−s} F(·,t))(y) dt, the heat semigroup applied by FFT in y and
//! the time integral done exactly for F piecewise constant on the time cells.

use super::green::{greenrep_functional, gaussian_reach, KernelRule, DEFAULT_TAIL_TOL};
use super::sheet::{SheetFunctional, SheetGeometry, SheetSample};
use crate::error::{Error, Result};
use crate::fracops::{frac_laplacian, SpectralPlan};
use crate::grid::{antisym_extend, restrict, TestFunction, TimeGrid, TimeProfile};
use crate::quad::{integrate, QuadSettings};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::{PI, SQRT_2};

/// Zero-padding of the time transforms in the bracket.
const BRACKET_PADDING: usize = 8;
/// Spatial samples per bump radius when applying the heat semigroup.
const SAMPLES_PER_RADIUS: f64 = 40.0;

/// a·exp(−1/(1−u²)), u = (x−c)/r, as a function of space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceBump {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
}

impl SpaceBump {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.is_finite() {
            return Err(Error::domain(format!("space bump needs finite center and positive radius, got ({center}, {radius})")));
        }
        Ok(Self { center, radius, amplitude: 1.0 })
    }

    fn local(&self, x: f64) -> Option<(f64, f64)> {
        let u = (x - self.center) / self.radius;
        let q = 1.0 - u * u;
        if q <= 1e-3 {
            None
        } else {
            Some((u, 1.0 / q))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.local(x).map_or(0.0, |(_, iq)| self.amplitude * (-iq).exp())
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.local(x).map_or(0.0, |(u, iq)| self.amplitude * (-iq).exp() * (-2.0 * u * iq * iq) / self.radius)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.local(x).map_or(0.0, |(u, iq)| {
            let d1 = -2.0 * u * iq * iq;
            let d2 = -(2.0 + 6.0 * u * u) * iq * iq * iq;
            self.amplitude * (-iq).exp() * (d1 * d1 + d2) / (self.radius * self.radius)
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }
}

/// f(x,t) = Σ c_m φ_m(x) ψ_m(t).
#[derive(Clone, Debug)]
pub struct TensorTestFunction {
    terms: Vec<(f64, SpaceBump, TestFunction)>,
}

impl TensorTestFunction {
    pub fn new(terms: Vec<(f64, SpaceBump, TestFunction)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::domain("tensor test function needs at least one term"))?;
        let grid = *first.2.grid();
        if terms.iter().any(|t| *t.2.grid() != grid) {
            return Err(Error::domain("all time factors must share one grid"));
        }
        Ok(Self { terms })
    }

    pub fn single(phi: SpaceBump, psi: TestFunction) -> Self {
        Self { terms: vec![(1.0, phi, psi)] }
    }

    pub fn grid(&self) -> &TimeGrid {
        self.terms[0].2.grid()
    }

    pub fn terms(&self) -> &[(f64, SpaceBump, TestFunction)] {
        &self.terms
    }

    /// Union of the spatial supports.
    pub fn x_support(&self) -> (f64, f64) {
        self.terms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, p, _)| (lo.min(p.support().0), hi.max(p.support().1)))
    }

    /// ‖f‖²_{L²} by quadrature of the factor products.
    pub fn norm_sq(&self) -> Result<f64> {
        let settings = QuadSettings::rel(1e-12);
        let mut total = 0.0;
        for (ca, pa, qa) in &self.terms {
            for (cb, pb, qb) in &self.terms {
                let (xl, xh) = (pa.support().0.max(pb.support().0), pa.support().1.min(pb.support().1));
                let (tl, th) = (qa.support().0.max(qb.support().0), qa.support().1.min(qb.support().1));
                if xl >= xh || tl >= th {
                    continue;
                }
                let px = integrate(|x| pa.value(x) * pb.value(x), xl, xh, settings)?.value;
                let pt = integrate(|t| qa.value(t) * qb.value(t), tl, th, settings)?.value;
                total += ca * cb * px * pt;
            }
        }
        Ok(total)
    }

    /// Per term, the time factors (ψ, (−∂t²)^{1/2}ψ^a, (−∂t²)^{1/4}ψ^a) restricted to the grid.
    fn time_factors(&self) -> Result<Vec<[Vec<f64>; 3]>> {
        let plan = SpectralPlan::new(self.grid(), BRACKET_PADDING)?;
        self.terms
            .iter()
            .map(|(_, _, psi)| {
                let ext = antisym_extend(psi.values());
                let b1 = restrict(&frac_laplacian(&ext, 1.0, &plan)?).to_vec();
                let b2 = restrict(&frac_laplacian(&ext, 0.5, &plan)?).to_vec();
                Ok([psi.values().to_vec(), b1, b2])
            })
            .collect()
    }

    /// The bracket ∂ₓ²f + (−∂t²)^{1/2}f^a − √2 ∂ₓ(−∂t²)^{1/4}f^a at (x, t_k) for every k.
    pub fn bracket_column(&self, x: f64) -> Result<Vec<f64>> {
        let factors = self.time_factors()?;
        Ok(bracket_from_factors(&self.terms, &factors, x))
    }
}

fn bracket_from_factors(terms: &[(f64, SpaceBump, TestFunction)], factors: &[[Vec<f64>; 3]], x: f64) -> Vec<f64> {
    let n = factors[0][0].len();
    let mut out = vec![0.0; n];
    for ((c, phi, _), [psi, b1, b2]) in terms.iter().zip(factors) {
        let (p0, p1, p2) = (phi.value(x), phi.derivative(x), phi.second_derivative(x));
        for k in 0..n {
            out[k] += c * (p2 * psi[k] + p0 * b1[k] - SQRT_2 * p1 * b2[k]);
        }
    }
    out
}

fn check_layout(geom: &SheetGeometry, f: &TensorTestFunction, tail_tol: f64) -> Result<()> {
    let grid = f.grid();
    if (geom.ds - grid.dt()).abs() > 1e-12 * grid.dt() {
        return Err(Error::domain(format!("sheet ds = {} must equal the time step {}", geom.ds, grid.dt())));
    }
    let (xl, xh) = f.x_support();
    let reach = gaussian_reach(grid.t_max(), tail_tol);
    geom.require_cover(xl - reach, xh + reach, grid.t_max())
}

/// Cell weights W(y_j, s_k) of η(f) on `geom`; the sheet's s-cells must be the time cells of f.
pub fn weakform_functional(geom: &SheetGeometry, f: &TensorTestFunction, tail_tol: f64) -> Result<SheetFunctional> {
    check_layout(geom, f, tail_tol)?;
    let grid = *f.grid();
    let (n, dt) = (grid.n(), grid.dt());
    let factors = f.time_factors()?;
    // The spatial factors are sampled on a grid refined by an odd factor so that
    // sheet cell centers are fine nodes and φ″ is resolved without aliasing.
    let r_min = f.terms().iter().map(|t| t.1.radius).fold(f64::INFINITY, f64::min);
    let mut m = ((geom.dy * SAMPLES_PER_RADIUS / r_min).ceil() as usize).max(1);
    if m % 2 == 0 {
        m += 1;
    }
    let h = geom.dy / m as f64;
    let fine = m * geom.ny;
    let len = (2 * fine).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    // Spectra of the spatial factors φ″, φ, −√2φ′ per term.
    let spectrum = |g: &dyn Fn(f64) -> f64| {
        let mut buf: Vec<Complex64> =
            (0..len).map(|i| Complex64::new(if i < fine { g(geom.y_min + (i as f64 + 0.5) * h) } else { 0.0 }, 0.0)).collect();
        fwd.process(&mut buf);
        buf
    };
    let mut q = vec![vec![Complex64::new(0.0, 0.0); n]; len];
    for ((c, phi, _), [psi, b1, b2]) in f.terms().iter().zip(&factors) {
        let a = [spectrum(&|y| phi.second_derivative(y)), spectrum(&|y| phi.value(y)), spectrum(&|y| -SQRT_2 * phi.derivative(y))];
        for p in 0..len {
            for k in 0..n {
                q[p][k] += (a[0][p] * psi[k] + a[1][p] * b1[k] + a[2][p] * b2[k]) * *c;
            }
        }
    }

    // K(ξ, s_k) = ∫_{s_k}^{t_max} e^{−ξ²(t−s_k)} q(ξ, t) dt, exact for q constant on cells.
    let cell = |a: f64, h: f64| if a * h < 1e-14 { h } else { -(-a * h).exp_m1() / a };
    let mut kmat = vec![vec![Complex64::new(0.0, 0.0); len]; n];
    for p in 0..len {
        let idx = if p <= len / 2 { p as f64 } else { p as f64 - len as f64 };
        let xi = 2.0 * PI * idx / (len as f64 * h);
        let a = xi * xi;
        let (full, halfc) = (cell(a, dt), cell(a, 0.5 * dt));
        let (e_full, e_half) = ((-a * dt).exp(), (-a * 0.5 * dt).exp());
        let mut boundary = Complex64::new(0.0, 0.0);
        for k in (0..n).rev() {
            kmat[k][p] = q[p][k] * halfc + boundary * e_half;
            boundary = q[p][k] * full + boundary * e_full;
        }
    }
    let mut columns = Vec::with_capacity(n);
    for mut col in kmat {
        inv.process(&mut col);
        columns.push((0..geom.ny).map(|j| col[j * m + m / 2].re / len as f64).collect::<Vec<f64>>());
    }
    SheetFunctional::build(*geom, 0..geom.ny, n.min(geom.ns), |j, k| Ok(columns[k][j]))
}

/// η(f) on one sheet through the exchanged-order kernel.
pub fn weakform_residual(sheet: &SheetSample, f: &TensorTestFunction) -> Result<f64> {
    weakform_functional(sheet.geometry(), f, DEFAULT_TAIL_TOL)?.eval(sheet)
}

/// η(f) with U tabulated on the (x, t) grid by [`greenrep_functional`] and summed against the bracket.
/// The x nodes are cell centers of width `dx` over the spatial support of f.
pub fn weakform_residual_tabulated(sheet: &SheetSample, f: &TensorTestFunction, dx: f64, rule: KernelRule) -> Result<f64> {
    let geom = sheet.geometry();
    check_layout(geom, f, DEFAULT_TAIL_TOL)?;
    if !(dx > 0.0) {
        return Err(Error::domain(format!("dx must be positive, got {dx}")));
    }
    let grid = *f.grid();
    let factors = f.time_factors()?;
    let (xl, xh) = f.x_support();
    let nx = ((xh - xl) / dx).ceil() as usize;
    let mut eta = 0.0;
    for i in 0..nx {
        let x = xl + (i as f64 + 0.5) * dx;
        let column = bracket_from_factors(f.terms(), &factors, x);
        for (k, b) in column.iter().enumerate() {
            if *b == 0.0 {
                continue;
            }
            let u = greenrep_functional(geom, x, grid.node(k), rule, DEFAULT_TAIL_TOL)?.eval(sheet)?;
            eta += u * b;
        }
    }
    Ok(eta * dx * grid.dt())
}
