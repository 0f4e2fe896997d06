//! Cell-centred time grids, antisymmetric extension and test functions.

use crate::error::{Error, Result};

/// Uniform cell-centred grid on [0, t_max] with nodes (k + ½)·dt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_max: f64, n: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::domain(format!("t_max must be positive and finite, got {t_max}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::domain(format!("n must be a power of two, got {n}")));
        }
        Ok(Self { t_max, n, dt: t_max / n as f64 })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n).map(|k| f(self.node(k))).collect()
    }

    /// The grid with half the spacing on the same interval.
    pub fn refined(&self) -> Self {
        Self { t_max: self.t_max, n: 2 * self.n, dt: self.dt / 2.0 }
    }

    pub fn sym(&self) -> SymGrid {
        SymGrid { half: *self }
    }
}

/// Mirror of a [`TimeGrid`] over [−t_max, t_max]: 2n nodes (j − n + ½)·dt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymGrid {
    half: TimeGrid,
}

impl SymGrid {
    pub fn half(&self) -> &TimeGrid {
        &self.half
    }

    pub fn len(&self) -> usize {
        2 * self.half.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.half.dt
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        (j as f64 - self.half.n as f64 + 0.5) * self.half.dt
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|j| f(self.node(j))).collect()
    }
}

/// f^a on the mirrored grid: f^a(−t) = −f(t).
pub fn antisym_extend(f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * f.len());
    out.extend(f.iter().rev().map(|v| -v));
    out.extend_from_slice(f);
    out
}

/// Even extension, f(−t) = f(t).
pub fn sym_extend(f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * f.len());
    out.extend(f.iter().rev());
    out.extend_from_slice(f);
    out
}

/// The [0, t_max] half of values on a [`SymGrid`].
pub fn restrict(f: &[f64]) -> &[f64] {
    &f[f.len() / 2..]
}

/// Discrete L² pairing Σ f_k g_k dt.
pub fn pair(grid: &TimeGrid, f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != grid.n() || g.len() != grid.n() {
        return Err(Error::domain(format!(
            "pairing expects {} samples, got {} and {}",
            grid.n(),
            f.len(),
            g.len()
        )));
    }
    Ok(f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * grid.dt())
}

/// Behaviour of a function beyond the truncation point t_max.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailModel {
    /// Identically zero past the grid.
    Compact,
    /// f(t) ∝ e^{−rate·t}.
    Exponential { rate: f64 },
    /// f(t) ≈ a·t^{−p} + b·t^{−p−2}, fitted at the last node.
    PowerLaw { exponent: f64 },
    Unknown,
}

/// A function of time with closed-form derivatives.
pub trait TimeProfile: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
    fn second_derivative(&self, t: f64) -> f64;
    /// Interval outside of which the profile vanishes; the upper end may be infinite.
    fn support(&self) -> (f64, f64);
    fn tail(&self) -> TailModel;
}

/// Samples on a [`TimeGrid`] with optional derivative samples and tail metadata.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub derivative: Option<Vec<f64>>,
    pub tail: TailModel,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>, tail: TailModel) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::domain(format!("expected {} samples, got {}", grid.n(), values.len())));
        }
        Ok(Self { grid, values, derivative: None, tail })
    }

    pub fn with_derivative(mut self, derivative: Vec<f64>) -> Result<Self> {
        if derivative.len() != self.grid.n() {
            return Err(Error::domain(format!("expected {} derivative samples, got {}", self.grid.n(), derivative.len())));
        }
        self.derivative = Some(derivative);
        Ok(self)
    }

    pub fn from_profile(grid: TimeGrid, p: &dyn TimeProfile) -> Self {
        Self {
            grid,
            values: grid.sample(|t| p.value(t)),
            derivative: Some(grid.sample(|t| p.derivative(t))),
            tail: p.tail(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Smooth bump a·exp(−1/(1−u²)), u = (t−c)/r, cached on a grid.
#[derive(Clone, Debug)]
pub struct TestFunction {
    center: f64,
    radius: f64,
    amplitude: f64,
    grid: TimeGrid,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

/// Builds the canonical bump centred at `center` on the grid (t_max, n).
pub fn bump(center: f64, radius: f64, t_max: f64, n: usize) -> Result<TestFunction> {
    let grid = TimeGrid::new(t_max, n)?;
    TestFunction::on_grid(center, radius, 1.0, grid)
}

impl TestFunction {
    pub fn on_grid(center: f64, radius: f64, amplitude: f64, grid: TimeGrid) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::domain(format!("bump radius must be positive, got {radius}")));
        }
        if !(center - radius > 0.0 && center + radius < grid.t_max()) {
            return Err(Error::domain(format!(
                "bump support [{}, {}] not inside (0, {})",
                center - radius,
                center + radius,
                grid.t_max()
            )));
        }
        let mut h = Self { center, radius, amplitude, grid, values: Vec::new(), derivs: Vec::new() };
        h.values = grid.sample(|t| h.value(t));
        h.derivs = grid.sample(|t| h.derivative(t));
        Ok(h)
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self::on_grid(self.center, self.radius, amplitude, self.grid).expect("support already validated")
    }

    /// Same bump cached on another grid.
    pub fn regrid(&self, grid: TimeGrid) -> Result<Self> {
        Self::on_grid(self.center, self.radius, self.amplitude, grid)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn sup_norm(&self) -> f64 {
        self.amplitude.abs() * (-1.0f64).exp()
    }

    pub fn as_grid_function(&self) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.clone(),
            derivative: Some(self.derivs.clone()),
            tail: TailModel::Compact,
        }
    }

    /// (u, 1/(1−u²)) inside the numerically non-zero part of the support.
    #[inline]
    fn local(&self, t: f64) -> Option<(f64, f64)> {
        let u = (t - self.center) / self.radius;
        let q = 1.0 - u * u;
        // exp(−1/q) underflows long before q reaches 1e-3.
        if q <= 1e-3 {
            None
        } else {
            Some((u, 1.0 / q))
        }
    }
}

impl TimeProfile for TestFunction {
    fn value(&self, t: f64) -> f64 {
        match self.local(t) {
            Some((_, iq)) => self.amplitude * (-iq).exp(),
            None => 0.0,
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match self.local(t) {
            Some((u, iq)) => self.amplitude * (-iq).exp() * (-2.0 * u * iq * iq) / self.radius,
            None => 0.0,
        }
    }

    fn second_derivative(&self, t: f64) -> f64 {
        match self.local(t) {
            Some((u, iq)) => {
                let d1 = -2.0 * u * iq * iq;
                let d2 = -(2.0 + 6.0 * u * u) * iq * iq * iq;
                self.amplitude * (-iq).exp() * (d1 * d1 + d2) / (self.radius * self.radius)
            }
            None => 0.0,
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    fn tail(&self) -> TailModel {
        TailModel::Compact
    }
}

/// a·e^{−rate·t} on t ≥ 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpProfile {
    pub rate: f64,
    pub amplitude: f64,
}

impl ExpProfile {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::domain(format!("decay rate must be positive, got {rate}")));
        }
        Ok(Self { rate, amplitude: 1.0 })
    }

    pub fn scaled(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }
}

impl TimeProfile for ExpProfile {
    fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.amplitude * (-self.rate * t).exp()
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        -self.rate * self.value(t)
    }

    fn second_derivative(&self, t: f64) -> f64 {
        self.rate * self.rate * self.value(t)
    }

    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn tail(&self) -> TailModel {
        TailModel::Exponential { rate: self.rate }
    }
}
