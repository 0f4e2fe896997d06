//! Brownian-sheet increments on a (y, s) rectangle and linear functionals of them.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest sheet, in cells, that [`sheet_sample`] will allocate (512 MiB of f64).
pub const DEFAULT_CELL_BUDGET: usize = 1 << 26;

/// Rectangle [y_min, y_max] × [0, s_max].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub y_min: f64,
    pub y_max: f64,
    pub s_max: f64,
}

impl Rect {
    pub fn new(y_min: f64, y_max: f64, s_max: f64) -> Result<Self> {
        if !(y_min.is_finite() && y_max.is_finite() && s_max.is_finite()) || y_max <= y_min || s_max <= 0.0 {
            return Err(Error::domain(format!("empty sheet rectangle [{y_min}, {y_max}] x [0, {s_max}]")));
        }
        Ok(Self { y_min, y_max, s_max })
    }
}

/// Cell layout of a sheet; cell (j, k) is [y_min + j·dy, y_min + (j+1)·dy] × [k·ds, (k+1)·ds].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SheetGeometry {
    pub y_min: f64,
    pub dy: f64,
    pub ny: usize,
    pub ds: f64,
    pub ns: usize,
}

impl SheetGeometry {
    /// Covers `rect` with whole cells; the upper edges are rounded outwards.
    pub fn new(rect: Rect, dy: f64, ds: f64) -> Result<Self> {
        if !(dy > 0.0 && ds > 0.0 && dy.is_finite() && ds.is_finite()) {
            return Err(Error::domain(format!("cell sizes must be positive, got dy={dy}, ds={ds}")));
        }
        let count = |len: f64, h: f64| ((len / h) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            y_min: rect.y_min,
            dy,
            ny: count(rect.y_max - rect.y_min, dy),
            ds,
            ns: count(rect.s_max, ds),
        })
    }

    /// Layout covering [x_lo − reach, x_hi + reach] × [0, s_hi] with x_lo on a cell boundary.
    pub fn aligned(x_lo: f64, x_hi: f64, reach: f64, s_hi: f64, dy: f64, ds: f64) -> Result<Self> {
        if !(dy > 0.0) || x_hi < x_lo || reach < 0.0 {
            return Err(Error::domain(format!("invalid sheet span [{x_lo}, {x_hi}] with reach {reach} and dy {dy}")));
        }
        let pad = (reach / dy - 1e-9).ceil().max(0.0);
        let y_min = x_lo - pad * dy;
        let span = ((x_hi - x_lo) / dy - 1e-9).ceil().max(0.0) + 2.0 * pad;
        Self::new(Rect::new(y_min, y_min + span.max(1.0) * dy, s_hi)?, dy, ds)
    }

    pub fn rect(&self) -> Rect {
        Rect { y_min: self.y_min, y_max: self.y_max(), s_max: self.s_max() }
    }

    pub fn cells(&self) -> usize {
        self.ny * self.ns
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.ny as f64 * self.dy
    }

    pub fn s_max(&self) -> f64 {
        self.ns as f64 * self.ds
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * self.dy
    }

    pub fn y_lower(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy
    }

    pub fn s_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.ds
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.ns + k
    }

    /// Errors unless [y_lo, y_hi] × [0, s_hi] lies inside the sheet, naming the first deficient side.
    pub fn require_cover(&self, y_lo: f64, y_hi: f64, s_hi: f64) -> Result<()> {
        let slack = 1e-9 * (self.dy + self.ds);
        if y_lo < self.y_min - slack {
            return Err(Error::domain(format!("sheet does not cover the left side: needs y_min <= {y_lo:.6}, has {:.6}", self.y_min)));
        }
        if y_hi > self.y_max() + slack {
            return Err(Error::domain(format!("sheet does not cover the right side: needs y_max >= {y_hi:.6}, has {:.6}", self.y_max())));
        }
        if s_hi > self.s_max() + slack {
            return Err(Error::domain(format!("sheet does not cover the top side: needs s_max >= {s_hi:.6}, has {:.6}", self.s_max())));
        }
        Ok(())
    }

    /// Cell rows meeting [y_lo, y_hi].
    pub fn rows_between(&self, y_lo: f64, y_hi: f64) -> std::ops::Range<usize> {
        let lo = ((y_lo - self.y_min) / self.dy).floor().max(0.0) as usize;
        let hi = (((y_hi - self.y_min) / self.dy).ceil().max(0.0) as usize).min(self.ny);
        lo.min(hi)..hi
    }

    /// Cell columns meeting [0, s_hi).
    pub fn cols_below(&self, s_hi: f64) -> usize {
        ((s_hi / self.ds - 1e-12).ceil().max(0.0) as usize).min(self.ns)
    }
}

/// One realization of the increments ΔB_{jk}, each N(0, dy·ds).
#[derive(Clone, Debug)]
pub struct SheetSample {
    geom: SheetGeometry,
    data: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl SheetSample {
    /// All increments zero.
    pub fn zeros(geom: SheetGeometry) -> Result<Self> {
        check_budget(&geom, DEFAULT_CELL_BUDGET)?;
        Ok(Self { geom, data: vec![0.0; geom.cells()], seed: 0, stream: 0 })
    }

    pub fn from_data(geom: SheetGeometry, data: Vec<f64>, seed: u64, stream: u64) -> Result<Self> {
        if data.len() != geom.cells() {
            return Err(Error::domain(format!("sheet needs {} increments, got {}", geom.cells(), data.len())));
        }
        Ok(Self { geom, data, seed, stream })
    }

    /// Overwrites the increments with the draw for (seed, stream).
    pub fn resample(&mut self, seed: u64, stream: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let sd = (self.geom.dy * self.geom.ds).sqrt();
        for x in self.data.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = sd * z;
        }
        self.seed = seed;
        self.stream = stream;
    }

    pub fn geometry(&self) -> &SheetGeometry {
        &self.geom
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn increment(&self, j: usize, k: usize) -> f64 {
        self.data[self.geom.index(j, k)]
    }
}

fn check_budget(geom: &SheetGeometry, budget: usize) -> Result<()> {
    let cells = geom.ny.saturating_mul(geom.ns);
    if cells > budget {
        return Err(Error::Resource { cells, budget });
    }
    Ok(())
}

/// Draws the sheet for (seed, stream) under the default memory budget.
pub fn sheet_sample(rect: Rect, dy: f64, ds: f64, seed: u64, stream: u64) -> Result<SheetSample> {
    sheet_sample_with_budget(rect, dy, ds, seed, stream, DEFAULT_CELL_BUDGET)
}

pub fn sheet_sample_with_budget(rect: Rect, dy: f64, ds: f64, seed: u64, stream: u64, budget: usize) -> Result<SheetSample> {
    let geom = SheetGeometry::new(rect, dy, ds)?;
    check_budget(&geom, budget)?;
    let mut sheet = SheetSample { geom, data: vec![0.0; geom.cells()], seed, stream };
    sheet.resample(seed, stream);
    Ok(sheet)
}

/// Σ w_{jk}·ΔB_{jk} over a block of rows × leading columns of a sheet.
#[derive(Clone, Debug)]
pub struct SheetFunctional {
    geom: SheetGeometry,
    rows: std::ops::Range<usize>,
    cols: usize,
    weights: Vec<f64>,
}

impl SheetFunctional {
    /// Weights from `w(j, k)` on rows × [0, cols).
    pub fn build<F: Fn(usize, usize) -> Result<f64>>(geom: SheetGeometry, rows: std::ops::Range<usize>, cols: usize, w: F) -> Result<Self> {
        let mut weights = Vec::with_capacity(rows.len() * cols);
        for j in rows.clone() {
            for k in 0..cols {
                weights.push(w(j, k)?);
            }
        }
        Ok(Self { geom, rows, cols, weights })
    }

    pub fn geometry(&self) -> &SheetGeometry {
        &self.geom
    }

    pub fn weight(&self, j: usize, k: usize) -> f64 {
        if !self.rows.contains(&j) || k >= self.cols {
            return 0.0;
        }
        self.weights[(j - self.rows.start) * self.cols + k]
    }

    pub fn eval(&self, sheet: &SheetSample) -> Result<f64> {
        if sheet.geometry() != &self.geom {
            return Err(Error::domain("functional was built for a different sheet layout"));
        }
        Ok(self.eval_unchecked(sheet.data()))
    }

    fn eval_unchecked(&self, data: &[f64]) -> f64 {
        let ns = self.geom.ns;
        let mut acc = 0.0;
        for (r, j) in self.rows.clone().enumerate() {
            let w = &self.weights[r * self.cols..(r + 1) * self.cols];
            let b = &data[j * ns..j * ns + self.cols];
            acc += w.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    }

    /// Σ w²·dy·ds, the exact variance of [`SheetFunctional::eval`].
    pub fn variance(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>() * self.geom.dy * self.geom.ds
    }

    /// Σ w·w′·dy·ds.
    pub fn covariance(&self, other: &SheetFunctional) -> f64 {
        let mut acc = 0.0;
        for j in self.rows.clone() {
            for k in 0..self.cols {
                acc += self.weight(j, k) * other.weight(j, k);
            }
        }
        acc * self.geom.dy * self.geom.ds
    }

    /// a·self + b·other on the union of both blocks.
    pub fn combine(&self, a: f64, other: &SheetFunctional, b: f64) -> Result<Self> {
        if self.geom != other.geom {
            return Err(Error::domain("cannot combine functionals on different sheet layouts"));
        }
        let rows = self.rows.start.min(other.rows.start)..self.rows.end.max(other.rows.end);
        let cols = self.cols.max(other.cols);
        Self::build(self.geom, rows, cols, |j, k| Ok(a * self.weight(j, k) + b * other.weight(j, k)))
    }

    /// The same weights moved by `rows` y-cells, i.e. the functional translated by rows·dy.
    pub fn shifted(&self, rows: isize) -> Result<Self> {
        let start = self.rows.start as isize + rows;
        let end = self.rows.end as isize + rows;
        if start < 0 || end > self.geom.ny as isize {
            return Err(Error::domain(format!("shift by {rows} rows leaves the sheet's {} rows", self.geom.ny)));
        }
        Ok(Self { geom: self.geom, rows: start as usize..end as usize, cols: self.cols, weights: self.weights.clone() })
    }

    /// Sum of squared weight differences times the cell area.
    pub fn distance_sq(&self, other: &SheetFunctional) -> Result<f64> {
        let diff = self.combine(1.0, other, -1.0)?;
        Ok(diff.variance())
    }
}
