//! Exact-cell quadrature for the weakly singular time convolutions.

use super::toeplitz::Toeplitz;
use crate::error::{Error, Result};
use crate::grid::{antisym_extend, restrict, sym_extend, GridFunction, TailModel, TestFunction, TimeGrid, TimeProfile};
use crate::quad::{integrate_to_inf, QuadSettings};
use crate::special::erfcx;
use std::f64::consts::PI;

/// Decay exponent of 𝔄₂h: h^a is odd, so the t^{-3/2} term cancels.
pub const A2_TAIL_EXPONENT: f64 = 2.5;

/// √(m+½) − √(m−½) without cancellation.
#[inline]
fn root_step(m: f64) -> f64 {
    1.0 / ((m + 0.5).sqrt() + (m - 0.5).sqrt())
}

/// Cell integrals of sgn(u)/√(π|u|).
fn a2_weight(dt: f64) -> impl Fn(i64) -> f64 {
    let c = 2.0 / PI.sqrt() * dt.sqrt();
    move |m| {
        if m == 0 {
            0.0
        } else {
            (m as f64).signum() * c * root_step(m.unsigned_abs() as f64)
        }
    }
}

/// Cell integrals of (4π|u|)^{-1/2}.
fn halfroot_weight(dt: f64) -> impl Fn(i64) -> f64 {
    let c = 2.0 * dt.sqrt() / (4.0 * PI).sqrt();
    move |m| {
        if m == 0 {
            2.0 * c * 0.5f64.sqrt()
        } else {
            c * root_step(m.unsigned_abs() as f64)
        }
    }
}

/// One-sided cell integrals of 1/√(π(t′−t)) over t′ ≥ t.
fn abel_weight(dt: f64) -> impl Fn(i64) -> f64 {
    let c = 2.0 / PI.sqrt() * dt.sqrt();
    move |m| {
        if m > 0 {
            0.0
        } else if m == 0 {
            c * 0.5f64.sqrt()
        } else {
            c * root_step(m.unsigned_abs() as f64)
        }
    }
}

/// 𝔄₂h = [sgn(·)/√(π|·|)] ∗ (h^a)′ with its derivative, both on h's grid.
pub fn op_a2(h: &TestFunction) -> GridFunction {
    op_a2_profile(h, *h.grid())
}

pub fn op_a2_profile(h: &dyn TimeProfile, grid: TimeGrid) -> GridFunction {
    let n = grid.n();
    let conv = Toeplitz::new(2 * n, a2_weight(grid.dt()));
    let d1 = sym_extend(&grid.sample(|t| h.derivative(t)));
    let d2 = antisym_extend(&grid.sample(|t| h.second_derivative(t)));
    let values = restrict(&conv.apply(&d1)).to_vec();
    let derivative = restrict(&conv.apply(&d2)).to_vec();
    GridFunction { grid, values, derivative: Some(derivative), tail: TailModel::PowerLaw { exponent: A2_TAIL_EXPONENT } }
}

/// 𝔄₁f(t) = ∫_t^∞ −f′(t′)/√(π(t′−t)) dt′: exact-cell Abel weights on the grid
/// plus the tail model beyond t_max.
pub fn op_a1(f: &GridFunction) -> Result<Vec<f64>> {
    let tail = FittedTail::fit(f)?;
    let grid = f.grid;
    let deriv = match &f.derivative {
        Some(d) => d.clone(),
        None => finite_difference(&f.values, grid.dt()),
    };
    let minus: Vec<f64> = deriv.iter().map(|d| -d).collect();
    let mut out = Toeplitz::new(grid.n(), abel_weight(grid.dt())).apply(&minus);
    for (k, o) in out.iter_mut().enumerate() {
        *o += tail.abel(grid.node(k), grid.t_max())?;
    }
    Ok(out)
}

/// [(4π|·|)^{-1/2} ∗ f^a] on [0, t_max], tail included.
pub fn halfroot_conv(f: &GridFunction) -> Result<Vec<f64>> {
    let tail = FittedTail::fit(f)?;
    let grid = f.grid;
    let conv = Toeplitz::new(2 * grid.n(), halfroot_weight(grid.dt()));
    let mut out = restrict(&conv.apply(&antisym_extend(&f.values))).to_vec();
    for (k, o) in out.iter_mut().enumerate() {
        *o += tail.halfroot(grid.node(k), grid.t_max())?;
    }
    Ok(out)
}

/// Second-order differences, one-sided at both ends.
fn finite_difference(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    for k in 1..n - 1 {
        d[k] = (v[k + 1] - v[k - 1]) / (2.0 * dt);
    }
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt);
    d
}

/// Continuation of a grid function past t_max, matched at the last node.
enum FittedTail {
    Zero,
    Exponential { value: f64, t_last: f64, rate: f64 },
    /// a(t/t_last)^{-p} + b(t/t_last)^{-p-2}.
    Power { a: f64, b: f64, t_last: f64, p: f64 },
}

impl FittedTail {
    fn fit(f: &GridFunction) -> Result<Self> {
        let n = f.grid.n();
        let t_last = f.grid.node(n - 1);
        let value = f.values[n - 1];
        match f.tail {
            TailModel::Compact => Ok(FittedTail::Zero),
            TailModel::Unknown => Err(Error::config("tail decay of the input is unknown; supply a tail model")),
            TailModel::Exponential { rate } => Ok(FittedTail::Exponential { value, t_last, rate }),
            TailModel::PowerLaw { exponent: p } => {
                let slope = match &f.derivative {
                    Some(d) => d[n - 1],
                    None => finite_difference(&f.values, f.grid.dt())[n - 1],
                };
                let b = -(t_last * slope + p * value) / 2.0;
                Ok(FittedTail::Power { a: value - b, b, t_last, p })
            }
        }
    }

    fn settings() -> QuadSettings {
        QuadSettings { abs_tol: 1e-16, rel_tol: 1e-13, max_intervals: 500 }
    }

    /// ∫_{t_max}^∞ −f′(t′)/√(π(t′−t)) dt′.
    fn abel(&self, t: f64, t_max: f64) -> Result<f64> {
        match *self {
            FittedTail::Zero => Ok(0.0),
            FittedTail::Exponential { value, t_last, rate } => {
                let z = (rate * (t_max - t)).sqrt();
                Ok(value * rate.sqrt() * erfcx(z) * (-rate * (t_max - t_last)).exp())
            }
            FittedTail::Power { a, b, t_last, p } => {
                if a == 0.0 && b == 0.0 {
                    return Ok(0.0);
                }
                let minus_slope = |s: f64| {
                    let r = t_last / s;
                    (p * a * r.powf(p) + (p + 2.0) * b * r.powf(p + 2.0)) / s
                };
                let w0 = (t_max - t).sqrt();
                let est = integrate_to_inf(|w| 2.0 / PI.sqrt() * minus_slope(t + (w0 + w) * (w0 + w)), 0.0, Self::settings())?;
                Ok(est.value)
            }
        }
    }

    /// ∫_{t_max}^∞ (4π)^{-1/2}[(s−t)^{-1/2} − (s+t)^{-1/2}] f(s) ds.
    fn halfroot(&self, t: f64, t_max: f64) -> Result<f64> {
        match *self {
            FittedTail::Zero => Ok(0.0),
            FittedTail::Exponential { value, t_last, rate } => {
                let near = erfcx((rate * (t_max - t)).sqrt());
                let far = erfcx((rate * (t_max + t)).sqrt());
                Ok(value / (2.0 * rate.sqrt()) * (-rate * (t_max - t_last)).exp() * (near - far))
            }
            FittedTail::Power { a, b, t_last, p } => {
                if a == 0.0 && b == 0.0 {
                    return Ok(0.0);
                }
                let f = |s: f64| {
                    let r = t_last / s;
                    a * r.powf(p) + b * r.powf(p + 2.0)
                };
                let w0 = (t_max - t).sqrt();
                let est = integrate_to_inf(
                    |x| {
                        let w = w0 + x;
                        let q = (2.0 * t + w * w).sqrt();
                        2.0 * (2.0 * t / (q * (q + w))) * f(t + w * w) / (4.0 * PI).sqrt()
                    },
                    0.0,
                    Self::settings(),
                )?;
                Ok(est.value)
            }
        }
    }
}
