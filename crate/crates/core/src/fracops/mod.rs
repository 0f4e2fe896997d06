//! Fractional operators in time: the spectral multiplier |τ|^β, the Abel-type
//! operators 𝔄₁ and 𝔄₂, and the half-root convolution (4π|·|)^{-1/2} ∗ ·.

mod abel;
mod identity;
mod toeplitz;

pub use abel::{halfroot_conv, op_a1, op_a2, op_a2_profile, A2_TAIL_EXPONENT};
pub use identity::{
    a1_eigen_error, a1a2_residual, a2_spectral_error, halfroot_lnu_error, inversion_error, verify_a1a2_identity, IDENTITY_PADDING,
};
pub use toeplitz::Toeplitz;

use crate::error::{Error, Result};
use crate::grid::{sup_norm, SymGrid, TimeGrid};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// FFT workspace for multipliers on a zero-padded [`SymGrid`].
#[derive(Clone)]
pub struct SpectralPlan {
    sym: SymGrid,
    padding: usize,
    abs_tau: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("sym", &self.sym).field("padding", &self.padding).finish()
    }
}

impl SpectralPlan {
    pub fn new(grid: &TimeGrid, padding: usize) -> Result<Self> {
        if padding < 2 {
            return Err(Error::config(format!("zero-padding factor must be at least 2, got {padding}")));
        }
        let sym = grid.sym();
        let len = padding * sym.len();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let step = 2.0 * PI / (len as f64 * grid.dt());
        let abs_tau = (0..len)
            .map(|m| {
                let k = if m <= len / 2 { m as f64 } else { len as f64 - m as f64 };
                k * step
            })
            .collect();
        Ok(Self { sym, padding, abs_tau, fwd, inv })
    }

    pub fn sym(&self) -> &SymGrid {
        &self.sym
    }

    pub fn grid(&self) -> &TimeGrid {
        self.sym.half()
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn padded_len(&self) -> usize {
        self.abs_tau.len()
    }

    /// Largest resolved frequency |τ|.
    pub fn tau_max(&self) -> f64 {
        self.abs_tau.iter().copied().fold(0.0, f64::max)
    }

    /// |τ|^β per frequency; the zero mode is dropped for β < 0.
    pub fn multiplier(&self, beta: f64) -> Vec<f64> {
        self.abs_tau
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    if beta == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    t.powf(beta)
                }
            })
            .collect()
    }

    fn load(&self, f: &[f64], g: Option<&[f64]>) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.padded_len()];
        for (i, &v) in f.iter().enumerate() {
            buf[i].re = v;
        }
        if let Some(g) = g {
            for (i, &v) in g.iter().enumerate() {
                buf[i].im = v;
            }
        }
        buf
    }

    fn unload(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let scale = 1.0 / self.padded_len() as f64;
        buf[..self.sym.len()].iter().map(|c| c.re * scale).collect()
    }

    /// Real inverse transform of mult · f^F, restricted to the unpadded grid.
    pub fn apply(&self, f: &[f64], mult: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.sym.len(), "input must live on the plan's SymGrid");
        let mut buf = self.load(f, None);
        self.fwd.process(&mut buf);
        for (b, m) in buf.iter_mut().zip(mult) {
            *b *= *m;
        }
        self.unload(buf)
    }

    /// mf·f^F + mg·g^F for two real inputs, using one complex transform each way.
    pub fn apply_pair(&self, f: &[f64], mf: &[f64], g: &[f64], mg: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.sym.len(), "input must live on the plan's SymGrid");
        assert_eq!(g.len(), self.sym.len(), "input must live on the plan's SymGrid");
        let mut z = self.load(f, Some(g));
        self.fwd.process(&mut z);
        let len = z.len();
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for k in 0..len {
            let zk = z[k];
            let zc = z[(len - k) % len].conj();
            let fk = (zk + zc) * 0.5;
            let gk = (zk - zc) * Complex64::new(0.0, -0.5);
            out[k] = fk * mf[k] + gk * mg[k];
        }
        self.unload(out)
    }
}

/// (−∂t²)^{β/2} through the multiplier |τ|^β on the padded grid.
pub fn frac_laplacian(f: &[f64], beta: f64, plan: &SpectralPlan) -> Result<Vec<f64>> {
    if f.len() != plan.sym.len() {
        return Err(Error::domain(format!("frac_laplacian expects {} samples, got {}", plan.sym.len(), f.len())));
    }
    if beta < -1.0 {
        let mass: f64 = f.iter().sum();
        let scale: f64 = f.iter().map(|v| v.abs()).sum();
        if mass.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::IllPosed(format!("multiplier |τ|^{beta} is singular at τ = 0 and the input is not mean-free")));
        }
    }
    let norm = sup_norm(f);
    let edge = f[0].abs().max(f[f.len() - 1].abs());
    if norm > 0.0 && edge > 1e-6 * norm {
        log::warn!("frac_laplacian input does not decay at the grid ends ({edge:.3e} vs sup {norm:.3e})");
    }
    Ok(plan.apply(f, &plan.multiplier(beta)))
}
