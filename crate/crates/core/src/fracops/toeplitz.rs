use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// y_i = Σ_j k(i − j)·x_j for i, j in 0..n, applied through a circular
/// embedding of length ≥ 2n.
pub struct Toeplitz {
    n: usize,
    spectrum: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Toeplitz {
    pub fn new<K: Fn(i64) -> f64>(n: usize, kernel: K) -> Self {
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
        for m in -(n as i64 - 1)..=(n as i64 - 1) {
            let idx = m.rem_euclid(len as i64) as usize;
            spectrum[idx] = Complex64::new(kernel(m), 0.0);
        }
        fwd.process(&mut spectrum);
        let scale = 1.0 / len as f64;
        for c in spectrum.iter_mut() {
            *c *= scale;
        }
        Self { n, spectrum, fwd, inv }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "toeplitz input length");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.spectrum.len()];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        self.inv.process(&mut buf);
        buf[..self.n].iter().map(|c| c.re).collect()
    }
}
