//! The spatial SDE for (u_z, v_z) = (U(z,·), ∂ₓU(z,·)):
//! du = v dz, dv = −[(−∂t²)^{1/2}u^a + √2(−∂t²)^{1/4}v^a] dz − dW̃.

use crate::error::{Error, Result};
use crate::fracops::SpectralPlan;
use crate::gaussfield::{cov_u_gram, cov_v_gram, psd_factor};
use crate::grid::{antisym_extend, pair, restrict, TestFunction, TimeGrid};
use crate::io::{write_matrix, MatrixHeader, FLAG_FIELD_STATE, FORMAT_VERSION};
use crate::quad::gk15;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

/// (u, v) on a time grid at spatial coordinate z.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub z: f64,
}

impl FieldState {
    pub fn zeros(grid: &TimeGrid) -> Self {
        Self { u: vec![0.0; grid.n()], v: vec![0.0; grid.n()], z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Rows (u, v); the header's dy holds dt, ds holds z and s_max holds t_max.
    pub fn dump(&self, path: &Path, grid: &TimeGrid, seed: u64, stream: u64) -> Result<()> {
        let header = MatrixHeader {
            version: FORMAT_VERSION,
            flags: FLAG_FIELD_STATE,
            rows: 2,
            cols: grid.n() as u32,
            dy: grid.dt(),
            ds: self.z,
            y_min: 0.0,
            s_max: grid.t_max(),
            seed,
            stream,
        };
        let data: Vec<f64> = self.u.iter().chain(&self.v).copied().collect();
        write_matrix(path, &header, &data)
    }
}

/// Largest dz allowed for time step dt.
pub fn stability_limit(dt: f64) -> f64 {
    0.1 * dt.sqrt()
}

/// Largest modulus of the Euler amplification over the resolved frequencies up to `tau_max`.
pub fn euler_spectral_radius(dz: f64, tau_max: f64) -> f64 {
    let steps = 64;
    (0..=steps)
        .map(|i| {
            let lam = tau_max * i as f64 / steps as f64;
            // [[1, dz], [−λdz, 1 − √(2λ)dz]]
            let tr = 2.0 - (2.0 * lam).sqrt() * dz;
            let det = 1.0 - (2.0 * lam).sqrt() * dz + lam * dz * dz;
            let disc = tr * tr / 4.0 - det;
            if disc >= 0.0 {
                (tr / 2.0).abs() + disc.sqrt()
            } else {
                det.max(0.0).sqrt()
            }
        })
        .fold(0.0, f64::max)
}

/// The drift with its multipliers cached.
#[derive(Clone, Debug)]
pub struct DriftOperator {
    plan: SpectralPlan,
    m_one: Vec<f64>,
    m_half: Vec<f64>,
}

impl DriftOperator {
    pub fn new(plan: SpectralPlan) -> Self {
        let m_one = plan.multiplier(1.0);
        let m_half = plan.multiplier(0.5).iter().map(|m| SQRT_2 * m).collect();
        Self { plan, m_one, m_half }
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    /// (du/dz, dv/dz).
    pub fn apply(&self, state: &FieldState) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.plan.grid().n();
        if state.u.len() != n || state.v.len() != n {
            return Err(Error::domain(format!("state must have {n} samples per component")));
        }
        let both = self.plan.apply_pair(&antisym_extend(&state.u), &self.m_one, &antisym_extend(&state.v), &self.m_half);
        Ok((state.v.clone(), restrict(&both).iter().map(|x| -x).collect()))
    }

    /// ⟨v;v⟩ + ⟨u; (−∂t²)^{1/2}u^a⟩.
    pub fn energy(&self, state: &FieldState) -> Result<f64> {
        let grid = self.plan.grid();
        let lap = self.plan.apply(&antisym_extend(&state.u), &self.m_one);
        Ok(pair(grid, &state.v, &state.v)? + pair(grid, &state.u, restrict(&lap))?)
    }

    /// u ← u + v·dz; v ← v + dv·dz − noise; z ← z + dz.
    pub fn step(&self, state: &FieldState, dz: f64, noise: &[f64]) -> Result<FieldState> {
        if noise.len() != state.v.len() {
            return Err(Error::domain(format!("noise has {} samples, state has {}", noise.len(), state.v.len())));
        }
        let (du, dv) = self.apply(state)?;
        let next = FieldState {
            u: state.u.iter().zip(&du).map(|(u, d)| u + d * dz).collect(),
            v: state.v.iter().zip(&dv).zip(noise).map(|((v, d), w)| v + d * dz - w).collect(),
            z: state.z + dz,
        };
        if !next.is_finite() {
            return Err(Error::Instability { z: next.z, spectral_radius: euler_spectral_radius(dz, self.plan.tau_max()) });
        }
        Ok(next)
    }
}

/// du/dz = v, dv/dz = −[|τ|·u^a + √2|τ|^{1/2}·v^a] restricted to [0, t_max].
pub fn drift(state: &FieldState, plan: &SpectralPlan) -> Result<(Vec<f64>, Vec<f64>)> {
    DriftOperator::new(plan.clone()).apply(state)
}

/// One Euler–Maruyama step with the given noise increment.
pub fn euler_step(state: &FieldState, dz: f64, noise: &[f64], plan: &SpectralPlan) -> Result<FieldState> {
    DriftOperator::new(plan.clone()).step(state, dz, noise)
}

/// i.i.d. N(0, dz/dt) per time cell.
pub fn draw_noise<R: rand::Rng>(rng: &mut R, n: usize, dz: f64, dt: f64) -> Vec<f64> {
    let sd = (dz / dt).sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

/// f(x+h) − 2f(x) + f(x−h) for f even with f″ = `second`; the integral form
/// ∫_{−h}^{h} (h−|w|) f″(x+w) dw avoids cancellation when x ≫ h.
fn second_difference(f: impl Fn(f64) -> f64, second: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    if x <= 8.0 * h {
        f(x + h) - 2.0 * f(x) + f(x - h)
    } else {
        let g = |w: f64| (h - w.abs()) * second(x + w);
        gk15(&g, -h, 0.0).0 + gk15(&g, 0.0, h).0
    }
}

/// Cov of the cell averages of U(x,·) over time cells k and l.
pub fn c1_cell_covariance(grid: &TimeGrid, k: usize, l: usize) -> f64 {
    let h = grid.dt();
    let p = |x: f64| 4.0 / 15.0 * x.abs().powf(2.5);
    let p2 = |x: f64| x.abs().sqrt();
    let xs = (k + l + 1) as f64 * h;
    let xd = (k as f64 - l as f64).abs() * h;
    (second_difference(p, p2, xs, h) - second_difference(p, p2, xd, h)) / ((4.0 * PI).sqrt() * h * h)
}

/// Cov of the cell averages of ∂ₓU(x,·) over time cells k and l.
pub fn c2_cell_covariance(grid: &TimeGrid, k: usize, l: usize) -> f64 {
    let h = grid.dt();
    let q = |x: f64| 4.0 / 3.0 * x.abs().powf(1.5);
    let q2 = |x: f64| x.abs().powf(-0.5);
    let xs = (k + l + 1) as f64 * h;
    let xd = (k as f64 - l as f64).abs() * h;
    (second_difference(q, q2, xd, h) - second_difference(q, q2, xs, h)) / (2.0 * (4.0 * PI).sqrt() * h * h)
}

/// Samples the stationary law of (u, v) on the cell-average basis of a grid.
#[derive(Clone, Debug)]
pub struct StationarySampler {
    grid: TimeGrid,
    l1: DMatrix<f64>,
    l2: DMatrix<f64>,
}

impl StationarySampler {
    pub fn cell_box(grid: TimeGrid) -> Result<Self> {
        let n = grid.n();
        let c1 = DMatrix::from_fn(n, n, |k, l| c1_cell_covariance(&grid, k, l));
        let c2 = DMatrix::from_fn(n, n, |k, l| c2_cell_covariance(&grid, k, l));
        Ok(Self { grid, l1: psd_factor(&c1)?, l2: psd_factor(&c2)? })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> FieldState {
        let n = self.grid.n();
        let mut draw = || DVector::from_fn(n, |_, _| StandardNormal.sample(&mut *rng));
        let u = &self.l1 * draw();
        let v = &self.l2 * draw();
        FieldState { u: u.as_slice().to_vec(), v: v.as_slice().to_vec(), z: 0.0 }
    }
}

/// Draws ⟨u;h_i⟩ ~ N(0, G₁) and ⟨v;h_i⟩ ~ N(0, G₂) independently and reconstructs u, v in
/// span{h_i} through the dual basis. Pairings with functions outside the span are biased.
pub fn stationary_init(h_basis: &[TestFunction], grid: &TimeGrid, seed: u64) -> Result<FieldState> {
    let hs = h_basis.iter().map(|h| h.regrid(*grid)).collect::<Result<Vec<_>>>()?;
    let m = hs.len();
    let mass = DMatrix::from_fn(m, m, |i, j| pair(grid, hs[i].values(), hs[j].values()).expect("same grid"));
    let mass_lu = mass.clone().lu();
    let (l1, l2) = (psd_factor(&cov_u_gram(&hs)?)?, psd_factor(&cov_v_gram(&hs)?)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reconstruct = |l: &DMatrix<f64>| -> Result<Vec<f64>> {
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let xi = l * z;
        let c = mass_lu.solve(&xi).ok_or_else(|| Error::Numerical("test-function mass matrix is singular".into()))?;
        let mut out = vec![0.0; grid.n()];
        for (ci, h) in c.iter().zip(&hs) {
            for (o, v) in out.iter_mut().zip(h.values()) {
                *o += ci * v;
            }
        }
        Ok(out)
    };
    let u = reconstruct(&l1)?;
    let v = reconstruct(&l2)?;
    Ok(FieldState { u, v, z: 0.0 })
}

/// Step size, horizon, observables and noise stream of one trajectory.
#[derive(Clone, Debug)]
pub struct EvolveConfig {
    pub dz: f64,
    pub horizon: f64,
    pub observables: Vec<TestFunction>,
    pub seed: u64,
    pub stream: u64,
    /// Noise off gives the deterministic dynamics.
    pub noise: bool,
}

impl EvolveConfig {
    /// Number of steps; errors unless dz obeys the stability rule and divides the horizon.
    pub fn steps(&self, grid: &TimeGrid) -> Result<usize> {
        let limit = stability_limit(grid.dt());
        if !(self.dz > 0.0) || self.dz > limit * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "dz = {} violates the stability rule dz <= 0.1*sqrt(dt) = {limit:.6} (dt = {})",
                self.dz,
                grid.dt()
            )));
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::config(format!("horizon Z must be nonnegative, got {}", self.horizon)));
        }
        let steps = (self.horizon / self.dz).round();
        if (steps * self.dz - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(Error::config(format!("dz = {} does not divide Z = {}", self.dz, self.horizon)));
        }
        if self.observables.iter().any(|h| h.grid() != grid) {
            return Err(Error::config("observables must live on the evolution grid"));
        }
        Ok(steps as usize)
    }
}

/// Per-step pairings ⟨u_z;h⟩, ⟨v_z;h⟩ and the final state.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub z: Vec<f64>,
    pub u_obs: Vec<Vec<f64>>,
    pub v_obs: Vec<Vec<f64>>,
    pub final_state: FieldState,
}

impl Trajectory {
    /// Header `z, u_<i>..., v_<i>...` and one row per recorded z.
    pub fn csv_rows(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let m = self.u_obs.first().map_or(0, |r| r.len());
        let mut cols = vec!["z".to_string()];
        cols.extend((0..m).map(|i| format!("u_{i}")));
        cols.extend((0..m).map(|i| format!("v_{i}")));
        let rows = self
            .z
            .iter()
            .enumerate()
            .map(|(s, z)| std::iter::once(*z).chain(self.u_obs[s].iter().copied()).chain(self.v_obs[s].iter().copied()).collect())
            .collect();
        (cols, rows)
    }
}

/// Euler–Maruyama from `init` to z = init.z + horizon.
pub fn evolve(init: &FieldState, cfg: &EvolveConfig, op: &DriftOperator) -> Result<Trajectory> {
    let grid = *op.plan().grid();
    let steps = cfg.steps(&grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);
    let observe = |s: &FieldState| -> Result<(Vec<f64>, Vec<f64>)> {
        let u = cfg.observables.iter().map(|h| pair(&grid, &s.u, h.values())).collect::<Result<_>>()?;
        let v = cfg.observables.iter().map(|h| pair(&grid, &s.v, h.values())).collect::<Result<_>>()?;
        Ok((u, v))
    };
    let mut traj = Trajectory { z: Vec::with_capacity(steps + 1), u_obs: vec![], v_obs: vec![], final_state: init.clone() };
    let mut state = init.clone();
    for step in 0..=steps {
        let (u, v) = observe(&state)?;
        traj.z.push(state.z);
        traj.u_obs.push(u);
        traj.v_obs.push(v);
        if step == steps {
            break;
        }
        let noise = if cfg.noise { draw_noise(&mut rng, grid.n(), cfg.dz, grid.dt()) } else { vec![0.0; grid.n()] };
        state = op.step(&state, cfg.dz, &noise)?;
    }
    traj.final_state = state;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussfield::{bilinear_quadrature, CovKind};
    use crate::grid::bump;
    use crate::quad::{integrate, QuadSettings};
    use crate::stats::Moments;

    fn op(t_max: f64, n: usize) -> DriftOperator {
        DriftOperator::new(SpectralPlan::new(&TimeGrid::new(t_max, n).unwrap(), 2).unwrap())
    }

    fn window(t: f64, flat: f64, edge: f64) -> f64 {
        let a = t.abs();
        if a <= flat {
            1.0
        } else if a >= edge {
            0.0
        } else {
            let u = (a - flat) / (edge - flat);
            let s = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
            s(1.0 - u) / (s(1.0 - u) + s(u))
        }
    }

    #[test]
    fn zero_state_zero_drift_and_linearity() {
        let d = op(8.0, 128);
        let g = *d.plan().grid();
        let z = FieldState::zeros(&g);
        let (du, dv) = d.apply(&z).unwrap();
        assert!(du.iter().chain(&dv).all(|x| *x == 0.0));
        let s = FieldState { u: g.sample(|t| t * (-t).exp()), v: g.sample(|t| (t - 2.0) * (-(t - 2.0) * (t - 2.0)).exp()), z: 0.0 };
        let s2 = FieldState { u: s.u.iter().map(|x| 2.0 * x).collect(), v: s.v.iter().map(|x| 2.0 * x).collect(), z: 0.0 };
        let (a, b) = d.apply(&s).unwrap();
        let (a2, b2) = d.apply(&s2).unwrap();
        for i in 0..g.n() {
            assert!((a2[i] - 2.0 * a[i]).abs() < 1e-12 && (b2[i] - 2.0 * b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn windowed_sine_drift_is_minus_k_u() {
        let d = op(16.0, 2048);
        let g = *d.plan().grid();
        let k = 2.0 * PI;
        let s = FieldState { u: g.sample(|t| (k * t).sin() * window(t, 8.0, 14.0)), v: vec![0.0; g.n()], z: 0.0 };
        let (_, dv) = d.apply(&s).unwrap();
        for i in 0..g.n() {
            let t = g.node(i);
            if t > 1.0 && t < 6.0 {
                assert!((dv[i] + k * s.u[i]).abs() <= 1e-2 * k, "{t}: {}", dv[i]);
            }
        }
    }

    #[test]
    fn single_steps() {
        let d = op(4.0, 64);
        let g = *d.plan().grid();
        let z = FieldState::zeros(&g);
        assert_eq!(d.step(&z, 0.01, &vec![0.0; 64]).unwrap().u, z.u);
        let w = g.sample(|t| t.sin());
        let next = d.step(&z, 0.01, &w).unwrap();
        assert!(next.u.iter().all(|x| *x == 0.0));
        assert!(next.v.iter().zip(&w).all(|(a, b)| *a == -b));
        assert!((next.z - 0.01).abs() < 1e-15);
        let plan = d.plan().clone();
        assert_eq!(euler_step(&z, 0.01, &w, &plan).unwrap(), next);
        let mut blow = z.clone();
        blow.u[3] = f64::INFINITY;
        assert!(matches!(d.step(&blow, 0.01, &vec![0.0; 64]), Err(Error::Instability { .. })));
    }

    #[test]
    fn noise_pairing_variance() {
        // Var⟨ΔW;h⟩ = dz‖h‖² in the discrete sense.
        let h = bump(2.0, 1.0, 8.0, 256).unwrap();
        let g = *h.grid();
        let dz = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = Moments::default();
        for _ in 0..10_000 {
            m.push(pair(&g, &draw_noise(&mut rng, g.n(), dz, g.dt()), h.values()).unwrap());
        }
        let target = dz * pair(&g, h.values(), h.values()).unwrap();
        assert!((m.variance() - target).abs() <= 4.0 * m.variance_se(), "{} vs {target}", m.variance());
        assert!(m.mean.abs() <= 4.0 * m.se());
    }

    #[test]
    fn stability_rule() {
        let h = bump(2.0, 1.0, 16.0, 256).unwrap();
        let g = *h.grid();
        let cfg = |dz: f64| EvolveConfig { dz, horizon: 1.0, observables: vec![h.clone()], seed: 0, stream: 0, noise: true };
        assert_eq!(cfg(0.005).steps(&g).unwrap(), 200);
        let err = cfg(0.05).steps(&g).unwrap_err();
        assert!(err.is_usage() && err.to_string().contains("stability"), "{err}");
        assert!(cfg(0.003).steps(&g).is_err());
        // Inside the rule the amplification stays below one; far outside it does not.
        let tau_max = PI / g.dt();
        assert!(euler_spectral_radius(0.005, tau_max) <= 1.0 + 1e-12);
        assert!(euler_spectral_radius(1.0, tau_max) > 1.0);
    }

    #[test]
    fn cell_covariances_match_double_quadrature() {
        let g = TimeGrid::new(16.0, 256).unwrap();
        let h = g.dt();
        let brute = |k: usize, l: usize, kind: CovKind| {
            let (a, c) = (k as f64 * h, l as f64 * h);
            let settings = QuadSettings { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 2000 };
            let inner = |t: f64| match kind {
                CovKind::U => integrate(|s| crate::gaussfield::cov_u(t, s), c, c + h, settings).unwrap().value,
                CovKind::V => {
                    // Split at the singular point with s = t ± w², where 2w|t−s|^{-1/2} = 2.
                    let f = |s: f64| crate::gaussfield::cov_v_kernel(t, s);
                    let k = 0.5 / (4.0 * PI).sqrt();
                    let side = |sign: f64| move |w: f64| k * (2.0 - 2.0 * w / (2.0 * t + sign * w * w).sqrt());
                    if t > c && t < c + h {
                        integrate(side(-1.0), 0.0, (t - c).sqrt(), settings).unwrap().value
                            + integrate(side(1.0), 0.0, (c + h - t).sqrt(), settings).unwrap().value
                    } else {
                        integrate(f, c, c + h, settings).unwrap().value
                    }
                }
            };
            integrate(inner, a, a + h, QuadSettings::rel(1e-9)).unwrap().value / (h * h)
        };
        for &(k, l) in &[(0, 0), (3, 3), (10, 11), (5, 40), (200, 201), (255, 0)] {
            let b1 = brute(k, l, CovKind::U);
            let b2 = brute(k, l, CovKind::V);
            assert!((c1_cell_covariance(&g, k, l) - b1).abs() < 1e-8 * b1.abs().max(1.0), "C1 {k},{l}");
            assert!((c2_cell_covariance(&g, k, l) - b2).abs() < 1e-6 * b2.abs().max(1.0), "C2 {k},{l}: {} vs {b2}", c2_cell_covariance(&g, k, l));
        }
    }

    #[test]
    fn stationary_sampler_pairings() {
        let g = TimeGrid::new(16.0, 256).unwrap();
        let sampler = StationarySampler::cell_box(g).unwrap();
        let h1 = bump(2.0, 1.0, 16.0, 256).unwrap();
        let h2 = bump(3.0, 1.5, 16.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut mu, mut mv, mut cross) = (Moments::default(), Moments::default(), Moments::default());
        let n = 10_000;
        for _ in 0..n {
            let s = sampler.sample(&mut rng);
            let a = pair(&g, &s.u, h1.values()).unwrap();
            let b = pair(&g, &s.v, h2.values()).unwrap();
            mu.push(a);
            mv.push(b);
            cross.push(a * b);
        }
        let t1 = bilinear_quadrature(CovKind::U, &h1, &h1).unwrap();
        let t2 = bilinear_quadrature(CovKind::V, &h2, &h2).unwrap();
        assert!(mu.mean.abs() <= 4.0 * mu.se());
        assert!((mu.variance() - t1).abs() <= 4.0 * mu.variance_se(), "{} vs {t1}", mu.variance());
        assert!((mv.variance() - t2).abs() <= 4.0 * mv.variance_se(), "{} vs {t2}", mv.variance());
        assert!(cross.mean.abs() <= 4.0 * cross.se());
    }

    #[test]
    fn dual_basis_init_reproduces_gram_pairings() {
        let g = TimeGrid::new(8.0, 256).unwrap();
        let basis: Vec<_> = [(1.0, 0.6), (2.0, 0.8), (3.2, 1.0)].iter().map(|&(c, r)| TestFunction::on_grid(c, r, 1.0, g).unwrap()).collect();
        let gram = cov_u_gram(&basis).unwrap();
        let mut m = Moments::default();
        for seed in 0..4000 {
            let s = stationary_init(&basis, &g, seed).unwrap();
            m.push(pair(&g, &s.u, basis[1].values()).unwrap());
        }
        assert!((m.variance() - gram[(1, 1)]).abs() <= 4.0 * m.variance_se());
        assert!(m.mean.abs() <= 4.0 * m.se());
        assert_eq!(stationary_init(&basis, &g, 3).unwrap(), stationary_init(&basis, &g, 3).unwrap());
    }

    #[test]
    fn zero_trajectory_and_bookkeeping() {
        let d = op(16.0, 256);
        let g = *d.plan().grid();
        let h = TestFunction::on_grid(2.0, 1.0, 1.0, g).unwrap();
        let quiet = EvolveConfig { dz: 0.005, horizon: 0.5, observables: vec![h.clone()], seed: 1, stream: 0, noise: false };
        let t = evolve(&FieldState::zeros(&g), &quiet, &d).unwrap();
        assert!(t.u_obs.iter().chain(&t.v_obs).all(|r| r[0] == 0.0));
        let noisy = EvolveConfig { noise: true, ..quiet };
        let init = StationarySampler::cell_box(g).unwrap().sample(&mut ChaCha8Rng::seed_from_u64(2));
        let t = evolve(&init, &noisy, &d).unwrap();
        let n = t.z.len();
        let lhs = t.u_obs[n - 1][0] - t.u_obs[0][0];
        let rhs: f64 = t.v_obs[..n - 1].iter().map(|r| r[0] * noisy.dz).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        let again = evolve(&init, &noisy, &d).unwrap();
        assert_eq!(again.final_state, t.final_state);
    }

    #[test]
    fn mean_dynamics_follow_the_damped_oscillator() {
        // (u, v) ∝ (sin(kt)·window, 0): a″ = −k a − √(2k) a′, so a(z) = e^{−αz}(cos αz + sin αz), α = √(k/2).
        let d = op(16.0, 1024);
        let g = *d.plan().grid();
        let k = 2.0 * PI;
        let init = FieldState { u: g.sample(|t| (k * t).sin() * window(t, 8.0, 14.0)), v: vec![0.0; g.n()], z: 0.0 };
        let probe = g.sample(|t| (k * t).sin() * window(t - 4.0, 1.0, 2.5));
        let h = TestFunction::on_grid(4.0, 1.0, 1.0, g).unwrap();
        let cfg = EvolveConfig { dz: 1e-3, horizon: 1.0, observables: vec![h], seed: 0, stream: 0, noise: false };
        let mut state = init.clone();
        let a0 = pair(&g, &init.u, &probe).unwrap();
        let alpha = (k / 2.0).sqrt();
        let mut worst = 0.0f64;
        for step in 1..=cfg.steps(&g).unwrap() {
            state = d.step(&state, cfg.dz, &vec![0.0; g.n()]).unwrap();
            let z = step as f64 * cfg.dz;
            let exact = (-alpha * z).exp() * ((alpha * z).cos() + (alpha * z).sin());
            worst = worst.max((pair(&g, &state.u, &probe).unwrap() / a0 - exact).abs());
        }
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn noise_off_energy_does_not_grow() {
        let d = op(16.0, 256);
        let g = *d.plan().grid();
        let mut state = StationarySampler::cell_box(g).unwrap().sample(&mut ChaCha8Rng::seed_from_u64(8));
        let dz = 0.005;
        let zero = vec![0.0; g.n()];
        let mut e = d.energy(&state).unwrap();
        let e0 = e;
        for _ in 0..100 {
            state = d.step(&state, dz, &zero).unwrap();
            let next = d.energy(&state).unwrap();
            // Explicit Euler adds O(dz²) per step.
            assert!(next <= e + 10.0 * dz * dz * e0, "{next} > {e}");
            e = next;
        }
        assert!(e < e0);
    }

    #[test]
    fn state_dump_header() {
        let g = TimeGrid::new(4.0, 8).unwrap();
        let s = FieldState { u: (0..8).map(|i| i as f64).collect(), v: vec![-1.0; 8], z: 0.75 };
        let path = std::env::temp_dir().join(format!("heatlab-state-{}.bin", std::process::id()));
        s.dump(&path, &g, 3, 4).unwrap();
        let (h, data) = crate::io::read_matrix(&path).unwrap();
        assert_eq!((h.rows, h.cols, h.flags, h.seed, h.stream), (2, 8, FLAG_FIELD_STATE, 3, 4));
        assert_eq!(h.ds, 0.75);
        assert_eq!(&data[..8], s.u.as_slice());
        std::fs::remove_file(&path).unwrap();
    }
}
