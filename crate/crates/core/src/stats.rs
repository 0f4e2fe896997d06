//! Monte Carlo estimators, hypothesis tests and the verification record.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Running (count, mean, M2) with an associative merge.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        Moments { count: n, mean, m2 }
    }

    pub fn from_slice(xs: &[f64]) -> Moments {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn se(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Standard error of the sample variance under a Gaussian law.
    pub fn variance_se(&self) -> f64 {
        self.variance() * (2.0 / (self.count as f64 - 1.0)).sqrt()
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::domain(format!("mean_se needs at least 2 samples, got {}", samples.len())));
    }
    let m = Moments::from_slice(samples);
    Ok((m.mean, m.se()))
}

/// Running mean vector and co-moment matrix of vector samples.
#[derive(Clone, Debug)]
pub struct CovAccumulator {
    pub count: u64,
    pub mean: Vec<f64>,
    pub comoment: DMatrix<f64>,
}

impl CovAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], comoment: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim(), "sample dimension");
        self.count += 1;
        let n = self.count as f64;
        let before: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&before) {
            *m += d / n;
        }
        let d = self.dim();
        for i in 0..d {
            let after_i = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[(i, j)] += before[j] * after_i;
            }
        }
    }

    pub fn merge(&self, other: &CovAccumulator) -> CovAccumulator {
        if self.count == 0 {
            return other.clone();
        }
        if other.count == 0 {
            return self.clone();
        }
        let n = (self.count + other.count) as f64;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(a, d)| a + d * nb / n).collect();
        let d = self.dim();
        let mut comoment = &self.comoment + &other.comoment;
        for i in 0..d {
            for j in 0..d {
                comoment[(i, j)] += delta[i] * delta[j] * na * nb / n;
            }
        }
        CovAccumulator { count: self.count + other.count, mean, comoment }
    }

    /// Unbiased covariance matrix.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.comoment / (self.count as f64 - 1.0)
    }

    /// Gaussian-theory standard errors of the covariance entries,
    /// √((S_ii S_jj + S_ij²)/N).
    pub fn covariance_se(&self) -> DMatrix<f64> {
        let s = self.covariance();
        let n = self.count as f64;
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| ((s[(i, i)] * s[(j, j)] + s[(i, j)] * s[(i, j)]) / n).sqrt())
    }

    pub fn mean_se(&self) -> Vec<f64> {
        let s = self.covariance();
        (0..self.dim()).map(|i| (s[(i, i)] / self.count as f64).sqrt()).collect()
    }
}

/// Grid parameters echoed in every report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dz: Option<f64>,
}

impl GridDescriptor {
    pub fn time(t_max: f64, n: usize) -> Self {
        Self { t_max: Some(t_max), n: Some(n), dt: Some(t_max / n as f64), ..Self::default() }
    }

    pub fn sheet(dy: f64, ds: f64) -> Self {
        Self { dy: Some(dy), ds: Some(ds), ..Self::default() }
    }
}

/// How the pass flag follows from (estimate, se, target).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// |estimate − target| ≤ k·se.
    ZScore { k: f64 },
    /// |estimate − target| ≤ tol.
    AbsTol { tol: f64 },
    /// |estimate − target| ≤ tol·|target|.
    RelTol { tol: f64 },
    /// estimate ≥ target.
    AtLeast,
    /// estimate ≤ target.
    AtMost,
    /// estimate (fraction within k·se) ≥ target and max |z| ≤ 2k.
    Matrix { k: f64 },
    /// estimate (a p-value) > target.
    PValue,
}

/// One verification outcome; `pass` is recomputable from the stored numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub statistic: String,
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
    pub z: Option<f64>,
    pub rule: Rule,
    pub pass: bool,
    pub replicas: u64,
    pub seed: Option<u64>,
    pub grid: GridDescriptor,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detail: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn new(name: &str, statistic: &str, estimate: f64, se: f64, target: f64, rule: Rule) -> Self {
        let z = match rule {
            Rule::ZScore { .. } => Some(z_score(estimate, se, target)),
            _ => None,
        };
        let mut r = Self {
            name: name.to_string(),
            statistic: statistic.to_string(),
            estimate,
            se,
            target,
            z,
            rule,
            pass: false,
            replicas: 0,
            seed: None,
            grid: GridDescriptor::default(),
            detail: BTreeMap::new(),
        };
        r.pass = r.recompute_pass();
        r
    }

    pub fn with_replicas(mut self, replicas: u64, seed: u64) -> Self {
        self.replicas = replicas;
        self.seed = Some(seed);
        self
    }

    pub fn with_grid(mut self, grid: GridDescriptor) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.detail.insert(key.to_string(), value);
        self.pass = self.recompute_pass();
        self
    }

    /// Re-evaluates the rule on the stored numbers.
    pub fn recompute_pass(&self) -> bool {
        let (e, t) = (self.estimate, self.target);
        if !e.is_finite() {
            return false;
        }
        match self.rule {
            Rule::ZScore { k } => within(e, self.se, t, k),
            Rule::AbsTol { tol } => (e - t).abs() <= tol,
            Rule::RelTol { tol } => (e - t).abs() <= tol * t.abs(),
            Rule::AtLeast => e >= t,
            Rule::AtMost => e <= t,
            Rule::Matrix { k } => {
                let max_z = self.detail.get("max_abs_z").copied().unwrap_or(f64::INFINITY);
                e >= t && max_z <= 2.0 * k
            }
            Rule::PValue => e > t,
        }
    }
}

fn within(estimate: f64, se: f64, target: f64, k: f64) -> bool {
    if se > 0.0 {
        (estimate - target).abs() <= k * se
    } else {
        estimate == target
    }
}

fn z_score(estimate: f64, se: f64, target: f64) -> f64 {
    if se > 0.0 {
        (estimate - target) / se
    } else if estimate == target {
        0.0
    } else {
        f64::INFINITY
    }
}

/// |estimate − target| ≤ k·se.
pub fn z_test(estimate: f64, se: f64, target: f64, k: f64) -> VerificationReport {
    VerificationReport::new("z_test", "estimate", estimate, se, target, Rule::ZScore { k })
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("ks_two_sample needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// Q_KS(λ) = 2 Σ (−1)^{j−1} exp(−2j²λ²).
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 2.0;
    let mut prev_term = 0.0f64;
    for j in 1..=100 {
        let term = sign * (a2 * (j * j) as f64).exp();
        sum += term;
        if term.abs() <= 1e-3 * prev_term.abs() || term.abs() <= 1e-10 * sum.abs() {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev_term = term;
    }
    1.0
}

/// Entrywise comparison: ≥ 95 % of entries within k·se and none beyond 2k·se.
pub fn matrix_compare(emp: &DMatrix<f64>, analytic: &DMatrix<f64>, se: &DMatrix<f64>, k: f64) -> Result<VerificationReport> {
    if emp.shape() != analytic.shape() || emp.shape() != se.shape() {
        return Err(Error::domain(format!(
            "matrix_compare shapes differ: {:?}, {:?}, {:?}",
            emp.shape(),
            analytic.shape(),
            se.shape()
        )));
    }
    let total = emp.len();
    let mut inside = 0usize;
    let mut max_z = 0.0f64;
    for ((e, a), s) in emp.iter().zip(analytic.iter()).zip(se.iter()) {
        let z = z_score(*e, *s, *a).abs();
        if z <= k {
            inside += 1;
        }
        max_z = max_z.max(z);
    }
    let fraction = inside as f64 / total as f64;
    // JSON has no infinity; a zero-se mismatch is stored as the largest finite z.
    let max_z = max_z.min(f64::MAX);
    let mut r = VerificationReport::new("matrix_compare", "fraction of entries within k se", fraction, 0.0, 0.95, Rule::Matrix { k })
        .with_detail("max_abs_z", max_z)
        .with_detail("entries", total as f64);
    r.z = Some(max_z);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mean_se_examples() {
        assert_eq!(mean_se(&[2.5; 10]).unwrap(), (2.5, 0.0));
        let alt: Vec<f64> = (0..1000).map(|i| (i % 2) as f64).collect();
        let (m, se) = mean_se(&alt).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        assert!((se - 0.015823).abs() < 1e-5);
        assert!((se - 0.5 / 1000f64.sqrt() * (1000.0f64 / 999.0).sqrt()).abs() < 1e-15);
        assert!(mean_se(&[1.0]).is_err());
    }

    #[test]
    fn mean_se_calibration() {
        let mut covered = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (m, se) = mean_se(&xs).unwrap();
            if m.abs() <= 4.0 * se {
                covered += 1;
            }
        }
        assert!(covered as f64 >= 0.999 * 100.0, "{covered}");
    }

    #[test]
    fn z_test_examples() {
        let r = z_test(1.0, 0.1, 1.0, 4.0);
        assert!(r.pass);
        assert_eq!(r.z, Some(0.0));
        let r = z_test(1.5, 0.1, 1.0, 4.0);
        assert!(!r.pass);
        assert!((r.z.unwrap() - 5.0).abs() < 1e-12);
        let r = z_test(1.39, 0.1, 1.0, 4.0);
        assert!(r.pass);
        assert!((r.z.unwrap() - 3.9).abs() < 1e-12);
        let r = z_test(1.2, 0.0, 1.0, 4.0);
        assert!(!r.pass);
        assert_eq!(r.z, Some(f64::INFINITY));
    }

    #[test]
    fn ks_examples() {
        let a = [0.3, 1.2, -0.5, 2.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), (0.0, 1.0));
        let (d, p) = ks_two_sample(&[0.0, 0.1, 0.2], &[5.0, 6.0]).unwrap();
        assert_eq!(d, 1.0);
        assert!(p < 0.5);
        assert!(ks_two_sample(&[], &a).is_err());
    }

    #[test]
    fn ks_calibration() {
        let mut accepted = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let a: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            if ks_two_sample(&a, &b).unwrap().1 > 0.01 {
                accepted += 1;
            }
        }
        assert!(accepted >= 98, "{accepted}");
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..5000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.2 + z
            })
            .collect();
        assert!(ks_two_sample(&a, &b).unwrap().1 < 1e-6);
    }

    #[test]
    fn matrix_compare_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let se = DMatrix::from_element(2, 2, 0.1);
        assert!(matrix_compare(&a, &a, &se, 4.0).unwrap().pass);
        let mut off = a.clone();
        off[(0, 1)] += 1.2;
        let r = matrix_compare(&off, &a, &se, 4.0).unwrap();
        assert!(!r.pass);
        assert!(r.recompute_pass() == r.pass);
        assert!(matrix_compare(&a, &DMatrix::zeros(3, 3), &se, 4.0).is_err());
    }

    #[test]
    fn matrix_compare_end_to_end() {
        // Gaussian vector with a known covariance, estimated from 2·10⁴ draws.
        let target = DMatrix::from_fn(6, 6, |i, j| (-(i as f64 - j as f64).abs() / 2.0).exp());
        let chol = target.clone().cholesky().unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut acc = CovAccumulator::new(6);
        for _ in 0..20_000 {
            let z = nalgebra::DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
            let x = &chol * z;
            acc.push(x.as_slice());
        }
        assert!(matrix_compare(&acc.covariance(), &target, &acc.covariance_se(), 4.0).unwrap().pass);
    }

    #[test]
    fn reports_roundtrip_through_json() {
        let r = z_test(1.39, 0.1, 1.0, 4.0).with_replicas(100, 9).with_grid(GridDescriptor::time(8.0, 4096));
        let json = serde_json::to_string(&r).unwrap();
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.pass, back.recompute_pass());
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn merge_matches_single_pass(xs in prop::collection::vec(-100.0f64..100.0, 2..200), cut in 0usize..200) {
            let cut = cut.min(xs.len());
            let whole = Moments::from_slice(&xs);
            let merged = Moments::from_slice(&xs[..cut]).merge(&Moments::from_slice(&xs[cut..]));
            prop_assert_eq!(whole.count, merged.count);
            prop_assert!((whole.mean - merged.mean).abs() <= 1e-9 * (1.0 + whole.mean.abs()));
            prop_assert!((whole.m2 - merged.m2).abs() <= 1e-8 * (1.0 + whole.m2.abs()));
        }

        #[test]
        fn mean_se_permutation_invariant(mut xs in prop::collection::vec(-10.0f64..10.0, 2..100), seed in 0u64..1000) {
            let (m1, s1) = mean_se(&xs).unwrap();
            use rand::seq::SliceRandom;
            xs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (m2, s2) = mean_se(&xs).unwrap();
            prop_assert!((m1 - m2).abs() <= 1e-12 * (1.0 + m1.abs()));
            prop_assert!((s1 - s2).abs() <= 1e-10 * (1.0 + s1));
        }

        #[test]
        fn z_report_is_recomputable(e in -5.0f64..5.0, se in 0.0f64..2.0, t in -5.0f64..5.0, k in 0.5f64..6.0) {
            let r = z_test(e, se, t, k);
            prop_assert_eq!(r.pass, r.recompute_pass());
        }

        #[test]
        fn cov_merge_matches_single_pass(rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 4..40), cut in 1usize..40) {
            let cut = cut.min(rows.len() - 1);
            let mut whole = CovAccumulator::new(3);
            let mut a = CovAccumulator::new(3);
            let mut b = CovAccumulator::new(3);
            for (i, r) in rows.iter().enumerate() {
                whole.push(r);
                if i < cut { a.push(r) } else { b.push(r) }
            }
            let m = a.merge(&b);
            for (x, y) in whole.comoment.iter().zip(m.comoment.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
