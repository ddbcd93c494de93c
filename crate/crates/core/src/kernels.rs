//! Covariance functions over inputs and over item pairs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default jitter as a fraction of the signal variance.
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
}

/// A shared lengthscale or one per input dimension (ARD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lengthscale {
    Shared(f64),
    PerDimension(Vec<f64>),
}

/// Squared-exponential kernel `σ² exp(-½ Σ (aᵢ - bᵢ)² / ℓᵢ²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: Lengthscale,
    signal_variance: f64,
    jitter: f64,
}

impl KernelSpec {
    pub fn new(lengthscale: Lengthscale, signal_variance: f64, jitter: Option<f64>) -> Result<Self> {
        match &lengthscale {
            Lengthscale::Shared(l) if !(l.is_finite() && *l > 0.0) => {
                return Err(invalid(format!("lengthscale must be positive, got {l}")));
            }
            Lengthscale::PerDimension(ls) => {
                if ls.is_empty() {
                    return Err(invalid("per-dimension lengthscale list is empty"));
                }
                if let Some(l) = ls.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
                    return Err(invalid(format!("lengthscale must be positive, got {l}")));
                }
            }
            _ => {}
        }
        if !(signal_variance.is_finite() && signal_variance > 0.0) {
            return Err(invalid(format!("signal variance must be positive, got {signal_variance}")));
        }
        let jitter = jitter.unwrap_or(DEFAULT_RELATIVE_JITTER * signal_variance);
        if !(jitter.is_finite() && jitter >= 0.0) {
            return Err(invalid(format!("jitter must be >= 0, got {jitter}")));
        }
        Ok(Self { family: KernelFamily::SquaredExponential, lengthscale, signal_variance, jitter })
    }

    /// Isotropic kernel with default jitter.
    pub fn isotropic(lengthscale: f64, signal_variance: f64) -> Result<Self> {
        Self::new(Lengthscale::Shared(lengthscale), signal_variance, None)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> &Lengthscale {
        &self.lengthscale
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Copy with the jitter multiplied by `factor` (floored at the default).
    pub fn with_jitter_scaled(&self, factor: f64) -> Self {
        let base = self.jitter.max(DEFAULT_RELATIVE_JITTER * self.signal_variance);
        Self { jitter: base * factor, ..self.clone() }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(invalid(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
        }
        if let Lengthscale::PerDimension(ls) = &self.lengthscale {
            if ls.len() != a.len() {
                return Err(invalid(format!(
                    "kernel has {} lengthscales but inputs have dimension {}",
                    ls.len(),
                    a.len()
                )));
            }
        }
        Ok(self.eval_unchecked(a, b))
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = match &self.lengthscale {
            Lengthscale::Shared(l) => {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / (l * l)
            }
            Lengthscale::PerDimension(ls) => a
                .iter()
                .zip(b)
                .zip(ls)
                .map(|((x, y), l)| ((x - y) / l).powi(2))
                .sum(),
        };
        self.signal_variance * (-0.5 * r2).exp()
    }
}

/// A pair of items `(u, v)`; the label `+1` means `u` is preferred.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PreferencePair {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(invalid(format!("pair items differ in dimension: {} vs {}", u.len(), v.len())));
        }
        Ok(Self { u, v })
    }

    pub fn reversed(&self) -> Self {
        Self { u: self.v.clone(), v: self.u.clone() }
    }

    /// The concatenated `[u, v]` row used as a classifier input.
    pub fn to_row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(2 * self.u.len());
        row.extend_from_slice(&self.u);
        row.extend_from_slice(&self.v);
        row
    }

    pub fn from_row(row: &[f64]) -> Result<Self> {
        if !row.len().is_multiple_of(2) {
            return Err(invalid(format!("pair row has odd length {}", row.len())));
        }
        let (u, v) = row.split_at(row.len() / 2);
        Ok(Self { u: u.to_vec(), v: v.to_vec() })
    }
}

/// `k(u,u') + k(v,v') - k(u,v') - k(v,u')`: covariance of `g(u,v) = f(u) - f(v)`.
pub fn preference_kernel_eval(spec: &KernelSpec, p: &PreferencePair, q: &PreferencePair) -> Result<f64> {
    Ok(spec.eval(&p.u, &q.u)? + spec.eval(&p.v, &q.v)? - spec.eval(&p.u, &q.v)? - spec.eval(&p.v, &q.u)?)
}

/// Mean of `g(u,v)` given the latent mean function.
pub fn preference_mean<F: Fn(&[f64]) -> f64>(mean_fn: F, p: &PreferencePair) -> f64 {
    mean_fn(&p.u) - mean_fn(&p.v)
}

/// The covariance a classifier is built on: either a plain kernel over
/// input rows, or the preference kernel over concatenated `[u, v]` rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Plain(KernelSpec),
    Preference(KernelSpec),
}

impl Covariance {
    pub fn spec(&self) -> &KernelSpec {
        match self {
            Covariance::Plain(s) | Covariance::Preference(s) => s,
        }
    }

    pub fn jitter(&self) -> f64 {
        self.spec().jitter()
    }

    pub fn with_jitter_scaled(&self, factor: f64) -> Self {
        match self {
            Covariance::Plain(s) => Covariance::Plain(s.with_jitter_scaled(factor)),
            Covariance::Preference(s) => Covariance::Preference(s.with_jitter_scaled(factor)),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            Covariance::Plain(s) => s.eval(a, b),
            Covariance::Preference(s) => {
                if a.len() != b.len() {
                    return Err(invalid(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
                }
                preference_kernel_eval(s, &PreferencePair::from_row(a)?, &PreferencePair::from_row(b)?)
            }
        }
    }

    /// Prior variance of the latent at `x` (no jitter).
    pub fn prior_variance(&self, x: &[f64]) -> Result<f64> {
        self.eval(x, x)
    }

    /// Cross-covariance matrix with rows indexed by `a` and columns by `b`.
    pub fn cross(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(a.len(), b.len());
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[(i, j)] = self.eval(x, y)?;
            }
        }
        Ok(out)
    }

    /// Gram matrix with the jitter added to the diagonal.
    pub fn gram(&self, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut k = gram_without_jitter(self, xs)?;
        for i in 0..xs.len() {
            k[(i, i)] += self.jitter();
        }
        Ok(k)
    }
}

fn gram_without_jitter(cov: &Covariance, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if xs.is_empty() {
        return Err(invalid("gram matrix needs at least one input"));
    }
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = cov.eval(&xs[i], &xs[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.eval(a, b)
}

/// Gram matrix of the plain kernel, diagonal = signal variance + jitter.
pub fn gram_matrix(spec: &KernelSpec, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    Covariance::Plain(spec.clone()).gram(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
    }

    fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
        m.clone().symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn kernel_eval_values() {
        let k = KernelSpec::isotropic(1.0, 1.0).unwrap();
        assert_eq!(k.eval(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
        assert_abs_diff_eq!(k.eval(&[0.0], &[1.0]).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert_eq!(k.eval(&[0.0], &[1e3]).unwrap(), 0.0);
        let k2 = KernelSpec::isotropic(0.7, 2.5).unwrap();
        assert_eq!(k2.eval(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 2.5);
        assert_eq!(k2.eval(&[1.0, 2.0], &[-1.0, 0.5]).unwrap(), k2.eval(&[-1.0, 0.5], &[1.0, 2.0]).unwrap());
    }

    #[test]
    fn ard_lengthscales() {
        let k = KernelSpec::new(Lengthscale::PerDimension(vec![1.0, 2.0]), 1.0, None).unwrap();
        let expect = (-0.5 * (1.0 + 0.25f64)).exp();
        assert_abs_diff_eq!(k.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), expect, epsilon = 1e-15);
        assert!(k.eval(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::isotropic(0.0, 1.0).is_err());
        assert!(KernelSpec::isotropic(1.0, -1.0).is_err());
        assert!(KernelSpec::new(Lengthscale::Shared(1.0), 1.0, Some(-1e-3)).is_err());
        assert!(KernelSpec::new(Lengthscale::PerDimension(vec![1.0, 0.0]), 1.0, None).is_err());
        let k = KernelSpec::isotropic(1.0, 1.0).unwrap();
        assert!(k.eval(&[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn default_jitter_scales_with_variance() {
        let k = KernelSpec::isotropic(1.0, 4.0).unwrap();
        assert_eq!(k.jitter(), 4e-8);
    }

    #[test]
    fn gram_small_cases() {
        let k = KernelSpec::new(Lengthscale::Shared(1.0), 2.0, Some(0.5)).unwrap();
        let g = gram_matrix(&k, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g[(0, 0)], 2.5);

        let k0 = KernelSpec::new(Lengthscale::Shared(1.0), 1.0, Some(0.0)).unwrap();
        let g = gram_matrix(&k0, &[vec![0.2], vec![0.2]]).unwrap();
        assert_eq!(g.rank(1e-12), 1);

        assert!(gram_matrix(&k0, &[]).is_err());
    }

    #[test]
    fn gram_of_random_points_factorizes_with_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = random_points(&mut rng, 20, 2);
        let k = KernelSpec::new(Lengthscale::Shared(1.0), 1.0, Some(1e-8)).unwrap();
        let g = gram_matrix(&k, &xs).unwrap();
        assert_eq!(g, g.transpose());
        for i in 0..20 {
            assert_eq!(g[(i, i)], 1.0 + 1e-8);
        }
        assert!(g.cholesky().is_some());
    }

    #[test]
    fn gram_matrices_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = KernelSpec::new(Lengthscale::Shared(0.8), 1.5, Some(0.0)).unwrap();
        for &n in &[5usize, 50, 200] {
            let xs = random_points(&mut rng, n, 3);
            let g = gram_matrix(&spec, &xs).unwrap();
            assert!(min_eigenvalue(&g) >= -1e-8 * 1.5);

            let pairs: Vec<Vec<f64>> = random_points(&mut rng, n, 6);
            let pg = Covariance::Preference(spec.clone()).gram(&pairs).unwrap();
            let max_diag = (0..n).map(|i| pg[(i, i)]).fold(0.0, f64::max);
            assert!(min_eigenvalue(&pg) >= -1e-8 * max_diag);
        }
    }

    #[test]
    fn preference_kernel_identities() {
        let spec = KernelSpec::isotropic(1.3, 1.0).unwrap();
        let u = vec![0.1, -0.4];
        let v = vec![1.0, 0.3];
        let p = PreferencePair::new(u.clone(), v.clone()).unwrap();
        let kuu = spec.eval(&u, &u).unwrap();
        let kvv = spec.eval(&v, &v).unwrap();
        let kuv = spec.eval(&u, &v).unwrap();
        let same = preference_kernel_eval(&spec, &p, &p).unwrap();
        assert_abs_diff_eq!(same, kuu + kvv - 2.0 * kuv, epsilon = 1e-15);
        let flipped = preference_kernel_eval(&spec, &p, &p.reversed()).unwrap();
        assert_abs_diff_eq!(flipped, -(kuu + kvv - 2.0 * kuv), epsilon = 1e-15);

        let degenerate = PreferencePair::new(u.clone(), u.clone()).unwrap();
        let q = PreferencePair::new(vec![2.0, 2.0], vec![-1.0, 0.0]).unwrap();
        assert!(preference_kernel_eval(&spec, &degenerate, &q).unwrap().abs() < 1e-15);

        assert!(PreferencePair::new(vec![1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn preference_anti_symmetry_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = KernelSpec::isotropic(0.9, 2.0).unwrap();
        for _ in 0..200 {
            let r = random_points(&mut rng, 2, 4);
            let p = PreferencePair::from_row(&r[0]).unwrap();
            let q = PreferencePair::from_row(&r[1]).unwrap();
            let a = preference_kernel_eval(&spec, &p, &q).unwrap();
            let b = preference_kernel_eval(&spec, &p, &q.reversed()).unwrap();
            let c = preference_kernel_eval(&spec, &q, &p).unwrap();
            assert!((a + b).abs() <= 4.0 * f64::EPSILON * 2.0);
            assert!((a - c).abs() <= 8.0 * f64::EPSILON);
        }
    }

    #[test]
    fn preference_mean_values() {
        let p = PreferencePair::new(vec![1.0], vec![2.0]).unwrap();
        assert_eq!(preference_mean(|_| 0.0, &p), 0.0);
        let mu = |x: &[f64]| if x[0] == 1.0 { 3.0 } else { 1.0 };
        assert_eq!(preference_mean(mu, &p), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let r = random_points(&mut rng, 1, 4);
            let p = PreferencePair::from_row(&r[0]).unwrap();
            let f = |x: &[f64]| x.iter().map(|v| v.sin()).sum::<f64>();
            assert_eq!(preference_mean(f, &p) + preference_mean(f, &p.reversed()), 0.0);
        }
    }

    #[test]
    fn pair_row_round_trip() {
        let p = PreferencePair::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(p.to_row(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(PreferencePair::from_row(&p.to_row()).unwrap(), p);
        assert!(PreferencePair::from_row(&[1.0, 2.0, 3.0]).is_err());
    }
}
