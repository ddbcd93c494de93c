//! Gaussian approximations to the probit GP classification posterior.
//!
//! Both methods summarise the posterior by per-point site precisions `s`
//! and a weight vector `alpha`, so that at a query `x`
//!
//! ```text
//! mean(x)     = k(x, X) · alpha
//! variance(x) = k(x, x) - |L⁻¹ diag(√s) k(X, x)|²,   L Lᵀ = I + diag(√s) K diag(√s)
//! ```

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::Covariance;
use crate::label::Label;
use crate::math::{inverse_mills, PredictiveMoments};
use crate::rng;

const JITTER_ESCALATIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMethod {
    #[default]
    Ep,
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Sweeps for EP, Newton steps for Laplace.
    pub max_iter: usize,
    pub tol: f64,
    /// Weight on the freshly computed site parameters (EP only).
    pub damping: f64,
}

impl FitOptions {
    pub fn ep() -> Self {
        Self { max_iter: 60, tol: 1e-4, damping: 0.8 }
    }

    pub fn laplace() -> Self {
        Self { max_iter: 30, tol: 1e-4, damping: 1.0 }
    }

    pub fn for_method(method: InferenceMethod) -> Self {
        match method {
            InferenceMethod::Ep => Self::ep(),
            InferenceMethod::Laplace => Self::laplace(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    method: InferenceMethod,
    covariance: Covariance,
    train_inputs: Vec<Vec<f64>>,
    train_labels: Vec<Label>,
    input_dim: Option<usize>,
    /// EP: site precisions τ̃. Laplace: negative log-likelihood curvature W at the mode.
    site_precision: DVector<f64>,
    /// EP: site natural means ν̃. Laplace: the posterior mode.
    site_location: DVector<f64>,
    sqrt_precision: DVector<f64>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    converged: bool,
    iterations: usize,
}

impl GaussianPosterior {
    /// The prior: no training data.
    pub fn prior(covariance: Covariance, method: InferenceMethod) -> Self {
        Self {
            method,
            covariance,
            train_inputs: Vec::new(),
            train_labels: Vec::new(),
            input_dim: None,
            site_precision: DVector::zeros(0),
            site_location: DVector::zeros(0),
            sqrt_precision: DVector::zeros(0),
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            converged: true,
            iterations: 0,
        }
    }

    pub fn method(&self) -> InferenceMethod {
        self.method
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    pub fn train_labels(&self) -> &[Label] {
        &self.train_labels
    }

    pub fn site_precision(&self) -> &DVector<f64> {
        &self.site_precision
    }

    pub fn site_location(&self) -> &DVector<f64> {
        &self.site_location
    }

    /// Lower Cholesky factor of `I + diag(√s) K diag(√s)`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.input_dim {
            Some(d) if d != x.len() => {
                Err(invalid(format!("query has dimension {}, training inputs have {d}", x.len())))
            }
            _ => Ok(()),
        }
    }

    pub fn predictive_moments(&self, x: &[f64]) -> Result<PredictiveMoments> {
        self.check_dim(x)?;
        let prior_var = self.covariance.prior_variance(x)?;
        if self.train_inputs.is_empty() {
            return PredictiveMoments::new(0.0, prior_var);
        }
        let kx = DVector::from_iterator(
            self.train_inputs.len(),
            self.train_inputs.iter().map(|t| self.covariance.eval(t, x)).collect::<Result<Vec<_>>>()?,
        );
        let mean = kx.dot(&self.alpha);
        let v = self.solve_lower(&kx.component_mul(&self.sqrt_precision))?;
        let var = (prior_var - v.norm_squared()).max(0.0);
        PredictiveMoments::new(mean, var)
    }

    /// Moments at many points; equal to mapping [`Self::predictive_moments`].
    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<PredictiveMoments>> {
        xs.iter().map(|x| self.predictive_moments(x)).collect()
    }

    /// Probability of `+1` at `x` under the Gaussian approximation.
    pub fn predictive_probability(&self, x: &[f64]) -> Result<f64> {
        Ok(crate::math::predictive_probability(&self.predictive_moments(x)?))
    }

    fn solve_lower(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.chol
            .solve_lower_triangular(b)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))
    }

    /// Joint predictive mean and covariance at `xs`.
    pub fn joint_predictive(&self, xs: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        for x in xs {
            self.check_dim(x)?;
        }
        let mut cov = self.covariance.cross(xs, xs)?;
        if self.train_inputs.is_empty() {
            return Ok((DVector::zeros(xs.len()), cov));
        }
        let kxq = self.covariance.cross(&self.train_inputs, xs)?;
        let mean = kxq.tr_mul(&self.alpha);
        let mut scaled = kxq;
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= self.sqrt_precision[i];
        }
        let v = self
            .chol
            .solve_lower_triangular(&scaled)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        cov -= v.tr_mul(&v);
        cov = (&cov + cov.transpose()) * 0.5;
        Ok((mean, cov))
    }
}

pub fn predictive_moments(post: &GaussianPosterior, x: &[f64]) -> Result<PredictiveMoments> {
    post.predictive_moments(x)
}

fn validate_training(xs: &[Vec<f64>], ys: &[Label]) -> Result<usize> {
    if xs.is_empty() {
        return Err(invalid("need at least one training point"));
    }
    if xs.len() != ys.len() {
        return Err(invalid(format!("{} inputs but {} labels", xs.len(), ys.len())));
    }
    let d = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(invalid(format!("inconsistent input dimensions: {} vs {d}", x.len())));
    }
    Ok(d)
}

/// Cholesky of the Gram matrix scaled by `√s`, escalating jitter on failure.
/// Returns the (possibly re-jittered) Gram matrix and `L`.
fn factor_system(
    cov: &Covariance,
    xs: &[Vec<f64>],
    sqrt_s: &DVector<f64>,
    k: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = xs.len();
    let mut k = k.clone();
    let mut extra = cov.jitter().max(1e-12);
    for attempt in 0..=JITTER_ESCALATIONS {
        let mut b = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] += sqrt_s[i] * k[(i, j)] * sqrt_s[j];
            }
        }
        if let Some(ch) = b.cholesky() {
            return Ok((k, ch.l()));
        }
        if attempt < JITTER_ESCALATIONS {
            extra *= 10.0;
            warn!("Cholesky failed, adding jitter {extra:e}");
            for i in 0..n {
                k[(i, i)] += extra;
            }
        }
    }
    Err(Error::Numerical(format!("Cholesky failed on {n}x{n} system after jitter escalation")))
}

/// `Σ = K - Vᵀ V`, `V = L⁻¹ diag(√s) K`.
fn posterior_covariance(k: &DMatrix<f64>, sqrt_s: &DVector<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = k.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= sqrt_s[i];
    }
    let v = l.solve_lower_triangular(&scaled).expect("L has a positive diagonal");
    k - v.tr_mul(&v)
}

/// `b - diag(√s) L⁻ᵀ L⁻¹ diag(√s) K b`: the weights mapping `k(x, X)` to the predictive mean.
fn mean_weights(k: &DMatrix<f64>, sqrt_s: &DVector<f64>, l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let kb = (k * b).component_mul(sqrt_s);
    let t = l.solve_lower_triangular(&kb).expect("L has a positive diagonal");
    let u = l.tr_solve_lower_triangular(&t).expect("L has a positive diagonal");
    b - u.component_mul(sqrt_s)
}

/// Expectation propagation with sequential, damped site updates.
pub fn fit_ep(
    covariance: &Covariance,
    xs: &[Vec<f64>],
    ys: &[Label],
    opts: FitOptions,
) -> Result<GaussianPosterior> {
    let d = validate_training(xs, ys)?;
    let n = xs.len();
    let y: Vec<f64> = ys.iter().map(|l| l.sign()).collect();
    let k = covariance.gram(xs)?;

    let mut tau = DVector::<f64>::zeros(n);
    let mut nu = DVector::<f64>::zeros(n);
    let mut sigma = k.clone();
    let mut mu = DVector::<f64>::zeros(n);
    let mut converged = false;
    let mut sweeps = 0;
    let mut k_cur = k;
    let mut l = DMatrix::identity(n, n);

    while sweeps < opts.max_iter {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for i in 0..n {
            let s_ii = sigma[(i, i)];
            let tau_cav = (1.0 / s_ii - tau[i]).max(1e-12);
            let nu_cav = mu[i] / s_ii - nu[i];
            let var_cav = 1.0 / tau_cav;
            let mean_cav = nu_cav * var_cav;

            // moments of the tilted distribution Φ(y f) N(f | mean_cav, var_cav)
            let denom = (1.0 + var_cav).sqrt();
            let z = y[i] * mean_cav / denom;
            let r = inverse_mills(z);
            let mean_hat = mean_cav + y[i] * var_cav * r / denom;
            let var_hat = (var_cav - var_cav * var_cav * r * (z + r) / (1.0 + var_cav)).max(1e-300);

            let tau_target = 1.0 / var_hat - tau_cav;
            let nu_target = mean_hat / var_hat - nu_cav;
            let mut tau_new = opts.damping * tau_target + (1.0 - opts.damping) * tau[i];
            let nu_new = opts.damping * nu_target + (1.0 - opts.damping) * nu[i];
            if tau_new < 0.0 {
                warn!("EP site {i}: negative precision {tau_new:e} clipped to 0");
                tau_new = 0.0;
            }
            let dtau = tau_new - tau[i];
            max_change = max_change.max(dtau.abs()).max((nu_new - nu[i]).abs());
            tau[i] = tau_new;
            nu[i] = nu_new;

            // Σ ← Σ - s sᵀ / (1/Δτ + Σᵢᵢ)
            let c = dtau / (1.0 + dtau * s_ii);
            if c != 0.0 {
                let s = sigma.column(i).clone_owned();
                sigma.ger(-c, &s, &s, 1.0);
            }
            mu = &sigma * &nu;
        }

        let sqrt_s = tau.map(f64::sqrt);
        let (k_new, l_new) = factor_system(covariance, xs, &sqrt_s, &k_cur)?;
        sigma = posterior_covariance(&k_new, &sqrt_s, &l_new);
        mu = &sigma * &nu;
        k_cur = k_new;
        l = l_new;

        if max_change < opts.tol {
            converged = true;
            break;
        }
    }

    let sqrt_s = tau.map(f64::sqrt);
    let alpha = mean_weights(&k_cur, &sqrt_s, &l, &nu);
    Ok(GaussianPosterior {
        method: InferenceMethod::Ep,
        covariance: covariance.clone(),
        train_inputs: xs.to_vec(),
        train_labels: ys.to_vec(),
        input_dim: Some(d),
        site_precision: tau,
        site_location: nu,
        sqrt_precision: sqrt_s,
        chol: l,
        alpha,
        converged,
        iterations: sweeps,
    })
}

/// Gradient and curvature of `Σ log Φ(yᵢ fᵢ)`.
fn probit_derivatives(f: &DVector<f64>, y: &[f64]) -> (f64, DVector<f64>, DVector<f64>) {
    let n = f.len();
    let mut loglik = 0.0;
    let mut grad = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for i in 0..n {
        let z = y[i] * f[i];
        let r = inverse_mills(z);
        loglik += log_probit(z);
        grad[i] = y[i] * r;
        w[i] = (r * r + z * r).max(0.0);
    }
    (loglik, grad, w)
}

fn log_probit(z: f64) -> f64 {
    if z > -30.0 {
        crate::math::probit(z).ln()
    } else {
        // ln Φ(z) ≈ ln φ(z) - ln(-z) for very negative z
        -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - (-z).ln()
    }
}

/// Laplace approximation: Newton's method on the unnormalised log posterior.
pub fn fit_laplace(
    covariance: &Covariance,
    xs: &[Vec<f64>],
    ys: &[Label],
    opts: FitOptions,
) -> Result<GaussianPosterior> {
    let d = validate_training(xs, ys)?;
    let n = xs.len();
    let y: Vec<f64> = ys.iter().map(|l| l.sign()).collect();
    let mut k = covariance.gram(xs)?;

    let mut f = DVector::<f64>::zeros(n);
    let mut a = DVector::<f64>::zeros(n);
    let mut objective = probit_derivatives(&f, &y).0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (_, grad, w) = probit_derivatives(&f, &y);
        let sqrt_w = w.map(f64::sqrt);
        let (k_new, l) = factor_system(covariance, xs, &sqrt_w, &k)?;
        k = k_new;
        let b = w.component_mul(&f) + &grad;
        let a_full = mean_weights(&k, &sqrt_w, &l, &b);

        // Newton step with step halving on Ψ(f) = -½ aᵀf + Σ log Φ(y f)
        let mut step = 1.0;
        let (mut a_next, mut f_next, mut obj_next);
        loop {
            a_next = &a + (&a_full - &a) * step;
            f_next = &k * &a_next;
            obj_next = -0.5 * a_next.dot(&f_next) + probit_derivatives(&f_next, &y).0;
            if obj_next >= objective - 1e-12 || step < 1e-4 {
                break;
            }
            step *= 0.5;
        }
        let change = (&f_next - &f).amax();
        f = f_next;
        a = a_next;
        objective = obj_next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let (_, grad, w) = probit_derivatives(&f, &y);
    let sqrt_w = w.map(f64::sqrt);
    let (_, l) = factor_system(covariance, xs, &sqrt_w, &k)?;
    Ok(GaussianPosterior {
        method: InferenceMethod::Laplace,
        covariance: covariance.clone(),
        train_inputs: xs.to_vec(),
        train_labels: ys.to_vec(),
        input_dim: Some(d),
        site_precision: w,
        site_location: f,
        sqrt_precision: sqrt_w,
        chol: l,
        alpha: grad,
        converged,
        iterations,
    })
}

/// Fit with the given method and its default options.
pub fn fit(
    method: InferenceMethod,
    covariance: &Covariance,
    xs: &[Vec<f64>],
    ys: &[Label],
) -> Result<GaussianPosterior> {
    match method {
        InferenceMethod::Ep => fit_ep(covariance, xs, ys, FitOptions::ep()),
        InferenceMethod::Laplace => fit_laplace(covariance, xs, ys, FitOptions::laplace()),
    }
}

/// Joint draws of the latent function at `xs`: one row per draw.
pub fn sample_latents(
    post: &GaussianPosterior,
    xs: &[Vec<f64>],
    n_draws: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if n_draws == 0 {
        return Err(invalid("n_draws must be >= 1"));
    }
    if xs.is_empty() {
        return Err(invalid("no query points"));
    }
    let (mean, mut cov) = post.joint_predictive(xs)?;
    let q = xs.len();
    let mut jitter = post.covariance().jitter().max(1e-12);
    for i in 0..q {
        cov[(i, i)] += jitter;
    }
    let mut chol = None;
    for _ in 0..=JITTER_ESCALATIONS {
        if let Some(c) = cov.clone().cholesky() {
            chol = Some(c.l());
            break;
        }
        for i in 0..q {
            cov[(i, i)] += 9.0 * jitter;
        }
        jitter *= 10.0;
    }
    let l = chol.ok_or_else(|| {
        Error::Numerical(format!("joint covariance at {q} points not factorizable"))
    })?;
    let mut gen = rng::stream(seed, 0);
    let mut draws = DMatrix::zeros(n_draws, q);
    let mut z = DVector::<f64>::zeros(q);
    for r in 0..n_draws {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut gen);
        }
        let f = &mean + &l * &z;
        draws.set_row(r, &f.transpose());
    }
    Ok(draws)
}
