//! Scalar information-theoretic functions for probit classification.
//!
//! All entropies are in bits. The three quantities making up the BALD
//! objective for a Gaussian latent `f ~ N(mean, variance)` are:
//!
//! * [`predictive_entropy`]: `h(Φ(mean / sqrt(variance + 1)))`, exact under the
//!   Gaussian posterior.
//! * [`expected_conditional_entropy_closed`]: `E[h(Φ(f))]` after replacing
//!   `h(Φ(x))` by `exp(-x² / (π ln 2))` and convolving with the Gaussian.
//! * [`expected_conditional_entropy_mc`]: the same expectation by sampling.
//!
//! [`bald_score`] is the first minus the second.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// `sqrt(π ln 2 / 2)`: the standard deviation of the Gaussian whose shape
/// matches the squared-exponential entropy surrogate.
pub const ENTROPY_CONST: f64 = 1.043_452_464_251_151_7;

const PROB_EPS: f64 = 1e-300;
const PROBIT_SATURATION: f64 = 40.0;

/// Mean and variance of the latent function at one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveMoments {
    mean: f64,
    variance: f64,
}

impl PredictiveMoments {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(Error::Domain(format!(
                "moments must be finite, got mean={mean}, variance={variance}"
            )));
        }
        if variance < 0.0 {
            return Err(Error::Domain(format!("variance must be >= 0, got {variance}")));
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// The same moments with the mean negated.
    pub fn reflected(&self) -> Self {
        Self { mean: -self.mean, variance: self.variance }
    }
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")));
    }
    Ok(binary_entropy_unchecked(p))
}

pub(crate) fn binary_entropy_unchecked(p: f64) -> f64 {
    let q = 1.0 - p;
    // the clamp only guards the logarithm, so 0 · log 0 evaluates to exactly 0
    let h = -(p * p.max(PROB_EPS).log2() + q * q.max(PROB_EPS).log2());
    h.clamp(0.0, 1.0)
}

/// Standard normal CDF.
pub fn probit(x: f64) -> f64 {
    if x > PROBIT_SATURATION {
        1.0
    } else if x < -PROBIT_SATURATION {
        0.0
    } else {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `φ(z) / Φ(z)`, stable for large negative `z`.
pub(crate) fn inverse_mills(z: f64) -> f64 {
    if z < -30.0 {
        // asymptotic expansion of the Mills ratio
        let z2 = z * z;
        -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2))
    } else {
        normal_pdf(z) / probit(z)
    }
}

/// Squared-exponential approximation to `h(Φ(x))`.
pub fn entropy_surrogate(x: f64) -> f64 {
    (-x * x / (std::f64::consts::PI * std::f64::consts::LN_2)).exp()
}

/// `Φ(mean / sqrt(variance + 1))`: the predictive probability of `y = +1`.
pub fn predictive_probability(m: &PredictiveMoments) -> f64 {
    probit(m.mean / (m.variance + 1.0).sqrt())
}

/// Entropy of the marginal predictive distribution of the label.
pub fn predictive_entropy(m: &PredictiveMoments) -> f64 {
    binary_entropy_unchecked(predictive_probability(m))
}

/// Closed-form approximation of `E[h(Φ(f))]` under `f ~ N(mean, variance)`.
pub fn expected_conditional_entropy_closed(m: &PredictiveMoments) -> f64 {
    let s2 = m.variance + ENTROPY_CONST * ENTROPY_CONST;
    ENTROPY_CONST / s2.sqrt() * (-m.mean * m.mean / (2.0 * s2)).exp()
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of `E[h(Φ(f))]` under `f ~ N(mean, variance)`.
///
/// Deterministic in `seed`; draws come from stream 0 of the seeded generator.
pub fn expected_conditional_entropy_mc(
    m: &PredictiveMoments,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    Ok(expected_conditional_entropy_mc_keyed(m, n_samples, seed, 0)?.value)
}

/// As [`expected_conditional_entropy_mc`], drawing from stream `key` and
/// reporting the standard error of the mean.
pub fn expected_conditional_entropy_mc_keyed(
    m: &PredictiveMoments,
    n_samples: usize,
    seed: u64,
    key: u64,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    if m.variance == 0.0 {
        return Ok(McEstimate {
            value: binary_entropy_unchecked(probit(m.mean)),
            std_error: 0.0,
        });
    }
    let sd = m.std_dev();
    let mut gen = rng::stream(seed, key);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let z: f64 = gen.sample(StandardNormal);
        let h = binary_entropy_unchecked(probit(m.mean + sd * z));
        sum += h;
        sum_sq += h * h;
    }
    let n = n_samples as f64;
    let value = sum / n;
    let var = if n_samples > 1 {
        ((sum_sq - n * value * value) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate { value, std_error: (var / n).sqrt() })
}

/// The BALD objective in closed form: predictive entropy minus the
/// approximated expected conditional entropy.
pub fn bald_score(m: &PredictiveMoments) -> f64 {
    predictive_entropy(m) - expected_conditional_entropy_closed(m)
}
