//! Pool scoring and query selection.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gp::{sample_latents, GaussianPosterior};
use crate::kernels::KernelSpec;
use crate::math::{
    self, binary_entropy_unchecked, expected_conditional_entropy_closed,
    expected_conditional_entropy_mc_keyed, predictive_entropy,
};
use crate::rng;

/// Acquisition strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AcquisitionKind {
    /// Closed-form BALD.
    BaldClosed,
    /// BALD with the expected conditional entropy estimated by sampling.
    BaldMc { n_samples: usize },
    /// Maximum entropy sampling: the predictive entropy alone.
    Mes,
    /// Vote entropy of a committee of posterior function draws.
    Qbc { committee_size: usize },
    Random,
}

impl AcquisitionKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AcquisitionKind::BaldMc { n_samples: 0 } => {
                Err(invalid("mc sample count must be >= 1"))
            }
            AcquisitionKind::Qbc { committee_size } if committee_size < 2 => {
                Err(invalid(format!("committee size must be >= 2, got {committee_size}")))
            }
            _ => Ok(()),
        }
    }

    /// Short name used in file names and tables.
    pub fn name(&self) -> String {
        match self {
            AcquisitionKind::BaldClosed => "bald".into(),
            AcquisitionKind::BaldMc { n_samples } => format!("bald_mc{n_samples}"),
            AcquisitionKind::Mes => "mes".into(),
            AcquisitionKind::Qbc { committee_size } => format!("qbc{committee_size}"),
            AcquisitionKind::Random => "random".into(),
        }
    }
}

/// Finite weighted sample of kernel hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperSampleSet {
    samples: Vec<(KernelSpec, f64)>,
}

impl HyperSampleSet {
    pub fn new(samples: Vec<(KernelSpec, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("hyperparameter sample set is empty"));
        }
        if let Some((_, w)) = samples.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid(format!("hyperparameter weight must be >= 0, got {w}")));
        }
        let total: f64 = samples.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("hyperparameter weights sum to {total}, expected 1")));
        }
        Ok(Self { samples })
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(samples: Vec<(KernelSpec, f64)>) -> Result<Self> {
        let total: f64 = samples.iter().map(|(_, w)| w).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(invalid(format!("hyperparameter weights sum to {total}")));
        }
        Self::new(samples.into_iter().map(|(k, w)| (k, w / total)).collect())
    }

    pub fn single(spec: KernelSpec) -> Self {
        Self { samples: vec![(spec, 1.0)] }
    }

    pub fn samples(&self) -> &[(KernelSpec, f64)] {
        &self.samples
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|(_, w)| *w)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Scores for every pool point and the selected index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPool {
    pub scores: Vec<f64>,
    pub chosen: usize,
    pub strategy: String,
    pub seed: u64,
}

/// Index of the largest score; ties go to the lowest index.
pub fn select_query(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl ScoredPool {
    fn from_scores(scores: Vec<f64>, strategy: String, seed: u64) -> Self {
        let chosen = select_query(&scores);
        Self { scores, chosen, strategy, seed }
    }

    pub fn select_query(&self) -> usize {
        self.chosen
    }
}

pub fn score_pool(
    post: &GaussianPosterior,
    pool: &[Vec<f64>],
    kind: AcquisitionKind,
    seed: u64,
) -> Result<ScoredPool> {
    if pool.is_empty() {
        return Err(invalid("pool is empty"));
    }
    kind.validate()?;
    let name = kind.name();
    match kind {
        AcquisitionKind::Random => {
            let chosen = rng::stream(seed, 0).random_range(0..pool.len());
            let mut scores = vec![0.0; pool.len()];
            scores[chosen] = 1.0;
            Ok(ScoredPool { scores, chosen, strategy: name, seed })
        }
        AcquisitionKind::Qbc { committee_size } => {
            let draws = sample_latents(post, pool, committee_size, seed)?;
            let scores = draws
                .column_iter()
                .map(|col| {
                    let positive = col.iter().filter(|&&f| f >= 0.0).count();
                    binary_entropy_unchecked(positive as f64 / committee_size as f64)
                })
                .collect();
            Ok(ScoredPool::from_scores(scores, name, seed))
        }
        _ => {
            let moments = post.predict_many(pool)?;
            let scores = moments
                .par_iter()
                .enumerate()
                .map(|(i, m)| -> Result<f64> {
                    Ok(match kind {
                        AcquisitionKind::BaldClosed => math::bald_score(m),
                        AcquisitionKind::Mes => predictive_entropy(m),
                        AcquisitionKind::BaldMc { n_samples } => {
                            predictive_entropy(m)
                                - expected_conditional_entropy_mc_keyed(m, n_samples, seed, i as u64)?.value
                        }
                        AcquisitionKind::Random | AcquisitionKind::Qbc { .. } => unreachable!(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ScoredPool::from_scores(scores, name, seed))
        }
    }
}

/// BALD with kernel hyperparameters marginalised over a weighted sample:
/// `h(Σⱼ wⱼ pⱼ(x)) - Σⱼ wⱼ Tⱼ(x)`, where `pⱼ` is the predictive probability and
/// `Tⱼ` the closed-form expected conditional entropy under posterior `j`.
pub fn bald_marginal(
    posteriors: &[GaussianPosterior],
    hypers: &HyperSampleSet,
    pool: &[Vec<f64>],
) -> Result<ScoredPool> {
    if posteriors.len() != hypers.len() {
        return Err(invalid(format!(
            "{} posteriors for {} hyperparameter samples",
            posteriors.len(),
            hypers.len()
        )));
    }
    if pool.is_empty() {
        return Err(invalid("pool is empty"));
    }
    let per_model: Vec<Vec<math::PredictiveMoments>> =
        posteriors.iter().map(|p| p.predict_many(pool)).collect::<Result<_>>()?;
    let weights: Vec<f64> = hypers.weights().collect();
    let scores = (0..pool.len())
        .map(|i| {
            let mut prob = 0.0;
            let mut cond = 0.0;
            for (moments, w) in per_model.iter().zip(&weights) {
                prob += w * math::predictive_probability(&moments[i]);
                cond += w * expected_conditional_entropy_closed(&moments[i]);
            }
            binary_entropy_unchecked(prob.clamp(0.0, 1.0)) - cond
        })
        .collect();
    Ok(ScoredPool::from_scores(scores, "bald_marginal".into(), 0))
}

/// Percentage of the best achievable gold-standard score lost by selecting
/// with the approximate scores instead.
pub fn approximation_error_pct(gold: &[f64], approx: &[f64]) -> Result<f64> {
    if gold.len() != approx.len() {
        return Err(invalid(format!("{} gold scores vs {} approximate scores", gold.len(), approx.len())));
    }
    if gold.is_empty() {
        return Err(invalid("no scores"));
    }
    let best = gold[select_query(gold)];
    if best.is_nan() || best <= 0.0 {
        return Err(Error::UndefinedMetric(format!("maximum gold score {best} is not positive")));
    }
    let picked = gold[select_query(approx)];
    Ok(((best - picked) / best * 100.0).clamp(0.0, 100.0))
}
