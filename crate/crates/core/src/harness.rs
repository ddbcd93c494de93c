//! Pool-based active-learning loop with a simulated oracle.

use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::acquisition::{self, AcquisitionKind, HyperSampleSet, ScoredPool};
use crate::data::LabeledPool;
use crate::error::{invalid, Error, Result};
use crate::gp::{self, GaussianPosterior, InferenceMethod};
use crate::kernels::Covariance;
use crate::label::Label;
use crate::rng;

/// How pool points are scored each round.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// One posterior under fixed kernel hyperparameters.
    Single(AcquisitionKind),
    /// BALD averaged over weighted kernel hyperparameter samples; the
    /// covariance of the run supplies the kernel structure.
    Marginal(HyperSampleSet),
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::Single(kind) => kind.name(),
            Strategy::Marginal(h) => format!("bald_marginal{}", h.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig<'a> {
    pub dataset: &'a LabeledPool,
    pub covariance: Covariance,
    pub inference: InferenceMethod,
    pub strategy: Strategy,
    pub n_seed_points: usize,
    pub n_rounds: usize,
    pub seed: u64,
    pub eval_every: usize,
    /// Record per-round wall-clock time. Off by default so logs are reproducible.
    pub record_timing: bool,
}

impl RunConfig<'_> {
    fn validate(&self) -> Result<()> {
        if self.n_seed_points == 0 {
            return Err(invalid("n_seed_points must be >= 1"));
        }
        if self.n_rounds == 0 {
            return Err(invalid("n_rounds must be >= 1"));
        }
        if self.eval_every == 0 {
            return Err(invalid("eval_every must be >= 1"));
        }
        if let Strategy::Single(kind) = &self.strategy {
            kind.validate()?;
        }
        let split = self.dataset.split();
        if split.seed.len() != self.n_seed_points {
            return Err(Error::Data(format!(
                "dataset split has {} seed points, config asks for {}",
                split.seed.len(),
                self.n_seed_points
            )));
        }
        if split.test.is_empty() {
            return Err(Error::Data("test split is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Row index into the dataset.
    pub chosen_pool_index: usize,
    pub score_of_chosen: f64,
    /// `None` on rounds skipped by `eval_every`.
    pub test_accuracy: Option<f64>,
    pub cumulative_labels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: String,
    pub seed: u64,
    #[serde(skip)]
    pub records: Vec<RoundRecord>,
    /// Accuracy of the seed-set model, before any query.
    pub initial_accuracy: f64,
    pub labels_to_97_5: Option<usize>,
    pub final_accuracy: f64,
    pub pool_ceiling_accuracy: f64,
    /// The pool ran out before `n_rounds` queries.
    pub truncated: bool,
}

impl RunSummary {
    pub fn chosen(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.chosen_pool_index).collect()
    }
}

/// Posteriors with mixture weights; a single model has weight 1.
struct Model {
    parts: Vec<(GaussianPosterior, f64)>,
}

impl Model {
    fn fit(
        covariance: &Covariance,
        inference: InferenceMethod,
        strategy: &Strategy,
        xs: &[Vec<f64>],
        ys: &[Label],
        round: usize,
    ) -> Result<Self> {
        let parts = match strategy {
            Strategy::Single(_) => vec![(fit_with_retry(inference, covariance, xs, ys, round)?, 1.0)],
            Strategy::Marginal(hypers) => hypers
                .samples()
                .iter()
                .map(|(spec, w)| {
                    let cov = match covariance {
                        Covariance::Plain(_) => Covariance::Plain(spec.clone()),
                        Covariance::Preference(_) => Covariance::Preference(spec.clone()),
                    };
                    Ok((fit_with_retry(inference, &cov, xs, ys, round)?, *w))
                })
                .collect::<Result<_>>()?,
        };
        Ok(Self { parts })
    }

    fn for_run(cfg: &RunConfig, xs: &[Vec<f64>], ys: &[Label], round: usize) -> Result<Self> {
        Self::fit(&cfg.covariance, cfg.inference, &cfg.strategy, xs, ys, round)
    }

    fn probability(&self, x: &[f64]) -> Result<f64> {
        let mut p = 0.0;
        for (post, w) in &self.parts {
            p += w * post.predictive_probability(x)?;
        }
        Ok(p)
    }

    fn accuracy(&self, xs: &[Vec<f64>], ys: &[Label]) -> Result<f64> {
        accuracy_from(xs, ys, |x| self.probability(x))
    }

    fn score(&self, strategy: &Strategy, pool: &[Vec<f64>], seed: u64) -> Result<ScoredPool> {
        match strategy {
            Strategy::Single(kind) => acquisition::score_pool(&self.parts[0].0, pool, *kind, seed),
            Strategy::Marginal(hypers) => {
                let posts: Vec<GaussianPosterior> = self.parts.iter().map(|(p, _)| p.clone()).collect();
                acquisition::bald_marginal(&posts, hypers, pool)
            }
        }
    }
}

fn fit_with_retry(
    method: InferenceMethod,
    cov: &Covariance,
    xs: &[Vec<f64>],
    ys: &[Label],
    round: usize,
) -> Result<GaussianPosterior> {
    let post = match gp::fit(method, cov, xs, ys) {
        Ok(p) => p,
        Err(Error::Numerical(first)) => {
            warn!("round {round}: inference failed ({first}); retrying with 10x jitter");
            gp::fit(method, &cov.with_jitter_scaled(10.0), xs, ys).map_err(|e| {
                Error::Numerical(format!("round {round}: inference failed after jitter retry: {e}"))
            })?
        }
        Err(e) => return Err(e),
    };
    if !post.converged() {
        warn!("round {round}: inference stopped after {} iterations without converging", post.iterations());
    }
    Ok(post)
}

fn accuracy_from<F: Fn(&[f64]) -> Result<f64>>(xs: &[Vec<f64>], ys: &[Label], prob: F) -> Result<f64> {
    if xs.is_empty() {
        return Err(invalid("empty test set"));
    }
    if xs.len() != ys.len() {
        return Err(invalid(format!("{} test inputs but {} labels", xs.len(), ys.len())));
    }
    let mut correct = 0usize;
    for (x, y) in xs.iter().zip(ys) {
        if Label::from_probability(prob(x)?) == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / xs.len() as f64)
}

/// Fraction of test points whose predicted class matches the label.
/// A predictive probability of exactly 0.5 predicts the positive class.
pub fn evaluate_accuracy(post: &GaussianPosterior, test_x: &[Vec<f64>], test_y: &[Label]) -> Result<f64> {
    accuracy_from(test_x, test_y, |x| post.predictive_probability(x))
}

/// Smallest `cumulative_labels` whose accuracy reaches `threshold * ceiling`.
/// Records without an accuracy are skipped.
pub fn labels_to_ceiling_fraction(records: &[RoundRecord], ceiling: f64, threshold: f64) -> Result<Option<usize>> {
    if ceiling.is_nan() || ceiling <= 0.0 {
        return Err(invalid(format!("ceiling must be positive, got {ceiling}")));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(invalid(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    let target = threshold * ceiling;
    Ok(records
        .iter()
        .filter(|r| r.test_accuracy.is_some_and(|a| a >= target))
        .map(|r| r.cumulative_labels)
        .min())
}

/// Runs the greedy query loop: fit on the labelled set, score the pool,
/// query the best point, repeat.
pub fn run_active_learning(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let data = cfg.dataset;
    let split = data.split();
    let test_x = data.rows(&split.test);
    let test_y = data.labels_at(&split.test);

    let mut labeled: Vec<usize> = split.seed.clone();
    let mut pool: Vec<usize> = split.pool.clone();
    let mut xs = data.rows(&labeled);
    let mut ys = data.labels_at(&labeled);

    let mut model = Model::for_run(cfg, &xs, &ys, 0)?;
    let initial_accuracy = model.accuracy(&test_x, &test_y)?;
    let mut records = Vec::with_capacity(cfg.n_rounds);
    let mut truncated = false;

    for round in 1..=cfg.n_rounds {
        if pool.is_empty() {
            warn!("pool exhausted after {} rounds", round - 1);
            truncated = true;
            break;
        }
        let start = Instant::now();
        let pool_x = data.rows(&pool);
        let scored = model.score(&cfg.strategy, &pool_x, rng::derive_seed(cfg.seed, round as u64))?;
        let pos = scored.select_query();
        let chosen = pool.remove(pos);
        labeled.push(chosen);
        xs.push(data.features()[chosen].clone());
        ys.push(data.labels()[chosen]);
        model = Model::for_run(cfg, &xs, &ys, round)?;
        let evaluate = round % cfg.eval_every == 0 || round == cfg.n_rounds;
        let test_accuracy = if evaluate { Some(model.accuracy(&test_x, &test_y)?) } else { None };
        records.push(RoundRecord {
            round,
            chosen_pool_index: chosen,
            score_of_chosen: scored.scores[pos],
            test_accuracy,
            cumulative_labels: cfg.n_seed_points + round,
            wall_ms: cfg.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3),
        });
    }
    if truncated {
        if let Some(last) = records.last_mut() {
            if last.test_accuracy.is_none() {
                last.test_accuracy = Some(model.accuracy(&test_x, &test_y)?);
            }
        }
    }

    let train: Vec<usize> = split.train().collect();
    let ceiling_model = Model::for_run(cfg, &data.rows(&train), &data.labels_at(&train), cfg.n_rounds + 1)?;
    let pool_ceiling_accuracy = ceiling_model.accuracy(&test_x, &test_y)?;
    let labels_to_97_5 = if pool_ceiling_accuracy > 0.0 {
        labels_to_ceiling_fraction(&records, pool_ceiling_accuracy, 0.975)?
    } else {
        None
    };
    let final_accuracy = records.iter().rev().find_map(|r| r.test_accuracy).unwrap_or(initial_accuracy);
    info!(
        "{} seed {}: final accuracy {final_accuracy:.3}, ceiling {pool_ceiling_accuracy:.3}",
        cfg.strategy.name(),
        cfg.seed
    );
    Ok(RunSummary {
        strategy: cfg.strategy.name(),
        seed: cfg.seed,
        records,
        initial_accuracy,
        labels_to_97_5,
        final_accuracy,
        pool_ceiling_accuracy,
        truncated,
    })
}

/// Fits on `(xs, ys)` and scores `pool` exactly as round 1 of a run with
/// seed `run_seed` would.
pub fn score_once(
    covariance: &Covariance,
    inference: InferenceMethod,
    strategy: &Strategy,
    xs: &[Vec<f64>],
    ys: &[Label],
    pool: &[Vec<f64>],
    run_seed: u64,
) -> Result<ScoredPool> {
    if let Strategy::Single(kind) = strategy {
        kind.validate()?;
    }
    Model::fit(covariance, inference, strategy, xs, ys, 0)?.score(strategy, pool, rng::derive_seed(run_seed, 1))
}

/// Refits on the seed set plus the first `t` of `chosen` for every `t` and
/// returns the test accuracies.
pub fn replay_accuracies(cfg: &RunConfig, chosen: &[usize]) -> Result<Vec<f64>> {
    cfg.validate()?;
    let data = cfg.dataset;
    let split = data.split();
    let test_x = data.rows(&split.test);
    let test_y = data.labels_at(&split.test);
    let mut labeled = split.seed.clone();
    let mut out = Vec::with_capacity(chosen.len());
    for (t, &c) in chosen.iter().enumerate() {
        labeled.push(c);
        let model = Model::for_run(cfg, &data.rows(&labeled), &data.labels_at(&labeled), t + 1)?;
        out.push(model.accuracy(&test_x, &test_y)?);
    }
    Ok(out)
}
