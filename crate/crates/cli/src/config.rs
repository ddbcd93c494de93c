//! Experiment configuration (JSON).

use std::path::{Path, PathBuf};

use bald_core::acquisition::{AcquisitionKind, HyperSampleSet};
use bald_core::data::SyntheticName;
use bald_core::harness::Strategy;
use bald_core::kernels::Lengthscale;
use bald_core::{InferenceMethod, KernelSpec};
use serde::Deserialize;

use crate::CliError;

pub const CONFIG_HELP: &str = "\
CONFIG KEYS (JSON object; unknown keys are rejected):
  dataset          required for run and approx-error; exactly one of
                     {\"synthetic\": {\"name\": block_in_middle|block_in_corner|checkerboard, \"n\": int >= 40}}
                     {\"csv\": {\"path\": str, \"label_column\": str, \"positive_label\": str,
                              \"negative_label\": str (optional; keeps only the two classes)}}
                     {\"preference\": {\"path\": str, \"target_column\": str, \"n_pairs\": int}}
                   relative paths are resolved against the config file's directory
  kernel           {\"lengthscale\": float or [float per feature], \"signal_variance\": float,
                    \"jitter\": float (optional)}          default {\"lengthscale\": 1.0, \"signal_variance\": 1.0},
                                                        jitter 1e-8 x signal_variance
  inference        \"ep\" | \"laplace\"                      default \"ep\"
  strategy         name or list of names: bald, bald_mc, mes, qbc, random, bald_marginal
                                                        default \"bald\"
  committee_size   QBC committee size                   default 100
  mc_samples       samples per point for bald_mc        default 1000
  hyper_samples    list of {\"lengthscale\", \"signal_variance\", \"weight\"} for bald_marginal;
                   weights are normalized               default []
  seeds            list of run seeds                    default [0]
  rounds           queries per run                      default 60
  seed_points      labelled points before the first query (stratified)
                                                        default 2
  test_fraction    share of rows held out for testing   default 0.5
  eval_every       evaluate test accuracy every k rounds (last round always)
                                                        default 1
  timing           record wall_ms per round (makes logs non-reproducible)
                                                        default false
  output_dir       directory for outputs                default \"out\"
  approx_error     {\"trials\": 50, \"train_points\": 50, \"pool_size\": 100,
                    \"gold_samples\": 100000, \"methods\": [\"ep\", \"laplace\"]} (all keys optional)
";

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic {
        name: SyntheticName,
        n: usize,
    },
    Csv {
        path: PathBuf,
        label_column: String,
        positive_label: String,
        #[serde(default)]
        negative_label: Option<String>,
    },
    Preference {
        path: PathBuf,
        target_column: String,
        n_pairs: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_lengthscale")]
    pub lengthscale: Lengthscale,
    #[serde(default = "one")]
    pub signal_variance: f64,
    #[serde(default)]
    pub jitter: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { lengthscale: default_lengthscale(), signal_variance: 1.0, jitter: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSample {
    pub lengthscale: Lengthscale,
    pub signal_variance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn names(&self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxErrorConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_train_points")]
    pub train_points: usize,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_gold_samples")]
    pub gold_samples: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<InferenceMethod>,
}

impl Default for ApproxErrorConfig {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            train_points: default_train_points(),
            pool_size: default_pool_size(),
            gold_samples: default_gold_samples(),
            methods: default_methods(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub inference: InferenceMethod,
    #[serde(default = "default_strategy")]
    pub strategy: OneOrMany,
    #[serde(default = "default_committee")]
    pub committee_size: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub hyper_samples: Vec<HyperSample>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_seed_points")]
    pub seed_points: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "one_usize")]
    pub eval_every: usize,
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub approx_error: Option<ApproxErrorConfig>,
}

fn default_lengthscale() -> Lengthscale {
    Lengthscale::Shared(1.0)
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_strategy() -> OneOrMany {
    OneOrMany::One("bald".into())
}
fn default_committee() -> usize {
    100
}
fn default_mc_samples() -> usize {
    1000
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_rounds() -> usize {
    60
}
fn default_seed_points() -> usize {
    2
}
fn default_test_fraction() -> f64 {
    0.5
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_trials() -> usize {
    50
}
fn default_train_points() -> usize {
    50
}
fn default_pool_size() -> usize {
    100
}
fn default_gold_samples() -> usize {
    100_000
}
fn default_methods() -> Vec<InferenceMethod> {
    vec![InferenceMethod::Ep, InferenceMethod::Laplace]
}

/// A named strategy as given in the config.
#[derive(Debug, Clone)]
pub struct NamedStrategy {
    pub name: String,
    pub strategy: Strategy,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads, parses and validates; dataset paths become absolute.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.dataset {
            Some(DatasetConfig::Csv { path, .. }) | Some(DatasetConfig::Preference { path, .. }) if path.is_relative() => {
                *path = base.join(&*path);
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds must not be empty"));
        }
        if self.rounds == 0 {
            return Err(config_err("rounds must be >= 1"));
        }
        if self.seed_points == 0 {
            return Err(config_err("seed_points must be >= 1"));
        }
        if self.eval_every == 0 {
            return Err(config_err("eval_every must be >= 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(config_err(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        self.kernel_spec()?;
        self.strategies()?;
        match &self.dataset {
            Some(DatasetConfig::Synthetic { n, .. }) if *n < 40 => {
                return Err(config_err(format!("dataset.synthetic.n must be >= 40, got {n}")));
            }
            Some(DatasetConfig::Preference { n_pairs: 0, .. }) => {
                return Err(config_err("dataset.preference.n_pairs must be >= 1"));
            }
            _ => {}
        }
        if let Some(a) = &self.approx_error {
            if a.trials == 0 || a.train_points == 0 || a.pool_size == 0 || a.gold_samples == 0 {
                return Err(config_err("approx_error: trials, train_points, pool_size and gold_samples must be >= 1"));
            }
            if a.methods.is_empty() {
                return Err(config_err("approx_error.methods must not be empty"));
            }
        }
        Ok(())
    }

    pub fn require_dataset(&self) -> Result<&DatasetConfig, CliError> {
        self.dataset.as_ref().ok_or_else(|| config_err("missing key 'dataset'"))
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        KernelSpec::new(self.kernel.lengthscale.clone(), self.kernel.signal_variance, self.kernel.jitter)
            .map_err(|e| config_err(format!("kernel: {e}")))
    }

    pub fn strategies(&self) -> Result<Vec<NamedStrategy>, CliError> {
        let names = self.strategy.names();
        if names.is_empty() {
            return Err(config_err("strategy list must not be empty"));
        }
        let mut out: Vec<NamedStrategy> = Vec::new();
        for raw in names {
            let name = raw.to_ascii_lowercase();
            let strategy = match name.as_str() {
                "bald" | "bald_closed" => Strategy::Single(AcquisitionKind::BaldClosed),
                "bald_mc" => Strategy::Single(AcquisitionKind::BaldMc { n_samples: self.mc_samples }),
                "mes" => Strategy::Single(AcquisitionKind::Mes),
                "qbc" => Strategy::Single(AcquisitionKind::Qbc { committee_size: self.committee_size }),
                "random" => Strategy::Single(AcquisitionKind::Random),
                "bald_marginal" => Strategy::Marginal(self.hyper_sample_set()?),
                other => return Err(config_err(format!("unknown strategy '{other}'"))),
            };
            if let Strategy::Single(kind) = &strategy {
                kind.validate().map_err(|e| config_err(format!("strategy {name}: {e}")))?;
            }
            if out.iter().any(|s| s.name == name) {
                return Err(config_err(format!("strategy '{name}' listed twice")));
            }
            out.push(NamedStrategy { name, strategy });
        }
        Ok(out)
    }

    fn hyper_sample_set(&self) -> Result<HyperSampleSet, CliError> {
        if self.hyper_samples.is_empty() {
            return Err(config_err("bald_marginal needs a non-empty 'hyper_samples' list"));
        }
        let samples = self
            .hyper_samples
            .iter()
            .map(|h| {
                KernelSpec::new(h.lengthscale.clone(), h.signal_variance, self.kernel.jitter)
                    .map(|k| (k, h.weight))
                    .map_err(|e| config_err(format!("hyper_samples: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        HyperSampleSet::normalized(samples).map_err(|e| config_err(format!("hyper_samples: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn defaults() {
        let cfg = parse("{}").unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.rounds, 60);
        assert_eq!(cfg.seed_points, 2);
        assert_eq!(cfg.inference, InferenceMethod::Ep);
        assert_eq!(cfg.strategies().unwrap()[0].name, "bald");
        assert!(cfg.require_dataset().is_err());
    }

    #[test]
    fn full_config() {
        let cfg = parse(
            r#"{"dataset": {"synthetic": {"name": "checkerboard", "n": 400}},
                "kernel": {"lengthscale": [1.0, 2.0], "signal_variance": 4.0},
                "inference": "laplace", "strategy": ["BALD_closed", "random", "qbc", "bald_marginal"],
                "hyper_samples": [{"lengthscale": 1.0, "signal_variance": 1.0, "weight": 2.0},
                                  {"lengthscale": 2.0, "signal_variance": 1.0, "weight": 2.0}],
                "seeds": [1, 2, 3], "rounds": 10, "eval_every": 2, "output_dir": "x",
                "approx_error": {"trials": 3}}"#,
        )
        .unwrap();
        let names: Vec<String> = cfg.strategies().unwrap().into_iter().map(|s| s.name).collect();
        assert_eq!(names, ["bald_closed", "random", "qbc", "bald_marginal"]);
        assert_eq!(cfg.approx_error.unwrap().gold_samples, 100_000);
    }

    #[test]
    fn rejections() {
        for bad in [
            r#"{"unknown": 1}"#,
            r#"{"kernel": {"lengthscale": 1.0, "extra": 2}}"#,
            r#"{"dataset": {"synthetic": {"name": "checkerboard", "n": 400, "x": 1}}}"#,
            r#"{"dataset": {"synthetic": {"name": "spiral", "n": 400}}}"#,
            r#"{"dataset": {"synthetic": {"name": "checkerboard", "n": 10}}}"#,
            r#"{"strategy": "best"}"#,
            r#"{"strategy": ["bald", "bald"]}"#,
            r#"{"strategy": "bald_marginal"}"#,
            r#"{"seeds": []}"#,
            r#"{"rounds": 0}"#,
            r#"{"kernel": {"signal_variance": -1.0}}"#,
            r#"{"committee_size": 0, "strategy": "qbc"}"#,
            r#"{"test_fraction": 1.0}"#,
            r#"{"inference": "mcmc"}"#,
        ] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }
}
