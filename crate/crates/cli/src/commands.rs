//! Subcommand implementations.

use std::path::Path;

use bald_core::acquisition::{approximation_error_pct, score_pool, AcquisitionKind};
use bald_core::data::{
    self, make_preference_task, make_synthetic, make_synthetic_split, CsvTable, LabeledPool, SplitConfig, Standardizer,
    SyntheticName,
};
use bald_core::gp;
use bald_core::harness::{run_active_learning, score_once, RunConfig, RunSummary};
use bald_core::{rng, Covariance, Error, InferenceMethod, Label};
use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::output::{self, mean_sd, write_atomic, write_to};
use crate::CliError;

fn load_config(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = out {
        cfg.output_dir = o.to_path_buf();
    }
    Ok(cfg)
}

/// Item features and targets from a regression CSV; features are z-scored
/// over all items.
fn preference_items(path: &Path, target_column: Option<&str>, standardize: bool) -> Result<(Vec<Vec<f64>>, Vec<f64>), CliError> {
    let table = CsvTable::read(path)?;
    if table.headers.len() < 2 {
        return Err(CliError::Data(format!("{}: need feature columns and a target column", path.display())));
    }
    let tc = match target_column {
        Some(name) => table.column(name)?,
        None => table.headers.len() - 1,
    };
    let (names, mut features) = table.numeric_features(Some(tc))?;
    let (_, targets) = table.numeric_features(None)?;
    let targets: Vec<f64> = targets.iter().map(|row| row[tc]).collect();
    if standardize && !features.is_empty() {
        let all: Vec<usize> = (0..features.len()).collect();
        let z = Standardizer::fit(&names, &features, &all)?;
        features = features.iter().map(|r| z.apply(r)).collect();
    }
    Ok((features, targets))
}

/// The dataset for one run seed and the covariance it is modelled with.
fn prepare_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<(LabeledPool, Covariance), CliError> {
    let spec = cfg.kernel_spec()?;
    let split = SplitConfig { test_fraction: cfg.test_fraction, n_seed_points: cfg.seed_points, seed };
    Ok(match cfg.require_dataset()? {
        DatasetConfig::Synthetic { name, n } => (make_synthetic_split(*name, *n, split)?, Covariance::Plain(spec)),
        DatasetConfig::Csv { path, label_column, positive_label, negative_label } => (
            data::load_csv_pair(path, label_column, positive_label, negative_label.as_deref(), split)?,
            Covariance::Plain(spec),
        ),
        DatasetConfig::Preference { path, target_column, n_pairs } => {
            let (items, targets) = preference_items(path, Some(target_column), true)?;
            let task = make_preference_task(&items, &targets, *n_pairs, seed)?;
            let pool = task.to_labeled_pool(format!("preference:{}", path.display()))?.with_split(split)?;
            (pool, Covariance::Preference(spec))
        }
    })
}

pub fn run(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config, seed, out)?;
    let strategies = cfg.strategies()?;
    // every dataset is built before anything is written
    let datasets: Vec<(u64, LabeledPool, Covariance)> = cfg
        .seeds
        .iter()
        .map(|&s| prepare_dataset(&cfg, s).map(|(d, c)| (s, d, c)))
        .collect::<Result<_, _>>()?;
    let logs = cfg.output_dir.join("logs");
    std::fs::create_dir_all(&logs)?;

    let jobs: Vec<(usize, usize)> =
        (0..strategies.len()).flat_map(|si| (0..datasets.len()).map(move |di| (si, di))).collect();
    let results: Vec<Result<RunSummary, CliError>> = jobs
        .par_iter()
        .map(|&(si, di)| {
            let (seed, data, cov) = &datasets[di];
            let named = &strategies[si];
            let run_cfg = RunConfig {
                dataset: data,
                covariance: cov.clone(),
                inference: cfg.inference,
                strategy: named.strategy.clone(),
                n_seed_points: cfg.seed_points,
                n_rounds: cfg.rounds,
                seed: *seed,
                eval_every: cfg.eval_every,
                record_timing: cfg.timing,
            };
            let summary = run_active_learning(&run_cfg)
                .map_err(|e| CliError::from(e).with_context(&format!("{} seed {seed}", named.name)))?;
            let path = logs.join(format!("{}_seed{seed}.jsonl", named.name));
            write_atomic(&path, |w| output::write_run_log(w, &summary))?;
            info!("wrote {}", path.display());
            Ok(summary)
        })
        .collect();

    let mut first_err = None;
    let mut groups: Vec<(String, Vec<RunSummary>)> = strategies.iter().map(|s| (s.name.clone(), Vec::new())).collect();
    for (&(si, _), r) in jobs.iter().zip(results) {
        match r {
            Ok(s) => groups[si].1.push(s),
            Err(e) => {
                eprintln!("bald: run failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    write_atomic(&cfg.output_dir.join("learning_curve.csv"), |w| {
        output::write_learning_curve(w, &groups, cfg.rounds, cfg.seed_points)
    })?;
    write_atomic(&cfg.output_dir.join("summary.csv"), |w| output::write_summary(w, &groups))?;
    Ok(())
}

impl CliError {
    fn with_context(self, ctx: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
        }
    }
}

/// Labels of a labelled table: the config's csv label column and positive
/// token if given, else a `label` column of -1/1 values.
fn table_labels(table: &CsvTable, dataset: Option<&DatasetConfig>) -> Result<(usize, Vec<Label>), CliError> {
    match dataset {
        Some(DatasetConfig::Csv { label_column, positive_label, negative_label, .. }) => {
            let lc = table.column(label_column)?;
            let labels = table
                .rows
                .iter()
                .map(|r| {
                    let tok = &r[lc];
                    if tok == positive_label {
                        Ok(Label::Positive)
                    } else if negative_label.as_ref().is_none_or(|n| n == tok) {
                        Ok(Label::Negative)
                    } else {
                        Err(CliError::Data(format!("unexpected label '{tok}'")))
                    }
                })
                .collect::<Result<_, _>>()?;
            Ok((lc, labels))
        }
        _ => {
            let lc = table.column("label")?;
            let labels = table
                .rows
                .iter()
                .map(|r| {
                    r[lc]
                        .parse::<i64>()
                        .map_err(|_| Error::Data(format!("label '{}' is not -1 or 1", r[lc])))
                        .and_then(Label::from_sign)
                        .map_err(|e| CliError::Data(e.to_string()))
                })
                .collect::<Result<_, _>>()?;
            Ok((lc, labels))
        }
    }
}

/// Selects `names` from `table` as numbers, in that order.
fn select_columns(table: &CsvTable, names: &[String]) -> Result<Vec<Vec<f64>>, CliError> {
    let idx: Vec<usize> = names.iter().map(|n| table.column(n)).collect::<Result<_, _>>()?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            idx.iter()
                .map(|&c| {
                    row[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        CliError::Data(format!("row {} column '{}': non-numeric value '{}'", r + 2, table.headers[c], row[c]))
                    })
                })
                .collect()
        })
        .collect()
}

pub fn score(config: &Path, labeled: &Path, pool: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config, seed, None)?;
    let strategies = cfg.strategies()?;
    if strategies.len() != 1 {
        return Err(CliError::Config(format!("score needs exactly one strategy, got {}", strategies.len())));
    }
    let strategy = &strategies[0].strategy;
    let run_seed = cfg.seeds[0];

    let lt = CsvTable::read(labeled)?;
    let pt = CsvTable::read(pool)?;
    if lt.rows.is_empty() {
        return Err(CliError::Data(format!("{}: no labelled rows", labeled.display())));
    }
    if pt.rows.is_empty() {
        return Err(CliError::Data(format!("{}: pool has no rows", pool.display())));
    }
    let (lc, ys) = table_labels(&lt, cfg.dataset.as_ref())?;
    let (names, mut xs) = lt.numeric_features(Some(lc))?;
    let mut pool_x = select_columns(&pt, &names)?;

    if matches!(cfg.dataset, Some(DatasetConfig::Csv { .. })) {
        // same statistics as a run: labelled and pool rows together
        let all: Vec<Vec<f64>> = xs.iter().chain(&pool_x).cloned().collect();
        let idx: Vec<usize> = (0..all.len()).collect();
        let z = Standardizer::fit(&names, &all, &idx)?;
        xs = xs.iter().map(|r| z.apply(r)).collect();
        pool_x = pool_x.iter().map(|r| z.apply(r)).collect();
    }
    let spec = cfg.kernel_spec()?;
    let cov = match cfg.dataset {
        Some(DatasetConfig::Preference { .. }) => Covariance::Preference(spec),
        _ => Covariance::Plain(spec),
    };
    let scored = score_once(&cov, cfg.inference, strategy, &xs, &ys, &pool_x, run_seed)?;
    info!("selected pool index {}", scored.chosen);
    write_to(out, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["index", "score", "chosen"]).map_err(|e| CliError::Data(e.to_string()))?;
        for (i, s) in scored.scores.iter().enumerate() {
            let flag = if i == scored.chosen { "1" } else { "0" };
            csv.write_record([i.to_string(), s.to_string(), flag.to_string()])
                .map_err(|e| CliError::Data(e.to_string()))?;
        }
        csv.flush()?;
        Ok(())
    })
}

/// Error of closed-form BALD against the Monte-Carlo gold standard on one
/// random train/pool draw; `None` when the gold scores are all zero.
fn approx_trial(
    data: &LabeledPool,
    cov: &Covariance,
    method: InferenceMethod,
    train_points: usize,
    pool_size: usize,
    gold_samples: usize,
    seed: u64,
) -> Result<Option<f64>, CliError> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng::stream(seed, 7));
    if data.len() <= train_points {
        return Err(CliError::Data(format!("{} rows cannot hold {train_points} training points and a pool", data.len())));
    }
    let train = &idx[..train_points];
    let pool = &idx[train_points..(train_points + pool_size).min(data.len())];
    let post = gp::fit(method, cov, &data.rows(train), &data.labels_at(train))?;
    let pool_x = data.rows(pool);
    let gold = score_pool(&post, &pool_x, AcquisitionKind::BaldMc { n_samples: gold_samples }, seed)?;
    let approx = score_pool(&post, &pool_x, AcquisitionKind::BaldClosed, seed)?;
    match approximation_error_pct(&gold.scores, &approx.scores) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(m)) => {
            warn!("trial skipped: {m}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

type MethodErrors = (InferenceMethod, Vec<(u64, f64)>, usize);

pub fn approx_error(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config, seed, out)?;
    let ae = cfg.approx_error.clone().unwrap_or_default();
    let base_seed = cfg.seeds[0];
    let (data, cov) = prepare_dataset(&cfg, base_seed)?;

    // (method, (trial, error) pairs, skipped trials)
    let mut table: Vec<MethodErrors> = Vec::new();
    for &method in &ae.methods {
        let results: Vec<(u64, Option<f64>)> = (0..ae.trials as u64)
            .into_par_iter()
            .map(|t| {
                let s = rng::derive_seed(base_seed, t);
                approx_trial(&data, &cov, method, ae.train_points, ae.pool_size, ae.gold_samples, s).map(|v| (t, v))
            })
            .collect::<Result<_, _>>()?;
        let skipped = results.iter().filter(|r| r.1.is_none()).count();
        let errors = results.into_iter().filter_map(|(t, v)| v.map(|v| (t, v))).collect();
        table.push((method, errors, skipped));
    }

    let method_name = |m: InferenceMethod| match m {
        InferenceMethod::Ep => "ep",
        InferenceMethod::Laplace => "laplace",
    };
    std::fs::create_dir_all(&cfg.output_dir)?;
    write_atomic(&cfg.output_dir.join("approx_error.csv"), |w| {
        writeln!(w, "method,trials,skipped,mean_pct,sd_pct")?;
        for (m, errs, skipped) in &table {
            let vals: Vec<f64> = errs.iter().map(|e| e.1).collect();
            let (mean, sd) = mean_sd(&vals).map_or((String::new(), String::new()), |(a, b)| (format!("{a:.6}"), format!("{b:.6}")));
            writeln!(w, "{},{},{skipped},{mean},{sd}", method_name(*m), vals.len())?;
        }
        Ok(())
    })?;
    write_atomic(&cfg.output_dir.join("approx_error_trials.csv"), |w| {
        writeln!(w, "method,trial,error_pct")?;
        for (m, errs, _) in &table {
            for (t, e) in errs {
                writeln!(w, "{},{t},{e}", method_name(*m))?;
            }
        }
        Ok(())
    })?;

    println!("method    trials  mean_pct   sd_pct");
    let mut means = Vec::new();
    for (m, errs, _) in &table {
        let vals: Vec<f64> = errs.iter().map(|e| e.1).collect();
        if let Some((mean, sd)) = mean_sd(&vals) {
            println!("{:<9} {:>6}  {mean:>8.4}  {sd:>7.4}", method_name(*m), vals.len());
            means.push((*m, mean));
        }
    }
    let ep = means.iter().find(|m| m.0 == InferenceMethod::Ep).map(|m| m.1);
    let la = means.iter().find(|m| m.0 == InferenceMethod::Laplace).map(|m| m.1);
    if let (Some(ep), Some(la)) = (ep, la) {
        let verdict = if la >= ep { "Laplace >= EP" } else { "Laplace < EP" };
        println!("comparison: {verdict} ({la:.4}% vs {ep:.4}%)");
    }
    Ok(())
}

pub fn synth(name: SyntheticName, n: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let pool = make_synthetic(name, n, seed)?;
    write_to(out, |w| Ok(pool.write_csv(w)?))
}

pub fn prefgen(input: &Path, target_column: Option<&str>, n_pairs: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    if n_pairs == 0 {
        return Err(CliError::Config("--n-pairs must be >= 1".into()));
    }
    let (items, targets) = preference_items(input, target_column, false)?;
    let task = make_preference_task(&items, &targets, n_pairs, seed)?;
    write_to(out, |w| Ok(task.write_csv(w)?))
}
