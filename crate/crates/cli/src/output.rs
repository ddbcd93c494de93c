//! Atomic file output and CSV tables.

use std::io::{BufWriter, Write};
use std::path::Path;

use bald_core::harness::RunSummary;

use crate::CliError;

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CliError::Data(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Writes to `out`, or to stdout when absent.
pub fn write_to<F>(out: Option<&Path>, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match out {
        Some(p) => write_atomic(p, fill),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            fill(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

/// One JSON object per round, then `{"summary": {...}}`.
pub fn write_run_log(w: &mut dyn Write, summary: &RunSummary) -> Result<(), CliError> {
    for r in &summary.records {
        serde_json::to_writer(&mut *w, r).map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(w)?;
    }
    serde_json::to_writer(&mut *w, &serde_json::json!({ "summary": summary }))
        .map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Some((mean, sd))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Rows are rounds (0 = seed set only); two columns per strategy.
pub fn write_learning_curve(
    w: &mut dyn Write,
    groups: &[(String, Vec<RunSummary>)],
    rounds: usize,
    seed_points: usize,
) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["round".to_string(), "cumulative_labels".to_string()];
    for (name, _) in groups {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_sd"));
    }
    csv.write_record(&header).map_err(|e| CliError::Data(e.to_string()))?;
    for round in 0..=rounds {
        let mut rec = vec![round.to_string(), (seed_points + round).to_string()];
        for (_, runs) in groups {
            let accs: Vec<f64> = runs
                .iter()
                .filter_map(|s| {
                    if round == 0 {
                        Some(s.initial_accuracy)
                    } else {
                        s.records.get(round - 1).and_then(|r| r.test_accuracy)
                    }
                })
                .collect();
            let stats = mean_sd(&accs);
            rec.push(fmt_opt(stats.map(|s| s.0)));
            rec.push(fmt_opt(stats.map(|s| s.1)));
        }
        csv.write_record(&rec).map_err(|e| CliError::Data(e.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

/// One row per strategy with the labels-to-97.5%-of-ceiling statistic.
pub fn write_summary(w: &mut dyn Write, groups: &[(String, Vec<RunSummary>)]) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "strategy",
        "runs",
        "reached_97_5",
        "labels_to_97_5_mean",
        "labels_to_97_5_sd",
        "final_accuracy_mean",
        "final_accuracy_sd",
        "ceiling_accuracy_mean",
        "truncated_runs",
    ])
    .map_err(|e| CliError::Data(e.to_string()))?;
    for (name, runs) in groups {
        let reached: Vec<f64> = runs.iter().filter_map(|s| s.labels_to_97_5.map(|v| v as f64)).collect();
        let finals: Vec<f64> = runs.iter().map(|s| s.final_accuracy).collect();
        let ceilings: Vec<f64> = runs.iter().map(|s| s.pool_ceiling_accuracy).collect();
        let l = mean_sd(&reached);
        let f = mean_sd(&finals);
        let c = mean_sd(&ceilings);
        csv.write_record([
            name.clone(),
            runs.len().to_string(),
            reached.len().to_string(),
            fmt_opt(l.map(|s| s.0)),
            fmt_opt(l.map(|s| s.1)),
            fmt_opt(f.map(|s| s.0)),
            fmt_opt(f.map(|s| s.1)),
            fmt_opt(c.map(|s| s.0)),
            runs.iter().filter(|s| s.truncated).count().to_string(),
        ])
        .map_err(|e| CliError::Data(e.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd_values() {
        assert_eq!(mean_sd(&[]), None);
        assert_eq!(mean_sd(&[2.0]), Some((2.0, 0.0)));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, |w| Ok(w.write_all(b"one")?)).unwrap();
        write_atomic(&p, |w| Ok(w.write_all(b"two")?)).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }

    #[test]
    fn failed_fill_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        assert!(write_atomic(&p, |_| Err(CliError::Data("boom".into()))).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
