//! Datasets: CSV ingestion, synthetic benchmarks, preference tasks.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::label::Label;
use crate::rng;

/// Disjoint index sets into a [`LabeledPool`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub seed: Vec<usize>,
    pub pool: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    fn validate(&self, n: usize) -> Result<()> {
        let mut seen = HashSet::new();
        for &i in self.seed.iter().chain(&self.pool).chain(&self.test) {
            if i >= n {
                return Err(invalid(format!("split index {i} out of range for {n} rows")));
            }
            if !seen.insert(i) {
                return Err(invalid(format!("index {i} appears in more than one split")));
            }
        }
        Ok(())
    }

    /// Seed and pool indices: the rows statistics are fitted on.
    pub fn train(&self) -> impl Iterator<Item = usize> + '_ {
        self.seed.iter().chain(&self.pool).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub n_seed_points: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.5, n_seed_points: 2, seed: 0 }
    }
}

/// Feature matrix with binary labels, partitioned into seed, pool and test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool {
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
    feature_names: Vec<String>,
    split: Split,
    provenance: String,
}

impl LabeledPool {
    /// All rows start in the pool.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<Label>,
        feature_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Data(format!("{} rows but {} labels", features.len(), labels.len())));
        }
        let d = feature_names.len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Data(format!("row {i} has {} features, expected {d}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} has a non-finite feature")));
            }
        }
        let split = Split { pool: (0..features.len()).collect(), ..Default::default() };
        Ok(Self { features, labels, feature_names, split, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.features[i].clone()).collect()
    }

    pub fn labels_at(&self, idx: &[usize]) -> Vec<Label> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn with_explicit_split(mut self, split: Split) -> Result<Self> {
        split.validate(self.len())?;
        self.split = split;
        Ok(self)
    }

    /// Shuffles rows into test and train parts, then draws the seed set
    /// from the train part with at least one row of each class present.
    pub fn with_split(self, cfg: SplitConfig) -> Result<Self> {
        if !(0.0..1.0).contains(&cfg.test_fraction) {
            return Err(invalid(format!("test fraction must lie in [0, 1), got {}", cfg.test_fraction)));
        }
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(cfg.seed, 1));
        let n_test = (n as f64 * cfg.test_fraction).round() as usize;
        let (test, train) = order.split_at(n_test);
        if cfg.n_seed_points > train.len() {
            return Err(Error::Data(format!(
                "{} seed points requested but only {} training rows",
                cfg.n_seed_points,
                train.len()
            )));
        }
        let mut seed = Vec::with_capacity(cfg.n_seed_points);
        for class in [Label::Positive, Label::Negative] {
            if seed.len() < cfg.n_seed_points {
                if let Some(&i) = train.iter().find(|&&i| self.labels[i] == class) {
                    seed.push(i);
                }
            }
        }
        for &i in train {
            if seed.len() >= cfg.n_seed_points {
                break;
            }
            if !seed.contains(&i) {
                seed.push(i);
            }
        }
        let pool = train.iter().copied().filter(|i| !seed.contains(i)).collect();
        let split = Split { seed, pool, test: test.to_vec() };
        self.with_explicit_split(split)
    }

    /// Z-scores every column with mean and (population) standard deviation
    /// computed over the seed and pool rows. Columns constant on those rows
    /// are dropped; their names are returned.
    pub fn standardize(&mut self) -> Result<Vec<String>> {
        let train: Vec<usize> = self.split.train().collect();
        let z = Standardizer::fit(&self.feature_names, &self.features, &train)?;
        for row in &mut self.features {
            *row = z.apply(row);
        }
        self.feature_names = z.kept_names(&self.feature_names);
        Ok(z.dropped)
    }

    /// Writes `feature..., label` rows with labels as `-1`/`1`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.feature_names.clone();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push((label.sign() as i8).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-column z-scoring fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    keep: Vec<usize>,
    stats: Vec<(f64, f64)>,
    /// Names of columns constant on the fitting rows.
    pub dropped: Vec<String>,
}

impl Standardizer {
    /// Population mean and standard deviation of each column over `fit_rows`.
    pub fn fit(names: &[String], rows: &[Vec<f64>], fit_rows: &[usize]) -> Result<Self> {
        if fit_rows.is_empty() {
            return Err(Error::Data("no rows to standardize with".into()));
        }
        let m = fit_rows.len() as f64;
        let mut keep = Vec::new();
        let mut stats = Vec::new();
        let mut dropped = Vec::new();
        for (c, name) in names.iter().enumerate() {
            let mean = fit_rows.iter().map(|&i| rows[i][c]).sum::<f64>() / m;
            let sd = (fit_rows.iter().map(|&i| (rows[i][c] - mean).powi(2)).sum::<f64>() / m).sqrt();
            if sd <= 1e-12 * mean.abs().max(1.0) {
                warn!("dropping constant feature column '{name}'");
                dropped.push(name.clone());
            } else {
                keep.push(c);
                stats.push((mean, sd));
            }
        }
        if keep.is_empty() {
            return Err(Error::Data("every feature column is constant".into()));
        }
        Ok(Self { keep, stats, dropped })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        self.keep.iter().zip(&self.stats).map(|(&c, (mean, sd))| (row[c] - mean) / sd).collect()
    }

    pub fn kept_names(&self, names: &[String]) -> Vec<String> {
        self.keep.iter().map(|&c| names[c].clone()).collect()
    }
}

/// A CSV file with a header row, held as strings.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Data(format!("file not found: {}", path.display())));
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("no column named '{name}'")))
    }

    /// Parses every column except `skip` as numbers.
    pub fn numeric_features(&self, skip: Option<usize>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let cols: Vec<usize> = (0..self.headers.len()).filter(|&c| Some(c) != skip).collect();
        let names = cols.iter().map(|&c| self.headers[c].clone()).collect();
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                cols.iter()
                    .map(|&c| {
                        let cell = &row[c];
                        cell.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| {
                                Error::Data(format!(
                                    "row {} column '{}': non-numeric value '{cell}'",
                                    r + 2,
                                    self.headers[c]
                                ))
                            })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok((names, rows))
    }
}

/// Maps the two label tokens of `column` to `±1`, `positive_token` to `+1`.
pub fn parse_labels(table: &CsvTable, column: usize, positive_token: &str) -> Result<Vec<Label>> {
    let tokens: HashSet<&str> = table.rows.iter().map(|r| r[column].as_str()).collect();
    if tokens.len() != 2 {
        let mut t: Vec<_> = tokens.into_iter().collect();
        t.sort_unstable();
        return Err(Error::Data(format!("label column must have exactly two classes, found {t:?}")));
    }
    if !tokens.contains(positive_token) {
        return Err(Error::Data(format!("positive label '{positive_token}' does not occur")));
    }
    Ok(table
        .rows
        .iter()
        .map(|r| if r[column] == positive_token { Label::Positive } else { Label::Negative })
        .collect())
}

/// Reads a labelled CSV, splits it under `split`, and standardizes features
/// with seed+pool statistics.
pub fn load_csv(path: &Path, label_column: &str, positive_token: &str, split: SplitConfig) -> Result<LabeledPool> {
    load_csv_pair(path, label_column, positive_token, None, split)
}

/// As [`load_csv`]; with `negative_token` set, rows of any other class are
/// discarded first (reducing a multiclass file to one class pair).
pub fn load_csv_pair(
    path: &Path,
    label_column: &str,
    positive_token: &str,
    negative_token: Option<&str>,
    split: SplitConfig,
) -> Result<LabeledPool> {
    let mut table = CsvTable::read(path)?;
    let lc = table.column(label_column)?;
    if let Some(neg) = negative_token {
        table.rows.retain(|r| r[lc] == positive_token || r[lc] == neg);
    }
    let labels = parse_labels(&table, lc, positive_token)?;
    let (names, features) = table.numeric_features(Some(lc))?;
    let mut pool = LabeledPool::new(features, labels, names, path.display().to_string())?.with_split(split)?;
    pool.standardize()?;
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticName {
    BlockInMiddle,
    BlockInCorner,
    Checkerboard,
}

impl fmt::Display for SyntheticName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticName::BlockInMiddle => "block_in_middle",
            SyntheticName::BlockInCorner => "block_in_corner",
            SyntheticName::Checkerboard => "checkerboard",
        })
    }
}

impl FromStr for SyntheticName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block_in_middle" => Ok(SyntheticName::BlockInMiddle),
            "block_in_corner" => Ok(SyntheticName::BlockInCorner),
            "checkerboard" => Ok(SyntheticName::Checkerboard),
            other => Err(invalid(format!("unknown synthetic dataset '{other}'"))),
        }
    }
}

/// Geometry of the synthetic benchmarks. Coordinates are in a [-4, 4]² frame.
pub mod geometry {
    /// Negative class: uniform box left of the boundary x = 0.
    pub const NEG_BOX: [(f64, f64); 2] = [(-3.0, 0.0), (-3.0, 3.0)];
    /// Positive class: uniform box right of the boundary.
    pub const POS_BOX: [(f64, f64); 2] = [(0.0, 3.0), (-3.0, 3.0)];
    /// Label-noise block straddling the boundary.
    pub const NOISE_BOX: [(f64, f64); 2] = [(-0.75, 0.75), (-0.75, 0.75)];
    /// Dense block of positives far from the boundary.
    pub const CORNER_BOX: [(f64, f64); 2] = [(3.25, 3.75), (3.25, 3.75)];
    /// Fraction of points placed in the noise or corner block.
    pub const BLOCK_FRACTION: f64 = 0.25;
    /// Checkerboard: cells per side over [-4, 4]².
    pub const BOARD_CELLS: usize = 4;
    /// Side of each square island as a fraction of the cell width.
    pub const ISLAND_FILL: f64 = 0.8;
}

fn sample_box<R: Rng>(rng: &mut R, b: [(f64, f64); 2]) -> Vec<f64> {
    vec![rng.random_range(b[0].0..b[0].1), rng.random_range(b[1].0..b[1].1)]
}

/// Where a synthetic point came from; used by tests and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Negative,
    Positive,
    Block,
    Cell(usize, usize),
}

/// The checkerboard cell containing `x`, if inside the board.
pub fn checkerboard_cell(x: &[f64]) -> Option<(usize, usize)> {
    let width = 8.0 / geometry::BOARD_CELLS as f64;
    let cx = ((x[0] + 4.0) / width).floor();
    let cy = ((x[1] + 4.0) / width).floor();
    let max = geometry::BOARD_CELLS as f64;
    if (0.0..max).contains(&cx) && (0.0..max).contains(&cy) {
        Some((cx as usize, cy as usize))
    } else {
        None
    }
}

pub fn checkerboard_label(cell: (usize, usize)) -> Label {
    if (cell.0 + cell.1).is_multiple_of(2) {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Points, labels and regions of a synthetic dataset.
pub type SyntheticPoints = (Vec<Vec<f64>>, Vec<Label>, Vec<Region>);

/// Generates a synthetic dataset without splitting it.
pub fn synthetic_points(name: SyntheticName, n: usize, seed: u64) -> Result<SyntheticPoints> {
    if n < 40 {
        return Err(invalid(format!("synthetic datasets need n >= 40, got {n}")));
    }
    let mut rng = rng::stream(seed, 2);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    match name {
        SyntheticName::BlockInMiddle | SyntheticName::BlockInCorner => {
            let n_block = (n as f64 * geometry::BLOCK_FRACTION).round() as usize;
            let n_rest = n - n_block;
            for i in 0..n_rest {
                let (b, l, r) = if i % 2 == 0 {
                    (geometry::POS_BOX, Label::Positive, Region::Positive)
                } else {
                    (geometry::NEG_BOX, Label::Negative, Region::Negative)
                };
                xs.push(sample_box(&mut rng, b));
                ys.push(l);
                regions.push(r);
            }
            if name == SyntheticName::BlockInMiddle {
                // exactly balanced labels, randomly assigned
                let mut block_labels: Vec<Label> = (0..n_block)
                    .map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative })
                    .collect();
                block_labels.shuffle(&mut rng);
                for l in block_labels {
                    xs.push(sample_box(&mut rng, geometry::NOISE_BOX));
                    ys.push(l);
                    regions.push(Region::Block);
                }
            } else {
                for _ in 0..n_block {
                    xs.push(sample_box(&mut rng, geometry::CORNER_BOX));
                    ys.push(Label::Positive);
                    regions.push(Region::Block);
                }
            }
        }
        SyntheticName::Checkerboard => {
            let cells = geometry::BOARD_CELLS;
            let width = 8.0 / cells as f64;
            for i in 0..n {
                let cell = (i % cells, (i / cells) % cells);
                let centre = [-4.0 + (cell.0 as f64 + 0.5) * width, -4.0 + (cell.1 as f64 + 0.5) * width];
                let half = 0.5 * geometry::ISLAND_FILL * width;
                xs.push(vec![
                    centre[0] + rng.random_range(-half..half),
                    centre[1] + rng.random_range(-half..half),
                ]);
                ys.push(checkerboard_label(cell));
                regions.push(Region::Cell(cell.0, cell.1));
            }
        }
    }
    Ok((xs, ys, regions))
}

/// A synthetic benchmark, split 50/50 with two seed points under `seed`.
pub fn make_synthetic(name: SyntheticName, n: usize, seed: u64) -> Result<LabeledPool> {
    make_synthetic_split(name, n, SplitConfig { seed, ..Default::default() })
}

pub fn make_synthetic_split(name: SyntheticName, n: usize, split: SplitConfig) -> Result<LabeledPool> {
    let (xs, ys, _) = synthetic_points(name, n, split.seed)?;
    LabeledPool::new(xs, ys, vec!["x0".into(), "x1".into()], format!("synthetic:{name}:n={n}:seed={}", split.seed))?
        .with_split(split)
}

/// Pairwise comparisons derived from regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDataset {
    pub item_features: Vec<Vec<f64>>,
    /// `(i, j)`: compare item `i` with item `j`.
    pub pairs: Vec<(usize, usize)>,
    /// `Positive` iff item `i` is preferred (has the larger target).
    pub labels: Vec<Label>,
}

impl PreferenceDataset {
    /// Concatenated `[u, v]` feature row for pair `k`.
    pub fn pair_row(&self, k: usize) -> Vec<f64> {
        let (i, j) = self.pairs[k];
        let mut row = self.item_features[i].clone();
        row.extend_from_slice(&self.item_features[j]);
        row
    }

    pub fn to_labeled_pool(&self, provenance: impl Into<String>) -> Result<LabeledPool> {
        let d = self.item_features.first().map_or(0, Vec::len);
        let names = (0..d).map(|c| format!("u{c}")).chain((0..d).map(|c| format!("v{c}"))).collect();
        let rows = (0..self.pairs.len()).map(|k| self.pair_row(k)).collect();
        LabeledPool::new(rows, self.labels.clone(), names, provenance)
    }

    /// Writes `i, j, u..., v..., label` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.item_features.first().map_or(0, Vec::len);
        let mut header = vec!["i".to_string(), "j".to_string()];
        header.extend((0..d).map(|c| format!("u{c}")));
        header.extend((0..d).map(|c| format!("v{c}")));
        header.push("label".into());
        w.write_record(&header)?;
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let mut rec = vec![i.to_string(), j.to_string()];
            rec.extend(self.pair_row(k).iter().map(|v| v.to_string()));
            rec.push((self.labels[k].sign() as i8).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples `n_pairs` distinct unordered item pairs with unequal targets;
/// the orientation of each pair is random.
pub fn make_preference_task(
    features: &[Vec<f64>],
    targets: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Result<PreferenceDataset> {
    let n = features.len();
    if n != targets.len() {
        return Err(invalid(format!("{n} items but {} targets", targets.len())));
    }
    if n < 2 {
        return Err(invalid("need at least two items"));
    }
    if n_pairs == 0 {
        return Err(invalid("n_pairs must be >= 1"));
    }
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| targets[i] != targets[j])
        .collect();
    if candidates.len() < n_pairs {
        return Err(Error::Data(format!(
            "only {} item pairs with distinct targets, {n_pairs} requested",
            candidates.len()
        )));
    }
    let mut rng = rng::stream(seed, 3);
    let (chosen, _) = candidates.partial_shuffle(&mut rng, n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut labels = Vec::with_capacity(n_pairs);
    for &(a, b) in chosen.iter() {
        let (i, j) = if rng.random::<bool>() { (a, b) } else { (b, a) };
        pairs.push((i, j));
        labels.push(if targets[i] > targets[j] { Label::Positive } else { Label::Negative });
    }
    Ok(PreferenceDataset { item_features: features.to_vec(), pairs, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_csv_standardizes_exactly() {
        let f = write_tmp("a,b,class\n1,10,M\n2,10,B\n3,20,M\n6,40,B\n");
        let split = SplitConfig { test_fraction: 0.0, n_seed_points: 2, seed: 0 };
        let pool = load_csv(f.path(), "class", "M", split).unwrap();
        // column a: mean 3, population sd sqrt(3.5); column b: mean 20, sd sqrt(150)
        let sa = 3.5f64.sqrt();
        let sb = 150f64.sqrt();
        let expect = [
            [(1.0 - 3.0) / sa, (10.0 - 20.0) / sb],
            [(2.0 - 3.0) / sa, (10.0 - 20.0) / sb],
            [(3.0 - 3.0) / sa, 0.0],
            [(6.0 - 3.0) / sa, (40.0 - 20.0) / sb],
        ];
        for (row, e) in pool.features().iter().zip(expect) {
            assert!((row[0] - e[0]).abs() < 1e-12 && (row[1] - e[1]).abs() < 1e-12);
        }
        assert_eq!(pool.labels(), &[Label::Positive, Label::Negative, Label::Positive, Label::Negative]);
        assert_eq!(pool.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn load_csv_drops_constant_column() {
        let f = write_tmp("a,c,b,y\n1,5,2,x\n2,5,1,y\n3,5,7,x\n4,5,0,y\n");
        let split = SplitConfig { test_fraction: 0.0, ..Default::default() };
        let pool = load_csv(f.path(), "y", "x", split).unwrap();
        assert_eq!(pool.dim(), 2);
        assert_eq!(pool.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn load_csv_errors() {
        let split = SplitConfig::default();
        assert!(matches!(load_csv(Path::new("/nonexistent/file.csv"), "y", "1", split), Err(Error::Data(_))));
        let f = write_tmp("a,y\n1,p\nfoo,n\n3,p\n4,n\n");
        assert!(load_csv(f.path(), "y", "p", split).is_err());
        let f = write_tmp("a,y\n1,p\n2,n\n3,q\n4,n\n");
        assert!(load_csv(f.path(), "y", "p", split).is_err());
        let f = write_tmp("a,y\n1,p\n2,n\n3,p\n4,n\n");
        assert!(load_csv(f.path(), "label", "p", split).is_err());
        assert!(load_csv(f.path(), "y", "z", split).is_err());
    }

    #[test]
    fn class_pair_filter() {
        let f = write_tmp("a,y\n1,E\n2,F\n3,D\n4,E\n5,F\n");
        let split = SplitConfig { test_fraction: 0.0, ..Default::default() };
        assert!(load_csv(f.path(), "y", "E", split).is_err());
        let pool = load_csv_pair(f.path(), "y", "E", Some("F"), split).unwrap();
        assert_eq!(pool.len(), 4);
        assert_eq!(pool.labels().iter().filter(|&&l| l == Label::Positive).count(), 2);
    }

    #[test]
    fn standardizer_uses_only_fitting_rows() {
        let names = vec!["a".to_string()];
        let rows = vec![vec![0.0], vec![2.0], vec![100.0]];
        let z = Standardizer::fit(&names, &rows, &[0, 1]).unwrap();
        assert_eq!(z.apply(&rows[2]), vec![99.0]);
        assert!(Standardizer::fit(&names, &rows, &[]).is_err());
    }

    #[test]
    fn standardized_train_rows_have_zero_mean_unit_sd() {
        let mut pool = make_synthetic(SyntheticName::BlockInCorner, 300, 4).unwrap();
        pool.standardize().unwrap();
        let train: Vec<usize> = pool.split().train().collect();
        for c in 0..pool.dim() {
            let m = train.len() as f64;
            let mean = train.iter().map(|&i| pool.features()[i][c]).sum::<f64>() / m;
            let sd = (train.iter().map(|&i| (pool.features()[i][c] - mean).powi(2)).sum::<f64>() / m).sqrt();
            assert!(mean.abs() < 1e-10);
            assert!((sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn splits_are_disjoint_and_stratified() {
        for seed in 0..20 {
            let pool = make_synthetic(SyntheticName::Checkerboard, 100, seed).unwrap();
            let s = pool.split();
            assert_eq!(s.seed.len() + s.pool.len() + s.test.len(), 100);
            assert_eq!(s.test.len(), 50);
            s.validate(100).unwrap();
            let seed_labels: HashSet<Label> = s.seed.iter().map(|&i| pool.labels()[i]).collect();
            assert_eq!(seed_labels.len(), 2);
        }
        let bad = Split { seed: vec![0], pool: vec![0, 1], test: vec![] };
        assert!(make_synthetic(SyntheticName::Checkerboard, 40, 0).unwrap().with_explicit_split(bad).is_err());
    }

    #[test]
    fn noisy_block_is_balanced() {
        let (_, ys, regions) = synthetic_points(SyntheticName::BlockInMiddle, 400, 9).unwrap();
        let block: Vec<Label> = ys.iter().zip(&regions).filter(|(_, r)| **r == Region::Block).map(|(l, _)| *l).collect();
        let frac = block.iter().filter(|&&l| l == Label::Positive).count() as f64 / block.len() as f64;
        assert!((0.4..=0.6).contains(&frac));
        assert_eq!(block.len(), 100);
    }

    #[test]
    fn corner_block_is_pure() {
        let (xs, ys, regions) = synthetic_points(SyntheticName::BlockInCorner, 200, 1).unwrap();
        for ((x, y), r) in xs.iter().zip(&ys).zip(&regions) {
            if *r == Region::Block {
                assert_eq!(*y, Label::Positive);
                assert!(x[0] > 3.0 && x[1] > 3.0);
            }
        }
        assert!(regions.contains(&Region::Block));
    }

    #[test]
    fn checkerboard_parity_and_balance() {
        let (xs, ys, _) = synthetic_points(SyntheticName::Checkerboard, 400, 7).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let cell = checkerboard_cell(x).unwrap();
            assert_eq!(*y, checkerboard_label(cell));
        }
        let pos = ys.iter().filter(|&&l| l == Label::Positive).count() as f64 / 400.0;
        assert!((0.45..=0.55).contains(&pos));
    }

    #[test]
    fn synthetic_is_deterministic_and_validated() {
        let a = make_synthetic(SyntheticName::BlockInMiddle, 80, 3).unwrap();
        let b = make_synthetic(SyntheticName::BlockInMiddle, 80, 3).unwrap();
        assert_eq!(a, b);
        assert!(make_synthetic(SyntheticName::BlockInMiddle, 39, 3).is_err());
        assert!("checkers".parse::<SyntheticName>().is_err());
        assert_eq!("block_in_corner".parse::<SyntheticName>().unwrap(), SyntheticName::BlockInCorner);
    }

    #[test]
    fn preference_pairs() {
        let feats = vec![vec![0.0], vec![1.0]];
        let task = make_preference_task(&feats, &[3.0, 1.0], 1, 0).unwrap();
        assert_eq!(task.pairs.len(), 1);
        let (i, j) = task.pairs[0];
        let expect = if (i, j) == (0, 1) { Label::Positive } else { Label::Negative };
        assert_eq!(task.labels[0], expect);
        assert!(make_preference_task(&feats, &[3.0, 1.0], 2, 0).is_err());
        assert!(make_preference_task(&feats, &[1.0, 1.0], 1, 0).is_err());
        assert!(make_preference_task(&feats[..1], &[1.0], 1, 0).is_err());
    }

    #[test]
    fn preference_task_invariants() {
        let feats: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let targets: Vec<f64> = (0..100).map(|i| ((i * 37) % 50) as f64).collect();
        let a = make_preference_task(&feats, &targets, 500, 5).unwrap();
        let b = make_preference_task(&feats, &targets, 500, 5).unwrap();
        assert_eq!(a, b);
        let mut seen = HashSet::new();
        for (&(i, j), &l) in a.pairs.iter().zip(&a.labels) {
            assert_ne!(i, j);
            assert!(seen.insert((i.min(j), i.max(j))));
            assert_ne!(targets[i], targets[j]);
            assert_eq!(l == Label::Positive, targets[i] > targets[j]);
            // reversing the comparison flips the label
            assert_eq!(l.flipped() == Label::Positive, targets[j] > targets[i]);
        }
        let pool = a.to_labeled_pool("pref").unwrap();
        assert_eq!(pool.dim(), 4);
        assert_eq!(pool.features()[0], a.pair_row(0));
    }

    #[test]
    fn csv_export_round_trips_shape() {
        let pool = make_synthetic(SyntheticName::Checkerboard, 40, 1).unwrap();
        let mut buf = Vec::new();
        pool.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 41);
        assert!(text.starts_with("x0,x1,label\n"));
    }
}
