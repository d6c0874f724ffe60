//! Synthetic two-region data, CSV ingestion and train/test splitting.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, so streams are reproducible across platforms.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::math::{mean, sample_sd};
use crate::types::{Dataset, Labels, Task};

/// Region tag of the Gaussian-cloud subpopulation with a linear rule.
pub const REGION_LINEAR: i64 = 0;
/// Region tag of the disc subpopulation with a radial rule.
pub const REGION_CIRCULAR: i64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Offset `t`: the linear cloud sits at `(−t, 0)`, the disc at `(t, 0)`.
    pub offset: f64,
    /// Covariance of the linear cloud is `cov_scale · I`.
    pub cov_scale: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_test: 500,
            offset: 1.0,
            cov_scale: 0.1,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train < 2 || self.n_test < 2 {
            return Err(Error::Validation("n_train and n_test must be >= 2".into()));
        }
        if !(self.offset > 0.0 && self.offset.is_finite()) {
            return Err(Error::Validation("offset t must be > 0".into()));
        }
        if !(self.cov_scale > 0.0 && self.cov_scale.is_finite()) {
            return Err(Error::Validation("cov_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Label of a linear-region point: `1{x1 + x2 > −t}`.
pub fn linear_rule(x: [f64; 2], t: f64) -> usize {
    usize::from(x[0] + x[1] > -t)
}

/// Label of a circular-region point: `1{‖x − (t, 0)‖ < 1}`.
pub fn circular_rule(x: [f64; 2], t: f64) -> usize {
    usize::from((x[0] - t).hypot(x[1]) < 1.0)
}

fn draw_split(n: usize, cfg: &SimulationConfig, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let t = cfg.offset;
    let scale = cfg.cov_scale.sqrt();
    let n_linear = n / 2;
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    for i in 0..n {
        let x = if i < n_linear {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let x = [-t + scale * z0, scale * z1];
            labels.push(linear_rule(x, t));
            regions.push(REGION_LINEAR);
            x
        } else {
            let u: f64 = rng.random_range(0.0..2.0);
            let theta: f64 = rng.random_range(0.0..2.0 * PI);
            let r = u.sqrt();
            let x = [t + r * theta.cos(), r * theta.sin()];
            // the label is recomputed from the stored coordinates so it is
            // reproducible from features alone
            labels.push(circular_rule(x, t));
            regions.push(REGION_CIRCULAR);
            x
        };
        features[[i, 0]] = x[0];
        features[[i, 1]] = x[1];
    }
    Dataset::with_names(
        features,
        Labels::Classes {
            values: labels,
            num_classes: 2,
        },
        vec!["x1".into(), "x2".into()],
        Some(regions),
    )
}

/// Train and test sets of the two-region problem. The first `floor(n/2)`
/// rows of each split are linear-region points. Train uses ChaCha8 stream 0
/// and test stream 1 of the same seed, so the two are independent.
pub fn simulate_two_region(cfg: &SimulationConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let mut train_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_rng.set_stream(0);
    let mut test_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    test_rng.set_stream(1);
    Ok((
        draw_split(cfg.n_train, cfg, &mut train_rng)?,
        draw_split(cfg.n_test, cfg, &mut test_rng)?,
    ))
}

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_col: String,
    pub task: Task,
    /// `None` uses every column except the label and region columns.
    #[serde(default)]
    pub feature_cols: Option<Vec<String>>,
    #[serde(default)]
    pub region_col: Option<String>,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema(format!("column '{name}' not found")))
}

/// Reads a comma-separated file with a header row. Numbers are parsed
/// with `.` as decimal point regardless of locale. Class labels are mapped
/// to dense indices in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Format(format!("{}: empty file", path.display())));
    }
    let label = column_index(&headers, &schema.label_col)?;
    let region = schema
        .region_col
        .as_deref()
        .map(|c| column_index(&headers, c))
        .transpose()?;
    let feature_names: Vec<String> = match &schema.feature_cols {
        Some(cols) => cols.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label && Some(*i) != region)
            .map(|(_, h)| h.trim().to_string())
            .collect(),
    };
    if feature_names.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }
    let feature_idx = feature_names
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::new();
    let mut real_labels = Vec::new();
    let mut class_labels = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut regions = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // data rows are numbered from 1; the header is line 1 of the file
        let row = r + 1;
        let record = record.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        let cell = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let number = |i: usize| -> Result<f64> {
            let s = cell(i);
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Format(format!("row {row}: cannot parse '{s}' in column '{}'", &headers[i]))
                })
        };
        for &c in &feature_idx {
            values.push(number(c)?);
        }
        match schema.task {
            Task::Regression => real_labels.push(number(label)?),
            Task::Classification => {
                let key = cell(label).to_string();
                if key.is_empty() {
                    return Err(Error::Format(format!("row {row}: empty label")));
                }
                let next = class_ids.len();
                class_labels.push(*class_ids.entry(key).or_insert(next));
            }
        }
        if let Some(c) = region {
            let s = cell(c);
            regions.push(s.parse::<i64>().map_err(|_| {
                Error::Format(format!("row {row}: region tag '{s}' is not an integer"))
            })?);
        }
    }
    let n = values.len() / feature_idx.len();
    if n == 0 {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    let features = Array2::from_shape_vec((n, feature_idx.len()), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    let labels = match schema.task {
        Task::Regression => Labels::Real(real_labels),
        Task::Classification => {
            if class_ids.len() < 2 {
                return Err(Error::Format("classification label has fewer than 2 classes".into()));
            }
            Labels::Classes {
                values: class_labels,
                num_classes: class_ids.len(),
            }
        }
    };
    Dataset::with_names(features, labels, feature_names, region.map(|_| regions))
}

/// Writes features, a `label` column and, if present, a `region` column.
/// Values use Rust's shortest round-trip formatting, so reading the file
/// back reproduces every feature bit for bit.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = data.feature_names().to_vec();
    header.push("label".into());
    if data.regions().is_some() {
        header.push("region".into());
    }
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(match data.labels() {
            Labels::Classes { values, .. } => values[i].to_string(),
            Labels::Real(v) => v[i].to_string(),
        });
        if let Some(r) = data.regions() {
            rec.push(r[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Schema matching files produced by [`write_csv`].
pub fn written_schema(data: &Dataset) -> CsvSchema {
    CsvSchema {
        label_col: "label".into(),
        task: data.task(),
        feature_cols: Some(data.feature_names().to_vec()),
        region_col: data.regions().map(|_| "region".into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub stratify: bool,
    /// Quantile bins of a regression target used as strata.
    pub bins: usize,
    /// Downsample training classes to the size of the smallest one.
    pub balance_train: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            stratify: true,
            bins: 12,
            balance_train: false,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Validation("test_fraction must lie in (0, 1)".into()));
        }
        if self.bins == 0 {
            return Err(Error::Validation("bins must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// Sorted row indices of each part in the source dataset.
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    /// Fallbacks taken while stratifying.
    pub notes: Vec<String>,
}

/// Quantile-bin strata of a real target; bins with fewer than 2 rows are
/// merged into their neighbour.
fn quantile_strata(y: &[f64], bins: usize, notes: &mut Vec<String>) -> Vec<Vec<usize>> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let bins = bins.min(n);
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); bins];
    for (rank, &i) in order.iter().enumerate() {
        strata[rank * bins / n].push(i);
    }
    let mut merged: Vec<Vec<usize>> = Vec::new();
    for s in strata {
        match merged.last_mut() {
            Some(prev) if prev.len() < 2 || s.len() < 2 => {
                if s.len() < 2 {
                    notes.push(format!("quantile bin of size {} merged into its neighbour", s.len()));
                }
                prev.extend(s);
            }
            _ => merged.push(s),
        }
    }
    if merged.len() > 1 && merged.last().is_some_and(|s| s.len() < 2) {
        let last = merged.pop().expect("nonempty");
        merged.last_mut().expect("nonempty").extend(last);
    }
    merged
}

/// Allocates `total` items across groups proportionally to `sizes` by the
/// largest-remainder rule; ties go to the earlier group.
fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let mut alloc: Vec<usize> = sizes.iter().map(|s| s * total / n).collect();
    let mut rem: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(g, s)| ((s * total) % n, g))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = total - alloc.iter().sum::<usize>();
    for &(_, g) in rem.iter().take(short) {
        alloc[g] += 1;
    }
    alloc
}

/// Deterministic train/test split. Classification stratifies on the label;
/// regression on quantile bins of the target. A class with fewer than 2
/// rows switches classification to an unstratified split.
pub fn split(data: &Dataset, cfg: &SplitConfig, seed: u64) -> Result<Split> {
    cfg.validate()?;
    let n = data.n();
    if n < 2 {
        return arg_err("cannot split fewer than 2 rows");
    }
    let n_test = ((n as f64 * cfg.test_fraction).round() as usize).clamp(1, n - 1);
    let mut notes = Vec::new();
    let mut strata: Vec<Vec<usize>> = if !cfg.stratify {
        vec![(0..n).collect()]
    } else {
        match data.labels() {
            Labels::Classes { values, num_classes } => {
                let mut by_class = vec![Vec::new(); *num_classes];
                for (i, &c) in values.iter().enumerate() {
                    by_class[c].push(i);
                }
                by_class.retain(|s| !s.is_empty());
                if by_class.iter().any(|s| s.len() < 2) {
                    notes.push("a class has fewer than 2 rows; split is unstratified".into());
                    vec![(0..n).collect()]
                } else {
                    by_class
                }
            }
            Labels::Real(y) => quantile_strata(y, cfg.bins, &mut notes),
        }
    };
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let quota = largest_remainder(&sizes, n_test);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_idx = Vec::with_capacity(n_test);
    let mut train_idx = Vec::with_capacity(n - n_test);
    for (s, q) in strata.iter_mut().zip(quota) {
        s.shuffle(&mut rng);
        test_idx.extend_from_slice(&s[..q]);
        train_idx.extend_from_slice(&s[q..]);
    }
    if cfg.balance_train {
        match data.labels() {
            Labels::Classes { values, num_classes } => {
                let mut by_class = vec![Vec::new(); *num_classes];
                for &i in &train_idx {
                    by_class[values[i]].push(i);
                }
                let present: Vec<_> = by_class.into_iter().filter(|c| !c.is_empty()).collect();
                let smallest = present.iter().map(Vec::len).min().unwrap_or(0);
                train_idx.clear();
                for mut c in present {
                    c.sort_unstable();
                    c.shuffle(&mut rng);
                    train_idx.extend_from_slice(&c[..smallest]);
                }
                notes.push(format!("training classes downsampled to {smallest} rows each"));
            }
            Labels::Real(_) => notes.push("balance_train ignored for regression".into()),
        }
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train: data.select(&train_idx)?,
        test: data.select(&test_idx)?,
        train_idx,
        test_idx,
        notes,
    })
}

/// Affine standardization fitted on training data. Constant features are
/// centred but not scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub feature_mean: Vec<f64>,
    pub feature_sd: Vec<f64>,
    /// `(mean, sd)` of a regression target, if it is standardized too.
    pub target: Option<(f64, f64)>,
}

impl Standardizer {
    pub fn fit(train: &Dataset, scale_target: bool) -> Result<Self> {
        let mut feature_mean = Vec::with_capacity(train.d());
        let mut feature_sd = Vec::with_capacity(train.d());
        for c in 0..train.d() {
            let col = train.features().column(c).to_vec();
            let sd = sample_sd(&col);
            feature_mean.push(mean(&col));
            feature_sd.push(if sd > 0.0 { sd } else { 1.0 });
        }
        let target = match (scale_target, train.labels()) {
            (true, Labels::Real(y)) => {
                let sd = sample_sd(y);
                Some((mean(y), if sd > 0.0 { sd } else { 1.0 }))
            }
            _ => None,
        };
        Ok(Self {
            feature_mean,
            feature_sd,
            target,
        })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.d() != self.feature_mean.len() {
            return arg_err("standardizer fitted on a different number of features");
        }
        let features = Array2::from_shape_fn(data.features().dim(), |(i, c)| {
            (data.features()[[i, c]] - self.feature_mean[c]) / self.feature_sd[c]
        });
        let labels = match (self.target, data.labels()) {
            (Some((m, s)), Labels::Real(y)) => Labels::Real(y.iter().map(|v| (v - m) / s).collect()),
            _ => data.labels().clone(),
        };
        data.map_parts(features, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn boundary_rules() {
        assert_eq!(linear_rule([-0.5, -0.5], 1.0), 0);
        assert_eq!(linear_rule([-0.5, -0.4], 1.0), 1);
        assert_eq!(circular_rule([1.0, 0.0], 1.0), 1);
        assert_eq!(circular_rule([2.0, 0.0], 1.0), 0);
    }

    #[test]
    fn simulated_labels_follow_rules() {
        let cfg = SimulationConfig { seed: 3, ..SimulationConfig::default() };
        let (train, test) = simulate_two_region(&cfg).unwrap();
        assert_eq!((train.n(), test.n(), train.d()), (1000, 500, 2));
        for data in [&train, &test] {
            let regions = data.regions().unwrap();
            let labels = data.class_labels().unwrap();
            assert_eq!(regions.iter().filter(|r| **r == REGION_LINEAR).count(), data.n() / 2);
            for i in 0..data.n() {
                let x = [data.row(i)[0], data.row(i)[1]];
                let rule = if regions[i] == REGION_LINEAR { linear_rule(x, 1.0) } else { circular_rule(x, 1.0) };
                assert_eq!(labels[i], rule);
            }
        }
        assert_ne!(train.row(0), test.row(0));
    }

    #[test]
    fn odd_sizes_give_circle_the_extra_point() {
        let cfg = SimulationConfig { n_train: 7, n_test: 3, ..SimulationConfig::default() };
        let (train, test) = simulate_two_region(&cfg).unwrap();
        assert_eq!(train.regions().unwrap(), &[0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(test.regions().unwrap(), &[0, 1, 1]);
    }

    #[test]
    fn circular_labels_are_half_ones() {
        let cfg = SimulationConfig { n_train: 8000, n_test: 2, seed: 11, ..SimulationConfig::default() };
        let (train, _) = simulate_two_region(&cfg).unwrap();
        let regions = train.regions().unwrap();
        let labels = train.class_labels().unwrap();
        let circ: Vec<usize> = (0..train.n()).filter(|&i| regions[i] == REGION_CIRCULAR).map(|i| labels[i]).collect();
        let n = circ.len() as f64;
        let p = circ.iter().sum::<usize>() as f64 / n;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n).sqrt(), "proportion {p}");
    }

    #[test]
    fn simulation_is_deterministic_and_validated() {
        let cfg = SimulationConfig { seed: 7, ..SimulationConfig::default() };
        assert_eq!(simulate_two_region(&cfg).unwrap().0, simulate_two_region(&cfg).unwrap().0);
        assert!(simulate_two_region(&SimulationConfig { n_test: 1, ..cfg.clone() }).is_err());
        assert!(simulate_two_region(&SimulationConfig { offset: 0.0, ..cfg }).is_err());
    }

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    fn schema(label: &str, task: Task) -> CsvSchema {
        CsvSchema { label_col: label.into(), task, feature_cols: None, region_col: None }
    }

    #[test]
    fn load_small_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "a,b,y\n1.5,2,cat\n-3e-1,4,dog\n0,0,cat\n");
        let d = load_csv(&p, &schema("y", Task::Classification)).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.class_labels().unwrap(), &[0, 1, 0]);
        assert_eq!(d.row(1).to_vec(), vec![-0.3, 4.0]);
        assert_eq!(d.feature_names(), &["a", "b"]);

        let d = load_csv(
            write_file(&dir, "r.csv", "a,b,y\n1,2,3\n4,5,6\n"),
            &CsvSchema { feature_cols: Some(vec!["b".into()]), ..schema("y", Task::Regression) },
        )
        .unwrap();
        assert_eq!(d.real_labels().unwrap(), &[3.0, 6.0]);
        assert_eq!(d.d(), 1);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write_file(&dir, "bad.csv", "a,y\n1,2\n2,3\nx,4\n");
        match load_csv(&bad, &schema("y", Task::Regression)) {
            Err(Error::Format(msg)) => assert!(msg.contains("row 3"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let p = write_file(&dir, "ok.csv", "a,y\n1,2\n");
        assert!(matches!(load_csv(&p, &schema("z", Task::Regression)), Err(Error::Schema(_))));
        let empty = write_file(&dir, "empty.csv", "");
        assert!(matches!(load_csv(&empty, &schema("y", Task::Regression)), Err(Error::Format(_))));
        let header_only = write_file(&dir, "h.csv", "a,y\n");
        assert!(matches!(load_csv(&header_only, &schema("y", Task::Regression)), Err(Error::Format(_))));
    }

    #[test]
    fn write_read_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (train, _) = simulate_two_region(&SimulationConfig { n_train: 200, seed: 5, ..SimulationConfig::default() }).unwrap();
        let path = dir.path().join("train.csv");
        write_csv(&train, &path).unwrap();
        let back = load_csv(&path, &written_schema(&train)).unwrap();
        assert_eq!(back.features(), train.features());
        assert_eq!(back.regions(), train.regions());
        assert_eq!(back.n(), train.n());
    }

    fn balanced(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        Dataset::new(x, Labels::Classes { values: (0..n).map(|i| i % 2).collect(), num_classes: 2 }).unwrap()
    }

    #[test]
    fn stratified_split_proportions() {
        let data = balanced(1000);
        let s = split(&data, &SplitConfig::default(), 1).unwrap();
        assert_eq!(s.test.n(), 200);
        let p = |d: &Dataset| d.class_labels().unwrap().iter().sum::<usize>() as f64 / d.n() as f64;
        assert!((p(&s.test) - p(&s.train)).abs() <= 1.0 / 200.0);
        let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let data = balanced(101);
        let a = split(&data, &SplitConfig::default(), 9).unwrap();
        let b = split(&data, &SplitConfig::default(), 9).unwrap();
        assert_eq!(a.test_idx, b.test_idx);
        let c = split(&data, &SplitConfig::default(), 10).unwrap();
        assert_ne!(a.test_idx, c.test_idx);
    }

    #[test]
    fn tiny_class_falls_back_to_unstratified() {
        let mut values = vec![0; 20];
        values[3] = 1;
        let data = Dataset::new(Array2::zeros((20, 1)), Labels::Classes { values, num_classes: 2 }).unwrap();
        let s = split(&data, &SplitConfig::default(), 0).unwrap();
        assert_eq!(s.notes.len(), 1);
        assert_eq!(s.test.n(), 4);
    }

    #[test]
    fn regression_quantile_strata() {
        let y: Vec<f64> = (0..120).map(|i| ((i * 37) % 120) as f64).collect();
        let data = Dataset::new(Array2::zeros((120, 1)), Labels::Real(y)).unwrap();
        let s = split(&data, &SplitConfig::default(), 4).unwrap();
        assert_eq!(s.test.n(), 24);
        // 12 bins of 10 rows, two test rows from each
        let mut per_bin = [0usize; 12];
        for v in s.test.real_labels().unwrap() {
            per_bin[*v as usize / 10] += 1;
        }
        assert_eq!(per_bin, [2; 12]);

        let mut notes = Vec::new();
        let strata = quantile_strata(&[1.0, 2.0, 3.0, 4.0, 5.0], 5, &mut notes);
        assert!(strata.iter().all(|s| s.len() >= 2));
        assert_eq!(strata.iter().map(Vec::len).sum::<usize>(), 5);
        assert!(!notes.is_empty());
    }

    #[test]
    fn balancing_downsamples_majority() {
        let values: Vec<usize> = (0..100).map(|i| usize::from(i % 4 == 0)).collect();
        let data = Dataset::new(Array2::zeros((100, 1)), Labels::Classes { values, num_classes: 2 }).unwrap();
        let cfg = SplitConfig { balance_train: true, ..SplitConfig::default() };
        let s = split(&data, &cfg, 2).unwrap();
        let ones = s.train.class_labels().unwrap().iter().sum::<usize>();
        assert_eq!(ones * 2, s.train.n());
    }

    #[test]
    fn largest_remainder_allocation() {
        assert_eq!(largest_remainder(&[5, 5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(largest_remainder(&[500, 500], 200), vec![100, 100]);
    }

    #[test]
    fn standardizer_uses_training_statistics() {
        let x = Array2::from_shape_vec((3, 2), vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap();
        let data = Dataset::new(x, Labels::Real(vec![10.0, 20.0, 30.0])).unwrap();
        let s = Standardizer::fit(&data, true).unwrap();
        let out = s.apply(&data).unwrap();
        assert_eq!(out.features().column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(out.features().column(1).to_vec(), vec![0.0; 3]);
        assert_eq!(out.real_labels().unwrap(), &[-1.0, 0.0, 1.0]);
    }
}
