//! Datasets, synthetic generators and CSV I/O.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::{csv_error, LabeledEvalSet};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

/// Share of samples held out for testing.
pub const TEST_FRACTION: f64 = 0.2;
/// Share of the non-test pool held out for validation (9:1 train/val).
pub const VAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitKind::Train => "train",
            SplitKind::Val => "val",
            SplitKind::Test => "test",
        })
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitKind::Train),
            "val" => Ok(SplitKind::Val),
            "test" => Ok(SplitKind::Test),
            other => Err(Error::param(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded random partition: `TEST_FRACTION` of the samples go to test and
    /// the remainder is split 9:1 into train and validation.
    pub fn random(n: usize, seed: u64) -> Split {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut stream_rng(seed, streams::SPLIT));
        let n_test = (n as f64 * TEST_FRACTION).round() as usize;
        let n_val = ((n - n_test) as f64 * VAL_FRACTION).round() as usize;
        let test = idx[..n_test].to_vec();
        let val = idx[n_test..n_test + n_val].to_vec();
        let train = idx[n_test + n_val..].to_vec();
        Split { train, val, test }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Row-major `n x d`.
    pub features: Vec<f64>,
    pub n_features: usize,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub split_seed: u64,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
        split_seed: u64,
    ) -> Result<Self> {
        if n_features == 0 || features.len() != labels.len() * n_features {
            return Err(Error::Shape(format!(
                "{} feature values for {} samples of dimension {}",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Validation(format!("label {l} outside [0,{n_classes})")));
        }
        let split = Split::random(labels.len(), split_seed);
        Ok(Dataset {
            features,
            n_features,
            labels,
            n_classes,
            split_seed,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn indices(&self, split: SplitKind) -> &[usize] {
        match split {
            SplitKind::Train => &self.split.train,
            SplitKind::Val => &self.split.val,
            SplitKind::Test => &self.split.test,
        }
    }

    pub fn eval_set(&self, split: SplitKind) -> LabeledEvalSet {
        LabeledEvalSet {
            labels: self.indices(split).iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Writes `x0,...,x{d-1},label` with round-trip exact floats.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header: Vec<String> = (0..self.n_features).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a header-row CSV whose last column is an integer class label.
    pub fn load_csv(path: impl AsRef<Path>, split_seed: u64) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let width = reader.headers().map_err(|e| csv_error(path, e))?.len();
        if width < 2 {
            return Err(Error::parse(
                format!("{}:1", path.display()),
                "need at least one feature column and a label column",
            ));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let loc = format!(
                "{}:{}",
                path.display(),
                rec.position().map(|p| p.line()).unwrap_or(0)
            );
            for cell in rec.iter().take(width - 1) {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(&loc, format!("not a number: {cell:?}")))?;
                features.push(v);
            }
            let cell = &rec[width - 1];
            let l: usize = cell
                .trim()
                .parse()
                .map_err(|_| Error::parse(&loc, format!("not a class index: {cell:?}")))?;
            labels.push(l);
        }
        if labels.is_empty() {
            return Err(Error::parse(path.display().to_string(), "no data rows"));
        }
        let n_classes = labels.iter().max().unwrap() + 1;
        Dataset::new(features, width - 1, labels, n_classes, split_seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticKind {
    Blobs,
    Spirals,
}

/// Number of spiral turns each arm makes.
const SPIRAL_TURNS: f64 = 1.25;

/// Deterministic synthetic classification data with balanced classes
/// (sample `i` belongs to class `i % classes`).
pub fn generate_synthetic(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    classes: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 || n < classes {
        return Err(Error::param(format!("need n >= C >= 2, got n={n}, C={classes}")));
    }
    if d == 0 || (kind == SyntheticKind::Spirals && d < 2) {
        return Err(Error::param(format!("invalid feature dimension {d} for {kind:?}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::param(format!("noise must be non-negative, got {noise}")));
    }
    let mut rng = stream_rng(seed, streams::DATA);
    let mut features = Vec::with_capacity(n * d);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    match kind {
        SyntheticKind::Blobs => {
            let centers = blob_centers(&mut rng, classes, d);
            for &c in &labels {
                for j in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    features.push(centers[c * d + j] + noise * z);
                }
            }
        }
        SyntheticKind::Spirals => {
            for &c in &labels {
                let u: f64 = rng.random();
                let r = 0.2 + 1.8 * u;
                let angle = 2.0 * PI * (SPIRAL_TURNS * u + c as f64 / classes as f64);
                let base = [r * angle.cos(), r * angle.sin()];
                for j in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    features.push(base.get(j).copied().unwrap_or(0.0) + noise * z);
                }
            }
        }
    }
    Dataset::new(features, d, labels, classes, seed)
}

/// Centers drawn in `[-5,5]^d`, redrawn until every pair is at least 2 apart.
fn blob_centers(rng: &mut impl Rng, classes: usize, d: usize) -> Vec<f64> {
    let min_gap = 2.0f64.min(10.0 / classes as f64);
    let mut centers: Vec<f64> = Vec::with_capacity(classes * d);
    while centers.len() < classes * d {
        let cand: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let far = centers.chunks(d).all(|c| {
            c.iter()
                .zip(&cand)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                >= min_gap
        });
        if far {
            centers.extend(cand);
        }
    }
    centers
}

/// Where a dataset comes from; stored in checkpoints so predictions can be
/// regenerated from a checkpoint alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic {
        kind: SyntheticKind,
        n: usize,
        d: usize,
        classes: usize,
        noise: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        split_seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Synthetic {
                kind,
                n,
                d,
                classes,
                noise,
                seed,
            } => generate_synthetic(*kind, *n, *d, *classes, *noise, *seed),
            DataSource::Csv { path, split_seed } => Dataset::load_csv(path, *split_seed),
        }
    }

    pub fn id(&self) -> String {
        match self {
            DataSource::Synthetic {
                kind,
                n,
                d,
                classes,
                noise,
                seed,
            } => format!("{kind:?}-n{n}-d{d}-c{classes}-noise{noise}-seed{seed}").to_lowercase(),
            DataSource::Csv { path, split_seed } => {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                format!("csv-{stem}-split{split_seed}")
            }
        }
    }
}
