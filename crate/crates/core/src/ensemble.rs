//! Prediction matrices, voting and accuracy.
//!
//! Class-probability rows are the interchange unit between trained models and
//! everything downstream. Files are plain CSV so that predictions from
//! external models can enter the pipeline:
//!
//! ```text
//! #model_id=ms-0.1-s0,n=3,c=2,split=val
//! 0.9,0.1
//! 0.25,0.75
//! 0.5,0.5
//! ```
//!
//! Labels live in a separate single-column CSV with header `label`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum tolerated deviation of a probability row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub model_id: String,
    pub n_samples: usize,
    pub n_classes: usize,
    /// Row-major `n_samples x n_classes`.
    pub probs: Vec<f64>,
    pub split_tag: String,
}

impl PredictionMatrix {
    /// Builds a matrix, checking that every row is a probability vector.
    pub fn new(
        model_id: impl Into<String>,
        n_classes: usize,
        probs: Vec<f64>,
        split_tag: impl Into<String>,
    ) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::Shape("a prediction matrix needs at least one class".into()));
        }
        if !probs.len().is_multiple_of(n_classes) {
            return Err(Error::Shape(format!(
                "{} values do not form rows of {} classes",
                probs.len(),
                n_classes
            )));
        }
        let m = PredictionMatrix {
            model_id: model_id.into(),
            n_samples: probs.len() / n_classes,
            n_classes,
            probs,
            split_tag: split_tag.into(),
        };
        m.check_rows()?;
        Ok(m)
    }

    fn check_rows(&self) -> Result<()> {
        for i in 0..self.n_samples {
            let row = self.row(i);
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Validation(format!(
                    "{}: row {i} has entry {v} outside [0,1]",
                    self.model_id
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "{}: row {i} sums to {sum}",
                    self.model_id
                )));
            }
        }
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    /// Predicted class of sample `i`; ties go to the lowest class index.
    pub fn argmax(&self, i: usize) -> usize {
        argmax(self.row(i))
    }

    pub fn predicted_labels(&self) -> Vec<usize> {
        (0..self.n_samples).map(|i| self.argmax(i)).collect()
    }

    fn same_shape(&self, other: &PredictionMatrix) -> Result<()> {
        if self.n_samples != other.n_samples
            || self.n_classes != other.n_classes
            || self.split_tag != other.split_tag
        {
            return Err(Error::Shape(format!(
                "{} is {}x{} ({}) but {} is {}x{} ({})",
                self.model_id,
                self.n_samples,
                self.n_classes,
                self.split_tag,
                other.model_id,
                other.n_samples,
                other.n_classes,
                other.split_tag
            )));
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        if self.model_id.contains([',', '\n', '\r']) || self.split_tag.contains([',', '\n', '\r'])
        {
            return Err(Error::param(format!(
                "model id {:?} / split {:?} may not contain commas or newlines",
                self.model_id, self.split_tag
            )));
        }
        let mut out = format!(
            "#model_id={},n={},c={},split={}\n",
            self.model_id, self.n_samples, self.n_classes, self.split_tag
        );
        for i in 0..self.n_samples {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                // shortest representation that parses back to the same f64
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(format!("{origin}:1"), "empty prediction file"))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(format!("{origin}:1"), "header must start with '#'"))?;
        let (mut model_id, mut n, mut c, mut split) = (None, None, None, None);
        for field in header.split(',') {
            let (key, value) = field.split_once('=').ok_or_else(|| {
                Error::parse(format!("{origin}:1"), format!("header field {field:?} lacks '='"))
            })?;
            let bad = |what: &str| Error::parse(format!("{origin}:1"), format!("bad {what}: {value:?}"));
            match key.trim() {
                "model_id" => model_id = Some(value.to_string()),
                "n" => n = Some(value.trim().parse::<usize>().map_err(|_| bad("n"))?),
                "c" => c = Some(value.trim().parse::<usize>().map_err(|_| bad("c"))?),
                "split" => split = Some(value.to_string()),
                other => {
                    return Err(Error::parse(
                        format!("{origin}:1"),
                        format!("unknown header key {other:?}"),
                    ))
                }
            }
        }
        let missing = |k: &str| Error::parse(format!("{origin}:1"), format!("header lacks {k}"));
        let model_id = model_id.ok_or_else(|| missing("model_id"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let c = c.ok_or_else(|| missing("c"))?;
        let split = split.ok_or_else(|| missing("split"))?;

        let mut probs = Vec::with_capacity(n * c);
        let mut rows = 0;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let loc = format!("{origin}:{}", idx + 1);
            let before = probs.len();
            for cell in line.split(',') {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(&loc, format!("not a number: {cell:?}")))?;
                probs.push(v);
            }
            if probs.len() - before != c {
                return Err(Error::parse(
                    &loc,
                    format!("expected {c} values, found {}", probs.len() - before),
                ));
            }
            let sum: f64 = probs[before..].iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Validation(format!("{loc}: row sums to {sum}")));
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::parse(
                origin,
                format!("header declares {n} rows but {rows} were found"),
            ));
        }
        PredictionMatrix::new(model_id, c, probs, split)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, &path.display().to_string())
    }
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEvalSet {
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledEvalSet {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Validation(format!(
                "label {l} outside [0,{n_classes})"
            )));
        }
        Ok(LabeledEvalSet { labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("label\n");
        for l in &self.labels {
            writeln!(out, "{l}").unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a single-column label CSV. The class count is taken from
    /// `n_classes` when given, otherwise from the largest label.
    pub fn read(path: impl AsRef<Path>, n_classes: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut labels = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let cell = rec.get(0).unwrap_or("");
            let l: usize = cell.trim().parse().map_err(|_| {
                Error::parse(
                    format!("{}:{line}", path.display()),
                    format!("not a class index: {cell:?}"),
                )
            })?;
            labels.push(l);
        }
        let c = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        LabeledEvalSet::new(labels, c)
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(format!("{}:{line}", path.display()), e.to_string())
}

/// A selected subset of a model pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTeam {
    pub member_ids: Vec<String>,
    pub val_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fq_gd_score: Option<f64>,
}

impl EnsembleTeam {
    pub fn size(&self) -> usize {
        self.member_ids.len()
    }
}

fn check_members(members: &[&PredictionMatrix]) -> Result<()> {
    let first = members
        .first()
        .ok_or_else(|| Error::Shape("voting needs at least one member".into()))?;
    members[1..].iter().try_for_each(|m| first.same_shape(m))
}

/// Element-wise mean of the members' probability rows.
pub fn soft_vote(members: &[&PredictionMatrix]) -> Result<PredictionMatrix> {
    check_members(members)?;
    let first = members[0];
    let mut probs = vec![0.0; first.probs.len()];
    for m in members {
        for (acc, v) in probs.iter_mut().zip(&m.probs) {
            *acc += v;
        }
    }
    let k = members.len() as f64;
    probs.iter_mut().for_each(|v| *v /= k);
    let id = members
        .iter()
        .map(|m| m.model_id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    Ok(PredictionMatrix {
        model_id: format!("soft[{id}]"),
        n_samples: first.n_samples,
        n_classes: first.n_classes,
        probs,
        split_tag: first.split_tag.clone(),
    })
}

/// Per-sample plurality of the members' argmax classes.
///
/// A tie between classes is broken by the larger summed probability among the
/// tied classes, then by the lower class index.
pub fn majority_vote(members: &[&PredictionMatrix]) -> Result<Vec<usize>> {
    check_members(members)?;
    let (n, c) = (members[0].n_samples, members[0].n_classes);
    let mut out = Vec::with_capacity(n);
    let mut votes = vec![0usize; c];
    let mut mass = vec![0.0; c];
    for i in 0..n {
        votes.iter_mut().for_each(|v| *v = 0);
        mass.iter_mut().for_each(|v| *v = 0.0);
        for m in members {
            votes[m.argmax(i)] += 1;
            for (acc, v) in mass.iter_mut().zip(m.row(i)) {
                *acc += v;
            }
        }
        out.push(plurality(&votes, &mass));
    }
    Ok(out)
}

/// Class with the most votes; ties by larger `mass`, then lower index.
pub(crate) fn plurality(votes: &[usize], mass: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..votes.len() {
        if votes[j] > votes[best] || (votes[j] == votes[best] && mass[j] > mass[best]) {
            best = j;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(preds: &PredictionMatrix, eval: &LabeledEvalSet) -> Result<f64> {
    if preds.n_samples != eval.len() || preds.n_classes != eval.n_classes {
        return Err(Error::Shape(format!(
            "{} predictions are {}x{} but the evaluation set is {}x{}",
            preds.model_id,
            preds.n_samples,
            preds.n_classes,
            eval.len(),
            eval.n_classes
        )));
    }
    label_accuracy(&preds.predicted_labels(), eval)
}

pub fn label_accuracy(predicted: &[usize], eval: &LabeledEvalSet) -> Result<f64> {
    if predicted.len() != eval.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            eval.len()
        )));
    }
    if eval.is_empty() {
        return Err(Error::EmptyResult("no samples to score".into()));
    }
    let hits = predicted
        .iter()
        .zip(&eval.labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / eval.len() as f64)
}
