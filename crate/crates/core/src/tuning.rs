//! Grid and random search over learning-rate policies, backed by an
//! append-only trial database.
//!
//! A run directory looks like
//!
//! ```text
//! run/
//!   trials.jsonl          one TrialRecord per line
//!   checkpoints/<trial_id>.ckpt.json
//!   predictions/<trial_id>.val.csv, <trial_id>.test.csv
//!   predictions/labels.val.csv, labels.test.csv
//!   reports/
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{LabeledEvalSet, PredictionMatrix};
use crate::error::{Error, Result};
use crate::lr_policy::LrPolicy;
use crate::rng::{stream_rng, streams};
use crate::selection::ModelPool;
use crate::trainer::{
    predict_proba, train, Activation, Checkpoint, DataSource, Dataset, ModelSpec, SplitKind,
    TrainerConfig,
};

/// What to train: data, architecture and optimizer settings. The trainer's
/// epoch count is the training budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub data: DataSource,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub trainer: TrainerConfig,
}

impl TaskConfig {
    /// Model spec for a dataset; the trial seed doubles as init seed.
    pub fn model_spec(&self, data: &Dataset, seed: u64) -> Result<ModelSpec> {
        let mut sizes = vec![data.n_features];
        sizes.extend(&self.hidden_layers);
        sizes.push(data.n_classes);
        ModelSpec::new(sizes, self.activation, seed)
    }

    /// Trainer settings for a trial seed (used as shuffle seed).
    pub fn trainer_for(&self, seed: u64) -> TrainerConfig {
        TrainerConfig {
            shuffle_seed: seed,
            ..self.trainer.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Search {
    Grid,
    Random {
        n_samples: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSpec {
    pub task_id: String,
    pub candidate_policies: Vec<LrPolicy>,
    pub seeds: Vec<u64>,
    pub task: TaskConfig,
    #[serde(default = "default_search")]
    pub search: Search,
}

fn default_search() -> Search {
    Search::Grid
}

impl TuningSpec {
    pub fn validate(&self) -> Result<()> {
        if self.candidate_policies.is_empty() {
            return Err(Error::param("candidate_policies must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("seeds must not be empty"));
        }
        for p in &self.candidate_policies {
            p.validate()?;
        }
        self.task.trainer.validate()
    }

    /// `(policy index, seed)` pairs to visit, in canonical order. Random
    /// search samples the grid uniformly with replacement; repeated draws are
    /// visited once.
    pub fn pairs(&self) -> Vec<(usize, u64)> {
        let grid: Vec<(usize, u64)> = (0..self.candidate_policies.len())
            .flat_map(|p| self.seeds.iter().map(move |&s| (p, s)))
            .collect();
        match self.search {
            Search::Grid => grid,
            Search::Random { n_samples, seed } => {
                let mut rng = stream_rng(seed, streams::SEARCH);
                let mut seen = HashSet::new();
                (0..n_samples)
                    .map(|_| grid[rng.random_range(0..grid.len())])
                    .filter(|pair| seen.insert(*pair))
                    .collect()
            }
        }
    }
}

/// The fixed desk-scale suite: the 16-policy grid with learning rates scaled
/// by 0.1, trained on a 2000-point three-arm spiral with one seed.
pub fn desk_suite() -> TuningSpec {
    TuningSpec {
        task_id: "desk-spirals".into(),
        candidate_policies: crate::lr_policy::table_grid(0.1),
        seeds: vec![DESK_SEED],
        task: TaskConfig {
            data: DataSource::Synthetic {
                kind: crate::trainer::SyntheticKind::Spirals,
                n: 2000,
                d: 2,
                classes: DESK_CLASSES,
                noise: DESK_NOISE,
                seed: DESK_SEED,
            },
            hidden_layers: DESK_HIDDEN.to_vec(),
            activation: Activation::ReLU,
            trainer: TrainerConfig::new(DESK_EPOCHS),
        },
        search: Search::Grid,
    }
}

const DESK_SEED: u64 = 1;
const DESK_CLASSES: usize = 3;
const DESK_NOISE: f64 = 0.1;
const DESK_HIDDEN: [usize; 2] = [32, 32];
const DESK_EPOCHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Success,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    /// Readable id used for the trained model and its predictions.
    pub model_id: String,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub policy: LrPolicy,
    pub seed: u64,
    pub task_id: String,
    pub dataset_id: String,
    pub model_spec_id: String,
    pub val_accuracy: f64,
    pub val_loss: f64,
    pub test_accuracy: f64,
    /// Paths are relative to the run directory.
    pub checkpoint_path: Option<PathBuf>,
    pub prediction_path: Option<PathBuf>,
    pub test_prediction_path: Option<PathBuf>,
    pub wall_time_seconds: f64,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.status == TrialStatus::Success
    }
}

/// Hex digest of the policy JSON, seed and task id.
pub fn trial_id(policy: &LrPolicy, seed: u64, task_id: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_string(policy).expect("policies serialize"));
    h.update(seed.to_le_bytes());
    h.update(task_id.as_bytes());
    hex::encode(&h.finalize()[..8])
}

fn model_id(policy: &LrPolicy, seed: u64, trial_id: &str) -> String {
    format!(
        "{}-{}-s{}-{}",
        policy.family.to_string().to_lowercase(),
        policy.k0,
        seed,
        &trial_id[..6]
    )
}

/// Layout of a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn trials(&self) -> PathBuf {
        self.root.join("trials.jsonl")
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn labels(&self, split: SplitKind) -> PathBuf {
        self.predictions().join(format!("labels.{split}.csv"))
    }

    pub fn create(&self) -> Result<()> {
        for d in [self.checkpoints(), self.predictions(), self.reports()] {
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(())
    }

    pub fn db(&self) -> TrialDb {
        TrialDb::new(self.trials())
    }

    /// Model pool of every successful trial on `split` (`val` or `test`).
    pub fn pool(&self, split: SplitKind) -> Result<ModelPool> {
        let records = self.db().load()?;
        let labels = LabeledEvalSet::read(self.labels(split), None)?;
        let mut members = Vec::new();
        for r in records.iter().filter(|r| r.succeeded()) {
            let rel = match split {
                SplitKind::Test => r.test_prediction_path.as_ref(),
                _ => r.prediction_path.as_ref(),
            }
            .ok_or_else(|| Error::NotFound(format!("trial {} has no {split} predictions", r.trial_id)))?;
            members.push(PredictionMatrix::read(self.root.join(rel))?);
        }
        if members.is_empty() {
            return Err(Error::EmptyResult("the run has no successful trials".into()));
        }
        let c = members[0].n_classes;
        ModelPool::new(members, LabeledEvalSet::new(labels.labels, c)?)
    }
}

/// JSON-Lines trial store. Appends only; existing lines are never rewritten.
#[derive(Debug, Clone)]
pub struct TrialDb {
    path: PathBuf,
}

impl TrialDb {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        TrialDb { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All records; a missing file is an empty database.
    pub fn load(&self) -> Result<Vec<TrialRecord>> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.path, e)),
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| {
                    Error::parse(format!("{}:{}", self.path.display(), i + 1), e.to_string())
                })
            })
            .collect()
    }

    pub fn append(&self, records: &[TrialRecord]) -> Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let existing: HashSet<String> = self.load()?.into_iter().map(|r| r.trial_id).collect();
        if let Some(dup) = records.iter().find(|r| existing.contains(&r.trial_id)) {
            return Err(Error::Validation(format!("trial {} is already recorded", dup.trial_id)));
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r)?);
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).map_err(|e| Error::io(&self.path, e))
    }
}

/// Runs every pending `(policy, seed)` pair of `spec` into `run`, appending the
/// new records to its database. Pairs already recorded (successful or
/// failed) are not rerun. Returns the records of all pairs in canonical order.
///
/// A failing trial is recorded with `status = failed` and its error text; the
/// search carries on. Up to `jobs` trials run at once; the database is
/// written in canonical order regardless.
pub fn run_search(spec: &TuningSpec, run: &RunDir, jobs: usize) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    run.create()?;
    let data = spec.task.data.load()?;
    let val_labels = run.labels(SplitKind::Val);
    let test_labels = run.labels(SplitKind::Test);
    data.eval_set(SplitKind::Val).write(&val_labels)?;
    data.eval_set(SplitKind::Test).write(&test_labels)?;

    let db = run.db();
    let known: BTreeMap<String, TrialRecord> =
        db.load()?.into_iter().map(|r| (r.trial_id.clone(), r)).collect();
    let pairs = spec.pairs();
    let ids: Vec<String> = pairs
        .iter()
        .map(|&(p, s)| trial_id(&spec.candidate_policies[p], s, &spec.task_id))
        .collect();
    let pending: Vec<usize> = (0..pairs.len()).filter(|&i| !known.contains_key(&ids[i])).collect();

    let results: Mutex<BTreeMap<usize, TrialRecord>> = Mutex::new(BTreeMap::new());
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let k = next.fetch_add(1, Ordering::SeqCst);
        let Some(&i) = pending.get(k) else { break };
        let (p, seed) = pairs[i];
        let rec = run_trial(spec, &data, &spec.candidate_policies[p], seed, &ids[i], run);
        results.lock().unwrap().insert(i, rec);
    };
    std::thread::scope(|scope| {
        for _ in 1..jobs.max(1).min(pending.len().max(1)) {
            scope.spawn(worker);
        }
        worker();
    });
    let mut fresh = results.into_inner().unwrap();
    db.append(&fresh.values().cloned().collect::<Vec<_>>())?;

    Ok((0..pairs.len())
        .map(|i| fresh.remove(&i).unwrap_or_else(|| known[&ids[i]].clone()))
        .collect())
}

fn run_trial(
    spec: &TuningSpec,
    data: &Dataset,
    policy: &LrPolicy,
    seed: u64,
    trial_id: &str,
    run: &RunDir,
) -> TrialRecord {
    let start = Instant::now();
    let mut rec = TrialRecord {
        trial_id: trial_id.to_string(),
        model_id: model_id(policy, seed, trial_id),
        status: TrialStatus::Failed,
        error: None,
        policy: policy.clone(),
        seed,
        task_id: spec.task_id.clone(),
        dataset_id: spec.task.data.id(),
        model_spec_id: String::new(),
        val_accuracy: 0.0,
        val_loss: 0.0,
        test_accuracy: 0.0,
        checkpoint_path: None,
        prediction_path: None,
        test_prediction_path: None,
        wall_time_seconds: 0.0,
    };
    let outcome = (|| -> Result<()> {
        let model_spec = spec.task.model_spec(data, seed)?;
        rec.model_spec_id = model_spec.id();
        let cfg = spec.task.trainer_for(seed);
        let mut model = train(&model_spec, data, policy, &cfg)?;
        model.model_id = rec.model_id.clone();
        let ckpt = PathBuf::from("checkpoints").join(format!("{trial_id}.ckpt.json"));
        let val = PathBuf::from("predictions").join(format!("{trial_id}.val.csv"));
        let test = PathBuf::from("predictions").join(format!("{trial_id}.test.csv"));
        predict_proba(&model, data, SplitKind::Val)?.write(run.root.join(&val))?;
        predict_proba(&model, data, SplitKind::Test)?.write(run.root.join(&test))?;
        rec.val_accuracy = model.final_metrics.val_accuracy;
        rec.val_loss = model.final_metrics.val_loss;
        rec.test_accuracy = model.final_metrics.test_accuracy;
        Checkpoint::new(model, spec.task.data.clone(), cfg).write(run.root.join(&ckpt))?;
        rec.checkpoint_path = Some(ckpt);
        rec.prediction_path = Some(val);
        rec.test_prediction_path = Some(test);
        Ok(())
    })();
    match outcome {
        Ok(()) => rec.status = TrialStatus::Success,
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec.wall_time_seconds = start.elapsed().as_secs_f64();
    rec
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Highest validation accuracy.
    #[default]
    ValAccuracy,
    /// Lowest validation loss.
    ValLoss,
}

/// Orders successful records best-first; ties go to the smaller trial id.
fn rank(a: &TrialRecord, b: &TrialRecord, criterion: Criterion) -> std::cmp::Ordering {
    let primary = match criterion {
        Criterion::ValAccuracy => b.val_accuracy.total_cmp(&a.val_accuracy),
        Criterion::ValLoss => a.val_loss.total_cmp(&b.val_loss),
    };
    primary.then_with(|| a.trial_id.cmp(&b.trial_id))
}

/// Best successful record by validation accuracy.
pub fn best_policy(records: &[TrialRecord]) -> Result<&TrialRecord> {
    best_policy_by(records, Criterion::ValAccuracy)
}

pub fn best_policy_by(records: &[TrialRecord], criterion: Criterion) -> Result<&TrialRecord> {
    records
        .iter()
        .filter(|r| r.succeeded())
        .min_by(|a, b| rank(a, b, criterion))
        .ok_or_else(|| Error::EmptyResult("no successful trial".into()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub dataset_id: Option<String>,
    pub model_spec_id: Option<String>,
    pub task_id: Option<String>,
}

impl Query {
    pub fn matches(&self, r: &TrialRecord) -> bool {
        let eq = |want: &Option<String>, have: &str| want.as_deref().is_none_or(|w| w == have);
        eq(&self.dataset_id, &r.dataset_id)
            && eq(&self.model_spec_id, &r.model_spec_id)
            && eq(&self.task_id, &r.task_id)
    }
}

/// Up to `n` successful records matching `query`, best validation accuracy
/// first, ties by trial id.
pub fn recommend_top_n(records: &[TrialRecord], query: &Query, n: usize) -> Vec<TrialRecord> {
    let mut hits: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.succeeded() && query.matches(r))
        .collect();
    hits.sort_by(|a, b| rank(a, b, Criterion::ValAccuracy));
    hits.into_iter().take(n).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::SyntheticKind;

    fn record(id: &str, acc: f64) -> TrialRecord {
        TrialRecord {
            trial_id: id.into(),
            model_id: id.into(),
            status: TrialStatus::Success,
            error: None,
            policy: LrPolicy::constant(0.1),
            seed: 0,
            task_id: "task".into(),
            dataset_id: "data".into(),
            model_spec_id: "mlp".into(),
            val_accuracy: acc,
            val_loss: 1.0 - acc,
            test_accuracy: acc,
            checkpoint_path: None,
            prediction_path: None,
            test_prediction_path: None,
            wall_time_seconds: 0.0,
        }
    }

    #[test]
    fn best_and_ties() {
        let recs = vec![record("c", 0.7), record("b", 0.9), record("a", 0.8)];
        assert_eq!(best_policy(&recs).unwrap().trial_id, "b");
        let tie = vec![record("z", 0.9), record("y", 0.9)];
        assert_eq!(best_policy(&tie).unwrap().trial_id, "y");
        let mut failed = record("f", 1.0);
        failed.status = TrialStatus::Failed;
        assert!(matches!(best_policy(&[failed.clone()]), Err(Error::EmptyResult(_))));
        assert_eq!(best_policy(&[failed, record("g", 0.1)]).unwrap().trial_id, "g");
        assert_eq!(best_policy_by(&recs, Criterion::ValLoss).unwrap().trial_id, "b");
    }

    #[test]
    fn top_n_is_a_sorted_prefix() {
        let accs = [0.5, 0.9, 0.7, 0.9, 0.1, 0.65, 0.3, 0.8, 0.2, 0.4, 0.6, 0.75, 0.85, 0.05, 0.55, 0.95];
        let recs: Vec<TrialRecord> = accs
            .iter()
            .enumerate()
            .map(|(i, &a)| record(&format!("t{i:02}"), a))
            .collect();
        let top = recommend_top_n(&recs, &Query::default(), 3);
        let ids: Vec<&str> = top.iter().map(|r| r.trial_id.as_str()).collect();
        // sort oracle: 0.95 (t15), then 0.9 tie broken by id (t01, t03)
        assert_eq!(ids, vec!["t15", "t01", "t03"]);
        let one = recommend_top_n(&recs, &Query::default(), 1);
        assert_eq!(&one[0], best_policy(&recs).unwrap());
        let none = Query {
            task_id: Some("other".into()),
            ..Query::default()
        };
        assert!(recommend_top_n(&recs, &none, 5).is_empty());
        let full = recommend_top_n(&recs, &Query::default(), 100);
        for n in 1..=16 {
            assert_eq!(recommend_top_n(&recs, &Query::default(), n), full[..n]);
        }
    }

    fn spec(policies: Vec<LrPolicy>, search: Search) -> TuningSpec {
        TuningSpec {
            task_id: "blobs".into(),
            candidate_policies: policies,
            seeds: vec![0],
            task: TaskConfig {
                data: DataSource::Synthetic {
                    kind: SyntheticKind::Blobs,
                    n: 90,
                    d: 2,
                    classes: 3,
                    noise: 0.5,
                    seed: 0,
                },
                hidden_layers: vec![6],
                activation: Activation::ReLU,
                trainer: TrainerConfig::new(3),
            },
            search,
        }
    }

    #[test]
    fn random_search_replays() {
        let s = spec(crate::lr_policy::table_grid(0.1), Search::Random { n_samples: 3, seed: 5 });
        assert_eq!(s.pairs(), s.pairs());
        assert!(s.pairs().len() <= 3);
        let grid = spec(crate::lr_policy::table_grid(0.1), Search::Grid);
        assert_eq!(grid.pairs().len(), 16);
    }

    #[test]
    fn search_records_failures_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::new(dir.path());
        let s = spec(vec![LrPolicy::constant(0.05), LrPolicy::constant(1e4)], Search::Grid);
        let recs = run_search(&s, &run, 2).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0].succeeded());
        assert_eq!(recs[1].status, TrialStatus::Failed);
        assert!(recs[1].error.as_deref().unwrap().contains("diverged"));
        assert!(dir.path().join(recs[0].checkpoint_path.as_ref().unwrap()).exists());
        let before = fs::read_to_string(run.trials()).unwrap();
        let again = run_search(&s, &run, 1).unwrap();
        assert_eq!(fs::read_to_string(run.trials()).unwrap(), before);
        assert_eq!(again, recs);
        assert_eq!(run.pool(SplitKind::Val).unwrap().len(), 1);
    }
}
