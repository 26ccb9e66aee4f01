//! Desk-scale training: small MLP classifiers trained with mini-batch SGD and
//! momentum under a learning-rate policy, one LR value per epoch.

mod data;
mod mlp;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ensemble::{PredictionMatrix, ROW_SUM_TOLERANCE};
use crate::error::{Error, Result};
use crate::lr_policy::LrPolicy;
use crate::rng::{stream_rng, streams};

pub use data::{
    generate_synthetic, DataSource, Dataset, Split, SplitKind, SyntheticKind, TEST_FRACTION,
    VAL_FRACTION,
};
pub use mlp::{Activation, ModelSpec};
use mlp::{accumulate_gradient, forward, smoothed_loss, Workspace};

/// Epoch-mean training loss above which a run counts as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e6;

fn default_batch() -> usize {
    32
}

fn default_momentum() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub label_smoothing: f64,
    #[serde(default)]
    pub shuffle_seed: u64,
    /// Number of epochs; the schedule unit.
    pub epochs: usize,
    /// Keep a copy of the parameters after every epoch.
    #[serde(default)]
    pub keep_epoch_params: bool,
}

impl TrainerConfig {
    pub fn new(epochs: usize) -> Self {
        TrainerConfig {
            batch_size: default_batch(),
            momentum: default_momentum(),
            label_smoothing: 0.0,
            shuffle_seed: 0,
            epochs,
            keep_epoch_params: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::param("the training budget must be at least one epoch"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param(format!("momentum must lie in [0,1), got {}", self.momentum)));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::param(format!(
                "label_smoothing must lie in [0,1), got {}",
                self.label_smoothing
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model_id: String,
    pub model_spec: ModelSpec,
    pub parameters: Vec<f64>,
    pub policy_used: LrPolicy,
    pub final_metrics: Metrics,
    /// Mean training loss of every epoch.
    pub epoch_losses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epoch_params: Vec<Vec<f64>>,
}

/// On-disk checkpoint: the trained model plus enough context to rebuild its
/// data and rerun the training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub data_source: DataSource,
    pub trainer_config: TrainerConfig,
    pub model: TrainedModel,
}

pub const CHECKPOINT_FORMAT: &str = "ratepool-checkpoint/1";

impl Checkpoint {
    pub fn new(model: TrainedModel, data_source: DataSource, trainer_config: TrainerConfig) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            data_source,
            trainer_config,
            model,
        }
    }

    /// serde_json prints floats in shortest round-trip form, so parameters
    /// reload bit-exactly.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Validation(format!(
                "{}: unsupported checkpoint format {:?}",
                path.display(),
                ckpt.format
            )));
        }
        if ckpt.model.parameters.len() != ckpt.model.model_spec.param_count() {
            return Err(Error::Validation(format!(
                "{}: parameter count does not match the model spec",
                path.display()
            )));
        }
        Ok(ckpt)
    }
}

fn check_dims(spec: &ModelSpec, data: &Dataset) -> Result<()> {
    spec.validate()?;
    if spec.inputs() != data.n_features || spec.classes() != data.n_classes {
        return Err(Error::Shape(format!(
            "model expects {} features / {} classes, data has {} / {}",
            spec.inputs(),
            spec.classes(),
            data.n_features,
            data.n_classes
        )));
    }
    Ok(())
}

/// Trains `spec` on the training split of `data`.
///
/// The LR of epoch `t` is `policy.lr_at(t, cfg.epochs)`. The update is
/// `v <- momentum * v + g; theta <- theta - lr * v`. The result depends only on
/// the inputs (including `init_seed` and `shuffle_seed`).
pub fn train(
    spec: &ModelSpec,
    data: &Dataset,
    policy: &LrPolicy,
    cfg: &TrainerConfig,
) -> Result<TrainedModel> {
    check_dims(spec, data)?;
    cfg.validate()?;
    policy.validate()?;
    if data.split.train.is_empty() {
        return Err(Error::Validation("the training split is empty".into()));
    }
    let schedule: Vec<f64> = policy.render(cfg.epochs)?.into_iter().map(|(_, lr)| lr).collect();

    let mut params = spec.init_params();
    let mut velocity = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::new(spec);
    let mut order = data.split.train.clone();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut epoch_params = Vec::new();

    for (epoch, &lr) in schedule.iter().enumerate() {
        // restore canonical order so the permutation depends only on the epoch
        order.copy_from_slice(&data.split.train);
        order.shuffle(&mut stream_rng(cfg.shuffle_seed, streams::SHUFFLE + epoch as u64));
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                loss_sum += accumulate_gradient(
                    spec,
                    &params,
                    data.row(i),
                    data.labels[i],
                    cfg.label_smoothing,
                    &mut ws,
                    &mut grad,
                );
            }
            let scale = 1.0 / batch.len() as f64;
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g * scale;
                *p -= lr * *v;
            }
        }
        let mean_loss = loss_sum / order.len() as f64;
        if !mean_loss.is_finite()
            || mean_loss > DIVERGENCE_LOSS
            || params.iter().any(|p| !p.is_finite())
        {
            return Err(Error::Diverged {
                epoch,
                loss: mean_loss,
            });
        }
        epoch_losses.push(mean_loss);
        if cfg.keep_epoch_params {
            epoch_params.push(params.clone());
        }
    }

    let (train_loss, train_accuracy) = evaluate(spec, &params, data, SplitKind::Train, cfg.label_smoothing);
    let (val_loss, val_accuracy) = evaluate(spec, &params, data, SplitKind::Val, cfg.label_smoothing);
    let (_, test_accuracy) = evaluate(spec, &params, data, SplitKind::Test, cfg.label_smoothing);
    Ok(TrainedModel {
        model_id: format!("{}-init{}-shuf{}", policy.label(), spec.init_seed, cfg.shuffle_seed),
        model_spec: spec.clone(),
        parameters: params,
        policy_used: policy.clone(),
        final_metrics: Metrics {
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
            test_accuracy,
        },
        epoch_losses,
        epoch_params,
    })
}

/// Mean loss and accuracy over a split. An empty split scores `(0, 0)`.
fn evaluate(
    spec: &ModelSpec,
    params: &[f64],
    data: &Dataset,
    split: SplitKind,
    smoothing: f64,
) -> (f64, f64) {
    let idx = data.indices(split);
    if idx.is_empty() {
        return (0.0, 0.0);
    }
    let mut ws = Workspace::new(spec);
    let (mut loss, mut hits) = (0.0, 0usize);
    for &i in idx {
        forward(spec, params, data.row(i), &mut ws);
        loss += smoothed_loss(&ws.probs, data.labels[i], smoothing);
        if crate::ensemble::argmax(&ws.probs) == data.labels[i] {
            hits += 1;
        }
    }
    (loss / idx.len() as f64, hits as f64 / idx.len() as f64)
}

/// Softmax outputs of `model` on one split of `data`.
pub fn predict_proba(
    model: &TrainedModel,
    data: &Dataset,
    split: SplitKind,
) -> Result<PredictionMatrix> {
    check_dims(&model.model_spec, data)?;
    let spec = &model.model_spec;
    let mut ws = Workspace::new(spec);
    let idx = data.indices(split);
    let mut probs = Vec::with_capacity(idx.len() * spec.classes());
    for &i in idx {
        forward(spec, &model.parameters, data.row(i), &mut ws);
        probs.extend_from_slice(&ws.probs);
    }
    let m = PredictionMatrix::new(model.model_id.clone(), spec.classes(), probs, split.to_string())?;
    debug_assert!(m.probs.chunks(m.n_classes).all(|r| (r.iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOLERANCE));
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub max_relative_error: f64,
    /// Parameter index with the largest relative error.
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Finite-difference step used by [`gradient_check`].
pub const GRADIENT_CHECK_STEP: f64 = 1e-6;
/// Samples from the training split used by [`gradient_check`].
pub const GRADIENT_CHECK_SAMPLES: usize = 8;

/// Compares the analytic gradient at the initial parameters of `spec` with
/// central differences.
pub fn gradient_check(spec: &ModelSpec, data: &Dataset, tolerance: f64) -> Result<GradientReport> {
    gradient_check_at(spec, &spec.init_params(), data, 0.0, tolerance)
}

/// [`gradient_check`] at arbitrary parameters and label smoothing. The loss
/// is the mean over the first few training samples.
pub fn gradient_check_at(
    spec: &ModelSpec,
    params: &[f64],
    data: &Dataset,
    smoothing: f64,
    tolerance: f64,
) -> Result<GradientReport> {
    check_dims(spec, data)?;
    if params.len() != spec.param_count() {
        return Err(Error::Shape("parameter vector does not match the spec".into()));
    }
    let samples: Vec<usize> = data
        .split
        .train
        .iter()
        .take(GRADIENT_CHECK_SAMPLES)
        .copied()
        .collect();
    if samples.is_empty() {
        return Err(Error::Validation("the training split is empty".into()));
    }
    let scale = 1.0 / samples.len() as f64;
    let mut ws = Workspace::new(spec);
    let mut analytic = vec![0.0; params.len()];
    for &i in &samples {
        accumulate_gradient(spec, params, data.row(i), data.labels[i], smoothing, &mut ws, &mut analytic);
    }
    analytic.iter_mut().for_each(|g| *g *= scale);

    let mut loss_at = |p: &[f64]| {
        samples
            .iter()
            .map(|&i| {
                forward(spec, p, data.row(i), &mut ws);
                smoothed_loss(&ws.probs, data.labels[i], smoothing)
            })
            .sum::<f64>()
            * scale
    };
    let h = GRADIENT_CHECK_STEP;
    let mut probe = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let orig = probe[k];
        probe[k] = orig + h;
        let up = loss_at(&probe);
        probe[k] = orig - h;
        let down = loss_at(&probe);
        probe[k] = orig;
        numeric.push((up - down) / (2.0 * h));
    }
    let (mut worst_index, mut max_relative_error) = (0, 0.0);
    for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let rel = relative_error(*a, *n);
        if rel > max_relative_error {
            max_relative_error = rel;
            worst_index = k;
        }
    }
    Ok(GradientReport {
        max_relative_error,
        worst_index,
        analytic,
        numeric,
        tolerance,
        passed: max_relative_error < tolerance,
    })
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps near-zero components from
/// reporting pure rounding noise as error.
fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Cosine similarity of two models' flattened parameters, optionally without
/// the output layer.
pub fn parameter_cosine(a: &TrainedModel, b: &TrainedModel, exclude_output_layer: bool) -> Result<f64> {
    if !a.model_spec.same_architecture(&b.model_spec) {
        return Err(Error::Shape(format!(
            "{} and {} have different architectures",
            a.model_spec.id(),
            b.model_spec.id()
        )));
    }
    let end = if exclude_output_layer {
        a.model_spec.output_layer_range().start
    } else {
        a.model_spec.param_count()
    };
    cosine(&a.parameters[..end], &b.parameters[..end])
}

pub(crate) fn cosine(x: &[f64], y: &[f64]) -> Result<f64> {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Validation("cosine of a zero parameter vector".into()));
    }
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}
