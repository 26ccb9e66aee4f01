//! Browser bindings for three small ratepool computations: rendering an LR
//! policy, the parameter-variance trajectory, and focal versus brute-force
//! team selection on a synthetic pool.
//!
//! Every export takes and returns plain values (JSON text, numbers, `Vec<f64>`)
//! so the same functions run natively in tests. Errors come back as the
//! message string, which wasm-bindgen throws on the JS side.

use rand::Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use ratepool::ensemble::{LabeledEvalSet, PredictionMatrix};
use ratepool::lr_policy::LrPolicy;
use ratepool::rng::{stream_rng, streams};
use ratepool::selection::{brute_force, focal_diversity, focal_select, ModelPool};
use ratepool::variance::{trajectory, VarianceSimConfig};
use ratepool::Error;

/// Largest pool the page enumerates exhaustively.
pub const MAX_MEMBERS: usize = 12;
const MAX_SIM_CELLS: usize = 4_000_000;

fn fail(e: impl ToString) -> String {
    e.to_string()
}

/// Learning rate at every step `0..steps` for a policy given as JSON.
#[wasm_bindgen]
pub fn schedule(policy_json: &str, steps: usize) -> Result<Vec<f64>, String> {
    let policy: LrPolicy = serde_json::from_str(policy_json).map_err(fail)?;
    let rows = policy.render(steps).map_err(fail)?;
    Ok(rows.into_iter().map(|(_, lr)| lr).collect())
}

/// Predicted and simulated variance per step as a JSON array of rows
/// `{t, predicted_var, empirical_var, ci_lo, ci_hi}`.
#[wasm_bindgen]
pub fn variance_trajectory(config_json: &str, confidence: f64) -> Result<String, String> {
    let cfg: VarianceSimConfig = serde_json::from_str(config_json).map_err(fail)?;
    if (cfg.steps + 1).saturating_mul(cfg.trials) > MAX_SIM_CELLS {
        return Err(fail(Error::Parameter(format!(
            "(steps + 1) * trials must stay under {MAX_SIM_CELLS} in the browser"
        ))));
    }
    let rows = trajectory(&cfg, confidence).map_err(fail)?;
    serde_json::to_string(&rows).map_err(fail)
}

#[derive(Debug, Serialize)]
pub struct MemberSummary {
    pub id: String,
    pub accuracy: f64,
}

#[derive(Debug, Serialize)]
pub struct TeamSummary {
    pub members: Vec<String>,
    pub accuracy: f64,
    pub fq_gd: f64,
}

#[derive(Debug, Serialize)]
pub struct SizeRow {
    pub size: usize,
    pub focal: TeamSummary,
    pub brute: TeamSummary,
}

#[derive(Debug, Serialize)]
pub struct PoolReport {
    pub members: Vec<MemberSummary>,
    pub entire_accuracy: f64,
    pub sizes: Vec<SizeRow>,
}

/// A pool whose member `i` is right on roughly `accuracies[i]` of the samples.
///
/// With probability `correlation` a member reuses the sample's shared draw
/// instead of its own, so high correlation makes members fail on the same
/// samples. Right answers put a random peak in (0.5, 0.9] on the label, wrong
/// ones put it on a random other class.
pub fn synthetic_pool(
    accuracies: &[f64],
    correlation: f64,
    classes: usize,
    samples: usize,
    seed: u64,
) -> ratepool::Result<ModelPool> {
    if accuracies.is_empty() || accuracies.len() > MAX_MEMBERS {
        return Err(Error::Parameter(format!("pool needs 1..={MAX_MEMBERS} members")));
    }
    if let Some(a) = accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Parameter(format!("accuracy {a} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&correlation) {
        return Err(Error::Parameter(format!("correlation {correlation} outside [0, 1]")));
    }
    if classes < 2 || samples == 0 {
        return Err(Error::Parameter("need at least 2 classes and 1 sample".into()));
    }
    let mut shared_rng = stream_rng(seed, streams::DATA);
    let (labels, shared): (Vec<usize>, Vec<f64>) = (0..samples)
        .map(|_| (shared_rng.random_range(0..classes), shared_rng.random::<f64>()))
        .unzip();
    let members = accuracies
        .iter()
        .enumerate()
        .map(|(i, &acc)| {
            let mut rng = stream_rng(seed, streams::DATA + 1 + i as u64);
            let mut probs = Vec::with_capacity(samples * classes);
            for (&label, &u) in labels.iter().zip(&shared) {
                let own: f64 = rng.random();
                let x = if rng.random::<f64>() < correlation { u } else { own };
                let target = if x < acc {
                    label
                } else {
                    (label + rng.random_range(1..classes)) % classes
                };
                let peak = 0.9 - 0.4 * rng.random::<f64>();
                let rest = (1.0 - peak) / (classes - 1) as f64;
                probs.extend((0..classes).map(|c| if c == target { peak } else { rest }));
            }
            PredictionMatrix::new(format!("m{i}"), classes, probs, "val")
        })
        .collect::<ratepool::Result<Vec<_>>>()?;
    ModelPool::new(members, LabeledEvalSet::new(labels, classes)?)
}

/// Member accuracies plus the focal and brute-force team at every size from 2
/// up to the pool size.
pub fn pool_report(pool: &ModelPool) -> ratepool::Result<PoolReport> {
    let members = (0..pool.len())
        .map(|i| MemberSummary {
            id: pool.members()[i].model_id.clone(),
            accuracy: pool.team_accuracy(&[i]),
        })
        .collect();
    let all: Vec<usize> = (0..pool.len()).collect();
    let summary = |ids: Vec<String>, accuracy: f64| -> ratepool::Result<TeamSummary> {
        let fq_gd = focal_diversity(pool, &ids)?.fq_gd_score;
        Ok(TeamSummary { members: ids, accuracy, fq_gd })
    };
    let sizes = (2..=pool.len())
        .map(|k| {
            let f = focal_select(pool, k)?;
            let b = brute_force(pool, k)?;
            Ok(SizeRow {
                size: k,
                focal: summary(f.member_ids, f.val_accuracy)?,
                brute: summary(b.member_ids, b.val_accuracy)?,
            })
        })
        .collect::<ratepool::Result<Vec<_>>>()?;
    Ok(PoolReport { members, entire_accuracy: pool.team_accuracy(&all), sizes })
}

/// [`pool_report`] of a [`synthetic_pool`], as JSON.
#[wasm_bindgen]
pub fn ensemble_pool(
    accuracies: Vec<f64>,
    correlation: f64,
    classes: usize,
    samples: usize,
    seed: u32,
) -> Result<String, String> {
    let pool = synthetic_pool(&accuracies, correlation, classes, samples, seed.into()).map_err(fail)?;
    let report = pool_report(&pool).map_err(fail)?;
    serde_json::to_string(&report).map_err(fail)
}
