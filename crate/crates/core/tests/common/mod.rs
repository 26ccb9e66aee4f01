//! Oracles and fixtures shared by the integration tests. The oracles are
//! written from the definitions, not from the library code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratepool::ensemble::{LabeledEvalSet, PredictionMatrix};
use ratepool::lr_policy::{LrPolicy, PolicyFamily};
use ratepool::selection::ModelPool;
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// schedules

pub fn step_of(fraction: f64, total: usize) -> usize {
    (fraction * total as f64 + 1e-9).floor() as usize
}

fn half_cosine(from: f64, to: f64, x: f64) -> f64 {
    to + (from - to) * 0.5 * (1.0 + (PI * x).cos())
}

/// Closed-form schedule value, evaluated directly from the family definitions.
pub fn schedule_oracle(p: &LrPolicy, t: usize, total: usize) -> f64 {
    if total == 1 {
        return p.k0;
    }
    match p.family {
        PolicyFamily::Constant => p.k0,
        PolicyFamily::MultiStep => {
            let mut lr = p.k0;
            for &m in &p.milestones {
                if t >= step_of(m, total) {
                    lr *= p.gamma;
                }
            }
            lr
        }
        PolicyFamily::WarmupCosineAnnealing => {
            let w = step_of(p.warmup_fraction.unwrap_or(0.1), total);
            if t < w {
                p.k1 + (p.k0 - p.k1) * (t as f64 / w as f64)
            } else {
                half_cosine(p.k0, p.k1, (t - w) as f64 / (total - w) as f64)
            }
        }
        PolicyFamily::OneCycle => {
            let peak = ((p.warmup_fraction.unwrap_or(0.3) * total as f64).round() as usize).min(total - 1);
            if t < peak {
                half_cosine(p.k1, p.k0, t as f64 / peak as f64)
            } else {
                half_cosine(p.k0, p.k1, (t - peak) as f64 / (total - peak) as f64)
            }
        }
        PolicyFamily::Composite => {
            let (s, lo, hi) = composite_stage(p, t, total);
            let len = hi - lo;
            let n = p.cycles_per_stage[s] as usize;
            let off = t - lo;
            let mut j = 0;
            while j + 1 < n && (j + 1) * len / n <= off {
                j += 1;
            }
            let (c0, c1) = (j * len / n, ((j + 1) * len / n).max(j * len / n + 1));
            let scale = p.gamma.powi(s as i32);
            if c1 - c0 == 1 {
                p.k0 * scale
            } else {
                half_cosine(p.k0 * scale, p.k1 * scale, (off - c0) as f64 / (c1 - c0 - 1) as f64)
            }
        }
    }
}

/// Composite stage index and its `[lo, hi)` step range.
pub fn composite_stage(p: &LrPolicy, t: usize, total: usize) -> (usize, usize, usize) {
    let mut bounds = vec![0];
    bounds.extend(p.milestones.iter().map(|&m| step_of(m, total)));
    bounds.push(total);
    let s = (1..bounds.len() - 1).filter(|&i| bounds[i] <= t).count();
    (s, bounds[s], bounds[s + 1])
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

// ---------------------------------------------------------------------------
// selection

fn arg_max(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

/// Soft-vote accuracy of `members` (already in pool order).
pub fn oracle_team_accuracy(members: &[&PredictionMatrix], labels: &[usize]) -> f64 {
    let c = members[0].n_classes;
    let mut hits = 0;
    for (s, &y) in labels.iter().enumerate() {
        let mut avg = vec![0.0; c];
        for m in members {
            for (a, p) in avg.iter_mut().zip(&m.probs[s * c..(s + 1) * c]) {
                *a += p;
            }
        }
        for a in &mut avg {
            *a /= members.len() as f64;
        }
        if arg_max(&avg) == y {
            hits += 1;
        }
    }
    hits as f64 / labels.len() as f64
}

/// Exhaustive search over bitmasks: best accuracy, ties to the
/// lexicographically smallest sorted id list.
pub fn oracle_brute(members: &[PredictionMatrix], labels: &[usize], k: usize) -> (Vec<String>, f64) {
    let mut sorted: Vec<&PredictionMatrix> = members.iter().collect();
    sorted.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    let mut best: Option<(Vec<String>, f64)> = None;
    for mask in 0u32..(1 << sorted.len()) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let team: Vec<&PredictionMatrix> = (0..sorted.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| sorted[i])
            .collect();
        let ids: Vec<String> = team.iter().map(|m| m.model_id.clone()).collect();
        let acc = oracle_team_accuracy(&team, labels);
        let better = match &best {
            None => true,
            Some((bids, bacc)) => acc > *bacc || (acc == *bacc && ids < *bids),
        };
        if better {
            best = Some((ids, acc));
        }
    }
    best.unwrap()
}

/// Generalized diversity of each focal member, tallied sample by sample.
pub fn oracle_lambdas(team: &[&PredictionMatrix], labels: &[usize]) -> Vec<Option<f64>> {
    let m = team.len() as f64;
    let fails = |p: &PredictionMatrix, s: usize| arg_max(&p.probs[s * p.n_classes..(s + 1) * p.n_classes]) != labels[s];
    team.iter()
        .map(|focal| {
            let set: Vec<usize> = (0..labels.len()).filter(|&s| fails(focal, s)).collect();
            if set.is_empty() {
                return None;
            }
            let (mut p1, mut p2) = (0.0, 0.0);
            for &s in &set {
                let c = team.iter().filter(|p| fails(p, s)).count() as f64;
                p1 += c / m;
                p2 += c * (c - 1.0) / (m * (m - 1.0));
            }
            let n = set.len() as f64;
            Some(1.0 - (p2 / n) / (p1 / n))
        })
        .collect()
}

/// Seeded random pool: `n` models of varying skill on `samples` points.
pub fn random_pool(seed: u64, n: usize, samples: usize, classes: usize) -> (Vec<PredictionMatrix>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..samples).map(|_| rng.random_range(0..classes)).collect();
    let members = (0..n)
        .map(|i| {
            let skill: f64 = rng.random_range(0.3..0.9);
            let mut probs = Vec::with_capacity(samples * classes);
            for &y in &labels {
                let mut row: Vec<f64> = (0..classes).map(|_| rng.random::<f64>() + 0.01).collect();
                if rng.random::<f64>() < skill {
                    row[y] += 1.5;
                }
                let total: f64 = row.iter().sum();
                probs.extend(row.iter().map(|v| v / total));
            }
            PredictionMatrix::new(format!("m{i}"), classes, probs, "val").unwrap()
        })
        .collect();
    (members, labels)
}

pub fn pool_of(members: Vec<PredictionMatrix>, labels: Vec<usize>) -> ModelPool {
    let c = members[0].n_classes;
    ModelPool::new(members, LabeledEvalSet::new(labels, c).unwrap()).unwrap()
}

/// Binary predictions, label `s % 2`: 0.8 on the true class except on the
/// `wrong` samples, where it goes to the other class.
pub fn binary_member(id: &str, n: usize, wrong: &[usize]) -> PredictionMatrix {
    let mut probs = Vec::with_capacity(2 * n);
    for s in 0..n {
        let p_true = if wrong.contains(&s) { 0.2 } else { 0.8 };
        let row = if s % 2 == 0 { [p_true, 1.0 - p_true] } else { [1.0 - p_true, p_true] };
        probs.extend(row);
    }
    PredictionMatrix::new(id, 2, probs, "val").unwrap()
}

pub fn binary_labels(n: usize) -> Vec<usize> {
    (0..n).map(|s| s % 2).collect()
}

/// Four members over six three-class samples. On every sample exactly two
/// members are wrong (each pair of members once), yet the soft vote is right.
pub fn four_member_fixture() -> (Vec<PredictionMatrix>, Vec<usize>) {
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let labels: Vec<usize> = (0..6).map(|s| s % 3).collect();
    let members = (0..4)
        .map(|m| {
            let mut probs = Vec::new();
            for (s, &(a, b)) in pairs.iter().enumerate() {
                let y = labels[s];
                let w = (y + 1) % 3;
                let mut row = [0.15; 3];
                if m == a || m == b {
                    row = [0.2; 3];
                    row[w] = 0.5;
                    row[y] = 0.3;
                } else {
                    row[y] = 0.7;
                }
                probs.extend(row);
            }
            PredictionMatrix::new(format!("member{m}"), 3, probs, "test").unwrap()
        })
        .collect();
    (members, labels)
}

// ---------------------------------------------------------------------------
// llm voting

/// Three models, five questions, four options each; model `c` is missing
/// option 3 of `q5`, so that question is dropped.
pub const LLM_FIXTURE: &str = r#"{"question_id":"q1","model_id":"a","option_index":0,"option_byte_length":2,"loglikelihood":-4.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"a","option_index":1,"option_byte_length":4,"loglikelihood":-2.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"a","option_index":2,"option_byte_length":8,"loglikelihood":-16.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"a","option_index":3,"option_byte_length":4,"loglikelihood":-8.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"b","option_index":0,"option_byte_length":2,"loglikelihood":-1.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"b","option_index":1,"option_byte_length":4,"loglikelihood":-6.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"b","option_index":2,"option_byte_length":8,"loglikelihood":-8.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"b","option_index":3,"option_byte_length":4,"loglikelihood":-8.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"c","option_index":0,"option_byte_length":2,"loglikelihood":-3.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"c","option_index":1,"option_byte_length":4,"loglikelihood":-3.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"c","option_index":2,"option_byte_length":8,"loglikelihood":-12.0,"benchmark_tag":"arc"}
{"question_id":"q1","model_id":"c","option_index":3,"option_byte_length":4,"loglikelihood":-10.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"a","option_index":0,"option_byte_length":1,"loglikelihood":-2.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"a","option_index":1,"option_byte_length":8,"loglikelihood":-4.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"a","option_index":2,"option_byte_length":2,"loglikelihood":-3.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"a","option_index":3,"option_byte_length":4,"loglikelihood":-6.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"b","option_index":0,"option_byte_length":1,"loglikelihood":-1.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"b","option_index":1,"option_byte_length":8,"loglikelihood":-8.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"b","option_index":2,"option_byte_length":2,"loglikelihood":-2.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"b","option_index":3,"option_byte_length":4,"loglikelihood":-4.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"c","option_index":0,"option_byte_length":1,"loglikelihood":-3.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"c","option_index":1,"option_byte_length":8,"loglikelihood":-2.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"c","option_index":2,"option_byte_length":2,"loglikelihood":-4.0,"benchmark_tag":"arc"}
{"question_id":"q2","model_id":"c","option_index":3,"option_byte_length":4,"loglikelihood":-8.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"a","option_index":0,"option_byte_length":4,"loglikelihood":-4.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"a","option_index":1,"option_byte_length":4,"loglikelihood":-8.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"a","option_index":2,"option_byte_length":4,"loglikelihood":-4.5,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"a","option_index":3,"option_byte_length":4,"loglikelihood":-12.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"b","option_index":0,"option_byte_length":4,"loglikelihood":-4.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"b","option_index":1,"option_byte_length":4,"loglikelihood":-12.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"b","option_index":2,"option_byte_length":4,"loglikelihood":-4.5,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"b","option_index":3,"option_byte_length":4,"loglikelihood":-8.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"c","option_index":0,"option_byte_length":4,"loglikelihood":-12.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"c","option_index":1,"option_byte_length":4,"loglikelihood":-8.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"c","option_index":2,"option_byte_length":4,"loglikelihood":-2.0,"benchmark_tag":"arc"}
{"question_id":"q3","model_id":"c","option_index":3,"option_byte_length":4,"loglikelihood":-16.0,"benchmark_tag":"arc"}
{"question_id":"q4","model_id":"a","option_index":0,"option_byte_length":2,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"a","option_index":1,"option_byte_length":2,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"a","option_index":2,"option_byte_length":2,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"a","option_index":3,"option_byte_length":2,"loglikelihood":-1.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"b","option_index":0,"option_byte_length":2,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"b","option_index":1,"option_byte_length":2,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"b","option_index":2,"option_byte_length":2,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"b","option_index":3,"option_byte_length":2,"loglikelihood":-1.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"c","option_index":0,"option_byte_length":2,"loglikelihood":-0.5,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"c","option_index":1,"option_byte_length":2,"loglikelihood":-16.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"c","option_index":2,"option_byte_length":2,"loglikelihood":-16.0,"benchmark_tag":"mmlu"}
{"question_id":"q4","model_id":"c","option_index":3,"option_byte_length":2,"loglikelihood":-16.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"a","option_index":0,"option_byte_length":1,"loglikelihood":-1.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"a","option_index":1,"option_byte_length":1,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"a","option_index":2,"option_byte_length":1,"loglikelihood":-3.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"a","option_index":3,"option_byte_length":1,"loglikelihood":-4.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"b","option_index":0,"option_byte_length":1,"loglikelihood":-1.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"b","option_index":1,"option_byte_length":1,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"b","option_index":2,"option_byte_length":1,"loglikelihood":-3.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"b","option_index":3,"option_byte_length":1,"loglikelihood":-4.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"c","option_index":0,"option_byte_length":1,"loglikelihood":-1.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"c","option_index":1,"option_byte_length":1,"loglikelihood":-2.0,"benchmark_tag":"mmlu"}
{"question_id":"q5","model_id":"c","option_index":2,"option_byte_length":1,"loglikelihood":-3.0,"benchmark_tag":"mmlu"}
"#;

pub const LLM_GOLD: &str = "question_id,answer_index\nq1,1\nq2,1\nq3,2\nq4,3\nq5,0\n";

/// Hand-worked normalized scores (log-likelihood / bytes) for the kept
/// questions, per model `a`, `b`, `c`.
pub const LLM_NORMALIZED: [(&str, [[f64; 4]; 3]); 4] = [
    ("q1", [[-2.0, -0.5, -2.0, -2.0], [-0.5, -1.5, -1.0, -2.0], [-1.5, -0.75, -1.5, -2.5]]),
    ("q2", [[-2.0, -0.5, -1.5, -1.5], [-1.0, -1.0, -1.0, -1.0], [-3.0, -0.25, -2.0, -2.0]]),
    ("q3", [[-1.0, -2.0, -1.125, -3.0], [-1.0, -3.0, -1.125, -2.0], [-3.0, -2.0, -0.5, -4.0]]),
    ("q4", [[-1.0, -1.0, -1.0, -0.5], [-1.0, -1.0, -1.0, -0.5], [-0.25, -8.0, -8.0, -8.0]]),
];

/// Hand-worked answers: soft averages the rows above, majority counts the
/// per-model argmaxes.
pub const LLM_SOFT_ANSWERS: [(&str, usize); 4] = [("q1", 1), ("q2", 1), ("q3", 2), ("q4", 0)];
pub const LLM_MAJORITY_ANSWERS: [(&str, usize); 4] = [("q1", 1), ("q2", 1), ("q3", 0), ("q4", 3)];
