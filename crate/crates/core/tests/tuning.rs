use std::fs;

use ratepool::lr_policy::LrPolicy;
use ratepool::trainer::{Activation, Checkpoint, DataSource, SplitKind, SyntheticKind, TrainerConfig};
use ratepool::tuning::{
    best_policy, recommend_top_n, run_search, trial_id, Query, RunDir, Search, TaskConfig, TrialRecord,
    TuningSpec,
};

fn blobs_spec(policies: Vec<LrPolicy>, seeds: Vec<u64>) -> TuningSpec {
    TuningSpec {
        task_id: "blobs-small".into(),
        candidate_policies: policies,
        seeds,
        task: TaskConfig {
            data: DataSource::Synthetic {
                kind: SyntheticKind::Blobs,
                n: 150,
                d: 2,
                classes: 3,
                noise: 1.0,
                seed: 3,
            },
            hidden_layers: vec![8],
            activation: Activation::ReLU,
            trainer: TrainerConfig::new(8),
        },
        search: Search::Grid,
    }
}

fn without_time(mut recs: Vec<TrialRecord>) -> Vec<TrialRecord> {
    recs.iter_mut().for_each(|r| r.wall_time_seconds = 0.0);
    recs
}

#[test]
fn two_policies_make_two_of_everything() {
    let dir = tempfile::tempdir().unwrap();
    let run = RunDir::new(dir.path());
    let spec = blobs_spec(vec![LrPolicy::constant(0.05), LrPolicy::warmup_cosine(0.1, 0.0, 0.1)], vec![0]);
    let recs = run_search(&spec, &run, 1).unwrap();
    assert_eq!(fs::read_to_string(run.trials()).unwrap().lines().count(), 2);
    assert_eq!(fs::read_dir(run.checkpoints()).unwrap().count(), 2);
    let val_files = fs::read_dir(run.predictions())
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name().into_string().unwrap();
            name.ends_with(".val.csv") && !name.starts_with("labels")
        })
        .count();
    assert_eq!(val_files, 2);
    for r in &recs {
        assert!(r.succeeded());
        let ckpt = Checkpoint::read(dir.path().join(r.checkpoint_path.as_ref().unwrap())).unwrap();
        assert_eq!(ckpt.model.model_id, r.model_id);
        assert_eq!(ckpt.model.policy_used, r.policy);
        assert_eq!(r.trial_id, trial_id(&r.policy, r.seed, "blobs-small"));
    }
    let pool = run.pool(SplitKind::Test).unwrap();
    assert_eq!(pool.len(), 2);
}

#[test]
fn results_do_not_depend_on_job_count() {
    let spec = blobs_spec(
        vec![LrPolicy::constant(0.05), LrPolicy::constant(0.02), LrPolicy::one_cycle(0.1, 0.0, 0.3)],
        vec![0, 1],
    );
    let (d1, d3) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = run_search(&spec, &RunDir::new(d1.path()), 1).unwrap();
    let three = run_search(&spec, &RunDir::new(d3.path()), 3).unwrap();
    assert_eq!(without_time(one.clone()), without_time(three));
    for r in &one {
        let rel = r.test_prediction_path.as_ref().unwrap();
        assert_eq!(fs::read(d1.path().join(rel)).unwrap(), fs::read(d3.path().join(rel)).unwrap());
    }
}

#[test]
fn resume_only_runs_new_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let run = RunDir::new(dir.path());
    let first = blobs_spec(vec![LrPolicy::constant(0.05)], vec![0]);
    run_search(&first, &run, 1).unwrap();
    let before = fs::read_to_string(run.trials()).unwrap();
    let wider = blobs_spec(vec![LrPolicy::constant(0.05), LrPolicy::constant(0.01)], vec![0]);
    let recs = run_search(&wider, &run, 1).unwrap();
    let after = fs::read_to_string(run.trials()).unwrap();
    assert!(after.starts_with(&before));
    assert_eq!(after.lines().count(), 2);
    assert_eq!(recs.len(), 2);
    assert_eq!(run.db().load().unwrap().len(), 2);
}

#[test]
fn random_search_is_a_subset_of_the_grid() {
    let mut spec = blobs_spec(
        (1..=6).map(|i| LrPolicy::constant(0.01 * i as f64)).collect(),
        vec![0, 1],
    );
    spec.search = Search::Random { n_samples: 4, seed: 9 };
    let pairs = spec.pairs();
    assert!(!pairs.is_empty() && pairs.len() <= 4);
    let dir = tempfile::tempdir().unwrap();
    let recs = run_search(&spec, &RunDir::new(dir.path()), 1).unwrap();
    assert_eq!(recs.len(), pairs.len());
    for (r, (p, s)) in recs.iter().zip(pairs) {
        assert_eq!(r.policy, spec.candidate_policies[p]);
        assert_eq!(r.seed, s);
    }
}

#[test]
fn recommendations_follow_validation_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let spec = blobs_spec(
        vec![LrPolicy::constant(0.001), LrPolicy::constant(0.05), LrPolicy::constant(50.0)],
        vec![0],
    );
    let recs = run_search(&spec, &RunDir::new(dir.path()), 1).unwrap();
    let failed = recs.iter().filter(|r| !r.succeeded()).count();
    assert_eq!(failed, 1);
    let top = recommend_top_n(&recs, &Query::default(), 5);
    assert_eq!(top.len(), 2);
    assert!(top[0].val_accuracy >= top[1].val_accuracy);
    assert_eq!(&top[0], best_policy(&recs).unwrap());
    let q = Query {
        dataset_id: Some(spec.task.data.id()),
        model_spec_id: Some(top[0].model_spec_id.clone()),
        task_id: None,
    };
    assert_eq!(recommend_top_n(&recs, &q, 5), top);
}

#[test]
fn tuning_spec_json_round_trip() {
    let spec = blobs_spec(vec![LrPolicy::constant(0.05)], vec![0, 4]);
    let text = serde_json::to_string_pretty(&spec).unwrap();
    let back: TuningSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
    let minimal = r#"{"task_id":"t","candidate_policies":[{"family":"Constant","k0":0.1}],"seeds":[0],
        "task":{"data":{"source":"synthetic","kind":"Blobs","n":50,"d":2,"classes":2,"noise":0.5,"seed":0},
        "hidden_layers":[4],"activation":"ReLU","trainer":{"epochs":3}}}"#;
    let parsed: TuningSpec = serde_json::from_str(minimal).unwrap();
    assert_eq!(parsed.search, Search::Grid);
    assert_eq!(parsed.task.trainer.batch_size, 32);
}
