//! `ratepool` command-line front end.
//!
//! Every failure ends with one line on stderr, `error[<category>]: <message>`,
//! and exit code 1. Usage errors exit with 2.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ratepool::ensemble::{accuracy, label_accuracy, majority_vote, soft_vote, LabeledEvalSet, PredictionMatrix};
use ratepool::llm_vote::{self, GoldKey, VoteMode};
use ratepool::lr_policy::LrPolicy;
use ratepool::selection::{self, Method, SweepOptions};
use ratepool::trainer::{parameter_cosine, predict_proba, train, Checkpoint, SplitKind};
use ratepool::tuning::{best_policy, run_search, RunDir, TaskConfig, TuningSpec};
use ratepool::variance::{self, VarianceSimConfig};

#[derive(Parser)]
#[command(name = "ratepool", version, about = "Learning-rate tuning into ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid or random search over LR policies into a run directory.
    Tune(TuneArgs),
    /// Train one model under one policy and seed.
    Train(TrainArgs),
    /// Prediction CSV for one split from a checkpoint.
    Predict(PredictArgs),
    /// Pick an ensemble team from a run, or sweep every method and size.
    Select(SelectArgs),
    /// Combine prediction CSVs by soft or majority vote.
    Vote(VoteArgs),
    /// Render an LR policy as a `t,lr` CSV.
    Schedule(ScheduleArgs),
    /// Compare predicted and simulated parameter variance.
    Simvar(SimvarArgs),
    /// Parameter cosine between checkpoints, or focal diversity of a team.
    Diversity(DiversityArgs),
    /// Vote over multiple-choice log-likelihood logs.
    LlmVote(LlmVoteArgs),
}

#[derive(Args)]
struct TuneArgs {
    /// TuningSpec JSON.
    #[arg(long)]
    config: PathBuf,
    /// Run directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Replace the spec's seed list with this one seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

/// Config for `train`.
#[derive(Debug, Serialize, Deserialize)]
struct TrainSpec {
    task: TaskConfig,
    policy: LrPolicy,
    #[serde(default)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON with `task`, `policy` and optional `seed`.
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "val")]
    split: SplitKind,
    /// Prediction CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the split's labels here.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Run directory produced by `tune`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, required_unless_present = "sweep")]
    method: Option<Method>,
    /// Team size(s); a sweep defaults to 2..=min(15, pool size).
    #[arg(long, value_delimiter = ',')]
    size: Vec<usize>,
    /// Every method at every size, plus best-single and entire-ensemble rows.
    #[arg(long, conflicts_with = "method")]
    sweep: bool,
    /// Random teams drawn per size.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report directory; defaults to `<run>/reports`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VoteArgs {
    /// Prediction CSVs to combine.
    #[arg(required = true)]
    predictions: Vec<PathBuf>,
    #[arg(long, default_value = "soft")]
    mode: VoteKind,
    /// Labels CSV; prints accuracy when given.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Ensemble prediction CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VoteKind {
    Soft,
    Majority,
}

#[derive(Args)]
struct ScheduleArgs {
    /// LrPolicy JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Training budget in steps.
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimvarArgs {
    /// VarianceSimConfig JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
    /// Directory for `simvar.json` and `trajectory.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiversityArgs {
    /// Checkpoints to compare pairwise.
    #[arg(long, num_args = 2.., conflicts_with_all = ["run", "team"])]
    checkpoints: Vec<PathBuf>,
    /// Keep the output layer in the cosine.
    #[arg(long)]
    include_output: bool,
    /// Run directory for focal diversity.
    #[arg(long, requires = "team")]
    run: Option<PathBuf>,
    /// Comma-separated model ids.
    #[arg(long, value_delimiter = ',')]
    team: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LlmVoteArgs {
    /// JSONL log files.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// CSV `question_id,answer_index`.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value = "soft")]
    mode: VoteMode,
    /// Models to combine; all by default.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| ratepool::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        ratepool::Error::Parse {
            location: format!("{}:{}", path.display(), e.line()),
            message: e.to_string(),
        }
        .into()
    })
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).map_err(|e| ratepool::Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let mut spec: TuningSpec = read_json(&a.config)?;
    if let Some(s) = a.seed {
        spec.seeds = vec![s];
    }
    let run = RunDir::new(&a.out);
    let records = run_search(&spec, &run, a.jobs)?;
    for r in &records {
        println!(
            "{} {:<8} val_acc={} test_acc={} {}",
            r.trial_id,
            format!("{:?}", r.status).to_lowercase(),
            r.val_accuracy,
            r.test_accuracy,
            r.policy.label()
        );
    }
    let best = best_policy(&records)?;
    fs::write(run.reports().join("best_policy.json"), serde_json::to_string_pretty(best)? + "\n")?;
    println!("best: {} ({})", best.policy.label(), best.trial_id);
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut spec: TrainSpec = read_json(&a.config)?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let data = spec.task.data.load()?;
    let model_spec = spec.task.model_spec(&data, spec.seed)?;
    let cfg = spec.task.trainer_for(spec.seed);
    let model = train(&model_spec, &data, &spec.policy, &cfg)?;
    println!("{}", serde_json::to_string(&model.final_metrics)?);
    Checkpoint::new(model, spec.task.data.clone(), cfg).write(&a.out)?;
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let ckpt = Checkpoint::read(&a.checkpoint)?;
    let data = ckpt.data_source.load()?;
    let preds = predict_proba(&ckpt.model, &data, a.split)?;
    if let Some(p) = &a.labels {
        data.eval_set(a.split).write(p)?;
    }
    write_out(a.out.as_deref(), &preds.to_csv_string()?)
}

fn select(a: SelectArgs) -> Result<()> {
    let run = RunDir::new(&a.run);
    let val = run.pool(SplitKind::Val)?;
    let test = run.pool(SplitKind::Test).ok();
    let out = a.out.clone().unwrap_or_else(|| run.reports());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    if a.sweep {
        let sizes = if a.size.is_empty() {
            (2..=val.len().min(15)).collect()
        } else {
            a.size.clone()
        };
        let opts = SweepOptions {
            methods: Method::ALL.to_vec(),
            sizes,
            random_trials: a.trials,
            seed: a.seed,
        };
        let report = selection::selection_sweep(&val, test.as_ref(), &opts)?;
        let csv = report.to_csv();
        fs::write(out.join("sweep.csv"), &csv)?;
        fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        print!("{csv}");
        return Ok(());
    }
    let method = a.method.expect("clap enforces --method without --sweep");
    let &[k] = a.size.as_slice() else {
        bail!(ratepool::Error::Parameter("give exactly one --size for a single method".into()));
    };
    let mut team = match method {
        Method::Brute => selection::brute_force(&val, k)?,
        Method::Greedy => selection::greedy(&val, k)?,
        Method::Focal => selection::focal_select(&val, k)?,
        Method::Random => {
            let r = selection::random_select(&val, k, a.trials, a.seed)?;
            let text = serde_json::to_string_pretty(&r)? + "\n";
            fs::write(out.join(format!("select-random-{k}.json")), &text)?;
            print!("{text}");
            return Ok(());
        }
    };
    if let Some(t) = &test {
        team.test_accuracy = Some(t.accuracy_of(&team.member_ids)?);
    }
    let text = serde_json::to_string_pretty(&team)? + "\n";
    fs::write(out.join(format!("select-{method}-{k}.json")), &text)?;
    print!("{text}");
    Ok(())
}

fn vote(a: VoteArgs) -> Result<()> {
    let members = a
        .predictions
        .iter()
        .map(PredictionMatrix::read)
        .collect::<ratepool::Result<Vec<_>>>()?;
    let refs: Vec<&PredictionMatrix> = members.iter().collect();
    let eval = match &a.labels {
        Some(p) => Some(LabeledEvalSet::read(p, Some(members[0].n_classes))?),
        None => None,
    };
    let (ensemble, acc) = match a.mode {
        VoteKind::Soft => {
            let e = soft_vote(&refs)?;
            let acc = eval.as_ref().map(|ev| accuracy(&e, ev)).transpose()?;
            (e, acc)
        }
        VoteKind::Majority => {
            let labels = majority_vote(&refs)?;
            let acc = eval.as_ref().map(|ev| label_accuracy(&labels, ev)).transpose()?;
            let c = members[0].n_classes;
            let mut probs = vec![0.0; labels.len() * c];
            for (s, &l) in labels.iter().enumerate() {
                probs[s * c + l] = 1.0;
            }
            let ids: Vec<&str> = members.iter().map(|m| m.model_id.as_str()).collect();
            let e = PredictionMatrix::new(format!("majority[{}]", ids.join("+")), c, probs, &members[0].split_tag)?;
            (e, acc)
        }
    };
    write_out(a.out.as_deref(), &ensemble.to_csv_string()?)?;
    if let Some(acc) = acc {
        eprintln!("accuracy {acc}");
    }
    Ok(())
}

fn schedule(a: ScheduleArgs) -> Result<()> {
    let policy: LrPolicy = read_json(&a.config)?;
    let mut buf = Vec::new();
    policy.write_schedule_csv(a.steps, &mut buf)?;
    write_out(a.out.as_deref(), &String::from_utf8(buf)?)
}

fn simvar(a: SimvarArgs) -> Result<()> {
    let mut cfg: VarianceSimConfig = read_json(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    let cmp = variance::compare(&cfg, a.confidence)?;
    let text = serde_json::to_string_pretty(&cmp)? + "\n";
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("simvar.json"), &text)?;
        let rows = variance::trajectory(&cfg, a.confidence)?;
        let mut buf = Vec::new();
        variance::write_trajectory_csv(&rows, &mut buf)?;
        fs::write(dir.join("trajectory.csv"), buf)?;
    }
    print!("{text}");
    Ok(())
}

fn diversity(a: DiversityArgs) -> Result<()> {
    if let Some(run) = &a.run {
        let pool = RunDir::new(run).pool(SplitKind::Val)?;
        let report = selection::focal_diversity(&pool, &a.team)?;
        return write_out(a.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"));
    }
    if a.checkpoints.len() < 2 {
        bail!(ratepool::Error::Parameter("give --run with --team, or at least two --checkpoints".into()));
    }
    let models = a
        .checkpoints
        .iter()
        .map(|p| Checkpoint::read(p).map(|c| c.model))
        .collect::<ratepool::Result<Vec<_>>>()?;
    let mut csv = String::from("model_a,model_b,cosine\n");
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let c = parameter_cosine(&models[i], &models[j], !a.include_output)?;
            csv.push_str(&format!("{},{},{}\n", models[i].model_id, models[j].model_id, c));
        }
    }
    write_out(a.out.as_deref(), &csv)
}

fn llm(a: LlmVoteArgs) -> Result<()> {
    let data = llm_vote::ingest(&a.logs)?;
    let gold = GoldKey::read(&a.gold)?;
    let models: Vec<String> = if a.models.is_empty() {
        data.model_ids().into_iter().collect()
    } else {
        a.models.clone()
    };
    let answers = llm_vote::answer_all(&data, &models, a.mode)?;
    let scores = llm_vote::score(&answers, &data, &gold, a.mode)?;
    let mut buf = Vec::new();
    llm_vote::write_scores_csv(&scores, &mut buf)?;
    eprintln!(
        "{} records, {} questions kept, {} dropped",
        data.records_read,
        data.questions.len(),
        data.dropped.len()
    );
    write_out(a.out.as_deref(), &String::from_utf8(buf)?)
}

fn category(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<ratepool::Error>() {
        e.category()
    } else if err.downcast_ref::<io::Error>().is_some() {
        "io"
    } else if err.downcast_ref::<serde_json::Error>().is_some() {
        "json"
    } else {
        "internal"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tune(a) => tune(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Select(a) => select(a),
        Command::Vote(a) => vote(a),
        Command::Schedule(a) => schedule(a),
        Command::Simvar(a) => simvar(a),
        Command::Diversity(a) => diversity(a),
        Command::LlmVote(a) => llm(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            let msg = msg.replace('\n', " ");
            eprintln!("error[{}]: {msg}", category(&e));
            ExitCode::FAILURE
        }
    }
}
