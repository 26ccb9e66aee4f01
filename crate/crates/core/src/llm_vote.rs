//! Ensemble voting over per-option log-likelihoods of four-option
//! multiple-choice questions.
//!
//! Input is JSON Lines, one record per (question, model, option):
//!
//! ```json
//! {"question_id":"arc-17","model_id":"m1","option_index":2,"option_byte_length":14,"loglikelihood":-9.8,"benchmark_tag":"arc"}
//! ```
//!
//! Scores are log-likelihoods divided by the option's UTF-8 byte length.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{argmax, csv_error, plurality};
use crate::error::{Error, Result};

pub const OPTIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub question_id: String,
    pub model_id: String,
    pub option_index: usize,
    pub option_byte_length: usize,
    pub loglikelihood: f64,
    pub benchmark_tag: String,
}

/// Log-likelihood per byte of the option text.
pub fn normalize(record: &ChoiceRecord) -> Result<f64> {
    if record.option_byte_length == 0 {
        return Err(Error::param(format!(
            "question {} option {}: byte length must be at least 1",
            record.question_id, record.option_index
        )));
    }
    Ok(record.loglikelihood / record.option_byte_length as f64)
}

/// One question's normalized scores for every model.
#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub benchmark_tag: String,
    pub scores: BTreeMap<String, [f64; OPTIONS]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub questions: BTreeMap<String, Question>,
    /// Questions removed because some model lacked exactly four options.
    pub dropped: Vec<String>,
    pub records_read: usize,
}

impl Ingested {
    pub fn model_ids(&self) -> BTreeSet<String> {
        self.questions
            .values()
            .flat_map(|q| q.scores.keys().cloned())
            .collect()
    }

    /// Question count per benchmark tag.
    pub fn tag_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for q in self.questions.values() {
            *out.entry(q.benchmark_tag.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Parses JSONL records from text; `origin` names the source in errors.
pub fn parse_records(text: &str, origin: &str) -> Result<Vec<ChoiceRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::parse(format!("{origin}:{}", i + 1), e.to_string()))
        })
        .collect()
}

pub fn ingest(paths: &[impl AsRef<Path>]) -> Result<Ingested> {
    let mut records = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        records.extend(parse_records(&text, &p.display().to_string())?);
    }
    ingest_records(records)
}

/// Groups records by question and drops every question for which some model
/// seen anywhere in the input does not have exactly the options `0..4`, each
/// once.
pub fn ingest_records(records: Vec<ChoiceRecord>) -> Result<Ingested> {
    let records_read = records.len();
    let models: BTreeSet<String> = records.iter().map(|r| r.model_id.clone()).collect();
    let mut grouped: BTreeMap<String, Vec<ChoiceRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.question_id.clone()).or_default().push(r);
    }
    let mut questions = BTreeMap::new();
    let mut dropped = Vec::new();
    'question: for (qid, recs) in grouped {
        let mut per_model: BTreeMap<&str, Vec<&ChoiceRecord>> = BTreeMap::new();
        for r in &recs {
            per_model.entry(r.model_id.as_str()).or_default().push(r);
        }
        let mut scores = BTreeMap::new();
        for m in &models {
            let Some(opts) = per_model.get(m.as_str()) else {
                dropped.push(qid);
                continue 'question;
            };
            let indices: BTreeSet<usize> = opts.iter().map(|r| r.option_index).collect();
            if opts.len() != OPTIONS || indices != (0..OPTIONS).collect() {
                dropped.push(qid);
                continue 'question;
            }
            let mut row = [0.0; OPTIONS];
            for r in opts {
                row[r.option_index] = normalize(r)?;
            }
            scores.insert(m.clone(), row);
        }
        questions.insert(
            qid,
            Question {
                benchmark_tag: recs[0].benchmark_tag.clone(),
                scores,
            },
        );
    }
    Ok(Ingested {
        questions,
        dropped,
        records_read,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoteMode {
    /// Average normalized scores across models, then argmax.
    Soft,
    /// Softmax each model's normalized scores, average the probabilities.
    SoftProb,
    /// Plurality of per-model argmaxes.
    Majority,
}

impl fmt::Display for VoteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VoteMode::Soft => "soft",
            VoteMode::SoftProb => "soft-prob",
            VoteMode::Majority => "majority",
        })
    }
}

impl FromStr for VoteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(VoteMode::Soft),
            "soft-prob" => Ok(VoteMode::SoftProb),
            "majority" => Ok(VoteMode::Majority),
            other => Err(Error::param(format!("unknown vote mode {other:?}"))),
        }
    }
}

fn softmax(scores: &[f64; OPTIONS]) -> [f64; OPTIONS] {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = scores.map(|s| (s - max).exp());
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Ensemble answer for one question. Majority ties go to the tied option
/// with the larger summed normalized score, then to the lower index.
pub fn ensemble_answer(question: &Question, model_ids: &[String], mode: VoteMode) -> Result<usize> {
    if model_ids.is_empty() {
        return Err(Error::param("an ensemble answer needs at least one model"));
    }
    let rows = model_ids
        .iter()
        .map(|m| {
            question
                .scores
                .get(m)
                .ok_or_else(|| Error::NotFound(format!("no scores from model {m:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = rows.len() as f64;
    let mut sum = [0.0; OPTIONS];
    match mode {
        VoteMode::Soft => {
            for r in &rows {
                sum.iter_mut().zip(r.iter()).for_each(|(a, v)| *a += v);
            }
            sum.iter_mut().for_each(|v| *v /= k);
            Ok(argmax(&sum))
        }
        VoteMode::SoftProb => {
            for r in &rows {
                sum.iter_mut().zip(softmax(r)).for_each(|(a, v)| *a += v);
            }
            sum.iter_mut().for_each(|v| *v /= k);
            Ok(argmax(&sum))
        }
        VoteMode::Majority => {
            let mut votes = [0usize; OPTIONS];
            for r in &rows {
                votes[argmax(&r[..])] += 1;
                sum.iter_mut().zip(r.iter()).for_each(|(a, v)| *a += v);
            }
            Ok(plurality(&votes, &sum))
        }
    }
}

/// Ensemble answers for every ingested question.
pub fn answer_all(data: &Ingested, model_ids: &[String], mode: VoteMode) -> Result<BTreeMap<String, usize>> {
    data.questions
        .iter()
        .map(|(qid, q)| Ok((qid.clone(), ensemble_answer(q, model_ids, mode)?)))
        .collect()
}

/// Correct option per question.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoldKey(pub BTreeMap<String, usize>);

impl GoldKey {
    /// Reads CSV `question_id,answer_index`.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut map = BTreeMap::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let loc = format!(
                "{}:{}",
                path.display(),
                rec.position().map(|p| p.line()).unwrap_or(0)
            );
            if rec.len() != 2 {
                return Err(Error::parse(loc, "expected question_id,answer_index"));
            }
            let answer: usize = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(&loc, format!("bad answer index {:?}", &rec[1])))?;
            map.insert(rec[0].trim().to_string(), answer);
        }
        Ok(GoldKey(map))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagScore {
    pub benchmark_tag: String,
    pub mode: VoteMode,
    pub accuracy: f64,
    pub n_questions: usize,
}

/// Accuracy per benchmark tag. Every answered question must be in `gold`.
pub fn score(
    answers: &BTreeMap<String, usize>,
    data: &Ingested,
    gold: &GoldKey,
    mode: VoteMode,
) -> Result<Vec<TagScore>> {
    if answers.is_empty() || !answers.keys().any(|q| gold.0.contains_key(q)) {
        return Err(Error::EmptyResult("no answered question has a gold answer".into()));
    }
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (qid, &ans) in answers {
        let truth = gold
            .0
            .get(qid)
            .ok_or_else(|| Error::NotFound(format!("question {qid:?} is missing from the gold key")))?;
        let tag = data
            .questions
            .get(qid)
            .map(|q| q.benchmark_tag.as_str())
            .ok_or_else(|| Error::NotFound(format!("question {qid:?} was not ingested")))?;
        let entry = tally.entry(tag).or_insert((0, 0));
        entry.1 += 1;
        if ans == *truth {
            entry.0 += 1;
        }
    }
    Ok(tally
        .into_iter()
        .map(|(tag, (hits, n))| TagScore {
            benchmark_tag: tag.to_string(),
            mode,
            accuracy: hits as f64 / n as f64,
            n_questions: n,
        })
        .collect())
}

/// CSV with header `benchmark_tag,mode,accuracy,n_questions`.
pub fn write_scores_csv<W: Write>(scores: &[TagScore], mut out: W) -> Result<()> {
    let io = |e| Error::io("<scores>", e);
    writeln!(out, "benchmark_tag,mode,accuracy,n_questions").map_err(io)?;
    for s in scores {
        writeln!(out, "{},{},{},{}", s.benchmark_tag, s.mode, s.accuracy, s.n_questions).map_err(io)?;
    }
    Ok(())
}
