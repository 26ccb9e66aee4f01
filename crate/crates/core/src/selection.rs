//! Ensemble team selection over a pool of validation predictions.
//!
//! Four selection methods are provided: exhaustive search, greedy forward
//! selection, random teams, and focal-diversity selection. Teams are always
//! chosen on the validation split; test accuracy is only reported.
//!
//! Focal diversity: for a team of `M` members and a focal member `f`, take the
//! validation samples `f` gets wrong. With `p_k` the share of those samples on
//! which exactly `k` members fail,
//!
//! ```text
//! p(1) = sum_k k/M * p_k
//! p(2) = sum_k k(k-1)/(M(M-1)) * p_k
//! lambda_f = 1 - p(2)/p(1)
//! ```
//!
//! and the team's FQ-GD score is `1 - mean_f lambda_f`, so lower scores mean
//! failures coincide less often.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::ensemble::{argmax, EnsembleTeam, LabeledEvalSet, PredictionMatrix};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

/// Largest pool the enumerating methods accept.
pub const ENUMERATION_CAP: usize = 24;

/// Validation predictions of a set of models, ordered by model id.
#[derive(Debug, Clone)]
pub struct ModelPool {
    members: Vec<PredictionMatrix>,
    eval: LabeledEvalSet,
    /// `failures[m][s]`: model `m` misclassifies sample `s`.
    failures: Vec<Vec<bool>>,
}

impl ModelPool {
    pub fn new(mut members: Vec<PredictionMatrix>, eval: LabeledEvalSet) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::param("a model pool needs at least one model"));
        }
        members.sort_by(|a, b| a.model_id.cmp(&b.model_id));
        if let Some(w) = members.windows(2).find(|w| w[0].model_id == w[1].model_id) {
            return Err(Error::param(format!("duplicate model id {:?}", w[0].model_id)));
        }
        for m in &members {
            if m.n_samples != eval.len() || m.n_classes != eval.n_classes {
                return Err(Error::Shape(format!(
                    "{} is {}x{} but the evaluation set is {}x{}",
                    m.model_id,
                    m.n_samples,
                    m.n_classes,
                    eval.len(),
                    eval.n_classes
                )));
            }
        }
        let failures = members
            .iter()
            .map(|m| (0..m.n_samples).map(|s| m.argmax(s) != eval.labels[s]).collect())
            .collect();
        Ok(ModelPool {
            members,
            eval,
            failures,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|m| m.model_id.as_str())
    }

    pub fn members(&self) -> &[PredictionMatrix] {
        &self.members
    }

    pub fn eval(&self) -> &LabeledEvalSet {
        &self.eval
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.members
            .binary_search_by(|m| m.model_id.as_str().cmp(id))
            .map_err(|_| Error::NotFound(format!("model {id:?} is not in the pool")))
    }

    fn indices_of(&self, ids: &[String]) -> Result<Vec<usize>> {
        let mut idx = ids.iter().map(|id| self.index_of(id)).collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("a team may not list a model twice"));
        }
        Ok(idx)
    }

    fn ids_of(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.members[i].model_id.clone()).collect()
    }

    /// Soft-vote accuracy of the members at `idx`, summed in the given order
    /// and divided by the team size exactly as [`crate::ensemble::soft_vote`] does.
    pub fn team_accuracy(&self, idx: &[usize]) -> f64 {
        let c = self.eval.n_classes;
        let k = idx.len() as f64;
        let mut row = vec![0.0; c];
        let mut hits = 0usize;
        for (s, &label) in self.eval.labels.iter().enumerate() {
            row.iter_mut().for_each(|v| *v = 0.0);
            for &m in idx {
                for (acc, v) in row.iter_mut().zip(self.members[m].row(s)) {
                    *acc += v;
                }
            }
            row.iter_mut().for_each(|v| *v /= k);
            if argmax(&row) == label {
                hits += 1;
            }
        }
        hits as f64 / self.eval.len() as f64
    }

    /// Soft-vote accuracy of a team named by ids.
    pub fn accuracy_of(&self, ids: &[String]) -> Result<f64> {
        Ok(self.team_accuracy(&self.indices_of(ids)?))
    }

    fn focal_lambdas(&self, idx: &[usize]) -> Vec<Option<f64>> {
        let m = idx.len();
        let n = self.eval.len();
        let counts: Vec<usize> = (0..n)
            .map(|s| idx.iter().filter(|&&i| self.failures[i][s]).count())
            .collect();
        let mut hist = vec![0usize; m + 1];
        idx.iter()
            .map(|&f| {
                hist.iter_mut().for_each(|h| *h = 0);
                let mut total = 0usize;
                for s in (0..n).filter(|&s| self.failures[f][s]) {
                    hist[counts[s]] += 1;
                    total += 1;
                }
                if total == 0 {
                    return None;
                }
                let (mf, total) = (m as f64, total as f64);
                let (mut p1, mut p2) = (0.0, 0.0);
                for (k, &h) in hist.iter().enumerate().skip(1) {
                    let pk = h as f64 / total;
                    let kf = k as f64;
                    p1 += kf / mf * pk;
                    p2 += kf * (kf - 1.0) / (mf * (mf - 1.0)) * pk;
                }
                Some(1.0 - p2 / p1)
            })
            .collect()
    }

    fn fq_gd(&self, idx: &[usize]) -> f64 {
        fq_gd_from(&self.focal_lambdas(idx))
    }
}

fn fq_gd_from(lambdas: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = lambdas.iter().flatten().copied().collect();
    if present.is_empty() {
        0.0
    } else {
        1.0 - present.iter().sum::<f64>() / present.len() as f64
    }
}

fn check_size(pool: &ModelPool, k: usize, min: usize) -> Result<()> {
    if k < min || k > pool.len() {
        return Err(Error::param(format!(
            "team size {k} outside [{min}, {}]",
            pool.len()
        )));
    }
    Ok(())
}

fn check_enumerable(pool: &ModelPool) -> Result<()> {
    if pool.len() > ENUMERATION_CAP {
        return Err(Error::EnumerationLimit {
            pool: pool.len(),
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

fn team(pool: &ModelPool, idx: &[usize], val_accuracy: f64) -> EnsembleTeam {
    EnsembleTeam {
        member_ids: pool.ids_of(idx),
        val_accuracy,
        test_accuracy: None,
        fq_gd_score: (idx.len() >= 2).then(|| pool.fq_gd(idx)),
    }
}

/// Size-`k` team with the highest soft-vote validation accuracy over all
/// subsets; ties go to the lexicographically smallest id set.
pub fn brute_force(pool: &ModelPool, k: usize) -> Result<EnsembleTeam> {
    check_size(pool, k, 1)?;
    check_enumerable(pool)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    // combinations come out in lexicographic order, so the first maximum wins ties
    for idx in (0..pool.len()).combinations(k) {
        let acc = pool.team_accuracy(&idx);
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, idx));
        }
    }
    let (acc, idx) = best.expect("at least one subset");
    Ok(team(pool, &idx, acc))
}

/// Greedy forward selection without replacement. Starts from the best single
/// model and adds, `k - 1` times, the unused model giving the best extended
/// team, even when that lowers accuracy. Ties go to the lowest id.
/// `member_ids` lists models in the order they were added.
pub fn greedy(pool: &ModelPool, k: usize) -> Result<EnsembleTeam> {
    check_size(pool, k, 1)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut acc = 0.0;
    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for cand in (0..pool.len()).filter(|c| !chosen.contains(c)) {
            let mut trial = chosen.clone();
            trial.push(cand);
            trial.sort_unstable();
            let a = pool.team_accuracy(&trial);
            if best.is_none_or(|(b, _)| a > b) {
                best = Some((a, cand));
            }
        }
        let (a, cand) = best.expect("k <= pool size");
        chosen.push(cand);
        acc = a;
    }
    let mut out = team(pool, &chosen, acc);
    out.member_ids = pool.ids_of(&chosen);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSelection {
    pub teams: Vec<EnsembleTeam>,
    pub mean_accuracy: f64,
    /// Population standard deviation over the trials.
    pub std_accuracy: f64,
}

/// `trials` independent uniform size-`k` teams.
pub fn random_select(pool: &ModelPool, k: usize, trials: usize, seed: u64) -> Result<RandomSelection> {
    check_size(pool, k, 1)?;
    if trials == 0 {
        return Err(Error::param("random selection needs at least one trial"));
    }
    let teams: Vec<EnsembleTeam> = (0..trials)
        .map(|r| {
            let mut rng = stream_rng(seed, streams::SELECTION + r as u64);
            let mut idx = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
            idx.sort_unstable();
            let acc = pool.team_accuracy(&idx);
            team(pool, &idx, acc)
        })
        .collect();
    let (mean_accuracy, std_accuracy) = mean_std(teams.iter().map(|t| t.val_accuracy));
    Ok(RandomSelection {
        teams,
        mean_accuracy,
        std_accuracy,
    })
}

/// Mean and population std, computed on values shifted by the first one so
/// that a constant sequence yields exactly its value and zero spread.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let Some(first) = values.clone().next() else {
        return (f64::NAN, f64::NAN);
    };
    let n = values.clone().count() as f64;
    let shift = values.clone().map(|v| v - first).sum::<f64>() / n;
    let var = values.map(|v| (v - first - shift).powi(2)).sum::<f64>() / n;
    (first + shift, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalDiversityReport {
    pub team: Vec<String>,
    /// `None` for a focal member without validation failures.
    pub per_focal_lambda: BTreeMap<String, Option<f64>>,
    pub fq_gd_score: f64,
}

pub fn focal_diversity(pool: &ModelPool, team_ids: &[String]) -> Result<FocalDiversityReport> {
    let idx = pool.indices_of(team_ids)?;
    if idx.len() < 2 {
        return Err(Error::param("focal diversity needs a team of at least two"));
    }
    let lambdas = pool.focal_lambdas(&idx);
    Ok(FocalDiversityReport {
        team: pool.ids_of(&idx),
        per_focal_lambda: pool.ids_of(&idx).into_iter().zip(lambdas.iter().copied()).collect(),
        fq_gd_score: fq_gd_from(&lambdas),
    })
}

/// Size-`k` team with the lowest FQ-GD score; ties go to the higher
/// validation accuracy, then to the lexicographically smallest id set.
pub fn focal_select(pool: &ModelPool, k: usize) -> Result<EnsembleTeam> {
    check_size(pool, k, 2)?;
    check_enumerable(pool)?;
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    for idx in (0..pool.len()).combinations(k) {
        let score = pool.fq_gd(&idx);
        if let Some((s, _, _)) = &best {
            if score > *s {
                continue;
            }
        }
        let acc = pool.team_accuracy(&idx);
        let better = match &best {
            None => true,
            Some((s, a, _)) => score < *s || acc > *a,
        };
        if better {
            best = Some((score, acc, idx));
        }
    }
    let (score, acc, idx) = best.expect("at least one subset");
    Ok(EnsembleTeam {
        member_ids: pool.ids_of(&idx),
        val_accuracy: acc,
        test_accuracy: None,
        fq_gd_score: Some(score),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute,
    Greedy,
    Random,
    Focal,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Brute, Method::Greedy, Method::Random, Method::Focal];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Brute => "brute",
            Method::Greedy => "greedy",
            Method::Random => "random",
            Method::Focal => "focal",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Method::Brute),
            "greedy" => Ok(Method::Greedy),
            "random" => Ok(Method::Random),
            "focal" => Ok(Method::Focal),
            other => Err(Error::param(format!("unknown selection method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `best_single`, `entire_ensemble` or a method name.
    pub method: String,
    pub size: usize,
    pub val_acc: f64,
    pub test_acc: Option<f64>,
    pub fq_gd: Option<f64>,
    /// For random rows: population std of the validation accuracies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_std: Option<f64>,
    /// Selected team; empty for random rows (see `random_teams`).
    pub members: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub random_teams: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub random_trials: usize,
    pub seed: u64,
}

/// Runs every method at every size and adds best-single and entire-ensemble
/// rows. `test` must hold the same model ids as `val`; when present, every
/// row also carries the team's test accuracy. Method/size pairs a method
/// cannot handle (focal at size 1) are skipped.
pub fn selection_sweep(val: &ModelPool, test: Option<&ModelPool>, opts: &SweepOptions) -> Result<SweepReport> {
    if let Some(t) = test {
        if !val.ids().eq(t.ids()) {
            return Err(Error::Shape("validation and test pools hold different models".into()));
        }
    }
    let test_acc = |ids: &[String]| -> Result<Option<f64>> {
        test.map(|t| t.accuracy_of(ids)).transpose()
    };
    let mut rows = Vec::new();
    let team_row = |method: String, t: EnsembleTeam| -> Result<SweepRow> {
        Ok(SweepRow {
            method,
            size: t.size(),
            val_acc: t.val_accuracy,
            test_acc: test_acc(&t.member_ids)?,
            fq_gd: t.fq_gd_score,
            val_std: None,
            members: t.member_ids,
            random_teams: Vec::new(),
        })
    };
    rows.push(team_row("best_single".into(), greedy(val, 1)?)?);
    let all: Vec<usize> = (0..val.len()).collect();
    rows.push(team_row("entire_ensemble".into(), team(val, &all, val.team_accuracy(&all)))?);
    for &method in &opts.methods {
        for &k in &opts.sizes {
            match method {
                Method::Brute => rows.push(team_row(method.to_string(), brute_force(val, k)?)?),
                Method::Greedy => rows.push(team_row(method.to_string(), greedy(val, k)?)?),
                Method::Focal if k < 2 => {}
                Method::Focal => rows.push(team_row(method.to_string(), focal_select(val, k)?)?),
                Method::Random => {
                    let r = random_select(val, k, opts.random_trials, opts.seed)?;
                    let test_mean = match test {
                        Some(t) => {
                            let accs = r
                                .teams
                                .iter()
                                .map(|tm| t.accuracy_of(&tm.member_ids))
                                .collect::<Result<Vec<_>>>()?;
                            Some(accs.iter().sum::<f64>() / accs.len() as f64)
                        }
                        None => None,
                    };
                    rows.push(SweepRow {
                        method: method.to_string(),
                        size: k,
                        val_acc: r.mean_accuracy,
                        test_acc: test_mean,
                        fq_gd: None,
                        val_std: Some(r.std_accuracy),
                        members: Vec::new(),
                        random_teams: r.teams.into_iter().map(|t| t.member_ids).collect(),
                    });
                }
            }
        }
    }
    Ok(SweepReport { rows })
}

impl SweepReport {
    /// CSV with header `method,size,val_acc,test_acc,fq_gd`; absent values are
    /// left empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("method,size,val_acc,test_acc,fq_gd\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.method,
                r.size,
                r.val_acc,
                opt(r.test_acc),
                opt(r.fq_gd)
            ));
        }
        out
    }

    pub fn row(&self, method: &str, size: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == method && r.size == size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Binary predictions with label `s % 2`: probability 0.9 on the true class,
    /// except on `wrong` samples where the true class gets `wrong_p`.
    fn planted(id: &str, n: usize, wrong: &[usize], wrong_p: f64) -> PredictionMatrix {
        let mut probs = Vec::with_capacity(n * 2);
        for s in 0..n {
            let label = s % 2;
            let p_true = if wrong.contains(&s) { wrong_p } else { 0.9 };
            if label == 0 {
                probs.extend([p_true, 1.0 - p_true]);
            } else {
                probs.extend([1.0 - p_true, p_true]);
            }
        }
        PredictionMatrix::new(id, 2, probs, "val").unwrap()
    }

    fn labels(n: usize) -> LabeledEvalSet {
        LabeledEvalSet::new((0..n).map(|s| s % 2).collect(), 2).unwrap()
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_pool_ties_to_first_ids() {
        let pool = ModelPool::new(
            ["c", "a", "b", "d"].iter().map(|id| planted(id, 10, &[1, 4], 0.2)).collect(),
            labels(10),
        )
        .unwrap();
        let t = brute_force(&pool, 2).unwrap();
        assert_eq!(t.member_ids, ids(&["a", "b"]));
        assert_eq!(t.val_accuracy, 0.8);
        assert_eq!(t.fq_gd_score, Some(1.0));
        let g = greedy(&pool, 3).unwrap();
        assert_eq!(g.member_ids, ids(&["a", "b", "c"]));
        assert_eq!(g.val_accuracy, 0.8);
        let r = random_select(&pool, 2, 7, 1).unwrap();
        assert_eq!(r.std_accuracy, 0.0);
    }

    #[test]
    fn brute_finds_disjoint_error_pair() {
        // m1 and m3 err on disjoint samples with low confidence; m0 and m2
        // share their errors
        let n = 20;
        let pool = ModelPool::new(
            vec![
                planted("m0", n, &[0, 1, 2, 3], 0.1),
                planted("m1", n, &[4, 5, 6], 0.4),
                planted("m2", n, &[0, 1, 2, 3], 0.1),
                planted("m3", n, &[7, 8, 9], 0.4),
            ],
            labels(n),
        )
        .unwrap();
        let t = brute_force(&pool, 2).unwrap();
        assert_eq!(t.member_ids, ids(&["m1", "m3"]));
        assert_eq!(t.val_accuracy, 1.0);
        let f = focal_select(&pool, 2).unwrap();
        assert_eq!(f.member_ids, ids(&["m1", "m3"]));
        assert_eq!(f.fq_gd_score, Some(0.0));
        let all = brute_force(&pool, 4).unwrap();
        assert_eq!(all.member_ids, ids(&["m0", "m1", "m2", "m3"]));
    }

    #[test]
    fn size_and_cap_errors() {
        let pool = ModelPool::new(vec![planted("a", 4, &[], 0.1)], labels(4)).unwrap();
        assert!(matches!(brute_force(&pool, 0), Err(Error::Parameter(_))));
        assert!(matches!(greedy(&pool, 2), Err(Error::Parameter(_))));
        assert!(matches!(focal_select(&pool, 1), Err(Error::Parameter(_))));
        assert!(random_select(&pool, 1, 0, 0).is_err());
        let big = ModelPool::new(
            (0..25).map(|i| planted(&format!("m{i:02}"), 4, &[], 0.1)).collect(),
            labels(4),
        )
        .unwrap();
        assert!(matches!(brute_force(&big, 2), Err(Error::EnumerationLimit { pool: 25, cap: 24 })));
        assert!(greedy(&big, 2).is_ok());
    }

    #[test]
    fn focal_extremes() {
        let n = 8;
        let pool = ModelPool::new(
            vec![
                planted("a", n, &[0, 1, 2, 3], 0.1),
                planted("b", n, &[4, 5], 0.1),
                planted("c", n, &[0, 1, 2, 3], 0.1),
                planted("d", n, &[], 0.1),
            ],
            labels(n),
        )
        .unwrap();
        let r = focal_diversity(&pool, &ids(&["a", "b"])).unwrap();
        assert_eq!(r.per_focal_lambda["a"], Some(1.0));
        assert_eq!(r.fq_gd_score, 0.0);
        let r = focal_diversity(&pool, &ids(&["c", "a"])).unwrap();
        assert_eq!(r.per_focal_lambda["a"], Some(0.0));
        assert_eq!(r.fq_gd_score, 1.0);
        // the flawless member is excluded from the mean
        let r = focal_diversity(&pool, &ids(&["a", "d"])).unwrap();
        assert_eq!(r.per_focal_lambda["d"], None);
        assert_eq!(r.fq_gd_score, 0.0);
        assert!(matches!(focal_diversity(&pool, &ids(&["a", "zz"])), Err(Error::NotFound(_))));
        assert!(focal_diversity(&pool, &ids(&["a"])).is_err());
        assert!(focal_diversity(&pool, &ids(&["a", "a"])).is_err());
    }

    #[test]
    fn focal_diversity_is_order_invariant() {
        let n = 12;
        let pool = ModelPool::new(
            vec![
                planted("a", n, &[0, 1, 2, 5], 0.3),
                planted("b", n, &[1, 2, 7], 0.3),
                planted("c", n, &[2, 3, 8, 9], 0.3),
            ],
            labels(n),
        )
        .unwrap();
        let x = focal_diversity(&pool, &ids(&["a", "b", "c"])).unwrap();
        let y = focal_diversity(&pool, &ids(&["c", "a", "b"])).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn greedy_can_lose_to_brute_force() {
        // best single is s (one error), but p and q cover each other perfectly
        let n = 10;
        let pool = ModelPool::new(
            vec![
                planted("p", n, &[0, 1], 0.4),
                planted("q", n, &[2, 3], 0.4),
                planted("s", n, &[0], 0.01),
            ],
            labels(n),
        )
        .unwrap();
        let g = greedy(&pool, 2).unwrap();
        assert_eq!(g.member_ids[0], "s");
        assert_eq!(g.member_ids, ids(&["s", "p"]));
        assert_eq!(g.val_accuracy, 0.9);
        let b = brute_force(&pool, 2).unwrap();
        assert_eq!(b.member_ids, ids(&["p", "q"]));
        assert_eq!(b.val_accuracy, 1.0);
    }

    #[test]
    fn sweep_rows() {
        let n = 10;
        let pool = ModelPool::new(
            vec![
                planted("p", n, &[0, 1], 0.4),
                planted("q", n, &[2, 3], 0.4),
                planted("s", n, &[0], 0.01),
            ],
            labels(n),
        )
        .unwrap();
        let opts = SweepOptions {
            methods: Method::ALL.to_vec(),
            sizes: vec![1, 2, 3],
            random_trials: 5,
            seed: 0,
        };
        let rep = selection_sweep(&pool, Some(&pool), &opts).unwrap();
        let single = rep.row("best_single", 1).unwrap();
        assert_eq!(rep.row("brute", 1).unwrap().val_acc, single.val_acc);
        assert_eq!(rep.row("greedy", 1).unwrap().members, single.members);
        assert_eq!(rep.row("entire_ensemble", 3).unwrap().val_acc, rep.row("brute", 3).unwrap().val_acc);
        assert!(rep.row("focal", 1).is_none());
        assert!(rep.to_csv().starts_with("method,size,val_acc,test_acc,fq_gd\nbest_single,1,0.9,0.9,\n"));
    }
}
