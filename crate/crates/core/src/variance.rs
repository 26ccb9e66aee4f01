//! Monte Carlo check of how learning-rate randomness propagates into the
//! variance of SGD parameters.
//!
//! With `theta_{t+1} = theta_t - eta_t * g_t`, where `eta_t` and `g_t` are
//! independent with means `mu_eta`, `mu_g` and variances `sigma_eta2`,
//! `sigma_g2`, the law of total variance gives
//!
//! ```text
//! Var(theta_{t+1}) = Var(theta_t) + mu_eta^2 sigma_g2 + mu_g^2 sigma_eta2 + sigma_eta2 sigma_g2
//! ```
//!
//! The gradient distribution is held fixed over steps (it does not depend on
//! `theta_t`), which is the regime in which the recurrence is exact. `theta`
//! is a scalar since the recurrence acts per coordinate.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

/// Bootstrap resamples used by [`compare`].
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// [`compare`] refuses runs with fewer trials than this.
pub const MIN_COMPARE_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Draw {
    Normal,
    /// Uniform on `mu +- sqrt(3 var)`, matching the requested moments.
    Uniform,
}

impl Draw {
    fn sample(self, rng: &mut impl Rng, mean: f64, var: f64) -> f64 {
        match self {
            Draw::Normal => {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
            Draw::Uniform => {
                let u: f64 = rng.random();
                mean + (3.0 * var).sqrt() * (2.0 * u - 1.0)
            }
        }
    }
}

fn default_draw() -> Draw {
    Draw::Normal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSimConfig {
    pub mu_g: f64,
    pub sigma_g2: f64,
    pub mu_eta: f64,
    pub sigma_eta2: f64,
    #[serde(default = "default_draw")]
    pub grad_dist: Draw,
    #[serde(default = "default_draw")]
    pub lr_dist: Draw,
    #[serde(default)]
    pub theta0: f64,
    /// Variance of the initial parameter; 0 means a fixed start.
    #[serde(default)]
    pub theta0_var: f64,
    pub steps: usize,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

impl VarianceSimConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_g2", self.sigma_g2),
            ("sigma_eta2", self.sigma_eta2),
            ("theta0_var", self.theta0_var),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be a non-negative variance, got {v}")));
            }
        }
        if ![self.mu_g, self.mu_eta, self.theta0].iter().all(|v| v.is_finite()) {
            return Err(Error::param("means must be finite"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        Ok(())
    }

    /// Per-step variance increment of the recurrence.
    pub fn increment(&self) -> f64 {
        self.mu_eta * self.mu_eta * self.sigma_g2
            + self.mu_g * self.mu_g * self.sigma_eta2
            + self.sigma_eta2 * self.sigma_g2
    }
}

/// `Var(theta_t)` for `t = 0..=steps` from the recurrence.
pub fn predicted_variance(cfg: &VarianceSimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let inc = cfg.increment();
    let mut out = Vec::with_capacity(cfg.steps + 1);
    let mut v = cfg.theta0_var;
    out.push(v);
    for _ in 0..cfg.steps {
        v += inc;
        out.push(v);
    }
    Ok(out)
}

/// `E[theta_T] = theta0 - T mu_eta mu_g`.
pub fn predicted_mean(cfg: &VarianceSimConfig) -> f64 {
    cfg.theta0 - cfg.steps as f64 * cfg.mu_eta * cfg.mu_g
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub empirical_mean: f64,
    /// Unbiased sample variance of `theta_T`.
    pub empirical_var: f64,
    /// Sample variance of `theta_t` for `t = 0..=steps`.
    pub trajectory: Vec<f64>,
    /// `theta_T` of every trial.
    pub final_values: Vec<f64>,
    /// `paths[t][trial]`, only filled by [`simulate_paths`].
    pub paths: Vec<Vec<f64>>,
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn sample_var(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Runs `cfg.trials` independent trajectories. Trial `i` draws from its own
/// stream `(seed, i)`, so results do not depend on evaluation order.
pub fn simulate(cfg: &VarianceSimConfig) -> Result<Simulation> {
    run(cfg, false)
}

/// [`simulate`] that also keeps every intermediate `theta_t`.
pub fn simulate_paths(cfg: &VarianceSimConfig) -> Result<Simulation> {
    run(cfg, true)
}

fn run(cfg: &VarianceSimConfig, keep_paths: bool) -> Result<Simulation> {
    cfg.validate()?;
    let mut stats = vec![Welford::default(); cfg.steps + 1];
    let mut final_values = Vec::with_capacity(cfg.trials);
    let mut paths = if keep_paths {
        vec![Vec::with_capacity(cfg.trials); cfg.steps + 1]
    } else {
        Vec::new()
    };
    for trial in 0..cfg.trials {
        let mut rng = stream_rng(cfg.seed, trial as u64);
        let mut theta = if cfg.theta0_var > 0.0 {
            Draw::Normal.sample(&mut rng, cfg.theta0, cfg.theta0_var)
        } else {
            cfg.theta0
        };
        stats[0].push(theta);
        if keep_paths {
            paths[0].push(theta);
        }
        for t in 1..=cfg.steps {
            let eta = cfg.lr_dist.sample(&mut rng, cfg.mu_eta, cfg.sigma_eta2);
            let g = cfg.grad_dist.sample(&mut rng, cfg.mu_g, cfg.sigma_g2);
            theta -= eta * g;
            stats[t].push(theta);
            if keep_paths {
                paths[t].push(theta);
            }
        }
        final_values.push(theta);
    }
    let last = stats[cfg.steps];
    Ok(Simulation {
        empirical_mean: last.mean,
        empirical_var: last.sample_var(),
        trajectory: stats.iter().map(Welford::sample_var).collect(),
        final_values,
        paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub predicted: f64,
    pub empirical: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub confidence: f64,
    /// `(empirical - predicted) / bootstrap standard error`.
    pub standardized_gap: f64,
    pub verdict: Verdict,
}

/// Percentile bootstrap interval of the sample variance of `values`, and the
/// verdict on whether `predicted` lies inside it.
pub fn bootstrap_check(values: &[f64], predicted: f64, confidence: f64, seed: u64) -> Result<Comparison> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param(format!("confidence must lie in (0,1), got {confidence}")));
    }
    if values.len() < MIN_COMPARE_TRIALS {
        return Err(Error::param(format!(
            "{} trials are too few for a bootstrap comparison (need {MIN_COMPARE_TRIALS})",
            values.len()
        )));
    }
    let n = values.len();
    let mut full = Welford::default();
    values.iter().for_each(|&v| full.push(v));
    let empirical = full.sample_var();

    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|b| {
            let mut rng = stream_rng(seed, streams::BOOTSTRAP + b as u64);
            let mut w = Welford::default();
            for _ in 0..n {
                w.push(values[rng.random_range(0..n)]);
            }
            w.sample_var()
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let alpha = 1.0 - confidence;
    let ci_lo = quantile(&boot, alpha / 2.0);
    let ci_hi = quantile(&boot, 1.0 - alpha / 2.0);
    let mut spread = Welford::default();
    boot.iter().for_each(|&v| spread.push(v));
    let se = spread.sample_var().sqrt();
    let gap = empirical - predicted;
    let standardized_gap = if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    };
    let verdict = if ci_lo <= predicted && predicted <= ci_hi {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    Ok(Comparison {
        predicted,
        empirical,
        ci_lo,
        ci_hi,
        confidence,
        standardized_gap,
        verdict,
    })
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Simulates `cfg` and checks the predicted `Var(theta_T)` against the
/// bootstrap interval of the empirical variance.
pub fn compare(cfg: &VarianceSimConfig, confidence: f64) -> Result<Comparison> {
    if cfg.trials < MIN_COMPARE_TRIALS {
        return Err(Error::param(format!(
            "{} trials are too few for a bootstrap comparison (need {MIN_COMPARE_TRIALS})",
            cfg.trials
        )));
    }
    let predicted = *predicted_variance(cfg)?.last().unwrap();
    let sim = simulate(cfg)?;
    bootstrap_check(&sim.final_values, predicted, confidence, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub predicted_var: f64,
    pub empirical_var: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Predicted against empirical variance at every step, with bootstrap
/// intervals.
pub fn trajectory(cfg: &VarianceSimConfig, confidence: f64) -> Result<Vec<TrajectoryRow>> {
    let predicted = predicted_variance(cfg)?;
    let sim = simulate_paths(cfg)?;
    sim.paths
        .iter()
        .zip(&predicted)
        .enumerate()
        .map(|(t, (values, &p))| {
            let c = bootstrap_check(values, p, confidence, cfg.seed)?;
            Ok(TrajectoryRow {
                t,
                predicted_var: p,
                empirical_var: c.empirical,
                ci_lo: c.ci_lo,
                ci_hi: c.ci_hi,
            })
        })
        .collect()
}

/// CSV with header `t,predicted_var,empirical_var,ci_lo,ci_hi`.
pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], mut out: W) -> Result<()> {
    let io = |e| Error::io("<trajectory>", e);
    writeln!(out, "t,predicted_var,empirical_var,ci_lo,ci_hi").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.predicted_var, r.empirical_var, r.ci_lo, r.ci_hi
        )
        .map_err(io)?;
    }
    Ok(())
}
