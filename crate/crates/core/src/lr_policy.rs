//! Parameterized learning-rate policies.
//!
//! A policy maps a step index `t` out of a budget of `T` steps to a learning
//! rate. Four scheduled families are supported (step decay, warmup + cosine
//! annealing, one-cycle and a staged composite of warm-restart cosine cycles)
//! plus a constant schedule. Milestones are fractions of the budget.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when converting a milestone fraction into a step index, so that
/// `0.3 * 200` lands on step 60 even if the product rounds to 59.999...
const BOUNDARY_EPS: f64 = 1e-9;

pub const DEFAULT_COSINE_WARMUP: f64 = 0.1;
pub const DEFAULT_ONE_CYCLE_WARMUP: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyFamily {
    MultiStep,
    WarmupCosineAnnealing,
    OneCycle,
    Composite,
    Constant,
}

impl fmt::Display for PolicyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PolicyFamily::MultiStep => "MultiStep",
            PolicyFamily::WarmupCosineAnnealing => "WarmupCosineAnnealing",
            PolicyFamily::OneCycle => "OneCycle",
            PolicyFamily::Composite => "Composite",
            PolicyFamily::Constant => "Constant",
        };
        f.write_str(name)
    }
}

fn default_gamma() -> f64 {
    0.1
}

/// A learning-rate policy.
///
/// `k0` is the initial LR for step decay and warmup-cosine, and the peak LR
/// for one-cycle and composite. `k1` is the floor. Fields that a family does
/// not use are ignored by [`LrPolicy::lr_at`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrPolicy {
    pub family: PolicyFamily,
    pub k0: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub milestones: Vec<f64>,
    #[serde(default)]
    pub cycles_per_stage: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_fraction: Option<f64>,
}

impl LrPolicy {
    pub fn constant(lr: f64) -> Self {
        LrPolicy {
            family: PolicyFamily::Constant,
            k0: lr,
            k1: 0.0,
            gamma: 1.0,
            milestones: Vec::new(),
            cycles_per_stage: Vec::new(),
            warmup_fraction: None,
        }
    }

    pub fn multi_step(k0: f64, gamma: f64, milestones: Vec<f64>) -> Self {
        LrPolicy {
            family: PolicyFamily::MultiStep,
            gamma,
            milestones,
            ..Self::constant(k0)
        }
    }

    pub fn warmup_cosine(k0: f64, k1: f64, warmup_fraction: f64) -> Self {
        LrPolicy {
            family: PolicyFamily::WarmupCosineAnnealing,
            k1,
            warmup_fraction: Some(warmup_fraction),
            ..Self::constant(k0)
        }
    }

    pub fn one_cycle(k0: f64, k1: f64, warmup_fraction: f64) -> Self {
        LrPolicy {
            family: PolicyFamily::OneCycle,
            k1,
            warmup_fraction: Some(warmup_fraction),
            ..Self::constant(k0)
        }
    }

    pub fn composite(
        k0: f64,
        k1: f64,
        gamma: f64,
        milestones: Vec<f64>,
        cycles_per_stage: Vec<u32>,
    ) -> Self {
        LrPolicy {
            family: PolicyFamily::Composite,
            k1,
            gamma,
            milestones,
            cycles_per_stage,
            ..Self::constant(k0)
        }
    }

    /// Warmup fraction with the family default applied.
    pub fn effective_warmup(&self) -> f64 {
        self.warmup_fraction.unwrap_or(match self.family {
            PolicyFamily::OneCycle => DEFAULT_ONE_CYCLE_WARMUP,
            PolicyFamily::WarmupCosineAnnealing => DEFAULT_COSINE_WARMUP,
            _ => 0.0,
        })
    }

    /// Short human-readable label, e.g. `MultiStep(k0=0.1)`.
    pub fn label(&self) -> String {
        format!("{}(k0={})", self.family, self.k0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k0.is_finite() && self.k0 > 0.0) {
            return Err(Error::param(format!("k0 must be positive, got {}", self.k0)));
        }
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(Error::param(format!("k1 must be non-negative, got {}", self.k1)));
        }
        if self.k1 > self.k0 {
            return Err(Error::param(format!(
                "k1 ({}) must not exceed k0 ({})",
                self.k1, self.k0
            )));
        }
        let uses_gamma = matches!(
            self.family,
            PolicyFamily::MultiStep | PolicyFamily::Composite
        );
        if uses_gamma && !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param(format!("gamma must lie in (0,1], got {}", self.gamma)));
        }
        if uses_gamma {
            let mut prev = 0.0;
            for &m in &self.milestones {
                if !(m > 0.0 && m < 1.0) {
                    return Err(Error::param(format!("milestone {m} outside (0,1)")));
                }
                if m <= prev {
                    return Err(Error::param("milestones must be strictly increasing"));
                }
                prev = m;
            }
        }
        if self.family == PolicyFamily::Composite {
            if self.cycles_per_stage.len() != self.milestones.len() + 1 {
                return Err(Error::param(format!(
                    "composite needs {} cycle counts (one per stage), got {}",
                    self.milestones.len() + 1,
                    self.cycles_per_stage.len()
                )));
            }
            if self.cycles_per_stage.contains(&0) {
                return Err(Error::param("cycles_per_stage entries must be positive"));
            }
        }
        let w = self.effective_warmup();
        if !(0.0..1.0).contains(&w) {
            return Err(Error::param(format!("warmup_fraction must lie in [0,1), got {w}")));
        }
        Ok(())
    }

    /// Learning rate at step `t` of a budget of `total` steps.
    pub fn lr_at(&self, t: usize, total: usize) -> Result<f64> {
        self.validate()?;
        if total == 0 {
            return Err(Error::param("training budget must be at least one step"));
        }
        if t >= total {
            return Err(Error::param(format!("step {t} outside budget of {total} steps")));
        }
        Ok(self.eval_unchecked(t, total))
    }

    /// `(t, lr)` for every step of the budget.
    pub fn render(&self, total: usize) -> Result<Vec<(usize, f64)>> {
        self.validate()?;
        if total == 0 {
            return Err(Error::param("training budget must be at least one step"));
        }
        Ok((0..total).map(|t| (t, self.eval_unchecked(t, total))).collect())
    }

    /// Writes the rendered schedule as CSV with header `t,lr`.
    pub fn write_schedule_csv<W: Write>(&self, total: usize, mut out: W) -> Result<()> {
        let rows = self.render(total)?;
        let io_err = |e| Error::io("<schedule>", e);
        writeln!(out, "t,lr").map_err(io_err)?;
        for (t, lr) in rows {
            writeln!(out, "{t},{lr}").map_err(io_err)?;
        }
        Ok(())
    }

    /// Step indices at which the schedule changes regime: milestone steps for
    /// step decay and composite, the warmup boundary for the warmup families.
    pub fn boundaries(&self, total: usize) -> Vec<usize> {
        match self.family {
            PolicyFamily::MultiStep | PolicyFamily::Composite => self
                .milestones
                .iter()
                .map(|&m| boundary_step(m, total))
                .collect(),
            PolicyFamily::WarmupCosineAnnealing => {
                vec![boundary_step(self.effective_warmup(), total)]
            }
            PolicyFamily::OneCycle => vec![self.one_cycle_peak(total)],
            PolicyFamily::Constant => Vec::new(),
        }
    }

    /// Step at which one-cycle reaches its peak.
    pub fn one_cycle_peak(&self, total: usize) -> usize {
        ((self.effective_warmup() * total as f64).round() as usize).min(total - 1)
    }

    fn eval_unchecked(&self, t: usize, total: usize) -> f64 {
        if total == 1 {
            return self.k0;
        }
        match self.family {
            PolicyFamily::Constant => self.k0,
            PolicyFamily::MultiStep => {
                let crossed = self
                    .milestones
                    .iter()
                    .filter(|&&m| t >= boundary_step(m, total))
                    .count();
                self.k0 * self.gamma.powi(crossed as i32)
            }
            PolicyFamily::WarmupCosineAnnealing => {
                let warm = boundary_step(self.effective_warmup(), total);
                if t < warm {
                    self.k1 + (self.k0 - self.k1) * t as f64 / warm as f64
                } else {
                    let x = (t - warm) as f64 / (total - warm) as f64;
                    cosine_between(self.k0, self.k1, x)
                }
            }
            PolicyFamily::OneCycle => {
                let peak = self.one_cycle_peak(total);
                if t < peak {
                    // rising half-cosine from k1 to k0
                    cosine_between(self.k1, self.k0, t as f64 / peak as f64)
                } else {
                    let x = (t - peak) as f64 / (total - peak) as f64;
                    cosine_between(self.k0, self.k1, x)
                }
            }
            PolicyFamily::Composite => self.composite_at(t, total),
        }
    }

    fn composite_at(&self, t: usize, total: usize) -> f64 {
        let mut edges = Vec::with_capacity(self.milestones.len() + 2);
        edges.push(0);
        edges.extend(self.milestones.iter().map(|&m| boundary_step(m, total)));
        edges.push(total);
        // a step sitting on a boundary belongs to the later stage
        let stage = edges[1..edges.len() - 1].iter().filter(|&&b| b <= t).count();
        let start = edges[stage];
        let len = edges[stage + 1] - start;
        let cycles = self.cycles_per_stage[stage] as usize;
        let offset = t - start;
        // cycle j spans [floor(j*len/cycles), floor((j+1)*len/cycles))
        let j = (0..cycles)
            .rev()
            .find(|&j| j * len / cycles <= offset)
            .unwrap_or(0);
        let c_start = j * len / cycles;
        let c_len = ((j + 1) * len / cycles).saturating_sub(c_start).max(1);
        let scale = self.gamma.powi(stage as i32);
        let hi = self.k0 * scale;
        let lo = self.k1 * scale;
        if c_len == 1 {
            return hi;
        }
        let x = (offset - c_start) as f64 / (c_len - 1) as f64;
        cosine_between(hi, lo, x)
    }
}

fn boundary_step(fraction: f64, total: usize) -> usize {
    (fraction * total as f64 + BOUNDARY_EPS).floor() as usize
}

/// Half-cosine from `from` (x = 0) to `to` (x = 1).
fn cosine_between(from: f64, to: f64, x: f64) -> f64 {
    to + (from - to) * (1.0 + (PI * x).cos()) / 2.0
}

/// The 16-policy grid: four families at four LR scales each, with every LR
/// multiplied by `lr_scale`.
pub fn table_grid(lr_scale: f64) -> Vec<LrPolicy> {
    let s = lr_scale;
    let mut out = Vec::with_capacity(16);
    for k0 in [0.2, 0.1, 0.05, 0.01] {
        out.push(LrPolicy::multi_step(k0 * s, 0.2, vec![0.3, 0.6, 0.8]));
    }
    for k0 in [0.4, 0.2, 0.1, 0.05] {
        out.push(LrPolicy::one_cycle(k0 * s, 0.0, DEFAULT_ONE_CYCLE_WARMUP));
    }
    for k0 in [0.2, 0.1, 0.05, 0.01] {
        out.push(LrPolicy::warmup_cosine(k0 * s, 0.0, DEFAULT_COSINE_WARMUP));
    }
    for (k0, k1) in [(1.0, 0.2), (0.5, 0.1), (0.25, 0.05), (0.05, 0.01)] {
        out.push(LrPolicy::composite(
            k0 * s,
            k1 * s,
            0.1,
            vec![0.45, 0.9],
            vec![3, 2, 1],
        ));
    }
    out
}
