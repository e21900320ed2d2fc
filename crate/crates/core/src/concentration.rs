//! Monte-Carlo checks of the vector Freedman inequality and the masked
//! martingale-difference construction.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::geometry::OutputNorm;
use crate::oracle::subgaussian_std_for_proxy;
use crate::rng::{Domain, StreamKey};

/// How the predictable proxy Sigma_t evolves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxySchedule {
    Constant { sigma: f64 },
    /// sigma / t^power.
    Decaying { sigma: f64, power: f64 },
    /// base + scale * min(1, |M_{t-1}| / cap), the shape of an eta |U|
    /// proxy driven by the previous state.
    StateDependent { base: f64, scale: f64, cap: f64 },
}

impl ProxySchedule {
    fn at(&self, t: usize, prev_norm: f64) -> f64 {
        match *self {
            ProxySchedule::Constant { sigma } => sigma,
            ProxySchedule::Decaying { sigma, power } => sigma / (t as f64).powf(power),
            ProxySchedule::StateDependent { base, scale, cap } => base + scale * (prev_norm / cap).min(1.0),
        }
    }

    /// sum_t Sigma_t^2 when it is deterministic.
    pub fn deterministic_budget(&self, horizon: usize) -> Option<f64> {
        match self {
            ProxySchedule::StateDependent { .. } => None,
            _ => Some((1..=horizon).map(|t| self.at(t, 0.0).powi(2)).sum()),
        }
    }
}

/// Stopping times for the masking check, given as level crossings of |M|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// S = first n with |M_n| >= start_level (else the horizon).
    pub start_level: f64,
    /// T = first n > S with |M_n - M_S| >= stop_level (else the horizon).
    pub stop_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSpec {
    pub dimension: usize,
    pub kappa: f64,
    pub norm: OutputNorm,
    pub horizon: usize,
    pub schedule: ProxySchedule,
    pub stopping: Option<StoppingRule>,
}

impl MartingaleSpec {
    pub fn gaussian(dimension: usize, horizon: usize, schedule: ProxySchedule) -> Self {
        Self { dimension, kappa: 1.0, norm: OutputNorm::Euclidean, horizon, schedule, stopping: None }
    }
}

/// One realised path: the increments and their proxies.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingalePath {
    pub increments: Vec<Vec<f64>>,
    pub proxies: Vec<f64>,
}

impl MartingalePath {
    pub fn budget(&self) -> f64 {
        self.proxies.iter().map(|s| s * s).sum()
    }
    pub fn terminal(&self) -> Vec<f64> {
        let d = self.increments.first().map_or(0, Vec::len);
        let mut m = vec![0.0; d];
        for y in &self.increments {
            m.iter_mut().zip(y).for_each(|(a, b)| *a += b);
        }
        m
    }
}

/// Draws Y_t = Sigma_t * s * Z_t with Z_t standard Gaussian and s chosen so
/// that E exp(|Y_t|^2 / Sigma_t^2) = 2 exactly. Sigma_t = 0 gives Y_t = 0.
pub fn sample_path(spec: &MartingaleSpec, key: &StreamKey) -> MartingalePath {
    let d = spec.dimension;
    let unit = subgaussian_std_for_proxy(1.0, d);
    let mut m = vec![0.0; d];
    let mut increments = Vec::with_capacity(spec.horizon);
    let mut proxies = Vec::with_capacity(spec.horizon);
    for t in 1..=spec.horizon {
        let sigma = spec.schedule.at(t, spec.norm.norm(&m));
        let mut rng = key.rng(Domain::Sample, t as u64, 0);
        let y: Vec<f64> = (0..d)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                if sigma == 0.0 { 0.0 } else { sigma * unit * z }
            })
            .collect();
        m.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
        increments.push(y);
        proxies.push(sigma);
    }
    MartingalePath { increments, proxies }
}

/// Wilson score interval for k successes in n trials at the given two-sided level.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let n = trials as f64;
    let phat = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (phat + z * z / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreedmanReport {
    pub gamma: f64,
    pub bound: f64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub violations: u64,
}

impl FreedmanReport {
    /// The rate is consistent with the bound at the interval's level.
    pub fn conforms(&self) -> bool {
        self.ci_low <= self.bound
    }
}

/// gamma with exp(-gamma^2 / 3) = delta.
pub fn gamma_for_delta(delta: f64) -> f64 {
    (3.0 * (1.0 / delta).ln()).sqrt()
}

/// Fraction of trials with |M_n| >= (sqrt(kappa) + gamma) sqrt(V) and
/// budget <= V, with a 99% Wilson interval.
pub fn freedman_violation_rate(spec: &MartingaleSpec, budget: f64, gamma: f64, trials: u64, key: &StreamKey) -> FreedmanReport {
    let radius = (spec.kappa.sqrt() + gamma) * budget.sqrt();
    let violations: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let path = sample_path(spec, &key.with_trial(i));
            let hit = path.budget() <= budget && spec.norm.norm(&path.terminal()) >= radius;
            u64::from(hit)
        })
        .sum();
    let (ci_low, ci_high) = wilson_interval(violations, trials, 0.99);
    FreedmanReport {
        gamma,
        bound: (-gamma * gamma / 3.0).exp(),
        rate: violations as f64 / trials as f64,
        ci_low,
        ci_high,
        trials,
        violations,
    }
}

/// (S, T) for a path under the rule; S <= T <= n always.
pub fn stopping_times(path: &MartingalePath, rule: &StoppingRule, norm: OutputNorm) -> (usize, usize) {
    let n = path.increments.len();
    let d = path.increments.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    let mut start = n;
    for (k, y) in path.increments.iter().enumerate() {
        m.iter_mut().zip(y).for_each(|(a, b)| *a += b);
        if norm.norm(&m) >= rule.start_level {
            start = k + 1;
            break;
        }
    }
    let mut local = vec![0.0; d];
    let mut stop = n;
    for k in start..n {
        local.iter_mut().zip(&path.increments[k]).for_each(|(a, b)| *a += b);
        if norm.norm(&local) >= rule.stop_level {
            stop = k + 1;
            break;
        }
    }
    (start, stop)
}

/// sum_{k=S+1}^{T} X_k.
pub fn windowed_sum(path: &MartingalePath, start: usize, stop: usize) -> Vec<f64> {
    let d = path.increments.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; d];
    for y in &path.increments[start..stop] {
        acc.iter_mut().zip(y).for_each(|(a, b)| *a += b);
    }
    acc
}

/// The masked increments Y_k = X_k 1{S < k <= T}.
pub fn masked_increments(path: &MartingalePath, start: usize, stop: usize) -> Vec<Vec<f64>> {
    path.increments
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let k = i + 1;
            let mask = if start < k && k <= stop { 1.0 } else { 0.0 };
            y.iter().map(|v| v * mask).collect()
        })
        .collect()
}

/// Largest |windowed sum - masked sum| over the trials, in the output norm.
pub fn masked_sum_identity(spec: &MartingaleSpec, trials: u64, key: &StreamKey) -> f64 {
    let rule = spec.stopping.unwrap_or(StoppingRule { start_level: 0.0, stop_level: f64::INFINITY });
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let path = sample_path(spec, &key.with_trial(i));
            let (s, t) = stopping_times(&path, &rule, spec.norm);
            let window = windowed_sum(&path, s, t);
            let mut masked = vec![0.0; spec.dimension];
            for y in masked_increments(&path, s, t) {
                masked.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
            }
            let diff: Vec<f64> = window.iter().zip(&masked).map(|(a, b)| a - b).collect();
            spec.norm.norm(&diff)
        })
        .reduce(|| 0.0, f64::max)
}
