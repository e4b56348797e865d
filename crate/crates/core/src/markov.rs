//! Two-dimensional channel-access chain.
//!
//! State `(m, n)` counts `m` calls in progress on `n` available channels out of
//! `C`, with `0 <= m <= n <= C`. Calls arrive at rate `λ` while a free available
//! channel exists and leave at `m·η`; each unavailable channel recovers at `α`
//! and each available idle channel is lost at `β`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::ln_gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),
    #[error("state weights overflow the representable range")]
    Overflow,
    #[error("generator is singular (reducible chain)")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub channels: u32,
    /// Call arrival rate (1/min).
    pub arrival_rate: f64,
    /// Channel holding rate (1/min).
    pub holding_rate: f64,
    /// Unavailable → available rate (1/min).
    pub recovery_rate: f64,
    /// Available → unavailable rate (1/min).
    pub loss_rate: f64,
}

impl ChainParams {
    /// Builds parameters from the two ratios that fully determine the
    /// stationary law; `holding_rate` and `loss_rate` are set to 1.
    pub fn from_ratios(channels: u32, load: f64, availability_ratio: f64) -> Self {
        Self {
            channels,
            arrival_rate: load,
            holding_rate: 1.0,
            recovery_rate: availability_ratio,
            loss_rate: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if self.channels == 0 {
            return Err(ChainError::InvalidParams("channels must be at least 1".into()));
        }
        // zero arrivals is allowed: the chain then lives on the m = 0 row
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return Err(ChainError::InvalidParams(format!(
                "arrival rate must be non-negative and finite, got {}",
                self.arrival_rate
            )));
        }
        for (name, v) in [
            ("holding rate", self.holding_rate),
            ("recovery rate", self.recovery_rate),
            ("loss rate", self.loss_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ChainError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Offered load per cell `λ/η`.
    pub fn load(&self) -> f64 {
        self.arrival_rate / self.holding_rate
    }

    /// `α/β`.
    pub fn availability_ratio(&self) -> f64 {
        self.recovery_rate / self.loss_rate
    }
}

/// Number of states in the triangle `0 <= m <= n <= C`.
pub fn state_count(channels: u32) -> usize {
    let c = channels as usize;
    (c + 1) * (c + 2) / 2
}

/// Position of `(m, n)` in the canonical ordering (by `m`, then `n`).
pub fn state_index(channels: u32, m: u32, n: u32) -> usize {
    debug_assert!(m <= n && n <= channels);
    let c = channels as usize;
    let m = m as usize;
    // rows 0..m hold (c+1) + c + ... + (c+2-m) states
    m * (c + 1) - m * (m.saturating_sub(1)) / 2 + (n as usize - m)
}

fn states(channels: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..=channels).flat_map(move |m| (m..=channels).map(move |n| (m, n)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    channels: u32,
    probs: Vec<f64>,
}

impl StateDistribution {
    /// Wraps a probability vector in canonical state order.
    pub fn from_vec(channels: u32, probs: Vec<f64>) -> Result<Self, ChainError> {
        if probs.len() != state_count(channels) {
            return Err(ChainError::InvalidParams(format!(
                "expected {} probabilities for C = {channels}, got {}",
                state_count(channels),
                probs.len()
            )));
        }
        Ok(Self { channels, probs })
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn prob(&self, m: u32, n: u32) -> f64 {
        if m > n || n > self.channels {
            return 0.0;
        }
        self.probs[state_index(self.channels, m, n)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// `((m, n), π(m, n))` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        states(self.channels).zip(self.probs.iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Largest absolute per-state difference.
    pub fn max_abs_diff(&self, other: &StateDistribution) -> f64 {
        assert_eq!(self.channels, other.channels);
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Mean number of calls in progress.
    pub fn mean_calls(&self) -> f64 {
        self.iter().map(|((m, _), p)| m as f64 * p).sum()
    }

    /// Rows `(m, n, probability)` for tabular output.
    pub fn rows(&self) -> Vec<(u32, u32, f64)> {
        self.iter().map(|((m, n), p)| (m, n, p)).collect()
    }
}

/// Product-form stationary law
/// `π(m,n) ∝ (λ/η)^m / m! · C(C,n) · (α/β)^n`, accumulated in log space.
pub fn stationary_distribution(params: &ChainParams) -> Result<StateDistribution, ChainError> {
    params.validate()?;
    let c = params.channels;
    let ln_load = params.load().ln();
    let ln_avail = params.availability_ratio().ln();
    let ln_fact = |k: u32| ln_gamma(k as f64 + 1.0).expect("positive argument");
    let ln_c_fact = ln_fact(c);

    let log_w: Vec<f64> = states(c)
        .map(|(m, n)| {
            // 0 · ln 0 is taken as 0 when there are no arrivals
            let load_term = if m == 0 { 0.0 } else { m as f64 * ln_load };
            load_term - ln_fact(m) + ln_c_fact - ln_fact(n) - ln_fact(c - n) + n as f64 * ln_avail
        })
        .collect();
    let shift = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(ChainError::Overflow);
    }
    let mut probs: Vec<f64> = log_w.iter().map(|w| (w - shift).exp()).collect();
    let norm: f64 = probs.iter().sum();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(ChainError::Overflow);
    }
    probs.iter_mut().for_each(|p| *p /= norm);
    Ok(StateDistribution { channels: c, probs })
}

/// Dense transition-rate matrix over the triangular state space.
#[derive(Debug, Clone)]
pub struct Generator {
    pub channels: u32,
    pub rates: DMatrix<f64>,
}

impl Generator {
    pub fn rate(&self, from: (u32, u32), to: (u32, u32)) -> f64 {
        let c = self.channels;
        if from.0 > from.1 || from.1 > c || to.0 > to.1 || to.1 > c {
            return 0.0;
        }
        self.rates[(state_index(c, from.0, from.1), state_index(c, to.0, to.1))]
    }
}

/// Outgoing transitions of `(m, n)` as `(target, rate)`.
///
/// Channel loss only removes idle channels, so it is absent on the diagonal
/// `m = n`; with it the product form would not balance.
pub fn transitions(params: &ChainParams, m: u32, n: u32) -> Vec<((u32, u32), f64)> {
    let c = params.channels;
    let mut out = Vec::with_capacity(4);
    if m < n && params.arrival_rate > 0.0 {
        out.push(((m + 1, n), params.arrival_rate));
    }
    if m > 0 {
        out.push(((m - 1, n), m as f64 * params.holding_rate));
    }
    if n < c {
        out.push(((m, n + 1), (c - n) as f64 * params.recovery_rate));
    }
    if m < n {
        out.push(((m, n - 1), n as f64 * params.loss_rate));
    }
    out
}

pub fn build_generator(params: &ChainParams) -> Result<Generator, ChainError> {
    params.validate()?;
    let c = params.channels;
    let size = state_count(c);
    let mut rates = DMatrix::zeros(size, size);
    for (m, n) in states(c) {
        let i = state_index(c, m, n);
        let mut out_rate = 0.0;
        for ((tm, tn), r) in transitions(params, m, n) {
            rates[(i, state_index(c, tm, tn))] = r;
            out_rate += r;
        }
        rates[(i, i)] = -out_rate;
    }
    Ok(Generator { channels: c, rates })
}

/// Solves `v Q = 0`, `Σ v = 1` by LU with the last balance equation replaced
/// by the normalization row.
pub fn solve_generator(gen: &Generator) -> Result<StateDistribution, ChainError> {
    let size = gen.rates.nrows();
    let mut a = gen.rates.transpose();
    for j in 0..size {
        a[(size - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(size);
    rhs[size - 1] = 1.0;
    let v = a.lu().solve(&rhs).ok_or(ChainError::Singular)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ChainError::Singular);
    }
    // round-off can leave tiny negatives
    let probs: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    Ok(StateDistribution {
        channels: gen.channels,
        probs: probs.into_iter().map(|p| p / total).collect(),
    })
}

/// Mass on the diagonal `m = n`: every available channel is already serving.
pub fn blocking_probability(dist: &StateDistribution) -> f64 {
    (0..=dist.channels).map(|m| dist.prob(m, m)).sum()
}

/// Expected fraction of the `C` channels carrying a call.
pub fn busy_probability(dist: &StateDistribution) -> f64 {
    dist.mean_calls() / dist.channels as f64
}

/// Mean time in the system (minutes) by Little's law.
pub fn mean_sojourn_time(dist: &StateDistribution, arrival_rate: f64) -> Result<f64, ChainError> {
    if !(arrival_rate > 0.0) {
        return Err(ChainError::InvalidParams(format!(
            "arrival rate must be positive, got {arrival_rate}"
        )));
    }
    Ok(dist.mean_calls() / arrival_rate)
}
