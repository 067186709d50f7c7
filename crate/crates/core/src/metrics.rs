//! Round bookkeeping: popularities, adoption counts, realized regret, and
//! communication statistics.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::QualityDraw;
use crate::protocol::AdoptionVector;

/// Option popularities of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Popularity {
    /// Fraction of adopting agents per option; all zeros when nobody
    /// adopted (flagged by `empty`).
    pub q: Vec<f64>,
    /// Adopters per option.
    pub d_j: Vec<u32>,
    /// Total adopters.
    pub d_total: u32,
    /// Set when no agent adopted, making the fractions undefined.
    pub empty: bool,
}

/// Counts adoptions and normalizes them into popularities.
pub fn popularity(adoptions: &[AdoptionVector], m: usize) -> Popularity {
    let mut d_j = vec![0u32; m];
    for x in adoptions {
        if let Some(j) = x.choice() {
            d_j[j as usize] += 1;
        }
    }
    let d_total: u32 = d_j.iter().sum();
    let q = if d_total > 0 {
        d_j.iter().map(|&d| d as f64 / d_total as f64).collect()
    } else {
        vec![0.0; m]
    };
    Popularity {
        q,
        d_j,
        d_total,
        empty: d_total == 0,
    }
}

/// Reward mass the population would collect this round: the popularity of
/// the previous round weighted by the fresh quality signals.
pub fn regret_increment(q_prev: &[f64], phi: &QualityDraw) -> f64 {
    q_prev
        .iter()
        .zip(phi.bits())
        .map(|(&q, &bit)| q * bit as f64)
        .sum()
}

/// Everything measured in one round.
#[derive(Debug, Clone)]
pub struct RoundMetrics {
    pub round: u32,
    pub popularity: Popularity,
    /// Stage 3 candidate selections per option; sums to the agent count.
    pub selections: Vec<u32>,
    pub slots: u32,
    pub total_messages: u64,
    pub max_edge_slot_messages: u32,
    pub regret_increment: f64,
    pub truncated: bool,
}

/// A full run's trace plus the running regret series.
#[derive(Debug, Clone)]
pub struct RunTrace {
    best_eta: f64,
    epsilon: f64,
    rounds: Vec<RoundMetrics>,
    running_regret: Vec<f64>,
    increment_sum: f64,
}

impl RunTrace {
    pub fn new(best_eta: f64, epsilon: f64) -> Self {
        Self {
            best_eta,
            epsilon,
            rounds: Vec::new(),
            running_regret: Vec::new(),
            increment_sum: 0.0,
        }
    }

    /// Appends a round and extends the running regret:
    /// `best_eta - mean(increments so far)`.
    pub fn record_round(&mut self, metrics: RoundMetrics) {
        self.increment_sum += metrics.regret_increment;
        let r = self.rounds.len() as f64 + 1.0;
        self.running_regret
            .push(self.best_eta - self.increment_sum / r);
        self.rounds.push(metrics);
    }

    pub fn rounds(&self) -> &[RoundMetrics] {
        &self.rounds
    }

    pub fn running_regret(&self) -> &[f64] {
        &self.running_regret
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.running_regret.last().copied()
    }

    pub fn best_eta(&self) -> f64 {
        self.best_eta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Composed privacy loss over the recorded rounds. Zero rounds leak
    /// nothing even under an infinite per-round budget.
    pub fn total_privacy_loss(&self) -> f64 {
        if self.rounds.is_empty() {
            0.0
        } else {
            self.rounds.len() as f64 * self.epsilon
        }
    }
}

/// Detects a plateau: converged once the running regret moves less than
/// `tol` across the trailing `window` rounds. Returns the plateau value
/// (mean over the window) when converged.
pub fn convergence_check(running_regret: &[f64], window: usize, tol: f64) -> Option<f64> {
    assert!(window >= 2);
    if running_regret.len() < window {
        return None;
    }
    let tail = &running_regret[running_regret.len() - window..];
    let max = tail.iter().copied().fold(f64::MIN, f64::max);
    let min = tail.iter().copied().fold(f64::MAX, f64::min);
    if max - min < tol {
        Some(tail.iter().sum::<f64>() / window as f64)
    } else {
        None
    }
}

/// Plateau value regardless of convergence: mean of the trailing window.
pub fn tail_mean(series: &[f64], window: usize) -> f64 {
    assert!(!series.is_empty());
    let w = window.min(series.len());
    let tail = &series[series.len() - w..];
    tail.iter().sum::<f64>() / w as f64
}
