//! The option set and its per-round Bernoulli quality signals.

use alloc::vec::Vec;

use crate::rng::{StreamFactory, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("option set must contain at least one option")]
    EmptyOptionSet,
    #[error("quality probability at index {index} outside [0, 1]")]
    EtaOutOfRange { index: usize },
}

/// The `m` options and their unknown success probabilities.
#[derive(Debug, Clone)]
pub struct OptionSet {
    etas: Vec<f64>,
}

impl OptionSet {
    pub fn new(etas: Vec<f64>) -> Result<Self, EnvError> {
        if etas.is_empty() {
            return Err(EnvError::EmptyOptionSet);
        }
        for (index, &eta) in etas.iter().enumerate() {
            if !(0.0..=1.0).contains(&eta) || eta.is_nan() {
                return Err(EnvError::EtaOutOfRange { index });
            }
        }
        Ok(Self { etas })
    }

    /// Conventional experiment default: linear spacing from 0.9 down to
    /// 0.5, so there is a unique best option with a clear margin.
    pub fn with_default_etas(m: usize) -> Result<Self, EnvError> {
        if m == 0 {
            return Err(EnvError::EmptyOptionSet);
        }
        if m == 1 {
            return Self::new(alloc::vec![0.9]);
        }
        let step = (0.9 - 0.5) / (m as f64 - 1.0);
        Self::new((0..m).map(|j| 0.9 - step * j as f64).collect())
    }

    pub fn m(&self) -> usize {
        self.etas.len()
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    /// Reward probability of the best option.
    pub fn best_eta(&self) -> f64 {
        self.etas.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Whether the first option is the strict best and the rest are
    /// non-increasing. The dynamics never rely on this; callers surface a
    /// warning when it does not hold.
    pub fn ordering_is_canonical(&self) -> bool {
        if self.etas.len() == 1 {
            return true;
        }
        if self.etas[0] <= self.etas[1] {
            return false;
        }
        self.etas.windows(2).all(|w| w[0] >= w[1])
    }
}

/// One round's quality indicators, one bit per option.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityDraw {
    round: u32,
    phi: Vec<u8>,
}

impl QualityDraw {
    pub fn from_bits(round: u32, phi: Vec<u8>) -> Self {
        debug_assert!(phi.iter().all(|&b| b <= 1));
        Self { round, phi }
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_good(&self, option: usize) -> bool {
        self.phi[option] == 1
    }

    pub fn bits(&self) -> &[u8] {
        &self.phi
    }
}

/// Draws the round's quality signals served identically to every agent.
///
/// Derivation is counter-based on `(round)`, so re-drawing any round
/// reproduces the same values regardless of call order.
pub fn draw_qualities(opts: &OptionSet, round: u32, factory: &StreamFactory) -> QualityDraw {
    debug_assert!(round >= 1);
    let mut stream = factory.stream(StreamKind::QualityShared, 0, round);
    let phi = opts
        .etas
        .iter()
        .map(|&eta| u8::from(stream.bernoulli(eta)))
        .collect();
    QualityDraw::from_bits(round, phi)
}

/// Per-agent variant, for the mode where signals vary across agents.
pub fn draw_qualities_for_agent(
    opts: &OptionSet,
    round: u32,
    agent: u32,
    factory: &StreamFactory,
) -> QualityDraw {
    debug_assert!(round >= 1);
    let mut stream = factory.stream(StreamKind::QualityPerAgent, agent, round);
    let phi = opts
        .etas
        .iter()
        .map(|&eta| u8::from(stream.bernoulli(eta)))
        .collect();
    QualityDraw::from_bits(round, phi)
}
