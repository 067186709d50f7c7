//! Per-agent protocol stages: randomized-response perturbation (Stage 1),
//! popularity estimation and option sampling (Stage 3), and the adoption
//! rule (Stage 4). Stage 2 lives in [`crate::dissemination`].

use alloc::vec;
use alloc::vec::Vec;

use crate::env::QualityDraw;
use crate::math;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("privacy budget must be positive")]
    InvalidEpsilon,
    #[error("adoption bias must lie in (1/2, 1]")]
    InvalidBeta,
    #[error("exploration probability must lie in [0, 1]")]
    InvalidMu,
    #[error("no perturbed vectors sampled this round")]
    EmptySampleSet,
}

/// An agent's round adoption: at most one option.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdoptionVector {
    choice: Option<u32>,
}

impl AdoptionVector {
    pub fn none() -> Self {
        Self { choice: None }
    }

    pub fn adopt(option: u32) -> Self {
        Self {
            choice: Some(option),
        }
    }

    pub fn choice(&self) -> Option<u32> {
        self.choice
    }

    pub fn is_none(&self) -> bool {
        self.choice.is_none()
    }

    pub fn bit(&self, option: usize) -> bool {
        self.choice == Some(option as u32)
    }
}

/// A perturbed adoption vector: `m` independent bits, any pattern possible.
///
/// Stored as a mask, which also keeps the wire payload at `m` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbedVector {
    bits: u64,
}

impl PerturbedVector {
    pub const MAX_OPTIONS: usize = 64;

    pub fn from_bits(bits: u64) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn bit(&self, option: usize) -> bool {
        (self.bits >> option) & 1 == 1
    }
}

/// Protocol-wide parameters shared by every agent.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolParams {
    epsilon: f64,
    beta: f64,
    mu: f64,
}

impl ProtocolParams {
    /// `epsilon = f64::INFINITY` disables perturbation entirely (the
    /// no-privacy baseline). `beta = 1` is permitted for deterministic
    /// sanity runs even though the convergence regime wants it near 1/2.
    pub fn new(epsilon: f64, beta: f64, mu: f64) -> Result<Self, ProtocolError> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(ProtocolError::InvalidEpsilon);
        }
        if beta.is_nan() || beta <= 0.5 || beta > 1.0 {
            return Err(ProtocolError::InvalidBeta);
        }
        if mu.is_nan() || !(0.0..=1.0).contains(&mu) {
            return Err(ProtocolError::InvalidMu);
        }
        Ok(Self { epsilon, beta, mu })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Bias margin `delta = ln(beta / (1 - beta))`.
    pub fn delta(&self) -> f64 {
        math::ln(self.beta / (1.0 - self.beta))
    }

    /// Condition `6 mu <= delta^2` from the convergence regime.
    pub fn exploration_within_bias(&self) -> bool {
        let d = self.delta();
        6.0 * self.mu <= d * d
    }

    /// Probability a bit survives perturbation unchanged.
    pub fn keep_prob(&self) -> f64 {
        if self.epsilon.is_infinite() {
            return 1.0;
        }
        let e = math::exp(self.epsilon / 2.0);
        e / (e + 1.0)
    }

    /// Probability a bit is flipped.
    pub fn flip_prob(&self) -> f64 {
        if self.epsilon.is_infinite() {
            return 0.0;
        }
        1.0 / (math::exp(self.epsilon / 2.0) + 1.0)
    }

    /// Multiplier applied to a bit-mean when debiasing.
    pub fn debias_scale(&self) -> f64 {
        if self.epsilon.is_infinite() {
            return 1.0;
        }
        let e = math::exp(self.epsilon / 2.0);
        (e + 1.0) / (e - 1.0)
    }

    /// Constant subtracted when debiasing.
    pub fn debias_offset(&self) -> f64 {
        if self.epsilon.is_infinite() {
            return 0.0;
        }
        1.0 / (math::exp(self.epsilon / 2.0) - 1.0)
    }
}

/// Stage 1. A non-adopting agent does nothing and launches no walks, hence
/// `None`. Otherwise every coordinate is flipped independently with
/// probability `1 / (e^{eps/2} + 1)`.
pub fn perturb(
    x: &AdoptionVector,
    m: usize,
    params: &ProtocolParams,
    stream: &mut Stream,
) -> Option<PerturbedVector> {
    debug_assert!(m <= PerturbedVector::MAX_OPTIONS);
    let choice = x.choice()?;
    let flip = params.flip_prob();
    let mut bits = 0u64;
    for j in 0..m {
        let truth = j as u32 == choice;
        let flipped = stream.bernoulli(flip);
        if truth != flipped {
            bits |= 1 << j;
        }
    }
    Some(PerturbedVector::from_bits(bits))
}

/// An agent's view of the option popularities, built from the perturbed
/// vectors it sampled.
#[derive(Debug, Clone)]
pub struct PopularityEstimate {
    /// Per-option mean of the sampled bits.
    bit_means: Vec<f64>,
    /// Debiased, clamped-at-zero popularity estimates.
    debiased: Vec<f64>,
    /// Filled by [`normalize`]; a probability vector.
    normalized: Option<Vec<f64>>,
    sample_count: usize,
}

impl PopularityEstimate {
    pub fn bit_means(&self) -> &[f64] {
        &self.bit_means
    }

    pub fn debiased(&self) -> &[f64] {
        &self.debiased
    }

    pub fn normalized(&self) -> &[f64] {
        self.normalized
            .as_deref()
            .expect("estimate not normalized yet")
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized.is_some()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }
}

/// Stage 3, first half: invert the randomized response on the sampled
/// bit-means, clamping negatives to zero.
pub fn estimate_popularity(
    samples: &[PerturbedVector],
    m: usize,
    params: &ProtocolParams,
) -> Result<PopularityEstimate, ProtocolError> {
    if samples.is_empty() {
        return Err(ProtocolError::EmptySampleSet);
    }
    let count = samples.len() as f64;
    let scale = params.debias_scale();
    let offset = params.debias_offset();
    let mut bit_means = Vec::with_capacity(m);
    let mut debiased = Vec::with_capacity(m);
    for j in 0..m {
        let ones = samples.iter().filter(|v| v.bit(j)).count() as f64;
        let mean = ones / count;
        bit_means.push(mean);
        debiased.push((scale * mean - offset).max(0.0));
    }
    Ok(PopularityEstimate {
        bit_means,
        debiased,
        normalized: None,
        sample_count: samples.len(),
    })
}

/// Stage 3, second half: scale the debiased estimates into a probability
/// vector. When everything clamped to zero the agent has no signal and
/// falls back to uniform.
pub fn normalize(est: &mut PopularityEstimate) {
    let total: f64 = est.debiased.iter().sum();
    let m = est.debiased.len();
    let probs = if total > 0.0 {
        est.debiased.iter().map(|&q| q / total).collect()
    } else {
        vec![1.0 / m as f64; m]
    };
    est.normalized = Some(probs);
}

/// Stage 3, final step: explore uniformly with probability `mu`, otherwise
/// draw from the normalized estimate. Agents that sampled nothing this
/// round (`est = None`) draw uniformly.
pub fn sample_option(
    est: Option<&PopularityEstimate>,
    m: usize,
    params: &ProtocolParams,
    stream: &mut Stream,
) -> usize {
    let explore = stream.bernoulli(params.mu());
    match est {
        Some(est) if !explore => {
            let probs = est.normalized();
            let u = stream.unit_f64();
            let mut acc = 0.0;
            for (j, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return j;
                }
            }
            m - 1
        }
        _ => stream.below(m as u64) as usize,
    }
}

/// Stage 4: adopt the candidate with probability `beta` when its quality
/// signal is up, `1 - beta` when it is down; otherwise adopt nothing.
pub fn adopt_decision(
    j_star: usize,
    phi: &QualityDraw,
    params: &ProtocolParams,
    stream: &mut Stream,
) -> AdoptionVector {
    let p = if phi.is_good(j_star) {
        params.beta()
    } else {
        1.0 - params.beta()
    };
    if stream.bernoulli(p) {
        AdoptionVector::adopt(j_star as u32)
    } else {
        AdoptionVector::none()
    }
}
