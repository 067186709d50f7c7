//! Counter-derived random streams.
//!
//! Every source of randomness in a run is a ChaCha12 stream addressed by
//! `(stage, agent, round)` under a single 64-bit seed. Streams are
//! independent by construction (distinct ChaCha stream ids under one key),
//! so results never depend on the order in which agents are processed and
//! any stream can be re-derived in isolation (replay).

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Stage tag identifying which part of the protocol owns a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamKind {
    /// Graph generator attempts (the `round` field carries the attempt index).
    GraphGen = 0,
    /// Per-round quality signals shared by all agents.
    QualityShared = 1,
    /// Per-agent quality signals (optional mode).
    QualityPerAgent = 2,
    /// Stage 1 randomized response.
    Perturb = 3,
    /// Stage 2 walk forwarding decisions.
    Forward = 4,
    /// Stage 3 option sampling.
    Sample = 5,
    /// Stage 4 adoption coin.
    Adopt = 6,
    /// Scratch streams for tests and auxiliary tooling.
    Aux = 7,
}

/// Derives [`Stream`]s for one seeded run.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    base: ChaCha12Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Stream for `(kind, agent, round)`.
    ///
    /// The address packs into the 64-bit ChaCha stream id as
    /// `kind:8 | agent:32 | round:24`, so rounds must stay below 2^24.
    pub fn stream(&self, kind: StreamKind, agent: u32, round: u32) -> Stream {
        debug_assert!(
            round < (1 << 24),
            "round index exceeds stream address space"
        );
        let id = ((kind as u64) << 56) | ((agent as u64) << 24) | (round as u64 & 0xff_ffff);
        let mut rng = self.base.clone();
        rng.set_stream(id);
        Stream { rng }
    }
}

/// One addressed random stream.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha12Rng,
}

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform integer in `[0, bound)`, unbiased via rejection.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }

    /// Bernoulli draw; `p <= 0` never fires, `p >= 1` always fires.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit_f64() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
