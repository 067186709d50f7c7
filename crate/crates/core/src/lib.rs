//! Core engine for simulating a privacy-preserving social learning protocol
//! on connected non-bipartite graphs.
//!
//! Agents repeatedly chase the best of `m` options with unknown Bernoulli
//! qualities. Each round every agent runs four stages:
//!
//! 1. **Perturb** — randomized response on last round's adoption vector,
//!    giving per-round local differential privacy.
//! 2. **Disseminate** — the perturbed vector rides a batch of
//!    Metropolis-Hastings random walks, delivering near-uniform samples of
//!    the population to every agent under per-slot forwarding caps.
//! 3. **Sample** — each agent debiases the perturbed vectors it collected
//!    into popularity estimates and picks a candidate option.
//! 4. **Adopt** — the candidate is kept or dropped based on the option's
//!    fresh quality signal.
//!
//! The crate is `no_std` + `alloc` compatible (float math goes through
//! `libm`, which also keeps results bit-identical across platforms). All
//! randomness flows through counter-derived [`rng::Stream`]s, so every
//! computation is a pure function of its inputs and a seed.
//!
//! IO, configuration, and the CLI live in the companion `ppsl-sim` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod dissemination;
pub mod env;
pub mod graph;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod protocol;
pub mod rng;
pub mod transition;

pub use dissemination::{DisseminationEngine, DisseminationParams, RoundOutcome, Token};
pub use env::{OptionSet, QualityDraw};
pub use graph::{Graph, GraphError};
pub use metrics::{RoundMetrics, RunTrace};
pub use protocol::{AdoptionVector, PerturbedVector, PopularityEstimate, ProtocolParams};
pub use rng::{Stream, StreamFactory, StreamKind};
pub use transition::{walk_length, TransitionError, TransitionModel};
