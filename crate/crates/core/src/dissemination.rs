//! Stage 2: slot-synchronous dissemination of perturbed adoption vectors
//! over parallel Metropolis-Hastings random walks.
//!
//! Every adopting agent launches `cap = floor(h * g(N))` token copies of
//! its perturbed vector, each with a hop budget. In each slot every agent
//! pops up to `cap` tokens from its FIFO queue, decrements their hop
//! counters, and forwards each to itself or a neighbor by the transition
//! probabilities. A token landing with zero hops left is recorded into the
//! destination's sampled multiset. Arrivals enter the destination queues
//! only after the whole slot completes, so results do not depend on the
//! order agents are processed within a slot.
//!
//! A round runs to quiescence: the slot count is measured, not assumed.
//! An optional `slot_cap` bounds runaway rounds; tokens still in flight at
//! the cap are dropped and the round is flagged truncated.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::Graph;
use crate::math;
use crate::protocol::PerturbedVector;
use crate::rng::Stream;
use crate::transition::{sample_destination, TransitionModel};

/// A perturbed vector in flight. Tokens carry no origin id: the protocol
/// never uses provenance, and omitting it keeps messages at `m` bits plus
/// the hop counter.
#[derive(Debug, Clone, Copy)]
pub struct Token {
    pub payload: PerturbedVector,
    pub remaining_hops: u16,
}

#[derive(Debug, Clone, Copy)]
pub struct DisseminationParams {
    /// Walk multiplier; theory wants `16 sigma / (1 - beta)`.
    pub h: f64,
    pub sigma: f64,
    /// Chosen value of g(N).
    pub g_of_n: f64,
    /// Per-slot forwarding cap and per-agent launch count: floor(h * g(N)).
    pub cap: usize,
    /// Hop budget of every token.
    pub walk_len: usize,
    /// Optional hard bound on slots per round.
    pub slot_cap: Option<u32>,
}

impl DisseminationParams {
    pub fn new(h: f64, sigma: f64, g_of_n: f64, walk_len: usize, slot_cap: Option<u32>) -> Self {
        let cap = math::floor(h * g_of_n) as usize;
        assert!(cap >= 1, "h * g(N) must be at least 1");
        assert!(walk_len >= 1, "walk length must be at least 1");
        Self {
            h,
            sigma,
            g_of_n,
            cap,
            walk_len,
            slot_cap,
        }
    }

    /// The multiplier the convergence analysis assumes.
    pub fn theoretical_h(sigma: f64, beta: f64) -> f64 {
        16.0 * sigma / (1.0 - beta)
    }

    pub fn sigma_in_regime(&self) -> bool {
        self.sigma >= 11.0
    }
}

/// What one round of dissemination produced.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    /// Per-agent sampled multisets (the V_i sets).
    pub sampled: Vec<Vec<PerturbedVector>>,
    /// Slots until quiescence (or truncation).
    pub slots: u32,
    /// Neighbor-directed forwards; self-moves are hops, not messages.
    pub total_messages: u64,
    /// Peak directed per-edge message count within any single slot.
    pub max_edge_slot_messages: u32,
    pub launched: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub truncated: bool,
}

impl RoundOutcome {
    pub fn v_counts(&self) -> Vec<usize> {
        self.sampled.iter().map(Vec::len).collect()
    }
}

/// In-flight state of one round.
pub struct DisseminationEngine {
    cap: usize,
    slot_cap: Option<u32>,
    queues: Vec<VecDeque<Token>>,
    sampled: Vec<Vec<PerturbedVector>>,
    /// Arrivals staged during a slot, applied after all agents popped.
    inbox: Vec<(u32, Token)>,
    /// Directed-edge message counts within the current slot, reset each
    /// slot via the touched list.
    edge_counts: Vec<u32>,
    touched_edges: Vec<u32>,
    edge_offsets: Vec<u32>,
    slot: u32,
    pending: u64,
    total_messages: u64,
    max_edge_slot_messages: u32,
    launched: u64,
    delivered: u64,
    dropped: u64,
}

impl DisseminationEngine {
    /// Seeds the engine: each adopting agent enqueues `cap` copies of its
    /// perturbed vector with the full hop budget into its own queue.
    pub fn launch_round(
        g: &Graph,
        perturbed: &[Option<PerturbedVector>],
        params: &DisseminationParams,
    ) -> Self {
        assert_eq!(perturbed.len(), g.n());
        let n = g.n();
        let mut edge_offsets = Vec::with_capacity(n + 1);
        let mut acc = 0u32;
        for i in 0..n {
            edge_offsets.push(acc);
            acc += g.degree(i);
        }
        edge_offsets.push(acc);

        let mut queues: Vec<VecDeque<Token>> = vec![VecDeque::new(); n];
        let mut launched = 0u64;
        for (i, p) in perturbed.iter().enumerate() {
            if let Some(payload) = p {
                let token = Token {
                    payload: *payload,
                    remaining_hops: params.walk_len as u16,
                };
                queues[i].extend(core::iter::repeat_n(token, params.cap));
                launched += params.cap as u64;
            }
        }

        Self {
            cap: params.cap,
            slot_cap: params.slot_cap,
            queues,
            sampled: vec![Vec::new(); n],
            inbox: Vec::new(),
            edge_counts: vec![0; acc as usize],
            touched_edges: Vec::new(),
            edge_offsets,
            slot: 0,
            pending: launched,
            total_messages: 0,
            max_edge_slot_messages: 0,
            launched,
            delivered: 0,
            dropped: 0,
        }
    }

    pub fn pending(&self) -> u64 {
        self.pending
    }

    pub fn slot(&self) -> u32 {
        self.slot
    }

    pub fn queue_len(&self, agent: usize) -> usize {
        self.queues[agent].len()
    }

    pub fn sampled_by(&self, agent: usize) -> &[PerturbedVector] {
        &self.sampled[agent]
    }

    /// Advances one synchronous slot. `streams[i]` must be agent `i`'s
    /// forwarding stream for this round.
    pub fn step_slot(&mut self, g: &Graph, tm: &TransitionModel, streams: &mut [Stream]) {
        debug_assert_eq!(streams.len(), g.n());
        for i in 0..g.n() {
            let take = self.cap.min(self.queues[i].len());
            for _ in 0..take {
                let token = self.queues[i].pop_front().expect("queue length checked");
                let hops_left = token.remaining_hops - 1;
                let (dest, neighbor_index) = sample_destination(tm, g, i, &mut streams[i]);
                if let Some(k) = neighbor_index {
                    self.total_messages += 1;
                    let edge = self.edge_offsets[i] + k as u32;
                    if self.edge_counts[edge as usize] == 0 {
                        self.touched_edges.push(edge);
                    }
                    self.edge_counts[edge as usize] += 1;
                }
                if hops_left == 0 {
                    self.sampled[dest].push(token.payload);
                    self.delivered += 1;
                    self.pending -= 1;
                } else {
                    self.inbox.push((
                        dest as u32,
                        Token {
                            payload: token.payload,
                            remaining_hops: hops_left,
                        },
                    ));
                }
            }
        }
        for &edge in &self.touched_edges {
            let count = core::mem::take(&mut self.edge_counts[edge as usize]);
            self.max_edge_slot_messages = self.max_edge_slot_messages.max(count);
        }
        self.touched_edges.clear();
        for (dest, token) in self.inbox.drain(..) {
            self.queues[dest as usize].push_back(token);
        }
        self.slot += 1;
    }

    /// Runs slots until every queue is empty, or until `slot_cap` fires,
    /// in which case surviving tokens are dropped and the outcome is
    /// flagged truncated.
    pub fn run_round(
        mut self,
        g: &Graph,
        tm: &TransitionModel,
        streams: &mut [Stream],
    ) -> RoundOutcome {
        let mut truncated = false;
        while self.pending > 0 {
            if let Some(cap) = self.slot_cap {
                if self.slot >= cap {
                    truncated = true;
                    for q in &mut self.queues {
                        self.dropped += q.len() as u64;
                        q.clear();
                    }
                    self.pending = 0;
                    break;
                }
            }
            self.step_slot(g, tm, streams);
        }
        RoundOutcome {
            sampled: self.sampled,
            slots: self.slot,
            total_messages: self.total_messages,
            max_edge_slot_messages: self.max_edge_slot_messages,
            launched: self.launched,
            delivered: self.delivered,
            dropped: self.dropped,
            truncated,
        }
    }
}
