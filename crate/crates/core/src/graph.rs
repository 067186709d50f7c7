//! Graph topologies the protocol runs on: undirected, connected,
//! non-bipartite, with dense node ids `0..n`.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{StreamFactory, StreamKind};

/// Maximum resampling attempts for the random generators before giving up.
const MAX_GENERATION_ATTEMPTS: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("node id {id} out of range for {n} nodes")]
    InvalidNodeId { id: u32, n: usize },
    #[error("self-loop at node {id}")]
    SelfLoop { id: u32 },
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: u32, v: u32 },
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph is bipartite (no odd cycle)")]
    Bipartite,
    #[error("invalid degree {d} for {n} nodes (need d >= 3, d < n, n*d even)")]
    InvalidDegree { n: usize, d: u32 },
    #[error("no valid graph found in {attempts} attempts")]
    GenerationFailed { attempts: u32 },
}

/// An undirected simple graph, validated to be connected and non-bipartite.
///
/// Immutable once built; safe to share across concurrent runs.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    adjacency: Vec<Vec<u32>>,
    degrees: Vec<u32>,
}

impl Graph {
    /// Builds and validates a graph from an explicit edge list.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Disconnected);
        }
        let mut normalized: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u as usize >= n {
                return Err(GraphError::InvalidNodeId { id: u, n });
            }
            if v as usize >= n {
                return Err(GraphError::InvalidNodeId { id: v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop { id: u });
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        for w in normalized.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge {
                    u: w[0].0,
                    v: w[0].1,
                });
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &normalized {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let degrees = adjacency.iter().map(|l| l.len() as u32).collect();

        let graph = Self {
            n,
            adjacency,
            degrees,
        };
        graph.check_connected_non_bipartite()?;
        Ok(graph)
    }

    /// G(n, p) sample, resampled with derived sub-seeds until it is
    /// connected and non-bipartite. Deterministic in `(n, p, seed)`.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self, GraphError> {
        assert!(p > 0.0 && p <= 1.0, "edge probability must be in (0, 1]");
        let factory = StreamFactory::new(seed);
        for attempt in 0..MAX_GENERATION_ATTEMPTS {
            let mut stream = factory.stream(StreamKind::GraphGen, 0, attempt);
            let mut edges = Vec::new();
            for u in 0..n as u32 {
                for v in (u + 1)..n as u32 {
                    if stream.bernoulli(p) {
                        edges.push((u, v));
                    }
                }
            }
            match Self::from_edges(n, &edges) {
                Ok(g) => return Ok(g),
                Err(GraphError::Disconnected) | Err(GraphError::Bipartite) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(GraphError::GenerationFailed {
            attempts: MAX_GENERATION_ATTEMPTS,
        })
    }

    /// Random d-regular simple graph via stub pairing with rejection.
    /// Deterministic in `(n, d, seed)`.
    pub fn random_regular(n: usize, d: u32, seed: u64) -> Result<Self, GraphError> {
        if d < 3 || d as usize >= n || (n * d as usize) % 2 != 0 {
            return Err(GraphError::InvalidDegree { n, d });
        }
        let factory = StreamFactory::new(seed);
        for attempt in 0..MAX_GENERATION_ATTEMPTS {
            let mut stream = factory.stream(StreamKind::GraphGen, 0, attempt);
            let Some(edges) = try_stub_pairing(n, d, &mut stream) else {
                continue;
            };
            match Self::from_edges(n, &edges) {
                Ok(g) => return Ok(g),
                Err(GraphError::Disconnected) | Err(GraphError::Bipartite) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(GraphError::GenerationFailed {
            attempts: MAX_GENERATION_ATTEMPTS,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self, node: usize) -> u32 {
        self.degrees[node]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adjacency[node]
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().map(|&d| d as usize).sum::<usize>() / 2
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for &v in &self.adjacency[u] {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    /// Single BFS doing double duty: component coverage and 2-coloring.
    /// An edge inside one color class certifies an odd cycle.
    fn check_connected_non_bipartite(&self) -> Result<(), GraphError> {
        let mut color = vec![u8::MAX; self.n];
        let mut queue = alloc::collections::VecDeque::new();
        color[0] = 0;
        queue.push_back(0usize);
        let mut visited = 1usize;
        let mut odd_cycle = false;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                let v = v as usize;
                if color[v] == u8::MAX {
                    color[v] = 1 - color[u];
                    visited += 1;
                    queue.push_back(v);
                } else if color[v] == color[u] {
                    odd_cycle = true;
                }
            }
        }
        if visited != self.n {
            return Err(GraphError::Disconnected);
        }
        if !odd_cycle {
            return Err(GraphError::Bipartite);
        }
        Ok(())
    }
}

/// One pairing attempt: shuffle the stub multiset, greedily pair scanning
/// left to right, re-pool stubs whose pair would be a self-loop or a
/// duplicate. Gives up (returns `None`) when a full pass makes no progress.
fn try_stub_pairing(n: usize, d: u32, stream: &mut crate::rng::Stream) -> Option<Vec<(u32, u32)>> {
    let mut stubs: Vec<u32> = (0..n as u32)
        .flat_map(|v| core::iter::repeat_n(v, d as usize))
        .collect();
    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    while !stubs.is_empty() {
        stream.shuffle(&mut stubs);
        let mut leftover = Vec::new();
        let mut progress = false;
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0], pair[1]);
            let key = (u.min(v), u.max(v));
            if u != v && !edges.contains(&key) {
                edges.insert(key);
                progress = true;
            } else {
                leftover.push(u);
                leftover.push(v);
            }
        }
        if !progress {
            return None;
        }
        stubs = leftover;
    }
    Some(edges.into_iter().collect())
}
