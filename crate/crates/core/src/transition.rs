//! Metropolis-Hastings forwarding model: edge probabilities, spectral gap,
//! and the walk length needed for near-uniform mixing.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::Graph;
use crate::math;
use crate::rng::Stream;

pub const DEFAULT_GAP_TOL: f64 = 1e-9;
pub const DEFAULT_GAP_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TransitionError {
    #[error("power iteration did not converge within the iteration cap")]
    ConvergenceFailure,
}

/// Per-node forwarding distribution of the Metropolis-Hastings walk.
///
/// A token at node `i` moves to neighbor `i'` with probability
/// `min(1/N_i, 1/N_i')` and stays put with the leftover mass. On a
/// connected non-bipartite graph this chain is symmetric doubly stochastic
/// with a uniform stationary distribution.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    self_prob: Vec<f64>,
    /// Aligned with the graph adjacency lists.
    neighbor_probs: Vec<Vec<f64>>,
    /// Prefix sums of `neighbor_probs`, for destination sampling.
    neighbor_cum: Vec<Vec<f64>>,
    gap: Option<f64>,
    walk_length: Option<usize>,
    /// Uniformity tolerance used when solving for the walk length.
    alpha: f64,
}

impl TransitionModel {
    /// Builds the forwarding probabilities for `g`. The spectral gap and
    /// walk length stay unset until [`solve_mixing`](Self::solve_mixing)
    /// or the setters run.
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.n();
        let mut self_prob = vec![0.0; n];
        let mut neighbor_probs = Vec::with_capacity(n);
        let mut neighbor_cum = Vec::with_capacity(n);
        for i in 0..n {
            let di = g.degree(i) as f64;
            let probs: Vec<f64> = g
                .neighbors(i)
                .iter()
                .map(|&j| {
                    let dj = g.degree(j as usize) as f64;
                    (1.0 / di).min(1.0 / dj)
                })
                .collect();
            let total: f64 = probs.iter().sum();
            let mut cum = Vec::with_capacity(probs.len());
            let mut acc = 0.0;
            for &p in &probs {
                acc += p;
                cum.push(acc);
            }
            self_prob[i] = 1.0 - total;
            neighbor_probs.push(probs);
            neighbor_cum.push(cum);
        }
        Self {
            self_prob,
            neighbor_probs,
            neighbor_cum,
            gap: None,
            walk_length: None,
            alpha: default_alpha(n),
        }
    }

    pub fn self_prob(&self, node: usize) -> f64 {
        self.self_prob[node]
    }

    pub fn neighbor_probs(&self, node: usize) -> &[f64] {
        &self.neighbor_probs[node]
    }

    pub fn gap(&self) -> Option<f64> {
        self.gap
    }

    pub fn walk_length(&self) -> Option<usize> {
        self.walk_length
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        assert!(alpha > 0.0);
        self.alpha = alpha;
    }

    /// For callers that computed or estimated the gap externally (large n).
    pub fn set_mixing(&mut self, gap: f64, walk_length: usize) {
        assert!(gap > 0.0 && gap <= 1.0);
        assert!(walk_length >= 1);
        self.gap = Some(gap);
        self.walk_length = Some(walk_length);
    }

    /// Computes the spectral gap by power iteration and derives the walk
    /// length for the configured `alpha`. Returns `(gap, walk_length)`.
    pub fn solve_mixing(
        &mut self,
        g: &Graph,
        tol: f64,
        max_iters: usize,
    ) -> Result<(f64, usize), TransitionError> {
        let gap = self.spectral_gap(g, tol, max_iters)?;
        let len = walk_length(g.n(), gap, self.alpha);
        self.gap = Some(gap);
        self.walk_length = Some(len);
        Ok((gap, len))
    }

    /// Spectral gap `1 - |lambda_2|` of the transition matrix.
    ///
    /// Power iteration with deflation against the uniform top eigenvector:
    /// the matrix is doubly stochastic, so removing the mean of the iterate
    /// projects out the eigenvalue-1 direction. Iteration runs on the
    /// squared operator because `lambda_2` may be negative; the Rayleigh
    /// quotient of the square converges to `lambda_2^2` even when edge
    /// eigenvalues are degenerate.
    pub fn spectral_gap(
        &self,
        g: &Graph,
        tol: f64,
        max_iters: usize,
    ) -> Result<f64, TransitionError> {
        assert!(tol > 0.0);
        let n = g.n();
        // Deterministic start vector, mean-removed so the uniform direction
        // is gone from the outset.
        let mut x: Vec<f64> = {
            let factory = crate::rng::StreamFactory::new(0x9e37_79b9);
            let mut s = factory.stream(crate::rng::StreamKind::Aux, 0, 0);
            (0..n).map(|_| s.unit_f64() - 0.5).collect()
        };
        remove_mean(&mut x);
        normalize(&mut x);

        let mut y = vec![0.0; n];
        let mut prev = f64::INFINITY;
        // A short warm-up guards against stopping on a coincidental plateau.
        let min_iters = 16;
        for iter in 0..max_iters {
            self.apply(g, &x, &mut y);
            remove_mean(&mut y);
            // Rayleigh quotient of the squared operator: |Psi x|^2 / |x|^2
            // with |x| = 1.
            let lambda_sq: f64 = y.iter().map(|v| v * v).sum();
            self.apply(g, &y, &mut x);
            remove_mean(&mut x);
            let norm = normalize(&mut x);
            if norm == 0.0 {
                // Operator annihilated the iterate: no mass outside the
                // uniform direction (cannot happen for n >= 3 valid graphs).
                return Ok(1.0);
            }
            if iter >= min_iters && math::abs(lambda_sq - prev) < tol * lambda_sq.max(1e-30) {
                let modulus = math::sqrt(lambda_sq);
                let gap = 1.0 - modulus;
                if gap <= 0.0 {
                    return Err(TransitionError::ConvergenceFailure);
                }
                return Ok(gap);
            }
            prev = lambda_sq;
        }
        Err(TransitionError::ConvergenceFailure)
    }

    /// `out = Psi * x` using the sparse adjacency.
    fn apply(&self, g: &Graph, x: &[f64], out: &mut [f64]) {
        for i in 0..g.n() {
            let mut acc = self.self_prob[i] * x[i];
            for (k, &j) in g.neighbors(i).iter().enumerate() {
                acc += self.neighbor_probs[i][k] * x[j as usize];
            }
            out[i] = acc;
        }
    }

    /// Row sum of node `i` (should be 1).
    pub fn row_sum(&self, i: usize) -> f64 {
        self.self_prob[i] + self.neighbor_probs[i].iter().sum::<f64>()
    }
}

/// Samples the destination of one step from `i`, returning
/// `(destination, neighbor_index)` where the index is `None` for a
/// self-move.
///
/// When the neighbor mass is exactly 1 in theory but rounds slightly below
/// it, draws landing in the rounding sliver clamp to the last neighbor
/// instead of fabricating a zero-probability self-move.
pub fn sample_destination(
    tm: &TransitionModel,
    g: &Graph,
    i: usize,
    stream: &mut Stream,
) -> (usize, Option<usize>) {
    let cum = &tm.neighbor_cum[i];
    let total = *cum.last().expect("degree >= 1");
    let u = stream.unit_f64();
    if u >= total {
        if tm.self_prob[i] > 0.0 {
            return (i, None);
        }
        let index = cum.len() - 1;
        return (g.neighbors(i)[index] as usize, Some(index));
    }
    let index = match cum.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
        Ok(k) => k + 1,
        Err(k) => k,
    };
    let index = index.min(cum.len() - 1);
    (g.neighbors(i)[index] as usize, Some(index))
}

/// Walk length guaranteeing alpha-near-uniform endpoints:
/// `ceil((1/gap) * ln(2n/alpha))`, clamped to at least one hop.
pub fn walk_length(n: usize, gap: f64, alpha: f64) -> usize {
    assert!(gap > 0.0 && gap <= 1.0, "gap must lie in (0, 1]");
    assert!(alpha > 0.0);
    let steps = math::ceil(math::ln(2.0 * n as f64 / alpha) / gap);
    if steps < 1.0 {
        1
    } else {
        steps as usize
    }
}

pub fn default_alpha(n: usize) -> f64 {
    let nf = n as f64;
    1.0 / (nf * nf * nf)
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = math::sqrt(x.iter().map(|v| v * v).sum());
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    norm
}
