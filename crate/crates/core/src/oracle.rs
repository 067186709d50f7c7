//! Independent brute-force validators. Everything here recomputes protocol
//! quantities by a different route (dense linear algebra, exhaustive
//! enumeration, closed forms) and deliberately shares no code with the
//! implementations it certifies.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::QualityDraw;
use crate::graph::Graph;
use crate::math;
use crate::protocol::ProtocolParams;
use crate::transition::TransitionModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("eigensolver did not converge")]
    ConvergenceFailure,
}

/// Dense row-major matrix used for exact computations at small n.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Dense realization of the walk's transition matrix.
    pub fn from_transition(g: &Graph, tm: &TransitionModel) -> Self {
        let n = g.n();
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, tm.self_prob(i));
            for (k, &j) in g.neighbors(i).iter().enumerate() {
                m.set(i, j as usize, tm.neighbor_probs(i)[k]);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Matrix power by repeated squaring.
    pub fn matpow(&self, mut t: usize) -> Self {
        let mut result = Self::identity(self.n);
        let mut base = self.clone();
        while t > 0 {
            if t & 1 == 1 {
                result = result.matmul(&base);
            }
            t >>= 1;
            if t > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.n)
            .map(|i| math::abs(self.row(i).iter().sum::<f64>() - 1.0))
            .fold(0.0, f64::max)
    }
}

/// Exact t-step walk distribution from `origin`: `e_origin * Psi^t` by t
/// matrix-vector products.
pub fn exact_walk_distribution(psi: &DenseMatrix, origin: usize, t: usize) -> Vec<f64> {
    let n = psi.n();
    let mut dist = vec![0.0; n];
    dist[origin] = 1.0;
    let mut next = vec![0.0; n];
    for _ in 0..t {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for j in 0..n {
                next[j] += mass * psi.get(i, j);
            }
        }
        core::mem::swap(&mut dist, &mut next);
    }
    dist
}

/// Eigenvalue moduli of a symmetric matrix, sorted descending, via cyclic
/// Jacobi rotations. `tol` bounds the final off-diagonal Frobenius norm.
pub fn exact_spectral_values(psi: &DenseMatrix, tol: f64) -> Result<Vec<f64>, OracleError> {
    let n = psi.n();
    let mut a = psi.clone();
    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if math::sqrt(2.0 * off) < tol {
            let mut values: Vec<f64> = (0..n).map(|i| math::abs(a.get(i, i))).collect();
            values.sort_by(|x, y| y.total_cmp(x));
            return Ok(values);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if math::abs(apq) < 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // Classic two-sided rotation zeroing a[p][q].
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (math::abs(theta) + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    Err(OracleError::ConvergenceFailure)
}

/// Closed-form expected bit-mean after randomized response when the true
/// popularity is `q_true`:
/// `(q_true (e^{eps/2} - 1) + 1) / (e^{eps/2} + 1)`.
pub fn debias_expectation(q_true: f64, epsilon: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q_true));
    if epsilon.is_infinite() {
        return q_true;
    }
    let e = math::exp(epsilon / 2.0);
    (q_true * (e - 1.0) + 1.0) / (e + 1.0)
}

/// Exhaustive worst-case likelihood ratio of the perturbation mechanism
/// over all pairs of one-hot adoption vectors and all 2^m outputs. The
/// privacy guarantee needs this to stay at or below `e^epsilon`.
pub fn ldp_ratio_max(m: usize, epsilon: f64) -> f64 {
    assert!((1..=16).contains(&m), "enumeration is meant for small m");
    let e = math::exp(epsilon / 2.0);
    // Both from the same denominator; deriving flip as 1 - keep would lose
    // most of its precision at large budgets.
    let keep = e / (e + 1.0);
    let flip = 1.0 / (e + 1.0);
    let prob = |input: u64, output: u64| -> f64 {
        let differing = (input ^ output).count_ones();
        let mut p = 1.0;
        for _ in 0..differing {
            p *= flip;
        }
        for _ in 0..(m as u32 - differing) {
            p *= keep;
        }
        p
    };
    let mut max_ratio: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let x1 = 1u64 << a;
            let x2 = 1u64 << b;
            for output in 0..(1u64 << m) {
                let ratio = prob(x1, output) / prob(x2, output);
                max_ratio = max_ratio.max(ratio);
            }
        }
    }
    max_ratio
}

/// Reference multiplicative-weights dynamics driven by a shared quality
/// history. Returns the per-round distributions `P^r` for `r = 0..=R`,
/// with `P^0` uniform. Weights are renormalized every round, which leaves
/// the distributions unchanged while preventing under/overflow.
pub fn mwu_reference(phi_history: &[QualityDraw], params: &ProtocolParams) -> Vec<Vec<f64>> {
    assert!(!phi_history.is_empty());
    let m = phi_history[0].bits().len();
    let mu = params.mu();
    let beta = params.beta();
    let mut weights = vec![1.0f64; m];
    let mut out = Vec::with_capacity(phi_history.len() + 1);
    out.push(vec![1.0 / m as f64; m]);
    for phi in phi_history {
        debug_assert_eq!(phi.bits().len(), m);
        let total: f64 = weights.iter().sum();
        let mut next = Vec::with_capacity(m);
        for (j, &w) in weights.iter().enumerate() {
            let mixed = (1.0 - mu) * w + mu / m as f64 * total;
            let reward = if phi.is_good(j) { beta } else { 1.0 - beta };
            next.push(mixed * reward);
        }
        let next_total: f64 = next.iter().sum();
        for w in &mut next {
            *w /= next_total;
        }
        out.push(next.clone());
        weights = next;
    }
    out
}
