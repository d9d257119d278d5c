//! Edge activation intensities for randomized pairwise gossip.

use std::sync::OnceLock;

use rand::Rng;

use super::GossipMatrix;
use crate::error::{Error, Result};

/// Sum-to-one tolerance when constructing activations directly.
const SUM_TOL: f64 = 1e-12;
/// Tolerance used when deriving activations from a gossip matrix.
const DERIVE_TOL: f64 = 1e-9;

/// Per-edge activation probabilities `p_{v,w}` summing to 1.
#[derive(Debug, Clone)]
pub struct EdgeActivation {
    n: usize,
    edges: Vec<(usize, usize)>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    lambda: OnceLock<Result<f64>>,
}

impl EdgeActivation {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, probs: Vec<f64>) -> Result<Self> {
        if edges.len() != probs.len() {
            return Err(Error::InvalidParameter(
                "edges and probabilities must have equal length".into(),
            ));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidParameter("negative activation probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::NormalizationFailure { sum });
        }
        for &(v, w) in &edges {
            if v == w || v >= n || w >= n {
                return Err(Error::InvalidParameter(format!("bad edge ({v},{w})")));
            }
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(Self {
            n,
            edges,
            probs,
            cumulative,
            lambda: OnceLock::new(),
        })
    }

    /// Activation intensities `p_{v,w} = 2 W_{v,w} / n` derived from a
    /// gossip matrix. The probabilities sum to 1 exactly when the matrix has
    /// zero diagonal mass; otherwise this fails with
    /// [`Error::NormalizationFailure`] and the caller may renormalize
    /// explicitly via [`EdgeActivation::uniform_from_renormalized`].
    pub fn uniform_from(w: &GossipMatrix) -> Result<Self> {
        let (edges, probs) = Self::raw_intensities(w);
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DERIVE_TOL {
            return Err(Error::NormalizationFailure { sum });
        }
        // rescale the tolerated sub-tolerance residue so the invariant holds exactly
        let probs = probs.iter().map(|p| p / sum).collect();
        Self::new(w.n(), edges, probs)
    }

    /// Like [`EdgeActivation::uniform_from`] but renormalizes regardless of
    /// the diagonal mass.
    pub fn uniform_from_renormalized(w: &GossipMatrix) -> Result<Self> {
        let (edges, probs) = Self::raw_intensities(w);
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidParameter("matrix has no off-diagonal mass".into()));
        }
        let probs = probs.iter().map(|p| p / sum).collect();
        Self::new(w.n(), edges, probs)
    }

    fn raw_intensities(w: &GossipMatrix) -> (Vec<(usize, usize)>, Vec<f64>) {
        let n = w.n() as f64;
        let edges = w.support_edges();
        let probs = edges.iter().map(|&(v, u)| 2.0 * w.entry(v, u) / n).collect();
        (edges, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Per-node totals `pi_v = sum over incident edges of p`.
    pub fn node_totals(&self) -> Vec<f64> {
        let mut pi = vec![0.0; self.n];
        for (&(v, w), &p) in self.edges.iter().zip(&self.probs) {
            pi[v] += p;
            pi[w] += p;
        }
        pi
    }

    /// Sample one edge according to the activation probabilities.
    pub fn sample_edge(&self, rng: &mut impl Rng) -> (usize, usize) {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.edges.len() - 1);
        self.edges[idx]
    }

    /// Expected matrix of one randomized step,
    /// `I - sum_e p_e (e_v - e_w)(e_v - e_w)^T / 2`.
    pub fn expected_matrix(&self) -> GossipMatrix {
        let mut dense = vec![0.0; self.n * self.n];
        for v in 0..self.n {
            dense[v * self.n + v] = 1.0;
        }
        for (&(v, w), &p) in self.edges.iter().zip(&self.probs) {
            dense[v * self.n + v] -= p / 2.0;
            dense[w * self.n + w] -= p / 2.0;
            dense[v * self.n + w] += p / 2.0;
            dense[w * self.n + v] += p / 2.0;
        }
        GossipMatrix::from_dense(self.n, &dense).expect("expected matrix is a gossip matrix")
    }

    /// Spectral gap `lambda(p)` of the graph weighted by the activation
    /// intensities (equivalently, the spectral gap of
    /// [`EdgeActivation::expected_matrix`]). Cached.
    pub fn lambda_p(&self) -> Result<f64> {
        self.lambda
            .get_or_init(|| self.expected_matrix().spectral_gap())
            .clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;

    #[test]
    fn k4_uniform_sixth_per_edge() {
        let w = GossipMatrix::hamilton(&graph::gen_complete(4).unwrap());
        let act = EdgeActivation::uniform_from(&w).unwrap();
        assert_eq!(act.edges().len(), 6);
        for &p in act.probabilities() {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
        let pi = act.node_totals();
        for &x in &pi {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn path3_fails_then_renormalizes() {
        let g = crate::graph::Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let w = GossipMatrix::hamilton(&g);
        match EdgeActivation::uniform_from(&w) {
            Err(Error::NormalizationFailure { sum }) => assert!((sum - 2.0 / 3.0).abs() < 1e-12),
            other => panic!("expected NormalizationFailure, got {other:?}"),
        }
        let act = EdgeActivation::uniform_from_renormalized(&w).unwrap();
        for &p in act.probabilities() {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn k4_lambda_p_is_one_third() {
        let w = GossipMatrix::hamilton(&graph::gen_complete(4).unwrap());
        let act = EdgeActivation::uniform_from(&w).unwrap();
        // 2 * lambda_W / n = 2 * (2/3) / 4
        assert!((act.lambda_p().unwrap() - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn sampling_matches_probabilities() {
        let w = GossipMatrix::hamilton(&graph::gen_complete(3).unwrap());
        let act = EdgeActivation::uniform_from(&w).unwrap();
        let mut rng = crate::rng::substream(5, crate::rng::stream::EDGE_SAMPLING, 0);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..30_000 {
            *counts.entry(act.sample_edge(&mut rng)).or_insert(0usize) += 1;
        }
        for (_, c) in counts {
            let freq = c as f64 / 30_000.0;
            assert!((freq - 1.0 / 3.0).abs() < 0.02, "freq {freq}");
        }
    }
}
