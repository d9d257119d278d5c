//! Time-varying gossip schedules.
//!
//! A schedule is a horizon-`T` sequence of steps; each step is either a full
//! gossip matrix or a single pairwise edge averaging. The communication
//! pattern of step `t` (which messages are exchanged) drives both the
//! simulation and the exact privacy accounting.

use rand::Rng;
use serde::Serialize;

use super::GossipMatrix;
use crate::graph::{sample_er_edges, Graph};
use crate::rng::{self, stream};

/// One step of a schedule. `Matrix` steps reference an entry of the
/// schedule's matrix pool so constant schedules don't duplicate storage.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ScheduleStep {
    Matrix { id: usize },
    Edge { v: usize, w: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    n: usize,
    matrices: Vec<GossipMatrix>,
    steps: Vec<ScheduleStep>,
}

impl Schedule {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            matrices: Vec::new(),
            steps: Vec::new(),
        }
    }

    /// `T` repetitions of a fixed matrix.
    pub fn constant(w: GossipMatrix, horizon: usize) -> Self {
        let n = w.n();
        Self {
            n,
            matrices: vec![w],
            steps: (0..horizon).map(|_| ScheduleStep::Matrix { id: 0 }).collect(),
        }
    }

    /// A pairwise-averaging schedule from an explicit edge sequence.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            n,
            matrices: Vec::new(),
            steps: edges
                .into_iter()
                .map(|(v, w)| ScheduleStep::Edge { v, w })
                .collect(),
        }
    }

    pub fn push_matrix(&mut self, w: GossipMatrix) {
        assert_eq!(w.n(), self.n);
        self.matrices.push(w);
        self.steps.push(ScheduleStep::Matrix {
            id: self.matrices.len() - 1,
        });
    }

    pub fn push_shared_matrix(&mut self, id: usize) {
        assert!(id < self.matrices.len());
        self.steps.push(ScheduleStep::Matrix { id });
    }

    pub fn push_edge(&mut self, v: usize, w: usize) {
        assert!(v != w && v < self.n && w < self.n);
        self.steps.push(ScheduleStep::Edge { v, w });
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn steps(&self) -> &[ScheduleStep] {
        &self.steps
    }

    pub fn matrix(&self, id: usize) -> &GossipMatrix {
        &self.matrices[id]
    }

    /// Active edges of step `t`: support of the step matrix, or the single
    /// activated pair.
    pub fn step_edges(&self, t: usize) -> Vec<(usize, usize)> {
        match self.steps[t] {
            ScheduleStep::Matrix { id } => self.matrices[id].support_edges(),
            ScheduleStep::Edge { v, w } => vec![(v.min(w), v.max(w))],
        }
    }

    /// Prefix of the first `horizon` steps (same matrix pool).
    pub fn truncated(&self, horizon: usize) -> Self {
        Self {
            n: self.n,
            matrices: self.matrices.clone(),
            steps: self.steps[..horizon.min(self.steps.len())].to_vec(),
        }
    }

    /// Per-node communication counts `T_v`: how many messages node `v` was
    /// involved in across the whole horizon (one per incident edge per step).
    pub fn msg_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n];
        for t in 0..self.horizon() {
            for (v, w) in self.step_edges(t) {
                counts[v] += 1;
                counts[w] += 1;
            }
        }
        counts
    }

    /// Apply step `t` in place to node-major `dim`-vectors.
    pub(crate) fn apply_step(&self, t: usize, x: &mut Vec<f64>, dim: usize, scratch: &mut Vec<f64>) {
        match self.steps[t] {
            ScheduleStep::Matrix { id } => {
                scratch.resize(x.len(), 0.0);
                self.matrices[id].matvec_into(x, dim, scratch);
                std::mem::swap(x, scratch);
            }
            ScheduleStep::Edge { v, w } => {
                for d in 0..dim {
                    let mid = 0.5 * (x[v * dim + d] + x[w * dim + d]);
                    x[v * dim + d] = mid;
                    x[w * dim + d] = mid;
                }
            }
        }
    }

    /// Steps serialized as `{"type":"matrix","id":..}` /
    /// `{"type":"edge","v":..,"w":..}` objects.
    pub fn steps_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.steps).expect("steps serialize")
    }
}

/// One step of the availability model: each node is active independently
/// with probability `1 - dropout_rate`, a fresh G(q) graph is drawn over
/// the active nodes, and its lazy degree-based gossip matrix is extended
/// with identity rows for inactive nodes. Step `t` depends only on
/// `(seed, t)`, so prefixes of the same seed coincide.
///
/// The lazy form matters at high dropout: most active components are then
/// isolated pairs, where the plain degree weights produce a pure swap
/// (weight 1) that spends two messages without averaging anything. The
/// lazy matrix averages such pairs at weight 1/2, keeping the privacy cost
/// per unit of mixing comparable across dropout levels.
pub fn dropout_step_matrix(
    n: usize,
    q: f64,
    dropout_rate: f64,
    t: usize,
    seed: u64,
) -> crate::error::Result<GossipMatrix> {
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(crate::error::Error::InvalidParameter(format!(
            "dropout rate {dropout_rate} outside [0,1)"
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(crate::error::Error::InvalidParameter(format!("q={q} outside [0,1]")));
    }
    let mut r = rng::substream(seed, stream::DROPOUT, t as u64);
    let active: Vec<usize> = (0..n)
        .filter(|_| r.random::<f64>() >= dropout_rate)
        .collect();
    let local_edges = sample_er_edges(active.len(), q, &mut r);
    let edges: Vec<(usize, usize)> = local_edges
        .into_iter()
        .map(|(a, b)| (active[a], active[b]))
        .collect();
    let step_graph = Graph::new(n.max(1), edges).expect("sampled edges are simple");
    Ok(GossipMatrix::hamilton(&step_graph).lazy())
}

/// Materialized availability schedule over `horizon` steps. Per-step
/// connectivity is not required; mixing comes from the union over time.
pub fn dropout_schedule(
    n: usize,
    q: f64,
    dropout_rate: f64,
    horizon: usize,
    seed: u64,
) -> crate::error::Result<Schedule> {
    let mut sched = Schedule::new(n);
    for t in 0..horizon {
        sched.push_matrix(dropout_step_matrix(n, q, dropout_rate, t, seed)?);
    }
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;

    #[test]
    fn constant_schedule_shares_one_matrix() {
        let w = GossipMatrix::hamilton(&graph::gen_complete(4).unwrap());
        let s = Schedule::constant(w, 10);
        assert_eq!(s.horizon(), 10);
        assert_eq!(s.matrices.len(), 1);
        assert_eq!(s.msg_counts(), vec![30; 4]); // 3 incident edges x 10 steps
    }

    #[test]
    fn edge_schedule_counts_endpoints() {
        let s = Schedule::from_edges(4, [(0, 1), (1, 2), (0, 1)]);
        assert_eq!(s.msg_counts(), vec![2, 3, 1, 0]);
    }

    #[test]
    fn dropout_zero_with_q_one_is_lazy_complete_every_step() {
        let s = dropout_schedule(5, 1.0, 0.0, 3, 9).unwrap();
        let complete = GossipMatrix::hamilton(&graph::gen_complete(5).unwrap()).lazy();
        for t in 0..3 {
            match s.steps()[t] {
                ScheduleStep::Matrix { id } => assert_eq!(s.matrix(id), &complete),
                _ => panic!("expected matrix step"),
            }
        }
    }

    #[test]
    fn dropout_isolated_pair_averages_instead_of_swapping() {
        // with two nodes and a guaranteed edge, the step must mix the pair
        let w = dropout_step_matrix(2, 1.0, 0.0, 0, 1).unwrap();
        assert!((w.entry(0, 0) - 0.5).abs() < 1e-15);
        assert!((w.entry(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn near_total_dropout_yields_identity_steps() {
        let s = dropout_schedule(6, 1.0, 0.999999, 4, 2).unwrap();
        for t in 0..4 {
            assert!(s.step_edges(t).is_empty());
        }
    }

    #[test]
    fn steps_json_shape() {
        let mut s = Schedule::from_edges(3, [(0, 2)]);
        s.push_matrix(GossipMatrix::identity(3));
        let v = s.steps_json();
        assert_eq!(v[0]["type"], "edge");
        assert_eq!(v[0]["v"], 0);
        assert_eq!(v[1]["type"], "matrix");
        assert_eq!(v[1]["id"], 0);
    }

    #[test]
    fn truncation_is_prefix() {
        let s = Schedule::from_edges(4, [(0, 1), (1, 2), (2, 3)]);
        let t = s.truncated(2);
        assert_eq!(t.horizon(), 2);
        assert_eq!(t.steps(), &s.steps()[..2]);
    }
}
