//! Exact per-pair accounting over arbitrary schedules, plus closed-form
//! bounds.
//!
//! For a schedule with matrices `W_0, ..., W_{T-1}`, the state at step `t`
//! is `x^t = M_t (x + eta)` with `M_t = W_{t-1} ... W_0` and `M_0 = I`. When
//! `v` and `w` exchange messages at step `t`, node `v` observes `x^t_w`,
//! whose sensitivity to `u`'s input is `M_t[w][u]` against noise of scale
//! `||row_w(M_t)||`. Summing the per-message Gaussian losses over every
//! observation gives
//!
//! `f(u,v) = (alpha delta^2 / 2 sigma^2) * sum_w sum_{t : {v,w} active}
//!  M_t[w][u]^2 / ||row_w(M_t)||^2`.
//!
//! The product `M_t` is maintained incrementally, sparse-by-row: full-matrix
//! steps cost `O(nnz(W) * n)`, pairwise/near-identity steps only touch the
//! affected rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PairwiseLossMatrix, PrivacyParams};
use crate::error::{Error, Result};
use crate::gossip::{GossipMatrix, Schedule, ScheduleStep};

/// Incrementally maintained propagation product `M_t`, with per-step row
/// norms cached.
struct ProductTracker {
    n: usize,
    m: Vec<f64>,
    /// snapshot buffer for rows rewritten within one step
    snap: Vec<f64>,
    slot: Vec<usize>,
    temp: Vec<f64>,
    /// second full buffer for dense (mostly non-identity) steps
    dense_buf: Vec<f64>,
    rownorm: Vec<f64>,
    norm_stamp: Vec<u64>,
    stamp: u64,
}

impl ProductTracker {
    fn identity(n: usize) -> Self {
        let mut m = vec![0.0; n * n];
        for v in 0..n {
            m[v * n + v] = 1.0;
        }
        Self {
            n,
            m,
            snap: Vec::new(),
            slot: vec![usize::MAX; n],
            temp: Vec::new(),
            dense_buf: Vec::new(),
            rownorm: vec![0.0; n],
            norm_stamp: vec![0; n],
            stamp: 1,
        }
    }

    fn row(&self, w: usize) -> &[f64] {
        &self.m[w * self.n..(w + 1) * self.n]
    }

    /// `||row_w(M_t)||^2`, cached until the next advance.
    fn row_norm_sq(&mut self, w: usize) -> f64 {
        if self.norm_stamp[w] != self.stamp {
            self.rownorm[w] = self.row(w).iter().map(|x| x * x).sum();
            self.norm_stamp[w] = self.stamp;
        }
        self.rownorm[w]
    }

    /// `M_{t+1} = W_t * M_t`. Only rows of `W_t` that differ from the
    /// identity change; those are snapshotted and rewritten in place, so
    /// near-identity steps (dropout, pairwise) stay cheap.
    fn advance_matrix(&mut self, w: &GossipMatrix) {
        let n = self.n;
        let affected: Vec<usize> = (0..n).filter(|&v| !w.is_identity_row(v)).collect();
        if affected.is_empty() {
            self.stamp += 1;
            return;
        }
        // dense steps at scale: double-buffer product, parallel over rows
        if n >= 512 && affected.len() >= n / 2 {
            let mut next = std::mem::take(&mut self.dense_buf);
            next.resize(n * n, 0.0);
            let m = &self.m;
            next.par_chunks_mut(n).enumerate().for_each(|(v, dst)| {
                if w.is_identity_row(v) {
                    dst.copy_from_slice(&m[v * n..(v + 1) * n]);
                } else {
                    dst.fill(0.0);
                    for &(src, coef) in w.row(v) {
                        for (d, s) in dst.iter_mut().zip(&m[src * n..(src + 1) * n]) {
                            *d += coef * s;
                        }
                    }
                }
            });
            std::mem::swap(&mut self.m, &mut next);
            self.dense_buf = next;
            self.stamp += 1;
            return;
        }
        self.snap.resize(affected.len() * n, 0.0);
        for (i, &v) in affected.iter().enumerate() {
            self.snap[i * n..(i + 1) * n].copy_from_slice(&self.m[v * n..(v + 1) * n]);
            self.slot[v] = i;
        }
        let mut temp = std::mem::take(&mut self.temp);
        temp.resize(n, 0.0);
        for &v in &affected {
            temp.fill(0.0);
            for &(src, coef) in w.row(v) {
                // rewritten rows read their pre-step snapshot; identity rows
                // of W_t are never rewritten and read through directly
                let src_row: &[f64] = if self.slot[src] != usize::MAX {
                    &self.snap[self.slot[src] * n..(self.slot[src] + 1) * n]
                } else {
                    &self.m[src * n..(src + 1) * n]
                };
                for (d, s) in temp.iter_mut().zip(src_row) {
                    *d += coef * s;
                }
            }
            self.m[v * n..(v + 1) * n].copy_from_slice(&temp);
        }
        self.temp = temp;
        for &v in &affected {
            self.slot[v] = usize::MAX;
        }
        self.stamp += 1;
    }

    /// Pairwise averaging step: rows v and w move to their midpoint.
    fn advance_edge(&mut self, v: usize, w: usize) {
        let n = self.n;
        let (lo, hi) = (v.min(w), v.max(w));
        let (a, b) = self.m.split_at_mut(hi * n);
        let row_lo = &mut a[lo * n..(lo + 1) * n];
        let row_hi = &mut b[..n];
        for (x, y) in row_lo.iter_mut().zip(row_hi.iter_mut()) {
            let mid = 0.5 * (*x + *y);
            *x = mid;
            *y = mid;
        }
        self.stamp += 1;
    }
}

/// Streaming pairwise accountant: feed one step at a time, then
/// [`Accountant::finish`]. Long or generated-on-the-fly schedules never
/// need to be materialized.
pub struct Accountant {
    n: usize,
    tracker: ProductTracker,
    /// acc[v][u]: normalized squared sensitivity of v's observations to u
    acc: Vec<f64>,
    msg_count: Vec<u64>,
    max_term: f64,
    sq_buf: Vec<f64>,
}

impl Accountant {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            tracker: ProductTracker::identity(n),
            acc: vec![0.0; n * n],
            msg_count: vec![0u64; n],
            max_term: 0.0,
            sq_buf: Vec::new(),
        }
    }

    /// Record that every node in `observers` saw this source's current
    /// value. The normalized squared row is computed once and added to each
    /// observer's accumulator.
    fn observe_source(&mut self, source: usize, observers: &[usize]) {
        if observers.is_empty() {
            return;
        }
        let n = self.n;
        let r = self.tracker.row_norm_sq(source);
        debug_assert!(r > 0.0, "zero row norm");
        let inv_r = 1.0 / r;
        let mut sq = std::mem::take(&mut self.sq_buf);
        sq.resize(n, 0.0);
        let row = &self.tracker.m[source * n..(source + 1) * n];
        let mut row_max = 0.0f64;
        for (dst, &x) in sq.iter_mut().zip(row) {
            let term = x * x * inv_r;
            *dst = term;
            if term > row_max {
                row_max = term;
            }
        }
        if row_max > self.max_term {
            self.max_term = row_max;
        }
        for &v in observers {
            let dst = &mut self.acc[v * n..(v + 1) * n];
            for (d, &s) in dst.iter_mut().zip(&sq) {
                *d += s;
            }
            self.msg_count[v] += 1;
        }
        self.sq_buf = sq;
    }

    /// One full-matrix round: every support edge exchanges messages, then
    /// the propagation product advances by `w`.
    pub fn step_matrix(&mut self, w: &GossipMatrix) {
        assert_eq!(w.n(), self.n);
        for source in 0..self.n {
            let observers: Vec<usize> = w
                .row(source)
                .iter()
                .map(|&(v, _)| v)
                .filter(|&v| v != source)
                .collect();
            self.observe_source(source, &observers);
        }
        self.tracker.advance_matrix(w);
    }

    /// One pairwise-averaging round on edge `{v, w}`.
    pub fn step_edge(&mut self, v: usize, w: usize) {
        self.observe_source(v, &[w]);
        self.observe_source(w, &[v]);
        self.tracker.advance_edge(v, w);
    }

    /// Scale the accumulated terms and split out the diagonal. The
    /// mean-loss identity (`(1/n) sum_u f(u,v) = alpha delta^2 T_v /
    /// (2 n sigma^2)`) is asserted as a self-check.
    pub fn finish(self, params: &PrivacyParams) -> PairwiseLossMatrix {
        let n = self.n;
        let unit = params.unit_loss();
        let mut eps = vec![0.0; n * n];
        let mut self_loss = vec![0.0; n];
        for v in 0..n {
            for u in 0..n {
                let value = unit * self.acc[v * n + u];
                if u == v {
                    self_loss[v] = value;
                } else {
                    eps[u * n + v] = value;
                }
            }
        }
        let plm = PairwiseLossMatrix {
            n,
            alpha: params.alpha,
            delta_sens: params.delta_sens,
            sigma2: params.sigma2,
            eps,
            self_loss,
            msg_count: self.msg_count,
            max_term: self.max_term,
        };
        plm.verify_column_identity(1e-9)
            .expect("accountant self-check: mean-loss identity");
        plm
    }
}

/// Exact pairwise losses of a noisy-input gossip run over `sched`.
pub fn pairwise_loss_schedule(sched: &Schedule, params: &PrivacyParams) -> PairwiseLossMatrix {
    let mut acct = Accountant::new(sched.n());
    for t in 0..sched.horizon() {
        match sched.steps()[t] {
            ScheduleStep::Matrix { id } => acct.step_matrix(sched.matrix(id)),
            ScheduleStep::Edge { v, w } => acct.step_edge(v, w),
        }
    }
    acct.finish(params)
}

/// Losses of `horizon` synchronous rounds with a fixed matrix (powers
/// `W^t`). This also bounds the accelerated protocol: each accelerated
/// iterate is a deterministic function of the plain iterates, so observing
/// them is post-processing.
pub fn pairwise_loss_sync(
    w: &GossipMatrix,
    horizon: usize,
    params: &PrivacyParams,
) -> PairwiseLossMatrix {
    pairwise_loss_schedule(&Schedule::constant(w.clone(), horizon), params)
}

/// Loss from `u` to a colluding set `colluders` whose views are pooled.
/// Each observed `(node, step)` message counts once, even when several
/// colluders receive it.
pub fn collusion_loss(
    sched: &Schedule,
    u: usize,
    colluders: &[usize],
    params: &PrivacyParams,
) -> Result<f64> {
    let n = sched.n();
    if colluders.is_empty() {
        return Err(Error::InvalidParameter("colluding set is empty".into()));
    }
    if colluders.contains(&u) {
        return Err(Error::InvalidParameter(format!(
            "target {u} is inside the colluding set"
        )));
    }
    let mut in_set = vec![false; n];
    for &v in colluders {
        in_set[v] = true;
    }
    let mut tracker = ProductTracker::identity(n);
    let mut total = 0.0;
    let mut observed = vec![false; n];
    for t in 0..sched.horizon() {
        let edges = sched.step_edges(t);
        let mut touched = Vec::new();
        for &(a, b) in &edges {
            for (maybe_colluder, source) in [(a, b), (b, a)] {
                if in_set[maybe_colluder] && !observed[source] {
                    observed[source] = true;
                    touched.push(source);
                    let r = tracker.row_norm_sq(source);
                    total += tracker.m[source * n + u].powi(2) / r;
                }
            }
        }
        for s in touched {
            observed[s] = false;
        }
        match sched.steps()[t] {
            ScheduleStep::Matrix { id } => tracker.advance_matrix(sched.matrix(id)),
            ScheduleStep::Edge { v, w } => tracker.advance_edge(v, w),
        }
    }
    Ok(params.unit_loss() * total)
}

/// Loss about a group `group`'s joint data to a single observer `v`:
/// the group's squared sensitivities add within each observed message.
pub fn group_loss(
    sched: &Schedule,
    group: &[usize],
    v: usize,
    params: &PrivacyParams,
) -> Result<f64> {
    let n = sched.n();
    if group.is_empty() {
        return Err(Error::InvalidParameter("group is empty".into()));
    }
    if group.contains(&v) {
        return Err(Error::InvalidParameter(format!(
            "observer {v} is inside the group"
        )));
    }
    let mut tracker = ProductTracker::identity(n);
    let mut total = 0.0;
    for t in 0..sched.horizon() {
        for &(a, b) in &sched.step_edges(t) {
            for (observer, source) in [(a, b), (b, a)] {
                if observer == v {
                    let r = tracker.row_norm_sq(source);
                    let num: f64 = group
                        .iter()
                        .map(|&u| tracker.m[source * n + u].powi(2))
                        .sum();
                    total += num / r;
                }
            }
        }
        match sched.steps()[t] {
            ScheduleStep::Matrix { id } => tracker.advance_matrix(sched.matrix(id)),
            ScheduleStep::Edge { v: a, w: b } => tracker.advance_edge(a, b),
        }
    }
    Ok(params.unit_loss() * total)
}

/// Random-walk upper bound on the synchronous pairwise loss:
/// `(alpha delta^2 n / 2 sigma^2) * max over edges at v of W[v][w]^-2 *
/// sum_{t=1..T} P(X^t = v | X^0 = u)^2` for the walk with transitions `W`.
pub fn random_walk_bound(
    w: &GossipMatrix,
    horizon: usize,
    u: usize,
    v: usize,
    params: &PrivacyParams,
) -> Result<f64> {
    let n = w.n();
    if u == v {
        return Err(Error::InvalidParameter("bound requires u != v".into()));
    }
    let Some(min_weight) = w.min_incident_weight(v) else {
        return Ok(0.0); // isolated observer sees nothing
    };
    let mut p = vec![0.0; n];
    p[u] = 1.0;
    let mut next = vec![0.0; n];
    let mut sq_sum = 0.0;
    for _t in 1..=horizon {
        w.matvec_into(&p, 1, &mut next);
        std::mem::swap(&mut p, &mut next);
        sq_sum += p[v] * p[v];
    }
    Ok(params.unit_loss() * n as f64 * sq_sum / (min_weight * min_weight))
}

/// Random-graph privacy bound for one Erdős–Rényi draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErBound {
    /// Loss when `u` and `v` happen to be neighbors (the local-DP value).
    pub eps_neighbor: f64,
    /// Loss otherwise: `(alpha delta^2 / sigma^2) * T d_v / (n - d_v)`.
    pub eps_far: f64,
    /// Probability of the neighbor case (`q`).
    pub prob_neighbor: f64,
}

/// Closed-form bound on an Erdős–Rényi graph where nodes only know their
/// own neighborhoods. Requires the weak-convexity hypothesis
/// `sigma^2 >= delta^2 alpha (alpha - 1) / 2`.
pub fn er_bound(
    n: usize,
    q: f64,
    degree_v: usize,
    horizon: usize,
    params: &PrivacyParams,
) -> Result<ErBound> {
    let threshold = params.delta_sens * params.delta_sens * params.alpha * (params.alpha - 1.0) / 2.0;
    if params.sigma2 < threshold {
        return Err(Error::SigmaTooSmall {
            sigma2: params.sigma2,
            threshold,
        });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q={q} outside (0,1)")));
    }
    // d_v = n-1 leaves no non-neighbor nodes to dilute into
    if degree_v < 1 || degree_v + 1 >= n {
        return Err(Error::InvalidParameter(format!(
            "degree {degree_v} outside [1, n-2] for n={n}"
        )));
    }
    let unit = params.unit_loss();
    Ok(ErBound {
        eps_neighbor: unit,
        eps_far: 2.0 * unit * horizon as f64 * degree_v as f64 / (n - degree_v) as f64,
        prob_neighbor: q,
    })
}

/// Loss matrix for `outer_steps` optimization rounds, each followed by `k`
/// gossip rounds with the same matrix: additive composition makes this
/// exactly `outer_steps` times the per-round sum over powers `W^0..W^{k-1}`.
pub fn sgd_privacy_loss(
    w: &GossipMatrix,
    outer_steps: usize,
    k: usize,
    params: &PrivacyParams,
) -> PairwiseLossMatrix {
    assert!(k >= 1, "at least one gossip round per step");
    let mut plm = pairwise_loss_sync(w, k, params);
    let factor = outer_steps as f64;
    for x in &mut plm.eps {
        *x *= factor;
    }
    for x in &mut plm.self_loss {
        *x *= factor;
    }
    for c in &mut plm.msg_count {
        *c *= outer_steps as u64;
    }
    plm.verify_column_identity(1e-9)
        .expect("accountant self-check: mean-loss identity");
    plm
}

/// Time-varying variant: one gossip matrix per optimization round, each run
/// for `k` rounds on fresh noise. The losses of the rounds add.
pub fn sgd_privacy_loss_schedule(
    per_round: &[GossipMatrix],
    k: usize,
    params: &PrivacyParams,
) -> PairwiseLossMatrix {
    assert!(k >= 1, "at least one gossip round per step");
    assert!(!per_round.is_empty(), "need at least one round matrix");
    let mut total: Option<PairwiseLossMatrix> = None;
    for w in per_round {
        let part = pairwise_loss_sync(w, k, params);
        total = Some(match total {
            None => part,
            Some(mut acc) => {
                for (a, b) in acc.eps.iter_mut().zip(&part.eps) {
                    *a += b;
                }
                for (a, b) in acc.self_loss.iter_mut().zip(&part.self_loss) {
                    *a += b;
                }
                for (a, b) in acc.msg_count.iter_mut().zip(&part.msg_count) {
                    *a += b;
                }
                acc.max_term = acc.max_term.max(part.max_term);
                acc
            }
        });
    }
    let plm = total.expect("non-empty");
    plm.verify_column_identity(1e-9)
        .expect("accountant self-check: mean-loss identity");
    plm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gossip::EdgeActivation;
    use crate::graph::{self, Graph};

    fn params() -> PrivacyParams {
        PrivacyParams::new(2.0, 1.0, 1.0).unwrap()
    }

    fn path3() -> GossipMatrix {
        GossipMatrix::hamilton(&Graph::new(3, vec![(0, 1), (1, 2)]).unwrap())
    }

    /// Independent oracle: dense products computed from scratch per step.
    fn brute_force(sched: &Schedule, params: &PrivacyParams) -> Vec<f64> {
        let n = sched.n();
        let mut f = vec![0.0; n * n]; // f[u][v]
        for t in 0..sched.horizon() {
            // M_t from scratch
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                m[i * n + i] = 1.0;
            }
            for s in 0..t {
                let step_dense: Vec<f64> = match sched.steps()[s] {
                    ScheduleStep::Matrix { id } => sched.matrix(id).to_dense(),
                    ScheduleStep::Edge { v, w } => {
                        GossipMatrix::pairwise_edge(n, v, w).to_dense()
                    }
                };
                let mut next = vec![0.0; n * n];
                for i in 0..n {
                    for kk in 0..n {
                        let a = step_dense[i * n + kk];
                        if a != 0.0 {
                            for j in 0..n {
                                next[i * n + j] += a * m[kk * n + j];
                            }
                        }
                    }
                }
                m = next;
            }
            for (v, w) in sched.step_edges(t) {
                for (obs, src) in [(v, w), (w, v)] {
                    let r: f64 = (0..n).map(|j| m[src * n + j].powi(2)).sum();
                    for u in 0..n {
                        f[u * n + obs] += m[src * n + u].powi(2) / r;
                    }
                }
            }
        }
        let unit = params.unit_loss();
        f.iter().map(|x| unit * x).collect()
    }

    #[test]
    fn single_round_matches_local_dp_for_neighbors_only() {
        let plm = pairwise_loss_sync(&path3(), 1, &params());
        let unit = params().unit_loss();
        assert!((plm.get(0, 1) - unit).abs() < 1e-15);
        assert!((plm.get(1, 0) - unit).abs() < 1e-15);
        assert_eq!(plm.get(0, 2), 0.0);
        assert_eq!(plm.get(2, 0), 0.0);
        assert_eq!(plm.msg_count, vec![1, 2, 1]);
    }

    #[test]
    fn matches_brute_force_on_mixed_schedule() {
        let g = graph::gen_erdos_renyi(16, 0.3, 7).unwrap();
        let w = GossipMatrix::hamilton(&g);
        let mut sched = Schedule::constant(w, 3);
        sched.push_edge(2, 9);
        sched.push_edge(0, 5);
        sched.push_shared_matrix(0);
        let plm = pairwise_loss_schedule(&sched, &params());
        let oracle = brute_force(&sched, &params());
        for u in 0..16 {
            for v in 0..16 {
                let got = if u == v { plm.self_loss[v] } else { plm.get(u, v) };
                assert!(
                    (got - oracle[u * 16 + v]).abs() < 1e-12,
                    "mismatch at ({u},{v}): {got} vs {}",
                    oracle[u * 16 + v]
                );
            }
        }
    }

    #[test]
    fn column_identity_on_randomized_schedule() {
        let g = graph::gen_erdos_renyi(64, 0.15, 3).unwrap();
        let w = GossipMatrix::hamilton(&g);
        let act = EdgeActivation::uniform_from_renormalized(&w).unwrap();
        let x = vec![0.0; 64];
        let (_, sched) =
            crate::gossip::muffliato_randomized(&x, 1, &act, 300, 1.0, 11).unwrap();
        let plm = pairwise_loss_schedule(&sched, &params());
        plm.verify_column_identity(1e-11).unwrap();
        // and the mean_loss vs closed form relation
        for v in 0..64 {
            assert!(plm.mean_loss(v) <= plm.closed_form_mean(v) + 1e-15);
        }
    }

    #[test]
    fn distance_zero_law_on_ring() {
        let ring = graph::gen_ring(12).unwrap();
        let w = GossipMatrix::hamilton(&ring);
        let horizon = 3;
        let plm = pairwise_loss_sync(&w, horizon, &params());
        let d = |u: usize, v: usize| ring.bfs_distances(u).get(v).unwrap();
        for u in 0..12 {
            for v in 0..12 {
                if u != v && d(u, v) > horizon + 1 {
                    assert_eq!(plm.get(u, v), 0.0, "({u},{v}) at distance {}", d(u, v));
                }
            }
        }
        // some pair inside the light cone leaks
        assert!(plm.get(0, 1) > 0.0);
    }

    #[test]
    fn per_term_cap_and_ldp_ceiling() {
        let g = graph::gen_erdos_renyi(32, 0.2, 5).unwrap();
        let w = GossipMatrix::hamilton(&g).lazy();
        let plm = pairwise_loss_sync(&w, 6, &params());
        assert!(plm.max_term <= 1.0 + 1e-12);
        for v in 0..32 {
            let ceiling = plm.ldp_ceiling(v);
            for u in 0..32 {
                assert!(plm.get(u, v) <= ceiling + 1e-12);
            }
        }
    }

    #[test]
    fn scaling_laws_are_exact() {
        let w = path3().lazy();
        let base = pairwise_loss_sync(&w, 4, &params());
        let double_alpha = pairwise_loss_sync(&w, 4, &PrivacyParams::new(4.0, 1.0, 1.0).unwrap());
        let double_delta = pairwise_loss_sync(&w, 4, &PrivacyParams::new(2.0, 2.0, 1.0).unwrap());
        let double_sigma = pairwise_loss_sync(&w, 4, &PrivacyParams::new(2.0, 1.0, 2.0).unwrap());
        for u in 0..3 {
            for v in 0..3 {
                let b = base.get(u, v);
                assert_eq!(double_alpha.get(u, v), 2.0 * b);
                assert_eq!(double_delta.get(u, v), 4.0 * b);
                assert_eq!(double_sigma.get(u, v), 0.5 * b);
            }
        }
    }

    #[test]
    fn random_walk_bound_k4_single_step() {
        let w = GossipMatrix::hamilton(&graph::gen_complete(4).unwrap());
        let p = params();
        let bound = random_walk_bound(&w, 1, 0, 1, &p).unwrap();
        // unit * n * (1/3)^2 / (1/3)^2 = unit * 4 = 2 alpha / sigma^2 for delta=1
        assert!((bound - 2.0 * p.alpha / p.sigma2).abs() < 1e-12);
    }

    #[test]
    fn random_walk_bound_dominates_exact_on_path3() {
        let w = path3();
        let p = params();
        let horizon = 3;
        let plm = pairwise_loss_sync(&w, horizon, &p);
        for u in 0..3 {
            for v in 0..3 {
                if u == v {
                    continue;
                }
                let bound = random_walk_bound(&w, horizon, u, v, &p).unwrap();
                assert!(
                    bound + 1e-12 >= plm.get(u, v),
                    "({u},{v}): bound {bound} < exact {}",
                    plm.get(u, v)
                );
            }
        }
    }

    #[test]
    fn random_walk_bound_outside_light_cone_is_zero() {
        let ring = graph::gen_ring(12).unwrap();
        let w = GossipMatrix::hamilton(&ring);
        let bound = random_walk_bound(&w, 2, 0, 6, &params()).unwrap();
        assert_eq!(bound, 0.0);
    }

    #[test]
    fn collusion_reduces_to_pairwise_for_singleton() {
        let g = graph::gen_erdos_renyi(12, 0.4, 9).unwrap();
        let w = GossipMatrix::hamilton(&g);
        let sched = Schedule::constant(w, 3);
        let plm = pairwise_loss_schedule(&sched, &params());
        for u in 0..12 {
            for v in 0..12 {
                if u == v {
                    continue;
                }
                let c = collusion_loss(&sched, u, &[v], &params()).unwrap();
                assert!((c - plm.get(u, v)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collusion_counts_shared_observations_once() {
        // path 0-1-2, colluders {0,2}, target 1, one step: both colluders
        // see the same message x^0_1, so the pooled view holds one unit.
        let sched = Schedule::constant(path3(), 1);
        let c = collusion_loss(&sched, 1, &[0, 2], &params()).unwrap();
        assert!((c - params().unit_loss()).abs() < 1e-15);
    }

    #[test]
    fn collusion_is_monotone_in_the_set() {
        let g = graph::gen_erdos_renyi(10, 0.4, 2).unwrap();
        let w = GossipMatrix::hamilton(&g);
        let sched = Schedule::constant(w, 4);
        let p = params();
        let small = collusion_loss(&sched, 0, &[1, 2], &p).unwrap();
        let large = collusion_loss(&sched, 0, &[1, 2, 3], &p).unwrap();
        assert!(large + 1e-15 >= small);
    }

    #[test]
    fn collusion_rejects_target_in_set() {
        let sched = Schedule::constant(path3(), 1);
        assert!(collusion_loss(&sched, 1, &[1, 2], &params()).is_err());
        assert!(collusion_loss(&sched, 1, &[], &params()).is_err());
    }

    #[test]
    fn group_reduces_to_pairwise_and_adds_exactly() {
        let g = graph::gen_erdos_renyi(32, 0.15, 13).unwrap();
        let w = GossipMatrix::hamilton(&g);
        let sched = Schedule::constant(w, 4);
        let p = params();
        let plm = pairwise_loss_schedule(&sched, &p);
        let single = group_loss(&sched, &[3], 7, &p).unwrap();
        assert!((single - plm.get(3, 7)).abs() < 1e-12);

        let group: Vec<usize> = (0..32).filter(|&u| u != 7).collect();
        let joint = group_loss(&sched, &group, 7, &p).unwrap();
        let sum: f64 = group.iter().map(|&u| plm.get(u, 7)).sum();
        assert!((joint - sum).abs() < 1e-9 * sum.max(1.0), "{joint} vs {sum}");
    }

    #[test]
    fn group_rejects_observer_in_group() {
        let sched = Schedule::constant(path3(), 1);
        assert!(group_loss(&sched, &[0, 1], 1, &params()).is_err());
        assert!(group_loss(&sched, &[], 1, &params()).is_err());
    }

    #[test]
    fn er_bound_gate_and_values() {
        // alpha=2, delta=1: threshold sigma^2 = 1; boundary accepted
        let p = PrivacyParams::new(2.0, 1.0, 1.0).unwrap();
        let b = er_bound(100, 0.1, 5, 10, &p).unwrap();
        assert!((b.eps_neighbor - p.unit_loss()).abs() < 1e-15);
        assert!((b.eps_far - 2.0 * p.unit_loss() * 10.0 * 5.0 / 95.0).abs() < 1e-15);
        assert_eq!(b.prob_neighbor, 0.1);

        let low = PrivacyParams::new(2.0, 1.0, 0.9).unwrap();
        assert!(matches!(
            er_bound(100, 0.1, 5, 10, &low),
            Err(Error::SigmaTooSmall { .. })
        ));
        // degree boundary: d_v = n-1 rejected
        assert!(matches!(
            er_bound(100, 0.1, 99, 10, &p),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn sgd_single_step_reduces_to_sync_and_is_linear_in_steps() {
        let w = path3().lazy();
        let p = params();
        let k = 4;
        let one = sgd_privacy_loss(&w, 1, k, &p);
        let sync = pairwise_loss_sync(&w, k, &p);
        assert_eq!(one.eps, sync.eps);
        let five = sgd_privacy_loss(&w, 5, k, &p);
        for (a, b) in five.eps.iter().zip(&one.eps) {
            assert!((a - 5.0 * b).abs() < 1e-14);
        }
        assert_eq!(five.msg_count[1], 5 * one.msg_count[1]);
    }

    #[test]
    fn sgd_schedule_variant_sums_per_round_matrices() {
        let ws: Vec<GossipMatrix> = (0..3)
            .map(|s| GossipMatrix::hamilton(&graph::gen_erdos_renyi(12, 0.4, 100 + s).unwrap()))
            .collect();
        let p = params();
        let total = sgd_privacy_loss_schedule(&ws, 3, &p);
        let parts: Vec<_> = ws.iter().map(|w| pairwise_loss_sync(w, 3, &p)).collect();
        for u in 0..12 {
            for v in 0..12 {
                let sum: f64 = parts.iter().map(|pt| pt.get(u, v)).sum();
                assert!((total.get(u, v) - sum).abs() < 1e-12);
            }
        }
    }
}
