//! Pairwise privacy accounting for gossip protocols.
//!
//! The accountant tracks, for every ordered pair `(u, v)`, how much the
//! messages observed by `v` reveal about `u`'s input under Gaussian input
//! noise, measured as an order-`alpha` Rényi divergence bound. The exact
//! per-schedule accountant lives in [`accountant`]; this module holds the
//! shared types, the closed forms, and exports.

mod accountant;

pub use accountant::{
    collusion_loss, er_bound, group_loss, pairwise_loss_schedule, pairwise_loss_sync,
    random_walk_bound, sgd_privacy_loss, sgd_privacy_loss_schedule, Accountant, ErBound,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_io::{atomic_write, format_full};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Gaussian-mechanism parameters plus the Rényi order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    /// Rényi order, > 1.
    pub alpha: f64,
    /// Input sensitivity, > 0.
    pub delta_sens: f64,
    /// Noise variance, > 0.
    pub sigma2: f64,
}

impl PrivacyParams {
    pub fn new(alpha: f64, delta_sens: f64, sigma2: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 1, got {alpha}")));
        }
        if !(delta_sens > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sensitivity must be > 0, got {delta_sens}"
            )));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be > 0, got {sigma2}"
            )));
        }
        Ok(Self {
            alpha,
            delta_sens,
            sigma2,
        })
    }

    /// Loss of one directly observed noisy value:
    /// `alpha * delta^2 / (2 sigma^2)`. This is both the per-message cap and
    /// the local-DP baseline per release.
    pub fn unit_loss(&self) -> f64 {
        gaussian_renyi_divergence(self.delta_sens, self.sigma2, self.alpha)
    }
}

/// Order-`alpha` Rényi divergence between `N(0, sigma2)` and
/// `N(shift, sigma2)`: `alpha * shift^2 / (2 sigma2)`.
pub fn gaussian_renyi_divergence(shift: f64, sigma2: f64, alpha: f64) -> f64 {
    assert!(sigma2 > 0.0, "sigma2 must be positive");
    assert!(alpha > 1.0, "alpha must exceed 1");
    alpha * shift * shift / (2.0 * sigma2)
}

/// An `(alpha, eps)`-Rényi guarantee implies
/// `(eps + ln(1/delta)/(alpha-1), delta)`-DP for any `0 < delta < 1`.
pub fn rdp_to_dp(alpha: f64, eps: f64, delta: f64) -> f64 {
    assert!(alpha > 1.0, "alpha must exceed 1");
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
    eps + (1.0 / delta).ln() / (alpha - 1.0)
}

/// Mean loss toward `v` from its communication count:
/// `alpha * delta^2 * T_v / (2 n sigma^2)`.
pub fn closed_form_mean(msg_count: u64, n: usize, params: &PrivacyParams) -> f64 {
    params.alpha * params.delta_sens * params.delta_sens * msg_count as f64
        / (2.0 * n as f64 * params.sigma2)
}

/// Exact per-pair privacy losses of one accounted run.
///
/// `eps[u][v]` bounds what `v`'s view reveals about `u`'s input; the
/// diagonal is reported as 0 (a node holding its own data is not a leak) and
/// the formula value for `u = v` is kept separately in `self_loss` so the
/// mean-loss identity stays checkable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PlmJson", into = "PlmJson")]
pub struct PairwiseLossMatrix {
    pub n: usize,
    pub alpha: f64,
    pub delta_sens: f64,
    pub sigma2: f64,
    /// Row-major `n x n`; entry `[u * n + v]` is the loss from `u` to `v`.
    pub eps: Vec<f64>,
    /// Formula value at `u = v`, excluded from `eps`.
    pub self_loss: Vec<f64>,
    /// Per-node communication counts `T_v` (observation side).
    pub msg_count: Vec<u64>,
    /// Largest single normalized summand encountered (the per-term cap says
    /// this never exceeds 1).
    pub max_term: f64,
}

/// Serialized shape: the loss matrix goes out as nested rows.
#[derive(Serialize, Deserialize)]
struct PlmJson {
    n: usize,
    alpha: f64,
    delta: f64,
    sigma2: f64,
    eps: Vec<Vec<f64>>,
    self_loss: Vec<f64>,
    msg_count: Vec<u64>,
    max_term: f64,
}

impl From<PairwiseLossMatrix> for PlmJson {
    fn from(p: PairwiseLossMatrix) -> Self {
        let eps = p.eps.chunks(p.n).map(<[f64]>::to_vec).collect();
        PlmJson {
            n: p.n,
            alpha: p.alpha,
            delta: p.delta_sens,
            sigma2: p.sigma2,
            eps,
            self_loss: p.self_loss,
            msg_count: p.msg_count,
            max_term: p.max_term,
        }
    }
}

impl From<PlmJson> for PairwiseLossMatrix {
    fn from(j: PlmJson) -> Self {
        PairwiseLossMatrix {
            n: j.n,
            alpha: j.alpha,
            delta_sens: j.delta,
            sigma2: j.sigma2,
            eps: j.eps.concat(),
            self_loss: j.self_loss,
            msg_count: j.msg_count,
            max_term: j.max_term,
        }
    }
}

impl PairwiseLossMatrix {
    pub fn params(&self) -> PrivacyParams {
        PrivacyParams {
            alpha: self.alpha,
            delta_sens: self.delta_sens,
            sigma2: self.sigma2,
        }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.eps[u * self.n + v]
    }

    /// `(1/n) * sum over u != v of eps[u][v]`.
    pub fn mean_loss(&self, v: usize) -> f64 {
        let sum: f64 = (0..self.n).map(|u| self.get(u, v)).sum();
        sum / self.n as f64
    }

    /// Column mean including the self term; equals the closed form exactly.
    pub fn mean_loss_with_self(&self, v: usize) -> f64 {
        (self.self_loss[v] + (0..self.n).map(|u| self.get(u, v)).sum::<f64>()) / self.n as f64
    }

    /// The closed-form mean toward `v` from its message count.
    pub fn closed_form_mean(&self, v: usize) -> f64 {
        closed_form_mean(self.msg_count[v], self.n, &self.params())
    }

    /// Check the mean-loss identity for every column:
    /// `(1/n) * sum_u f(u,v) == alpha delta^2 T_v / (2 n sigma^2)`.
    pub fn verify_column_identity(&self, rel_tol: f64) -> Result<()> {
        for v in 0..self.n {
            let lhs = self.mean_loss_with_self(v);
            let rhs = self.closed_form_mean(v);
            let scale = rhs.abs().max(f64::MIN_POSITIVE);
            if (lhs - rhs).abs() > rel_tol * scale {
                return Err(Error::InvalidParameter(format!(
                    "column identity violated at v={v}: {lhs} vs {rhs}"
                )));
            }
        }
        Ok(())
    }

    /// Local-DP composition ceiling toward `v`: unit loss times the number
    /// of messages `v` observed.
    pub fn ldp_ceiling(&self, v: usize) -> f64 {
        self.params().unit_loss() * self.msg_count[v] as f64
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut max = 0.0f64;
        for u in 0..self.n {
            for v in 0..self.n {
                if u != v {
                    max = max.max(self.get(u, v));
                }
            }
        }
        max
    }

    /// Coefficient of variation (std/mean) of the off-diagonal entries.
    pub fn off_diagonal_cv(&self) -> f64 {
        let mut vals = Vec::with_capacity(self.n * (self.n - 1));
        for u in 0..self.n {
            for v in 0..self.n {
                if u != v {
                    vals.push(self.get(u, v));
                }
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / vals.len() as f64;
        var.sqrt() / mean
    }

    /// Join losses with hop distances: one `(distance, min, mean, max)` row
    /// per distance class over ordered pairs `u != v`.
    pub fn by_distance(&self, graph: &Graph) -> Vec<DistanceRow> {
        assert_eq!(graph.n(), self.n);
        let mut acc: std::collections::BTreeMap<usize, (f64, f64, f64, usize)> =
            std::collections::BTreeMap::new();
        for u in 0..self.n {
            let dist = graph.bfs_distances(u);
            for v in 0..self.n {
                if u == v {
                    continue;
                }
                let Some(d) = dist.get(v) else { continue };
                let x = self.get(u, v);
                let e = acc
                    .entry(d)
                    .or_insert((f64::INFINITY, f64::NEG_INFINITY, 0.0, 0));
                e.0 = e.0.min(x);
                e.1 = e.1.max(x);
                e.2 += x;
                e.3 += 1;
            }
        }
        acc.into_iter()
            .map(|(distance, (min, max, sum, count))| DistanceRow {
                distance,
                min,
                mean: sum / count as f64,
                max,
                pairs: count,
            })
            .collect()
    }

    /// CSV of the loss matrix: row `u`, column `v`, full precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for u in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|v| format_full(self.get(u, v))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        atomic_write(path, out.as_bytes())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        atomic_write(path, &serde_json::to_vec(self)?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// One row of the distance/loss aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub distance: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub pairs: usize,
}

/// Simpson quadrature of the Rényi integral between `N(0, sigma2)` and
/// `N(shift, sigma2)`, independent of the closed form it cross-checks.
pub fn renyi_divergence_quadrature(shift: f64, sigma2: f64, alpha: f64) -> f64 {
    let sd = sigma2.sqrt();
    let density = |mean: f64, z: f64| {
        (-((z - mean) * (z - mean)) / (2.0 * sigma2)).exp()
            / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    // the alpha-tilted integrand peaks near (1 - alpha) * shift
    let center = (1.0 - alpha) * shift;
    let lo = center.min(0.0) - 20.0 * sd;
    let hi = center.max(shift) + 20.0 * sd;
    let steps = 400_001usize; // odd count for Simpson
    let h = (hi - lo) / (steps - 1) as f64;
    let f = |z: f64| density(0.0, z).powf(alpha) * density(shift, z).powf(1.0 - alpha);
    let mut integral = f(lo) + f(hi);
    for i in 1..steps - 1 {
        let z = lo + i as f64 * h;
        integral += f(z) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    integral *= h / 3.0;
    integral.ln() / (alpha - 1.0)
}
