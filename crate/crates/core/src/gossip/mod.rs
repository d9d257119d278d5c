//! Gossip matrices, spectral quantities, and noisy averaging protocols.

mod activation;
mod averaging;
mod schedule;

pub use activation::EdgeActivation;
pub use averaging::{
    chebyshev_mix, muffliato_randomized, muffliato_sync, run_schedule, t_stop_randomized,
    t_stop_sync, AveragingRun,
};
pub use schedule::{dropout_schedule, dropout_step_matrix, Schedule, ScheduleStep};

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Row-sum / symmetry tolerance for gossip-matrix validation.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// An eigenvalue this close to 1 counts as a unit (Perron) eigenvalue.
pub const PERRON_TOL: f64 = 1e-9;
/// Computed gaps below this are eigensolver noise around a true zero
/// (bipartite supports put an eigenvalue at exactly -1) and are snapped to
/// 0 so zero-gap guards fire instead of producing absurd stopping times.
pub const GAP_SNAP_TOL: f64 = 1e-10;

/// Symmetric stochastic matrix supported on a graph's edges plus the
/// diagonal. Stored sparse by row; rows hold `(column, value)` pairs sorted
/// by column. The spectral gap is computed on first use and cached.
#[derive(Debug, Clone)]
pub struct GossipMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    gap: OnceLock<Result<f64>>,
}

impl PartialEq for GossipMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.rows == other.rows
    }
}

impl GossipMatrix {
    /// Build from sparse rows, validating symmetry, stochasticity and
    /// non-negativity.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        let mut m = Self {
            n,
            rows,
            gap: OnceLock::new(),
        };
        for row in &mut m.rows {
            row.retain(|&(_, x)| x != 0.0);
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        m.validate()?;
        Ok(m)
    }

    /// Build from a dense row-major matrix (mostly useful in tests).
    pub fn from_dense(n: usize, data: &[f64]) -> Result<Self> {
        assert_eq!(data.len(), n * n);
        let rows = (0..n)
            .map(|v| {
                (0..n)
                    .filter(|&w| data[v * n + w] != 0.0)
                    .map(|w| (w, data[v * n + w]))
                    .collect()
            })
            .collect();
        Self::from_rows(n, rows)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            rows: (0..n).map(|v| vec![(v, 1.0)]).collect(),
            gap: OnceLock::new(),
        }
    }

    /// Local-averaging matrix for one edge: both endpoints move to the
    /// midpoint, all other nodes keep their value.
    pub fn pairwise_edge(n: usize, v: usize, w: usize) -> Self {
        assert!(v != w && v < n && w < n);
        let rows = (0..n)
            .map(|r| {
                if r == v || r == w {
                    vec![(v.min(w), 0.5), (v.max(w), 0.5)]
                } else {
                    vec![(r, 1.0)]
                }
            })
            .collect();
        Self {
            n,
            rows,
            gap: OnceLock::new(),
        }
    }

    /// Classic degree-based gossip weights: `W[v][w] = min(1/d_v, 1/d_w)`
    /// on edges, with the diagonal absorbing the remainder.
    ///
    /// Works on disconnected graphs too (isolated nodes get identity rows),
    /// which the dropout schedules rely on.
    pub fn hamilton(graph: &Graph) -> Self {
        let n = graph.n();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for v in 0..n {
            let dv = graph.degree(v) as f64;
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(graph.degree(v) + 1);
            let mut off = 0.0;
            for &w in graph.neighbors(v) {
                let x = (1.0 / dv).min(1.0 / graph.degree(w) as f64);
                off += x;
                row.push((w, x));
            }
            // fp guard: the off-diagonal mass can round a hair above 1
            let diag = (1.0 - off).max(0.0);
            if diag > 0.0 {
                row.push((v, diag));
            }
            row.sort_unstable_by_key(|&(c, _)| c);
            rows.push(row);
        }
        Self {
            n,
            rows,
            gap: OnceLock::new(),
        }
    }

    /// `(I + W)/2`. Shifts the spectrum into `[0, 1]`, guaranteeing a
    /// positive spectral gap on connected supports (bipartite graphs give
    /// the plain matrix an eigenvalue of -1).
    pub fn lazy(&self) -> Self {
        let rows = (0..self.n)
            .map(|v| {
                let mut row: Vec<(usize, f64)> =
                    self.rows[v].iter().map(|&(c, x)| (c, 0.5 * x)).collect();
                match row.binary_search_by_key(&v, |&(c, _)| c) {
                    Ok(i) => row[i].1 += 0.5,
                    Err(i) => row.insert(i, (v, 0.5)),
                }
                row
            })
            .collect();
        Self {
            n: self.n,
            rows,
            gap: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sparse row of `v`: `(column, value)` sorted by column.
    pub fn row(&self, v: usize) -> &[(usize, f64)] {
        &self.rows[v]
    }

    pub fn entry(&self, v: usize, w: usize) -> f64 {
        self.rows[v]
            .binary_search_by_key(&w, |&(c, _)| c)
            .map(|i| self.rows[v][i].1)
            .unwrap_or(0.0)
    }

    /// True when row `v` is exactly the identity row (node holds its value).
    pub fn is_identity_row(&self, v: usize) -> bool {
        self.rows[v].len() == 1 && self.rows[v][0] == (v, 1.0)
    }

    /// Off-diagonal support as `(u, w)` pairs with `u < w`.
    pub fn support_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for v in 0..self.n {
            for &(w, _) in &self.rows[v] {
                if v < w {
                    edges.push((v, w));
                }
            }
        }
        edges
    }

    /// Smallest off-diagonal entry among edges incident to `v`.
    pub fn min_incident_weight(&self, v: usize) -> Option<f64> {
        self.rows[v]
            .iter()
            .filter(|&&(w, _)| w != v)
            .map(|&(_, x)| x)
            .fold(None, |acc, x| Some(acc.map_or(x, |a: f64| a.min(x))))
    }

    /// `out[v] = sum_w W[v][w] * x[w]` for node-major `dim`-vectors.
    pub fn matvec_into(&self, x: &[f64], dim: usize, out: &mut [f64]) {
        assert_eq!(x.len(), self.n * dim);
        assert_eq!(out.len(), self.n * dim);
        for v in 0..self.n {
            let dst = &mut out[v * dim..(v + 1) * dim];
            dst.fill(0.0);
            for &(w, coef) in &self.rows[v] {
                let src = &x[w * dim..(w + 1) * dim];
                for d in 0..dim {
                    dst[d] += coef * src[d];
                }
            }
        }
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for v in 0..self.n {
            for &(w, x) in &self.rows[v] {
                out[v * self.n + w] = x;
            }
        }
        out
    }

    /// Check the gossip-matrix invariants (symmetry, row-stochasticity,
    /// non-negativity) to [`STOCHASTIC_TOL`].
    pub fn validate(&self) -> Result<()> {
        for v in 0..self.n {
            let mut sum = 0.0;
            for &(w, x) in &self.rows[v] {
                if w >= self.n {
                    return Err(Error::InvalidParameter(format!("column {w} out of range")));
                }
                if x < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "negative entry W[{v}][{w}] = {x}"
                    )));
                }
                sum += x;
                if (self.entry(w, v) - x).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "asymmetric: W[{v}][{w}]={x} vs W[{w}][{v}]={}",
                        self.entry(w, v)
                    )));
                }
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidParameter(format!(
                    "row {v} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    /// Check that the off-diagonal support lies within the graph's edges.
    pub fn validate_support(&self, graph: &Graph) -> Result<()> {
        for v in 0..self.n {
            for &(w, x) in &self.rows[v] {
                if v != w && x > 0.0 && !graph.has_edge(v, w) {
                    return Err(Error::InvalidParameter(format!(
                        "support outside graph: W[{v}][{w}] = {x}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Spectral gap `min over non-unit eigenvalues of 1 - |lambda|`,
    /// clamped to `[0, 1]`. Cached after the first call.
    ///
    /// Exactly one eigenvalue (the Perron eigenvalue, which must lie within
    /// [`PERRON_TOL`] of 1) is excluded. A second eigenvalue above
    /// `1 - PERRON_TOL` signals a disconnected support and yields
    /// [`Error::MultiplePerronEigenvalues`].
    pub fn spectral_gap(&self) -> Result<f64> {
        self.gap
            .get_or_init(|| {
                if self.n == 1 {
                    return Ok(1.0);
                }
                let mut eigs = symmetric_eigenvalues(self.n, &self.to_dense());
                eigs.sort_by(|a, b| b.total_cmp(a));
                let top = eigs[0];
                if (top - 1.0).abs() > PERRON_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "largest eigenvalue {top} is not 1; matrix is not a valid gossip matrix"
                    )));
                }
                let second = eigs[1];
                if second > 1.0 - PERRON_TOL {
                    return Err(Error::MultiplePerronEigenvalues {
                        second,
                        tol: PERRON_TOL,
                    });
                }
                let gap = eigs[1..]
                    .iter()
                    .map(|&l| 1.0 - l.abs())
                    .fold(f64::INFINITY, f64::min);
                let gap = gap.clamp(0.0, 1.0);
                Ok(if gap < GAP_SNAP_TOL { 0.0 } else { gap })
            })
            .clone()
    }
}

/// Eigenvalues of a symmetric dense row-major matrix.
pub(crate) fn symmetric_eigenvalues(n: usize, data: &[f64]) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, data);
    m.symmetric_eigenvalues().iter().copied().collect()
}

/// Scale parameter for the accelerated three-term gossip recursion,
/// `2 * (1 - sqrt(lambda (1 - lambda/4))) / (1 - lambda/2)^2`.
///
/// Requires a positive spectral gap; for bipartite supports take
/// [`GossipMatrix::lazy`] first.
pub fn chebyshev_gamma(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "chebyshev scale needs spectral gap in (0,1], got {lambda}; for a zero gap use lazy()"
        )));
    }
    Ok(2.0 * (1.0 - (lambda * (1.0 - lambda / 4.0)).sqrt()) / (1.0 - lambda / 2.0).powi(2))
}
