//! Communication graphs: construction, loading and shortest-path analysis.
//!
//! All simulation and accounting run on an undirected simple [`Graph`].
//! Graphs are immutable after construction and safe to share across
//! concurrent simulations.

mod generate;
mod io;

pub use generate::{
    gen_complete, gen_erdos_renyi, gen_geometric, gen_grid, gen_hypercube, gen_ring, gen_torus,
    geometric_from_positions, sample_er_edges, sample_unit_square, MAX_SAMPLING_ATTEMPTS,
};
pub use io::{from_edge_list, parse_edge_list, read_edge_list_file, write_edge_list_file, GraphJson};

use crate::error::{Error, Result};

/// Undirected simple graph over nodes `0..n`.
///
/// Invariants enforced at construction: no self-loops, no duplicate edges,
/// symmetric adjacency, `degree(v) == adjacency[v].len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    positions: Option<Vec<(f64, f64)>>,
}

impl Graph {
    /// Build a graph from deduplicated, validated edges.
    ///
    /// Self-loops and out-of-range endpoints are rejected. Duplicate edges
    /// (in either orientation) are rejected; use [`from_edge_list`] for
    /// forgiving ingestion of raw pair lists.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph must have n >= 1".into()));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (u, w) in edges {
            if u == w {
                return Err(Error::InvalidParameter(format!("self-loop at node {u}")));
            }
            if u >= n || w >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u},{w}) out of range for n={n}"
                )));
            }
            norm.push((u.min(w), u.max(w)));
        }
        norm.sort_unstable();
        if norm.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::InvalidParameter("duplicate edge".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, w) in &norm {
            adjacency[u].push(w);
            adjacency[w].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            n,
            edges: norm,
            adjacency,
            positions: None,
        })
    }

    pub(crate) fn with_positions(mut self, positions: Vec<(f64, f64)>) -> Self {
        debug_assert_eq!(positions.len(), self.n);
        self.positions = Some(positions);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(u, w)` pairs with `u < w`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, w: usize) -> bool {
        self.adjacency[u].binary_search(&w).is_ok()
    }

    /// 2-D positions in the unit square, present for geometric graphs.
    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    /// True iff BFS from node 0 reaches all `n` nodes.
    pub fn is_connected(&self) -> bool {
        self.bfs_distances(0).dist.iter().all(|d| d.is_some())
    }

    /// Exact hop distances from `source` (`None` marks unreachable nodes).
    ///
    /// # Panics
    /// Panics if `source >= n`.
    pub fn bfs_distances(&self, source: usize) -> DistanceTable {
        assert!(source < self.n, "source {source} out of range");
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &w in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        DistanceTable { source, dist }
    }

    /// Connected components as sorted node lists, ordered by
    /// (size descending, smallest contained node id ascending).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        // largest first; ties broken by smallest contained original id
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }
}

/// Hop distances from one source node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    pub source: usize,
    /// `dist[v]` is the hop count, `None` when unreachable.
    pub dist: Vec<Option<usize>>,
}

impl DistanceTable {
    pub fn get(&self, v: usize) -> Option<usize> {
        self.dist[v]
    }
}
