//! Standard topology generators.
//!
//! Random generators (Erdős–Rényi, geometric) resample with a derived seed
//! when the draw is disconnected, up to [`MAX_SAMPLING_ATTEMPTS`], then fail
//! with [`Error::DisconnectedAfterRetries`].

use rand::Rng;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Resampling budget for random graph generators.
pub const MAX_SAMPLING_ATTEMPTS: usize = 100;

/// Hypercube on `2^log2_n` nodes: nodes are bit labels, edges flip one bit.
pub fn gen_hypercube(log2_n: u32) -> Result<Graph> {
    if log2_n == 0 {
        return Err(Error::InvalidParameter("hypercube needs log2_n >= 1".into()));
    }
    let n = 1usize << log2_n;
    let mut edges = Vec::with_capacity(n * log2_n as usize / 2);
    for u in 0..n {
        for bit in 0..log2_n {
            let w = u ^ (1 << bit);
            if u < w {
                edges.push((u, w));
            }
        }
    }
    Graph::new(n, edges)
}

/// One G(n, q) draw: each of the n(n-1)/2 edges kept independently.
///
/// Uses geometric skipping over the flattened pair index, so the cost is
/// proportional to the number of edges produced rather than to n^2.
pub fn sample_er_edges(n: usize, q: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    if n < 2 || q <= 0.0 {
        return Vec::new();
    }
    let total = n as u64 * (n as u64 - 1) / 2;
    if q >= 1.0 {
        return (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |w| (u, w)))
            .collect();
    }
    let log1q = (1.0 - q).ln();
    let mut edges = Vec::with_capacity((q * total as f64 * 1.1) as usize + 8);
    let mut cursor: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>(); // in (0, 1]
        let skip = (u.ln() / log1q).floor();
        if !skip.is_finite() || cursor as f64 + skip >= total as f64 {
            break;
        }
        cursor += skip as u64;
        edges.push(pair_from_index(n, cursor));
        cursor += 1;
        if cursor >= total {
            break;
        }
    }
    edges
}

/// Inverse of the row-major enumeration (0,1), (0,2), ..., (1,2), ... of
/// unordered pairs.
fn pair_from_index(n: usize, k: u64) -> (usize, usize) {
    let offset = |u: u64| u * (n as u64 - 1) - u * u.saturating_sub(1) / 2;
    // float guess, then fix up
    let nf = n as f64;
    let mut u = (nf - 0.5 - ((nf - 0.5) * (nf - 0.5) - 2.0 * k as f64).max(0.0).sqrt())
        .floor()
        .max(0.0) as u64;
    while u + 1 < n as u64 && offset(u + 1) <= k {
        u += 1;
    }
    while u > 0 && offset(u) > k {
        u -= 1;
    }
    let w = u + 1 + (k - offset(u));
    (u as usize, w as usize)
}

/// Connected Erdős–Rényi graph G(n, q), resampling on disconnection.
pub fn gen_erdos_renyi(n: usize, q: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter("erdos-renyi needs n >= 2".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("q={q} outside [0,1]")));
    }
    for attempt in 0..MAX_SAMPLING_ATTEMPTS {
        let mut rng = rng::substream(seed, stream::GRAPH_GEN, attempt as u64);
        let g = Graph::new(n, sample_er_edges(n, q, &mut rng))?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::DisconnectedAfterRetries {
        attempts: MAX_SAMPLING_ATTEMPTS,
    })
}

/// Cycle on `n >= 3` nodes.
pub fn gen_ring(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter("ring needs n >= 3".into()));
    }
    let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|v| (v, v + 1)).collect();
    if n > 2 {
        edges.push((0, n - 1));
    }
    Graph::new(n, edges)
}

/// Complete graph on `n >= 1` nodes.
pub fn gen_complete(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("complete graph needs n >= 1".into()));
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for w in (u + 1)..n {
            edges.push((u, w));
        }
    }
    Graph::new(n, edges)
}

/// Non-wrapping grid with `rows * cols` nodes in row-major order.
pub fn gen_grid(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("grid dimensions must be >= 1".into()));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Graph::new(rows * cols, edges)
}

/// Torus wrapping every dimension; `dims` lists the side lengths.
pub fn gen_torus(dims: &[usize]) -> Result<Graph> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidParameter(
            "torus dimensions must be non-empty and >= 1".into(),
        ));
    }
    let n: usize = dims.iter().product();
    let strides: Vec<usize> = dims
        .iter()
        .scan(1usize, |acc, &d| {
            let s = *acc;
            *acc *= d;
            Some(s)
        })
        .collect();
    let mut edges = std::collections::BTreeSet::new();
    for u in 0..n {
        for (axis, &side) in dims.iter().enumerate() {
            if side < 2 {
                continue;
            }
            let coord = (u / strides[axis]) % side;
            let next = (coord + 1) % side;
            let w = u - coord * strides[axis] + next * strides[axis];
            if u != w {
                edges.insert((u.min(w), u.max(w)));
            }
        }
    }
    Graph::new(n, edges.into_iter().collect())
}

/// `n` points uniform in the unit square.
pub fn sample_unit_square(n: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect()
}

/// Geometric graph on given positions: edge iff Euclidean distance < radius
/// (strict inequality).
pub fn geometric_from_positions(positions: &[(f64, f64)], radius: f64) -> Result<Graph> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::EmptyInput("no positions".into()));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for w in (u + 1)..n {
            let dx = positions[u].0 - positions[w].0;
            let dy = positions[u].1 - positions[w].1;
            if (dx * dx + dy * dy).sqrt() < radius {
                edges.push((u, w));
            }
        }
    }
    Ok(Graph::new(n, edges)?.with_positions(positions.to_vec()))
}

/// Random geometric graph in the unit square, resampling on disconnection.
/// Positions are retained on the returned graph.
pub fn gen_geometric(n: usize, radius: f64, seed: u64) -> Result<Graph> {
    let diag = std::f64::consts::SQRT_2;
    if !(radius > 0.0 && radius <= diag) {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} outside (0, sqrt(2)]"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("geometric graph needs n >= 1".into()));
    }
    for attempt in 0..MAX_SAMPLING_ATTEMPTS {
        let mut rng = rng::substream(seed, stream::GRAPH_GEN, attempt as u64);
        let positions = sample_unit_square(n, &mut rng);
        let g = geometric_from_positions(&positions, radius)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::DisconnectedAfterRetries {
        attempts: MAX_SAMPLING_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn smallest_hypercube() {
        let g = gen_hypercube(1).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn hypercube_counts_and_regularity() {
        let g = gen_hypercube(3).unwrap();
        assert_eq!(g.n(), 8);
        assert_eq!(g.num_edges(), 12);
        assert!((0..8).all(|v| g.degree(v) == 3));
        assert!(g.is_connected());
        // distance equals Hamming distance of labels
        let d = g.bfs_distances(0);
        for v in 0..8 {
            assert_eq!(d.get(v), Some(v.count_ones() as usize));
        }
        assert_eq!(d.get(7), Some(3));
    }

    #[test]
    fn hypercube_paper_scale() {
        let g = gen_hypercube(11).unwrap();
        assert_eq!(g.n(), 2048);
        assert_eq!(g.num_edges(), 2048 * 11 / 2);
    }

    #[test]
    fn er_q_one_is_complete() {
        let g = gen_erdos_renyi(6, 1.0, 3).unwrap();
        let k6 = gen_complete(6).unwrap();
        assert_eq!(g.edges(), k6.edges());
    }

    #[test]
    fn er_q_zero_fails_after_retries() {
        assert_eq!(
            gen_erdos_renyi(4, 0.0, 1),
            Err(Error::DisconnectedAfterRetries {
                attempts: MAX_SAMPLING_ATTEMPTS
            })
        );
    }

    #[test]
    fn er_above_connectivity_threshold_connects_first_try() {
        // q = 2 ln(n)/n: first draw should be connected for >= 95% of seeds.
        let n = 2048;
        let q = 2.0 * (n as f64).ln() / n as f64;
        let mut connected = 0;
        for seed in 0..100u64 {
            let mut r = rng::substream(seed, rng::stream::GRAPH_GEN, 0);
            let g = crate::graph::Graph::new(n, sample_er_edges(n, q, &mut r)).unwrap();
            if g.is_connected() {
                connected += 1;
            }
        }
        assert!(connected >= 95, "only {connected}/100 connected");
    }

    #[test]
    fn ring3_equals_complete3() {
        assert_eq!(gen_ring(3).unwrap().edges(), gen_complete(3).unwrap().edges());
    }

    #[test]
    fn grid_2x2_unit_square() {
        let g = gen_grid(2, 2).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.num_edges(), 4);
    }

    #[test]
    fn torus_4x4_is_4_regular() {
        let g = gen_torus(&[4, 4]).unwrap();
        assert_eq!(g.n(), 16);
        assert_eq!(g.num_edges(), 32);
        assert!((0..16).all(|v| g.degree(v) == 4));
        assert!(g.is_connected());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(gen_torus(&[4, 0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(gen_grid(0, 3), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn geometric_radius_out_of_range() {
        assert!(matches!(
            gen_geometric(4, std::f64::consts::SQRT_2 + 1e-6, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn two_nodes_within_diagonal_radius_connect() {
        let g = geometric_from_positions(&[(0.0, 0.0), (1.0, 1.0)], std::f64::consts::SQRT_2 * 1.0001)
            .unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(g.positions().is_some());
    }

    #[test]
    fn geometric_strict_inequality_at_threshold() {
        // distance exactly equal to the radius must NOT connect
        let g = geometric_from_positions(&[(0.0, 0.0), (0.5, 0.0)], 0.5).unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn pair_index_enumeration_is_exact() {
        for n in [2usize, 3, 5, 17] {
            let mut k = 0u64;
            for u in 0..n {
                for w in (u + 1)..n {
                    assert_eq!(super::pair_from_index(n, k), (u, w), "n={n} k={k}");
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn er_edge_rate_matches_q() {
        let n = 400;
        let q = 0.01;
        let mut total = 0usize;
        for seed in 0..50u64 {
            let mut r = rng::substream(seed, rng::stream::GRAPH_GEN, 0);
            let edges = sample_er_edges(n, q, &mut r);
            for &(u, w) in &edges {
                assert!(u < w && w < n);
            }
            total += edges.len();
        }
        let expect = 50.0 * q * (n * (n - 1) / 2) as f64;
        let sd = (expect * (1.0 - q)).sqrt();
        assert!(
            ((total as f64) - expect).abs() < 5.0 * sd,
            "{total} vs {expect}"
        );
    }

    #[test]
    fn geometric_heuristic_radius_mostly_connects() {
        let n = 200;
        let radius = 1.5 * ((n as f64).ln() / (std::f64::consts::PI * n as f64)).sqrt();
        let mut connected = 0;
        for seed in 0..100u64 {
            let mut r = rng::substream(seed, rng::stream::GRAPH_GEN, 0);
            let pos = sample_unit_square(n, &mut r);
            if geometric_from_positions(&pos, radius).unwrap().is_connected() {
                connected += 1;
            }
        }
        assert!(connected >= 90, "only {connected}/100 connected");
    }
}
