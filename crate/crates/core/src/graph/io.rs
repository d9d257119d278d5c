//! Edge-list ingestion and JSON export.
//!
//! Text format: one edge per line, two whitespace-separated non-negative
//! integers; `#`-prefixed lines are comments. Node ids are compacted to
//! `0..n-1` in order of first appearance, so reloading a saved graph yields
//! an identical graph.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Build a graph from raw id pairs.
///
/// Duplicates and self-loops are dropped. When `giant_component` is set the
/// graph is restricted to its largest connected component (ties broken by
/// smallest contained original id); otherwise a disconnected input is an
/// error.
pub fn from_edge_list(pairs: &[(u64, u64)], giant_component: bool) -> Result<Graph> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("edge list has no pairs".into()));
    }
    // Ids that already form a dense 0..n-1 set are kept verbatim so that
    // saving and reloading a graph is the identity; anything else is
    // compacted in order of first appearance.
    let distinct: std::collections::BTreeSet<u64> = pairs
        .iter()
        .filter(|&&(a, b)| a != b)
        .flat_map(|&(a, b)| [a, b])
        .collect();
    if distinct.is_empty() {
        return Err(Error::EmptyInput("edge list has only self-loops".into()));
    }
    let dense = *distinct.last().unwrap() as usize == distinct.len() - 1;
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut next = 0usize;
    let mut intern = |raw: u64| -> usize {
        if dense {
            return raw as usize;
        }
        *ids.entry(raw).or_insert_with(|| {
            next += 1;
            next - 1
        })
    };
    let mut seen = std::collections::BTreeSet::new();
    for &(a, b) in pairs {
        let u = intern(a);
        let w = intern(b);
        if u == w {
            continue;
        }
        seen.insert((u.min(w), u.max(w)));
    }
    let n = distinct.len();
    let g = Graph::new(n, seen.into_iter().collect())?;
    if g.is_connected() {
        return Ok(g);
    }
    if !giant_component {
        return Err(Error::Disconnected);
    }
    let comp = g.components().into_iter().next().expect("n >= 1");
    let relabel: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .filter(|(u, w)| relabel.contains_key(u) && relabel.contains_key(w))
        .map(|(u, w)| (relabel[u], relabel[w]))
        .collect();
    Graph::new(comp.len(), edges)
}

/// Parse edge-list text (see module docs for the format).
pub fn parse_edge_list(text: &str) -> Result<Vec<(u64, u64)>> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (a, b) = (it.next(), it.next());
        if it.next().is_some() {
            return Err(Error::MalformedRow {
                line: idx + 1,
                reason: "expected exactly two ids".into(),
            });
        }
        match (a, b) {
            (Some(a), Some(b)) => {
                let parse = |s: &str| -> Result<u64> {
                    s.parse().map_err(|_| Error::MalformedRow {
                        line: idx + 1,
                        reason: format!("not a non-negative integer: {s:?}"),
                    })
                };
                pairs.push((parse(a)?, parse(b)?));
            }
            _ => {
                return Err(Error::MalformedRow {
                    line: idx + 1,
                    reason: "expected exactly two ids".into(),
                })
            }
        }
    }
    Ok(pairs)
}

/// Load a graph from an edge-list file.
pub fn read_edge_list_file(path: &Path, giant_component: bool) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    from_edge_list(&parse_edge_list(&text)?, giant_component)
}

/// Write a graph in the edge-list text format.
pub fn write_edge_list_file(graph: &Graph, path: &Path) -> Result<()> {
    let mut out = String::new();
    for &(u, w) in graph.edges() {
        out.push_str(&format!("{u} {w}\n"));
    }
    crate::data_io::atomic_write(path, out.as_bytes())
}

/// JSON shape of a graph: `{"n":..., "edges":[[u,w],...], "positions":...}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<(f64, f64)>>,
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        GraphJson {
            n: g.n(),
            edges: g.edges().to_vec(),
            positions: g.positions().map(|p| p.to_vec()),
        }
    }
}

impl GraphJson {
    pub fn into_graph(self) -> Result<Graph> {
        let g = Graph::new(self.n, self.edges)?;
        Ok(match self.positions {
            Some(p) if p.len() == self.n => g.with_positions(p),
            _ => g,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_and_self_loop_drop() {
        let g = from_edge_list(&[(0, 1), (1, 0), (1, 1)], false).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn giant_component_keeps_largest_lowest() {
        let g = from_edge_list(&[(0, 1), (2, 3)], true).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn disconnected_without_flag_errors() {
        assert_eq!(from_edge_list(&[(0, 1), (2, 3)], false), Err(Error::Disconnected));
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(from_edge_list(&[], false), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn compaction_follows_first_appearance() {
        // raw ids 10, 7, 10, 3 appear in order 10, 7, 3 -> 0, 1, 2
        let g = from_edge_list(&[(10, 7), (10, 3)], false).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn parse_skips_comments_and_flags_bad_rows() {
        let pairs = parse_edge_list("# header\n0 1\n\n2 3\n").unwrap();
        assert_eq!(pairs, vec![(0, 1), (2, 3)]);
        assert!(matches!(
            parse_edge_list("0 x"),
            Err(Error::MalformedRow { line: 1, .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 2"),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn edge_list_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let g = crate::graph::gen_erdos_renyi(20, 0.3, 5).unwrap();
        write_edge_list_file(&g, &path).unwrap();
        let g2 = read_edge_list_file(&path, false).unwrap();
        assert_eq!(g, g2);
        // and once more: idempotent
        write_edge_list_file(&g2, &path).unwrap();
        assert_eq!(read_edge_list_file(&path, false).unwrap(), g2);
    }

    #[test]
    fn graph_json_round_trip() {
        let g = crate::graph::gen_geometric(15, 0.7, 2).unwrap();
        let json = serde_json::to_string(&GraphJson::from(&g)).unwrap();
        let back: GraphJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_graph().unwrap(), g);
    }
}
