//! Dataset ingestion, normalization, partitioning, and result persistence.
//!
//! Loaders are pure and deterministic; writers are atomic (write to a
//! sibling temp file, then rename).

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Bumped whenever the persisted result layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Write `bytes` to `path` atomically.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A numeric dataset: feature rows plus one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl RawDataset {
    pub fn rows(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Replace labels by `+1` above the median, `-1` at or below.
    pub fn binarize_labels_by_median(&mut self) {
        let mut sorted = self.labels.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if sorted.is_empty() {
            return;
        } else if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        for l in &mut self.labels {
            *l = if *l > median { 1.0 } else { -1.0 };
        }
    }
}

/// Load a numeric CSV with a header row; `label_column` names the label.
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Io(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "label column {label_column:?} not found; available: {headers:?}"
            ))
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2; // header is line 1
        let record = record.map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} cells, got {}", headers.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (i, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                line,
                column: headers[i].clone(),
            })?;
            if i == label_idx {
                labels.push(value);
            } else {
                row.push(value);
            }
        }
        features.push(row);
    }
    Ok(RawDataset {
        feature_names,
        features,
        labels,
    })
}

/// Write a dataset back out as CSV (features then the label column).
pub fn write_csv_dataset(ds: &RawDataset, label_column: &str, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&ds.feature_names.join(","));
    out.push(',');
    out.push_str(label_column);
    out.push('\n');
    for (row, label) in ds.features.iter().zip(&ds.labels) {
        for x in row {
            out.push_str(&format_full(*x));
            out.push(',');
        }
        out.push_str(&format_full(*label));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Full-precision numeric formatting (17 significant digits), so persisted
/// ledgers reproduce their identities after a round trip.
pub fn format_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Outcome of [`standardize_and_normalize`].
#[derive(Debug, Clone)]
pub struct NormalizedDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// Names of constant columns that were dropped.
    pub dropped_columns: Vec<String>,
    /// Rows that were all zero after standardization (kept as zero vectors).
    pub zero_rows: Vec<usize>,
}

/// Per-column standardization (population variance; constant columns are
/// dropped), followed by per-row L2 normalization. Rows of all zeros after
/// standardization stay zero and are flagged.
pub fn standardize_and_normalize(raw: &RawDataset) -> Result<NormalizedDataset> {
    let rows = raw.rows();
    if rows < 2 {
        return Err(Error::InvalidParameter(
            "standardization needs at least 2 rows".into(),
        ));
    }
    let dim = raw.dim();
    let mut means = vec![0.0; dim];
    for row in &raw.features {
        for (m, x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= rows as f64;
    }
    let mut vars = vec![0.0; dim];
    for row in &raw.features {
        for ((v, x), m) in vars.iter_mut().zip(row).zip(&means) {
            *v += (x - m) * (x - m);
        }
    }
    for v in &mut vars {
        *v /= rows as f64;
    }

    let kept: Vec<usize> = (0..dim).filter(|&c| vars[c] > 0.0).collect();
    let dropped_columns: Vec<String> = (0..dim)
        .filter(|&c| vars[c] == 0.0)
        .map(|c| raw.feature_names[c].clone())
        .collect();

    let mut features = Vec::with_capacity(rows);
    let mut zero_rows = Vec::new();
    for (i, row) in raw.features.iter().enumerate() {
        let mut out: Vec<f64> = kept
            .iter()
            .map(|&c| (row[c] - means[c]) / vars[c].sqrt())
            .collect();
        let norm: f64 = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut out {
                *x /= norm;
            }
        } else {
            zero_rows.push(i);
        }
        features.push(out);
    }
    Ok(NormalizedDataset {
        features,
        labels: raw.labels.clone(),
        dropped_columns,
        zero_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// Seeded shuffle, then near-equal contiguous shards.
    Shuffle,
    /// Order-preserving contiguous shards; the seed is ignored.
    Contiguous,
}

/// Split `rows` row indices into `n` shards with sizes differing by at most 1.
pub fn partition_indices(
    rows: usize,
    n: usize,
    mode: PartitionMode,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n == 0 || n > rows {
        return Err(Error::InvalidParameter(format!(
            "cannot split {rows} rows across {n} nodes"
        )));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    if mode == PartitionMode::Shuffle {
        let mut rng = rng::substream(seed, stream::PARTITION, 0);
        order.shuffle(&mut rng);
    }
    let base = rows / n;
    let extra = rows % n;
    let mut shards = Vec::with_capacity(n);
    let mut at = 0;
    for v in 0..n {
        let take = base + usize::from(v < extra);
        shards.push(order[at..at + take].to_vec());
        at += take;
    }
    Ok(shards)
}

/// One persisted experiment result: a config snapshot plus named metric
/// columns. The config snapshot carries every parameter and seed needed to
/// reproduce the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub experiment: String,
    pub config: serde_json::Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultRecord {
    pub fn new(experiment: &str, config: serde_json::Value, columns: Vec<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_owned(),
            config,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Persist a record as pretty JSON (atomic).
pub fn write_results(record: &ResultRecord, path: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(record)?;
    atomic_write(path, &json)
}

/// Load a record, rejecting unknown schema versions.
pub fn read_results(path: &Path) -> Result<ResultRecord> {
    let bytes = std::fs::read(path)?;
    let record: ResultRecord = serde_json::from_slice(&bytes)?;
    if record.schema_version != SCHEMA_VERSION {
        return Err(Error::VersionMismatch {
            found: record.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(record)
}

/// Metric rows as CSV with full-precision numbers.
pub fn write_results_csv(record: &ResultRecord, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&record.columns.join(","));
    out.push('\n');
    for row in &record.rows {
        let cells: Vec<String> = row.iter().map(|x| format_full(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Reproducible synthetic binary-classification dataset: features are
/// standard Gaussian, labels come from a random hyperplane with a given
/// flip probability. Stands in for a real dataset when none is supplied.
pub fn synthetic_classification(rows: usize, dim: usize, flip_prob: f64, seed: u64) -> RawDataset {
    let mut rng = rng::substream(seed, stream::DATA, 0);
    let mut truth = rng::gaussian_vec(&mut rng, dim, 1.0);
    let norm: f64 = truth.iter().map(|x| x * x).sum::<f64>().sqrt();
    for t in &mut truth {
        *t /= norm.max(1e-12);
    }
    let mut features = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x = rng::gaussian_vec(&mut rng, dim, 1.0);
        let score: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let mut y = if score >= 0.0 { 1.0 } else { -1.0 };
        if rand::Rng::random::<f64>(&mut rng) < flip_prob {
            y = -y;
        }
        features.push(x);
        labels.push(y);
    }
    RawDataset {
        feature_names: (0..dim).map(|c| format!("f{c}")).collect(),
        features,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> RawDataset {
        RawDataset {
            feature_names: vec!["a".into(), "b".into()],
            features: vec![vec![1.0, 0.5], vec![2.0, 0.5], vec![3.0, 0.5]],
            labels: vec![-1.0, 1.0, 1.0],
        }
    }

    #[test]
    fn csv_round_trip_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        let ds = toy();
        write_csv_dataset(&ds, "label", &path).unwrap();
        let back = load_csv_dataset(&path, "label").unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn missing_label_names_available_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        write_csv_dataset(&toy(), "label", &path).unwrap();
        match load_csv_dataset(&path, "price") {
            Err(Error::InvalidParameter(msg)) => {
                assert!(msg.contains("\"a\"") && msg.contains("label"), "{msg}");
            }
            other => panic!("expected InvalidParameter, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,label\n1.0,-1\noops,1\n").unwrap();
        match load_csv_dataset(&path, "label") {
            Err(Error::NonNumericCell { line, column }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "a");
            }
            other => panic!("expected NonNumericCell, got {other:?}"),
        }
    }

    #[test]
    fn standardize_two_rows_to_unit_values() {
        let raw = RawDataset {
            feature_names: vec!["x".into()],
            features: vec![vec![0.0], vec![2.0]],
            labels: vec![-1.0, 1.0],
        };
        let ds = standardize_and_normalize(&raw).unwrap();
        assert!((ds.features[0][0] + 1.0).abs() < 1e-12);
        assert!((ds.features[1][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_rows_have_unit_or_zero_norm_and_constant_cols_drop() {
        let ds = standardize_and_normalize(&toy()).unwrap();
        assert_eq!(ds.dropped_columns, vec!["b".to_string()]);
        for row in &ds.features {
            let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm.abs() < 1e-12 || (norm - 1.0).abs() < 1e-12);
        }
        assert_eq!(ds.features[0].len(), 1);
    }

    #[test]
    fn partition_sizes_and_union() {
        let shards = partition_indices(10, 3, PartitionMode::Shuffle, 5).unwrap();
        let mut sizes: Vec<usize> = shards.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        let mut all: Vec<usize> = shards.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn contiguous_partition_preserves_order() {
        let shards = partition_indices(7, 2, PartitionMode::Contiguous, 123).unwrap();
        assert_eq!(shards[0], vec![0, 1, 2, 3]);
        assert_eq!(shards[1], vec![4, 5, 6]);
    }

    #[test]
    fn partition_more_nodes_than_rows_rejected() {
        assert!(matches!(
            partition_indices(3, 4, PartitionMode::Shuffle, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn results_round_trip_and_version_gate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("res.json");
        let mut rec = ResultRecord::new(
            "demo",
            serde_json::json!({"seed": 7}),
            vec!["t".into(), "mse".into()],
        );
        rec.push_row(vec![0.0, 0.123456789012345678]);
        rec.push_row(vec![1.0, 1e-17]);
        write_results(&rec, &path).unwrap();
        assert_eq!(read_results(&path).unwrap(), rec);

        let mut old = rec.clone();
        old.schema_version = 999;
        atomic_write(&path, &serde_json::to_vec(&old).unwrap()).unwrap();
        assert!(matches!(
            read_results(&path),
            Err(Error::VersionMismatch { found: 999, .. })
        ));
    }

    #[test]
    fn full_precision_formatting_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 2e-17, 123456.789, -0.0, 1e300] {
            let s = format_full(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }

    #[test]
    fn binarize_by_median_splits() {
        let mut ds = toy();
        ds.labels = vec![1.0, 5.0, 9.0];
        ds.binarize_labels_by_median();
        assert_eq!(ds.labels, vec![-1.0, -1.0, 1.0]);
    }

    #[test]
    fn synthetic_dataset_is_reproducible() {
        let a = synthetic_classification(50, 4, 0.1, 9);
        let b = synthetic_classification(50, 4, 0.1, 9);
        assert_eq!(a, b);
        assert!(a.labels.iter().all(|&l| l == 1.0 || l == -1.0));
    }
}
