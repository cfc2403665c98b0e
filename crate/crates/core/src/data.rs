//! Datasets: a feature matrix whose columns are samples, optional ground-truth
//! class labels, and the length of the labeled prefix visible to learners.
//!
//! Two on-disk layouts are supported.
//!
//! CSV:
//!
//! ```text
//! m=<features>,n=<samples>,labels=<yes|no>
//! <n comma-separated values>      (m feature rows)
//! <n comma-separated class ids>   (only when labels=yes)
//! ```
//!
//! Dense binary: the magic `GSSLDS01`, then little-endian `u64` m, `u64` n,
//! a `u8` label flag, `m*n` row-major `f64` values and, when flagged, `n`
//! `u64` class ids.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{GraphSslError, Result};

const BINARY_MAGIC: &[u8; 8] = b"GSSLDS01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    DenseBinary,
}

impl DataFormat {
    /// Picks the binary layout for `.bin` files and CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => DataFormat::DenseBinary,
            _ => DataFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub name: String,
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    n_labeled: usize,
}

impl DataSet {
    /// Unlabeled dataset from an m×n matrix (one sample per column).
    pub fn new(name: impl Into<String>, features: Array2<f64>) -> Self {
        DataSet {
            name: name.into(),
            features,
            labels: None,
            n_labeled: 0,
        }
    }

    /// Attaches ground-truth labels for all n samples and declares the first
    /// `n_labeled` of them as known to the learners.
    pub fn with_labels(mut self, labels: Vec<usize>, n_labeled: usize) -> Result<Self> {
        if labels.len() != self.n_samples() {
            return Err(GraphSslError::DimensionMismatch {
                expected: self.n_samples(),
                got: labels.len(),
            });
        }
        if n_labeled > labels.len() {
            return Err(GraphSslError::InvalidParameter(format!(
                "labeled prefix {} exceeds sample count {}",
                n_labeled,
                labels.len()
            )));
        }
        self.labels = Some(labels);
        self.n_labeled = n_labeled;
        Ok(self)
    }

    pub fn set_labeled_prefix(&mut self, n_labeled: usize) -> Result<()> {
        let n = self.labels.as_ref().map_or(0, Vec::len);
        if n_labeled > n {
            return Err(GraphSslError::InvalidParameter(format!(
                "labeled prefix {} exceeds labeled sample count {}",
                n_labeled, n
            )));
        }
        self.n_labeled = n_labeled;
        Ok(())
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn into_features(self) -> Array2<f64> {
        self.features
    }

    /// Feature dimension m.
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.features.ncols()
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.column(i)
    }

    /// Ground truth for every sample, if present.
    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Labels of the known prefix (empty when unlabeled).
    pub fn known_labels(&self) -> &[usize] {
        match &self.labels {
            Some(l) => &l[..self.n_labeled],
            None => &[],
        }
    }

    pub fn n_labeled(&self) -> usize {
        self.n_labeled
    }

    /// Number of distinct ground-truth classes.
    pub fn class_count(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().collect::<BTreeSet<_>>().len())
    }

    /// Divides every entry by the global maximum (X / max(X)).
    pub fn normalize_by_max(&mut self) -> Result<()> {
        let max = self.features.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0) {
            return Err(GraphSslError::InvalidParameter(format!(
                "cannot normalize by non-positive maximum {max}"
            )));
        }
        self.features.mapv_inplace(|v| v / max);
        Ok(())
    }

    /// Subset of samples, in the given order, keeping ground truth and a new
    /// labeled prefix.
    pub fn select(&self, indices: &[usize], n_labeled: usize) -> Result<DataSet> {
        let features = self.features.select(Axis(1), indices);
        let mut out = DataSet::new(self.name.clone(), features);
        if let Some(labels) = &self.labels {
            let sub = indices.iter().map(|&i| labels[i]).collect();
            out = out.with_labels(sub, n_labeled)?;
        }
        Ok(out)
    }

    fn check_finite(&self) -> Result<()> {
        for ((i, j), v) in self.features.indexed_iter() {
            if !v.is_finite() {
                return Err(GraphSslError::NonFinite { i, j });
            }
        }
        Ok(())
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<DataSet> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let ds = match format {
        DataFormat::Csv => {
            let text = fs::read_to_string(path)?;
            if text.trim().is_empty() {
                return Err(GraphSslError::EmptyFile(path.to_path_buf()));
            }
            parse_csv(&name, &text)?
        }
        DataFormat::DenseBinary => {
            let bytes = fs::read(path)?;
            if bytes.is_empty() {
                return Err(GraphSslError::EmptyFile(path.to_path_buf()));
            }
            parse_binary(&name, &bytes)?
        }
    };
    ds.check_finite()?;
    Ok(ds)
}

pub fn save_dataset(ds: &DataSet, path: &Path, format: DataFormat) -> Result<()> {
    let bytes = match format {
        DataFormat::Csv => to_csv(ds).into_bytes(),
        DataFormat::DenseBinary => to_binary(ds),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(usize, usize, bool)> {
    let mut m = None;
    let mut n = None;
    let mut labels = false;
    for field in line.split(',') {
        let (key, value) = field.trim().split_once('=').ok_or_else(|| GraphSslError::Parse {
            line: 1,
            msg: format!("malformed header field {field:?}"),
        })?;
        let bad = |msg: String| GraphSslError::Parse { line: 1, msg };
        match key.trim() {
            "m" => m = Some(value.trim().parse().map_err(|e| bad(format!("m: {e}")))?),
            "n" => n = Some(value.trim().parse().map_err(|e| bad(format!("n: {e}")))?),
            "labels" => {
                labels = match value.trim() {
                    "yes" | "true" | "1" => true,
                    "no" | "false" | "0" => false,
                    other => return Err(bad(format!("labels flag {other:?}"))),
                }
            }
            other => return Err(bad(format!("unknown header key {other:?}"))),
        }
    }
    match (m, n) {
        (Some(m), Some(n)) => Ok((m, n, labels)),
        _ => Err(GraphSslError::Parse {
            line: 1,
            msg: "header must declare m and n".into(),
        }),
    }
}

fn parse_csv(name: &str, text: &str) -> Result<DataSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().expect("non-empty text has a line");
    let (m, n, has_labels) = parse_header(header)?;

    let mut features = Array2::<f64>::zeros((m, n));
    for row in 0..m {
        let (lineno, line) = lines.next().ok_or_else(|| GraphSslError::Parse {
            line: row + 2,
            msg: format!("expected {m} feature rows, found {row}"),
        })?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(GraphSslError::RaggedRow {
                row,
                expected: n,
                found: fields.len(),
            });
        }
        for (col, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|e| GraphSslError::Parse {
                line: lineno + 1,
                msg: format!("{field:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(GraphSslError::NonFinite { i: row, j: col });
            }
            features[[row, col]] = v;
        }
    }

    let mut ds = DataSet::new(name, features);
    if has_labels {
        let (lineno, line) = lines.next().ok_or_else(|| GraphSslError::Parse {
            line: m + 2,
            msg: "missing label row".into(),
        })?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(GraphSslError::RaggedRow {
                row: m,
                expected: n,
                found: fields.len(),
            });
        }
        let labels = fields
            .iter()
            .map(|f| {
                f.trim().parse::<usize>().map_err(|e| GraphSslError::Parse {
                    line: lineno + 1,
                    msg: format!("label {f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ds = ds.with_labels(labels, 0)?;
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(GraphSslError::Parse {
            line: lineno + 1,
            msg: "trailing rows after declared content".into(),
        });
    }
    Ok(ds)
}

fn to_csv(ds: &DataSet) -> String {
    let mut out = format!(
        "m={},n={},labels={}\n",
        ds.dim(),
        ds.n_samples(),
        if ds.labels.is_some() { "yes" } else { "no" }
    );
    for row in ds.features.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    if let Some(labels) = &ds.labels {
        let fields: Vec<String> = labels.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn to_binary(ds: &DataSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + 8 * ds.features.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(ds.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(ds.n_samples() as u64).to_le_bytes());
    out.push(ds.labels.is_some() as u8);
    for v in ds.features.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = &ds.labels {
        for &l in labels {
            out.extend_from_slice(&(l as u64).to_le_bytes());
        }
    }
    out
}

fn parse_binary(name: &str, bytes: &[u8]) -> Result<DataSet> {
    let truncated = || GraphSslError::Parse {
        line: 0,
        msg: "truncated binary dataset".into(),
    };
    if bytes.len() < 25 || &bytes[..8] != BINARY_MAGIC {
        return Err(GraphSslError::Parse {
            line: 0,
            msg: "missing GSSLDS01 magic".into(),
        });
    }
    let read_u64 = |at: usize| -> Result<u64> {
        bytes
            .get(at..at + 8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(truncated)
    };
    let m = read_u64(8)? as usize;
    let n = read_u64(16)? as usize;
    let has_labels = bytes[24] != 0;
    let mut at = 25;
    let mut values = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        values.push(f64::from_bits(read_u64(at)?));
        at += 8;
    }
    let features = Array2::from_shape_vec((m, n), values).expect("length checked");
    let mut ds = DataSet::new(name, features);
    if has_labels {
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(read_u64(at)? as usize);
            at += 8;
        }
        ds = ds.with_labels(labels, 0)?;
    }
    if at != bytes.len() {
        return Err(GraphSslError::Parse {
            line: 0,
            msg: "trailing bytes in binary dataset".into(),
        });
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_with_header_gives_dimensions() {
        let ds = parse_csv("t", "m=2,n=3,labels=no\n1,2,3\n4,5,6\n").unwrap();
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.sample(1).to_vec(), vec![2.0, 5.0]);
    }

    #[test]
    fn nan_entry_is_rejected_with_position() {
        let err = parse_csv("t", "m=2,n=2,labels=no\n1,2\n3,NaN\n").unwrap_err();
        assert_eq!(err.to_string(), "non-finite entry at (1,1)");
    }

    #[test]
    fn ragged_and_empty_inputs_have_distinct_errors() {
        let err = parse_csv("t", "m=2,n=3,labels=no\n1,2,3\n4,5\n").unwrap_err();
        assert!(matches!(err, GraphSslError::RaggedRow { row: 1, .. }));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        fs::write(&path, "").unwrap();
        let err = load_dataset(&path, DataFormat::Csv).unwrap_err();
        assert!(matches!(err, GraphSslError::EmptyFile(_)));
    }

    #[test]
    fn labels_row_is_parsed() {
        let ds = parse_csv("t", "m=1,n=3,labels=yes\n0.5,1,2\n0,0,1\n").unwrap();
        assert_eq!(ds.labels().unwrap(), &[0, 0, 1]);
        assert_eq!(ds.class_count(), 2);
        assert!(ds.known_labels().is_empty());
    }

    #[test]
    fn both_formats_round_trip_bitwise() {
        let x = array![[0.1, 1.0 / 3.0, 7e-300], [f64::MAX, -0.0, 2.5]];
        let ds = DataSet::new("rt", x).with_labels(vec![3, 1, 3], 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for format in [DataFormat::Csv, DataFormat::DenseBinary] {
            let path = dir.path().join("rt.dat");
            save_dataset(&ds, &path, format).unwrap();
            let back = load_dataset(&path, format).unwrap();
            let same_bits = ds
                .features()
                .iter()
                .zip(back.features().iter())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same_bits, "{format:?}");
            assert_eq!(back.labels(), ds.labels());
        }
    }

    #[test]
    fn normalization_sets_max_to_one() {
        let mut ds = DataSet::new("n", array![[0.0, 2.0], [4.0, 1.0]]);
        ds.normalize_by_max().unwrap();
        assert_eq!(ds.features(), array![[0.0, 0.5], [1.0, 0.25]]);
    }
}
