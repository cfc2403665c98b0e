//! Mahalanobis metrics and the KISS estimator.
//!
//! The learned metric is `M = Σ_S⁻¹ − Σ_D⁻¹`, where `Σ_S` and `Σ_D` are the
//! mean outer products of sample differences over similar and dissimilar
//! labeled pairs. Each covariance is shrunk toward a scaled identity before
//! inversion, and the difference is projected onto the PSD cone by clipping
//! negative eigenvalues.

use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::data::DataSet;
use crate::error::{GraphSslError, Result};
use crate::linalg::{spectral_map, symmetric_eigen, symmetrize};

pub const DEFAULT_KISS_REGULARIZATION: f64 = 1e-3;

/// Relative eigenvalue floor below which a shrunk covariance is treated as
/// singular.
const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Identity,
    KissLearned,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Identity => "identity",
            Provenance::KissLearned => "kiss-learned",
        })
    }
}

/// Symmetric positive semi-definite m×m matrix defining `d²(x, y) = (x−y)ᵀM(x−y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    matrix: Array2<f64>,
    regularization: f64,
    provenance: Provenance,
}

impl MetricMatrix {
    pub fn identity(m: usize) -> Self {
        MetricMatrix {
            matrix: Array2::eye(m),
            regularization: 0.0,
            provenance: Provenance::Identity,
        }
    }

    /// Wraps a user-supplied matrix after checking symmetry and positive
    /// semi-definiteness.
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        let m = matrix.nrows();
        if matrix.ncols() != m {
            return Err(GraphSslError::ShapeMismatch(format!(
                "metric must be square, got {}x{}",
                m,
                matrix.ncols()
            )));
        }
        for i in 0..m {
            for j in 0..i {
                if matrix[[i, j]] != matrix[[j, i]] {
                    return Err(GraphSslError::InvalidParameter(format!(
                        "metric not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let metric = MetricMatrix {
            matrix,
            regularization: 0.0,
            provenance: Provenance::KissLearned,
        };
        if !metric.is_psd() {
            return Err(GraphSslError::InvalidParameter(
                "metric not positive semi-definite".into(),
            ));
        }
        Ok(metric)
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `c·M` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(GraphSslError::InvalidParameter(format!(
                "metric scale must be positive, got {c}"
            )));
        }
        Ok(MetricMatrix {
            matrix: &self.matrix * c,
            ..self.clone()
        })
    }

    pub fn eigenvalues(&self) -> Array1<f64> {
        crate::linalg::symmetric_eigenvalues(self.matrix.view())
    }

    /// Smallest eigenvalue ≥ −1e−8 · max(largest eigenvalue, 1).
    pub fn is_psd(&self) -> bool {
        let ev = self.eigenvalues();
        if ev.is_empty() {
            return true;
        }
        let largest = ev[ev.len() - 1].max(1.0);
        ev[0] >= -1e-8 * largest
    }

    pub fn distance_sq(&self, xi: ArrayView1<'_, f64>, xj: ArrayView1<'_, f64>) -> Result<f64> {
        metric_distance_sq(self, xi, xj)
    }

    /// CSV with header `m=<dim>` followed by m comma-separated rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("m={}\n", self.dim());
        for row in self.matrix.rows() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| GraphSslError::Parse {
            line: 1,
            msg: "empty metric file".into(),
        })?;
        let m: usize = header
            .trim()
            .strip_prefix("m=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| GraphSslError::Parse {
                line: 1,
                msg: format!("expected header m=<dim>, got {header:?}"),
            })?;
        let mut matrix = Array2::zeros((m, m));
        for i in 0..m {
            let line = lines.next().ok_or_else(|| GraphSslError::Parse {
                line: i + 2,
                msg: "missing metric row".into(),
            })?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != m {
                return Err(GraphSslError::RaggedRow {
                    row: i,
                    expected: m,
                    found: fields.len(),
                });
            }
            for (j, f) in fields.iter().enumerate() {
                matrix[[i, j]] = f.trim().parse().map_err(|e| GraphSslError::Parse {
                    line: i + 2,
                    msg: format!("{f:?}: {e}"),
                })?;
            }
        }
        let provenance = if matrix == Array2::eye(m) {
            Provenance::Identity
        } else {
            Provenance::KissLearned
        };
        let mut metric = MetricMatrix::from_matrix(matrix)?;
        metric.provenance = provenance;
        Ok(metric)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        MetricMatrix::from_csv(&fs::read_to_string(path)?)
    }
}

/// Similar and dissimilar index pairs `(i, j)` with `i < j < l`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledPairs {
    pub similar: Vec<(usize, usize)>,
    pub dissimilar: Vec<(usize, usize)>,
}

impl LabeledPairs {
    /// Checks the pair-set invariants against a labeled prefix of length `l`.
    pub fn validate(&self, l: usize) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &self.similar {
            seen.insert((i.min(j), i.max(j)));
        }
        for &(i, j) in self.similar.iter().chain(&self.dissimilar) {
            if i == j {
                return Err(GraphSslError::InvalidParameter(format!("self pair ({i},{i})")));
            }
            if i >= l || j >= l {
                return Err(GraphSslError::InvalidParameter(format!(
                    "pair ({i},{j}) outside labeled prefix of length {l}"
                )));
            }
        }
        for &(i, j) in &self.dissimilar {
            if seen.contains(&(i.min(j), i.max(j))) {
                return Err(GraphSslError::InvalidParameter(format!(
                    "pair ({i},{j}) is both similar and dissimilar"
                )));
            }
        }
        Ok(())
    }
}

/// All unordered pairs of the labeled prefix, split by label equality.
pub fn enumerate_pairs(dataset: &DataSet) -> Result<LabeledPairs> {
    let labels = dataset.known_labels();
    if labels.len() < 2 {
        return Err(GraphSslError::InsufficientLabels(format!(
            "need at least 2 labeled samples, have {}",
            labels.len()
        )));
    }
    let mut pairs = LabeledPairs::default();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if labels[i] == labels[j] {
                pairs.similar.push((i, j));
            } else {
                pairs.dissimilar.push((i, j));
            }
        }
    }
    if pairs.dissimilar.is_empty() {
        return Err(GraphSslError::InsufficientLabels(
            "labeled samples span fewer than 2 classes".into(),
        ));
    }
    if pairs.similar.is_empty() {
        return Err(GraphSslError::InsufficientLabels(
            "insufficient similar pairs".into(),
        ));
    }
    Ok(pairs)
}

/// Mean of (x_i − x_j)(x_i − x_j)ᵀ over the given pairs.
fn pair_covariance(x: ArrayView2<'_, f64>, pairs: &[(usize, usize)]) -> Array2<f64> {
    let m = x.nrows();
    let mut cov = Array2::<f64>::zeros((m, m));
    let mut diff = Array1::<f64>::zeros(m);
    for &(i, j) in pairs {
        diff.assign(&(&x.column(i) - &x.column(j)));
        for a in 0..m {
            let da = diff[a];
            if da == 0.0 {
                continue;
            }
            for b in 0..m {
                cov[[a, b]] += da * diff[b];
            }
        }
    }
    cov /= pairs.len() as f64;
    cov
}

/// Inverse of `Σ + regularization · trace(Σ)/m · I` via its eigendecomposition.
fn shrunk_inverse(mut cov: Array2<f64>, regularization: f64, which: &'static str) -> Result<Array2<f64>> {
    let m = cov.nrows();
    let shift = regularization * cov.diag().sum() / m as f64;
    for a in 0..m {
        cov[[a, a]] += shift;
    }
    let (values, vectors) = symmetric_eigen(cov.view());
    let largest = values.iter().copied().fold(0.0, f64::max);
    let smallest = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(largest > 0.0) || smallest <= SINGULAR_RTOL * largest {
        return Err(GraphSslError::SingularCovariance { which });
    }
    let mut inv = spectral_map(&values, &vectors, |v| 1.0 / v);
    symmetrize(&mut inv);
    Ok(inv)
}

pub fn learn_kiss_metric(
    dataset: &DataSet,
    pairs: &LabeledPairs,
    regularization: f64,
) -> Result<MetricMatrix> {
    if !(regularization >= 0.0) || !regularization.is_finite() {
        return Err(GraphSslError::InvalidParameter(format!(
            "regularization must be finite and nonnegative, got {regularization}"
        )));
    }
    pairs.validate(dataset.n_labeled())?;
    if pairs.similar.is_empty() || pairs.dissimilar.is_empty() {
        return Err(GraphSslError::InsufficientLabels(
            "KISS needs both similar and dissimilar pairs".into(),
        ));
    }
    let x = dataset.features();
    let inv_similar = shrunk_inverse(pair_covariance(x, &pairs.similar), regularization, "similar")?;
    let inv_dissimilar =
        shrunk_inverse(pair_covariance(x, &pairs.dissimilar), regularization, "dissimilar")?;

    let mut raw = inv_similar - inv_dissimilar;
    symmetrize(&mut raw);
    let (values, vectors) = symmetric_eigen(raw.view());
    let mut matrix = spectral_map(&values, &vectors, |v| v.max(0.0));
    symmetrize(&mut matrix);

    Ok(MetricMatrix {
        matrix,
        regularization,
        provenance: Provenance::KissLearned,
    })
}

/// `(x_i − x_j)ᵀ M (x_i − x_j)`, with round-off negatives clamped to zero.
pub fn metric_distance_sq(
    metric: &MetricMatrix,
    xi: ArrayView1<'_, f64>,
    xj: ArrayView1<'_, f64>,
) -> Result<f64> {
    let m = metric.dim();
    for len in [xi.len(), xj.len()] {
        if len != m {
            return Err(GraphSslError::DimensionMismatch {
                expected: m,
                got: len,
            });
        }
    }
    let diff = &xi - &xj;
    let mut total = 0.0;
    for a in 0..m {
        let da = diff[a];
        if da == 0.0 {
            continue;
        }
        let row = metric.matrix.row(a);
        let mut acc = 0.0;
        for b in 0..m {
            acc += row[b] * diff[b];
        }
        total += da * acc;
    }
    Ok(total.max(0.0))
}
