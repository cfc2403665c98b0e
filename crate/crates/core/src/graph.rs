//! Affinity graph construction.
//!
//! The learned pipeline is: KISS metric → full squared-distance adjacency
//! `A` → kNN pattern `P` (symmetrized by elementwise max) → Gaussian weights
//! `W_ij = P_ij · exp(−A_ij / (2σ²))` with `σ = Σ_ij A_ij² / n²` unless
//! overridden. The same pipeline with the identity metric gives the
//! unsupervised baseline; the label-weight graph connects equally labeled
//! samples of the known prefix and ignores everything else.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::data::DataSet;
use crate::error::{GraphSslError, Result};
use crate::metric::{self, MetricMatrix, DEFAULT_KISS_REGULARIZATION};

pub const DEFAULT_KNN: usize = 5;

/// Graphs with more nodes than this keep their weights in sparse storage.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Learned,
    LabelWeight,
    UnsupervisedGaussian,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Learned => "learned",
            GraphKind::LabelWeight => "label-weight",
            GraphKind::UnsupervisedGaussian => "unsupervised-gaussian",
        })
    }
}

impl FromStr for GraphKind {
    type Err = GraphSslError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(GraphKind::Learned),
            "label-weight" => Ok(GraphKind::LabelWeight),
            "unsupervised-gaussian" => Ok(GraphKind::UnsupervisedGaussian),
            other => Err(GraphSslError::InvalidParameter(format!("unknown graph kind {other:?}"))),
        }
    }
}

/// Binary sparsification pattern stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    neighbors: Vec<Vec<usize>>,
    k: usize,
}

impl SparsityPattern {
    pub fn from_neighbors(mut neighbors: Vec<Vec<usize>>, k: usize) -> Self {
        for row in &mut neighbors {
            row.sort_unstable();
            row.dedup();
        }
        SparsityPattern { neighbors, k }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// Neighbors requested per node when the pattern was built (0 if not kNN).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n()).all(|i| self.neighbors[i].iter().all(|&j| self.contains(j, i)))
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn to_dense(&self) -> Array2<u8> {
        let mut p = Array2::zeros((self.n(), self.n()));
        for (i, row) in self.neighbors.iter().enumerate() {
            for &j in row {
                p[[i, j]] = 1;
            }
        }
        p
    }

    /// `P ← max(P, Pᵀ)`.
    pub fn symmetrized(&self) -> SparsityPattern {
        let mut rows = self.neighbors.clone();
        for (i, row) in self.neighbors.iter().enumerate() {
            for &j in row {
                rows[j].push(i);
            }
        }
        SparsityPattern::from_neighbors(rows, self.k)
    }
}

/// Compressed symmetric storage: full rows (both triangles) in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseWeights {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, w) in row {
                cols.push(j);
                values.push(w);
            }
            row_ptr.push(cols.len());
        }
        SparseWeights {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }
}

/// Edge weights W, dense up to [`DENSE_LIMIT`] nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum AffinityWeights {
    Dense(Array2<f64>),
    Sparse(SparseWeights),
}

impl AffinityWeights {
    /// Builds storage from per-row `(column, weight)` lists that already
    /// contain both directions of every edge.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        if n <= DENSE_LIMIT {
            let mut w = Array2::zeros((n, n));
            for (i, row) in rows.into_iter().enumerate() {
                for (j, v) in row {
                    w[[i, j]] = v;
                }
            }
            AffinityWeights::Dense(w)
        } else {
            AffinityWeights::Sparse(SparseWeights::from_rows(rows))
        }
    }

    pub fn from_dense(w: Array2<f64>) -> Self {
        if w.nrows() <= DENSE_LIMIT {
            AffinityWeights::Dense(w)
        } else {
            let rows = w
                .rows()
                .into_iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(j, &v)| (j, v))
                        .collect()
                })
                .collect();
            AffinityWeights::Sparse(SparseWeights::from_rows(rows))
        }
    }

    pub fn n(&self) -> usize {
        match self {
            AffinityWeights::Dense(w) => w.nrows(),
            AffinityWeights::Sparse(s) => s.n,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            AffinityWeights::Dense(w) => w[[i, j]],
            AffinityWeights::Sparse(s) => s.get(i, j),
        }
    }

    /// Calls `f(j, W_ij)` for every nonzero entry of row `i`, in column order.
    pub fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            AffinityWeights::Dense(w) => {
                for (j, &v) in w.row(i).iter().enumerate() {
                    if v != 0.0 {
                        f(j, v);
                    }
                }
            }
            AffinityWeights::Sparse(s) => {
                for (j, v) in s.row(i) {
                    f(j, v);
                }
            }
        }
    }

    /// Row sums `D_ii = Σ_j W_ij`.
    pub fn degrees(&self) -> Array1<f64> {
        let n = self.n();
        let mut d = Array1::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            self.for_each_in_row(i, |_, v| acc += v);
            d[i] = acc;
        }
        d
    }

    /// `W · V` for an n×c matrix V.
    pub fn mul(&self, v: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            AffinityWeights::Dense(w) => w.dot(&v),
            AffinityWeights::Sparse(s) => {
                let mut out = Array2::zeros((s.n, v.ncols()));
                for i in 0..s.n {
                    let mut row = out.row_mut(i);
                    for (j, w) in s.row(i) {
                        row.scaled_add(w, &v.row(j));
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            AffinityWeights::Dense(w) => w.clone(),
            AffinityWeights::Sparse(s) => {
                let mut w = Array2::zeros((s.n, s.n));
                for i in 0..s.n {
                    for (j, v) in s.row(i) {
                        w[[i, j]] = v;
                    }
                }
                w
            }
        }
    }

    /// First `(i, j)` with `W_ij ≠ W_ji`, if any.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        let n = self.n();
        for i in 0..n {
            let mut found = None;
            self.for_each_in_row(i, |j, v| {
                if found.is_none() && self.get(j, i) != v {
                    found = Some((i, j));
                }
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }

    /// Nonzero upper-triangle entries `(i, j, w)` with `i < j`, row-major.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            self.for_each_in_row(i, |j, v| {
                if j > i {
                    out.push((i, j, v));
                }
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    weights: AffinityWeights,
    adjacency: Option<Array2<f64>>,
    pattern: SparsityPattern,
    sigma: Option<f64>,
    kind: GraphKind,
}

impl AffinityGraph {
    pub fn weights(&self) -> &AffinityWeights {
        &self.weights
    }

    /// Full squared-distance adjacency the graph was built from (absent for
    /// label-weight graphs and graphs read from disk).
    pub fn adjacency(&self) -> Option<&Array2<f64>> {
        self.adjacency.as_ref()
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.pattern.k
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    /// Fraction of edges joining samples with different labels.
    pub fn cross_label_fraction(&self, labels: &[usize]) -> f64 {
        let mut total = 0usize;
        let mut cross = 0usize;
        for (i, j) in self.pattern.edges() {
            total += 1;
            if labels[i] != labels[j] {
                cross += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            cross as f64 / total as f64
        }
    }

    /// Verifies symmetry, zero diagonal, weight range and pattern agreement.
    pub fn check_invariants(&self) -> Result<()> {
        if let Some((i, j)) = self.weights.asymmetry() {
            return Err(GraphSslError::AsymmetricAffinity { i, j });
        }
        if !self.pattern.is_symmetric() {
            return Err(GraphSslError::InvalidParameter("pattern not symmetric".into()));
        }
        let n = self.n();
        for i in 0..n {
            if self.pattern.contains(i, i) || self.weights.get(i, i) != 0.0 {
                return Err(GraphSslError::InvalidParameter(format!("self loop at {i}")));
            }
            let mut bad = None;
            self.weights.for_each_in_row(i, |j, w| {
                if bad.is_none() && (!self.pattern.contains(i, j) || !(w > 0.0) || w > 1.0) {
                    bad = Some((j, w));
                }
            });
            if let Some((j, w)) = bad {
                return Err(GraphSslError::InvalidParameter(format!(
                    "weight {w} at ({i},{j}) inconsistent with pattern"
                )));
            }
            for &j in self.pattern.neighbors(i) {
                if !(self.weights.get(i, j) > 0.0) {
                    return Err(GraphSslError::InvalidParameter(format!(
                        "pattern edge ({i},{j}) has no weight"
                    )));
                }
            }
        }
        if let Some(a) = &self.adjacency {
            for i in 0..n {
                if a[[i, i]] != 0.0 {
                    return Err(GraphSslError::InvalidParameter(format!(
                        "adjacency diagonal nonzero at {i}"
                    )));
                }
                for j in 0..i {
                    if a[[i, j]] != a[[j, i]] || a[[i, j]] < 0.0 {
                        return Err(GraphSslError::InvalidParameter(format!(
                            "adjacency invalid at ({i},{j})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Header `n=<n>,k=<k>,sigma=<σ|none>,kind=<kind>` then one `i,j,w` line
    /// per nonzero upper-triangle weight.
    pub fn to_triplets(&self) -> String {
        let sigma = self.sigma.map_or_else(|| "none".to_string(), |s| s.to_string());
        let mut out = format!("n={},k={},sigma={},kind={}\n", self.n(), self.k(), sigma, self.kind);
        for (i, j, w) in self.weights.upper_triplets() {
            out.push_str(&format!("{i},{j},{w}\n"));
        }
        out
    }

    pub fn from_triplets(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| GraphSslError::Parse {
            line: 1,
            msg: "empty graph file".into(),
        })?;
        let bad = |line: usize, msg: String| GraphSslError::Parse { line, msg };
        let (mut n, mut k, mut sigma, mut kind) = (None, None, None, None);
        for field in header.split(',') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| bad(1, format!("malformed header field {field:?}")))?;
            match key.trim() {
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(1, e.to_string()))?),
                "k" => k = Some(value.parse::<usize>().map_err(|e| bad(1, e.to_string()))?),
                "sigma" => {
                    sigma = Some(match value {
                        "none" => None,
                        v => Some(v.parse::<f64>().map_err(|e| bad(1, e.to_string()))?),
                    })
                }
                "kind" => kind = Some(value.parse::<GraphKind>()?),
                other => return Err(bad(1, format!("unknown header key {other:?}"))),
            }
        }
        let (n, k, sigma, kind) = match (n, k, sigma, kind) {
            (Some(n), Some(k), Some(s), Some(kind)) => (n, k, s, kind),
            _ => return Err(bad(1, "header must declare n, k, sigma and kind".into())),
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(GraphSslError::RaggedRow {
                    row: lineno,
                    expected: 3,
                    found: fields.len(),
                });
            }
            let i: usize = fields[0].trim().parse().map_err(|e| bad(lineno + 1, format!("{e}")))?;
            let j: usize = fields[1].trim().parse().map_err(|e| bad(lineno + 1, format!("{e}")))?;
            let w: f64 = fields[2].trim().parse().map_err(|e| bad(lineno + 1, format!("{e}")))?;
            if i >= j || j >= n {
                return Err(bad(lineno + 1, format!("triplet ({i},{j}) not in upper triangle of {n}")));
            }
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        let neighbors = rows
            .iter()
            .map(|r| r.iter().map(|&(j, _)| j).collect())
            .collect();
        Ok(AffinityGraph {
            weights: AffinityWeights::from_rows(rows),
            adjacency: None,
            pattern: SparsityPattern::from_neighbors(neighbors, k),
            sigma,
            kind,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_triplets())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        AffinityGraph::from_triplets(&fs::read_to_string(path)?)
    }
}

/// `A_ij = (x_i − x_j)ᵀ M (x_i − x_j)` for all sample pairs.
pub fn full_adjacency(dataset: &DataSet, metric: &MetricMatrix) -> Result<Array2<f64>> {
    let n = dataset.n_samples();
    if n < 2 {
        return Err(GraphSslError::InvalidParameter(format!(
            "adjacency needs at least 2 samples, got {n}"
        )));
    }
    if dataset.dim() != metric.dim() {
        return Err(GraphSslError::DimensionMismatch {
            expected: metric.dim(),
            got: dataset.dim(),
        });
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| metric::metric_distance_sq(metric, dataset.sample(i), dataset.sample(j)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut a = Array2::zeros((n, n));
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, d) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            a[[i, j]] = d;
            a[[j, i]] = d;
        }
    }
    Ok(a)
}

/// The `k` nearest neighbors of every node before symmetrization. Ties go to
/// the smaller index.
pub fn knn_directed(adjacency: ArrayView2<'_, f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(GraphSslError::ShapeMismatch(format!(
            "adjacency must be square, got {}x{}",
            n,
            adjacency.ncols()
        )));
    }
    if k == 0 {
        return Err(GraphSslError::InvalidParameter("k must be at least 1".into()));
    }
    if k >= n {
        return Err(GraphSslError::TooManyNeighbors { k, n });
    }
    Ok((0..n)
        .map(|i| {
            let row = adjacency.row(i);
            let mut candidates: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            candidates.sort_by(|&p, &q| row[p].total_cmp(&row[q]).then(p.cmp(&q)));
            candidates.truncate(k);
            candidates
        })
        .collect())
}

/// kNN pattern symmetrized by `P ← max(P, Pᵀ)`.
pub fn knn_sparsify(adjacency: ArrayView2<'_, f64>, k: usize) -> Result<SparsityPattern> {
    let directed = knn_directed(adjacency, k)?;
    Ok(SparsityPattern::from_neighbors(directed, k).symmetrized())
}

/// `σ = Σ_i Σ_j A_ij² / n²`.
pub fn default_bandwidth(adjacency: ArrayView2<'_, f64>) -> Result<f64> {
    let n = adjacency.nrows();
    let sum_sq: f64 = adjacency.iter().map(|a| a * a).sum();
    let sigma = sum_sq / (n * n) as f64;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GraphSslError::ZeroBandwidth);
    }
    Ok(sigma)
}

/// `W_ij = P_ij · exp(−A_ij / (2σ²))`. Weights that underflow to zero on a
/// pattern edge are floored at the smallest positive normal `f64` so the
/// edge survives.
pub fn gaussian_reweight(
    pattern: &SparsityPattern,
    adjacency: &Array2<f64>,
    sigma: f64,
) -> Result<AffinityGraph> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GraphSslError::InvalidParameter(format!(
            "bandwidth must be positive, got {sigma}"
        )));
    }
    let n = pattern.n();
    if adjacency.dim() != (n, n) {
        return Err(GraphSslError::ShapeMismatch(format!(
            "pattern is {n}x{n} but adjacency is {:?}",
            adjacency.dim()
        )));
    }
    let denom = 2.0 * sigma * sigma;
    let rows = (0..n)
        .map(|i| {
            pattern
                .neighbors(i)
                .iter()
                .map(|&j| {
                    let w = (-adjacency[[i, j]] / denom).exp();
                    (j, w.max(f64::MIN_POSITIVE))
                })
                .collect()
        })
        .collect();
    Ok(AffinityGraph {
        weights: AffinityWeights::from_rows(rows),
        adjacency: Some(adjacency.clone()),
        pattern: pattern.clone(),
        sigma: Some(sigma),
        kind: GraphKind::Learned,
    })
}

/// Binary affinity over the labeled prefix: `W_ij = 1` iff both samples are
/// labeled, distinct and share a label.
pub fn label_weight_graph(dataset: &DataSet) -> Result<AffinityGraph> {
    let labels = dataset.known_labels();
    if labels.len() < 2 {
        return Err(GraphSslError::InsufficientLabels(format!(
            "label-weight graph needs at least 2 labeled samples, have {}",
            labels.len()
        )));
    }
    let n = dataset.n_samples();
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if i != j && labels[i] == labels[j] {
                neighbors[i].push(j);
            }
        }
    }
    let rows = neighbors
        .iter()
        .map(|r: &Vec<usize>| r.iter().map(|&j| (j, 1.0)).collect())
        .collect();
    Ok(AffinityGraph {
        weights: AffinityWeights::from_rows(rows),
        adjacency: None,
        pattern: SparsityPattern::from_neighbors(neighbors, 0),
        sigma: None,
        kind: GraphKind::LabelWeight,
    })
}

/// Knobs shared by the metric-based graph builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions {
    pub k: usize,
    pub kiss_regularization: f64,
    /// Replaces the default bandwidth rule when set.
    pub sigma_override: Option<f64>,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            k: DEFAULT_KNN,
            kiss_regularization: DEFAULT_KISS_REGULARIZATION,
            sigma_override: None,
        }
    }
}

/// adjacency → kNN → bandwidth → Gaussian weights, under a given metric.
pub fn metric_graph(
    dataset: &DataSet,
    metric: &MetricMatrix,
    options: &GraphOptions,
    kind: GraphKind,
) -> Result<AffinityGraph> {
    let adjacency = full_adjacency(dataset, metric)?;
    let pattern = knn_sparsify(adjacency.view(), options.k)?;
    let sigma = match options.sigma_override {
        Some(s) => s,
        None => default_bandwidth(adjacency.view())?,
    };
    let mut graph = gaussian_reweight(&pattern, &adjacency, sigma)?;
    graph.kind = kind;
    Ok(graph)
}

pub fn unsupervised_gaussian_graph(dataset: &DataSet, k: usize) -> Result<AffinityGraph> {
    unsupervised_gaussian_graph_with(dataset, &GraphOptions { k, ..Default::default() })
}

pub fn unsupervised_gaussian_graph_with(
    dataset: &DataSet,
    options: &GraphOptions,
) -> Result<AffinityGraph> {
    let metric = MetricMatrix::identity(dataset.dim());
    metric_graph(dataset, &metric, options, GraphKind::UnsupervisedGaussian)
}

pub fn build_learned_graph(
    dataset: &DataSet,
    k: usize,
    regularization: f64,
) -> Result<AffinityGraph> {
    build_learned_graph_with(
        dataset,
        &GraphOptions {
            k,
            kiss_regularization: regularization,
            sigma_override: None,
        },
    )
}

pub fn build_learned_graph_with(dataset: &DataSet, options: &GraphOptions) -> Result<AffinityGraph> {
    let pairs = metric::enumerate_pairs(dataset)?;
    let learned = metric::learn_kiss_metric(dataset, &pairs, options.kiss_regularization)?;
    metric_graph(dataset, &learned, options, GraphKind::Learned)
}
