//! Graph-regularized sparse coding.
//!
//! Minimizes
//!
//! ```text
//! ‖X − BS‖²_F + λ₂ Tr(S L Sᵀ) + λ₃ Σ_i ‖s_i‖₁   s.t. ‖b_r‖² ≤ c
//! ```
//!
//! by alternating exact coordinate descent on the codes S (k×n) with
//! projected gradient steps on the dictionary B (m×k). Column `s_j` is the
//! code of sample j; the Laplacian couples codes of neighboring samples, so
//! the code sweep runs sequentially over samples.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GraphSslError, Result};
use crate::eval::{kmeans, ClusteringResult, KMeansConfig};
use crate::fgnmf::{join, parse_header, parse_row};
use crate::laplacian::GraphLaplacian;
use crate::linalg::spectral_norm_psd;

/// Codes with magnitude below this count as exact zeros.
pub const ZERO_CODE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GscOptions {
    pub k: usize,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Bound on every squared dictionary column norm; may be infinite.
    pub c: f64,
    pub outer_iters: usize,
    pub inner_sweeps: usize,
    /// Projected-gradient steps per dictionary update.
    pub dictionary_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl GscOptions {
    pub fn new(k: usize) -> Self {
        GscOptions {
            k,
            lambda2: 1.0,
            lambda3: 0.1,
            c: 1.0,
            outer_iters: 100,
            inner_sweeps: 3,
            dictionary_iters: 25,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodingModel {
    /// Dictionary, m×k.
    pub b: Array2<f64>,
    /// Codes, k×n.
    pub s: Array2<f64>,
    pub lambda2: f64,
    pub lambda3: f64,
    pub c: f64,
    /// Objective at initialization then one value per outer iteration.
    pub objective_trace: Vec<f64>,
    /// Largest squared column norm of B after each dictionary update.
    pub column_norm_trace: Vec<f64>,
    pub iterations_run: usize,
    pub seed: u64,
}

/// The three terms of the sparse coding objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GscObjective {
    pub reconstruction: f64,
    pub laplacian: f64,
    pub sparsity: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl GscObjective {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.lambda2 * self.laplacian + self.lambda3 * self.sparsity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryStatus {
    Updated { iterations: usize },
    /// All codes were zero, so the data term does not constrain B.
    SkippedZeroCodes,
}

fn objective_terms(
    x: ArrayView2<'_, f64>,
    b: &Array2<f64>,
    s: &Array2<f64>,
    lap: &GraphLaplacian,
    lambda2: f64,
    lambda3: f64,
) -> Result<GscObjective> {
    let (m, n) = x.dim();
    if b.nrows() != m || s.ncols() != n || b.ncols() != s.nrows() {
        return Err(GraphSslError::ShapeMismatch(format!(
            "X is {m}x{n}, B is {:?}, S is {:?}",
            b.dim(),
            s.dim()
        )));
    }
    let approx = b.dot(s);
    let reconstruction = Zip::from(&x).and(&approx).fold(0.0, |acc, &p, &q| acc + (p - q) * (p - q));
    let laplacian = lap.smoothness(s.t())?;
    let sparsity = s.iter().map(|v| v.abs()).sum();
    Ok(GscObjective {
        reconstruction,
        laplacian,
        sparsity,
        lambda2,
        lambda3,
    })
}

pub fn gsc_objective(
    x: ArrayView2<'_, f64>,
    model: &SparseCodingModel,
    lap: &GraphLaplacian,
) -> Result<GscObjective> {
    objective_terms(x, &model.b, &model.s, lap, model.lambda2, model.lambda3)
}

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Exact minimizer of `a·t² − 2g·t + λ|t|` for `a > 0`.
pub fn scalar_code_minimizer(a: f64, g: f64, lambda3: f64) -> f64 {
    soft_threshold(g, lambda3 / 2.0) / a
}

/// Coordinate descent sweeps over every code entry with B held fixed.
///
/// For entry `S_rj` the objective is `a t² − 2 g t + λ₃|t| + const` with
/// `a = ‖b_r‖² + λ₂ L_jj` and `g = b_rᵀ(x_j − Σ_{r'≠r} b_r' S_r'j) − λ₂ Σ_{j'≠j} L_jj' S_rj'`.
/// Coordinates with `a = 0` are left unchanged.
pub fn update_codes(
    x: ArrayView2<'_, f64>,
    b: &Array2<f64>,
    s: &mut Array2<f64>,
    lap: &GraphLaplacian,
    lambda2: f64,
    lambda3: f64,
    sweeps: usize,
) -> Result<()> {
    let (m, n) = x.dim();
    let k = b.ncols();
    if b.nrows() != m || s.dim() != (k, n) || lap.n() != n {
        return Err(GraphSslError::ShapeMismatch(format!(
            "X is {m}x{n}, B is {:?}, S is {:?}, L is {}x{}",
            b.dim(),
            s.dim(),
            lap.n(),
            lap.n()
        )));
    }
    let col_norms: Array1<f64> = b.map_axis(Axis(0), |col| col.dot(&col));
    let degrees = lap.degrees();
    let weights = lap.weights();
    let mut residual = x.to_owned() - b.dot(&*s);

    for _ in 0..sweeps {
        for j in 0..n {
            for r in 0..k {
                let a = col_norms[r] + lambda2 * degrees[j];
                if !(a > 0.0) {
                    continue;
                }
                let old = s[[r, j]];
                let atom = b.column(r);
                let mut g = atom.dot(&residual.column(j)) + col_norms[r] * old;
                if lambda2 != 0.0 {
                    let mut neighbor_sum = 0.0;
                    weights.for_each_in_row(j, |jj, w| neighbor_sum += w * s[[r, jj]]);
                    g += lambda2 * neighbor_sum;
                }
                let new = scalar_code_minimizer(a, g, lambda3);
                if new != old {
                    residual.column_mut(j).scaled_add(old - new, &atom);
                    s[[r, j]] = new;
                }
            }
        }
    }
    Ok(())
}

fn project_columns(b: &mut Array2<f64>, c: f64) {
    if c.is_infinite() {
        return;
    }
    let radius = c.sqrt();
    for mut col in b.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm > radius {
            col *= radius / norm;
        }
    }
}

/// Projected gradient on `‖X − BS‖²_F` subject to `‖b_r‖² ≤ c`, with step
/// `1 / (2 λ_max(SSᵀ))`.
pub fn update_dictionary(
    x: ArrayView2<'_, f64>,
    s: &Array2<f64>,
    b: &mut Array2<f64>,
    c: f64,
    max_iters: usize,
) -> Result<DictionaryStatus> {
    let (m, n) = x.dim();
    if s.ncols() != n || b.dim() != (m, s.nrows()) {
        return Err(GraphSslError::ShapeMismatch(format!(
            "X is {m}x{n}, B is {:?}, S is {:?}",
            b.dim(),
            s.dim()
        )));
    }
    if !(c > 0.0) {
        return Err(GraphSslError::InvalidParameter(format!(
            "column bound must be positive, got {c}"
        )));
    }
    if s.iter().all(|&v| v == 0.0) {
        log::warn!("all codes are zero; dictionary left unchanged");
        return Ok(DictionaryStatus::SkippedZeroCodes);
    }
    let gram = s.dot(&s.t());
    let xst = x.dot(&s.t());
    let lipschitz = 2.0 * spectral_norm_psd(gram.view());
    let step = 1.0 / lipschitz;
    project_columns(b, c);
    let mut iterations = 0;
    while iterations < max_iters {
        let grad = (b.dot(&gram) - &xst) * 2.0;
        let mut next = &*b - &(grad * step);
        project_columns(&mut next, c);
        let change = Zip::from(&next).and(&*b).fold(0.0f64, |acc, p, q| acc.max((p - q).abs()));
        let scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        *b = next;
        iterations += 1;
        if change <= 1e-13 * scale {
            break;
        }
    }
    Ok(DictionaryStatus::Updated { iterations })
}

/// k distinct nonzero data columns scaled to norm √c; random directions fill
/// in when there are not enough nonzero columns.
fn initial_dictionary(x: ArrayView2<'_, f64>, k: usize, c: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let m = x.nrows();
    let nonzero: Vec<usize> = (0..x.ncols())
        .filter(|&j| x.column(j).iter().any(|&v| v != 0.0))
        .collect();
    let take = k.min(nonzero.len());
    let chosen = sample(rng, nonzero.len(), take);
    let mut b = Array2::zeros((m, k));
    for (r, idx) in chosen.iter().enumerate() {
        b.column_mut(r).assign(&x.column(nonzero[idx]));
    }
    for r in take..k {
        for i in 0..m {
            b[[i, r]] = rng.sample(StandardNormal);
        }
    }
    // with an unbounded norm, data atoms keep their own scale
    for (r, mut col) in b.columns_mut().into_iter().enumerate() {
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            continue;
        }
        if c.is_finite() {
            col *= c.sqrt() / norm;
        } else if r >= take {
            col /= norm;
        }
    }
    b
}

fn validate(x: ArrayView2<'_, f64>, lap: &GraphLaplacian, opts: &GscOptions) -> Result<()> {
    if opts.k == 0 {
        return Err(GraphSslError::InvalidParameter("dictionary size must be at least 1".into()));
    }
    if !(opts.c > 0.0) {
        return Err(GraphSslError::InvalidParameter(format!(
            "column bound must be positive, got {}",
            opts.c
        )));
    }
    if !(opts.lambda2 >= 0.0) || !(opts.lambda3 >= 0.0) || !(opts.tol >= 0.0) {
        return Err(GraphSslError::InvalidParameter(
            "lambda2, lambda3 and tol must be nonnegative".into(),
        ));
    }
    if lap.n() != x.ncols() {
        return Err(GraphSslError::DimensionMismatch {
            expected: x.ncols(),
            got: lap.n(),
        });
    }
    for ((i, j), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(GraphSslError::NonFinite { i, j });
        }
    }
    Ok(())
}

pub fn fit_fgsc(x: ArrayView2<'_, f64>, lap: &GraphLaplacian, opts: &GscOptions) -> Result<SparseCodingModel> {
    validate(x, lap, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut b = initial_dictionary(x, opts.k, opts.c, &mut rng);
    let mut s = Array2::zeros((opts.k, x.ncols()));
    let total = |b: &Array2<f64>, s: &Array2<f64>| -> Result<f64> {
        Ok(objective_terms(x, b, s, lap, opts.lambda2, opts.lambda3)?.total())
    };
    let mut trace = vec![total(&b, &s)?];
    let mut norms = Vec::new();
    let mut iterations = 0;
    while iterations < opts.outer_iters {
        update_codes(x, &b, &mut s, lap, opts.lambda2, opts.lambda3, opts.inner_sweeps)?;
        update_dictionary(x, &s, &mut b, opts.c, opts.dictionary_iters)?;
        norms.push(
            b.columns()
                .into_iter()
                .map(|col| col.dot(&col))
                .fold(0.0, f64::max),
        );
        iterations += 1;
        let current = total(&b, &s)?;
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(current);
        if (prev - current) / prev.abs().max(f64::MIN_POSITIVE) < opts.tol {
            break;
        }
    }
    Ok(SparseCodingModel {
        b,
        s,
        lambda2: opts.lambda2,
        lambda3: opts.lambda3,
        c: opts.c,
        objective_trace: trace,
        column_norm_trace: norms,
        iterations_run: iterations,
        seed: opts.seed,
    })
}

/// k-means on the code columns (one per sample).
pub fn predict_clusters_gsc(model: &SparseCodingModel, cfg: &KMeansConfig) -> Result<ClusteringResult> {
    kmeans(model.s.t(), cfg)
}

impl SparseCodingModel {
    /// Fraction of code entries with magnitude below [`ZERO_CODE`].
    pub fn zero_fraction(&self) -> f64 {
        let zeros = self.s.iter().filter(|v| v.abs() < ZERO_CODE).count();
        zeros as f64 / self.s.len().max(1) as f64
    }

    /// Header, the m rows of B, `nnz=<count>` followed by `r,j,value`
    /// triplets of the nonzero codes, then the objective trace and the
    /// column-norm trace.
    pub fn to_csv(&self) -> String {
        let (m, k) = self.b.dim();
        let n = self.s.ncols();
        let mut out = format!(
            "m={m},n={n},k={k},lambda2={},lambda3={},c={},iterations={},seed={}\n",
            self.lambda2, self.lambda3, self.c, self.iterations_run, self.seed
        );
        for row in self.b.rows() {
            out.push_str(&join(row.iter()));
            out.push('\n');
        }
        let nonzero: Vec<_> = self
            .s
            .indexed_iter()
            .filter(|(_, v)| **v != 0.0)
            .collect();
        out.push_str(&format!("nnz={}\n", nonzero.len()));
        for ((r, j), v) in nonzero {
            out.push_str(&format!("{r},{j},{v}\n"));
        }
        out.push_str(&join(self.objective_trace.iter()));
        out.push('\n');
        out.push_str(&join(self.column_norm_trace.iter()));
        out.push('\n');
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = parse_header(lines.next().map(|(_, l)| l).unwrap_or_default())?;
        let get = |key: &str| -> Result<String> {
            header
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| GraphSslError::Parse {
                    line: 1,
                    msg: format!("missing header key {key}"),
                })
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?.parse().map_err(|e| GraphSslError::Parse {
                line: 1,
                msg: format!("{key}: {e}"),
            })
        };
        let count = |key: &str| -> Result<usize> {
            get(key)?.parse().map_err(|e| GraphSslError::Parse {
                line: 1,
                msg: format!("{key}: {e}"),
            })
        };
        let (m, n, k) = (count("m")?, count("n")?, count("k")?);
        let mut b = Array2::zeros((m, k));
        for i in 0..m {
            let (lineno, line) = lines.next().unwrap_or((i + 1, ""));
            let row = parse_row(line, lineno + 1)?;
            if row.len() != k {
                return Err(GraphSslError::RaggedRow {
                    row: i,
                    expected: k,
                    found: row.len(),
                });
            }
            b.row_mut(i).assign(&Array1::from(row));
        }
        let (lineno, nnz_line) = lines.next().unwrap_or((m + 1, ""));
        let nnz: usize = nnz_line
            .strip_prefix("nnz=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| GraphSslError::Parse {
                line: lineno + 1,
                msg: format!("expected nnz=<count>, got {nnz_line:?}"),
            })?;
        let mut s = Array2::zeros((k, n));
        for _ in 0..nnz {
            let (lineno, line) = lines.next().unwrap_or((0, ""));
            let fields: Vec<&str> = line.split(',').collect();
            let bad = |msg: String| GraphSslError::Parse { line: lineno + 1, msg };
            if fields.len() != 3 {
                return Err(bad(format!("expected r,j,value, got {line:?}")));
            }
            let r: usize = fields[0].parse().map_err(|e| bad(format!("{e}")))?;
            let j: usize = fields[1].parse().map_err(|e| bad(format!("{e}")))?;
            let v: f64 = fields[2].parse().map_err(|e| bad(format!("{e}")))?;
            if r >= k || j >= n {
                return Err(bad(format!("code index ({r},{j}) out of range")));
            }
            s[[r, j]] = v;
        }
        let mut trace_line = || -> Result<Vec<f64>> {
            match lines.next() {
                Some((lineno, l)) if !l.trim().is_empty() => parse_row(l, lineno + 1),
                _ => Ok(Vec::new()),
            }
        };
        let objective_trace = trace_line()?;
        let column_norm_trace = trace_line()?;
        Ok(SparseCodingModel {
            b,
            s,
            lambda2: num("lambda2")?,
            lambda3: num("lambda3")?,
            c: num("c")?,
            objective_trace,
            column_norm_trace,
            iterations_run: count("iterations")?,
            seed: count("seed")? as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_codes_leave_data_norm() {
        let x = array![[1.0, 2.0], [3.0, -1.0]];
        let b = array![[1.0], [0.0]];
        let s = Array2::zeros((1, 2));
        let lap = GraphLaplacian::from_dense(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let obj = objective_terms(x.view(), &b, &s, &lap, 5.0, 7.0).unwrap();
        assert_eq!(obj.total(), 15.0);
    }

    #[test]
    fn scalar_objective() {
        let x = array![[1.0]];
        let model = SparseCodingModel {
            b: array![[1.0]],
            s: array![[1.0]],
            lambda2: 0.0,
            lambda3: 2.0,
            c: 1.0,
            objective_trace: vec![],
            column_norm_trace: vec![],
            iterations_run: 0,
            seed: 0,
        };
        let obj = gsc_objective(x.view(), &model, &GraphLaplacian::empty(1)).unwrap();
        assert_eq!(obj.total(), 2.0);
        assert_eq!((obj.reconstruction, obj.laplacian, obj.sparsity), (0.0, 0.0, 1.0));
    }

    #[test]
    fn exact_reconstruction_without_penalties() {
        let b = array![[1.0, 0.5], [0.0, 1.0]];
        let s = array![[1.0, -2.0, 0.0], [0.5, 0.0, 3.0]];
        let x = b.dot(&s);
        let lap = GraphLaplacian::empty(3);
        assert_eq!(objective_terms(x.view(), &b, &s, &lap, 0.0, 0.0).unwrap().total(), 0.0);
    }

    #[test]
    fn huge_l1_kills_codes() {
        let x = array![[0.3, -2.0], [1.0, 0.5]];
        let b = array![[1.0, 0.0], [0.0, 1.0]];
        let mut s = array![[1.0, 1.0], [1.0, 1.0]];
        let lap = GraphLaplacian::empty(2);
        update_codes(x.view(), &b, &mut s, &lap, 0.0, 4.0, 2).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_atom_is_skipped() {
        let x = array![[1.0], [1.0]];
        let b = array![[0.0, 1.0], [0.0, 0.0]];
        let mut s = array![[0.7], [0.0]];
        update_codes(x.view(), &b, &mut s, &GraphLaplacian::empty(1), 0.0, 0.0, 1).unwrap();
        assert_eq!(s[[0, 0]], 0.7);
        assert_eq!(s[[1, 0]], 1.0);
    }

    #[test]
    fn zero_codes_skip_dictionary_update() {
        let x = array![[1.0, 2.0]];
        let s = Array2::zeros((1, 2));
        let mut b = array![[0.5]];
        let status = update_dictionary(x.view(), &s, &mut b, 1.0, 10).unwrap();
        assert_eq!(status, DictionaryStatus::SkippedZeroCodes);
        assert_eq!(b, array![[0.5]]);
    }

    #[test]
    fn initial_dictionary_columns_have_norm_sqrt_c() {
        let x = array![[1.0, 0.0, 3.0, 0.0], [2.0, 0.0, 4.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = initial_dictionary(x.view(), 3, 4.0, &mut rng);
        for col in b.columns() {
            assert!((col.dot(&col) - 4.0).abs() < 1e-12);
        }
        // only three nonzero columns exist, so a fourth atom is random
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = initial_dictionary(x.view(), 4, 1.0, &mut rng);
        assert!(b.columns().into_iter().all(|c| (c.dot(&c) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn csv_round_trip() {
        let x = array![[1.0, 0.0, 0.5, 2.0], [0.2, 1.0, 0.0, 0.1]];
        let lap = GraphLaplacian::from_dense(Array2::from_shape_fn((4, 4), |(i, j)| if i != j { 0.5 } else { 0.0 })).unwrap();
        let opts = GscOptions { outer_iters: 4, ..GscOptions::new(2) };
        let model = fit_fgsc(x.view(), &lap, &opts).unwrap();
        let back = SparseCodingModel::from_csv(&model.to_csv()).unwrap();
        assert_eq!(back.b, model.b);
        assert_eq!(back.s, model.s);
        assert_eq!(back.objective_trace, model.objective_trace);
        assert_eq!(back.c, model.c);
    }
}
