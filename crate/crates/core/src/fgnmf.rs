//! Graph-regularized NMF.
//!
//! Minimizes `‖X − UVᵀ‖²_F + λ₁ Tr(VᵀLV)` over `U ≥ 0` (m×k) and `V ≥ 0`
//! (n×k) with the multiplicative updates
//!
//! ```text
//! U ← U ∘ (XV) / (UVᵀV)
//! V ← V ∘ (XᵀU + λ₁WV) / (VUᵀU + λ₁DV)
//! ```
//!
//! The graph picks the variant: learned affinity (FGNMF), label weights
//! (LGNMF) or the unsupervised Gaussian kNN graph (GNMF).

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GraphSslError, Result};
use crate::eval::{kmeans, ClusteringResult, KMeansConfig};
use crate::laplacian::GraphLaplacian;

/// Lower bound applied to every update denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfOptions {
    pub k: usize,
    pub lambda1: f64,
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl NmfOptions {
    pub fn new(k: usize) -> Self {
        NmfOptions {
            k,
            lambda1: 1.0,
            max_iters: 300,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    /// Basis, m×k.
    pub u: Array2<f64>,
    /// Coefficients, n×k; row i is the representation of sample i.
    pub v: Array2<f64>,
    pub lambda1: f64,
    /// Objective at initialization followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub seed: u64,
}

impl NmfModel {
    /// Header line `m=<m>,n=<n>,k=<k>,lambda1=<λ>,iterations=<t>,seed=<s>`,
    /// then the m rows of U, the n rows of V and one trailing line with the
    /// objective trace.
    pub fn to_csv(&self) -> String {
        let (m, k) = self.u.dim();
        let n = self.v.nrows();
        let mut out = format!(
            "m={m},n={n},k={k},lambda1={},iterations={},seed={}\n",
            self.lambda1, self.iterations_run, self.seed
        );
        for row in self.u.rows().into_iter().chain(self.v.rows()) {
            out.push_str(&join(row.iter()));
            out.push('\n');
        }
        out.push_str(&join(self.objective_trace.iter()));
        out.push('\n');
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = parse_header(lines.next().unwrap_or_default())?;
        let get = |key: &str| -> Result<&str> {
            header
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| GraphSslError::Parse {
                    line: 1,
                    msg: format!("missing header key {key}"),
                })
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?.parse().map_err(|e| GraphSslError::Parse {
                line: 1,
                msg: format!("{key}: {e}"),
            })
        };
        let (m, n, k) = (parse_usize("m")?, parse_usize("n")?, parse_usize("k")?);
        let iterations_run = parse_usize("iterations")?;
        let seed = parse_usize("seed")? as u64;
        let lambda1: f64 = get("lambda1")?.parse().map_err(|e| GraphSslError::Parse {
            line: 1,
            msg: format!("lambda1: {e}"),
        })?;
        let mut read_block = |rows: usize, offset: usize| -> Result<Array2<f64>> {
            let mut block = Array2::zeros((rows, k));
            for r in 0..rows {
                let values = parse_row(lines.next().unwrap_or_default(), offset + r + 2)?;
                if values.len() != k {
                    return Err(GraphSslError::RaggedRow {
                        row: offset + r,
                        expected: k,
                        found: values.len(),
                    });
                }
                block.row_mut(r).assign(&ndarray::Array1::from(values));
            }
            Ok(block)
        };
        let u = read_block(m, 0)?;
        let v = read_block(n, m)?;
        let objective_trace = match lines.next() {
            Some(l) if !l.trim().is_empty() => parse_row(l, m + n + 2)?,
            _ => Vec::new(),
        };
        Ok(NmfModel {
            u,
            v,
            lambda1,
            objective_trace,
            iterations_run,
            seed,
        })
    }
}

pub(crate) fn join<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            f.trim().parse::<f64>().map_err(|e| GraphSslError::Parse {
                line: lineno,
                msg: format!("{f:?}: {e}"),
            })
        })
        .collect()
}

pub(crate) fn parse_header(line: &str) -> Result<Vec<(String, String)>> {
    line.split(',')
        .map(|field| {
            field
                .split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| GraphSslError::Parse {
                    line: 1,
                    msg: format!("malformed header field {field:?}"),
                })
        })
        .collect()
}

fn squared_frobenius_residual(x: ArrayView2<'_, f64>, u: &Array2<f64>, v: &Array2<f64>) -> f64 {
    let approx = u.dot(&v.t());
    Zip::from(&x).and(&approx).fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b))
}

/// `‖X − UVᵀ‖²_F + λ₁ Tr(VᵀLV)`.
pub fn nmf_objective(x: ArrayView2<'_, f64>, model: &NmfModel, lap: &GraphLaplacian) -> Result<f64> {
    check_shapes(x, &model.u, &model.v)?;
    let recon = squared_frobenius_residual(x, &model.u, &model.v);
    Ok(recon + model.lambda1 * lap.smoothness(model.v.view())?)
}

fn check_shapes(x: ArrayView2<'_, f64>, u: &Array2<f64>, v: &Array2<f64>) -> Result<()> {
    let (m, n) = x.dim();
    if u.nrows() != m || v.nrows() != n || u.ncols() != v.ncols() {
        return Err(GraphSslError::ShapeMismatch(format!(
            "X is {m}x{n}, U is {:?}, V is {:?}",
            u.dim(),
            v.dim()
        )));
    }
    Ok(())
}

fn validate(x: ArrayView2<'_, f64>, opts: &NmfOptions) -> Result<()> {
    for ((i, j), &value) in x.indexed_iter() {
        if value < 0.0 || !value.is_finite() {
            return Err(GraphSslError::NegativeInput { i, j, value });
        }
    }
    let (m, n) = x.dim();
    if opts.k == 0 || opts.k > m.min(n) {
        return Err(GraphSslError::InvalidParameter(format!(
            "factorization rank {} outside [1, {}]",
            opts.k,
            m.min(n)
        )));
    }
    if !(opts.lambda1 >= 0.0) || !(opts.tol >= 0.0) {
        return Err(GraphSslError::InvalidParameter(
            "lambda1 and tol must be nonnegative".into(),
        ));
    }
    Ok(())
}

/// U (m×k) then V (n×k), entries uniform on (0, 1].
fn initialize(m: usize, n: usize, k: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || 1.0 - rng.random::<f64>();
    let u = Array2::from_shape_simple_fn((m, k), &mut draw);
    let v = Array2::from_shape_simple_fn((n, k), &mut draw);
    (u, v)
}

/// `factor ← factor ∘ numer / max(denom, floor)`.
fn multiplicative_step(factor: &mut Array2<f64>, numer: &Array2<f64>, denom: &Array2<f64>) {
    Zip::from(factor)
        .and(numer)
        .and(denom)
        .for_each(|f, &a, &b| *f *= a / b.max(DENOMINATOR_FLOOR));
}

fn converged(prev: f64, current: f64, tol: f64) -> bool {
    let scale = prev.abs().max(f64::MIN_POSITIVE);
    (prev - current) / scale < tol
}

pub fn fit_fgnmf(x: ArrayView2<'_, f64>, lap: &GraphLaplacian, opts: &NmfOptions) -> Result<NmfModel> {
    validate(x, opts)?;
    let (m, n) = x.dim();
    if lap.n() != n {
        return Err(GraphSslError::DimensionMismatch {
            expected: n,
            got: lap.n(),
        });
    }
    let lambda = opts.lambda1;
    let (mut u, mut v) = initialize(m, n, opts.k, opts.seed);
    let objective = |u: &Array2<f64>, v: &Array2<f64>| -> f64 {
        let smooth = lap.smoothness(v.view()).expect("shape checked");
        squared_frobenius_residual(x, u, v) + lambda * smooth
    };
    let mut trace = vec![objective(&u, &v)];
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let xv = x.dot(&v);
        let uvtv = u.dot(&v.t().dot(&v));
        multiplicative_step(&mut u, &xv, &uvtv);

        let numer = x.t().dot(&u) + lap.weights_times(v.view()) * lambda;
        let denom = v.dot(&u.t().dot(&u)) + lap.degrees_times(v.view()) * lambda;
        multiplicative_step(&mut v, &numer, &denom);

        iterations += 1;
        let current = objective(&u, &v);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(current);
        if converged(prev, current, opts.tol) {
            break;
        }
    }
    Ok(NmfModel {
        u,
        v,
        lambda1: lambda,
        objective_trace: trace,
        iterations_run: iterations,
        seed: opts.seed,
    })
}

/// Plain Euclidean NMF (no graph term) with the same initialization and
/// stopping rule as [`fit_fgnmf`].
pub fn fit_nmf(x: ArrayView2<'_, f64>, opts: &NmfOptions) -> Result<NmfModel> {
    validate(x, opts)?;
    let (m, n) = x.dim();
    let (mut u, mut v) = initialize(m, n, opts.k, opts.seed);
    let mut trace = vec![squared_frobenius_residual(x, &u, &v)];
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let xv = x.dot(&v);
        let uvtv = u.dot(&v.t().dot(&v));
        multiplicative_step(&mut u, &xv, &uvtv);

        let xtu = x.t().dot(&u);
        let vutu = v.dot(&u.t().dot(&u));
        multiplicative_step(&mut v, &xtu, &vutu);

        iterations += 1;
        let current = squared_frobenius_residual(x, &u, &v);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(current);
        if converged(prev, current, opts.tol) {
            break;
        }
    }
    Ok(NmfModel {
        u,
        v,
        lambda1: 0.0,
        objective_trace: trace,
        iterations_run: iterations,
        seed: opts.seed,
    })
}

/// k-means on the rows of V.
pub fn predict_clusters_nmf(model: &NmfModel, cfg: &KMeansConfig) -> Result<ClusteringResult> {
    kmeans(model.v.view(), cfg)
}
