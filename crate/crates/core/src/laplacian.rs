//! Unnormalized graph Laplacian `L = D − W` and the smoothness penalty
//! `Tr(VᵀLV) = ½ Σ_ij ‖v_i − v_j‖² W_ij`.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{GraphSslError, Result};
use crate::graph::{AffinityGraph, AffinityWeights};
use crate::linalg::symmetric_eigenvalues;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    weights: AffinityWeights,
    degrees: Array1<f64>,
}

/// Spectral and row-sum diagnostics for a Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianCheck {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_abs_row_sum: f64,
    pub max_degree: f64,
}

impl LaplacianCheck {
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -1e-8 * self.max_eigenvalue
    }

    pub fn rows_sum_to_zero(&self) -> bool {
        self.max_abs_row_sum <= 1e-10 * self.max_degree
    }
}

pub fn build_laplacian(graph: &AffinityGraph) -> Result<GraphLaplacian> {
    GraphLaplacian::from_weights(graph.weights().clone())
}

impl GraphLaplacian {
    pub fn from_weights(weights: AffinityWeights) -> Result<Self> {
        if let Some((i, j)) = weights.asymmetry() {
            return Err(GraphSslError::AsymmetricAffinity { i, j });
        }
        let degrees = weights.degrees();
        Ok(GraphLaplacian { weights, degrees })
    }

    pub fn from_dense(w: Array2<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(GraphSslError::ShapeMismatch(format!(
                "affinity must be square, got {:?}",
                w.dim()
            )));
        }
        GraphLaplacian::from_weights(AffinityWeights::from_dense(w))
    }

    /// Laplacian of the empty graph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        GraphLaplacian {
            weights: AffinityWeights::from_rows(vec![Vec::new(); n]),
            degrees: Array1::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }

    pub fn weights(&self) -> &AffinityWeights {
        &self.weights
    }

    pub fn degree_matrix(&self) -> Array2<f64> {
        Array2::from_diag(&self.degrees)
    }

    /// Dense `L = D − W`.
    pub fn matrix(&self) -> Array2<f64> {
        let mut l = -self.weights.to_dense();
        for (i, d) in self.degrees.iter().enumerate() {
            l[[i, i]] += d;
        }
        l
    }

    /// `W · V`.
    pub fn weights_times(&self, v: ArrayView2<'_, f64>) -> Array2<f64> {
        self.weights.mul(v)
    }

    /// `D · V`.
    pub fn degrees_times(&self, v: ArrayView2<'_, f64>) -> Array2<f64> {
        &v * &self.degrees.view().insert_axis(Axis(1))
    }

    /// `L · V`.
    pub fn apply(&self, v: ArrayView2<'_, f64>) -> Array2<f64> {
        self.degrees_times(v) - self.weights_times(v)
    }

    /// `Tr(VᵀLV)` for an n×k matrix V, clamped at zero.
    pub fn smoothness(&self, v: ArrayView2<'_, f64>) -> Result<f64> {
        if v.nrows() != self.n() {
            return Err(GraphSslError::DimensionMismatch {
                expected: self.n(),
                got: v.nrows(),
            });
        }
        let lv = self.apply(v);
        Ok((&v * &lv).sum().max(0.0))
    }

    pub fn check(&self) -> LaplacianCheck {
        let l = self.matrix();
        let eig = symmetric_eigenvalues(l.view());
        let (min_eigenvalue, max_eigenvalue) = if eig.is_empty() {
            (0.0, 0.0)
        } else {
            (eig[0], eig[eig.len() - 1])
        };
        let max_abs_row_sum = l
            .sum_axis(Axis(1))
            .iter()
            .fold(0.0f64, |acc, s| acc.max(s.abs()));
        let max_degree = self.degrees.iter().copied().fold(0.0, f64::max);
        LaplacianCheck {
            min_eigenvalue,
            max_eigenvalue,
            max_abs_row_sum,
            max_degree,
        }
    }
}

/// `smoothness` with V given in n×k layout.
pub fn smoothness(v: ArrayView2<'_, f64>, lap: &GraphLaplacian) -> Result<f64> {
    lap.smoothness(v)
}
