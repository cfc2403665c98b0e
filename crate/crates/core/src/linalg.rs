//! Small dense helpers bridging ndarray storage and nalgebra's symmetric
//! eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};

pub(crate) fn to_nalgebra(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenvalues (ascending) and matching eigenvectors as columns.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let eig = SymmetricEigen::new(to_nalgebra(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Array2::from_shape_fn((a.nrows(), order.len()), |(i, c)| {
        eig.eigenvectors[(i, order[c])]
    });
    (values, vectors)
}

pub fn symmetric_eigenvalues(a: ArrayView2<'_, f64>) -> Array1<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(to_nalgebra(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    Array1::from(values)
}

/// Rebuilds V diag(f(λ)) Vᵀ from an eigendecomposition.
pub(crate) fn spectral_map(
    values: &Array1<f64>,
    vectors: &Array2<f64>,
    f: impl Fn(f64) -> f64,
) -> Array2<f64> {
    let scaled = vectors * &values.mapv(f);
    scaled.dot(&vectors.t())
}

/// (A + Aᵀ)/2, written in place so the result is exactly symmetric.
pub(crate) fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}

/// Largest eigenvalue of a symmetric PSD matrix.
pub(crate) fn spectral_norm_psd(a: ArrayView2<'_, f64>) -> f64 {
    symmetric_eigenvalues(a)
        .iter()
        .copied()
        .fold(0.0, f64::max)
}
