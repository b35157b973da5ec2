//! Small dense helpers over nalgebra. Matrices here are tiny (a few dozen
//! entries), so clarity wins over allocation counts.

use nalgebra::{DMatrix, SymmetricEigen};

/// Row-major `rows × cols` slice of rows into a matrix.
pub(crate) fn from_rows(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Largest eigenvalue and a unit eigenvector of a symmetric matrix.
pub(crate) fn top_eigen(sym: DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(sym);
    let (idx, &val) = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).iter().copied().collect())
}

/// Largest singular value of `m` with its right singular vector.
pub(crate) fn top_right_singular(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let (val, v) = top_eigen(m.transpose() * m);
    (val.max(0.0).sqrt(), v)
}

/// Thin SVD as `(U, σ, V)` with singular values in decreasing order.
pub(crate) fn svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    (u, sigma, v)
}

/// Inverse of a symmetric positive definite matrix, `None` if singular.
pub(crate) fn spd_inverse(m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.cholesky().map(|c| c.inverse())
}
