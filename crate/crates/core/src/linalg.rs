//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Singular-value tolerance relative to the largest singular value.
pub const RELATIVE_RANK_TOL: f64 = 1e-10;

/// Inverse of a symmetric positive-definite matrix via Cholesky.
///
/// Returns `None` when the factorization fails or a pivot is negligible
/// relative to the largest one.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)] * l[(i, i)];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if !(lo > RELATIVE_RANK_TOL * RELATIVE_RANK_TOL * hi) {
        return None;
    }
    Some(chol.inverse())
}

/// Smallest singular value divided by the largest one (1 for an empty matrix).
pub fn relative_min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    m.clone().symmetric_eigen().eigenvalues
}

/// Norm of the component of `v` orthogonal to the column span of `basis`.
pub fn span_residual(basis: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let svd = basis.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let hi = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut r = v.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        if *s > RELATIVE_RANK_TOL * hi {
            let col = u.column(j);
            let c = col.dot(v);
            r -= col * c;
        }
    }
    r.norm()
}

/// Canonical symplectic matrix `[[0, I], [-I, 0]]` of size `2n`.
pub fn symplectic_matrix(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    omega
}

/// Frobenius norm of `JᵀΩJ − Ω`.
pub fn symplectic_defect(jac: &DMatrix<f64>) -> f64 {
    let n = jac.nrows() / 2;
    let omega = symplectic_matrix(n);
    (jac.transpose() * &omega * jac - omega).norm()
}

pub fn to_dvector(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}
