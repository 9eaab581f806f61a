//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Thin QR of a matrix with at least as many rows as columns.
pub fn thin_qr(m: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.qr();
    (qr.q(), qr.r())
}

/// Thin SVD with singular values in descending order.
///
/// Computed with faer: nalgebra's bidiagonal SVD can lose many digits on
/// nearly rank-deficient input, which is exactly what TT rounding feeds it.
pub fn svd_sorted(m: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (DMatrix::zeros(rows, 0), DVector::zeros(0), DMatrix::zeros(0, cols));
    }
    let fm = faer::MatRef::from_column_major_slice(m.as_slice(), rows, cols);
    let svd = fm.thin_svd().expect("SVD did not converge");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    (
        DMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
        DVector::from_fn(k, |i, _| s[i]),
        DMatrix::from_fn(k, cols, |i, j| v[(j, i)]),
    )
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    let (rows, cols) = m.shape();
    if rows.min(cols) == 0 {
        return DVector::zeros(0);
    }
    let fm = faer::MatRef::from_column_major_slice(m.as_slice(), rows, cols);
    let s = fm.singular_values().expect("SVD did not converge");
    DVector::from_vec(s)
}

/// Numerical rank with cutoff `max(rows, cols) * eps * sigma_max`.
pub fn numerical_rank(s: &DVector<f64>, rows: usize, cols: usize) -> usize {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let cutoff = rows.max(cols) as f64 * f64::EPSILON * smax;
    s.iter().filter(|&&v| v > cutoff).count()
}

/// Smallest-to-largest ratio of the diagonal magnitudes of a triangular factor.
pub fn diag_ratio(r: &DMatrix<f64>) -> f64 {
    let n = r.nrows().min(r.ncols());
    if n == 0 {
        return 1.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..n {
        let v = r[(i, i)].abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// `m * r^{-1}` for upper-triangular `r`, via a triangular solve.
pub fn right_solve_upper(m: &DMatrix<f64>, r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    // X r = m  <=>  r^T X^T = m^T
    let rt = r.transpose();
    rt.solve_lower_triangular(&m.transpose()).map(|x| x.transpose())
}

/// Orthonormal basis of the leading `k` left singular vectors.
pub fn leading_left_basis(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (u, _, _) = svd_sorted(m.clone());
    u.columns(0, k).into_owned()
}

/// Orthonormal basis of the leading `k` right singular vectors (as columns).
pub fn leading_right_basis(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (_, _, vt) = svd_sorted(m.clone());
    vt.rows(0, k).transpose()
}

/// Kronecker product `I_n ⊗ a`.
pub fn kron_identity_left(n: usize, a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(n * r, n * c);
    for i in 0..n {
        out.view_mut((i * r, i * c), (r, c)).copy_from(a);
    }
    out
}

pub fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}
