use std::sync::Arc;

use nalgebra::DMatrix;

use super::kernels;
use super::{Param, TangentVector, TtPoint};
use crate::ambient::AmbientVector;
use crate::error::{Result, TtError};
use crate::sparse::SparseTensor;
use crate::tt::{left_grams, left_interface, right_grams, right_interface, Core, DenseTensor, TtTensor};

/// `(I (x) L)^T Z^{<k+1>} R` for core position `k`, as a core of extents
/// `(L.ncols, n_k, R.ncols)`. `L` spans modes `0..k`, `R` modes `k+1..d`.
pub(crate) fn contract_dense(z: &DenseTensor, k: usize, l: &DMatrix<f64>, r: &DMatrix<f64>) -> Core {
    let modes = z.modes();
    let rows: usize = modes[..=k].iter().product();
    let cols = z.len() / rows;
    let flat = nalgebra::DMatrixView::from_slice(z.data(), rows, cols);
    let m = flat * r;
    let nl = l.nrows();
    let mut out = Core::zeros(l.ncols(), modes[k], r.ncols());
    for i in 0..modes[k] {
        out.set_slice(i, &(l.transpose() * m.rows(i * nl, nl)));
    }
    out
}

pub(crate) fn check_modes(p: &TtPoint, modes: &[usize]) -> Result<()> {
    if p.modes() != modes {
        return Err(TtError::ShapeMismatch(format!("ambient modes {:?} vs point modes {:?}", modes, p.modes())));
    }
    Ok(())
}

/// Gauge-project the `A_k` into the cores of `P_X(Z)` (the last stays as is).
pub(crate) fn gauge_project(p: &TtPoint, a: &[Core]) -> Vec<Core> {
    let d = p.order();
    a.iter()
        .enumerate()
        .map(|(k, c)| if k + 1 < d { c.project_out(&p.core(k).left_unfolding()) } else { c.clone() })
        .collect()
}

/// `A_k = (I (x) X_{<k})^T Z^{<k>} X~_{>k}` for a dense `Z`.
pub(crate) fn dense_a_family(p: &TtPoint, z: &DenseTensor) -> Vec<Core> {
    let d = p.order();
    (0..d)
        .map(|k| {
            let l = left_interface(&p.cores()[..k]);
            let r = right_interface(&p.tilde_cores()[k + 1..]);
            contract_dense(z, k, &l, &r)
        })
        .collect()
}

/// `P_X(Z)` for a dense `Z`, in the gauged parametrization.
pub fn project_dense(p: &Arc<TtPoint>, z: &DenseTensor) -> Result<TangentVector> {
    check_modes(p, z.modes())?;
    let a = dense_a_family(p, z);
    Ok(TangentVector::from_parts(Arc::clone(p), Param::Gauged, gauge_project(p, &a)))
}

/// `P_X(Z)` for a sparse `Z` in one pass over the samples.
pub fn project_sparse(p: &Arc<TtPoint>, z: &SparseTensor) -> Result<TangentVector> {
    check_modes(p, z.modes())?;
    let f = kernels::families(p.cores(), p.tilde_cores(), None, z);
    Ok(TangentVector::from_parts(Arc::clone(p), Param::Gauged, gauge_project(p, &f.a)))
}

/// `P_X(Y)` for `Y` in TT format via Gram sequences: `A_k(i) = L_k Y_k(i) R_{k+1}^T`.
pub fn project_tt(p: &Arc<TtPoint>, y: &TtTensor) -> Result<TangentVector> {
    check_modes(p, y.modes())?;
    let lg = left_grams(p.cores(), y.cores());
    let rg = right_grams(p.tilde_cores(), y.cores());
    let a: Vec<Core> = (0..p.order())
        .map(|k| {
            let yc = y.core(k);
            let mut out = Core::zeros(p.core(k).left(), yc.mode(), p.core(k).right());
            for i in 0..yc.mode() {
                out.set_slice(i, &(&lg[k] * yc.slice(i) * rg[k + 1].transpose()));
            }
            out
        })
        .collect();
    Ok(TangentVector::from_parts(Arc::clone(p), Param::Gauged, gauge_project(p, &a)))
}

pub fn project(p: &Arc<TtPoint>, z: &AmbientVector) -> Result<TangentVector> {
    match z {
        AmbientVector::Dense(t) => project_dense(p, t),
        AmbientVector::Sparse(t) => project_sparse(p, t),
        AmbientVector::Tt(t) => project_tt(p, t),
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::*;
    use crate::linalg::{kron_identity_left, svd_sorted};

    /// Projector assembled from orthonormal bases of the flattenings of the
    /// dense point, independent of the TT machinery.
    fn oracle_projection(x: &DenseTensor, ranks: &[usize], z: &DenseTensor) -> DenseTensor {
        let modes = x.modes();
        let d = modes.len();
        let basis = |mu: usize, right: bool| -> DMatrix<f64> {
            if mu == 0 {
                return DMatrix::from_element(1, 1, 1.0);
            }
            let (u, _, vt) = svd_sorted(x.flatten(mu).unwrap());
            if right {
                vt.rows(0, ranks[mu]).transpose()
            } else {
                u.columns(0, ranks[mu]).into_owned()
            }
        };
        let mut total = DMatrix::zeros(z.len(), 1);
        for k in 0..d {
            let ql = basis(k, false);
            let pl = kron_identity_left(modes[k], &(&ql * ql.transpose()));
            if k + 1 < d {
                let zf = z.flatten(k + 1).unwrap();
                let qn = basis(k + 1, false);
                let qr = basis(k + 1, true);
                let m = (pl - &qn * qn.transpose()) * zf * (&qr * qr.transpose());
                total += DMatrix::from_column_slice(z.len(), 1, m.as_slice());
            } else {
                let zf = DMatrix::from_column_slice(z.len(), 1, z.data());
                total += pl * zf;
            }
        }
        DenseTensor::from_vec(modes, total.as_slice().to_vec()).unwrap()
    }

    #[test]
    fn dense_projection_matches_basis_oracle() {
        let p = point(&[2, 3, 3, 2], &[2, 3, 2], 1);
        let z = dense(p.modes(), 2);
        let v = project_dense(&p, &z).unwrap();
        let expect = oracle_projection(&p.tensor().to_dense().unwrap(), &p.ranks(), &z);
        assert!(v.to_dense().unwrap().sub(&expect).norm() < 1e-11 * expect.norm());
    }

    #[test]
    fn projection_fixes_tangent_vectors() {
        let p = point(&[3, 2, 3], &[2, 2], 3);
        let v = tangent(&p, 4);
        let w = project_dense(&p, &v.to_dense().unwrap()).unwrap();
        for (a, b) in v.cores().iter().zip(w.cores()) {
            let mut diff = a.clone();
            diff.axpy(-1.0, b);
            assert!(diff.norm() < 1e-10 * a.norm().max(1e-300));
        }
        let x = p.tensor().to_dense().unwrap();
        let px = project_dense(&p, &x).unwrap().to_dense().unwrap();
        assert!(px.sub(&x).norm() < 1e-12 * x.norm());
    }

    #[test]
    fn sparse_and_tt_paths_match_dense() {
        let p = point(&[2, 3, 2], &[2, 2], 5);
        let z = SparseTensor::new(
            p.modes(),
            vec![vec![0, 0, 0], vec![1, 2, 1], vec![0, 1, 1], vec![1, 1, 0], vec![0, 2, 1], vec![1, 0, 1], vec![1, 2, 0]],
            vec![0.5, -1.0, 2.0, 0.25, 3.0, -0.75, 1.5],
        )
        .unwrap();
        let zd = z.to_dense().unwrap();
        let a = project_dense(&p, &zd).unwrap();
        let b = project_sparse(&p, &z).unwrap();
        for (x, y) in a.cores().iter().zip(b.cores()) {
            let mut diff = x.clone();
            diff.axpy(-1.0, y);
            assert!(diff.norm() < 1e-11 * x.norm().max(1.0));
        }
        let y = crate::tt::random_tt(&crate::tt::Shape::new(vec![2, 3, 2], &[2, 1]).unwrap(), 9).unwrap();
        let c = project_tt(&p, &y).unwrap();
        let e = project_dense(&p, &y.to_dense().unwrap()).unwrap();
        assert!(c.to_dense().unwrap().sub(&e.to_dense().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn empty_sample_set_projects_to_zero() {
        let p = point(&[2, 3, 2], &[2, 2], 6);
        let v = project_sparse(&p, &SparseTensor::empty(p.modes())).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn self_adjoint_on_random_pairs() {
        let p = point(&[3, 3, 3], &[2, 2], 7);
        let z = dense(p.modes(), 8);
        let w = dense(p.modes(), 9);
        let pz = project_dense(&p, &z).unwrap().to_dense().unwrap();
        let pw = project_dense(&p, &w).unwrap().to_dense().unwrap();
        assert!((pz.dot(&w) - z.dot(&pw)).abs() < 1e-11 * z.norm() * w.norm());
    }

    #[test]
    fn mismatched_modes_rejected() {
        let p = point(&[2, 3, 2], &[2, 2], 10);
        let z = dense(&[2, 2, 2], 1);
        assert!(matches!(project_dense(&p, &z), Err(TtError::ShapeMismatch(_))));
    }
}
