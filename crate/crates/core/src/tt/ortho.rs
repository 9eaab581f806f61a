use nalgebra::DMatrix;

use super::{Core, Orthogonality, TtTensor};
use crate::error::{Result, TtError};
use crate::linalg::{diag_ratio, thin_qr};

/// Triangular factors with a smaller diagonal ratio signal a non-minimal decomposition.
const RANK_TOL: f64 = 1e-13;

/// QR of a left unfolding; returns the orthonormal core and the factor to push right.
pub(crate) fn left_qr(core: &Core, k: usize) -> Result<(Core, DMatrix<f64>)> {
    let (l, n, r) = core.dims();
    if r > l * n {
        return Err(TtError::RankDeficient { core: k, ratio: 0.0 });
    }
    let (q, rf) = thin_qr(core.left_unfolding());
    let ratio = diag_ratio(&rf);
    if ratio < RANK_TOL {
        return Err(TtError::RankDeficient { core: k, ratio });
    }
    Ok((Core::from_left_unfolding(&q, l, n), rf))
}

/// QR of a transposed right unfolding: `U^R = R^T Q^T`. Returns `(Q^T core, R)`.
pub(crate) fn right_qr(core: &Core, k: usize) -> Result<(Core, DMatrix<f64>)> {
    let (l, n, r) = core.dims();
    if l > n * r {
        return Err(TtError::RankDeficient { core: k, ratio: 0.0 });
    }
    let (q, rf) = thin_qr(core.right_unfolding().transpose());
    let ratio = diag_ratio(&rf);
    if ratio < RANK_TOL {
        return Err(TtError::RankDeficient { core: k, ratio });
    }
    Ok((Core::from_right_unfolding(&q.transpose(), n, r), rf))
}

/// `mu`-orthogonalization (0-based `mu`): cores before `mu` become
/// left-orthogonal, cores after `mu` right-orthogonal. The represented
/// tensor is unchanged.
pub fn mu_orthogonalize(x: &TtTensor, mu: usize) -> Result<TtTensor> {
    let d = x.order();
    assert!(mu < d, "mu out of range");
    let mut cores = x.cores().to_vec();
    for k in 0..mu {
        let (q, r) = left_qr(&cores[k], k)?;
        cores[k] = q;
        cores[k + 1] = cores[k + 1].mul_left(&r);
    }
    for k in (mu + 1..d).rev() {
        let (q, r) = right_qr(&cores[k], k)?;
        cores[k] = q;
        cores[k - 1] = cores[k - 1].mul_right(&r.transpose());
    }
    TtTensor::with_orth(cores, Orthogonality::for_mu(mu, d))
}

/// Right-orthogonalized cores of a left-orthogonal decomposition together
/// with the triangular factors linking the two.
///
/// With tall right interfaces, `X_{>=k+1} = X~_{>=k+1} R_k` where
/// `X~` is built from the right-orthogonal cores. `r[k]` is the factor on
/// the bond between cores `k` and `k+1` (0-based), of size `r_{k+1}`.
#[derive(Clone, Debug)]
pub struct RightOrthFactors {
    pub cores: Vec<Core>,
    pub r: Vec<DMatrix<f64>>,
}

impl RightOrthFactors {
    /// Largest condition number among the `R_k` (2-norm).
    pub fn max_condition(&self) -> f64 {
        self.r
            .iter()
            .map(|m| {
                let s = crate::linalg::singular_values(m);
                let hi = s.max();
                let lo = s.min();
                if lo == 0.0 {
                    f64::INFINITY
                } else {
                    hi / lo
                }
            })
            .fold(1.0, f64::max)
    }
}

pub fn right_orthogonalize_with_r(x: &TtTensor) -> Result<RightOrthFactors> {
    let d = x.order();
    let mut cores = x.cores().to_vec();
    let mut rs = vec![DMatrix::zeros(0, 0); d - 1];
    for k in (1..d).rev() {
        let (q, r) = right_qr(&cores[k], k)?;
        cores[k] = q;
        cores[k - 1] = cores[k - 1].mul_right(&r.transpose());
        rs[k - 1] = r;
    }
    Ok(RightOrthFactors { cores, r: rs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::{random_tt, Shape};

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn left_orth_interfaces_are_orthonormal() {
        let x = random_tt(&Shape::new(vec![2, 2, 2], &[2, 2]).unwrap(), 1).unwrap();
        for k in 1..3 {
            let l = x.left_interface(k);
            let g = l.transpose() * &l;
            assert!(max_abs_diff(&g, &DMatrix::identity(g.nrows(), g.ncols())) < 1e-12);
        }
    }

    #[test]
    fn mu_orthogonalization_preserves_tensor() {
        let s = Shape::new(vec![3, 2, 3, 2], &[2, 3, 2]).unwrap();
        let x = random_tt(&s, 5).unwrap();
        let dense = x.to_dense().unwrap();
        for mu in 0..4 {
            let y = mu_orthogonalize(&x, mu).unwrap();
            assert!(y.to_dense().unwrap().sub(&dense).norm() < 1e-12 * dense.norm());
            for k in 0..mu {
                let u = y.core(k).left_unfolding();
                let g = u.transpose() * &u;
                assert!(max_abs_diff(&g, &DMatrix::identity(g.nrows(), g.nrows())) < 1e-12);
            }
            for k in mu + 1..4 {
                let u = y.core(k).right_unfolding();
                let g = &u * u.transpose();
                assert!(max_abs_diff(&g, &DMatrix::identity(g.nrows(), g.nrows())) < 1e-12);
            }
        }
        let round = mu_orthogonalize(&mu_orthogonalize(&x, 0).unwrap(), 3).unwrap();
        assert!(round.to_dense().unwrap().sub(&dense).norm() < 1e-12 * dense.norm());
    }

    #[test]
    fn right_factors_link_interfaces() {
        let x = random_tt(&Shape::new(vec![2, 2, 2], &[2, 2]).unwrap(), 9).unwrap();
        let f = right_orthogonalize_with_r(&x).unwrap();
        for k in 0..2 {
            let r = &f.r[k];
            for i in 0..r.nrows() {
                for j in 0..i {
                    assert_eq!(r[(i, j)], 0.0);
                }
            }
            let xt = super::super::right_interface(&f.cores[k + 1..]);
            let xr = x.right_interface(k + 1);
            assert!(max_abs_diff(&xr, &(&xt * r)) < 1e-12);
            let g = xt.transpose() * &xt;
            assert!(max_abs_diff(&g, &DMatrix::identity(g.nrows(), g.nrows())) < 1e-12);
        }
        let y = TtTensor::from_cores(f.cores.clone()).unwrap();
        assert!(y.to_dense().unwrap().sub(&x.to_dense().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn two_core_case() {
        let x = random_tt(&Shape::new(vec![3, 3], &[2]).unwrap(), 2).unwrap();
        let f = right_orthogonalize_with_r(&x).unwrap();
        assert_eq!(f.r.len(), 1);
        assert!(f.r[0].determinant().abs() > 1e-10);
    }

    #[test]
    fn rank_deficient_core_detected() {
        let s = Shape::new(vec![2, 2, 2], &[2, 2]).unwrap();
        let mut x = random_tt(&s, 4).unwrap();
        // duplicate a column of the middle core's left unfolding
        let c = &mut x.cores_mut()[1];
        for a in 0..2 {
            for i in 0..2 {
                let v = c.get(a, i, 0);
                c.set(a, i, 1, v);
            }
        }
        assert!(matches!(mu_orthogonalize(&x, 2), Err(TtError::RankDeficient { .. })));
    }
}
