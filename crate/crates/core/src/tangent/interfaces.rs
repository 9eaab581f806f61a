use nalgebra::DMatrix;

use super::TangentVector;
use crate::error::Result;
use crate::tt::{check_desk_cap, Core};

/// Explicit variational interface matrices of a tangent vector (desk scale).
///
/// `le[k]` spans the first `k` cores (`N_{<k} x r_k`, `le[0] = 0`), `ge[k]`
/// the cores from `k` on in the tall convention (`N_{>=k} x r_k`,
/// `ge[d] = 0`). They are the directional derivatives of the interface
/// matrices of `X` along `V`.
#[derive(Clone, Debug)]
pub struct VariationalInterfaces {
    pub le: Vec<DMatrix<f64>>,
    pub ge: Vec<DMatrix<f64>>,
}

/// Builds the variational interfaces from the first parametrization of `v`
/// (converting if needed):
///
/// `V_{<=k} = (I (x) V_{<=k-1}) U_k^L + (I (x) X_{<=k-1}) dV_k^L`
/// and the mirrored recursion from the right.
pub fn variational_interfaces(v: &TangentVector) -> Result<VariationalInterfaces> {
    let p = v.base();
    check_desk_cap(p.modes())?;
    let first = v.to_first()?;
    let d = p.order();
    let u = p.cores();
    let dv = first.cores();

    let mut le = Vec::with_capacity(d + 1);
    let mut x = DMatrix::from_element(1, 1, 1.0);
    le.push(DMatrix::zeros(1, 1));
    for k in 0..d {
        le.push(extend_left(&le[k], &u[k]) + extend_left(&x, &dv[k]));
        x = extend_left(&x, &u[k]);
    }

    let mut ge = vec![DMatrix::zeros(1, 1); d + 1];
    let mut x = DMatrix::from_element(1, 1, 1.0);
    for k in (0..d).rev() {
        ge[k] = extend_right(&u[k], &ge[k + 1]) + extend_right(&dv[k], &x);
        x = extend_right(&u[k], &x);
    }
    Ok(VariationalInterfaces { le, ge })
}

/// `(I (x) m) C^L`: rows `(row of m, i)` hold `m_row * C(i)`.
pub(crate) fn extend_left(m: &DMatrix<f64>, core: &Core) -> DMatrix<f64> {
    let rows = m.nrows();
    let mut out = DMatrix::zeros(rows * core.mode(), core.right());
    for i in 0..core.mode() {
        out.view_mut((i * rows, 0), (rows, core.right())).copy_from(&(m * core.slice(i)));
    }
    out
}

/// Tall right extension: rows `(i, row of m)` hold `(C(i) m_row^T)^T`.
pub(crate) fn extend_right(core: &Core, m: &DMatrix<f64>) -> DMatrix<f64> {
    let rest = m.nrows();
    let n = core.mode();
    let mut out = DMatrix::zeros(n * rest, core.left());
    for i in 0..n {
        let block = m * core.slice(i).transpose();
        for j in 0..rest {
            out.row_mut(i + n * j).copy_from(&block.row(j));
        }
    }
    out
}
