//! Dense numerical oracles for the differential identities behind the
//! Hessian formulas. Everything here materializes tensors and is meant for
//! desk-scale verification only.
//!
//! The tangent projector is rebuilt from orthonormal bases of the
//! flattenings of the dense tensor, independently of the TT kernels.
//! Derivatives are central differences along the curve
//! `c(t) = [U_1 + t dV_1, ..., U_d + t dV_d]` (first parametrization),
//! whose velocity at `t = 0` is `V`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::{kron_identity_left, svd_sorted};
use crate::tangent::TangentVector;
use crate::tt::{left_interface, right_interface, Core, DenseTensor, TtTensor};

/// Tangent projector of a dense point built from SVD bases.
#[derive(Clone, Debug)]
pub struct DenseProjector {
    modes: Vec<usize>,
    /// Column-space bases of the flattenings, `left[k]` over the first `k` modes.
    left: Vec<DMatrix<f64>>,
    /// Row-space bases, `right[k]` over modes `k..d` (tall).
    right: Vec<DMatrix<f64>>,
}

impl DenseProjector {
    pub fn at(x: &TtTensor) -> Result<DenseProjector> {
        DenseProjector::from_dense(&x.to_dense()?, &x.ranks())
    }

    /// `ranks` is the full rank vector `r_0..=r_d` of the point.
    pub fn from_dense(x: &DenseTensor, ranks: &[usize]) -> Result<DenseProjector> {
        let d = x.order();
        let mut left = vec![DMatrix::from_element(1, 1, 1.0)];
        let mut right = vec![DMatrix::from_element(1, 1, 1.0)];
        for mu in 1..d {
            let (u, _, vt) = svd_sorted(x.flatten(mu)?);
            left.push(u.columns(0, ranks[mu]).into_owned());
            right.push(vt.rows(0, ranks[mu]).transpose());
        }
        Ok(DenseProjector { modes: x.modes().to_vec(), left, right })
    }

    /// `P^k Z` (0-based `k`): `[(I (x) Pi_k) - Pi_{k+1}] Z^{<k+1>} Pi~_{k+1}`,
    /// and `(I (x) Pi_{d-1}) Z` for the last core.
    pub fn component(&self, k: usize, z: &DenseTensor) -> DenseTensor {
        let d = self.modes.len();
        let ql = &self.left[k];
        let pl = kron_identity_left(self.modes[k], &(ql * ql.transpose()));
        let out = if k + 1 < d {
            let zf = z.flatten(k + 1).expect("valid flattening");
            let qn = &self.left[k + 1];
            let qr = &self.right[k + 1];
            (pl - qn * qn.transpose()) * zf * (qr * qr.transpose())
        } else {
            pl * DMatrix::from_column_slice(z.len(), 1, z.data())
        };
        DenseTensor::from_vec(&self.modes, out.as_slice().to_vec()).expect("same size")
    }

    pub fn apply(&self, z: &DenseTensor) -> DenseTensor {
        let mut total = DenseTensor::from_vec(&self.modes, vec![0.0; z.len()]).expect("same size");
        for k in 0..self.modes.len() {
            total = total.add(&self.component(k, z));
        }
        total
    }
}

fn curve_cores(v: &TangentVector, t: f64) -> Result<Vec<Core>> {
    let first = v.to_first()?;
    Ok(v.base()
        .cores()
        .iter()
        .zip(first.cores())
        .map(|(u, dv)| {
            let mut c = u.clone();
            c.axpy(t, dv);
            c
        })
        .collect())
}

/// The curve point `c(t)` as a dense tensor.
pub fn curve_point(v: &TangentVector, t: f64) -> Result<DenseTensor> {
    TtTensor::from_cores(curve_cores(v, t)?)?.to_dense()
}

fn central<F>(h: f64, f: F) -> Result<DenseTensor>
where
    F: Fn(f64) -> Result<DenseTensor>,
{
    let plus = f(h)?;
    let minus = f(-h)?;
    Ok(plus.sub(&minus).scaled(0.5 / h))
}

fn central_matrix<F>(h: f64, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> Result<DMatrix<f64>>,
{
    Ok((f(h)? - f(-h)?) / (2.0 * h))
}

fn projector_on_curve(v: &TangentVector, t: f64) -> Result<DenseProjector> {
    DenseProjector::from_dense(&curve_point(v, t)?, &v.base().ranks())
}

/// `(d/dt) P_{c(t)} Z` at `t = 0` by central differences.
pub fn projector_derivative_oracle(v: &TangentVector, z: &DenseTensor, h: f64) -> Result<DenseTensor> {
    central(h, |t| Ok(projector_on_curve(v, t)?.apply(z)))
}

/// `(d/dt) P^k_{c(t)} Z` at `t = 0` by central differences.
pub fn component_derivative_oracle(v: &TangentVector, k: usize, z: &DenseTensor, h: f64) -> Result<DenseTensor> {
    central(h, |t| Ok(projector_on_curve(v, t)?.component(k, z)))
}

/// Numeric derivative of the left interface `X_{<=k}` (first `k` cores).
pub fn left_interface_derivative(v: &TangentVector, k: usize, h: f64) -> Result<DMatrix<f64>> {
    central_matrix(h, |t| Ok(left_interface(&curve_cores(v, t)?[..k])))
}

/// Numeric derivative of the tall right interface over cores `k..d`.
pub fn right_interface_derivative(v: &TangentVector, k: usize, h: f64) -> Result<DMatrix<f64>> {
    central_matrix(h, |t| Ok(right_interface(&curve_cores(v, t)?[k..])))
}

fn col_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    let q = m.clone().qr().q();
    &q * q.transpose()
}

/// Numeric derivative of the orthogonal projector onto the column space of
/// `X_{<=k}` (equal to `X_{<=k} X_{<=k}^T` at the left-orthogonal base point).
pub fn left_projector_derivative(v: &TangentVector, k: usize, h: f64) -> Result<DMatrix<f64>> {
    central_matrix(h, |t| Ok(col_projector(&left_interface(&curve_cores(v, t)?[..k]))))
}

/// Numeric derivative of the orthogonal projector onto the column space of
/// the right interface over cores `k..d` (`X~ X~^T` at the base point).
pub fn right_projector_derivative(v: &TangentVector, k: usize, h: f64) -> Result<DMatrix<f64>> {
    central_matrix(h, |t| Ok(col_projector(&right_interface(&curve_cores(v, t)?[k..]))))
}
