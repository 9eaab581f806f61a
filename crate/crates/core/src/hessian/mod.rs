//! The Riemannian Hessian on the fixed-rank manifold:
//!
//! `Hess f(X)[V] = P_X(d2f(X)[V]) + P_X (D_V P_X) df(X)`.
//!
//! The second (Weingarten) term is split into the diagonal terms
//! `P^k (D_V P^k) Z` and the cross terms `P^i (D_V P^j) Z`, both evaluated
//! from a small set of matrix families computed in one pass over `Z`.

mod correction;
pub mod oracle;
mod products;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::ambient::AmbientVector;
use crate::error::{Result, TtError};
use crate::tangent::project::{check_modes, gauge_project};
use crate::tangent::{project, retract, transport, Param, TangentVector, TtPoint};
use crate::tt::Core;

pub use correction::{correction_cross, correction_diagonal, cross_term};
pub use products::{gram_right_tilde_v, three_products_dense, three_products_sparse, ThreeProducts};

/// Everything the correction formulas need for one `(X, V, Z)`.
#[derive(Clone, Debug)]
pub struct HessianWorkspace {
    /// First-parametrization cores of `V`.
    pub dv: Vec<Core>,
    pub a: Vec<Core>,
    pub b: Vec<Core>,
    pub c: Vec<Core>,
    /// `G_k = X~_{>k}^T V_{>k}` on each interior bond.
    pub g: Vec<DMatrix<f64>>,
    /// Gauged cores `dY_j` of the components `Y^j = P^j Z`.
    pub y: Vec<Core>,
}

impl HessianWorkspace {
    /// Sparse `Z` takes the single-pass kernel; dense and TT inputs use the
    /// explicit contraction (TT inputs are densified, desk scale only).
    pub fn new(v: &TangentVector, z: &AmbientVector) -> Result<HessianWorkspace> {
        let p = v.base();
        check_modes(p, z.modes())?;
        let first = v.to_first()?;
        let fam = match z {
            AmbientVector::Sparse(s) => three_products_sparse(&first, s)?,
            AmbientVector::Dense(t) => three_products_dense(&first, t)?,
            AmbientVector::Tt(t) => three_products_dense(&first, &t.to_dense()?)?,
        };
        let g = gram_right_tilde_v(&first)?;
        let y = gauge_project(p, &fam.a);
        Ok(HessianWorkspace { dv: first.into_cores(), a: fam.a, b: fam.b, c: fam.c, g, y })
    }

    /// `Y^j` as a tangent vector (only core `j` nonzero).
    pub fn component(&self, p: &Arc<TtPoint>, j: usize) -> TangentVector {
        let mut cores: Vec<Core> = self.y.iter().map(|c| Core::zeros(c.left(), c.mode(), c.right())).collect();
        cores[j] = self.y[j].clone();
        TangentVector::from_parts(Arc::clone(p), Param::Gauged, cores)
    }
}

fn as_tangent(p: &Arc<TtPoint>, cores: Vec<Core>) -> TangentVector {
    TangentVector::from_parts(Arc::clone(p), Param::Gauged, cores)
}

/// The Weingarten map `P_X (D_V P_X) Z`: diagonal plus cross terms.
pub fn weingarten(v: &TangentVector, z: &AmbientVector) -> Result<TangentVector> {
    let p = v.base();
    let ws = HessianWorkspace::new(v, z)?;
    let mut cores = correction_diagonal(p, &ws)?;
    for (c, x) in cores.iter_mut().zip(correction_cross(p, &ws)) {
        c.axpy(1.0, &x);
    }
    Ok(as_tangent(p, cores))
}

/// `P_X(ehess_v) + P_X (D_V P_X) egrad`.
pub fn hess_apply(v: &TangentVector, egrad: &AmbientVector, ehess_v: &AmbientVector) -> Result<TangentVector> {
    let p = v.base();
    let mut h = project(p, ehess_v)?;
    h.axpy(1.0, &weingarten(v, egrad)?)?;
    Ok(h)
}

/// Finite-difference Hessian: `(T(grad f(R_X(hV))) - grad f(X)) / h` with
/// projection transport back to `X`. `g0` is `grad f(X)`.
pub fn fd_hess_apply<F>(v: &TangentVector, g0: &TangentVector, grad: F, h: f64) -> Result<TangentVector>
where
    F: Fn(&Arc<TtPoint>) -> Result<TangentVector>,
{
    if h <= 0.0 {
        return Err(TtError::Config(format!("finite-difference step {h} must be positive")));
    }
    let p = v.base();
    if v.norm() == 0.0 {
        return Ok(TangentVector::zero(p));
    }
    let q = TtPoint::new(&retract(v, h)?)?;
    let gh = transport(p, &grad(&q)?)?;
    let mut diff = gh;
    diff.axpy(-1.0, g0)?;
    if diff.norm() == 0.0 {
        log::warn!("finite-difference step {h:e} too small: gradient difference vanished");
    }
    Ok(diff.scaled(1.0 / h))
}
