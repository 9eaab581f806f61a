//! Tangent spaces of the fixed-rank manifold.
//!
//! A tangent vector at `X = [U_1, ..., U_d]` (left-orthogonal) is stored by
//! its variational cores in one of two parametrizations:
//!
//! * [`Param::First`]: `V = sum_k [U_1 .. U_{k-1}, dV_k, U_{k+1} .. U_d]`
//! * [`Param::Gauged`]: the same with the right-orthogonalized cores `U~`
//!   after position `k`. Here the components are mutually orthogonal and the
//!   inner product is the sum of core inner products.
//!
//! All cores but the last satisfy the gauge condition `(dV_k^L)^T U_k^L = 0`.

mod interfaces;
pub(crate) mod kernels;
pub(crate) mod project;
mod retract;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TtError};
use crate::sparse::SparseTensor;
use crate::tt::{mu_orthogonalize, right_orthogonalize_with_r, Core, DenseTensor, Orthogonality, RightOrthFactors, TtTensor};

pub use interfaces::{variational_interfaces, VariationalInterfaces};
pub use project::{project, project_dense, project_sparse, project_tt};
pub use retract::{retract, tangent_to_tt, transport};

/// Relative gauge tolerance: `||dV^T U|| <= GAUGE_TOL ||dV|| ||U||`.
pub const GAUGE_TOL: f64 = 1e-8;

/// Condition number of an `R_k` beyond which the base point is rebuilt.
pub const R_CONDITION_LIMIT: f64 = 1e12;

/// A point on the manifold: a left-orthogonal decomposition together with its
/// right-orthogonalized cores and the factors `R_k` linking the two.
#[derive(Debug)]
pub struct TtPoint {
    x: TtTensor,
    right: RightOrthFactors,
    condition: f64,
}

impl TtPoint {
    /// Left-orthogonalizes `x` if needed and computes the right factors.
    pub fn new(x: &TtTensor) -> Result<Arc<TtPoint>> {
        let d = x.order();
        let left = if x.orth() == Orthogonality::Left { x.clone() } else { mu_orthogonalize(x, d - 1)? };
        let mut right = right_orthogonalize_with_r(&left)?;
        let mut condition = right.max_condition();
        let mut left = left;
        if condition > R_CONDITION_LIMIT {
            // one fresh orthogonalization from the caller's cores
            left = mu_orthogonalize(&TtTensor::from_cores(x.cores().to_vec())?, d - 1)?;
            right = right_orthogonalize_with_r(&left)?;
            condition = right.max_condition();
            if condition > R_CONDITION_LIMIT {
                log::warn!("base point is ill-conditioned: cond(R) = {condition:.3e}");
            }
        }
        Ok(Arc::new(TtPoint { x: left, right, condition }))
    }

    pub fn tensor(&self) -> &TtTensor {
        &self.x
    }
    pub fn order(&self) -> usize {
        self.x.order()
    }
    pub fn modes(&self) -> &[usize] {
        self.x.modes()
    }
    pub fn ranks(&self) -> Vec<usize> {
        self.x.ranks()
    }
    /// Left-orthogonal core `U_k`.
    pub fn core(&self, k: usize) -> &Core {
        self.x.core(k)
    }
    pub fn cores(&self) -> &[Core] {
        self.x.cores()
    }
    /// Right-orthogonal core `U~_k`.
    pub fn tilde(&self, k: usize) -> &Core {
        &self.right.cores[k]
    }
    pub fn tilde_cores(&self) -> &[Core] {
        &self.right.cores
    }
    /// `R` on the bond between cores `k` and `k+1`.
    pub fn r(&self, k: usize) -> &DMatrix<f64> {
        &self.right.r[k]
    }
    pub fn factors(&self) -> &RightOrthFactors {
        &self.right
    }
    /// Largest condition number of the `R_k`.
    pub fn r_condition(&self) -> f64 {
        self.condition
    }

    /// Entry values of `X` on the index set of `z`.
    pub fn values_at(&self, z: &SparseTensor) -> Vec<f64> {
        kernels::tt_values(self.cores(), z)
    }

    #[doc(hidden)]
    /// Replace a factor; only for mutation tests of the checking suite.
    pub fn with_corrupted_r(&self, k: usize, r: DMatrix<f64>) -> Arc<TtPoint> {
        let mut right = self.right.clone();
        right.r[k] = r;
        Arc::new(TtPoint { x: self.x.clone(), right, condition: self.condition })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    First,
    Gauged,
}

#[derive(Clone, Debug)]
pub struct TangentVector {
    base: Arc<TtPoint>,
    param: Param,
    cores: Vec<Core>,
}

fn gauge_violation(dv: &Core, u: &Core) -> f64 {
    (dv.left_unfolding().transpose() * u.left_unfolding()).norm()
}

/// Build a tangent vector from variational cores. With `enforce`, the gauge
/// projector is applied to cores `0..d-1`; otherwise violations are errors.
pub fn make_tangent(base: &Arc<TtPoint>, mut cores: Vec<Core>, param: Param, enforce: bool) -> Result<TangentVector> {
    let d = base.order();
    if cores.len() != d {
        return Err(TtError::ShapeMismatch(format!("{} cores for order {d}", cores.len())));
    }
    for (k, c) in cores.iter().enumerate() {
        if c.dims() != base.core(k).dims() {
            return Err(TtError::ShapeMismatch(format!(
                "core {k} has extents {:?}, expected {:?}",
                c.dims(),
                base.core(k).dims()
            )));
        }
    }
    let scale = cores.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for k in 0..d - 1 {
        if enforce {
            cores[k] = cores[k].project_out(&base.core(k).left_unfolding());
        } else {
            let violation = gauge_violation(&cores[k], base.core(k));
            let tolerance = GAUGE_TOL * scale * base.core(k).norm();
            if violation > tolerance {
                return Err(TtError::GaugeViolation { core: k, violation, tolerance });
            }
        }
    }
    Ok(TangentVector { base: Arc::clone(base), param, cores })
}

impl TangentVector {
    pub fn zero(base: &Arc<TtPoint>) -> TangentVector {
        let cores = base.cores().iter().map(|c| Core::zeros(c.left(), c.mode(), c.right())).collect();
        TangentVector { base: Arc::clone(base), param: Param::Gauged, cores }
    }

    /// Random gauged tangent vector with i.i.d. normal entries before gauge projection.
    pub fn random<R: Rng + ?Sized>(base: &Arc<TtPoint>, rng: &mut R) -> TangentVector {
        let cores = base
            .cores()
            .iter()
            .map(|c| Core::from_fn(c.left(), c.mode(), c.right(), |_, _, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        make_tangent(base, cores, Param::Gauged, true).expect("shapes match the base")
    }

    /// The vector `X` itself, which is tangent at `X`.
    pub fn position(base: &Arc<TtPoint>) -> TangentVector {
        let mut v = TangentVector::zero(base);
        v.param = Param::First;
        let last = base.order() - 1;
        v.cores[last] = base.core(last).clone();
        v
    }

    pub(crate) fn from_parts(base: Arc<TtPoint>, param: Param, cores: Vec<Core>) -> TangentVector {
        TangentVector { base, param, cores }
    }

    pub fn base(&self) -> &Arc<TtPoint> {
        &self.base
    }
    pub fn param(&self) -> Param {
        self.param
    }
    pub fn cores(&self) -> &[Core] {
        &self.cores
    }
    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }
    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    pub fn same_base(&self, other: &TangentVector) -> bool {
        Arc::ptr_eq(&self.base, &other.base)
    }

    /// Largest gauge violation `||dV_k^T U_k|| / (||U_k|| max_j ||dV_j||)` over cores `0..d-1`.
    pub fn gauge_error(&self) -> f64 {
        let d = self.base.order();
        let scale = self.cores.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        (0..d - 1)
            .map(|k| {
                let v = gauge_violation(&self.cores[k], self.base.core(k));
                v / (scale * self.base.core(k).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Error with the worst core when [`gauge_error`](Self::gauge_error) exceeds [`GAUGE_TOL`].
    pub fn check_gauge(&self) -> Result<()> {
        let d = self.base.order();
        let scale = self.cores.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 || self.param == Param::First {
            return Ok(());
        }
        for k in 0..d - 1 {
            let v = gauge_violation(&self.cores[k], self.base.core(k));
            let violation = v / (scale * self.base.core(k).norm());
            if violation > GAUGE_TOL {
                return Err(TtError::GaugeViolation { core: k, violation, tolerance: GAUGE_TOL });
            }
        }
        Ok(())
    }

    /// Re-apply the gauge projector to every core but the last.
    pub fn enforce_gauge(&self) -> TangentVector {
        let mut out = self.clone();
        for k in 0..self.base.order() - 1 {
            out.cores[k] = out.cores[k].project_out(&self.base.core(k).left_unfolding());
        }
        out
    }

    /// Convert to the gauged parametrization: `dV~_k^L = dV_k^L R_k^T`.
    pub fn to_gauged(&self) -> TangentVector {
        if self.param == Param::Gauged {
            return self.clone();
        }
        let d = self.base.order();
        let mut cores = self.cores.clone();
        for (k, c) in cores.iter_mut().enumerate().take(d - 1) {
            *c = c.mul_right(&self.base.r(k).transpose());
        }
        TangentVector { base: Arc::clone(&self.base), param: Param::Gauged, cores }
    }

    /// Convert to the first parametrization: `dV_k^L = dV~_k^L R_k^{-T}`.
    pub fn to_first(&self) -> Result<TangentVector> {
        if self.param == Param::First {
            return Ok(self.clone());
        }
        let d = self.base.order();
        let mut cores = self.cores.clone();
        for (k, c) in cores.iter_mut().enumerate().take(d - 1) {
            let m = c.left_unfolding();
            // X R^T = M  <=>  R X^T = M^T
            let xt = self.base.r(k).solve_upper_triangular(&m.transpose()).ok_or(TtError::RankDeficient {
                core: k,
                ratio: 0.0,
            })?;
            *c = Core::from_left_unfolding(&xt.transpose(), c.left(), c.mode());
        }
        Ok(TangentVector { base: Arc::clone(&self.base), param: Param::First, cores })
    }

    pub fn to_param(&self, param: Param) -> Result<TangentVector> {
        match param {
            Param::First => self.to_first(),
            Param::Gauged => Ok(self.to_gauged()),
        }
    }

    /// Euclidean inner product of the represented tensors.
    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        if !self.same_base(other) {
            return Err(TtError::MismatchedBase);
        }
        let a = self.to_gauged();
        let b = other.to_gauged();
        Ok(a.cores.iter().zip(&b.cores).map(|(x, y)| x.dot(y)).sum())
    }

    pub fn norm(&self) -> f64 {
        let g = self.to_gauged();
        g.cores.iter().map(|c| c.dot(c)).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> TangentVector {
        let mut out = self.clone();
        out.cores.iter_mut().for_each(|c| c.scale(alpha));
        out
    }

    /// `self += alpha * other`, converting `other` to this parametrization.
    pub fn axpy(&mut self, alpha: f64, other: &TangentVector) -> Result<()> {
        if !self.same_base(other) {
            return Err(TtError::MismatchedBase);
        }
        let o = other.to_param(self.param)?;
        for (c, oc) in self.cores.iter_mut().zip(&o.cores) {
            c.axpy(alpha, oc);
        }
        Ok(())
    }

    /// `alpha * self + beta * other` in the gauged parametrization.
    pub fn lincomb(alpha: f64, a: &TangentVector, beta: f64, b: &TangentVector) -> Result<TangentVector> {
        let mut out = a.to_gauged().scaled(alpha);
        out.axpy(beta, b)?;
        Ok(out)
    }

    /// The component with only core `k` kept (an element of the `k`-th
    /// orthogonal subspace when gauged).
    pub fn component(&self, k: usize) -> TangentVector {
        let mut out = TangentVector::zero(&self.base);
        out.param = self.param;
        out.cores[k] = self.cores[k].clone();
        out
    }

    /// Entry values on the index set of `z` (no densification).
    pub fn values_at(&self, z: &SparseTensor) -> Vec<f64> {
        let right = match self.param {
            Param::First => self.base.cores(),
            Param::Gauged => self.base.tilde_cores(),
        };
        kernels::tangent_values(self.base.cores(), right, &self.cores, z)
    }

    pub fn to_tt(&self) -> TtTensor {
        tangent_to_tt(self)
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        self.to_tt().to_dense()
    }
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    #[test]
    fn zero_vector() {
        let p = point(&[2, 3, 2], &[2, 2], 1);
        let z = TangentVector::zero(&p);
        assert_eq!(z.norm(), 0.0);
        assert_eq!(z.inner(&tangent(&p, 2)).unwrap(), 0.0);
        assert_eq!(z.to_first().unwrap().to_gauged().norm(), 0.0);
    }

    #[test]
    fn position_densifies_to_x() {
        let p = point(&[2, 3, 2], &[2, 2], 3);
        let v = TangentVector::position(&p);
        let x = p.tensor().to_dense().unwrap();
        assert!(v.to_dense().unwrap().sub(&x).norm() < 1e-13);
        assert!((v.norm() - x.norm()).abs() < 1e-12);
    }

    #[test]
    fn densify_matches_direct_sum() {
        let p = point(&[2, 2, 2], &[2, 2], 4);
        let v = tangent(&p, 5);
        assert!(v.gauge_error() < 1e-13, "{}", v.gauge_error());
        let a = v.to_dense().unwrap();
        let b = sum_formula(&v);
        assert!(a.sub(&b).norm() < 1e-12 * b.norm());
        let f = v.to_first().unwrap();
        let c = sum_formula(&f);
        assert!(c.sub(&b).norm() < 1e-11 * b.norm());
    }

    #[test]
    fn conversion_round_trip() {
        let p = point(&[3, 2, 3, 2], &[2, 3, 2], 6);
        let v = tangent(&p, 7);
        let back = v.to_first().unwrap().to_gauged();
        for (a, b) in v.cores().iter().zip(back.cores()) {
            let mut diff = a.clone();
            diff.axpy(-1.0, b);
            assert!(diff.norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn inner_matches_dense() {
        let p = point(&[3, 3, 3, 3], &[2, 2, 2], 8);
        let v = tangent(&p, 9);
        let w = tangent(&p, 10).to_first().unwrap();
        let dense = v.to_dense().unwrap().dot(&w.to_dense().unwrap());
        let fast = v.inner(&w).unwrap();
        assert!((dense - fast).abs() < 1e-10 * dense.abs().max(1.0));
        assert!(v.inner(&v).unwrap() > 0.0);
    }

    #[test]
    fn components_are_orthogonal() {
        let p = point(&[2, 3, 3, 2], &[2, 2, 2], 11);
        let v = tangent(&p, 12);
        let w = tangent(&p, 13);
        for j in 0..4 {
            for k in 0..4 {
                if j != k {
                    let a = v.component(j).to_dense().unwrap();
                    let b = w.component(k).to_dense().unwrap();
                    assert!(a.dot(&b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gauge_violation_reported_and_enforced() {
        let p = point(&[2, 3, 2], &[2, 2], 14);
        let cores: Vec<Core> = p.cores().to_vec();
        assert!(matches!(
            make_tangent(&p, cores.clone(), Param::First, false),
            Err(TtError::GaugeViolation { core: 0, .. })
        ));
        let v = make_tangent(&p, cores, Param::First, true).unwrap();
        assert!(v.gauge_error() < 1e-13, "{}", v.gauge_error());
        let again = v.enforce_gauge();
        for (a, b) in v.cores().iter().zip(again.cores()) {
            let mut diff = a.clone();
            diff.axpy(-1.0, b);
            assert!(diff.norm() < 1e-14);
        }
    }

    #[test]
    fn mismatched_base_rejected() {
        let p = point(&[2, 3, 2], &[2, 2], 15);
        let q = point(&[2, 3, 2], &[2, 2], 15);
        assert!(matches!(tangent(&p, 1).inner(&tangent(&q, 1)), Err(TtError::MismatchedBase)));
    }

    #[test]
    fn sparse_values_match_dense() {
        let p = point(&[3, 2, 3], &[2, 2], 16);
        let v = tangent(&p, 17);
        let dense = v.to_dense().unwrap();
        let z = SparseTensor::new(p.modes(), vec![vec![0, 1, 2], vec![2, 0, 1], vec![1, 1, 1]], vec![0.0; 3]).unwrap();
        for param in [Param::Gauged, Param::First] {
            let vals = v.to_param(param).unwrap().values_at(&z);
            for (t, (idx, _)) in z.iter().enumerate() {
                assert!((vals[t] - dense.get(idx)).abs() < 1e-12);
            }
        }
        let xv = p.values_at(&z);
        let xd = p.tensor().to_dense().unwrap();
        for (t, (idx, _)) in z.iter().enumerate() {
            assert!((xv[t] - xd.get(idx)).abs() < 1e-13);
        }
    }
}
