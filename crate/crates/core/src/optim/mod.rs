//! Solvers on the fixed-rank manifold: Riemannian trust regions with
//! truncated CG (exact or finite-difference Hessian), Riemannian nonlinear
//! CG, and alternating least squares for completion.

mod als;
mod runlog;
mod rcg;
mod rtr;
mod tcg;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ambient::AmbientVector;
use crate::error::{Result, TtError};
use crate::hessian::hess_apply;
use crate::tangent::{project, TangentVector, TtPoint};
use crate::tt::TtTensor;

pub use self::als::{als_minimize, AlsConfig};
pub use self::runlog::{LogRow, RunLog, StepType, CSV_HEADER};
pub use self::rcg::{rcg_minimize, BetaRule, CgConfig};
pub use self::rtr::{rtr_minimize, HessianMode};
pub use self::tcg::{tcg_solve, TcgResult, TcgStatus};

/// A smooth `f` on the ambient space, restricted to the manifold.
pub trait Problem: Sync {
    fn cost(&self, x: &TtPoint) -> Result<f64>;
    /// Euclidean gradient `df(X)`.
    fn egrad(&self, x: &TtPoint) -> Result<AmbientVector>;
    /// Euclidean Hessian `d2f(X)[V]` at the base point of `v`.
    fn ehess(&self, v: &TangentVector) -> Result<AmbientVector>;
    fn test_cost(&self, _x: &TtPoint) -> Option<f64> {
        None
    }
    /// Cheap guess for the step along `d`, used to seed line searches.
    fn line_guess(&self, _egrad: &AmbientVector, _d: &TangentVector) -> Option<f64> {
        None
    }
}

/// Euclidean and Riemannian gradient at `x`.
pub fn riemannian_grad<P: Problem + ?Sized>(problem: &P, x: &Arc<TtPoint>) -> Result<(AmbientVector, TangentVector)> {
    let eg = problem.egrad(x)?;
    let g = project(x, &eg)?;
    Ok((eg, g))
}

/// Riemannian Hessian applied to `v`, given the Euclidean gradient at its base.
pub fn riemannian_hess<P: Problem + ?Sized>(problem: &P, v: &TangentVector, egrad: &AmbientVector) -> Result<TangentVector> {
    hess_apply(v, egrad, &problem.ehess(v)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustRegionConfig {
    pub initial_radius: f64,
    pub max_radius: f64,
    /// Acceptance threshold on `rho`.
    pub rho_prime: f64,
    /// Inner stopping rule `|r| <= |g| min(|g|^theta, kappa)`.
    pub kappa: f64,
    pub theta: f64,
    pub max_iters: usize,
    /// Inner iteration cap; defaults to the manifold dimension.
    pub max_inner: Option<usize>,
    /// Absolute gradient tolerance; overrides `grad_tol_rel`.
    pub grad_tol: Option<f64>,
    /// Converged once `|grad| < grad_tol_rel * max(1, |grad_0|)`.
    pub grad_tol_rel: f64,
    pub max_time_s: Option<f64>,
    /// Finite-difference step relative to `|X| / |V|`.
    pub fd_step: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            initial_radius: 100.0,
            max_radius: 100.0 * 2048.0,
            rho_prime: 0.1,
            kappa: 0.1,
            theta: 1.0,
            max_iters: 200,
            max_inner: None,
            grad_tol: None,
            grad_tol_rel: 1e-6,
            max_time_s: None,
            fd_step: 1e-6,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_radius > 0.0 && self.initial_radius <= self.max_radius) {
            return Err(TtError::Config(format!(
                "need 0 < initial_radius ({}) <= max_radius ({})",
                self.initial_radius, self.max_radius
            )));
        }
        if !(0.0..0.25).contains(&self.rho_prime) {
            return Err(TtError::Config(format!("rho_prime {} outside [0, 0.25)", self.rho_prime)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0 && self.theta > 0.0) {
            return Err(TtError::Config("need 0 < kappa < 1 and theta > 0".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(TtError::Config("fd_step must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn tolerance(&self, g0: f64) -> f64 {
        self.grad_tol.unwrap_or(self.grad_tol_rel * g0.max(1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    GradTol,
    MaxIters,
    Time,
    /// No progress possible (line search or cost change exhausted).
    Stalled,
    Aborted(String),
}

/// Final iterate, log and termination status of one solver run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub x: TtTensor,
    pub log: RunLog,
    pub stop: StopReason,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::GradTol
    }
}
