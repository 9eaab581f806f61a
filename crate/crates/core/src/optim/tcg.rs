use serde::{Deserialize, Serialize};

use crate::error::{Result, TtError};
use crate::tangent::TangentVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TcgStatus {
    Converged,
    /// The next iterate would have left the trust region.
    Boundary,
    NegativeCurvature,
    MaxInner,
}

impl TcgStatus {
    /// The step was cut at the trust-region boundary.
    pub fn hit_boundary(self) -> bool {
        matches!(self, TcgStatus::Boundary | TcgStatus::NegativeCurvature)
    }
}

#[derive(Clone, Debug)]
pub struct TcgResult {
    pub step: TangentVector,
    /// `H[step]`, accumulated alongside the step.
    pub hstep: TangentVector,
    pub status: TcgStatus,
    pub inner_iters: usize,
}

/// Steihaug-Toint truncated CG for `min <g, s> + 1/2 <H s, s>`, `|s| <= radius`.
/// Stops when `|r| <= |g| min(|g|^theta, kappa)`.
pub fn tcg_solve<H>(h: H, g: &TangentVector, radius: f64, kappa: f64, theta: f64, max_inner: usize) -> Result<TcgResult>
where
    H: Fn(&TangentVector) -> Result<TangentVector>,
{
    let base = g.base();
    let mut eta = TangentVector::zero(base);
    let mut heta = TangentVector::zero(base);
    let mut r = g.to_gauged();
    let r0 = r.norm();
    if r0 == 0.0 {
        return Ok(TcgResult { step: eta, hstep: heta, status: TcgStatus::Converged, inner_iters: 0 });
    }
    let stop = r0 * r0.powf(theta).min(kappa);
    let mut rr = r0 * r0;
    let mut delta = r.scaled(-1.0);
    // |eta|^2, <eta, delta>, |delta|^2
    let (mut ee, mut ed, mut dd) = (0.0, 0.0, rr);
    let radius2 = radius * radius;

    for j in 1..=max_inner {
        let hd = h(&delta)?;
        hd.check_gauge()?;
        if !hd.same_base(g) {
            return Err(TtError::MismatchedBase);
        }
        let dhd = delta.inner(&hd)?;
        let alpha = rr / dhd;
        let ee_new = ee + 2.0 * alpha * ed + alpha * alpha * dd;
        if dhd <= 0.0 || ee_new >= radius2 {
            let tau = (-ed + (ed * ed + dd * (radius2 - ee)).sqrt()) / dd;
            eta.axpy(tau, &delta)?;
            heta.axpy(tau, &hd)?;
            let status = if dhd <= 0.0 { TcgStatus::NegativeCurvature } else { TcgStatus::Boundary };
            return Ok(TcgResult { step: eta, hstep: heta, status, inner_iters: j });
        }
        ee = ee_new;
        eta.axpy(alpha, &delta)?;
        heta.axpy(alpha, &hd)?;
        r.axpy(alpha, &hd)?;
        let rr_new = r.inner(&r)?;
        if rr_new.sqrt() <= stop {
            return Ok(TcgResult { step: eta, hstep: heta, status: TcgStatus::Converged, inner_iters: j });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        delta = TangentVector::lincomb(-1.0, &r, beta, &delta)?;
        ed = beta * (ed + alpha * dd);
        dd = rr + beta * beta * dd;
    }
    Ok(TcgResult { step: eta, hstep: heta, status: TcgStatus::MaxInner, inner_iters: max_inner })
}
