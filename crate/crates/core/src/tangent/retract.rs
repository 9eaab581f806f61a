use std::sync::Arc;

use super::project::{check_modes, project_tt};
use super::{Param, TangentVector, TtPoint};
use crate::error::Result;
use crate::tt::{tt_round_exact, Core, TtTensor};

/// Block cores of `x_scale * X + t * V` with interior ranks `2 r`:
/// `[U_1, t V_1]`, `[[U_k, t V_k], [0, W_k]]`, `[[x_scale U_d + t V_d], [W_d]]`,
/// where `W` are the cores following each variation in the parametrization.
fn block_cores(v: &TangentVector, t: f64, x_scale: f64) -> Vec<Core> {
    let p = v.base();
    let d = p.order();
    let right = match v.param() {
        Param::First => p.cores(),
        Param::Gauged => p.tilde_cores(),
    };
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let u = p.core(k);
        let dv = v.core(k);
        let w = &right[k];
        let (l, n, r) = u.dims();
        let core = if k == 0 {
            Core::from_fn(1, n, 2 * r, |_, i, b| if b < r { u.get(0, i, b) } else { t * dv.get(0, i, b - r) })
        } else if k == d - 1 {
            Core::from_fn(2 * l, n, 1, |a, i, _| {
                if a < l {
                    x_scale * u.get(a, i, 0) + t * dv.get(a, i, 0)
                } else {
                    w.get(a - l, i, 0)
                }
            })
        } else {
            Core::from_fn(2 * l, n, 2 * r, |a, i, b| match (a < l, b < r) {
                (true, true) => u.get(a, i, b),
                (true, false) => t * dv.get(a, i, b - r),
                (false, true) => 0.0,
                (false, false) => w.get(a - l, i, b - r),
            })
        };
        out.push(core);
    }
    out
}

/// The tangent vector as a TT tensor of interior ranks `2 r`.
pub fn tangent_to_tt(v: &TangentVector) -> TtTensor {
    TtTensor::from_cores(block_cores(v, 1.0, 0.0)).expect("block cores are consistent")
}

/// TT-SVD retraction `R_X(t V)`: rounds the rank-`2r` sum `X + t V` back to
/// exactly the ranks of `X`. A rank-deficient result is an error.
pub fn retract(v: &TangentVector, t: f64) -> Result<TtTensor> {
    let p = v.base();
    if t == 0.0 {
        return Ok(p.tensor().clone());
    }
    let sum = TtTensor::from_cores(block_cores(v, t, 1.0))?;
    let ranks = p.ranks();
    tt_round_exact(&sum, &ranks[1..ranks.len() - 1])
}

/// Vector transport by projection onto the tangent space at `to`.
pub fn transport(to: &Arc<TtPoint>, v: &TangentVector) -> Result<TangentVector> {
    check_modes(to, v.base().modes())?;
    if Arc::ptr_eq(to, v.base()) {
        return Ok(v.to_gauged());
    }
    project_tt(to, &tangent_to_tt(v))
}
