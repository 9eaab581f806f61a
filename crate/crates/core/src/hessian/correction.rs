//! Diagonal and cross terms of the curvature correction `P_X (D_V P_X) Z`.
//!
//! All outputs are cores in the gauged parametrization at the base point:
//! core `i` of the result is the matrix `D` in `(I (x) X_{<i}) D X~_{>i}^T`.

use nalgebra::DMatrix;

use super::HessianWorkspace;
use crate::error::{Result, TtError};
use crate::linalg::right_solve_upper;
use crate::tangent::TtPoint;
use crate::tt::Core;

fn gauge(p: &TtPoint, k: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let u = p.core(k).left_unfolding();
    m - &u * (u.transpose() * m)
}

fn to_core(p: &TtPoint, k: usize, m: &DMatrix<f64>) -> Core {
    let c = p.core(k);
    Core::from_left_unfolding(m, c.left(), c.mode())
}

/// `sum_k P^k (D_V P^k) Z`. For `k < d`:
///
/// `D_k = P_k B_k - dV_k^L (U_k^L)^T A_k + P_k (C_k - A_k G_k) R_k^{-1}`
///
/// with `P_k = I - U_k^L (U_k^L)^T`; for `k = d`, `D_d = B_d`.
pub fn correction_diagonal(p: &TtPoint, ws: &HessianWorkspace) -> Result<Vec<Core>> {
    let d = p.order();
    let mut out = Vec::with_capacity(d);
    for k in 0..d - 1 {
        let a = ws.a[k].left_unfolding();
        let b = ws.b[k].left_unfolding();
        let c = ws.c[k].left_unfolding();
        let u = p.core(k).left_unfolding();
        let dv = ws.dv[k].left_unfolding();
        let inner = c - &a * &ws.g[k];
        let solved = right_solve_upper(&inner, p.r(k)).ok_or(TtError::RankDeficient { core: k, ratio: 0.0 })?;
        let m = gauge(p, k, &b) - dv * (u.transpose() * &a) + gauge(p, k, &solved);
        out.push(to_core(p, k, &m));
    }
    out.push(ws.b[d - 1].clone());
    Ok(out)
}

/// `sum_{i != j} P^i (D_V P^j) Z`, accumulated in `O(d n r^3)`.
///
/// With `Y^j = P^j Z` (gauged cores `dY_j`):
/// * `j > i`: core `i` gains `dV_i^L Q_i`, `Q_i = sum_{j>i} (Y^j_{>i})^T X~_{>i}`;
/// * `j < i`: core `i` loses `P_i (I (x) T_{i-1}) U~_i^L` (no `P_i` for `i = d`),
///   `T_{i-1} = sum_{j<i} V_{<i}^T Y^j_{<i}`.
pub fn correction_cross(p: &TtPoint, ws: &HessianWorkspace) -> Vec<Core> {
    let d = p.order();
    let mut out: Vec<Core> = ws.dv.iter().map(|c| Core::zeros(c.left(), c.mode(), c.right())).collect();

    // right-to-left: Q_{i} = sum_n U_{i+1}(n) Q_{i+1} U~_{i+1}(n)^T + dY_{i+1}^R (U~_{i+1}^R)^T
    let mut q = DMatrix::<f64>::zeros(1, 1);
    for i in (0..d - 1).rev() {
        let m = i + 1;
        let u = p.core(m);
        let ut = p.tilde(m);
        let mut next = ws.y[m].right_unfolding() * ut.right_unfolding().transpose();
        if m + 1 < d {
            for n in 0..u.mode() {
                next += u.slice(n) * &q * ut.slice(n).transpose();
            }
        }
        q = next;
        out[i] = ws.dv[i].mul_right(&q);
    }

    // left-to-right: T_m = sum_n U_m(n)^T T_{m-1} U~_m(n) + dV_m^{L T} dY_m^L
    let mut t = DMatrix::<f64>::zeros(1, 1);
    for i in 1..d {
        let m = i - 1;
        let u = p.core(m);
        let ut = p.tilde(m);
        let mut next = ws.dv[m].left_unfolding().transpose() * ws.y[m].left_unfolding();
        if m > 0 {
            for n in 0..u.mode() {
                next += u.slice(n).transpose() * &t * ut.slice(n);
            }
        }
        t = next;
        let mut term = p.tilde(i).mul_left(&t);
        if i + 1 < d {
            term = to_core(p, i, &gauge(p, i, &term.left_unfolding()));
        }
        out[i].axpy(-1.0, &term);
    }
    out
}

/// The single cross term `P^i (D_V P^j) Z` for `i != j`; only core `i` of the
/// result is nonzero. Costs `O(|i - j| n r^3)`.
pub fn cross_term(p: &TtPoint, ws: &HessianWorkspace, i: usize, j: usize) -> Vec<Core> {
    assert_ne!(i, j, "cross terms need i != j");
    let d = p.order();
    let mut out: Vec<Core> = ws.dv.iter().map(|c| Core::zeros(c.left(), c.mode(), c.right())).collect();
    if j > i {
        // (Y^j_{>i})^T X~_{>i}, built from core j down to core i+1
        let mut q = ws.y[j].right_unfolding() * p.tilde(j).right_unfolding().transpose();
        for m in (i + 1..j).rev() {
            let u = p.core(m);
            let ut = p.tilde(m);
            let mut next = DMatrix::zeros(u.left(), ut.left());
            for n in 0..u.mode() {
                next += u.slice(n) * &q * ut.slice(n).transpose();
            }
            q = next;
        }
        out[i] = ws.dv[i].mul_right(&q);
    } else {
        // V_{<i}^T Y^j_{<i}, built from core j up to core i-1
        let mut t = ws.dv[j].left_unfolding().transpose() * ws.y[j].left_unfolding();
        for m in j + 1..i {
            let u = p.core(m);
            let ut = p.tilde(m);
            let mut next = DMatrix::zeros(u.right(), ut.right());
            for n in 0..u.mode() {
                next += u.slice(n).transpose() * &t * ut.slice(n);
            }
            t = next;
        }
        let mut term = p.tilde(i).mul_left(&t);
        if i + 1 < d {
            term = to_core(p, i, &gauge(p, i, &term.left_unfolding()));
        }
        term.scale(-1.0);
        out[i] = term;
    }
    out
}
