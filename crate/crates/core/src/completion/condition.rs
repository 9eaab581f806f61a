use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TtError};
use crate::optim::{riemannian_hess, Problem};
use crate::tangent::{make_tangent, Param, TangentVector, TtPoint};
use crate::tt::Core;

/// Eigenvalues below `POSITIVE_CUTOFF * lambda_max` count as zero.
const POSITIVE_CUTOFF: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanczosConfig {
    pub max_iter: usize,
    /// Ritz residuals below `tol * |lambda_max|` count as converged.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig { max_iter: 300, tol: 1e-8, seed: 0 }
    }
}

/// Extreme eigenvalues of the Riemannian Hessian on the tangent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimate {
    pub lambda_max: f64,
    /// Smallest eigenvalue above `1e-10 * lambda_max`.
    pub lambda_min_pos: f64,
    /// Smallest eigenvalue overall (full spectrum).
    pub lambda_min: f64,
    pub kappa: f64,
    pub iterations: usize,
    /// Ritz residuals of the pairs behind `lambda_max` and `lambda_min_pos`.
    pub residual_max: f64,
    pub residual_min_pos: f64,
    pub converged: bool,
}

fn summarize(evals: &[f64], residuals: &[f64], iterations: usize, tol: f64) -> ConditionEstimate {
    let (mut imax, mut imin) = (0, 0);
    for (i, &e) in evals.iter().enumerate() {
        if e > evals[imax] {
            imax = i;
        }
        if e < evals[imin] {
            imin = i;
        }
    }
    let lmax = evals[imax];
    let cutoff = POSITIVE_CUTOFF * lmax.abs();
    let ipos = evals
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > cutoff)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(imax);
    let lpos = evals[ipos];
    let scale = lmax.abs().max(f64::MIN_POSITIVE);
    ConditionEstimate {
        lambda_max: lmax,
        lambda_min_pos: lpos,
        lambda_min: evals[imin],
        kappa: if lpos > 0.0 { lmax / lpos } else { f64::INFINITY },
        iterations,
        residual_max: residuals[imax],
        residual_min_pos: residuals[ipos],
        converged: residuals[imax] <= tol * scale && residuals[ipos] <= tol * scale,
    }
}

/// Lanczos with full reorthogonalization on `T_X M`. Stops at an invariant
/// subspace, at the tangent-space dimension, or once both extreme Ritz pairs
/// have converged; otherwise fails with the residuals reached.
pub fn condition_estimate<P: Problem + ?Sized>(
    x: &Arc<TtPoint>,
    problem: &P,
    cfg: &LanczosConfig,
) -> Result<ConditionEstimate> {
    let est = lanczos_estimate(x, problem, cfg)?;
    if !est.converged {
        return Err(TtError::NoConvergence {
            iterations: est.iterations,
            residual: est.residual_max.max(est.residual_min_pos),
        });
    }
    Ok(est)
}

/// Same iteration as [`condition_estimate`], but an exhausted budget returns
/// the last Ritz estimate with `converged == false` instead of an error.
pub fn lanczos_estimate<P: Problem + ?Sized>(
    x: &Arc<TtPoint>,
    problem: &P,
    cfg: &LanczosConfig,
) -> Result<ConditionEstimate> {
    let egrad = problem.egrad(x)?;
    let hess = |v: &TangentVector| riemannian_hess(problem, v, &egrad);
    let dim = x.tensor().shape().manifold_dim();
    let max_iter = cfg.max_iter.min(dim).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q = TangentVector::random(x, &mut rng);
    q = q.scaled(1.0 / q.norm());
    let mut basis: Vec<TangentVector> = Vec::with_capacity(max_iter);
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut last = None;
    for m in 1..=max_iter {
        let mut w = hess(&q)?;
        let a = w.inner(&q)?;
        w.axpy(-a, &q)?;
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            w.axpy(-b, prev)?;
        }
        basis.push(q.clone());
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for u in &basis {
                let c = u.inner(&w)?;
                w.axpy(-c, u)?;
            }
        }
        alpha.push(a);
        let b = w.norm();

        let t = tridiagonal(&alpha, &beta);
        let eig = SymmetricEigen::new(t);
        let evals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let residuals: Vec<f64> = (0..m).map(|i| (b * eig.eigenvectors[(m - 1, i)]).abs()).collect();
        let est = summarize(&evals, &residuals, m, cfg.tol);
        let scale = est.lambda_max.abs().max(f64::MIN_POSITIVE);
        let breakdown = b <= 1e-13 * scale;
        if est.converged || breakdown || m == dim {
            return Ok(ConditionEstimate { converged: true, ..est });
        }
        last = Some(est);
        beta.push(b);
        q = w.scaled(1.0 / b);
    }
    Ok(last.expect("at least one iteration"))
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Dense reference: assembles the Hessian in an orthonormal basis of the
/// gauged tangent coordinates and returns all its eigenvalues (ascending)
/// with the same summary as [`condition_estimate`]. Desk scale only.
pub fn condition_dense<P: Problem + ?Sized>(x: &Arc<TtPoint>, problem: &P) -> Result<(Vec<f64>, ConditionEstimate)> {
    let basis = tangent_basis(x);
    let egrad = problem.egrad(x)?;
    let n = basis.len();
    let images = basis.iter().map(|b| riemannian_hess(problem, b, &egrad)).collect::<Result<Vec<_>>>()?;
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            h[(i, j)] = basis[i].inner(&images[j])?;
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let mut evals: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    evals.sort_by(f64::total_cmp);
    let zeros = vec![0.0; n];
    let est = summarize(&evals, &zeros, n, 0.0);
    Ok((evals, est))
}

/// Orthonormal basis of `T_X M` as gauged tangent vectors: for `k < d-1` the
/// orthogonal complement of `U_k^L`, times unit vectors on the right index;
/// every entry of the last core.
pub fn tangent_basis(x: &Arc<TtPoint>) -> Vec<TangentVector> {
    let d = x.order();
    let mut out = Vec::with_capacity(x.tensor().shape().manifold_dim());
    let zero: Vec<Core> = x.cores().iter().map(|c| Core::zeros(c.left(), c.mode(), c.right())).collect();
    for k in 0..d {
        let c = x.core(k);
        let (l, n, r) = c.dims();
        let comp = if k + 1 < d {
            let u = c.left_unfolding();
            let full = DMatrix::identity(l * n, l * n) - &u * u.transpose();
            let eig = SymmetricEigen::new(full);
            let cols: Vec<usize> = (0..l * n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
            DMatrix::from_fn(l * n, cols.len(), |i, j| eig.eigenvectors[(i, cols[j])])
        } else {
            DMatrix::identity(l * n, l * n)
        };
        for b in 0..r {
            for col in 0..comp.ncols() {
                let mut m = DMatrix::zeros(l * n, r);
                m.set_column(b, &comp.column(col));
                let mut cores = zero.clone();
                cores[k] = Core::from_left_unfolding(&m, l, n);
                out.push(make_tangent(x, cores, Param::Gauged, false).expect("gauged by construction"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::{sample_indices, sample_values, CompletionProblem, SamplingSpec};
    use crate::tangent::test_util::*;

    fn problem_at(p: &TtPoint, count: usize, seed: u64) -> CompletionProblem {
        let omega = sample_indices(&SamplingSpec::uniform(p.modes(), count, seed), p.modes()).unwrap();
        CompletionProblem::new(sample_values(p.tensor(), &omega).unwrap(), None).unwrap()
    }

    #[test]
    fn basis_is_orthonormal_and_complete() {
        let p = point(&[3, 4, 3], &[2, 3], 1);
        let b = tangent_basis(&p);
        assert_eq!(b.len(), p.tensor().shape().manifold_dim());
        for i in 0..b.len() {
            for j in 0..b.len() {
                let g = b[i].inner(&b[j]).unwrap();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fully_observed_target_has_unit_condition() {
        let p = point(&[3, 4, 3], &[2, 2], 2);
        let prob = problem_at(&p, 36, 3);
        let est = condition_estimate(&p, &prob, &LanczosConfig::default()).unwrap();
        assert!((est.kappa - 1.0).abs() < 1e-8, "{est:?}");
        assert!((est.lambda_max - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lanczos_matches_dense_eigensolver() {
        let p = point(&[3, 4, 3], &[2, 2], 4);
        let prob = problem_at(&p, 22, 5);
        let (evals, dense) = condition_dense(&p, &prob).unwrap();
        assert_eq!(evals.len(), p.tensor().shape().manifold_dim());
        let est = condition_estimate(&p, &prob, &LanczosConfig::default()).unwrap();
        assert!((est.kappa - dense.kappa).abs() <= 0.05 * dense.kappa, "{} vs {}", est.kappa, dense.kappa);
        assert!((est.lambda_max - dense.lambda_max).abs() <= 1e-8 * dense.lambda_max);
    }

    #[test]
    fn budget_exhaustion_reports_residual() {
        let p = point(&[4, 4, 4, 4], &[3, 4, 3], 6);
        let prob = problem_at(&p, 120, 7);
        let cfg = LanczosConfig { max_iter: 3, tol: 1e-14, seed: 1 };
        match condition_estimate(&p, &prob, &cfg) {
            Err(TtError::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
