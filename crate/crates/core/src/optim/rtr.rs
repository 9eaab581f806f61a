use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{riemannian_grad, riemannian_hess, tcg_solve, LogRow, Problem, RunLog, RunOutcome, StepType, StopReason, TrustRegionConfig};
use crate::error::{Result, TtError};
use crate::hessian::fd_hess_apply;
use crate::tangent::{retract, TangentVector, TtPoint};
use crate::tt::TtTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HessianMode {
    Exact,
    FiniteDifference,
}

/// Retraction of `eta`; on rank deficiency, retries once with a tiny random
/// tangent perturbation.
fn retract_or_perturb(eta: &TangentVector, iter: usize) -> Result<TtTensor> {
    match retract(eta, 1.0) {
        Err(TtError::RankDeficient { core, ratio }) => {
            log::warn!("retraction rank-deficient at core {core} (ratio {ratio:e}); retrying with a perturbed step");
            let mut rng = ChaCha8Rng::seed_from_u64(iter as u64);
            let noise = TangentVector::random(eta.base(), &mut rng);
            let scale = 1e-8 * eta.norm().max(f64::MIN_POSITIVE) / noise.norm();
            let mut perturbed = eta.clone();
            perturbed.axpy(scale, &noise)?;
            retract(&perturbed, 1.0)
        }
        other => other,
    }
}

/// Riemannian trust-region method with a truncated-CG inner solver.
pub fn rtr_minimize<P: Problem + ?Sized>(
    problem: &P,
    x0: &TtTensor,
    cfg: &TrustRegionConfig,
    mode: HessianMode,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut x = TtPoint::new(x0)?;
    let mut f = problem.cost(&x)?;
    let (mut eg, mut g) = riemannian_grad(problem, &x)?;
    let mut gn = g.norm();
    let tol = cfg.tolerance(gn);
    let max_inner = cfg.max_inner.unwrap_or_else(|| x0.shape().manifold_dim());
    let mut radius = cfg.initial_radius;
    let mut log = RunLog::default();
    let row = |iter, x: &TtPoint, f, gn, radius, step_type| LogRow {
        iter,
        time_s: start.elapsed().as_secs_f64(),
        cost: f,
        test_cost: problem.test_cost(x),
        grad_norm: Some(gn),
        radius: Some(radius),
        step_type,
    };
    log.push(row(0, &x, f, gn, radius, StepType::Init));

    let mut stop = StopReason::MaxIters;
    for iter in 1..=cfg.max_iters {
        if gn <= tol {
            stop = StopReason::GradTol;
            break;
        }
        if cfg.max_time_s.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            stop = StopReason::Time;
            break;
        }
        let xnorm = x.tensor().norm();
        let hess = |v: &TangentVector| match mode {
            HessianMode::Exact => riemannian_hess(problem, v, &eg),
            HessianMode::FiniteDifference => {
                let h = cfg.fd_step * xnorm / v.norm().max(f64::MIN_POSITIVE);
                fd_hess_apply(v, &g, |q: &Arc<TtPoint>| riemannian_grad(problem, q).map(|r| r.1), h)
            }
        };
        let inner = tcg_solve(hess, &g, radius, cfg.kappa, cfg.theta, max_inner)?;
        let candidate = match retract_or_perturb(&inner.step, iter) {
            Ok(t) => t,
            Err(e) => {
                log::error!("aborting at iteration {iter}: retraction failed twice ({e})");
                stop = StopReason::Aborted(format!("retraction failed at iteration {iter}: {e}"));
                break;
            }
        };
        let xn = TtPoint::new(&candidate)?;
        let f_new = problem.cost(&xn)?;
        let model_decrease = -(g.inner(&inner.step)? + 0.5 * inner.step.inner(&inner.hstep)?);
        // guards the ratio when both decreases are at round-off level
        let reg = f.abs().max(1.0) * f64::EPSILON * 1e3;
        let rho = (f - f_new + reg) / (model_decrease + reg);
        log::debug!("iter {iter}: rho {rho:.3e}, tCG {:?} after {} steps", inner.status, inner.inner_iters);

        if !(rho >= 0.25) {
            radius /= 4.0;
        } else if rho > 0.75 && inner.status.hit_boundary() {
            radius = (2.0 * radius).min(cfg.max_radius);
        }
        let accept = model_decrease > 0.0 && rho > cfg.rho_prime;
        if accept {
            x = xn;
            f = f_new;
            (eg, g) = riemannian_grad(problem, &x)?;
            gn = g.norm();
        }
        let step = if accept { StepType::Accept } else { StepType::Reject };
        log.push(row(iter, &x, f, gn, radius, step));
    }
    if stop == StopReason::MaxIters && gn <= tol {
        stop = StopReason::GradTol;
    }
    Ok(RunOutcome { x: x.tensor().clone(), log, stop })
}
