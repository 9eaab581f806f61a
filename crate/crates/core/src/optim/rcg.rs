use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{riemannian_grad, LogRow, Problem, RunLog, RunOutcome, StepType, StopReason};
use crate::ambient::AmbientVector;
use crate::error::{Result, TtError};
use crate::tangent::{retract, transport, TangentVector, TtPoint};
use crate::tt::TtTensor;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaRule {
    /// Polak-Ribiere, clipped at zero.
    PolakRibierePlus,
    /// Always zero: steepest descent.
    Zero,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CgConfig {
    pub max_iters: usize,
    pub grad_tol: Option<f64>,
    pub grad_tol_rel: f64,
    pub max_time_s: Option<f64>,
    pub beta: BetaRule,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig { max_iters: 500, grad_tol: None, grad_tol_rel: 1e-6, max_time_s: None, beta: BetaRule::PolakRibierePlus }
    }
}

struct Iterate {
    x: std::sync::Arc<TtPoint>,
    f: f64,
    eg: AmbientVector,
    g: TangentVector,
}

/// Backtracking along `R_X(t d)` until the Armijo condition holds.
fn armijo<P: Problem + ?Sized>(
    problem: &P,
    it: &Iterate,
    d: &TangentVector,
    slope: f64,
    t0: f64,
) -> Result<Option<(TtTensor, f64, f64)>> {
    let mut t = t0;
    for _ in 0..MAX_HALVINGS {
        match retract(d, t) {
            Ok(y) => {
                let fy = problem.cost(&*TtPoint::new(&y)?)?;
                if fy <= it.f + ARMIJO_C * t * slope {
                    return Ok(Some((y, fy, t)));
                }
            }
            Err(TtError::RankDeficient { .. }) => {}
            Err(e) => return Err(e),
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Riemannian nonlinear CG with projection transport and Armijo backtracking.
/// The initial step comes from the problem's line guess when available.
pub fn rcg_minimize<P: Problem + ?Sized>(problem: &P, x0: &TtTensor, cfg: &CgConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let x = TtPoint::new(x0)?;
    let f = problem.cost(&x)?;
    let (eg, g) = riemannian_grad(problem, &x)?;
    let mut it = Iterate { x, f, eg, g };
    let mut gn = it.g.norm();
    let tol = cfg.grad_tol.unwrap_or(cfg.grad_tol_rel * gn.max(1.0));
    let mut d = it.g.scaled(-1.0);
    let mut last_step = 1.0;
    let mut log = RunLog::default();
    let row = |iter, it: &Iterate, gn, step_type| LogRow {
        iter,
        time_s: start.elapsed().as_secs_f64(),
        cost: it.f,
        test_cost: problem.test_cost(&it.x),
        grad_norm: Some(gn),
        radius: None,
        step_type,
    };
    log.push(row(0, &it, gn, StepType::Init));

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
        let mut slope = it.g.inner(&d)?;
        let mut kind = StepType::Cg;
        if !(slope < 0.0) || cfg.beta == BetaRule::Zero {
            d = it.g.scaled(-1.0);
            slope = -gn * gn;
            kind = StepType::Sd;
        }
        let guess = |d: &TangentVector| {
            problem.line_guess(&it.eg, d).filter(|t| *t > 0.0 && t.is_finite()).unwrap_or(2.0 * last_step)
        };
        let mut found = armijo(problem, &it, &d, slope, guess(&d))?;
        if found.is_none() && kind == StepType::Cg {
            log::warn!("line search failed along the CG direction at iteration {iter}; trying steepest descent");
            d = it.g.scaled(-1.0);
            slope = -gn * gn;
            kind = StepType::Sd;
            found = armijo(problem, &it, &d, slope, guess(&d))?;
        }
        let Some((y, fy, t)) = found else {
            log::warn!("line search failed at iteration {iter}; stopping");
            stop = StopReason::Stalled;
            break;
        };
        last_step = t;
        let xn = TtPoint::new(&y)?;
        let (eg, g) = riemannian_grad(problem, &xn)?;
        let beta = match cfg.beta {
            BetaRule::Zero => 0.0,
            BetaRule::PolakRibierePlus => {
                let mut diff = g.clone();
                diff.axpy(-1.0, &transport(&xn, &it.g)?)?;
                (g.inner(&diff)? / (gn * gn)).max(0.0)
            }
        };
        d = TangentVector::lincomb(-1.0, &g, beta, &transport(&xn, &d)?)?;
        gn = g.norm();
        it = Iterate { x: xn, f: fy, eg, g };
        log.push(row(iter, &it, gn, kind));
    }
    if stop == StopReason::MaxIters && gn <= tol {
        stop = StopReason::GradTol;
    }
    Ok(RunOutcome { x: it.x.tensor().clone(), log, stop })
}
