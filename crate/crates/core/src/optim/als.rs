use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LogRow, RunLog, RunOutcome, StepType, StopReason};
use crate::completion::{completion_cost, CompletionProblem};
use crate::error::{Result, TtError};
use crate::linalg::{diag_ratio, thin_qr};
use crate::tt::{Core, TtTensor};

const RIDGE: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AlsConfig {
    /// One sweep is a left-to-right and a right-to-left pass.
    pub sweeps: usize,
    pub max_time_s: Option<f64>,
    /// Stop when a sweep lowers the cost by less than this fraction.
    pub stall_tol: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig { sweeps: 100, max_time_s: None, stall_tol: 1e-12 }
    }
}

/// Cores plus per-sample interface rows: `pre[k]` holds `X_{<k}(i)` and
/// `suf[k]` holds `X_{>k}(i)` for every observed index, flattened.
struct Als<'a> {
    data: &'a crate::sparse::SparseTensor,
    cores: Vec<Core>,
    /// `buckets[k][n]`: samples whose `k`-th index equals `n`.
    buckets: Vec<Vec<Vec<usize>>>,
    pre: Vec<Vec<f64>>,
    suf: Vec<Vec<f64>>,
    ridged: usize,
}

impl<'a> Als<'a> {
    fn new(data: &'a crate::sparse::SparseTensor, x: &TtTensor) -> Als<'a> {
        let d = x.order();
        let mut buckets: Vec<Vec<Vec<usize>>> = x.modes().iter().map(|&n| vec![Vec::new(); n]).collect();
        for t in 0..data.nnz() {
            for (k, &i) in data.index(t).iter().enumerate() {
                buckets[k][i].push(t);
            }
        }
        let m = data.nnz();
        let cores = x.cores().to_vec();
        let pre = cores.iter().map(|c| vec![0.0; m * c.left()]).collect();
        let suf = cores.iter().map(|c| vec![0.0; m * c.right()]).collect();
        let mut s = Als { data, cores, buckets, pre, suf, ridged: 0 };
        s.pre[0].fill(1.0);
        s.suf[d - 1].fill(1.0);
        s
    }

    fn order(&self) -> usize {
        self.cores.len()
    }

    /// `pre[k+1] = pre[k] U_k(i_k)`.
    fn extend_pre(&mut self, k: usize) {
        let c = &self.cores[k];
        let (l, r) = (c.left(), c.right());
        let (head, tail) = self.pre.split_at_mut(k + 1);
        for t in 0..self.data.nnz() {
            let i = self.data.index(t)[k];
            c.row_times_slice(&head[k][t * l..(t + 1) * l], i, &mut tail[0][t * r..(t + 1) * r]);
        }
    }

    /// `suf[k-1] = U_k(i_k) suf[k]`.
    fn extend_suf(&mut self, k: usize) {
        let c = &self.cores[k];
        let (l, r) = (c.left(), c.right());
        let (head, tail) = self.suf.split_at_mut(k);
        for t in 0..self.data.nnz() {
            let i = self.data.index(t)[k];
            c.slice_times_col(i, &tail[0][t * r..(t + 1) * r], &mut head[k - 1][t * l..(t + 1) * l]);
        }
    }

    /// Exact least-squares update of core `k` with all other cores fixed,
    /// slice by slice (each sample touches one slice only).
    fn update(&mut self, k: usize) {
        let (l, n, r) = self.cores[k].dims();
        let p = l * r;
        for i in 0..n {
            let obs = &self.buckets[k][i];
            let mut a = DMatrix::zeros(obs.len(), p);
            let mut b = DVector::zeros(obs.len());
            for (row, &t) in obs.iter().enumerate() {
                let lv = &self.pre[k][t * l..(t + 1) * l];
                let rv = &self.suf[k][t * r..(t + 1) * r];
                for (bb, &rb) in rv.iter().enumerate() {
                    for (aa, &la) in lv.iter().enumerate() {
                        a[(row, aa + l * bb)] = la * rb;
                    }
                }
                b[row] = self.data.values()[t];
            }
            let current = DVector::from_column_slice(self.cores[k].slice(i).as_slice());
            let x = self.solve(a, b, current);
            self.cores[k].set_slice(i, &DMatrix::from_column_slice(l, r, x.as_slice()));
        }
    }

    fn solve(&mut self, a: DMatrix<f64>, b: DVector<f64>, current: DVector<f64>) -> DVector<f64> {
        let p = a.ncols();
        if a.nrows() >= p {
            let qr = a.clone().qr();
            let rf = qr.r();
            if diag_ratio(&rf) > 1e-10 {
                if let Some(x) = rf.solve_upper_triangular(&(qr.q().transpose() * &b)) {
                    return x;
                }
            }
        }
        // under-determined or singular: ridge towards the current slice
        self.ridged += 1;
        let ata = a.transpose() * &a;
        let lambda = RIDGE * ata.diagonal().max().max(1.0);
        let lhs = ata + DMatrix::identity(p, p) * lambda;
        let rhs = a.transpose() * b + &current * lambda;
        match lhs.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => current,
        }
    }

    fn left_orthogonalize(&mut self, k: usize) {
        let c = &self.cores[k];
        let (q, rf) = thin_qr(c.left_unfolding());
        self.cores[k] = Core::from_left_unfolding(&q, c.left(), c.mode());
        self.cores[k + 1] = self.cores[k + 1].mul_left(&rf);
    }

    fn right_orthogonalize(&mut self, k: usize) {
        let c = &self.cores[k];
        let (q, rf) = thin_qr(c.right_unfolding().transpose());
        self.cores[k] = Core::from_right_unfolding(&q.transpose(), c.mode(), c.right());
        self.cores[k - 1] = self.cores[k - 1].mul_right(&rf.transpose());
    }

    fn rebuild_suffixes(&mut self) {
        for k in (1..self.order()).rev() {
            self.extend_suf(k);
        }
    }

    #[cfg(test)]
    fn rebuild_prefixes(&mut self) {
        for k in 0..self.order() - 1 {
            self.extend_pre(k);
        }
    }

    fn sweep(&mut self) {
        let d = self.order();
        self.rebuild_suffixes();
        for k in 0..d {
            self.update(k);
            if k + 1 < d {
                self.left_orthogonalize(k);
                self.extend_pre(k);
            }
        }
        for k in (0..d).rev() {
            self.update(k);
            if k > 0 {
                self.right_orthogonalize(k);
                self.extend_suf(k);
            }
        }
    }

    fn tensor(&self) -> Result<TtTensor> {
        TtTensor::from_cores(self.cores.clone())
    }
}

/// Alternating least squares over the observed entries. No gradient is
/// logged; `radius` and `grad_norm` stay empty.
pub fn als_minimize(problem: &CompletionProblem, x0: &TtTensor, cfg: &AlsConfig) -> Result<RunOutcome> {
    if x0.modes() != problem.modes() {
        return Err(TtError::ShapeMismatch(format!("{:?} vs {:?}", x0.modes(), problem.modes())));
    }
    let start = Instant::now();
    let mut state = Als::new(&problem.train, x0);
    let mut x = x0.clone();
    let mut f = completion_cost(&x, &problem.train)?;
    let test = |x: &TtTensor| problem.test.as_ref().and_then(|t| completion_cost(x, t).ok());
    let mut log = RunLog::default();
    let row = |iter, f, x: &TtTensor, step_type| LogRow {
        iter,
        time_s: start.elapsed().as_secs_f64(),
        cost: f,
        test_cost: test(x),
        grad_norm: None,
        radius: None,
        step_type,
    };
    log.push(row(0, f, &x, StepType::Init));
    let mut stop = StopReason::MaxIters;
    let mut warned = false;
    for sweep in 1..=cfg.sweeps {
        if cfg.max_time_s.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            stop = StopReason::Time;
            break;
        }
        state.ridged = 0;
        state.sweep();
        if state.ridged > 0 {
            if !warned {
                log::warn!("sweep {sweep}: {} slice solves needed the {RIDGE:e} ridge", state.ridged);
                warned = true;
            } else {
                log::debug!("sweep {sweep}: {} slice solves needed the ridge", state.ridged);
            }
        }
        x = state.tensor()?;
        let f_new = completion_cost(&x, &problem.train)?;
        log.push(row(sweep, f_new, &x, StepType::Sweep));
        let stalled = f - f_new <= cfg.stall_tol * f;
        f = f_new;
        if stalled {
            stop = StopReason::Stalled;
            break;
        }
    }
    Ok(RunOutcome { x, log, stop })
}
