//! Multi-trial completion experiments, the verification suite and plot data.
//!
//! Seeding: every trial draws from ChaCha8 seeded with the master seed, with
//! the stream number `5 * trial + role` selecting the randomness role (target,
//! training set, test set, initial point, Lanczos start). Trials are thus
//! reproducible one by one, and no role shares a stream with another.

mod checks;
mod plot;

use std::collections::HashSet;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::completion::{
    lanczos_estimate, sample_indices_with, sample_values, CompletionProblem, ConditionEstimate, LanczosConfig,
    SamplingSpec,
};
use crate::error::{Result, TtError};
use crate::optim::{
    als_minimize, rcg_minimize, riemannian_grad, rtr_minimize, AlsConfig, CgConfig, HessianMode, RunOutcome,
    TrustRegionConfig,
};
use crate::tangent::TtPoint;
use crate::tt::{random_tt_with, Shape, TtTensor};

pub use checks::{check_suite, check_suite_with, right_factor_error, CheckLevel, CheckOptions, CheckReport, CheckResult};
pub use plot::{emit_plot_data, PlotData, PLOT_HEADER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Trust regions with the exact Riemannian Hessian.
    Rtr,
    /// Trust regions with a finite-difference Hessian.
    Fdtr,
    /// Riemannian nonlinear CG.
    Rcg,
    /// Alternating least squares.
    Als,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rtr => "rtr",
            Algorithm::Fdtr => "fdtr",
            Algorithm::Rcg => "rcg",
            Algorithm::Als => "als",
        }
    }

    pub fn from_name(s: &str) -> Option<Algorithm> {
        [Algorithm::Rtr, Algorithm::Fdtr, Algorithm::Rcg, Algorithm::Als].into_iter().find(|a| a.name() == s)
    }

    /// Whether the solver logs a gradient norm.
    pub fn uses_gradient(self) -> bool {
        self != Algorithm::Als
    }
}

/// Per-run budgets. The wall-clock limit is checked between outer iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub time_s: Option<f64>,
    pub rtr_iters: usize,
    pub rcg_iters: usize,
    pub als_sweeps: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { time_s: None, rtr_iters: 200, rcg_iters: 500, als_sweeps: 100 }
    }
}

fn default_trials() -> usize {
    1
}

fn default_grad_tol_rel() -> f64 {
    1e-6
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

/// One completion experiment, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n: usize,
    /// Interior ranks `(r_1, ..., r_{d-1})`.
    pub ranks: Vec<usize>,
    /// Per-mode sampling distribution over `0..n`; uniform when absent.
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    /// `|Omega| = round(oversampling * manifold_dim)`.
    pub oversampling: f64,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Trust-region constants; iteration, time and tolerance fields are
    /// replaced by `budgets` and `grad_tol_rel`.
    #[serde(default)]
    pub trust_region: TrustRegionConfig,
    #[serde(default)]
    pub budgets: Budgets,
    /// Gradient-based runs stop at `|grad| < grad_tol_rel * max(1, |grad_0|)`.
    #[serde(default = "default_grad_tol_rel")]
    pub grad_tol_rel: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| TtError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(&fs::read_to_string(path)?)
    }

    pub fn shape(&self) -> Result<Shape> {
        if self.d < 2 {
            return Err(TtError::Config(format!("order d = {} must be at least 2", self.d)));
        }
        Shape::new(vec![self.n; self.d], &self.ranks).map_err(|e| TtError::Config(e.to_string()))
    }

    pub fn distribution(&self) -> Vec<Vec<f64>> {
        let p = self.p.clone().unwrap_or_else(|| vec![1.0 / self.n as f64; self.n]);
        vec![p; self.d]
    }

    /// `|Omega|` derived from the oversampling ratio.
    pub fn sample_count(&self) -> Result<usize> {
        let dim = self.shape()?.manifold_dim();
        Ok((self.oversampling * dim as f64).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.shape()?;
        if self.algorithms.is_empty() {
            return Err(TtError::Config("at least one algorithm is required".into()));
        }
        let mut seen = HashSet::new();
        if let Some(a) = self.algorithms.iter().find(|a| !seen.insert(**a)) {
            return Err(TtError::Config(format!("algorithm {} listed twice", a.name())));
        }
        if self.trials == 0 {
            return Err(TtError::Config("trials must be at least 1".into()));
        }
        if !(self.oversampling > 0.0 && self.oversampling.is_finite()) {
            return Err(TtError::Config(format!("oversampling {} must be positive", self.oversampling)));
        }
        if !(self.grad_tol_rel >= 0.0) {
            return Err(TtError::Config("grad_tol_rel must be nonnegative".into()));
        }
        if self.budgets.time_s.is_some_and(|t| !(t > 0.0)) {
            return Err(TtError::Config("time budget must be positive".into()));
        }
        self.trust_region.validate()?;
        let spec = SamplingSpec { p: self.distribution(), count: self.sample_count()?, seed: 0 };
        spec.validate(&shape.modes).map_err(|e| TtError::Config(e.to_string()))
    }
}

/// Randomness roles within a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedRole {
    Target = 0,
    Train = 1,
    Test = 2,
    Init = 3,
    Lanczos = 4,
}

pub fn trial_rng(master: u64, trial: usize, role: SeedRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(5 * trial as u64 + role as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algo: Algorithm,
    /// Number of logged rows, including the initial one.
    pub rows: usize,
    pub iterations: usize,
    pub final_cost: f64,
    pub final_test_cost: Option<f64>,
    /// Riemannian gradient norm at the final iterate (computed here for ALS).
    pub final_grad_norm: f64,
    pub stop: String,
    pub converged: bool,
    pub time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub initial_cost: f64,
    pub initial_grad_norm: f64,
    pub grad_tol: f64,
    /// Hessian condition estimate at the target point.
    pub target_condition: ConditionEstimate,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub manifold_dim: usize,
    pub num_entries: f64,
    pub omega: usize,
    /// `|Omega| / manifold_dim` as realized.
    pub oversampling: f64,
    /// `|Omega| / prod(n)`.
    pub sampling_ratio: f64,
    pub trials: Vec<TrialSummary>,
}

impl Summary {
    pub fn load(run_dir: &Path) -> Result<Summary> {
        Ok(serde_json::from_str(&fs::read_to_string(run_dir.join(SUMMARY_FILE))?)?)
    }
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";

pub fn log_file_name(trial: usize, algo: Algorithm) -> String {
    format!("trial_{trial:02}_{}.csv", algo.name())
}

/// Everything a trial needs, built from the per-role streams.
pub struct TrialInstance {
    pub target: TtTensor,
    pub problem: CompletionProblem,
    pub x0: TtTensor,
    pub lanczos_seed: u64,
}

pub fn build_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialInstance> {
    let shape = cfg.shape()?;
    let modes = &shape.modes;
    let p = cfg.distribution();
    let count = cfg.sample_count()?;
    let target = random_tt_with(&shape, &mut trial_rng(cfg.seed, trial, SeedRole::Target))?;
    let train = sample_indices_with(&p, count, modes, &mut trial_rng(cfg.seed, trial, SeedRole::Train))?;
    let test = sample_indices_with(&p, count, modes, &mut trial_rng(cfg.seed, trial, SeedRole::Test))?;
    let problem = CompletionProblem::new(sample_values(&target, &train)?, Some(sample_values(&target, &test)?))?;
    let x0 = random_tt_with(&shape, &mut trial_rng(cfg.seed, trial, SeedRole::Init))?;
    let lanczos_seed = trial_rng(cfg.seed, trial, SeedRole::Lanczos).next_u64();
    Ok(TrialInstance { target, problem, x0, lanczos_seed })
}

fn run_algorithm(cfg: &ExperimentConfig, algo: Algorithm, inst: &TrialInstance, tol: f64) -> Result<RunOutcome> {
    let b = &cfg.budgets;
    match algo {
        Algorithm::Rtr | Algorithm::Fdtr => {
            let tr = TrustRegionConfig {
                max_iters: b.rtr_iters,
                max_time_s: b.time_s,
                grad_tol: Some(tol),
                ..cfg.trust_region.clone()
            };
            let mode = if algo == Algorithm::Rtr { HessianMode::Exact } else { HessianMode::FiniteDifference };
            rtr_minimize(&inst.problem, &inst.x0, &tr, mode)
        }
        Algorithm::Rcg => {
            let cg = CgConfig { max_iters: b.rcg_iters, max_time_s: b.time_s, grad_tol: Some(tol), ..Default::default() };
            rcg_minimize(&inst.problem, &inst.x0, &cg)
        }
        Algorithm::Als => {
            let als = AlsConfig { sweeps: b.als_sweeps, max_time_s: b.time_s, ..Default::default() };
            als_minimize(&inst.problem, &inst.x0, &als)
        }
    }
}

fn run_trial(cfg: &ExperimentConfig, trial: usize, dir: &Path) -> Result<TrialSummary> {
    let inst = build_trial(cfg, trial)?;
    let target = TtPoint::new(&inst.target)?;
    let lanczos = LanczosConfig { seed: inst.lanczos_seed, ..Default::default() };
    let target_condition = lanczos_estimate(&target, &inst.problem, &lanczos)?;
    if !target_condition.converged {
        log::warn!("trial {trial}: condition estimate did not converge ({:?})", target_condition);
    }

    use crate::optim::Problem;
    let x0 = TtPoint::new(&inst.x0)?;
    let initial_cost = inst.problem.cost(&x0)?;
    let initial_grad_norm = riemannian_grad(&inst.problem, &x0)?.1.norm();
    let grad_tol = cfg.grad_tol_rel * initial_grad_norm.max(1.0);

    let mut runs = Vec::with_capacity(cfg.algorithms.len());
    for &algo in &cfg.algorithms {
        let start = Instant::now();
        let out = run_algorithm(cfg, algo, &inst, grad_tol)?;
        let time_s = start.elapsed().as_secs_f64();
        let mut w = BufWriter::new(fs::File::create(dir.join(log_file_name(trial, algo)))?);
        out.log.write_csv(&mut w, trial, algo.name())?;
        drop(w);

        let xf = TtPoint::new(&out.x)?;
        let final_grad_norm = riemannian_grad(&inst.problem, &xf)?.1.norm();
        let last = out.log.last().expect("logs start with the initial row");
        log::info!("trial {trial} {}: cost {:.3e}, |grad| {final_grad_norm:.3e}, {:?}", algo.name(), last.cost, out.stop);
        runs.push(RunSummary {
            algo,
            rows: out.log.len(),
            iterations: last.iter,
            final_cost: last.cost,
            final_test_cost: last.test_cost,
            final_grad_norm,
            stop: format!("{:?}", out.stop),
            converged: final_grad_norm <= grad_tol,
            time_s,
        });
    }
    Ok(TrialSummary { trial, initial_cost, initial_grad_norm, grad_tol, target_condition, runs })
}

/// Runs every trial (up to `jobs` at a time) and writes the per-run CSV logs,
/// `config.json` and `summary.json` into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Summary> {
    cfg.validate()?;
    let shape = cfg.shape()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), serde_json::to_string_pretty(cfg)?)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| TtError::Config(format!("thread pool: {e}")))?;
    let trials = pool.install(|| {
        (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t, dir)).collect::<Result<Vec<_>>>()
    })?;

    let omega = cfg.sample_count()?;
    let dim = shape.manifold_dim();
    let summary = Summary {
        config: cfg.clone(),
        manifold_dim: dim,
        num_entries: shape.num_entries(),
        omega,
        oversampling: omega as f64 / dim as f64,
        sampling_ratio: omega as f64 / shape.num_entries(),
        trials,
    };
    fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
