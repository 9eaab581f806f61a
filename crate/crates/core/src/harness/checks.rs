use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ambient::AmbientVector;
use crate::completion::{
    completion_cost, condition_dense, condition_estimate, sample_indices, sample_values, CompletionProblem,
    LanczosConfig, SamplingSpec,
};
use crate::error::Result;
use crate::hessian::oracle::{
    component_derivative_oracle, left_interface_derivative, projector_derivative_oracle, right_interface_derivative,
    DenseProjector,
};
use crate::hessian::{
    correction_diagonal, cross_term, fd_hess_apply, gram_right_tilde_v, hess_apply, three_products_dense,
    three_products_sparse, weingarten, HessianWorkspace,
};
use crate::linalg::singular_values;
use crate::optim::{riemannian_grad, riemannian_hess, Problem};
use crate::sparse::SparseTensor;
use crate::tangent::{project_dense, project_sparse, retract, variational_interfaces, Param, TangentVector, TtPoint};
use crate::tt::{random_tt, right_interface, Core, DenseTensor, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckLevel {
    Fast,
    /// Adds the large-order resource guard.
    Full,
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub level: CheckLevel,
    /// Negate one `R_k` before the right-factor check (mutation sanity).
    pub corrupt_r: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub level: CheckLevel,
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(
                f,
                "{} {:<22} max_err={:<10.3e} tol={:<8.1e} {:>7.2}s {}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.max_error,
                r.tolerance,
                r.seconds,
                r.detail
            )?;
        }
        let failed = self.results.iter().filter(|r| !r.passed).count();
        write!(f, "{} checks, {failed} failed", self.results.len())
    }
}

/// What one check measured; `ok` carries conditions other than the error bound.
struct Measured {
    error: f64,
    ok: bool,
    detail: String,
}

impl Measured {
    fn error(error: f64) -> Measured {
        Measured { error, ok: true, detail: String::new() }
    }
}

fn point(modes: &[usize], ranks: &[usize], seed: u64) -> Result<Arc<TtPoint>> {
    TtPoint::new(&random_tt(&Shape::new(modes.to_vec(), ranks)?, seed)?)
}

fn tangent(p: &Arc<TtPoint>, seed: u64) -> TangentVector {
    TangentVector::random(p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn dense(modes: &[usize], seed: u64) -> Result<DenseTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(modes, |_| rng.sample(StandardNormal))
}

fn random_sparse(modes: &[usize], count: usize, seed: u64) -> Result<SparseTensor> {
    let omega = sample_indices(&SamplingSpec::uniform(modes, count, seed), modes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let values = (0..omega.nnz()).map(|_| rng.sample(StandardNormal)).collect();
    Ok(omega.with_values(values))
}

/// Completion problem whose data do not come from a rank-`ranks` tensor, so
/// the Euclidean gradient stays nonzero at `p`.
fn off_target_problem(p: &TtPoint, count: usize, seed: u64) -> Result<CompletionProblem> {
    Ok(CompletionProblem::new(random_sparse(p.modes(), count, seed)?, None)?)
}

fn rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.sub(b).norm() / b.norm().max(1e-300)
}

fn gauged(p: &Arc<TtPoint>, cores: Vec<Core>) -> TangentVector {
    TangentVector::from_parts(Arc::clone(p), Param::Gauged, cores)
}

fn core_gap(a: &[Core], b: &[Core]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let mut d = x.clone();
            d.axpy(-1.0, y);
            d.norm() / y.norm().max(1.0)
        })
        .fold(0.0, f64::max)
}

const SHAPES3: [(&[usize], &[usize]); 2] = [(&[3, 3, 3], &[2, 2]), (&[3, 2, 4], &[2, 2])];
const SHAPES4: [(&[usize], &[usize]); 2] = [(&[2, 3, 3, 2], &[2, 3, 2]), (&[2, 3, 2, 3], &[2, 3, 2])];

/// Assembled projector matrix on the canonical basis.
pub(crate) fn projector_matrix(p: &Arc<TtPoint>) -> Result<DMatrix<f64>> {
    let modes = p.modes();
    let n: usize = modes.iter().product();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DenseTensor::zeros(modes)?;
        e.data_mut()[j] = 1.0;
        let col = project_dense(p, &e)?.to_dense()?;
        m.set_column(j, &DVector::from_column_slice(col.data()));
    }
    Ok(m)
}

fn check_projector() -> Result<Measured> {
    let mut out = Measured::error(0.0);
    let mut ranks_seen = Vec::new();
    for (seed, (modes, ranks)) in [(&[2, 3, 2][..], &[2, 2][..]), (&[3, 4, 3], &[2, 2]), (&[2, 3, 3, 2], &[2, 3, 2])]
        .into_iter()
        .enumerate()
    {
        let p = point(modes, ranks, 100 + seed as u64)?;
        let m = projector_matrix(&p)?;
        let sym = (&m - m.transpose()).norm();
        let idem = (&m * &m - &m).norm();
        out.error = out.error.max(sym).max(idem);
        let rank = singular_values(&m).iter().filter(|&&s| s > 0.5).count();
        let dim = p.tensor().shape().manifold_dim();
        ranks_seen.push(format!("{rank}/{dim}"));
        out.ok &= rank == dim;
    }
    out.detail = format!("rank/dim {}", ranks_seen.join(" "));
    Ok(out)
}

fn check_weingarten() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for t in 0..20u64 {
        let (modes, ranks) = if t % 2 == 0 { SHAPES3[(t / 2 % 2) as usize] } else { SHAPES4[(t / 2 % 2) as usize] };
        let p = point(modes, ranks, 200 + t)?;
        let v = tangent(&p, 300 + t);
        let z = dense(modes, 400 + t)?;
        let w = weingarten(&v, &AmbientVector::Dense(z.clone()))?.to_dense()?;
        let num = projector_derivative_oracle(&v, &z, 1e-5)?;
        let expect = project_dense(&p, &num)?.to_dense()?;
        worst = worst.max(rel(&w, &expect));
    }
    Ok(Measured { detail: "20 trials".into(), ..Measured::error(worst) })
}

fn check_diagonal() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for (s, (modes, ranks)) in SHAPES3.iter().chain(&SHAPES4).enumerate() {
        let s = s as u64;
        let p = point(modes, ranks, 500 + s)?;
        let v = tangent(&p, 510 + s);
        let z = dense(modes, 520 + s)?;
        let ws = HessianWorkspace::new(&v, &AmbientVector::Dense(z.clone()))?;
        let diag = correction_diagonal(&p, &ws)?;
        let proj = DenseProjector::at(p.tensor())?;
        for k in 0..modes.len() {
            let mut cores: Vec<Core> = diag.iter().map(|c| Core::zeros(c.left(), c.mode(), c.right())).collect();
            cores[k] = diag[k].clone();
            let got = gauged(&p, cores).to_dense()?;
            let expect = proj.component(k, &component_derivative_oracle(&v, k, &z, 1e-5)?);
            worst = worst.max(got.sub(&expect).norm() / (z.norm() * v.norm()));
        }
    }
    Ok(Measured::error(worst))
}

fn check_cross() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for (s, (modes, ranks)) in SHAPES4.iter().enumerate() {
        let s = s as u64;
        let p = point(modes, ranks, 600 + s)?;
        let v = tangent(&p, 610 + s);
        let z = dense(modes, 620 + s)?;
        let ws = HessianWorkspace::new(&v, &AmbientVector::Dense(z.clone()))?;
        let proj = DenseProjector::at(p.tensor())?;
        let d = modes.len();
        for i in 0..d {
            for j in (0..d).filter(|&j| j != i) {
                let got = gauged(&p, cross_term(&p, &ws, i, j)).to_dense()?;
                let yj = ws.component(&p, j).to_dense()?;
                let expect = proj.component(i, &component_derivative_oracle(&v, i, &yj, 1e-5)?.scaled(-1.0));
                worst = worst.max(got.sub(&expect).norm() / (z.norm() * v.norm()));
                pairs += 1;
            }
        }
    }
    Ok(Measured { detail: format!("{pairs} (i, j) pairs"), ..Measured::error(worst) })
}

fn check_sparse_kernels() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    let cases: [(&[usize], &[usize], usize); 3] =
        [(&[2, 3, 2], &[2, 2], 7), (&[3, 4, 3, 2], &[2, 3, 2], 40), (&[2, 3, 3, 2], &[2, 3, 2], 30)];
    for (s, (modes, ranks, count)) in cases.into_iter().enumerate() {
        let s = s as u64;
        let p = point(modes, ranks, 700 + s)?;
        let v = tangent(&p, 710 + s).to_first()?;
        let z = random_sparse(modes, count, 720 + s)?;
        let sp = three_products_sparse(&v, &z)?;
        let de = three_products_dense(&v, &z.to_dense()?)?;
        worst = worst.max(core_gap(&sp.a, &de.a)).max(core_gap(&sp.b, &de.b)).max(core_gap(&sp.c, &de.c));
        let g = gram_right_tilde_v(&v)?;
        let vi = variational_interfaces(&v)?;
        for k in 0..modes.len() - 1 {
            let expect = right_interface(&p.tilde_cores()[k + 1..]).transpose() * &vi.ge[k + 1];
            worst = worst.max((&g[k] - &expect).norm() / expect.norm().max(1.0));
        }
    }
    Ok(Measured { detail: "A/B/C families and G_k".into(), ..Measured::error(worst) })
}

fn check_symmetry() -> Result<Measured> {
    let p = point(&[3, 4, 3, 4], &[2, 3, 2], 800)?;
    let prob = off_target_problem(&p, 100, 801)?;
    let eg = prob.egrad(&p)?;
    let mut hnorm: f64 = 0.0;
    let mut pairs = Vec::with_capacity(100);
    for t in 0..100u64 {
        let v = tangent(&p, 1000 + 2 * t);
        let w = tangent(&p, 1001 + 2 * t);
        let hv = riemannian_hess(&prob, &v, &eg)?;
        let hw = riemannian_hess(&prob, &w, &eg)?;
        hnorm = hnorm.max(hv.norm() / v.norm()).max(hw.norm() / w.norm());
        pairs.push((hv.inner(&w)? - v.inner(&hw)?, v.norm() * w.norm()));
    }
    let worst = pairs.iter().map(|(gap, vw)| gap.abs() / (vw * hnorm)).fold(0.0, f64::max);
    Ok(Measured { detail: format!("100 pairs, |H|_est = {hnorm:.3e}"), ..Measured::error(worst) })
}

fn check_fd_hessian() -> Result<Measured> {
    let p = point(&[3, 4, 3, 4], &[2, 3, 2], 850)?;
    let prob = off_target_problem(&p, 100, 851)?;
    let (eg, g) = riemannian_grad(&prob, &p)?;
    let mut worst: f64 = 0.0;
    for t in 0..10u64 {
        let v = tangent(&p, 860 + t);
        let exact = riemannian_hess(&prob, &v, &eg)?;
        // the step finite-difference trust regions use by default
        let h = 1e-6 * p.tensor().norm() / v.norm();
        let fd = fd_hess_apply(&v, &g, |q: &Arc<TtPoint>| riemannian_grad(&prob, q).map(|r| r.1), h)?;
        let mut diff = fd.clone();
        diff.axpy(-1.0, &exact)?;
        worst = worst.max(diff.norm() / exact.norm());
    }
    Ok(Measured { detail: "10 directions".into(), ..Measured::error(worst) })
}

/// Largest relative violation of `X_{>=k+1} = X~_{>=k+1} R_k`, of the
/// orthonormality of `X~_{>=k+1}`, and of the triangular shape of `R_k`.
pub fn right_factor_error(p: &TtPoint) -> f64 {
    let d = p.order();
    let mut worst: f64 = 0.0;
    for k in 0..d - 1 {
        let r = p.r(k);
        let xt = right_interface(&p.tilde_cores()[k + 1..]);
        let xr = p.tensor().right_interface(k + 1);
        worst = worst.max((&xr - &xt * r).norm() / xr.norm());
        let gram = xt.transpose() * &xt;
        worst = worst.max((&gram - DMatrix::identity(gram.nrows(), gram.ncols())).norm());
        let lower = (0..r.nrows()).flat_map(|i| (0..i.min(r.ncols())).map(move |j| (i, j)));
        worst = worst.max(lower.map(|(i, j)| r[(i, j)].abs()).fold(0.0, f64::max) / r.norm());
    }
    worst
}

fn check_right_factors(corrupt: bool) -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for (s, (modes, ranks)) in SHAPES3.iter().chain(&SHAPES4).enumerate() {
        let mut p = point(modes, ranks, 900 + s as u64)?;
        if corrupt {
            p = p.with_corrupted_r(0, -p.r(0));
        }
        worst = worst.max(right_factor_error(&p));
    }
    let detail = if corrupt { "with a negated R_0 injected" } else { "" };
    Ok(Measured { detail: detail.into(), ..Measured::error(worst) })
}

fn check_interface_derivatives() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for (s, (modes, ranks)) in SHAPES3.iter().chain(&SHAPES4).enumerate() {
        let p = point(modes, ranks, 950 + s as u64)?;
        let v = tangent(&p, 960 + s as u64);
        let vi = variational_interfaces(&v)?;
        for k in 1..modes.len() {
            let num = left_interface_derivative(&v, k, 1e-5)?;
            worst = worst.max((&num - &vi.le[k]).norm() / vi.le[k].norm().max(1.0));
            let num = right_interface_derivative(&v, k, 1e-5)?;
            worst = worst.max((&num - &vi.ge[k]).norm() / vi.ge[k].norm().max(1.0));
        }
    }
    Ok(Measured::error(worst))
}

fn check_projector_split() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for (s, (modes, ranks)) in SHAPES3.iter().chain(&SHAPES4).enumerate() {
        let p = point(modes, ranks, 1100 + s as u64)?;
        let z = dense(modes, 1110 + s as u64)?;
        let proj = DenseProjector::at(p.tensor())?;
        let v = project_dense(&p, &z)?;
        let comps: Vec<TangentVector> = (0..modes.len()).map(|k| v.component(k)).collect();
        for (k, c) in comps.iter().enumerate() {
            worst = worst.max(c.to_dense()?.sub(&proj.component(k, &z)).norm() / z.norm());
            for other in &comps[k + 1..] {
                let dense_dot = c.to_dense()?.dot(&other.to_dense()?);
                worst = worst.max(dense_dot.abs() / (z.norm() * z.norm()));
            }
        }
        worst = worst.max(rel(&v.to_dense()?, &proj.apply(&z)));
    }
    Ok(Measured::error(worst))
}

fn check_gradient() -> Result<Measured> {
    let p = point(&[3, 4, 3, 2], &[2, 3, 2], 1200)?;
    let data = random_sparse(p.modes(), 40, 1201)?;
    let g = project_sparse(&p, &data.with_values(
        p.values_at(&data).iter().zip(data.values()).map(|(x, a)| x - a).collect(),
    ))?;
    let mut worst: f64 = 0.0;
    for t in 0..20u64 {
        let v = tangent(&p, 1210 + t);
        let h = 1e-6;
        let num = (completion_cost(&retract(&v, h)?, &data)? - completion_cost(&retract(&v, -h)?, &data)?) / (2.0 * h);
        let exact = g.inner(&v)?;
        worst = worst.max((num - exact).abs() / exact.abs().max(g.norm() * v.norm()));
    }
    Ok(Measured { detail: "20 directions".into(), ..Measured::error(worst) })
}

fn check_condition() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    let mut kappas = Vec::new();
    for (s, (modes, ranks, count)) in [(&[2, 3, 2][..], &[2, 2][..], 10), (&[3, 4, 3], &[2, 2], 22)].into_iter().enumerate() {
        let p = point(modes, ranks, 1300 + s as u64)?;
        let omega = sample_indices(&SamplingSpec::uniform(modes, count, 1310 + s as u64), modes)?;
        let prob = CompletionProblem::new(sample_values(p.tensor(), &omega)?, None)?;
        let (_, dense) = condition_dense(&p, &prob)?;
        let est = condition_estimate(&p, &prob, &LanczosConfig::default())?;
        worst = worst.max((est.kappa - dense.kappa).abs() / dense.kappa);
        kappas.push(format!("{:.3}/{:.3}", est.kappa, dense.kappa));
    }
    Ok(Measured { detail: format!("kappa lanczos/dense {}", kappas.join(" ")), ..Measured::error(worst) })
}

/// One Hessian-vector product at order 30 with sparse data; the error is the
/// wall time in seconds.
fn check_large_order() -> Result<Measured> {
    let shape = Shape::capped(30, 4, 5)?;
    let p = TtPoint::new(&random_tt(&shape, 1400)?)?;
    let data = random_sparse(&shape.modes, 10_000, 1401)?;
    let prob = CompletionProblem::new(data, None)?;
    let v = tangent(&p, 1402);
    let eg = prob.egrad(&p)?;
    let start = Instant::now();
    let hv = hess_apply(&v, &eg, &prob.ehess(&v)?)?;
    let secs = start.elapsed().as_secs_f64();
    Ok(Measured { error: secs, ok: hv.norm().is_finite(), detail: "d=30, n=4, r=5 (4 at the ends), |Omega|=1e4 (error = seconds)".into() })
}

type CheckFn = Box<dyn Fn() -> Result<Measured>>;

pub fn check_suite(level: CheckLevel) -> CheckReport {
    check_suite_with(&CheckOptions { level, corrupt_r: false })
}

/// Runs the oracle suite. A check that errors out counts as failed.
pub fn check_suite_with(opts: &CheckOptions) -> CheckReport {
    let corrupt = opts.corrupt_r;
    let mut checks: Vec<(&str, f64, CheckFn)> = vec![
        ("projector", 1e-10, Box::new(check_projector)),
        ("projector-split", 1e-10, Box::new(check_projector_split)),
        ("right-factors", 1e-12, Box::new(move || check_right_factors(corrupt))),
        ("interface-derivatives", 1e-6, Box::new(check_interface_derivatives)),
        ("weingarten", 1e-6, Box::new(check_weingarten)),
        ("diagonal-terms", 1e-6, Box::new(check_diagonal)),
        ("cross-terms", 1e-6, Box::new(check_cross)),
        ("sparse-kernels", 1e-11, Box::new(check_sparse_kernels)),
        ("hessian-symmetry", 1e-8, Box::new(check_symmetry)),
        ("fd-hessian", 1e-4, Box::new(check_fd_hessian)),
        ("gradient", 1e-5, Box::new(check_gradient)),
        ("condition", 0.05, Box::new(check_condition)),
    ];
    if opts.level == CheckLevel::Full {
        checks.push(("large-order", 10.0, Box::new(check_large_order)));
    }
    let results = checks
        .into_iter()
        .map(|(name, tolerance, f)| {
            let start = Instant::now();
            let outcome = f();
            let seconds = start.elapsed().as_secs_f64();
            match outcome {
                Ok(m) => CheckResult {
                    name: name.into(),
                    passed: m.ok && m.error <= tolerance,
                    max_error: m.error,
                    tolerance,
                    seconds,
                    detail: m.detail,
                },
                Err(e) => CheckResult {
                    name: name.into(),
                    passed: false,
                    max_error: f64::NAN,
                    tolerance,
                    seconds,
                    detail: format!("error: {e}"),
                },
            }
        })
        .collect();
    CheckReport { level: opts.level, results }
}
