//! Tensor completion: `f(X) = 1/2 sum_{i in Omega} (X(i) - A(i))^2` restricted
//! to the fixed-rank manifold, index sampling, and Hessian conditioning.

mod condition;
mod sampling;

use crate::ambient::AmbientVector;
use crate::error::{Result, TtError};
use crate::optim::Problem;
use crate::sparse::SparseTensor;
use crate::tangent::{kernels, TangentVector, TtPoint};
use crate::tt::TtTensor;

pub use condition::{
    condition_dense, condition_estimate, lanczos_estimate, tangent_basis, ConditionEstimate, LanczosConfig,
};
pub use sampling::{sample_indices, sample_indices_with, sample_values, SamplingSpec};

fn check(modes: &[usize], data: &SparseTensor) -> Result<()> {
    if modes != data.modes() {
        return Err(TtError::ShapeMismatch(format!("tensor modes {modes:?} vs data modes {:?}", data.modes())));
    }
    Ok(())
}

fn residual(x: &TtTensor, data: &SparseTensor) -> Result<Vec<f64>> {
    check(x.modes(), data)?;
    let mut r = kernels::tt_values(x.cores(), data);
    for (ri, a) in r.iter_mut().zip(data.values()) {
        *ri -= a;
    }
    Ok(r)
}

/// `1/2 sum_{Omega} (X(i) - A(i))^2`.
pub fn completion_cost(x: &TtTensor, data: &SparseTensor) -> Result<f64> {
    Ok(0.5 * residual(x, data)?.iter().map(|r| r * r).sum::<f64>())
}

/// Euclidean gradient: the residual `X(i) - A(i)` on `Omega`.
pub fn completion_egrad(x: &TtTensor, data: &SparseTensor) -> Result<SparseTensor> {
    Ok(data.with_values(residual(x, data)?))
}

/// Euclidean Hessian applied to `V`: `P_Omega(V)`.
pub fn completion_ehess(v: &TangentVector, data: &SparseTensor) -> Result<SparseTensor> {
    check(v.base().modes(), data)?;
    Ok(data.with_values(v.values_at(data)))
}

/// Training data plus an optional independent test set.
#[derive(Clone, Debug)]
pub struct CompletionProblem {
    pub train: SparseTensor,
    pub test: Option<SparseTensor>,
}

impl CompletionProblem {
    pub fn new(train: SparseTensor, test: Option<SparseTensor>) -> Result<CompletionProblem> {
        if let Some(t) = &test {
            check(train.modes(), t)?;
        }
        Ok(CompletionProblem { train, test })
    }

    pub fn modes(&self) -> &[usize] {
        self.train.modes()
    }
}

impl Problem for CompletionProblem {
    fn cost(&self, x: &TtPoint) -> Result<f64> {
        completion_cost(x.tensor(), &self.train)
    }

    fn egrad(&self, x: &TtPoint) -> Result<AmbientVector> {
        Ok(AmbientVector::Sparse(completion_egrad(x.tensor(), &self.train)?))
    }

    fn ehess(&self, v: &TangentVector) -> Result<AmbientVector> {
        Ok(AmbientVector::Sparse(completion_ehess(v, &self.train)?))
    }

    fn test_cost(&self, x: &TtPoint) -> Option<f64> {
        self.test.as_ref().and_then(|t| completion_cost(x.tensor(), t).ok())
    }

    /// The quadratic `t -> f(X + t D)` is minimized at `-<R, D>_Omega / |D|_Omega^2`.
    fn line_guess(&self, egrad: &AmbientVector, d: &TangentVector) -> Option<f64> {
        let AmbientVector::Sparse(res) = egrad else { return None };
        let dv = d.values_at(&self.train);
        let num: f64 = res.values().iter().zip(&dv).map(|(r, d)| r * d).sum();
        let den: f64 = dv.iter().map(|d| d * d).sum();
        (den > 0.0).then(|| -num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tangent::test_util::*;
    use crate::tangent::{project_sparse, retract};

    fn data_for(p: &TtPoint, seed: u64, count: usize) -> SparseTensor {
        let spec = SamplingSpec::uniform(p.modes(), count, seed);
        let omega = sample_indices(&spec, p.modes()).unwrap();
        let mut a = sample_values(p.tensor(), &omega).unwrap();
        for (t, v) in a.values_mut().iter_mut().enumerate() {
            *v += ((t * 13 % 7) as f64 - 3.0) * 0.1;
        }
        a
    }

    #[test]
    fn cost_trivial_cases() {
        let p = point(&[3, 4, 3], &[2, 2], 1);
        let omega = sample_indices(&SamplingSpec::uniform(p.modes(), 10, 2), p.modes()).unwrap();
        let exact = sample_values(p.tensor(), &omega).unwrap();
        assert!(completion_cost(p.tensor(), &exact).unwrap() < 1e-28);
        assert!(completion_egrad(p.tensor(), &exact).unwrap().values().iter().all(|v| v.abs() < 1e-14));

        let idx = vec![1, 2, 0];
        let xv = p.tensor().entry(&idx).unwrap();
        let single = SparseTensor::new(p.modes(), vec![idx], vec![xv - 2.0]).unwrap();
        assert!((completion_cost(p.tensor(), &single).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cost_matches_dense_formula() {
        let p = point(&[3, 4, 3], &[2, 2], 3);
        let a = data_for(&p, 4, 20);
        let x = p.tensor().to_dense().unwrap();
        let expect: f64 = 0.5 * a.iter().map(|(i, v)| (x.get(i) - v).powi(2)).sum::<f64>();
        assert!((completion_cost(p.tensor(), &a).unwrap() - expect).abs() < 1e-12 * expect);
        let g = completion_egrad(p.tensor(), &a).unwrap();
        assert_eq!(g.flat_indices(), a.flat_indices());
    }

    #[test]
    fn gradient_matches_directional_derivative() {
        let p = point(&[3, 4, 3, 2], &[2, 3, 2], 5);
        let a = data_for(&p, 6, 40);
        let g = project_sparse(&p, &completion_egrad(p.tensor(), &a).unwrap()).unwrap();
        let f0 = completion_cost(p.tensor(), &a).unwrap();
        for seed in 0..20 {
            let v = tangent(&p, 100 + seed);
            let h = 1e-6;
            let fp = completion_cost(&retract(&v, h).unwrap(), &a).unwrap();
            let fm = completion_cost(&retract(&v, -h).unwrap(), &a).unwrap();
            let num = (fp - fm) / (2.0 * h);
            let exact = g.inner(&v).unwrap();
            assert!((num - exact).abs() <= 1e-5 * exact.abs().max(g.norm() * v.norm()), "{num} vs {exact}");
            let _ = f0;
        }
    }

    #[test]
    fn ehess_is_sampled_tangent() {
        let p = point(&[3, 4, 3], &[2, 2], 7);
        let a = data_for(&p, 8, 15);
        let v = tangent(&p, 9);
        let h = completion_ehess(&v, &a).unwrap();
        let vd = v.to_dense().unwrap();
        for (i, val) in h.iter() {
            assert!((val - vd.get(i)).abs() < 1e-12);
        }
        let z = completion_ehess(&TangentVector::zero(&p), &a).unwrap();
        assert!(z.values().iter().all(|&x| x == 0.0));
        // symmetric as a bilinear form on the tangent space
        let w = tangent(&p, 10);
        let hv = project_sparse(&p, &h).unwrap();
        let hw = project_sparse(&p, &completion_ehess(&w, &a).unwrap()).unwrap();
        let (x, y) = (hv.inner(&w).unwrap(), hw.inner(&v).unwrap());
        assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn line_guess_minimizes_linear_path() {
        let p = point(&[3, 4, 3], &[2, 2], 11);
        let prob = CompletionProblem::new(data_for(&p, 12, 25), None).unwrap();
        let d = tangent(&p, 13);
        let eg = prob.egrad(&p).unwrap();
        let t = prob.line_guess(&eg, &d).unwrap();
        let f = |s: f64| {
            let xd = p.tensor().to_dense().unwrap().add(&d.to_dense().unwrap().scaled(s));
            0.5 * prob.train.iter().map(|(i, v)| (xd.get(i) - v).powi(2)).sum::<f64>()
        };
        assert!(f(t) <= f(t + 1e-3) && f(t) <= f(t - 1e-3));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = point(&[3, 4, 3], &[2, 2], 14);
        let a = SparseTensor::empty(&[3, 3, 3]);
        assert!(completion_cost(p.tensor(), &a).is_err());
        assert!(CompletionProblem::new(SparseTensor::empty(&[3, 4, 3]), Some(a)).is_err());
    }
}
