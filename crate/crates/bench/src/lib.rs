//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttman::completion::{sample_indices, CompletionProblem, SamplingSpec};
use ttman::optim::Problem;
use ttman::{random_tt, AmbientVector, Shape, SparseTensor, TangentVector, TtPoint};

/// A point on the manifold, a tangent direction there, and completion data
/// whose residual is nonzero at the point.
pub struct Fixture {
    pub point: Arc<TtPoint>,
    pub v: TangentVector,
    pub problem: CompletionProblem,
    pub egrad: AmbientVector,
    pub ehess_v: AmbientVector,
}

impl Fixture {
    /// Uniform modes `n`, ranks capped at `r`, `count` sampled entries.
    pub fn new(d: usize, n: usize, r: usize, count: usize, seed: u64) -> Fixture {
        let shape = Shape::capped(d, n, r).unwrap();
        let point = TtPoint::new(&random_tt(&shape, seed).unwrap()).unwrap();
        let omega = sample_indices(&SamplingSpec::uniform(&shape.modes, count, seed + 1), &shape.modes).unwrap();
        let values = (0..omega.nnz()).map(|t| ((t * 7919) % 13) as f64 - 6.0).collect();
        let problem = CompletionProblem::new(omega.with_values(values), None).unwrap();
        let v = TangentVector::random(&point, &mut ChaCha8Rng::seed_from_u64(seed + 2));
        let egrad = problem.egrad(&point).unwrap();
        let ehess_v = problem.ehess(&v).unwrap();
        Fixture { point, v, problem, egrad, ehess_v }
    }

    pub fn residual(&self) -> &SparseTensor {
        match &self.egrad {
            AmbientVector::Sparse(s) => s,
            _ => unreachable!("completion gradients are sparse"),
        }
    }
}
