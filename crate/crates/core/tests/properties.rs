use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ttman::completion::{completion_cost, sample_indices, SamplingSpec};
use ttman::optim::{riemannian_hess, Problem};
use ttman::tangent::{project_dense, project_sparse, retract, tangent_to_tt};
use ttman::tt::io::{read_cores, write_cores};
use ttman::{
    mu_orthogonalize, random_tt, tt_add, tt_inner, tt_round, CompletionProblem, DenseTensor, Shape, SparseTensor,
    TangentVector, TtPoint, TtTensor,
};

/// `(d, n, r)` with ranks capped to feasibility; at most 4^4 entries.
fn shapes() -> impl Strategy<Value = Shape> {
    (2usize..=4, 2usize..=4, 1usize..=3).prop_map(|(d, n, r)| Shape::capped(d, n, r).unwrap())
}

fn dense(modes: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(modes, |_| rng.sample(StandardNormal)).unwrap()
}

fn tangent(p: &Arc<TtPoint>, seed: u64) -> TangentVector {
    TangentVector::random(p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn rel_gap(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.sub(b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn orthogonalization_keeps_entries(shape in shapes(), seed in any::<u64>(), mu in 0usize..4) {
        let x = random_tt(&shape, seed).unwrap();
        let mu = mu % shape.order();
        let y = mu_orthogonalize(&x, mu).unwrap();
        prop_assert!(rel_gap(&y.to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-12);
    }

    #[test]
    fn rounding_a_padded_sum_recovers_the_tensor(shape in shapes(), seed in any::<u64>()) {
        let x = random_tt(&shape, seed).unwrap();
        let zero = x.scaled(0.0);
        let y = tt_round(&tt_add(&x, &zero).unwrap(), shape.interior_ranks()).unwrap();
        prop_assert!(rel_gap(&y.to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-11);
        prop_assert!(y.ranks().iter().zip(x.ranks()).all(|(a, b)| *a <= b));
    }

    #[test]
    fn inner_product_matches_dense(shape in shapes(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let x = random_tt(&shape, s1).unwrap();
        let y = random_tt(&shape, s2).unwrap();
        let expect = x.to_dense().unwrap().dot(&y.to_dense().unwrap());
        let got = tt_inner(&x, &y).unwrap().value;
        prop_assert!((got - expect).abs() <= 1e-11 * x.norm() * y.norm());
    }

    #[test]
    fn projection_is_an_orthogonal_projector(shape in shapes(), seed in any::<u64>()) {
        let p = TtPoint::new(&random_tt(&shape, seed).unwrap()).unwrap();
        let z = dense(&shape.modes, seed ^ 1);
        let pz = project_dense(&p, &z).unwrap();
        let pzd = pz.to_dense().unwrap();
        let ppz = project_dense(&p, &pzd).unwrap().to_dense().unwrap();
        prop_assert!(ppz.sub(&pzd).norm() <= 1e-11 * z.norm());
        // the residual is orthogonal to the tangent space
        let v = tangent(&p, seed ^ 2);
        let resid = z.sub(&pzd);
        prop_assert!(resid.dot(&v.to_dense().unwrap()).abs() <= 1e-11 * z.norm() * v.norm());
        // inner products of tangent vectors agree with the ambient ones
        prop_assert!((pz.inner(&v).unwrap() - pzd.dot(&v.to_dense().unwrap())).abs() <= 1e-11 * z.norm() * v.norm());
    }

    #[test]
    fn sparse_projection_matches_dense(shape in shapes(), seed in any::<u64>(), frac in 0.1f64..1.0) {
        let p = TtPoint::new(&random_tt(&shape, seed).unwrap()).unwrap();
        let n = shape.num_entries() as usize;
        let count = ((frac * n as f64) as usize).max(1);
        let omega = sample_indices(&SamplingSpec::uniform(&shape.modes, count, seed), &shape.modes).unwrap();
        prop_assert_eq!(omega.nnz(), count);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let z = omega.with_values((0..count).map(|_| rng.sample(StandardNormal)).collect());
        let a = project_sparse(&p, &z).unwrap().to_dense().unwrap();
        let b = project_dense(&p, &z.to_dense().unwrap()).unwrap().to_dense().unwrap();
        prop_assert!(a.sub(&b).norm() <= 1e-12 * z.norm().max(1.0));
    }

    #[test]
    fn tangent_vector_as_tt_has_doubled_rank(shape in shapes(), seed in any::<u64>()) {
        let p = TtPoint::new(&random_tt(&shape, seed).unwrap()).unwrap();
        let v = tangent(&p, seed ^ 4);
        let t = tangent_to_tt(&v);
        prop_assert!(rel_gap(&t.to_dense().unwrap(), &v.to_dense().unwrap()) < 1e-12);
        prop_assert!(t.ranks().iter().zip(shape.ranks.iter()).all(|(a, b)| *a <= 2 * b));
    }

    #[test]
    fn retraction_is_second_order(shape in shapes(), seed in any::<u64>()) {
        let x = random_tt(&shape, seed).unwrap();
        let p = TtPoint::new(&x).unwrap();
        let v = tangent(&p, seed ^ 5);
        let v = v.scaled(x.norm() / v.norm());
        let xd = x.to_dense().unwrap();
        let vd = v.to_dense().unwrap();
        let err = |t: f64| retract(&v, t).unwrap().to_dense().unwrap().sub(&xd.add(&vd.scaled(t))).norm();
        prop_assert!(err(0.0) <= 1e-12 * x.norm());
        let (e1, e2) = (err(1e-3), err(5e-4));
        // halving t divides the error by about 4
        prop_assert!(e2 <= 0.3 * e1 + 1e-12 * x.norm(), "{} {}", e1, e2);
    }

    #[test]
    fn completion_hessian_is_symmetric(shape in shapes(), seed in any::<u64>()) {
        let p = TtPoint::new(&random_tt(&shape, seed).unwrap()).unwrap();
        let n = shape.num_entries() as usize;
        let omega = sample_indices(&SamplingSpec::uniform(&shape.modes, n.div_ceil(2), seed), &shape.modes).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 6);
        let data = omega.with_values((0..omega.nnz()).map(|_| rng.sample(StandardNormal)).collect());
        let prob = CompletionProblem::new(data, None).unwrap();
        let eg = prob.egrad(&p).unwrap();
        let v = tangent(&p, seed ^ 7);
        let w = tangent(&p, seed ^ 8);
        let hv = riemannian_hess(&prob, &v, &eg).unwrap();
        let hw = riemannian_hess(&prob, &w, &eg).unwrap();
        let scale = v.norm() * w.norm() * (hv.norm() / v.norm()).max(hw.norm() / w.norm()).max(1.0);
        prop_assert!((hv.inner(&w).unwrap() - v.inner(&hw).unwrap()).abs() <= 1e-10 * scale);
    }

    #[test]
    fn cost_is_zero_on_exact_samples(shape in shapes(), seed in any::<u64>()) {
        let x = random_tt(&shape, seed).unwrap();
        let n = shape.num_entries() as usize;
        let omega = sample_indices(&SamplingSpec::uniform(&shape.modes, n.min(20), seed), &shape.modes).unwrap();
        let values = omega.iter().map(|(i, _)| x.entry(i).unwrap()).collect();
        let a = omega.with_values(values);
        prop_assert!(completion_cost(&x, &a).unwrap() <= 1e-24 * x.norm().powi(2));
    }

    #[test]
    fn file_formats_round_trip(shape in shapes(), seed in any::<u64>()) {
        let x = random_tt(&shape, seed).unwrap();
        let mut buf = Vec::new();
        write_cores(&mut buf, x.cores()).unwrap();
        let (s, cores) = read_cores(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(&s, &shape);
        let y = TtTensor::from_cores(cores).unwrap();
        let (yd, xd) = (y.to_dense().unwrap(), x.to_dense().unwrap());
        prop_assert_eq!(yd.data(), xd.data());

        let omega = sample_indices(&SamplingSpec::uniform(&shape.modes, 3, seed), &shape.modes).unwrap();
        let z = omega.with_values(vec![1.5, -2.0, f64::MIN_POSITIVE]);
        let mut buf = Vec::new();
        z.write(&mut buf).unwrap();
        let back = SparseTensor::read(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.flat_indices(), z.flat_indices());
        prop_assert_eq!(back.values(), z.values());
    }
}
