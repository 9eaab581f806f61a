use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TtError};
use crate::sparse::SparseTensor;
use crate::tangent::kernels;
use crate::tt::TtTensor;

/// Per-mode categorical distributions, a sample count and a seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub p: Vec<Vec<f64>>,
    pub count: usize,
    pub seed: u64,
}

impl SamplingSpec {
    pub fn uniform(modes: &[usize], count: usize, seed: u64) -> SamplingSpec {
        let p = modes.iter().map(|&n| vec![1.0 / n as f64; n]).collect();
        SamplingSpec { p, count, seed }
    }

    /// The same distribution `p` on every mode.
    pub fn repeated(p: &[f64], order: usize, count: usize, seed: u64) -> SamplingSpec {
        SamplingSpec { p: vec![p.to_vec(); order], count, seed }
    }

    pub fn validate(&self, modes: &[usize]) -> Result<()> {
        if self.count == 0 {
            return Err(TtError::Sampling("sample count must be at least 1".into()));
        }
        validate_p(&self.p, modes)?;
        let support: f64 = self.p.iter().map(|pk| pk.iter().filter(|&&x| x > 0.0).count() as f64).product();
        if self.count as f64 > support {
            return Err(TtError::Sampling(format!(
                "{} distinct indices requested but the support has only {support}",
                self.count
            )));
        }
        Ok(())
    }
}

fn validate_p(p: &[Vec<f64>], modes: &[usize]) -> Result<()> {
    if p.len() != modes.len() {
        return Err(TtError::Sampling(format!("{} distributions for {} modes", p.len(), modes.len())));
    }
    for (k, (pk, &n)) in p.iter().zip(modes).enumerate() {
        if pk.len() != n {
            return Err(TtError::Sampling(format!("mode {k}: distribution of length {} for size {n}", pk.len())));
        }
        if pk.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(TtError::Sampling(format!("mode {k}: negative or non-finite probability")));
        }
        let s: f64 = pk.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(TtError::Sampling(format!("mode {k}: probabilities sum to {s}")));
        }
    }
    Ok(())
}

/// `count` distinct multi-indices drawn coordinate-wise from `p`; duplicates
/// are rejected and redrawn. Returned as an index set with zero values.
pub fn sample_indices_with<R: Rng + ?Sized>(
    p: &[Vec<f64>],
    count: usize,
    modes: &[usize],
    rng: &mut R,
) -> Result<SparseTensor> {
    SamplingSpec { p: p.to_vec(), count, seed: 0 }.validate(modes)?;
    let dists = p
        .iter()
        .map(|pk| WeightedIndex::new(pk).map_err(|e| TtError::Sampling(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = HashSet::with_capacity(count);
    let mut indices = Vec::with_capacity(count);
    let budget = 1000 * count + 1_000_000;
    let mut draws = 0;
    while indices.len() < count {
        if draws == budget {
            return Err(TtError::Sampling(format!("only {} distinct indices after {draws} draws", indices.len())));
        }
        draws += 1;
        let idx: Vec<usize> = dists.iter().map(|w| w.sample(rng)).collect();
        if seen.insert(idx.clone()) {
            indices.push(idx);
        }
    }
    SparseTensor::new(modes, indices, vec![0.0; count])
}

pub fn sample_indices(spec: &SamplingSpec, modes: &[usize]) -> Result<SparseTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_indices_with(&spec.p, spec.count, modes, &mut rng)
}

/// Entries of `x` on the index set of `omega`.
pub fn sample_values(x: &TtTensor, omega: &SparseTensor) -> Result<SparseTensor> {
    if x.modes() != omega.modes() {
        return Err(TtError::ShapeMismatch(format!("{:?} vs {:?}", x.modes(), omega.modes())));
    }
    Ok(omega.with_values(kernels::tt_values(x.cores(), omega)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_and_deterministic() {
        let modes = [4, 4, 4];
        let spec = SamplingSpec::uniform(&modes, 40, 3);
        let a = sample_indices(&spec, &modes).unwrap();
        let b = sample_indices(&spec, &modes).unwrap();
        assert_eq!(a.flat_indices(), b.flat_indices());
        assert_eq!(a.nnz(), 40);
        let c = sample_indices(&SamplingSpec { seed: 4, ..spec }, &modes).unwrap();
        assert_ne!(a.flat_indices(), c.flat_indices());
    }

    #[test]
    fn full_support_is_reachable() {
        let modes = [2, 3, 2];
        let all = sample_indices(&SamplingSpec::uniform(&modes, 12, 1), &modes).unwrap();
        assert_eq!(all.nnz(), 12);
        assert!(sample_indices(&SamplingSpec::uniform(&modes, 13, 1), &modes).is_err());
    }

    #[test]
    fn degenerate_support() {
        let modes = [4, 4];
        let spec = SamplingSpec::repeated(&[1.0, 0.0, 0.0, 0.0], 2, 1, 0);
        let one = sample_indices(&spec, &modes).unwrap();
        assert_eq!(one.index(0), &[0, 0]);
        assert!(sample_indices(&SamplingSpec { count: 2, ..spec }, &modes).is_err());
    }

    #[test]
    fn invalid_specs() {
        let modes = [3, 3];
        let bad_sum = SamplingSpec::repeated(&[0.5, 0.2, 0.2], 2, 1, 0);
        assert!(sample_indices(&bad_sum, &modes).is_err());
        let negative = SamplingSpec::repeated(&[1.5, -0.5, 0.0], 2, 1, 0);
        assert!(sample_indices(&negative, &modes).is_err());
        let zero = SamplingSpec::uniform(&modes, 0, 0);
        assert!(sample_indices(&zero, &modes).is_err());
        let wrong_len = SamplingSpec::repeated(&[0.5, 0.5], 2, 1, 0);
        assert!(sample_indices(&wrong_len, &modes).is_err());
    }

    #[test]
    fn frequencies_follow_p() {
        // at d = 40 the expected number of rejected duplicates is below one,
        // so rejection does not bias the marginals; 160 two-sided checks at a
        // Bonferroni level of 1e-3 overall

        let d = 40;
        let p = [50.0 / 65.0, 12.0 / 65.0, 2.0 / 65.0, 1.0 / 65.0];
        let modes = [4; 40];
        let n = 10_000;
        let omega = sample_indices(&SamplingSpec::repeated(&p, d, n, 9), &modes).unwrap();
        for k in 0..d {
            let mut counts = [0usize; 4];
            for t in 0..n {
                counts[omega.index(t)[k]] += 1;
            }
            for i in 0..4 {
                let mean = n as f64 * p[i];
                let sd = (n as f64 * p[i] * (1.0 - p[i])).sqrt();
                assert!((counts[i] as f64 - mean).abs() <= 4.5 * sd, "mode {k} value {i}: {} vs {mean}", counts[i]);
            }
        }
    }
}
