//! Tensors in TT format: representation, flattenings, orthogonalization,
//! TT-SVD and rounding, inner products and dense oracles.

mod core;
mod dense;
pub mod io;
mod ortho;
mod svd;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TtError};

pub use self::core::Core;
pub use self::dense::{check_desk_cap, desk_cap, DenseTensor, DEFAULT_DESK_CAP};
pub use self::ortho::{mu_orthogonalize, right_orthogonalize_with_r, RightOrthFactors};
pub use self::svd::{tt_rank, tt_round, tt_round_exact, tt_svd, RankTarget};


/// Mode sizes `n[0..d]` and ranks `r[0..=d]` with `r[0] = r[d] = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub modes: Vec<usize>,
    pub ranks: Vec<usize>,
}

impl Shape {
    /// Shape from modes and the interior ranks `(r_1, ..., r_{d-1})`.
    pub fn new(modes: Vec<usize>, interior: &[usize]) -> Result<Self> {
        if interior.len() + 1 != modes.len() {
            return Err(TtError::InvalidShape(format!(
                "{} interior ranks for order {}",
                interior.len(),
                modes.len()
            )));
        }
        let mut ranks = Vec::with_capacity(modes.len() + 1);
        ranks.push(1);
        ranks.extend_from_slice(interior);
        ranks.push(1);
        let s = Shape { modes, ranks };
        s.validate()?;
        Ok(s)
    }

    pub fn uniform(d: usize, n: usize, r: usize) -> Result<Self> {
        Shape::new(vec![n; d], &vec![r; d.saturating_sub(1)])
    }

    /// Uniform modes with every rank capped at the largest feasible value
    /// `min(r, n^k, n^(d-k))`.
    pub fn capped(d: usize, n: usize, r: usize) -> Result<Self> {
        let cap = |k: usize| (0..k.min(d - k)).try_fold(1usize, |acc, _| acc.checked_mul(n)).unwrap_or(usize::MAX);
        let interior: Vec<usize> = (1..d).map(|k| r.min(cap(k))).collect();
        Shape::new(vec![n; d], &interior)
    }

    pub fn order(&self) -> usize {
        self.modes.len()
    }

    pub fn interior_ranks(&self) -> &[usize] {
        &self.ranks[1..self.ranks.len() - 1]
    }

    /// Checks `d >= 2`, boundary ranks, and `r[k-1] <= n[k] r[k]`, `r[k] <= n[k] r[k-1]`.
    pub fn validate(&self) -> Result<()> {
        let d = self.modes.len();
        if d < 2 {
            return Err(TtError::InvalidShape(format!("order {d} < 2")));
        }
        if self.ranks.len() != d + 1 || self.ranks[0] != 1 || self.ranks[d] != 1 {
            return Err(TtError::InvalidShape(format!("bad rank vector {:?}", self.ranks)));
        }
        if self.modes.iter().any(|&n| n == 0) || self.ranks.iter().any(|&r| r == 0) {
            return Err(TtError::InvalidShape("zero mode size or rank".into()));
        }
        for k in 0..d {
            let (rl, n, rr) = (self.ranks[k], self.modes[k], self.ranks[k + 1]);
            if rl > n * rr || rr > n * rl {
                return Err(TtError::InfeasibleRanks { ranks: self.ranks.clone(), modes: self.modes.clone() });
            }
        }
        if self.manifold_dim() == 0 {
            return Err(TtError::InvalidShape("manifold dimension is not positive".into()));
        }
        Ok(())
    }

    /// `sum r[i-1] n[i] r[i] - sum_{i=1}^{d-1} r[i]^2`.
    pub fn manifold_dim(&self) -> usize {
        let d = self.modes.len();
        let params: usize = (0..d).map(|k| self.ranks[k] * self.modes[k] * self.ranks[k + 1]).sum();
        let gauge: usize = self.ranks[1..d].iter().map(|r| r * r).sum();
        params.saturating_sub(gauge)
    }

    pub fn num_entries(&self) -> f64 {
        self.modes.iter().map(|&n| n as f64).product()
    }
}

/// Orthogonality bookkeeping of a decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orthogonality {
    None,
    /// Cores before `mu` left-orthogonal, cores after `mu` right-orthogonal (0-based).
    Mu(usize),
    Left,
    Right,
}

impl Orthogonality {
    /// Normalized tag for a `mu`-orthogonal decomposition of order `d`.
    pub fn for_mu(mu: usize, d: usize) -> Self {
        if mu + 1 == d {
            Orthogonality::Left
        } else if mu == 0 {
            Orthogonality::Right
        } else {
            Orthogonality::Mu(mu)
        }
    }
}

/// A tensor in TT format: `X(i_1..i_d) = U_1(i_1) ... U_d(i_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TtTensor {
    modes: Vec<usize>,
    cores: Vec<Core>,
    orth: Orthogonality,
}

impl TtTensor {
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        Self::with_orth(cores, Orthogonality::None)
    }

    pub(crate) fn with_orth(cores: Vec<Core>, orth: Orthogonality) -> Result<Self> {
        if cores.len() < 2 {
            return Err(TtError::InvalidShape("a TT tensor needs at least two cores".into()));
        }
        if cores[0].left() != 1 || cores[cores.len() - 1].right() != 1 {
            return Err(TtError::InvalidShape("boundary ranks must be 1".into()));
        }
        for w in cores.windows(2) {
            if w[0].right() != w[1].left() {
                return Err(TtError::ShapeMismatch(format!(
                    "adjacent cores with ranks {} and {}",
                    w[0].right(),
                    w[1].left()
                )));
            }
        }
        let modes = cores.iter().map(|c| c.mode()).collect();
        Ok(TtTensor { modes, cores, orth })
    }

    pub fn zeros(shape: &Shape) -> Self {
        let cores = (0..shape.order())
            .map(|k| Core::zeros(shape.ranks[k], shape.modes[k], shape.ranks[k + 1]))
            .collect();
        TtTensor { modes: shape.modes.clone(), cores, orth: Orthogonality::None }
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }
    pub fn modes(&self) -> &[usize] {
        &self.modes
    }
    pub fn cores(&self) -> &[Core] {
        &self.cores
    }
    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }
    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }
    pub fn orth(&self) -> Orthogonality {
        self.orth
    }
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.left()).collect();
        r.push(1);
        r
    }
    pub fn shape(&self) -> Shape {
        Shape { modes: self.modes.clone(), ranks: self.ranks() }
    }

    /// Mutable access drops the orthogonality tag.
    pub fn cores_mut(&mut self) -> &mut [Core] {
        self.orth = Orthogonality::None;
        &mut self.cores
    }

    pub fn scaled(&self, alpha: f64) -> TtTensor {
        let mut out = self.clone();
        let last = out.cores.len() - 1;
        out.cores[last].scale(alpha);
        out
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.order() || idx.iter().zip(&self.modes).any(|(&i, &n)| i >= n) {
            return Err(TtError::IndexOutOfBounds { index: idx.to_vec(), modes: self.modes.clone() });
        }
        Ok(())
    }

    /// Entry `U_1(i_1) ... U_d(i_d)`.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        self.check_index(idx)?;
        Ok(self.entry_unchecked(idx, &mut Vec::new(), &mut Vec::new()))
    }

    /// Entry evaluation with caller-provided scratch buffers.
    pub(crate) fn entry_unchecked(&self, idx: &[usize], buf: &mut Vec<f64>, tmp: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.push(1.0);
        for (core, &i) in self.cores.iter().zip(idx) {
            tmp.resize(core.right(), 0.0);
            core.row_times_slice(buf, i, tmp);
            std::mem::swap(buf, tmp);
        }
        buf[0]
    }

    /// Densify (subject to the desk cap).
    pub fn to_dense(&self) -> Result<DenseTensor> {
        check_desk_cap(&self.modes)?;
        let full = self.left_interface(self.order());
        DenseTensor::from_vec(&self.modes, full.as_slice().to_vec())
    }

    /// Left interface matrix of the first `k` cores, `X_{<=k}` of shape
    /// `(n_1 ... n_k) x r_k` with rows `U_1(i_1) ... U_k(i_k)`.
    pub fn left_interface(&self, k: usize) -> DMatrix<f64> {
        left_interface(&self.cores[..k])
    }

    /// Right interface matrix of the cores from `k` on, `X_{>=k+1}` (1-based)
    /// of shape `(n_{k} ... n_{d-1}) x r_k` with rows `(U_k(i_k) ... U_d(i_d))^T`.
    pub fn right_interface(&self, k: usize) -> DMatrix<f64> {
        right_interface(&self.cores[k..])
    }

    /// Euclidean norm via the Gram recursion.
    pub fn norm(&self) -> f64 {
        tt_inner(self, self).map(|g| g.value.max(0.0).sqrt()).unwrap_or(0.0)
    }
}

/// `X_{<=k}` for the given leading cores; `1x1` identity when empty.
pub fn left_interface(cores: &[Core]) -> DMatrix<f64> {
    let mut acc = DMatrix::from_element(1, 1, 1.0);
    for core in cores {
        let rows = acc.nrows();
        let mut next = DMatrix::zeros(rows * core.mode(), core.right());
        for i in 0..core.mode() {
            let block = &acc * core.slice(i);
            next.view_mut((i * rows, 0), (rows, core.right())).copy_from(&block);
        }
        acc = next;
    }
    acc
}

/// Tall right interface for the given trailing cores; `1x1` identity when empty.
pub fn right_interface(cores: &[Core]) -> DMatrix<f64> {
    let mut acc = DMatrix::from_element(1, 1, 1.0);
    for core in cores.iter().rev() {
        let rest = acc.nrows();
        let n = core.mode();
        let mut next = DMatrix::zeros(n * rest, core.left());
        for j in 0..rest {
            let tail = acc.row(j).transpose();
            for i in 0..n {
                let v = core.slice(i) * &tail;
                next.row_mut(i + n * j).copy_from(&v.transpose());
            }
        }
        acc = next;
    }
    acc
}

/// Result of a TT inner product with the Gram sequences it produces.
#[derive(Clone, Debug)]
pub struct TtInner {
    pub value: f64,
    /// `left[k] = X_{<=k}^T Y_{<=k}` for `k = 0..=d`.
    pub left: Vec<DMatrix<f64>>,
    /// `right[k] = X_{>=k}^T Y_{>=k}` over cores `k..d` for `k = 0..=d`.
    pub right: Vec<DMatrix<f64>>,
}

/// Left Gram recursion `G_{k+1} = sum_i U_k(i)^T G_k V_k(i)`.
pub fn left_grams(x: &[Core], y: &[Core]) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push(DMatrix::from_element(1, 1, 1.0));
    for (cx, cy) in x.iter().zip(y) {
        let g = out.last().unwrap();
        let mut next = DMatrix::zeros(cx.right(), cy.right());
        for i in 0..cx.mode() {
            next += cx.slice(i).transpose() * g * cy.slice(i);
        }
        out.push(next);
    }
    out
}

/// Right Gram recursion `H_k = sum_i U_k(i) H_{k+1} V_k(i)^T`.
pub fn right_grams(x: &[Core], y: &[Core]) -> Vec<DMatrix<f64>> {
    let d = x.len();
    let mut out = vec![DMatrix::from_element(1, 1, 1.0); d + 1];
    for k in (0..d).rev() {
        let (cx, cy) = (&x[k], &y[k]);
        let mut next = DMatrix::zeros(cx.left(), cy.left());
        for i in 0..cx.mode() {
            next += cx.slice(i) * &out[k + 1] * cy.slice(i).transpose();
        }
        out[k] = next;
    }
    out
}

pub fn tt_inner(x: &TtTensor, y: &TtTensor) -> Result<TtInner> {
    if x.modes != y.modes {
        return Err(TtError::ShapeMismatch(format!("modes {:?} vs {:?}", x.modes, y.modes)));
    }
    let left = left_grams(&x.cores, &y.cores);
    let right = right_grams(&x.cores, &y.cores);
    let value = left[x.order()][(0, 0)];
    Ok(TtInner { value, left, right })
}

/// Block-diagonal sum; ranks add, no rounding.
pub fn tt_add(x: &TtTensor, y: &TtTensor) -> Result<TtTensor> {
    if x.modes != y.modes {
        return Err(TtError::ShapeMismatch(format!("modes {:?} vs {:?}", x.modes, y.modes)));
    }
    let d = x.order();
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let (a, b) = (&x.cores[k], &y.cores[k]);
        let n = a.mode();
        let left = if k == 0 { 1 } else { a.left() + b.left() };
        let right = if k == d - 1 { 1 } else { a.right() + b.right() };
        let (bl, br) = (if k == 0 { 0 } else { a.left() }, if k == d - 1 { 0 } else { a.right() });
        let mut c = Core::zeros(left, n, right);
        for i in 0..n {
            for p in 0..a.right() {
                for q in 0..a.left() {
                    c.set(q, i, p, a.get(q, i, p));
                }
            }
            for p in 0..b.right() {
                for q in 0..b.left() {
                    c.set(bl + q, i, br + p, b.get(q, i, p));
                }
            }
        }
        cores.push(c);
    }
    TtTensor::from_cores(cores)
}

/// Random TT with i.i.d. standard normal cores, then left-orthogonalized.
pub fn random_tt_with<R: Rng + ?Sized>(shape: &Shape, rng: &mut R) -> Result<TtTensor> {
    shape.validate()?;
    let d = shape.order();
    let cores = (0..d)
        .map(|k| {
            Core::from_fn(shape.ranks[k], shape.modes[k], shape.ranks[k + 1], |_, _, _| {
                rng.sample::<f64, _>(StandardNormal)
            })
        })
        .collect();
    let x = TtTensor::from_cores(cores)?;
    mu_orthogonalize(&x, d - 1)
}

pub fn random_tt(shape: &Shape, seed: u64) -> Result<TtTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tt_with(shape, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TtTensor {
        random_tt(&Shape::new(vec![2, 3, 2], &[2, 2]).unwrap(), 7).unwrap()
    }

    #[test]
    fn dim_formula() {
        let s = Shape::new(vec![2, 3, 2], &[2, 2]).unwrap();
        assert_eq!(s.manifold_dim(), 12);
        let fig1 = Shape::new(vec![4; 9], &[3, 5, 10, 10, 10, 10, 5, 3]).unwrap();
        assert_eq!(fig1.manifold_dim(), 1276);
    }

    #[test]
    fn infeasible_shape_rejected() {
        assert!(matches!(Shape::new(vec![2, 2], &[3]), Err(TtError::InfeasibleRanks { .. })));
        assert!(Shape::new(vec![2], &[]).is_err());
    }

    #[test]
    fn capped_ranks() {
        let s = Shape::capped(30, 4, 5).unwrap();
        assert_eq!(&s.ranks[..3], &[1, 4, 5]);
        assert_eq!(&s.ranks[28..], &[5, 4, 1]);
        assert_eq!(Shape::capped(3, 2, 9).unwrap().interior_ranks(), &[2, 2]);
        assert_eq!(Shape::capped(64, 2, 3).unwrap().ranks[32], 3);
    }

    #[test]
    fn rank_one_entries_are_products() {
        let a = [1.0, 2.0];
        let b = [3.0, -1.0, 0.5];
        let c0 = Core::from_fn(1, 2, 1, |_, i, _| a[i]);
        let c1 = Core::from_fn(1, 3, 1, |_, i, _| b[i]);
        let x = TtTensor::from_cores(vec![c0, c1]).unwrap();
        assert_eq!(x.entry(&[1, 2]).unwrap(), 1.0);
        let dense = x.to_dense().unwrap();
        assert_eq!(dense.get(&[1, 0]), 6.0);
    }

    #[test]
    fn zero_core_gives_zero() {
        let mut x = small();
        x.cores_mut()[1] = Core::zeros(2, 3, 2);
        assert_eq!(x.entry(&[1, 2, 1]).unwrap(), 0.0);
    }

    #[test]
    fn entry_rejects_out_of_bounds() {
        let x = small();
        assert!(matches!(x.entry(&[2, 0, 0]), Err(TtError::IndexOutOfBounds { .. })));
        assert!(x.entry(&[0, 0]).is_err());
    }

    #[test]
    fn interface_rows_are_partial_products() {
        let x = small();
        let l2 = x.left_interface(2);
        let r1 = x.right_interface(1);
        for i0 in 0..2 {
            for i1 in 0..3 {
                let p = x.core(0).slice(i0) * x.core(1).slice(i1);
                for b in 0..2 {
                    assert!((l2[(i0 + 2 * i1, b)] - p[(0, b)]).abs() < 1e-14);
                }
                for i2 in 0..2 {
                    let q = x.core(1).slice(i1) * x.core(2).slice(i2);
                    for a in 0..2 {
                        assert!((r1[(i1 + 3 * i2, a)] - q[(a, 0)]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn add_with_negation_is_zero() {
        let x = small();
        let s = tt_add(&x, &x.scaled(-1.0)).unwrap();
        assert_eq!(s.ranks(), vec![1, 4, 4, 1]);
        assert!(s.to_dense().unwrap().norm() < 1e-12);
        let z = tt_add(&x, &TtTensor::zeros(&x.shape())).unwrap();
        assert!(z.to_dense().unwrap().sub(&x.to_dense().unwrap()).norm() < 1e-14);
    }

    #[test]
    fn random_is_deterministic() {
        let s = Shape::new(vec![3, 3, 3], &[2, 2]).unwrap();
        assert_eq!(random_tt(&s, 3).unwrap(), random_tt(&s, 3).unwrap());
        let a = random_tt(&s, 3).unwrap();
        let b = random_tt(&s, 4).unwrap();
        let cos = tt_inner(&a, &b).unwrap().value / (a.norm() * b.norm());
        assert!(cos < 1.0 - 1e-6);
        assert_eq!(a.orth(), Orthogonality::Left);
    }

    #[test]
    fn inner_with_zero() {
        let x = small();
        let z = TtTensor::zeros(&x.shape());
        assert_eq!(tt_inner(&x, &z).unwrap().value, 0.0);
    }
}
