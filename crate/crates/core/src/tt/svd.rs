use nalgebra::DMatrix;

use super::{Core, DenseTensor, Orthogonality, TtTensor};
use crate::error::{Result, TtError};
use crate::linalg::{numerical_rank, singular_values, svd_sorted, thin_qr};

/// Truncation target for TT-SVD.
#[derive(Clone, Debug, PartialEq)]
pub enum RankTarget {
    /// Interior ranks `(r_1, ..., r_{d-1})`; each is clipped to the numerical
    /// rank of the corresponding unfolding.
    Ranks(Vec<usize>),
    /// Relative Frobenius accuracy of the whole decomposition.
    Tolerance(f64),
}

fn is_zero(t: &DenseTensor) -> bool {
    t.data().iter().all(|&v| v == 0.0)
}

/// Numerical TT-rank `(rank(Z^{<1>}), ..., rank(Z^{<d-1>}))`.
///
/// Singular values at or below `max(rows, cols) * eps * sigma_max` count as zero.
pub fn tt_rank(t: &DenseTensor) -> Result<Vec<usize>> {
    if is_zero(t) {
        return Err(TtError::ZeroTensor);
    }
    (1..t.order())
        .map(|mu| {
            let m = t.flatten(mu)?;
            let (r, c) = m.shape();
            let s = singular_values(&m);
            Ok(numerical_rank(&s, r, c))
        })
        .collect()
}

/// Sequential-SVD decomposition; the result is left-orthogonal.
pub fn tt_svd(t: &DenseTensor, target: &RankTarget) -> Result<TtTensor> {
    let d = t.order();
    if d < 2 {
        return Err(TtError::InvalidShape("order < 2".into()));
    }
    if is_zero(t) {
        return Err(TtError::ZeroTensor);
    }
    let modes = t.modes().to_vec();
    let per_step = match target {
        RankTarget::Ranks(r) => {
            if r.len() != d - 1 || r.contains(&0) {
                let mut ranks = vec![1];
                ranks.extend_from_slice(r);
                ranks.push(1);
                return Err(TtError::InfeasibleRanks { ranks, modes });
            }
            None
        }
        RankTarget::Tolerance(eps) => Some(eps * t.norm() / ((d - 1) as f64).sqrt()),
    };

    let mut cores = Vec::with_capacity(d);
    let mut rest = DMatrix::from_column_slice(1, t.len(), t.data());
    let mut r_prev = 1;
    for k in 0..d - 1 {
        let rows = r_prev * modes[k];
        let cols = rest.len() / rows;
        let m = DMatrix::from_column_slice(rows, cols, rest.as_slice());
        let (u, s, vt) = svd_sorted(m);
        let numerical = numerical_rank(&s, rows, cols).max(1);
        let keep = match (target, per_step) {
            (RankTarget::Ranks(r), _) => r[k].min(numerical),
            (_, Some(delta)) => {
                // smallest rank whose discarded tail is below delta
                let mut tail = 0.0;
                let mut keep = s.len();
                while keep > 1 {
                    let next = tail + s[keep - 1] * s[keep - 1];
                    if next.sqrt() > delta {
                        break;
                    }
                    tail = next;
                    keep -= 1;
                }
                keep.min(numerical)
            }
            _ => unreachable!(),
        };
        cores.push(Core::from_left_unfolding(&u.columns(0, keep).into_owned(), r_prev, modes[k]));
        let mut sv = vt.rows(0, keep).into_owned();
        for (i, mut row) in sv.row_iter_mut().enumerate() {
            row *= s[i];
        }
        rest = sv;
        r_prev = keep;
    }
    cores.push(Core::from_vec(r_prev, modes[d - 1], 1, rest.as_slice().to_vec()));
    TtTensor::with_orth(cores, Orthogonality::Left)
}

fn round_impl(x: &TtTensor, target: &[usize], exact: bool) -> Result<TtTensor> {
    let d = x.order();
    if target.len() != d - 1 || target.contains(&0) {
        let mut ranks = vec![1];
        ranks.extend_from_slice(target);
        ranks.push(1);
        return Err(TtError::InfeasibleRanks { ranks, modes: x.modes().to_vec() });
    }
    let mut cores = x.cores().to_vec();
    // right-orthogonalize without truncation; Householder QR copes with rank-deficient sums
    for k in (1..d).rev() {
        let (_, n, rr) = cores[k].dims();
        let (q, r) = thin_qr(cores[k].right_unfolding().transpose());
        cores[k] = Core::from_right_unfolding(&q.transpose(), n, rr);
        cores[k - 1] = cores[k - 1].mul_right(&r.transpose());
    }
    for k in 0..d - 1 {
        let (l, n, _) = cores[k].dims();
        let m = cores[k].left_unfolding();
        let (rows, cols) = m.shape();
        let (u, s, vt) = svd_sorted(m);
        let avail = s.len();
        let keep = if exact {
            if target[k] > avail {
                return Err(TtError::RankDeficient { core: k, ratio: 0.0 });
            }
            let smax = s[0];
            let cutoff = rows.max(cols) as f64 * f64::EPSILON * smax;
            let sk = s[target[k] - 1];
            if smax == 0.0 || sk <= cutoff {
                return Err(TtError::RankDeficient { core: k, ratio: if smax > 0.0 { sk / smax } else { 0.0 } });
            }
            target[k]
        } else {
            target[k].min(numerical_rank(&s, rows, cols).max(1)).min(avail)
        };
        cores[k] = Core::from_left_unfolding(&u.columns(0, keep).into_owned(), l, n);
        let mut sv = vt.rows(0, keep).into_owned();
        for (i, mut row) in sv.row_iter_mut().enumerate() {
            row *= s[i];
        }
        cores[k + 1] = cores[k + 1].mul_left(&sv);
    }
    TtTensor::with_orth(cores, Orthogonality::Left)
}

/// TT rounding to ranks at most `target` (interior ranks), clipped to the
/// numerical ranks. The result is left-orthogonal and minimal.
pub fn tt_round(x: &TtTensor, target: &[usize]) -> Result<TtTensor> {
    round_impl(x, target, false)
}

/// TT rounding to exactly `target`; reports rank deficiency instead of
/// shrinking a rank.
pub fn tt_round_exact(x: &TtTensor, target: &[usize]) -> Result<TtTensor> {
    round_impl(x, target, true)
}
