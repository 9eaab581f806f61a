//! Per-sample kernels over an index set. Every routine walks each observed
//! index once with running row/column products of length `r`, so the cost
//! is `O(d |Omega| r^2)` and nothing of size `prod n` is ever allocated.
//!
//! Samples are processed in fixed-size chunks in parallel; partial sums are
//! reduced in chunk order, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::sparse::SparseTensor;
use crate::tt::Core;

const CHUNK: usize = 256;

/// Matrix families `A_k`, `B_k`, `C_k` stored as cores (`B`/`C` empty when
/// no direction was given).
#[derive(Clone, Debug)]
pub(crate) struct Families {
    pub a: Vec<Core>,
    pub b: Vec<Core>,
    pub c: Vec<Core>,
}

fn zeros_like(cores: &[Core]) -> Vec<Core> {
    cores.iter().map(|c| Core::zeros(c.left(), c.mode(), c.right())).collect()
}

fn buffers(cores: &[Core]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = cores.iter().map(|c| vec![0.0; c.left()]).collect();
    out.push(vec![0.0; 1]);
    out
}

/// `(&v[a], &mut v[b])` for `a != b`.
#[inline]
fn pair(v: &mut [Vec<f64>], a: usize, b: usize) -> (&[f64], &mut [f64]) {
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&hi[0], &mut lo[b])
    }
}

fn left_products(cores: &[Core], idx: &[usize], l: &mut [Vec<f64>]) {
    l[0][0] = 1.0;
    for (c, core) in cores.iter().enumerate() {
        let (src, dst) = pair(l, c, c + 1);
        core.row_times_slice(src, idx[c], dst);
    }
}

fn right_products(cores: &[Core], idx: &[usize], r: &mut [Vec<f64>]) {
    let d = cores.len();
    r[d][0] = 1.0;
    for c in (0..d).rev() {
        let (src, dst) = pair(r, c + 1, c);
        cores[c].slice_times_col(idx[c], src, dst);
    }
}

/// Entries of the TT tensor with the given cores on the index set of `z`.
pub(crate) fn tt_values(cores: &[Core], z: &SparseTensor) -> Vec<f64> {
    let d = cores.len();
    z.flat_indices()
        .par_chunks(CHUNK * d)
        .flat_map_iter(|chunk| {
            let mut l = buffers(cores);
            chunk
                .chunks(d)
                .map(|idx| {
                    left_products(cores, idx, &mut l);
                    l[d][0]
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Entries of `sum_k [U_1..U_{k-1}, V_k, W_{k+1}..W_d]` on the index set of `z`.
pub(crate) fn tangent_values(left: &[Core], right: &[Core], var: &[Core], z: &SparseTensor) -> Vec<f64> {
    let d = left.len();
    z.flat_indices()
        .par_chunks(CHUNK * d)
        .flat_map_iter(|chunk| {
            let mut l = buffers(left);
            let mut s = buffers(left);
            chunk
                .chunks(d)
                .map(|idx| {
                    l[0][0] = 1.0;
                    s[0][0] = 0.0;
                    for c in 0..d {
                        let (src, dst) = pair(&mut s, c, c + 1);
                        right[c].row_times_slice(src, idx[c], dst);
                        var[c].row_times_slice_add(&l[c], idx[c], dst);
                        let (src, dst) = pair(&mut l, c, c + 1);
                        left[c].row_times_slice(src, idx[c], dst);
                    }
                    s[d][0]
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// One pass over `Omega` accumulating
///
/// * `A_k = (I (x) X_{<k})^T Z^{<k>} X~_{>k}`
/// * `B_k = (I (x) V_{<k})^T Z^{<k>} X~_{>k}`
/// * `C_k = (I (x) X_{<k})^T Z^{<k>} V_{>k}`
///
/// with `left` the left-orthogonal cores, `tilde` the right-orthogonal ones
/// and `dv` the first-parametrization cores of `V` (optional).
pub(crate) fn families(left: &[Core], tilde: &[Core], dv: Option<&[Core]>, z: &SparseTensor) -> Families {
    let d = left.len();
    let partials: Vec<Families> = z
        .flat_indices()
        .par_chunks(CHUNK * d)
        .zip(z.values().par_chunks(CHUNK))
        .map(|(chunk, vals)| families_chunk(left, tilde, dv, chunk, vals))
        .collect();
    let mut out = Families {
        a: zeros_like(left),
        b: if dv.is_some() { zeros_like(left) } else { Vec::new() },
        c: if dv.is_some() { zeros_like(left) } else { Vec::new() },
    };
    for p in partials {
        for (o, x) in out.a.iter_mut().zip(&p.a) {
            o.axpy(1.0, x);
        }
        for (o, x) in out.b.iter_mut().zip(&p.b) {
            o.axpy(1.0, x);
        }
        for (o, x) in out.c.iter_mut().zip(&p.c) {
            o.axpy(1.0, x);
        }
    }
    out
}

fn families_chunk(left: &[Core], tilde: &[Core], dv: Option<&[Core]>, flat: &[usize], vals: &[f64]) -> Families {
    let d = left.len();
    let mut a = zeros_like(left);
    let mut b = if dv.is_some() { zeros_like(left) } else { Vec::new() };
    let mut cc = if dv.is_some() { zeros_like(left) } else { Vec::new() };
    let mut l = buffers(left);
    let mut rt = buffers(left);
    let mut dl = buffers(left);
    let mut ru = buffers(left);
    let mut dr = buffers(left);
    for (idx, &z) in flat.chunks(d).zip(vals) {
        if z == 0.0 {
            continue;
        }
        left_products(left, idx, &mut l);
        right_products(tilde, idx, &mut rt);
        for c in 0..d {
            a[c].add_outer(idx[c], z, &l[c], &rt[c + 1]);
        }
        let Some(dv) = dv else { continue };
        // variational left rows: dl[c+1] = dl[c] U_c + l[c] dV_c
        dl[0][0] = 0.0;
        for c in 0..d {
            let (src, dst) = pair(&mut dl, c, c + 1);
            left[c].row_times_slice(src, idx[c], dst);
            dv[c].row_times_slice_add(&l[c], idx[c], dst);
        }
        right_products(left, idx, &mut ru);
        // variational right columns: dr[c] = U_c dr[c+1] + dV_c ru[c+1]
        dr[d][0] = 0.0;
        for c in (0..d).rev() {
            let (src, dst) = pair(&mut dr, c + 1, c);
            left[c].slice_times_col(idx[c], src, dst);
            dv[c].slice_times_col_add(idx[c], &ru[c + 1], dst);
        }
        // V_{<1} = 0, so B_1 gets nothing; V_{>d} = 0, so C_d gets nothing
        for c in 1..d {
            b[c].add_outer(idx[c], z, &dl[c], &rt[c + 1]);
        }
        for c in 0..d - 1 {
            cc[c].add_outer(idx[c], z, &l[c], &dr[c + 1]);
        }
    }
    Families { a, b, c: cc }
}
