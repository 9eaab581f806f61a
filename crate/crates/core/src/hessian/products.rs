use nalgebra::DMatrix;

use crate::error::Result;
use crate::sparse::SparseTensor;
use crate::tangent::kernels;
use crate::tangent::project::{check_modes, contract_dense, dense_a_family};
use crate::tangent::{variational_interfaces, Param, TangentVector};
use crate::tt::{left_interface, right_interface, Core, DenseTensor};

/// The three matrix families
/// `A_k = (I (x) X_{<k})^T Z^{<k>} X~_{>k}`,
/// `B_k = (I (x) V_{<k})^T Z^{<k>} X~_{>k}`,
/// `C_k = (I (x) X_{<k})^T Z^{<k>} V_{>k}`, each stored as a core whose left
/// unfolding is the `r_{k-1} n_k x r_k` matrix.
#[derive(Clone, Debug)]
pub struct ThreeProducts {
    pub a: Vec<Core>,
    pub b: Vec<Core>,
    pub c: Vec<Core>,
}

fn first_param(v: &TangentVector) -> Result<TangentVector> {
    match v.param() {
        Param::First => Ok(v.clone()),
        Param::Gauged => v.to_first(),
    }
}

/// `G_k = X~_{>k}^T V_{>k}` for `k = 1..d-1` (entry `k-1` of the result,
/// i.e. the bond after 0-based core `k-1`), by the backward recursion
///
/// `G <- sum_i U~(i) (G U(i)^T + P dV(i)^T)`, `P <- sum_i U~(i) P U(i)^T`
///
/// starting from `G = U~_d^R (dV_d^R)^T`, `P = U~_d^R (U_d^R)^T`.
pub fn gram_right_tilde_v(v: &TangentVector) -> Result<Vec<DMatrix<f64>>> {
    let v = first_param(v)?;
    let p = v.base();
    let d = p.order();
    let mut out = vec![DMatrix::zeros(0, 0); d - 1];
    let last = p.tilde(d - 1).right_unfolding();
    let mut g = &last * v.core(d - 1).right_unfolding().transpose();
    let mut pp = &last * p.core(d - 1).right_unfolding().transpose();
    out[d - 2] = g.clone();
    for k in (1..d - 1).rev() {
        let ut = p.tilde(k);
        let u = p.core(k);
        let dv = v.core(k);
        let mut g_next = DMatrix::zeros(ut.left(), u.left());
        let mut p_next = DMatrix::zeros(ut.left(), u.left());
        for i in 0..u.mode() {
            let s = ut.slice(i);
            g_next += &s * (&g * u.slice(i).transpose() + &pp * dv.slice(i).transpose());
            p_next += &s * &pp * u.slice(i).transpose();
        }
        g = g_next;
        pp = p_next;
        out[k - 1] = g.clone();
    }
    Ok(out)
}

/// Single pass over the samples of a sparse `Z`.
pub fn three_products_sparse(v: &TangentVector, z: &SparseTensor) -> Result<ThreeProducts> {
    let v = first_param(v)?;
    let p = v.base();
    check_modes(p, z.modes())?;
    let f = kernels::families(p.cores(), p.tilde_cores(), Some(v.cores()), z);
    Ok(ThreeProducts { a: f.a, b: f.b, c: f.c })
}

/// Reference contraction with explicit interface matrices (desk scale).
pub fn three_products_dense(v: &TangentVector, z: &DenseTensor) -> Result<ThreeProducts> {
    let p = v.base();
    check_modes(p, z.modes())?;
    let vi = variational_interfaces(v)?;
    let d = p.order();
    let a = dense_a_family(p, z);
    let mut b = Vec::with_capacity(d);
    let mut c = Vec::with_capacity(d);
    for k in 0..d {
        let xl = left_interface(&p.cores()[..k]);
        let xr = right_interface(&p.tilde_cores()[k + 1..]);
        b.push(contract_dense(z, k, &vi.le[k], &xr));
        c.push(contract_dense(z, k, &xl, &vi.ge[k + 1]));
    }
    Ok(ThreeProducts { a, b, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tangent::test_util::*;
    use crate::tt::right_interface;

    fn sample_z(modes: &[usize]) -> SparseTensor {
        SparseTensor::new(
            modes,
            vec![vec![0, 0, 0], vec![1, 2, 1], vec![0, 1, 1], vec![1, 1, 0], vec![0, 2, 1], vec![1, 0, 1], vec![1, 2, 0]],
            vec![0.5, -1.0, 2.0, 0.25, 3.0, -0.75, 1.5],
        )
        .unwrap()
    }

    fn max_core_diff(a: &[Core], b: &[Core]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let mut d = x.clone();
                d.axpy(-1.0, y);
                d.norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gram_matches_explicit_products() {
        let p = point(&[2, 2, 2, 2], &[2, 2, 2], 1);
        let v = tangent(&p, 2);
        let g = gram_right_tilde_v(&v).unwrap();
        let vi = variational_interfaces(&v).unwrap();
        for k in 0..3 {
            let xt = right_interface(&p.tilde_cores()[k + 1..]);
            let expect = xt.transpose() * &vi.ge[k + 1];
            assert!((&g[k] - &expect).norm() < 1e-11 * expect.norm().max(1.0), "k = {k}");
        }
        let zero = gram_right_tilde_v(&TangentVector::zero(&p)).unwrap();
        assert!(zero.iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn gram_base_step() {
        let p = point(&[3, 2, 3], &[2, 2], 3);
        let v = tangent(&p, 4).to_first().unwrap();
        let g = gram_right_tilde_v(&v).unwrap();
        let expect = p.tilde(2).right_unfolding() * v.core(2).right_unfolding().transpose();
        assert!((&g[1] - expect).norm() < 1e-15);
    }

    #[test]
    fn sparse_families_match_dense() {
        let p = point(&[2, 3, 2], &[2, 2], 5);
        let v = tangent(&p, 6);
        let z = sample_z(p.modes());
        let s = three_products_sparse(&v, &z).unwrap();
        let d = three_products_dense(&v, &z.to_dense().unwrap()).unwrap();
        assert!(max_core_diff(&s.a, &d.a) < 1e-11);
        assert!(max_core_diff(&s.b, &d.b) < 1e-11);
        assert!(max_core_diff(&s.c, &d.c) < 1e-11);
        assert_eq!(s.b[0].norm(), 0.0);
        assert_eq!(s.c[2].norm(), 0.0);
    }

    #[test]
    fn empty_and_zero_inputs() {
        let p = point(&[2, 3, 2], &[2, 2], 7);
        let v = tangent(&p, 8);
        let s = three_products_sparse(&v, &SparseTensor::empty(p.modes())).unwrap();
        assert!(s.a.iter().chain(&s.b).chain(&s.c).all(|c| c.norm() == 0.0));
        let z = sample_z(p.modes()).to_dense().unwrap();
        let d = three_products_dense(&TangentVector::zero(&p), &z).unwrap();
        assert!(d.b.iter().chain(&d.c).all(|c| c.norm() == 0.0));
        assert!(d.a.iter().any(|c| c.norm() > 0.0));
    }
}
