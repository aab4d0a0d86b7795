//! Splittings `G = W · L` with `L = exp(span X_1)` and `W = {x_1 = 0}`,
//! intrinsic graphs over `W` and their translations.
//!
//! A `W`-point is stored without its vanishing first slot:
//! `w = (x_2, …, x_m, y*_1, …, y*_h)`, length `m + h - 1`.

mod scalar;

pub use scalar::{BoxDomain, Grid, Interpolation, ScalarField, VectorField};

use nalgebra::{DMatrix, DVector};

use crate::algebra::{GroupPoint, StepTwoAlgebra};
use crate::error::{check_len, Error, Result};

/// `z ↦ mat · z + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub mat: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl Affine {
    pub fn new(mat: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        check_len(mat.nrows(), offset.len())?;
        Ok(Self { mat, offset })
    }

    pub fn linear(mat: DMatrix<f64>) -> Self {
        let offset = DVector::zeros(mat.nrows());
        Self { mat, offset }
    }

    pub fn identity(d: usize) -> Self {
        Self::linear(DMatrix::identity(d, d))
    }

    pub fn dim_in(&self) -> usize {
        self.mat.ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.mat.nrows()
    }

    #[inline]
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = self.offset[r];
            for (c, v) in z.iter().enumerate() {
                acc += self.mat[(r, c)] * v;
            }
            *o = acc;
        }
    }

    pub fn apply_vec(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out()];
        self.apply(z, &mut out);
        out
    }

    /// Inverse map, if the matrix is square and invertible.
    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .mat
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("affine map is not invertible".into()))?;
        let offset = -(&inv * &self.offset);
        Ok(Self { mat: inv, offset })
    }
}

/// Embeds a `W`-point as a group point with `x_1 = 0`.
pub fn w_to_group(a: &StepTwoAlgebra, w: &[f64]) -> Result<GroupPoint> {
    check_len(a.w_dim(), w.len())?;
    let m = a.rank();
    let mut x = vec![0.0; m];
    x[1..].copy_from_slice(&w[..m - 1]);
    Ok(GroupPoint::new(x, w[m - 1..].to_vec()))
}

/// `W`-component of `p = π_W(p) · π_L(p)`.
pub fn pi_w(a: &StepTwoAlgebra, p: &GroupPoint) -> Result<Vec<f64>> {
    a.check(p)?;
    let m = a.rank();
    let x1 = p.x[0];
    let mut w = p.x[1..].to_vec();
    for i in 0..a.vertical_dim() {
        let mut acc = 0.0;
        for g in 1..m {
            acc += a.b(i, g, 0) * p.x[g];
        }
        w.push(p.ystar[i] - 0.5 * acc * x1);
    }
    Ok(w)
}

/// `L`-component of `p`, i.e. its first coordinate.
pub fn pi_l(p: &GroupPoint) -> f64 {
    p.x[0]
}

/// The point `(x_1, 0, …, 0)` of `L`.
pub fn l_point(a: &StepTwoAlgebra, x1: f64) -> GroupPoint {
    let mut p = a.identity();
    p.x[0] = x1;
    p
}

/// `P_q(w) = π_W(q · w)` as an affine map of `w` with unit-determinant linear part.
pub fn p_q_map(a: &StepTwoAlgebra, q: &GroupPoint) -> Result<Affine> {
    a.check(q)?;
    let m = a.rank();
    let mat = dp_q(a, q)?;
    let mut offset = DVector::zeros(a.w_dim());
    for l in 1..m {
        offset[l - 1] = q.x[l];
    }
    for i in 0..a.vertical_dim() {
        let mut c = 0.0;
        for l in 1..m {
            c += a.b(i, l, 0) * q.x[l];
        }
        offset[m - 1 + i] = q.ystar[i] - 0.5 * c * q.x[0];
    }
    Affine::new(mat, offset)
}

/// Evaluates `P_q(w)`.
pub fn p_q(a: &StepTwoAlgebra, q: &GroupPoint, w: &[f64]) -> Result<Vec<f64>> {
    check_len(a.w_dim(), w.len())?;
    Ok(p_q_map(a, q)?.apply_vec(w))
}

/// Differential of `P_q`: identity plus the block
/// `∂(P_q)_{y*_i} / ∂x_l = ½ Σ_{j≥2} b_{jl}^{(i)} q_j + b_{1l}^{(i)} q_1`.
pub fn dp_q(a: &StepTwoAlgebra, q: &GroupPoint) -> Result<DMatrix<f64>> {
    a.check(q)?;
    let m = a.rank();
    let n = a.w_dim();
    let mut d = DMatrix::identity(n, n);
    for i in 0..a.vertical_dim() {
        for l in 1..m {
            let mut acc = 0.0;
            for j in 1..m {
                acc += a.b(i, j, l) * q.x[j];
            }
            d[(m - 1 + i, l - 1)] = 0.5 * acc + a.b(i, 0, l) * q.x[0];
        }
    }
    Ok(d)
}

/// Intrinsic translation `φ_q(a) = q_1 + φ(P_{q⁻¹}(a))` on the box hull of `P_q(dom φ)`.
pub fn translate_graph(a: &StepTwoAlgebra, phi: &ScalarField, q: &GroupPoint) -> Result<ScalarField> {
    check_len(a.w_dim(), phi.dim())?;
    let forward = p_q_map(a, q)?;
    let back = p_q_map(a, &a.inv(q)?)?;
    let domain = phi.domain().image_hull(&forward);
    Ok(ScalarField::translated(phi.clone(), q.x[0], back, domain))
}

/// `f ∘ P_{q⁻¹}` on the box hull of `P_q(dom f)`, the transported datum.
pub fn compose_p_q_inverse(a: &StepTwoAlgebra, f: &ScalarField, q: &GroupPoint) -> Result<ScalarField> {
    check_len(a.w_dim(), f.dim())?;
    let forward = p_q_map(a, q)?;
    let back = p_q_map(a, &a.inv(q)?)?;
    let domain = f.domain().image_hull(&forward);
    Ok(ScalarField::translated(f.clone(), 0.0, back, domain))
}

/// Restriction of `f` to the coordinate plane through `z0` spanned by `axes`.
pub fn slice_field(f: &ScalarField, axes: &[usize], z0: &[f64]) -> Result<ScalarField> {
    let d = f.dim();
    check_len(d, z0.len())?;
    if axes.is_empty() || axes.iter().any(|k| *k >= d) {
        return Err(Error::InvalidArgument("slice axes out of range".into()));
    }
    let mut embed = DMatrix::zeros(d, axes.len());
    let mut offset = DVector::from_column_slice(z0);
    for (c, &k) in axes.iter().enumerate() {
        embed[(k, c)] = 1.0;
        offset[k] = 0.0;
    }
    let lo: Vec<f64> = axes.iter().map(|&k| f.domain().lo[k]).collect();
    let hi: Vec<f64> = axes.iter().map(|&k| f.domain().hi[k]).collect();
    let mut probe = z0.to_vec();
    for (&k, v) in axes.iter().zip(&lo) {
        probe[k] = *v;
    }
    if !f.domain().contains(&probe) {
        return Err(Error::EmptySlice);
    }
    Ok(ScalarField::translated(f.clone(), 0.0, Affine::new(embed, offset)?, BoxDomain::new(lo, hi)?))
}

/// The graph point `w · φ(w)`.
pub fn graph_map(a: &StepTwoAlgebra, phi: &ScalarField, w: &[f64]) -> Result<GroupPoint> {
    let v = phi.eval(w)?;
    a.mul(&w_to_group(a, w)?, &l_point(a, v))
}

/// `ψ = φ ∘ π` on free `W`-coordinates, restricted to `free_box`.
pub fn lift_graph(a: &StepTwoAlgebra, phi: &ScalarField, free_box: BoxDomain) -> Result<ScalarField> {
    check_len(a.w_dim(), phi.dim())?;
    let m = a.rank();
    check_len(m - 1 + crate::free::PairIndex::count(m), free_box.dim())?;
    Ok(ScalarField::lifted(phi.clone(), a.clone(), free_box))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn heis() -> StepTwoAlgebra {
        StepTwoAlgebra::heisenberg()
    }

    fn gp(m: usize, c: &[f64]) -> GroupPoint {
        GroupPoint::from_coords(m, c)
    }

    #[test]
    fn pi_w_examples() {
        let a = heis();
        assert_eq!(pi_w(&a, &gp(2, &[0.0, 2.0, 3.0])).unwrap(), vec![2.0, 3.0]);
        assert_eq!(pi_w(&a, &gp(2, &[1.0, 1.0, 0.5])).unwrap(), vec![1.0, 1.0]);
        assert_eq!(pi_l(&gp(2, &[3.0, -1.0, 7.0])), 3.0);
    }

    #[test]
    fn p_q_heisenberg_closed_form() {
        let a = heis();
        let q = gp(2, &[0.7, -0.3, 1.1]);
        let w = [0.4, -0.9];
        let expected = [q.x[1] + w[0], q.ystar[0] + w[1] + q.x[0] * w[0] + 0.5 * q.x[0] * q.x[1]];
        let got = p_q(&a, &q, &w).unwrap();
        assert_abs_diff_eq!(got[0], expected[0], epsilon = 1e-15);
        assert_abs_diff_eq!(got[1], expected[1], epsilon = 1e-15);
        let d = dp_q(&a, &q).unwrap();
        assert_eq!(d[(1, 0)], 0.7);
        assert_eq!(dp_q(&a, &a.identity()).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn graph_map_heisenberg() {
        let a = heis();
        let phi = ScalarField::closed(BoxDomain::cube(2, 2.0), |w| w[0]);
        let g = graph_map(&a, &phi, &[1.0, 0.0]).unwrap();
        assert_eq!(g.coords(), vec![1.0, 1.0, -0.5]);
        assert_eq!(pi_w(&a, &g).unwrap(), vec![1.0, 0.0]);
        let zero = ScalarField::constant(BoxDomain::cube(2, 2.0), 0.0);
        assert_eq!(graph_map(&a, &zero, &[0.3, 0.2]).unwrap().coords(), vec![0.0, 0.3, 0.2]);
        assert!(graph_map(&a, &phi, &[3.0, 0.0]).is_err());
    }

    #[test]
    fn translation_examples() {
        let a = StepTwoAlgebra::intro5d();
        let phi = ScalarField::closed(BoxDomain::cube(4, 1.0), |w| 0.3 + w[0] * w[3] - w[2]);
        let e = a.identity();
        let same = translate_graph(&a, &phi, &e).unwrap();
        let w = [0.1, -0.2, 0.3, 0.4];
        assert_eq!(same.eval(&w).unwrap(), phi.eval(&w).unwrap());

        // φ_q(e) = 0 for q = (w · φ(w))⁻¹.
        let q = a.inv(&graph_map(&a, &phi, &w).unwrap()).unwrap();
        let pq = translate_graph(&a, &phi, &q).unwrap();
        assert_abs_diff_eq!(pq.eval(&[0.0; 4]).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lift_heisenberg_flips_vertical() {
        let a = heis();
        let phi = ScalarField::closed(BoxDomain::cube(2, 1.0), |w| w[0] + 3.0 * w[1]);
        let psi = lift_graph(&a, &phi, BoxDomain::cube(2, 1.0)).unwrap();
        assert_eq!(psi.eval(&[0.2, 0.1]).unwrap(), phi.eval(&[0.2, -0.1]).unwrap());
        let c = lift_graph(&a, &ScalarField::constant(BoxDomain::cube(2, 1.0), 4.0), BoxDomain::cube(2, 1.0)).unwrap();
        assert_eq!(c.eval(&[0.5, 0.5]).unwrap(), 4.0);
    }

    #[test]
    fn lift_constant_along_kernel() {
        let a = StepTwoAlgebra::intro5d();
        let phi = ScalarField::closed(BoxDomain::cube(4, 2.0), |w| w[0] - w[1] * w[2] + w[3] * w[3]);
        let psi = lift_graph(&a, &phi, BoxDomain::cube(5, 1.0)).unwrap();
        // Kernel of π on the free vertical layer is spanned by y_32.
        let w = [0.1, 0.2, -0.3, 0.4, 0.5];
        let mut k = w;
        k[4] -= 0.9;
        assert_eq!(psi.eval(&w).unwrap(), psi.eval(&k).unwrap());
        assert!(psi.contains_box(&BoxDomain::cube(5, 0.5)));
    }

    #[test]
    fn affine_inverse() {
        let m = Affine::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]), DVector::from_vec(vec![1.0, -1.0])).unwrap();
        let inv = m.inverse().unwrap();
        let z = [0.3, 0.7];
        let back = inv.apply_vec(&m.apply_vec(&z));
        assert_abs_diff_eq!(back[0], z[0], epsilon = 1e-15);
        assert_abs_diff_eq!(back[1], z[1], epsilon = 1e-15);
    }

    fn algebras() -> Vec<StepTwoAlgebra> {
        vec![heis(), StepTwoAlgebra::intro5d(), StepTwoAlgebra::free(3).unwrap()]
    }

    proptest! {
        #[test]
        fn reconstruction_and_inverse_p_q(k in 0usize..3, seed in prop::collection::vec(-2.0f64..2.0, 12)) {
            let a = &algebras()[k];
            let n = a.dim();
            let p = GroupPoint::from_coords(a.rank(), &seed[..n]);
            let w = pi_w(a, &p).unwrap();
            let back = a.mul(&w_to_group(a, &w).unwrap(), &l_point(a, pi_l(&p))).unwrap();
            prop_assert!(back.max_abs_diff(&p) < 1e-12);

            let q = GroupPoint::from_coords(a.rank(), &seed[12 - n..]);
            let direct = pi_w(a, &a.mul(&q, &w_to_group(a, &w).unwrap()).unwrap()).unwrap();
            let closed = p_q(a, &q, &w).unwrap();
            for (u, v) in direct.iter().zip(&closed) {
                prop_assert!((u - v).abs() < 1e-12);
            }
            let round = p_q(a, &a.inv(&q).unwrap(), &closed).unwrap();
            for (u, v) in round.iter().zip(&w) {
                prop_assert!((u - v).abs() < 1e-12);
            }
            prop_assert!((dp_q(a, &q).unwrap().determinant() - 1.0).abs() < 1e-12);
        }
    }
}
