//! Projected horizontal vector fields `D^φ_j` on `W`.
//!
//! Generator indices are 0-based, so `j = 1` is `X_2`. Velocities are
//! returned in `W`-coordinates (see [`crate::graphs`]).

use crate::algebra::StepTwoAlgebra;
use crate::error::{check_len, Error, Result};
use crate::free::PairIndex;
use crate::graphs::ScalarField;

/// A vector field on `W` whose coefficients depend on the graph function.
pub trait ProjectedField: Send + Sync {
    /// Dimension of the ambient `W`.
    fn dim(&self) -> usize;
    /// Generator index of the field (0-based).
    fn index(&self) -> usize;
    /// The slot that moves with unit speed.
    fn driven_slot(&self) -> usize;
    /// Slots whose rate involves the graph function; all others move at a
    /// rate fixed by the starting point.
    fn coupled_slots(&self) -> Vec<bool>;
    fn graph(&self) -> &ScalarField;
    /// Velocity at `w` given the value `phi` of the graph function there.
    fn velocity_with(&self, w: &[f64], phi: f64, out: &mut [f64]);

    fn velocity(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dim(), w.len())?;
        check_len(self.dim(), out.len())?;
        let phi = self.graph().eval(w)?;
        self.velocity_with(w, phi, out);
        Ok(())
    }

    fn velocity_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.velocity(w, &mut out)?;
        Ok(out)
    }
}

/// `D^φ_j` in a step-2 group `G`.
#[derive(Debug, Clone)]
pub struct ProjectedFieldG {
    pub algebra: StepTwoAlgebra,
    pub phi: ScalarField,
    pub j: usize,
}

impl ProjectedFieldG {
    pub fn new(algebra: StepTwoAlgebra, phi: ScalarField, j: usize) -> Result<Self> {
        if j == 0 || j >= algebra.rank() {
            return Err(Error::InvalidArgument(format!("generator index {j} outside 1..{}", algebra.rank())));
        }
        check_len(algebra.w_dim(), phi.dim())?;
        Ok(Self { algebra, phi, j })
    }
}

impl ProjectedField for ProjectedFieldG {
    fn dim(&self) -> usize {
        self.algebra.w_dim()
    }

    fn index(&self) -> usize {
        self.j
    }

    fn driven_slot(&self) -> usize {
        self.j - 1
    }

    fn coupled_slots(&self) -> Vec<bool> {
        let m = self.algebra.rank();
        let mut c = vec![false; self.dim()];
        for i in 0..self.algebra.vertical_dim() {
            c[m - 1 + i] = self.algebra.b(i, self.j, 0) != 0.0;
        }
        c
    }

    fn graph(&self) -> &ScalarField {
        &self.phi
    }

    fn velocity_with(&self, w: &[f64], phi: f64, out: &mut [f64]) {
        let a = &self.algebra;
        let m = a.rank();
        out[..m - 1].fill(0.0);
        out[self.j - 1] = 1.0;
        for i in 0..a.vertical_dim() {
            let mut drift = 0.0;
            for k in 1..m {
                drift += w[k - 1] * a.b(i, self.j, k);
            }
            out[m - 1 + i] = -(a.b(i, self.j, 0) * phi + 0.5 * drift);
        }
    }
}

/// `D^ψ_j` in the free group of rank `m`.
#[derive(Debug, Clone)]
pub struct ProjectedFieldF {
    pub m: usize,
    pub psi: ScalarField,
    pub j: usize,
}

impl ProjectedFieldF {
    pub fn new(m: usize, psi: ScalarField, j: usize) -> Result<Self> {
        if m < 2 || j == 0 || j >= m {
            return Err(Error::InvalidArgument(format!("generator index {j} outside 1..{m}")));
        }
        check_len(m - 1 + PairIndex::count(m), psi.dim())?;
        Ok(Self { m, psi, j })
    }

    fn slot(&self, l: usize, s: usize) -> usize {
        self.m - 1 + PairIndex { l, s }.position()
    }
}

impl ProjectedField for ProjectedFieldF {
    fn dim(&self) -> usize {
        self.m - 1 + PairIndex::count(self.m)
    }

    fn index(&self) -> usize {
        self.j
    }

    fn driven_slot(&self) -> usize {
        self.j - 1
    }

    fn coupled_slots(&self) -> Vec<bool> {
        let mut c = vec![false; self.dim()];
        c[self.slot(self.j, 0)] = true;
        c
    }

    fn graph(&self) -> &ScalarField {
        &self.psi
    }

    fn velocity_with(&self, w: &[f64], psi: f64, out: &mut [f64]) {
        let (m, j) = (self.m, self.j);
        out.fill(0.0);
        out[j - 1] = 1.0;
        out[self.slot(j, 0)] = -psi;
        for l in j + 1..m {
            out[self.slot(l, j)] = 0.5 * w[l - 1];
        }
        for s in 1..j {
            out[self.slot(j, s)] = -0.5 * w[s - 1];
        }
    }
}

/// Which horizontal direction of the Engel group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngelDirection {
    X2,
    X3,
}

/// The Engel-group operators on `W = {(x_2, x_3, x_4)}`:
/// `D_{X_2} = ∂_2 + φ ∂_3 + ½φ² ∂_4` and `D_{X_3} = ∂_3 + φ ∂_4`.
#[derive(Debug, Clone)]
pub struct EngelField {
    pub phi: ScalarField,
    pub which: EngelDirection,
}

impl EngelField {
    pub fn new(phi: ScalarField, which: EngelDirection) -> Result<Self> {
        check_len(3, phi.dim())?;
        Ok(Self { phi, which })
    }
}

impl ProjectedField for EngelField {
    fn dim(&self) -> usize {
        3
    }

    fn index(&self) -> usize {
        match self.which {
            EngelDirection::X2 => 1,
            EngelDirection::X3 => 2,
        }
    }

    fn driven_slot(&self) -> usize {
        self.index() - 1
    }

    fn coupled_slots(&self) -> Vec<bool> {
        match self.which {
            EngelDirection::X2 => vec![false, true, true],
            EngelDirection::X3 => vec![false, false, true],
        }
    }

    fn graph(&self) -> &ScalarField {
        &self.phi
    }

    fn velocity_with(&self, _w: &[f64], phi: f64, out: &mut [f64]) {
        let v = match self.which {
            EngelDirection::X2 => [1.0, phi, 0.5 * phi * phi],
            EngelDirection::X3 => [0.0, 1.0, phi],
        };
        out.copy_from_slice(&v);
    }
}

pub fn eval_d_g(field: &ProjectedFieldG, w: &[f64]) -> Result<Vec<f64>> {
    field.velocity_vec(w)
}

pub fn eval_d_f(field: &ProjectedFieldF, w: &[f64]) -> Result<Vec<f64>> {
    field.velocity_vec(w)
}

pub fn eval_d_engel(field: &EngelField, w: &[f64]) -> Result<Vec<f64>> {
    field.velocity_vec(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{graph_map, pi_w, w_to_group, BoxDomain};
    use approx::assert_abs_diff_eq;

    fn field(d: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> ScalarField {
        ScalarField::closed(BoxDomain::cube(d, 10.0), f)
    }

    #[test]
    fn intro5d_nonlinear_pattern() {
        let a = StepTwoAlgebra::intro5d();
        let phi = field(4, |_| 0.75);
        let w = [0.0, 0.0, 0.2, -0.1];
        let d2 = eval_d_g(&ProjectedFieldG::new(a.clone(), phi.clone(), 1).unwrap(), &w).unwrap();
        assert_eq!(d2, vec![1.0, 0.0, 0.75, 0.75]);
        let d3 = eval_d_g(&ProjectedFieldG::new(a, phi, 2).unwrap(), &w).unwrap();
        assert_eq!(d3, vec![0.0, 1.0, 0.75, -0.75]);
    }

    #[test]
    fn intro5d_drift_terms() {
        let a = StepTwoAlgebra::intro5d();
        let zero = field(4, |_| 0.0);
        let f = ProjectedFieldG::new(a.clone(), zero.clone(), 1).unwrap();
        // [X_2, X_3] = 0 here, so no drift.
        assert_eq!(eval_d_g(&f, &[0.3, 0.7, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let h = ProjectedFieldG::new(StepTwoAlgebra::heisenberg(), field(2, |_| 0.0), 1).unwrap();
        assert_eq!(eval_d_g(&h, &[0.4, 0.2]).unwrap(), vec![1.0, 0.0]);
        assert!(ProjectedFieldG::new(a.clone(), zero.clone(), 0).is_err());
        assert!(ProjectedFieldG::new(a, zero, 3).is_err());
    }

    #[test]
    fn free_field_examples() {
        let f = ProjectedFieldF::new(2, field(2, |w| 2.0 * w[0]), 1).unwrap();
        assert_eq!(eval_d_f(&f, &[0.5, 0.1]).unwrap(), vec![1.0, -1.0]);

        let f = ProjectedFieldF::new(3, field(5, |_| 0.0), 1).unwrap();
        // order: x2, x3, y21, y31, y32
        assert_eq!(eval_d_f(&f, &[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.5]);
        let g = ProjectedFieldF::new(3, field(5, |_| 0.0), 2).unwrap();
        assert_eq!(eval_d_f(&g, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0, 0.0, -0.5]);
    }

    #[test]
    fn free_field_agrees_with_generic_on_free_algebra() {
        for m in 2..=4 {
            let a = StepTwoAlgebra::free(m).unwrap();
            let psi = field(a.w_dim(), |w| 0.3 - w[0] + 0.5 * w[w.len() - 1]);
            for j in 1..m {
                let fg = ProjectedFieldG::new(a.clone(), psi.clone(), j).unwrap();
                let ff = ProjectedFieldF::new(m, psi.clone(), j).unwrap();
                let w: Vec<f64> = (0..a.w_dim()).map(|k| 0.1 * k as f64 - 0.2).collect();
                let (u, v) = (eval_d_g(&fg, &w).unwrap(), eval_d_f(&ff, &w).unwrap());
                for (x, y) in u.iter().zip(&v) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-15);
                }
                assert_eq!(fg.coupled_slots(), ff.coupled_slots());
            }
        }
    }

    #[test]
    fn engel_examples() {
        let phi = field(3, |w| w[2].cbrt());
        let d2 = eval_d_engel(&EngelField::new(phi.clone(), EngelDirection::X2).unwrap(), &[0.0, 0.0, 8.0]).unwrap();
        assert_eq!(d2, vec![1.0, 2.0, 2.0]);
        let d3 = eval_d_engel(&EngelField::new(phi, EngelDirection::X3).unwrap(), &[0.0, 0.0, 8.0]).unwrap();
        assert_eq!(d3, vec![0.0, 1.0, 2.0]);
        let z = EngelField::new(field(3, |_| 0.0), EngelDirection::X2).unwrap();
        assert_eq!(eval_d_engel(&z, &[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    /// `D_j = X'_j − Σ_i b_{j1}^{(i)} φ Y'_i` with `X'_j` taken at `w` itself.
    #[test]
    fn slotwise_frame_identity() {
        let a = StepTwoAlgebra::intro5d();
        let phi = field(4, |w| 0.2 + w[0] - w[3]);
        let w = [0.3, -0.4, 0.1, 0.25];
        let p = w_to_group(&a, &w).unwrap();
        let frame = a.left_invariant_frame(&p).unwrap();
        for j in 1..3 {
            let d = eval_d_g(&ProjectedFieldG::new(a.clone(), phi.clone(), j).unwrap(), &w).unwrap();
            let v = phi.eval(&w).unwrap();
            for i in 0..2 {
                let expected = frame[j][3 + i] - a.b(i, j, 0) * v;
                assert_abs_diff_eq!(d[2 + i], expected, epsilon = 1e-12);
            }
        }
    }

    /// `D_j(w)` is the velocity of `t ↦ π_W(graph(w) · exp(t X_j))` at `t = 0`.
    #[test]
    fn velocity_matches_projected_flow() {
        for a in [StepTwoAlgebra::heisenberg(), StepTwoAlgebra::intro5d(), StepTwoAlgebra::free(3).unwrap()] {
            let n = a.w_dim();
            let phi = field(n, |w| 0.4 + 0.3 * w[0] - 0.2 * w[w.len() - 1]);
            let w: Vec<f64> = (0..n).map(|k| 0.15 * (k as f64 + 1.0) - 0.3).collect();
            let g = graph_map(&a, &phi, &w).unwrap();
            for j in 1..a.rank() {
                let flow = |t: f64| {
                    let mut e = a.identity();
                    e.x[j] = t;
                    pi_w(&a, &a.mul(&g, &e).unwrap()).unwrap()
                };
                let h = 1e-4;
                let (fp, fm) = (flow(h), flow(-h));
                let d = eval_d_g(&ProjectedFieldG::new(a.clone(), phi.clone(), j).unwrap(), &w).unwrap();
                for k in 0..n {
                    assert_abs_diff_eq!((fp[k] - fm[k]) / (2.0 * h), d[k], epsilon = 1e-8);
                }
            }
        }
    }
}
