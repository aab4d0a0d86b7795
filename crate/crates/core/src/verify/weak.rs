//! Conservative weak forms of `D^φ_j φ = ω_j` and their quadrature.

use serde::{Deserialize, Serialize};

use crate::algebra::StepTwoAlgebra;
use crate::error::{check_len, Error, Result};
use crate::free::PairIndex;
use crate::graphs::ScalarField;

use super::quadrature::Quadrature;
use super::testfn::TestFunction;

/// `∫ f(φ)·∇ξ − ∫ ω ξ` splits into a flux pairing and a datum pairing.
pub trait WeakForm: Sync {
    fn dim(&self) -> usize;
    /// Flux vector `f` at `w`, so that the weak form reads `∫ f·∇ξ − ∫ ωξ`.
    fn flux(&self, w: &[f64], out: &mut [f64]);
    fn datum(&self, w: &[f64]) -> f64;
    fn fields(&self) -> Vec<&ScalarField>;
}

/// The two pairings against one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakPairing {
    pub flux: f64,
    pub datum: f64,
}

impl WeakPairing {
    pub fn residual(&self) -> f64 {
        self.flux - self.datum
    }
}

/// Step-2 group form:
/// `f_{x_j} = -φ`, `f_{y*_i} = ½ b_{j1}^{(i)} φ² + ½ Σ_{l≥2} x_l b_{jl}^{(i)} φ`.
pub struct GForm<'a> {
    pub algebra: &'a StepTwoAlgebra,
    pub phi: &'a ScalarField,
    pub omega: &'a ScalarField,
    pub j: usize,
}

impl<'a> GForm<'a> {
    pub fn new(algebra: &'a StepTwoAlgebra, phi: &'a ScalarField, omega: &'a ScalarField, j: usize) -> Result<Self> {
        if j == 0 || j >= algebra.rank() {
            return Err(Error::InvalidArgument(format!("generator index {j} outside 1..{}", algebra.rank())));
        }
        check_len(algebra.w_dim(), phi.dim())?;
        check_len(algebra.w_dim(), omega.dim())?;
        Ok(Self { algebra, phi, omega, j })
    }
}

impl WeakForm for GForm<'_> {
    fn dim(&self) -> usize {
        self.algebra.w_dim()
    }

    fn flux(&self, w: &[f64], out: &mut [f64]) {
        let a = self.algebra;
        let m = a.rank();
        let phi = self.phi.eval_unchecked(w);
        out[..m - 1].fill(0.0);
        out[self.j - 1] = -phi;
        for i in 0..a.vertical_dim() {
            let mut drift = 0.0;
            for l in 1..m {
                drift += w[l - 1] * a.b(i, self.j, l);
            }
            out[m - 1 + i] = 0.5 * phi * (a.b(i, self.j, 0) * phi + drift);
        }
    }

    fn datum(&self, w: &[f64]) -> f64 {
        self.omega.eval_unchecked(w)
    }

    fn fields(&self) -> Vec<&ScalarField> {
        vec![self.phi, self.omega]
    }
}

/// Free-group form:
/// `f_{x_j} = -ψ`, `f_{y_j1} = ½ψ²`, `f_{y_lj} = -½ x_l ψ` (l > j), `f_{y_js} = ½ x_s ψ` (1 < s < j).
pub struct FForm<'a> {
    pub m: usize,
    pub psi: &'a ScalarField,
    pub omega: &'a ScalarField,
    pub j: usize,
}

impl<'a> FForm<'a> {
    pub fn new(m: usize, psi: &'a ScalarField, omega: &'a ScalarField, j: usize) -> Result<Self> {
        if m < 2 || j == 0 || j >= m {
            return Err(Error::InvalidArgument(format!("generator index {j} outside 1..{m}")));
        }
        let n = m - 1 + PairIndex::count(m);
        check_len(n, psi.dim())?;
        check_len(n, omega.dim())?;
        Ok(Self { m, psi, omega, j })
    }
}

impl WeakForm for FForm<'_> {
    fn dim(&self) -> usize {
        self.m - 1 + PairIndex::count(self.m)
    }

    fn flux(&self, w: &[f64], out: &mut [f64]) {
        let (m, j) = (self.m, self.j);
        let psi = self.psi.eval_unchecked(w);
        let slot = |l: usize, s: usize| m - 1 + PairIndex { l, s }.position();
        out.fill(0.0);
        out[j - 1] = -psi;
        out[slot(j, 0)] = 0.5 * psi * psi;
        for l in j + 1..m {
            out[slot(l, j)] = -0.5 * w[l - 1] * psi;
        }
        for s in 1..j {
            out[slot(j, s)] = 0.5 * w[s - 1] * psi;
        }
    }

    fn datum(&self, w: &[f64]) -> f64 {
        self.omega.eval_unchecked(w)
    }

    fn fields(&self) -> Vec<&ScalarField> {
        vec![self.psi, self.omega]
    }
}

/// Engel form for `D_{X_2}`: `f = (-φ, -½φ², -⅙φ³)`.
pub struct EngelForm<'a> {
    pub phi: &'a ScalarField,
    pub omega: &'a ScalarField,
}

impl<'a> EngelForm<'a> {
    pub fn new(phi: &'a ScalarField, omega: &'a ScalarField) -> Result<Self> {
        check_len(3, phi.dim())?;
        check_len(3, omega.dim())?;
        Ok(Self { phi, omega })
    }
}

impl WeakForm for EngelForm<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn flux(&self, w: &[f64], out: &mut [f64]) {
        let phi = self.phi.eval_unchecked(w);
        out[0] = -phi;
        out[1] = -0.5 * phi * phi;
        out[2] = -phi * phi * phi / 6.0;
    }

    fn datum(&self, w: &[f64]) -> f64 {
        self.omega.eval_unchecked(w)
    }

    fn fields(&self) -> Vec<&ScalarField> {
        vec![self.phi, self.omega]
    }
}

/// Flux and datum pairings of `form` against `xi` with the given rule.
///
/// When the box hull of the nodes is not inside every field's domain (as
/// happens for sheared rules), each node carrying test-function mass is
/// checked individually instead.
pub fn weak_pairing(form: &dyn WeakForm, xi: &dyn TestFunction, quad: &Quadrature) -> Result<WeakPairing> {
    let d = form.dim();
    check_len(d, xi.dim())?;
    check_len(d, quad.dim())?;
    let hull = quad.hull();
    let fields = form.fields();
    let checked = fields.iter().any(|f| !f.contains_box(&hull));
    let [flux, datum, escaped] = quad.integrate(|w| {
        let mut g = [0.0f64; 32];
        let mut f = [0.0f64; 32];
        let v = xi.eval(w, &mut g[..d]);
        if v == 0.0 && g[..d].iter().all(|x| *x == 0.0) {
            return [0.0, 0.0, 0.0];
        }
        if checked && fields.iter().any(|f| f.eval(w).is_err()) {
            return [0.0, 0.0, 1.0];
        }
        form.flux(w, &mut f[..d]);
        let dot: f64 = f[..d].iter().zip(&g[..d]).map(|(a, b)| a * b).sum();
        [dot, form.datum(w) * v, 0.0]
    })?;
    if escaped != 0.0 {
        return Err(Error::SupportEscapesDomain);
    }
    Ok(WeakPairing { flux, datum })
}

/// Residual of the step-2 form against a bump, midpoint rule with `n` cells per axis.
pub fn weak_residual_g(
    a: &StepTwoAlgebra,
    phi: &ScalarField,
    omega_j: &ScalarField,
    j: usize,
    xi: &dyn TestFunction,
    n: usize,
) -> Result<f64> {
    let form = GForm::new(a, phi, omega_j, j)?;
    Ok(weak_pairing(&form, xi, &Quadrature::midpoint(&xi.support(), n))?.residual())
}

/// Residual of the free-group form.
pub fn weak_residual_f(m: usize, psi: &ScalarField, omega_j: &ScalarField, j: usize, xi: &dyn TestFunction, n: usize) -> Result<f64> {
    let form = FForm::new(m, psi, omega_j, j)?;
    Ok(weak_pairing(&form, xi, &Quadrature::midpoint(&xi.support(), n))?.residual())
}

/// Residual of the Engel form.
pub fn weak_residual_engel(phi: &ScalarField, omega: &ScalarField, xi: &dyn TestFunction, n: usize) -> Result<f64> {
    let form = EngelForm::new(phi, omega)?;
    Ok(weak_pairing(&form, xi, &Quadrature::midpoint(&xi.support(), n))?.residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::BoxDomain;
    use crate::verify::testfn::BumpTest;
    use approx::assert_abs_diff_eq;

    fn heis() -> StepTwoAlgebra {
        StepTwoAlgebra::heisenberg()
    }

    #[test]
    fn constants_have_zero_residual() {
        let dom = BoxDomain::cube(2, 1.0);
        let phi = ScalarField::constant(dom.clone(), 0.7);
        let zero = ScalarField::constant(dom, 0.0);
        let xi = BumpTest::new(vec![0.0, 0.0], vec![0.5, 0.5], 4).unwrap();
        let r = weak_residual_g(&heis(), &phi, &zero, 1, &xi, 64).unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn heisenberg_smooth_solution() {
        let dom = BoxDomain::cube(2, 1.0);
        let phi = ScalarField::closed(dom.clone(), |w| w[0]);
        let one = ScalarField::constant(dom.clone(), 1.0);
        let xi = BumpTest::new(vec![0.1, -0.2], vec![0.6, 0.5], 4).unwrap();
        let r = weak_residual_g(&heis(), &phi, &one, 1, &xi, 256).unwrap();
        assert!(r.abs() <= 1e-6, "{r}");
        let zero = ScalarField::constant(dom, 0.0);
        let wrong = weak_residual_g(&heis(), &phi, &zero, 1, &xi, 256).unwrap();
        assert!(wrong.abs() >= 0.9 * xi.integral());
    }

    #[test]
    fn engel_examples() {
        let dom = BoxDomain::cube(3, 1.0);
        let phi = ScalarField::closed(dom.clone(), |w| w[2].cbrt());
        let sixth = ScalarField::constant(dom.clone(), 1.0 / 6.0);
        let zero = ScalarField::constant(dom.clone(), 0.0);
        let xi = BumpTest::new(vec![0.0, 0.1, 0.05], vec![0.4, 0.4, 0.5], 3).unwrap();
        assert!(weak_residual_engel(&phi, &sixth, &xi, 64).unwrap().abs() <= 1e-4);
        let r0 = weak_residual_engel(&phi, &zero, &xi, 64).unwrap();
        assert_abs_diff_eq!(r0, xi.integral() / 6.0, epsilon = 1e-4);
        let z = ScalarField::constant(dom, 0.0);
        assert_eq!(weak_residual_engel(&z, &zero, &xi, 16).unwrap(), 0.0);
    }

    #[test]
    fn free_rank_two_is_burgers() {
        // ψ = x is a steady solution of ∂_x ψ - ψ ∂_y ψ = 1.
        let dom = BoxDomain::cube(2, 1.0);
        let psi = ScalarField::closed(dom.clone(), |w| w[0]);
        let one = ScalarField::constant(dom, 1.0);
        let xi = BumpTest::new(vec![0.0, 0.0], vec![0.5, 0.5], 4).unwrap();
        let r = weak_residual_f(2, &psi, &one, 1, &xi, 128).unwrap();
        assert!(r.abs() < 1e-6, "{r}");
    }

    #[test]
    fn support_must_fit() {
        let dom = BoxDomain::cube(2, 1.0);
        let phi = ScalarField::closed(dom.clone(), |w| w[0]);
        let xi = BumpTest::new(vec![0.8, 0.0], vec![0.5, 0.5], 4).unwrap();
        assert!(matches!(
            weak_residual_g(&heis(), &phi, &phi, 1, &xi, 8),
            Err(Error::SupportEscapesDomain)
        ));
    }

    #[test]
    fn g_form_on_free_algebra_matches_f_form() {
        let a = StepTwoAlgebra::free(3).unwrap();
        let dom = BoxDomain::cube(5, 1.0);
        let psi = ScalarField::closed(dom.clone(), |w| 0.2 + w[0] - w[4] + w[1] * w[2]);
        let om = ScalarField::closed(dom, |w| w[3]);
        let w = [0.1, 0.2, -0.3, 0.4, 0.5];
        for j in 1..3 {
            let (mut f1, mut f2) = ([0.0; 5], [0.0; 5]);
            GForm::new(&a, &psi, &om, j).unwrap().flux(&w, &mut f1);
            FForm::new(3, &psi, &om, j).unwrap().flux(&w, &mut f2);
            for (x, y) in f1.iter().zip(&f2) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-15);
            }
        }
    }
}
