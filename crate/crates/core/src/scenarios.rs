//! Bundled solution scenarios: a geometry, a graph function, its data and
//! default discretization parameters.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::StepTwoAlgebra;
use crate::characteristics::{integrate, Characteristic};
use crate::error::{Error, Result};
use crate::fields::{EngelDirection, EngelField, ProjectedField, ProjectedFieldF, ProjectedFieldG};
use crate::free::PairIndex;
use crate::graphs::{BoxDomain, ScalarField};
use crate::verify::{EngelForm, FForm, GForm, WeakForm};

/// Where a scenario lives.
#[derive(Debug, Clone)]
pub enum Geometry {
    Group(StepTwoAlgebra),
    /// Free step-2 group of rank `m`, with its own free-side operators.
    Free { m: usize },
    Engel,
}

impl Geometry {
    pub fn w_dim(&self) -> usize {
        match self {
            Geometry::Group(a) => a.w_dim(),
            Geometry::Free { m } => m - 1 + PairIndex::count(*m),
            Geometry::Engel => 3,
        }
    }

    /// Generator indices with a projected field (0-based, so `1` is `X_2`).
    pub fn generators(&self) -> Vec<usize> {
        match self {
            Geometry::Group(a) => (1..a.rank()).collect(),
            Geometry::Free { m } => (1..*m).collect(),
            Geometry::Engel => vec![1],
        }
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        match self {
            Geometry::Group(a) => (2..=a.rank())
                .map(|k| format!("x{k}"))
                .chain((1..=a.vertical_dim()).map(|i| format!("y{i}")))
                .collect(),
            Geometry::Free { m } => (2..=*m)
                .map(|k| format!("x{k}"))
                .chain(PairIndex::all(*m).into_iter().map(|p| format!("y{}{}", p.l + 1, p.s + 1)))
                .collect(),
            Geometry::Engel => vec!["x2".into(), "x3".into(), "x4".into()],
        }
    }

    pub fn field(&self, phi: &ScalarField, j: usize) -> Result<Arc<dyn ProjectedField>> {
        Ok(match self {
            Geometry::Group(a) => Arc::new(ProjectedFieldG::new(a.clone(), phi.clone(), j)?),
            Geometry::Free { m } => Arc::new(ProjectedFieldF::new(*m, phi.clone(), j)?),
            Geometry::Engel => match j {
                1 => Arc::new(EngelField::new(phi.clone(), EngelDirection::X2)?),
                2 => Arc::new(EngelField::new(phi.clone(), EngelDirection::X3)?),
                _ => return Err(Error::InvalidArgument(format!("Engel generator index {j}"))),
            },
        })
    }
}

/// A graph function `φ` with data `ω_j` on a box in `W`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub anchor: String,
    pub geometry: Geometry,
    pub phi: ScalarField,
    /// `omega[k]` is the datum for generator `geometry.generators()[k]`.
    pub omega: Vec<ScalarField>,
    /// Characteristics start in this box.
    pub base_box: BoxDomain,
    pub horizon: f64,
    pub step: f64,
}

impl Scenario {
    pub fn domain(&self) -> &BoxDomain {
        self.phi.domain()
    }

    pub fn dim(&self) -> usize {
        self.geometry.w_dim()
    }

    pub fn omega(&self, j: usize) -> Result<&ScalarField> {
        let k = self.geometry.generators().iter().position(|g| *g == j);
        k.and_then(|k| self.omega.get(k))
            .ok_or_else(|| Error::InvalidArgument(format!("no datum for generator {j} in {}", self.id)))
    }

    pub fn field(&self, j: usize) -> Result<Arc<dyn ProjectedField>> {
        self.geometry.field(&self.phi, j)
    }

    pub fn weak_form(&self, j: usize) -> Result<Box<dyn WeakForm + '_>> {
        let omega = self.omega(j)?;
        Ok(match &self.geometry {
            Geometry::Group(a) => Box::new(GForm::new(a, &self.phi, omega, j)?),
            Geometry::Free { m } => Box::new(FForm::new(*m, &self.phi, omega, j)?),
            Geometry::Engel => Box::new(EngelForm::new(&self.phi, omega)?),
        })
    }

    /// `count` seeded base points in `base_box`; the first is its center.
    pub fn base_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = &self.base_box;
        let mut out = Vec::with_capacity(count);
        if count > 0 {
            out.push(b.center());
        }
        while out.len() < count {
            out.push((0..b.dim()).map(|k| rng.random_range(b.lo[k]..=b.hi[k])).collect());
        }
        out
    }

    /// Probe points for modulus scans: the domain center, then
    /// `count - 1` seeded base points.
    pub fn probe_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut out = vec![self.domain().center()];
        out.extend(self.base_points(count.saturating_sub(1), seed).into_iter().skip(1));
        out
    }

    /// Two-sided characteristics of `D^φ_j` through seeded base points.
    pub fn curves(&self, j: usize, count: usize, seed: u64, step: f64) -> Result<Vec<Characteristic>> {
        let field = self.field(j)?;
        self.base_points(count, seed)
            .iter()
            .map(|a| integrate(field.as_ref(), a, self.horizon, step))
            .collect()
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

/// `ω_j = D^φ_j φ` for an affine `φ = c + g·w`.
fn affine_datum(field: Arc<dyn ProjectedField>, g: Vec<f64>) -> ScalarField {
    let domain = field.graph().domain().clone();
    ScalarField::closed(domain, move |w| {
        let mut v = [0.0f64; 32];
        let d = w.len();
        let phi = field.graph().eval_unchecked(w);
        field.velocity_with(w, phi, &mut v[..d]);
        v[..d].iter().zip(&g).map(|(a, b)| a * b).sum()
    })
}

/// Scenario with the affine solution `φ = c + g·w` of its own datum.
pub fn affine_scenario(id: &str, anchor: &str, geometry: Geometry, domain: BoxDomain, c: f64, g: Vec<f64>) -> Result<Scenario> {
    let d = geometry.w_dim();
    crate::error::check_len(d, domain.dim())?;
    crate::error::check_len(d, g.len())?;
    let gc = g.clone();
    let phi = ScalarField::closed(domain.clone(), move |w| c + w.iter().zip(&gc).map(|(a, b)| a * b).sum::<f64>());
    let omega = geometry
        .generators()
        .into_iter()
        .map(|j| Ok(affine_datum(geometry.field(&phi, j)?, g.clone())))
        .collect::<Result<Vec<_>>>()?;
    let horizon = DEFAULT_HORIZON;
    Ok(Scenario {
        id: id.into(),
        anchor: anchor.into(),
        base_box: domain.shrink(0.5),
        geometry,
        phi,
        omega,
        horizon,
        step: horizon / 512.0,
    })
}

pub const DEFAULT_HORIZON: f64 = 0.25;

pub const BUILTIN_IDS: [&str; 5] = ["heisenberg1", "heisenberg1-vertical", "intro5d", "free3", "engel-counterexample"];

/// A bundled scenario by id.
pub fn builtin(id: &str) -> Option<Scenario> {
    let s = match id {
        "heisenberg1" => affine_scenario(
            id,
            "first Heisenberg group, classical Burgers equation: φ = x2, ω = 1",
            Geometry::Group(StepTwoAlgebra::heisenberg()),
            BoxDomain::cube(2, 1.0),
            0.0,
            vec![1.0, 0.0],
        ),
        "heisenberg1-vertical" => affine_scenario(
            id,
            "first Heisenberg group with vertical dependence: φ = x2 + y, ω = 1 + φ",
            Geometry::Group(StepTwoAlgebra::heisenberg()),
            BoxDomain::cube(2, 1.0),
            0.0,
            vec![1.0, 1.0],
        ),
        "intro5d" => affine_scenario(
            id,
            "rank-3 group with [X1,X2] = Y1 + Y2, [X1,X3] = Y1 - Y2",
            Geometry::Group(StepTwoAlgebra::intro5d()),
            BoxDomain::cube(4, 1.0),
            0.5,
            vec![1.0, -0.5, 0.25, -0.2],
        ),
        "free3" => affine_scenario(
            id,
            "free step-2 group of rank 3",
            Geometry::Free { m: 3 },
            BoxDomain::cube(5, 1.0),
            0.5,
            vec![1.0, -0.5, 0.25, 0.0, 0.2],
        ),
        "engel-counterexample" => {
            let domain = BoxDomain::cube(3, 1.0);
            Ok(Scenario {
                id: id.into(),
                anchor: "Engel group, φ = x4^(1/3): distributional and broad* along X2, not 1/3-little Hölder".into(),
                geometry: Geometry::Engel,
                phi: ScalarField::closed(domain.clone(), |w| w[2].cbrt()),
                omega: vec![ScalarField::constant(domain.clone(), 1.0 / 6.0)],
                // Through x4 = 0 the curve ODE x4' = x4^(2/3)/2 loses uniqueness and
                // the solver follows the stationary branch.
                base_box: BoxDomain::new(vec![-0.5, -0.5, 0.3], vec![0.5, 0.5, 0.6]).expect("valid box"),
                horizon: DEFAULT_HORIZON,
                step: DEFAULT_HORIZON / 512.0,
            })
        }
        _ => return None,
    };
    Some(s.expect("bundled scenarios are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn registry_resolves() {
        for id in BUILTIN_IDS {
            let s = builtin(id).unwrap();
            assert_eq!(s.id, id);
            assert_eq!(s.omega.len(), s.geometry.generators().len());
            assert_eq!(s.geometry.coordinate_names().len(), s.dim());
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn heisenberg_data() {
        let s = builtin("heisenberg1").unwrap();
        assert_eq!(s.omega(1).unwrap().eval(&[0.3, -0.4]).unwrap(), 1.0);
        let v = builtin("heisenberg1-vertical").unwrap();
        assert_abs_diff_eq!(v.omega(1).unwrap().eval(&[0.3, -0.4]).unwrap(), 0.9, epsilon = 1e-15);
        assert_eq!(builtin("free3").unwrap().geometry.coordinate_names()[2..], ["y21", "y31", "y32"]);
    }

    #[test]
    fn affine_datum_matches_finite_difference() {
        for id in ["intro5d", "free3"] {
            let s = builtin(id).unwrap();
            for j in s.geometry.generators() {
                let f = s.field(j).unwrap();
                let w = vec![0.1; s.dim()];
                let v = f.velocity_vec(&w).unwrap();
                let h = 1e-6;
                let plus: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + h * b).collect();
                let minus: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - h * b).collect();
                let fd = (s.phi.eval(&plus).unwrap() - s.phi.eval(&minus).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(s.omega(j).unwrap().eval(&w).unwrap(), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn base_points_are_seeded() {
        let s = builtin("intro5d").unwrap();
        assert_eq!(s.base_points(5, 3), s.base_points(5, 3));
        assert_ne!(s.base_points(5, 3), s.base_points(5, 4));
        assert_eq!(s.base_points(1, 0)[0], vec![0.0; 4]);
        assert!(s.base_points(50, 1).iter().all(|p| s.base_box.contains(p)));
    }
}
