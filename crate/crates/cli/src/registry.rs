//! Bundled and user-registered scenarios.
//!
//! A user scenario is a JSON document (or an array of them):
//!
//! ```json
//! {
//!   "id": "heis-grid",
//!   "anchor": "sampled x2 on the Heisenberg group",
//!   "geometry": "heisenberg",
//!   "phi": {"csv": "phi.csv"},
//!   "omega": [{"constant": 1.0}],
//!   "interpolation": "cubic",
//!   "horizon": 0.25
//! }
//! ```
//!
//! `geometry` is `"heisenberg"`, `"intro5d"`, `"engel"`, `"free-<m>"` or an
//! algebra document `{"m", "h", "B"}`. Fields are `{"csv": path}`,
//! `{"constant": c}` or `{"affine": {"c": c, "g": [...]}}`; with an affine
//! `phi` the data may be omitted and are derived from it. CSV paths are
//! relative to the scenario file.

use std::path::{Path, PathBuf};

use carnot_core::scenarios::{affine_scenario, builtin, Geometry, Scenario, BUILTIN_IDS, DEFAULT_HORIZON};
use carnot_core::{BoxDomain, Grid, Interpolation, ScalarField, StepTwoAlgebra};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GeometryDoc {
    Named(String),
    Algebra(StepTwoAlgebra),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum FieldDoc {
    Csv(PathBuf),
    Constant(f64),
    Affine { c: f64, g: Vec<f64> },
}

#[derive(Debug, Deserialize)]
struct DomainDoc {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    id: String,
    #[serde(default)]
    anchor: String,
    geometry: GeometryDoc,
    phi: FieldDoc,
    omega: Option<Vec<FieldDoc>>,
    domain: Option<DomainDoc>,
    #[serde(default)]
    interpolation: Option<String>,
    horizon: Option<f64>,
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Docs {
    One(Box<ScenarioDoc>),
    Many(Vec<ScenarioDoc>),
}

fn geometry(doc: GeometryDoc) -> Result<Geometry, CliError> {
    Ok(match doc {
        GeometryDoc::Algebra(a) => Geometry::Group(a),
        GeometryDoc::Named(name) => match name.as_str() {
            "heisenberg" => Geometry::Group(StepTwoAlgebra::heisenberg()),
            "intro5d" => Geometry::Group(StepTwoAlgebra::intro5d()),
            "engel" => Geometry::Engel,
            other => match other.strip_prefix("free-").and_then(|m| m.parse::<usize>().ok()) {
                Some(m) if m >= 2 => Geometry::Free { m },
                _ => return Err(CliError::Scenario(format!("unknown geometry {other:?}"))),
            },
        },
    })
}

fn field(doc: &FieldDoc, base: &Path, domain: &BoxDomain, order: Interpolation) -> Result<ScalarField, CliError> {
    Ok(match doc {
        FieldDoc::Csv(p) => {
            let (_, grid) = Grid::from_csv_path(&base.join(p), order)?;
            ScalarField::from_grid(grid)
        }
        FieldDoc::Constant(c) => ScalarField::constant(domain.clone(), *c),
        FieldDoc::Affine { c, g } => {
            let (c, g) = (*c, g.clone());
            ScalarField::closed(domain.clone(), move |w| c + w.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>())
        }
    })
}

fn resolve(doc: ScenarioDoc, base: &Path) -> Result<Scenario, CliError> {
    let geometry = geometry(doc.geometry)?;
    let d = geometry.w_dim();
    let order = match doc.interpolation.as_deref() {
        None | Some("multilinear") => Interpolation::Multilinear,
        Some("cubic") => Interpolation::Cubic,
        Some(other) => return Err(CliError::Scenario(format!("unknown interpolation {other:?}"))),
    };
    let domain = match (&doc.domain, &doc.phi) {
        (Some(dd), _) => BoxDomain::new(dd.lo.clone(), dd.hi.clone())?,
        (None, FieldDoc::Csv(p)) => Grid::from_csv_path(&base.join(p), order)?.1.domain.clone(),
        (None, _) => BoxDomain::cube(d, 1.0),
    };
    if domain.dim() != d {
        return Err(CliError::Scenario(format!("{}: domain has dimension {}, geometry needs {d}", doc.id, domain.dim())));
    }
    let mut s = match (&doc.phi, &doc.omega) {
        (FieldDoc::Affine { c, g }, None) => affine_scenario(&doc.id, &doc.anchor, geometry, domain, *c, g.clone())?,
        (_, None) => return Err(CliError::Scenario(format!("{}: omega is required unless phi is affine", doc.id))),
        (phi_doc, Some(omega_docs)) => {
            let phi = field(phi_doc, base, &domain, order)?;
            let omega = omega_docs.iter().map(|o| field(o, base, &domain, order)).collect::<Result<Vec<_>, _>>()?;
            if omega.len() != geometry.generators().len() {
                return Err(CliError::Scenario(format!(
                    "{}: expected {} omega components, found {}",
                    doc.id,
                    geometry.generators().len(),
                    omega.len()
                )));
            }
            if phi.dim() != d || omega.iter().any(|o| o.dim() != d) {
                return Err(CliError::Scenario(format!("{}: field dimensions must equal {d}", doc.id)));
            }
            Scenario {
                id: doc.id.clone(),
                anchor: doc.anchor.clone(),
                base_box: phi.domain().shrink(0.25 * phi.domain().width(0)),
                geometry,
                phi,
                omega,
                horizon: DEFAULT_HORIZON,
                step: DEFAULT_HORIZON / 512.0,
            }
        }
    };
    if let Some(t) = doc.horizon {
        s.horizon = t;
        s.step = t / 512.0;
    }
    if let Some(h) = doc.step {
        s.step = h;
    }
    if !(s.horizon > 0.0 && s.step > 0.0) {
        return Err(CliError::Scenario(format!("{}: horizon and step must be positive", s.id)));
    }
    Ok(s)
}

/// Bundled scenarios followed by user scenarios in registration order.
pub struct Registry {
    pub scenarios: Vec<Scenario>,
}

impl Registry {
    pub fn bundled() -> Self {
        Self {
            scenarios: BUILTIN_IDS.iter().map(|id| builtin(id).expect("bundled id")).collect(),
        }
    }

    pub fn register_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Scenario(format!("{}: {e}", path.display())))?;
        let docs = match serde_json::from_str(&text).map_err(|e| CliError::Scenario(format!("{}: {e}", path.display())))? {
            Docs::One(d) => vec![*d],
            Docs::Many(v) => v,
        };
        let base = path.parent().unwrap_or(Path::new("."));
        for doc in docs {
            let s = resolve(doc, base)?;
            if self.get(&s.id).is_some() {
                return Err(CliError::Scenario(format!("duplicate scenario id {:?}", s.id)));
            }
            self.scenarios.push(s);
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }
}

pub fn geometry_label(g: &Geometry) -> String {
    match g {
        Geometry::Group(a) => format!("step-2 m={} h={}", a.rank(), a.vertical_dim()),
        Geometry::Free { m } => format!("free-{m}"),
        Geometry::Engel => "engel".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_registry() {
        let r = Registry::bundled();
        assert!(r.scenarios.len() >= 4);
        assert!(r.scenarios.iter().all(|s| !s.anchor.is_empty()));
    }

    #[test]
    fn user_csv_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = String::from("x2,y,phi\n");
        for i in 0..5 {
            for k in 0..5 {
                let (x, y) = (-1.0 + 0.5 * i as f64, -1.0 + 0.5 * k as f64);
                csv.push_str(&format!("{x},{y},{x}\n"));
            }
        }
        std::fs::write(dir.path().join("phi.csv"), csv).unwrap();
        let doc = r#"{"id": "grid", "geometry": "heisenberg", "phi": {"csv": "phi.csv"}, "omega": [{"constant": 1.0}]}"#;
        std::fs::write(dir.path().join("s.json"), doc).unwrap();
        let mut r = Registry::bundled();
        r.register_file(&dir.path().join("s.json")).unwrap();
        let s = r.get("grid").unwrap();
        assert!((s.phi.eval(&[0.3, 0.2]).unwrap() - 0.3).abs() < 1e-14);
        assert!(matches!(r.register_file(&dir.path().join("s.json")), Err(CliError::Scenario(_))));
    }

    #[test]
    fn geometry_names() {
        assert!(matches!(geometry(GeometryDoc::Named("free-3".into())).unwrap(), Geometry::Free { m: 3 }));
        assert!(geometry(GeometryDoc::Named("free-1".into())).is_err());
        let doc: GeometryDoc = serde_json::from_str(r#"{"m": 2, "h": 1, "B": [[0, 1, -1, 0]]}"#).unwrap();
        assert!(matches!(geometry(doc).unwrap(), Geometry::Group(_)));
    }
}
