//! Numerical checks: weak residuals, dimensional reduction, FTC along
//! characteristics, Lipschitz bounds, the Dafermos identity, Hölder moduli
//! and translation invariance.

mod checks;
mod quadrature;
mod testfn;
mod weak;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use checks::{
    broad_star_check, dafermos_identity, dimensional_reduction_check, fit_power_law, holder_modulus, lipschitz_check,
    lipschitz_constant, structural_exactness_check, translation_invariance_check, DafermosTerms, HolderScan, TranslationTerms,
};
pub use quadrature::{AxisRule, Quadrature};
pub use testfn::{BumpTest, PlateauBump, PulledBack, SlicedTest, TestFunction};
pub use weak::{
    weak_pairing, weak_residual_engel, weak_residual_f, weak_residual_g, EngelForm, FForm, GForm, WeakForm, WeakPairing,
};

/// Outcome of one check. `pass` holds iff there is at least one deviation
/// and every deviation is at most `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub scenario: String,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, serde_json::Value>,
    pub values: Vec<f64>,
    pub deviations: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(check: &str, tolerance: f64) -> Self {
        Self {
            check: check.to_owned(),
            scenario: String::new(),
            seed: None,
            params: BTreeMap::new(),
            values: Vec::new(),
            deviations: Vec::new(),
            tolerance,
            pass: false,
            notes: Vec::new(),
        }
    }

    pub fn scenario(mut self, id: &str) -> Self {
        self.scenario = id.to_owned();
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    /// Recomputes `pass` from the deviations.
    pub fn finish(mut self) -> Self {
        self.pass = !self.deviations.is_empty() && self.deviations.iter().all(|d| *d <= self.tolerance);
        self
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Merges reports of the same check into one, keeping every deviation.
    pub fn merge(check: &str, tolerance: f64, parts: Vec<VerificationReport>) -> Self {
        let mut out = Self::new(check, tolerance);
        for p in parts {
            if out.scenario.is_empty() {
                out.scenario = p.scenario.clone();
            }
            out.seed = out.seed.or(p.seed);
            out.values.extend(p.values);
            out.deviations.extend(p.deviations);
            out.notes.extend(p.notes);
        }
        out.finish()
    }
}
