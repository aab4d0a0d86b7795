//! Step-2 Carnot groups in exponential coordinates, intrinsic graphs over
//! codimension-one subgroups, and numerical checks for the Burgers-type
//! system `D^φ φ = ω`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algebra;
pub mod characteristics;
pub mod error;
pub mod fields;
pub mod free;
pub mod graphs;
pub mod scenarios;
pub mod verify;

pub use algebra::{GroupPoint, StepTwoAlgebra};
pub use characteristics::{integrate, integrate_span, project_curve, translate_curve, Characteristic};
pub use error::{Error, Result};
pub use fields::{EngelDirection, EngelField, ProjectedField, ProjectedFieldF, ProjectedFieldG};
pub use free::{complete_matrix_m, free_mul, project_pi, FreePoint, PairIndex};
pub use graphs::{BoxDomain, Grid, Interpolation, ScalarField, VectorField};
pub use verify::VerificationReport;
pub use scenarios::{builtin, Geometry, Scenario};
