//! Homothetic-solution data and integrability criteria for N-center problems
//! `H = |p|^2/2 - sum m_i / |q - c_i|^alpha` with rational `alpha` in `(0, 2)`.
//!
//! * [`exact`]: rationals and arithmetic-progression sets
//! * [`model`]: configurations, the physical and auxiliary vector fields
//! * [`homothetic`]: isotropic points, homothetic directions, the matrix `A` and its spectrum
//! * [`certify`]: exponent differences, the criterion table, verdicts
//! * [`simulate`]: adaptive integration, homothetic cross-validation, Poincare sections

pub mod certify;
pub mod exact;
pub mod homothetic;
pub mod linalg;
pub mod model;
pub mod simulate;

pub use certify::{certify, CertifyOptions, CriterionRow, Verdict, VerdictKind};
pub use exact::{ArithmeticSet, Progression, Rational};
pub use homothetic::{ExponentConvention, Gauge, HomotheticData};
pub use model::{ComplexVector, Configuration, PhaseState};
