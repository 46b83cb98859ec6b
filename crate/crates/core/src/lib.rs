//! Learning ground-state properties of parameterized lattice Hamiltonians.
//!
//! The crate covers the full pipeline:
//!
//! * [`geometry`] — lattices, Pauli strings, and the geometrically local
//!   string family;
//! * [`hamiltonian`] — parameterized Hamiltonian families (random-coupling
//!   Heisenberg), exact ground states with degenerate-mixture handling;
//! * [`shadows`] — randomized single-qubit measurement snapshots and the
//!   inverse-channel estimators built from them;
//! * [`features`] — the indicator (grid-cell) feature map over coupling
//!   space and the random Fourier feature map over local coupling windows;
//! * [`lasso`] — l1-regularized least squares in penalized and
//!   norm-constrained form, with optimality certificates;
//! * [`paulinorm`] — the constructive certificate bounding the Pauli
//!   coefficient 1-norm of a geometrically local observable by its operator
//!   norm.
//!
//! Numeric code is generic over the scalar type through [`scalar::Scalar`]
//! (implemented for `f32` and `f64`); the aliases below fix `f64`, which is
//! what the command-line harness uses.

pub mod error;
pub mod features;
pub mod geometry;
pub mod hamiltonian;
pub mod lasso;
pub mod pauli;
pub mod paulinorm;
pub mod scalar;
pub mod shadows;

mod solver;

pub use error::{Error, Result};

// These crates appear in public signatures (state vectors, density
// matrices); re-exporting them lets downstream code name the exact same
// versions.
pub use nalgebra;
pub use num_complex;

/// f64-backed aliases for the generic types, used by the harness and most tests.
pub type PauliSum64 = pauli::PauliSum<f64>;
pub type ParamHamiltonian64 = hamiltonian::ParamHamiltonian<f64>;
pub type GroundState64 = hamiltonian::GroundState<f64>;
pub type IndicatorMap64 = features::IndicatorMap<f64>;
pub type RffMap64 = features::RffMap<f64>;
pub type Dataset64 = lasso::Dataset<f64>;
pub type RegressionModel64 = lasso::RegressionModel<f64>;
pub type TestState64 = paulinorm::TestState<f64>;
pub type NormCertificate64 = paulinorm::NormCertificate<f64>;
