//! Classical pre-optimization of Trotter-like product formulas.
//!
//! A product formula `U_var = ∏_r ∏_j exp(-i θ_{r,j} H_j)` approximates
//! `exp(-i t H)` for `H = Σ_j c_j H_j` built from Pauli strings. The crate
//! expands the error of such a sequence to low order in the layer
//! parameters, giving a polynomial cost that is cheap to evaluate and
//! differentiate without ever touching a `2^n`-dimensional matrix. The
//! layer parameters are then optimized classically and checked against an
//! exact dense-matrix oracle for small systems.
//!
//! Module map:
//!
//! * [`pauli`]: phase-exact Pauli string algebra.
//! * [`model`]: TFIM / XY / custom Hamiltonian builders.
//! * [`sheet`]: the `R × M` layer-parameter matrix.
//! * [`cost`]: second-order distance `C`, its gradient, the third-order
//!   estimate `E`, the repetition rest term `Λ` and unit-cell scaling.
//! * [`optimize`]: projected quasi-Newton minimization of `C²`.
//! * [`dense`]: exact propagators, ansatz/Trotter unitaries and distances.
//! * [`experiments`]: time sweeps, repetition scaling and maximal-time
//!   searches that write CSV tables and run manifests.
//! * [`exec`]: data-parallel map with a sequential fallback.

pub mod cost;
pub mod dense;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod model;
pub mod optimize;
pub mod pauli;
pub mod sheet;

pub use cost::{ChiCoefficients, CostPolynomial, PhiTensor};
pub use dense::{DenseMatrix, DenseUnitary, SpectralPropagator, TrotterOrder};
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{CouplingSpec, HamiltonianModel, ModelKind};
pub use optimize::{OptimizationResult, OptimizerSettings};
pub use pauli::{Phase, PauliString, PauliSum};
pub use sheet::ParamSheet;
