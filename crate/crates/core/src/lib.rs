//! Magnetic Schrödinger forms on weighted graphs.
//!
//! The crate assembles scalar and magnetic forms over finite weighted graphs
//! carrying a Hermitian vector bundle with a unitary connection, computes the
//! associated heat semigroups, and checks the inequalities that relate them:
//! the first Beurling-Deny criterion, Kato-type form inequalities, and
//! pointwise domination `|e^{-tA} ξ| ≤ e^{-tB} |ξ|`. Infinite graphs are only
//! ever handled through generated families and their finite truncations.
//!
//! Module map:
//!
//! - [`graph`]: weighted graphs `(X, b, c, m)`, validation, formal Laplacian,
//!   truncations, graph families.
//! - [`bundle`]: sections, unitary connections, endomorphism fields, the
//!   absolute map and polar pairing.
//! - [`forms`]: form assembly, Dirichlet restriction, evaluation and the
//!   form-level inequality checks.
//! - [`semigroup`]: dense and Krylov heat semigroups, positivity and
//!   domination checks.
//! - [`metrics`]: intrinsic and path metrics, weighted degree and the
//!   uniqueness criteria evaluated on truncations.
//! - [`probe`]: Dirichlet/Neumann exhaustion probe.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod forms;
pub mod graph;
pub mod metrics;
pub mod probe;
pub mod report;
pub mod semigroup;
pub mod sparse;

pub use num_complex::Complex64;

pub use bundle::{BundleConnection, EndomorphismField, Section};
pub use config::Tolerances;
pub use error::{Error, Result};
pub use forms::{BoundaryCondition, FormOperator};
pub use graph::{FamilyKind, FamilySpec, MeasureProfile, Truncation, WeightedGraph};
pub use report::{Verdict, VerificationReport};
