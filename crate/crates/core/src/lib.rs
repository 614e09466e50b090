//! Solver and certifier for the double variational inequality on small balls.
//!
//! Given a vector field `Φ` on a closed ball `B_ρ ⊂ R^n` with `Φ(0) ≠ 0` and a
//! Lipschitz Jacobian, this crate computes the constants that bound an
//! admissible radius `r`, finds the unique `x*` with `‖x*‖ = r` satisfying
//!
//! ```text
//! max{⟨Φ(x*), x* − y⟩, ⟨Φ(y), x* − y⟩} < 0   for all y ∈ B_r \ {x*}
//! ```
//!
//! and verifies that conclusion a posteriori by sampling.
//!
//! Module map:
//! - [`linalg`]: ball projection, spectral norm, ball-constrained least squares.
//! - [`qmc`]: seeded low-discrepancy point sets in balls and on spheres.
//! - [`fields`]: vector fields, built-in families, finite differences.
//! - [`problem`]: the JSON problem document.
//! - [`certify`]: `θ, γ, M, σ, δ` and the admissible radius.
//! - [`solve`]: fixed-point and saddle-point solvers.
//! - [`verify`]: sampling-based verification report.

pub mod certify;
pub mod fields;
pub mod linalg;
pub mod problem;
pub mod qmc;
pub mod solve;
pub mod verify;

pub use certify::{certify, CertifyOptions, ConstantsCertificate, Provenance};
pub use fields::{AnalyticConstants, FieldError, VectorFieldSpec};
pub use linalg::{Matrix, Vector};
pub use problem::{parse_problem, FieldFamily, ProblemConfig, ProblemError};
pub use solve::{SolutionCertificate, SolveError};
pub use verify::{VerificationReport, VerifyOptions};

/// Version tag written into every serialized report.
pub const SCHEMA_VERSION: u32 = 1;
