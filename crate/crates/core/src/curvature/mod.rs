//! Curvature of compatible metrics: an independent Levi-Civita oracle, the closed
//! forms for `Ricci(X)` and its companions, and α-Jacobi field machinery.

mod closed;
pub mod jacobi;
pub mod oracle;
mod suite;

pub use closed::{
    backend_tolerance, count_zero_directions, covariant_reeb_derivative, curvature_report,
    max_ricci_equivalence, pq_from_frame, pq_ricci, ricci_reeb_oracle, scaled_tolerances,
    second_fundamental, CovariantCheck, CurvatureReport, EquivalenceReport, Pq, SecondFundamental,
    SWEEP,
};
pub use jacobi::{alpha_jacobi_propagate, jacobi_equation_residual, sectional_via_jacobi, JacobiPath};
pub use suite::{grid_rows, verification_suite, IdentityCheck, SuiteOptions, VerificationSuite, GRID_COLUMNS, MAX_SKIPPED_FRACTION};
pub use oracle::{christoffel_oracle, sectional_oracle, Christoffel, Connection};
