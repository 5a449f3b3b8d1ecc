//! Compatible Riemannian metrics on contact 3-manifold charts.
//!
//! The crate builds the metric `g(u,v) = dα(u,Jv)/θ' + α(u)α(v)` from a contact
//! form, a rotation constant and a complex structure on `ξ = ker α`, evaluates the
//! Ricci curvature of the Reeb field both from closed forms and from an independent
//! Levi-Civita oracle, prescribes that curvature by deforming `J`, and measures the
//! resulting metric sequences in the L² metric on the space of metrics.
//!
//! All derivatives are taken through truncated Taylor jets ([`chart::Jet`]) when the
//! inputs are expressions, or by Richardson-extrapolated central differences when they
//! are opaque closures.

pub mod chart;
pub mod contact;
pub mod curvature;
pub mod metric_space;
pub mod realization;

mod error;

pub use error::{Error, Point, Result};

/// Tolerance ladder shared by checks and reports.
pub mod tolerance {
    /// Identities evaluated through analytic jets.
    pub const ANALYTIC: f64 = 1e-6;
    /// Anything involving RK4 integration or finite differences.
    pub const NUMERIC: f64 = 1e-3;
    /// Structural identities that hold to near machine precision.
    pub const STRUCTURAL: f64 = 1e-8;
    /// Exact model ground truth.
    pub const MODEL: f64 = 1e-9;

    /// Name of the rung a tolerance belongs to, for reports.
    pub fn rung(tol: f64) -> &'static str {
        if tol <= MODEL {
            "model"
        } else if tol <= STRUCTURAL {
            "structural"
        } else if tol <= ANALYTIC {
            "analytic"
        } else {
            "numeric"
        }
    }
}
