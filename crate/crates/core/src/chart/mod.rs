//! Chart-level calculus: jets, expression fields, box domains, brackets, exterior
//! derivatives and density quadrature.

pub mod domain;
pub mod expr;
pub mod field;
pub mod jet;
pub mod linalg;
pub mod ops;

pub use domain::ChartDomain;
pub use expr::{Expr, ExprError};
pub use field::{
    Backend, Components, ConstField, ExprField, FdField, OneForm, ScalarField, SharedScalar,
    SharedVector, TwoForm, VectorField,
};
pub use jet::{Jet, JetMat, JetVec, Scalar};
pub use ops::{
    bracket_jets, evaluate_jet, exterior_derivative, exterior_derivative_jets, integrate_density,
    lie_bracket, midpoint_sum, write_grid_csv, JetEval, Quadrature,
};
