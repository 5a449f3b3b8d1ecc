//! Prescribing the Ricci curvature of the Reeb field by deforming `J`.
//!
//! * [`perturb_complex_structure`] and [`ricci_perturbed_closed_form`]: the
//!   deformation `J_*: e ↦ η²Je + λe` and the closed form of `Ricci_*(X)`.
//! * [`local_realize`]: solve for `(λ, η)` on a flow box so that `Ricci_*(X) = f`.
//! * [`sweep_lower_ricci`]: a constant `λ` pushing `Ricci(X)` below a level.
//! * [`almost_global_realize`]: the realization on a mapping torus, closed up by
//!   interpolating back to `J` on a thin band before the initial page.

mod global;
mod local;
mod perturb;
mod sweep;

pub use global::{almost_global_realize, band_width, smoothstep, GlobalOptions, MetricSequence, SequenceEntry};
pub use local::{
    local_realize, prescribed, FlowBox, FlowSample, RealizationSolution, RealizationSummary,
    SampleCheck, TimeSamples, CLAMP_FLOOR_FACTOR, DEFAULT_STEP, STIFF_LIMIT,
};
pub use perturb::{
    bracket_coefficients, closed_form_agreement, closed_form_values, random_perturbations, perturb_complex_structure, perturb_unchecked,
    perturbed_metric_value, perturbed_section_length, ricci_perturbed_closed_form, AgreementReport, BracketCoefficients,
    PerturbationField,
};
pub use sweep::{ricci_lambda, sweep_lower_ricci, SweepResult};
