//! Run configuration: one JSON file, unknown keys rejected.

use std::path::Path;

use contact_ricci::contact::ModelParams;
use contact_ricci::curvature::SuiteOptions;
use contact_ricci::realization::{FlowBox, GlobalOptions, DEFAULT_STEP};
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: ManifoldSpec,
    /// Prescribed `Ricci(X)`, an expression in the JSON dialect.
    #[serde(default)]
    pub f: Option<Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub local: Option<LocalOptions>,
    #[serde(default)]
    pub global: GlobalOptions,
    #[serde(default)]
    pub distance: Option<DistanceOptions>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub name: String,
    #[serde(default)]
    pub params: ModelParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    /// Seeded random `(λ, η)` pairs checked against the oracle.
    pub random_perturbations: usize,
    /// Per axis; the coarse grid has at least 4 points per axis.
    pub perturbation_points: usize,
    pub suite: SuiteOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            random_perturbations: 100,
            perturbation_points: 4,
            suite: SuiteOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalOptions {
    pub flow_box: FlowBox,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceOptions {
    pub metrics: Vec<MetricSpec>,
    #[serde(default = "default_path_steps")]
    pub path_steps: usize,
}

fn default_path_steps() -> usize {
    16
}

/// A metric on the manifold's chart: its compatible metric, a constant multiple
/// of it, or explicit components `g11, g12, g13, g22, g23, g33`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub name: String,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub components: Option<[Value; 6]>,
}

pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}
