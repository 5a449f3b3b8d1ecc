//! Model contact charts with known ground truth.
//!
//! * `heisenberg_r3`: `α = dz − y dx` on a box, `J(∂x + y∂z) = ∂y`, Reeb field `∂z`.
//! * `torus_xi_n`: `α = cos(2πnz)dx − sin(2πnz)dy` on the unit periodic cube,
//!   `θ' = 2πn`, `J(sin(2πnz)∂x + cos(2πnz)∂y) = ∂z`; the metric is Euclidean.
//! * `mapping_torus_box`: the Heisenberg form in coordinates `(x, y, τ)` with `τ`
//!   periodic, so the pages `{τ = const}` are transverse to `X = ∂τ`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::data::ContactData;
use super::structure::FramePair;
use crate::chart::{Backend, ChartDomain, Components, Expr, OneForm};
use crate::{Error, Result};

pub const MODEL_NAMES: [&str; 3] = ["heisenberg_r3", "torus_xi_n", "mapping_torus_box"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Rotation constant where the model leaves it free.
    pub theta_prime: Option<f64>,
    /// Twisting number of `torus_xi_n`.
    pub n: Option<u32>,
    /// Side length `L` of the `(x, y)` square of `mapping_torus_box`.
    pub size: Option<f64>,
    /// Period of `τ` in `mapping_torus_box`.
    pub period: Option<f64>,
    /// Box override for `heisenberg_r3`.
    pub bounds: Option<[[f64; 2]; 3]>,
    pub grid: Option<[usize; 3]>,
    pub margin: Option<f64>,
    /// Evaluate the model through opaque closures and finite differences.
    #[serde(default)]
    pub finite_difference: bool,
}

pub const DEFAULT_GRID: usize = 48;

fn components(src: [Expr; 3], backend: Backend) -> Components {
    match backend {
        Backend::AnalyticJet => Components::from_exprs(src),
        Backend::FiniteDifference => {
            let f = src.map(|e| -> Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync> {
                Arc::new(move |p: &[f64; 3]| e.eval::<f64>(p))
            });
            Components::from_closures(f)
        }
    }
}

fn heisenberg_parts(backend: Backend) -> (OneForm, FramePair) {
    let alpha = OneForm::new(components([-Expr::y(), Expr::c(0.0), Expr::c(1.0)], backend));
    let e = components([Expr::c(1.0), Expr::c(0.0), Expr::y()], backend);
    let je = components([Expr::c(0.0), Expr::c(1.0), Expr::c(0.0)], backend);
    (
        alpha,
        FramePair {
            e: Arc::new(e),
            je: Arc::new(je),
        },
    )
}

/// Build and validate a model chart.
pub fn model_manifold(name: &str, params: &ModelParams) -> Result<ContactData> {
    let backend = if params.finite_difference {
        Backend::FiniteDifference
    } else {
        Backend::AnalyticJet
    };
    let grid = params.grid.unwrap_or([DEFAULT_GRID; 3]);
    let margin = params.margin.unwrap_or(0.0);
    let positive = |v: Option<f64>, what: &str, default: f64| -> Result<f64> {
        let v = v.unwrap_or(default);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidParams(format!("{what} must be positive, got {v}")))
        }
    };
    let cd = match name {
        "heisenberg_r3" => {
            if params.n.is_some() || params.size.is_some() || params.period.is_some() {
                return Err(Error::InvalidParams(
                    "heisenberg_r3 takes theta_prime, bounds, grid and margin only".into(),
                ));
            }
            let theta = positive(params.theta_prime, "theta_prime", 2.0)?;
            let (alpha, pair) = heisenberg_parts(backend);
            let bounds = params.bounds.unwrap_or([[0.0, 1.0]; 3]);
            let dom = ChartDomain::new(bounds, [false; 3], grid, margin)?;
            ContactData::new(name, alpha, theta, Arc::new(pair), dom)?
        }
        "torus_xi_n" => {
            if params.theta_prime.is_some() || params.size.is_some() || params.bounds.is_some() {
                return Err(Error::InvalidParams(
                    "torus_xi_n fixes theta' = 2πn and the unit cube; it takes n and grid".into(),
                ));
            }
            let n = params.n.unwrap_or(1);
            if n == 0 {
                return Err(Error::InvalidParams("n must be at least 1".into()));
            }
            let k = 2.0 * PI * n as f64;
            let arg = Expr::z() * k;
            let alpha = OneForm::new(components(
                [arg.clone().cos(), -arg.clone().sin(), Expr::c(0.0)],
                backend,
            ));
            let e = components([arg.clone().sin(), arg.cos(), Expr::c(0.0)], backend);
            let je = components([Expr::c(0.0), Expr::c(0.0), Expr::c(1.0)], backend);
            let dom = ChartDomain::new([[0.0, 1.0]; 3], [true; 3], grid, margin)?;
            let pair = FramePair {
                e: Arc::new(e),
                je: Arc::new(je),
            };
            ContactData::new(name, alpha, k, Arc::new(pair), dom)?
        }
        "mapping_torus_box" => {
            if params.n.is_some() || params.bounds.is_some() {
                return Err(Error::InvalidParams(
                    "mapping_torus_box takes theta_prime, size, period, grid and margin".into(),
                ));
            }
            let theta = positive(params.theta_prime, "theta_prime", 2.0)?;
            let l = positive(params.size, "size", 1.0)?;
            let period = positive(params.period, "period", 1.0)?;
            let (alpha, pair) = heisenberg_parts(backend);
            let dom = ChartDomain::new(
                [[-0.5 * l, 0.5 * l], [-0.5 * l, 0.5 * l], [0.0, period]],
                [false, false, true],
                grid,
                margin,
            )?;
            ContactData::new(name, alpha, theta, Arc::new(pair), dom)?
        }
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    cd.validate()?;
    Ok(cd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelParams {
        ModelParams {
            grid: Some([6; 3]),
            ..Default::default()
        }
    }

    #[test]
    fn models_validate() {
        for name in MODEL_NAMES {
            let cd = model_manifold(name, &small()).unwrap();
            let r = cd.validate().unwrap();
            assert!(r.min_contact_density > 0.0, "{name}");
            assert!(r.max_alpha_reeb_residual < 1e-14, "{name}");
            assert!(r.max_j_squared_residual < 1e-13, "{name}");
            assert!(r.max_volume_residual < 1e-13, "{name}");
        }
        assert!(matches!(
            model_manifold("sphere", &small()),
            Err(Error::UnknownModel(_))
        ));
        let bad = ModelParams {
            n: Some(0),
            ..small()
        };
        assert!(model_manifold("torus_xi_n", &bad).is_err());
    }

    #[test]
    fn heisenberg_metric_values() {
        let cd = model_manifold("heisenberg_r3", &small()).unwrap();
        let l = cd.local(&[0.2, 0.6, 0.1], 0).unwrap();
        let g = crate::chart::linalg::values_mat(&l.g);
        let e1 = [1.0, 0.0, 0.6];
        assert!((crate::contact::inner(&g, &e1, &e1) - 0.5).abs() < 1e-15);
        assert_eq!(cd.reeb(&[0.2, 0.6, 0.1]).unwrap(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn flat_torus_metric_is_euclidean() {
        let cd = model_manifold("torus_xi_n", &small()).unwrap();
        assert!((cd.theta_prime - 2.0 * PI).abs() < 1e-15);
        for p in [[0.1, 0.2, 0.3], [0.7, 0.1, 0.93]] {
            let g = crate::chart::linalg::values_mat(&cd.local(&p, 0).unwrap().g);
            for i in 0..3 {
                for j in 0..3 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i][j] - id).abs() < 1e-14);
                }
            }
        }
    }
}
