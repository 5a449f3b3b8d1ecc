//! Lowering `Ricci(X)` below a level by a constant `λ`.
//!
//! With `η ≡ 1` and constant `λ` the closed form reduces to
//! `Ricci_λ = −2(A + λB)² + θ'²/2 − 2(B/2 − C/2 − λA − λ²B/2)²`, a polynomial of even
//! degree in `λ` at each point.

use rayon::prelude::*;
use serde::Serialize;

use super::perturb::{bracket_coefficients, closed_form_values};
use crate::contact::ContactData;
use crate::{tolerance, Error, Point, Result};

/// Samples per bracket `[−L, L]`.
pub const SWEEP_SAMPLES: usize = 129;
/// The bracket doubles from 1 up to this half-width.
pub const BRACKET_LIMIT: f64 = 1024.0;

pub fn ricci_lambda(theta: f64, abc: [f64; 3], lambda: f64) -> f64 {
    closed_form_values(theta, abc, lambda, 1.0, 0.0, 0.0)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepResult {
    pub lambda: f64,
    /// Grid maximum of the closed form at `lambda`.
    pub max_ricci: f64,
    pub target: f64,
    /// Half-width of the bracket where `lambda` was found.
    pub bracket: f64,
    pub points: usize,
}

/// Smallest-magnitude constant `λ` on an expanding sample of brackets with
/// `max_grid Ricci_λ < c`.
pub fn sweep_lower_ricci(cd: &ContactData, c: f64) -> Result<SweepResult> {
    let th = cd.theta_prime;
    if !(c <= 0.5 * th * th) {
        return Err(Error::InvalidParams(format!(
            "target {c} exceeds the bound theta'^2/2 = {}",
            0.5 * th * th
        )));
    }
    let pts = cd.domain.sample_points();
    let coeffs: Vec<[f64; 3]> = pts
        .par_iter()
        .map(|p| {
            let k = bracket_coefficients(cd, p, 0)?;
            Ok([k.a.value(), k.b.value(), k.c.value()])
        })
        .collect::<Result<_>>()?;
    let base_max = coeffs.iter().fold(f64::NEG_INFINITY, |m, k| m.max(ricci_lambda(th, *k, 0.0)));
    let base_min = coeffs.iter().fold(f64::INFINITY, |m, k| m.min(ricci_lambda(th, *k, 0.0)));
    if base_min >= 0.5 * th * th - tolerance::ANALYTIC {
        return Err(Error::Precondition(format!(
            "Ricci(X) = theta'^2/2 on the whole grid (min {base_min}); the structure is K-contact"
        )));
    }
    let max_at = |l: f64| coeffs.iter().fold(f64::NEG_INFINITY, |m, k| m.max(ricci_lambda(th, *k, l)));
    if base_max < c {
        return Ok(SweepResult {
            lambda: 0.0,
            max_ricci: base_max,
            target: c,
            bracket: 0.0,
            points: pts.len(),
        });
    }
    let mut best = (0.0, base_max);
    let mut half = 1.0;
    while half <= BRACKET_LIMIT {
        let mut found: Option<(f64, f64)> = None;
        for i in 0..SWEEP_SAMPLES {
            let l = -half + 2.0 * half * i as f64 / (SWEEP_SAMPLES - 1) as f64;
            let m = max_at(l);
            if m < best.1 {
                best = (l, m);
            }
            if m < c && found.is_none_or(|f| l.abs() < f.0.abs()) {
                found = Some((l, m));
            }
        }
        if let Some((lambda, max_ricci)) = found {
            return Ok(SweepResult {
                lambda,
                max_ricci,
                target: c,
                bracket: half,
                points: pts.len(),
            });
        }
        half *= 2.0;
    }
    let blocking: Vec<Point> = pts
        .iter()
        .zip(&coeffs)
        .filter(|(_, k)| ricci_lambda(th, **k, best.0) >= c)
        .map(|(p, _)| *p)
        .collect();
    Err(Error::NoLambda {
        limit: BRACKET_LIMIT,
        blocking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{model_manifold, ModelParams};
    use crate::curvature::ricci_reeb_oracle;
    use crate::realization::{perturb_unchecked, PerturbationField};

    fn model(name: &str) -> ContactData {
        model_manifold(name, &ModelParams { grid: Some([6; 3]), ..Default::default() }).unwrap()
    }

    #[test]
    fn k_contact_is_a_precondition_failure() {
        assert!(matches!(sweep_lower_ricci(&model("heisenberg_r3"), 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn target_above_bound_is_invalid() {
        assert!(matches!(sweep_lower_ricci(&model("torus_xi_n"), 100.0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn flat_torus_cannot_be_lowered() {
        // A = B = 0 there, so Ricci_λ ≡ 0 for every λ.
        let r = sweep_lower_ricci(&model("torus_xi_n"), -1.0);
        assert!(matches!(r, Err(Error::NoLambda { ref blocking, .. }) if blocking.len() == 216));
    }

    #[test]
    fn lowered_metric_checks_against_oracle() {
        // On a 6-grid some samples sit where A = B = 0 and λ cannot act.
        let base = model_manifold("torus_xi_n", &ModelParams { grid: Some([8; 3]), ..Default::default() }).unwrap();
        let cd = perturb_unchecked(&base, &PerturbationField::parse("0.3*sin(2*pi*y)", "1 + 0.2*cos(2*pi*x)").unwrap());
        let r = sweep_lower_ricci(&cd, -5.0).unwrap();
        assert!(r.max_ricci < -5.0 && r.lambda != 0.0);
        let lowered = perturb_unchecked(&cd, &PerturbationField::constant(r.lambda, 1.0));
        for p in cd.domain.coarse_points(2) {
            let o = ricci_reeb_oracle(&lowered, &p).unwrap();
            assert!(o < -5.0 + 1e-6, "{o} at {p:?}");
        }
    }
}
