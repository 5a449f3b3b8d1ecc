//! Grid-wide run of every curvature identity, with worst residuals per identity.

use rayon::prelude::*;
use serde::Serialize;

use super::closed::{backend_tolerance, equivalence_from, CurvatureReport, EquivalenceReport, PointCurvature};
use super::jacobi::{alpha_jacobi_propagate, sectional_via_jacobi};
use crate::chart::linalg::values_vec;
use crate::chart::Backend;
use crate::contact::ContactData;
use crate::{tolerance, Error, Point, Result};

/// Largest fraction of interior points allowed to have a degenerate frame.
pub const MAX_SKIPPED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteOptions {
    /// Starting points per axis for the α-Jacobi checks (at least 4).
    pub jacobi_points: usize,
    pub jacobi_time: f64,
    pub jacobi_step: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            jacobi_points: 4,
            jacobi_time: 1.0,
            jacobi_step: 1e-3,
        }
    }
}

/// Worst residual of one identity over the grid.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub rung: &'static str,
    pub samples: usize,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(name: &'static str, worst: f64, tolerance: f64, samples: usize) -> Self {
        IdentityCheck {
            name,
            worst,
            tolerance,
            rung: tolerance::rung(tolerance),
            samples,
            passed: worst <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationSuite {
    pub model: String,
    pub backend: &'static str,
    pub theta_prime: f64,
    pub points: usize,
    pub skipped: usize,
    pub identities: Vec<IdentityCheck>,
    pub max_lie_j_norm: f64,
    pub ricci_range: [f64; 2],
    /// Jacobi starting points abandoned because the flowline left the chart.
    pub jacobi_exits: usize,
    /// Shortest propagation time used; starts near the boundary are flowed for less.
    pub jacobi_min_time: f64,
    pub passed: bool,
    #[serde(skip)]
    pub reports: Vec<CurvatureReport>,
    #[serde(skip)]
    pub equivalence: Vec<EquivalenceReport>,
}

fn fold_max(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0f64, f64::max)
}

/// Closed forms against the oracle, the upper bound, `H = 0`, `Ricci = 2G`, the
/// equivalence of the four maximality conditions and the α-Jacobi checks.
pub fn verification_suite(cd: &ContactData, opts: &SuiteOptions) -> Result<VerificationSuite> {
    let pts = cd.domain.sample_points();
    let tol = backend_tolerance(cd.backend());
    let th = cd.theta_prime;
    let per: Vec<Option<(CurvatureReport, EquivalenceReport)>> = pts
        .par_iter()
        .map(|p| match PointCurvature::new(cd, p) {
            Ok(pc) => Ok(Some((pc.report(th)?, equivalence_from(&pc, th, tol)?))),
            Err(Error::FrameDegenerate { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let skipped = per.iter().filter(|r| r.is_none()).count();
    let (reports, equivalence): (Vec<_>, Vec<_>) = per.into_iter().flatten().unzip();
    let n = reports.len();
    let structural = match cd.backend() {
        Backend::AnalyticJet => tolerance::STRUCTURAL,
        Backend::FiniteDifference => tolerance::NUMERIC,
    };
    let mut identities = vec![
        IdentityCheck::new("ricci_closed_vs_oracle", fold_max(reports.iter().map(|r| r.residual)), tol, n),
        IdentityCheck::new(
            "ricci_upper_bound",
            reports.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.ricci_oracle - 0.5 * th * th)),
            tol,
            n,
        ),
        IdentityCheck::new("mean_curvature_zero", fold_max(reports.iter().map(|r| r.mean.abs())), structural, n),
        IdentityCheck::new(
            "ricci_equals_twice_extrinsic",
            fold_max(reports.iter().map(|r| (r.ricci_oracle - 2.0 * r.extrinsic).abs())),
            tol,
            n,
        ),
    ];
    let disagree = equivalence.iter().filter(|e| !e.agree).count();
    identities.push(IdentityCheck::new("equivalence_disagreement", disagree as f64 / n.max(1) as f64, 0.0, n));
    let non_max: Vec<&EquivalenceReport> = equivalence.iter().filter(|e| !e.ricci_max).collect();
    let wrong_zeros = non_max.iter().filter(|e| e.zero_directions != 4).count();
    identities.push(IdentityCheck::new("four_zero_directions", wrong_zeros as f64, 0.0, non_max.len()));

    let starts = cd.domain.coarse_points(opts.jacobi_points.max(1));
    let steps = ((opts.jacobi_time / opts.jacobi_step).round() as usize).max(1);
    let jac: Vec<Option<(f64, f64, f64)>> = starts
        .par_iter()
        .map(|p| {
            let pc = match PointCurvature::new(cd, p) {
                Ok(pc) => pc,
                Err(Error::FrameDegenerate { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let e = values_vec(&pc.frame.e);
            let x = values_vec(&pc.frame.x);
            let sect = match sectional_via_jacobi(cd, p, &e) {
                Ok(k) => k,
                Err(Error::FlowExit { .. } | Error::OutsideDomain { .. }) => return Ok(None),
                Err(err) => return Err(err),
            };
            let gap = (sect - pc.sectional(&e, &x)?).abs();
            // Shorten the propagation until the flowline stays in the chart.
            let (mut t, mut n) = (opts.jacobi_time, steps);
            for _ in 0..5 {
                match alpha_jacobi_propagate(cd, p, &e, t, n) {
                    Ok(path) => return Ok(Some((gap, path.area_drift(), t))),
                    Err(Error::FlowExit { .. } | Error::OutsideDomain { .. }) => {
                        t *= 0.5;
                        n = (n / 2).max(1);
                    }
                    Err(err) => return Err(err),
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;
    let jacobi_exits = jac.iter().filter(|j| j.is_none()).count();
    let jac: Vec<(f64, f64, f64)> = jac.into_iter().flatten().collect();
    let jacobi_min_time = jac.iter().fold(opts.jacobi_time, |m, j| m.min(j.2));
    identities.push(IdentityCheck::new(
        "jacobi_sectional_vs_oracle",
        fold_max(jac.iter().map(|j| j.0)),
        tolerance::NUMERIC,
        jac.len(),
    ));
    identities.push(IdentityCheck::new(
        "jacobi_area_drift",
        fold_max(jac.iter().map(|j| j.1)),
        tol,
        jac.len(),
    ));
    if jac.is_empty() {
        for c in identities.iter_mut().filter(|c| c.name.starts_with("jacobi")) {
            c.passed = false;
        }
    }

    let ricci_range = reports.iter().fold([f64::INFINITY, f64::NEG_INFINITY], |m, r| {
        [m[0].min(r.ricci_oracle), m[1].max(r.ricci_oracle)]
    });
    let skipped_ok = (skipped as f64) <= MAX_SKIPPED_FRACTION * pts.len() as f64;
    let passed = skipped_ok && identities.iter().all(|c| c.passed);
    Ok(VerificationSuite {
        model: cd.name.clone(),
        backend: match cd.backend() {
            Backend::AnalyticJet => "analytic_jet",
            Backend::FiniteDifference => "finite_difference",
        },
        theta_prime: th,
        points: pts.len(),
        skipped,
        identities,
        max_lie_j_norm: fold_max(equivalence.iter().map(|e| e.lie_j_norm)),
        ricci_range,
        jacobi_exits,
        jacobi_min_time,
        passed,
        reports,
        equivalence,
    })
}

/// Per-point columns of `curvature_grid.csv`.
pub const GRID_COLUMNS: [&str; 10] =
    ["P", "Q", "ricci_closed", "ricci_oracle", "k_e", "k_je", "G", "H", "resid", "equivalence_agree"];

pub fn grid_rows(suite: &VerificationSuite) -> impl Iterator<Item = (Point, Vec<f64>)> + '_ {
    suite.reports.iter().zip(&suite.equivalence).map(|(r, e)| {
        (
            r.point,
            vec![
                r.p,
                r.q,
                r.ricci_closed,
                r.ricci_oracle,
                r.k_e,
                r.k_je,
                r.extrinsic,
                r.mean,
                r.residual,
                if e.agree { 1.0 } else { 0.0 },
            ],
        )
    })
}
