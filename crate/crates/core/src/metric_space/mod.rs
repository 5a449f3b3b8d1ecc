//! The L² metric `(h,k) = ∫ tr(g⁻¹hg⁻¹k) dVol(g)` on the space of metrics of a chart.
//!
//! Every integral is a weighted sum over a [`SampleSet`], so the same code serves
//! midpoint grids of a [`ChartDomain`] and the thin band lattices of the almost-global
//! construction. Distances are upper bounds `d̄ ≥ d` obtained from straight-line paths.

mod convergence;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::linalg::{det, inverse, mat_mul, min_eigenvalue, symmetrize};
use crate::chart::{midpoint_sum, ChartDomain, Expr, Jet, JetMat};
use crate::contact::{ContactData, MetricField};
use crate::{Error, Point, Result};

pub use convergence::{
    convergence_report, deflated_set, geometric_fit, log_fit, ConvergenceReport, LogFit,
    SampledSequence, SemiMetricField, DEFLATION_THRESHOLD,
};

pub type Sym3 = [[f64; 3]; 3];

/// Componentwise relative tolerance deciding whether two metrics differ at a point.
pub const EQUALITY_TOL: f64 = 1e-10;

/// Quadrature nodes with coordinate-volume weights.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSet {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Coordinate volume of one layer of cells, the resolution of set comparisons.
    pub layer_volume: f64,
}

impl SampleSet {
    /// Midpoints of `dom` minus its margin bands, each weighted by the cell volume.
    pub fn from_domain(dom: &ChartDomain) -> Self {
        let points = dom.sample_points();
        let w = dom.cell_volume();
        let max_cells = *dom.grid.iter().max().unwrap() as f64;
        SampleSet {
            weights: vec![w; points.len()],
            points,
            layer_volume: dom.interior_volume() / max_cells,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Deterministic parallel weighted sum: per-sample terms in parallel, summed in order.
fn weighted_sum<F>(set: &SampleSet, f: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let terms: Vec<f64> = (0..set.len()).into_par_iter().map(&f).collect::<Result<_>>()?;
    let mut s = 0.0;
    for (i, t) in terms.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::NonFinite {
                what: "integrand",
                point: set.points[i],
            });
        }
        s += set.weights[i] * t;
    }
    Ok(s)
}

/// Metric values at every sample.
pub fn sample_metric(g: &dyn MetricField, set: &SampleSet) -> Result<Vec<Sym3>> {
    set.points.par_iter().map(|p| g.metric_value(p)).collect()
}

fn spd_check(g: &Sym3, p: &Point) -> Result<()> {
    let m = min_eigenvalue(g);
    if !(m > 0.0) {
        return Err(Error::NotSpd {
            point: *p,
            min_eig: m,
        });
    }
    Ok(())
}

/// `tr(g⁻¹hg⁻¹k)`.
pub fn trace_pairing(g: &Sym3, h: &Sym3, k: &Sym3) -> f64 {
    let gi = inverse(g);
    let a = mat_mul(&gi, h);
    let b = mat_mul(&gi, k);
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[j][i];
        }
    }
    s
}

pub fn l2_inner_sampled(set: &SampleSet, g: &[Sym3], h: &[Sym3], k: &[Sym3]) -> Result<f64> {
    weighted_sum(set, |i| {
        spd_check(&g[i], &set.points[i])?;
        Ok(trace_pairing(&g[i], &h[i], &k[i]) * det(&g[i]).sqrt())
    })
}

/// `(h,k)_g` on the grid of `dom`.
pub fn l2_inner(g: &dyn MetricField, h: &dyn MetricField, k: &dyn MetricField, dom: &ChartDomain) -> Result<f64> {
    let set = SampleSet::from_domain(dom);
    l2_inner_sampled(&set, &sample_metric(g, &set)?, &sample_metric(h, &set)?, &sample_metric(k, &set)?)
}

pub fn volume_sampled(set: &SampleSet, g: &[Sym3]) -> Result<f64> {
    weighted_sum(set, |i| {
        spd_check(&g[i], &set.points[i])?;
        Ok(det(&g[i]).sqrt())
    })
}

/// `∫ √det g` over the grid of `dom`.
pub fn volume(g: &dyn MetricField, dom: &ChartDomain) -> Result<f64> {
    let set = SampleSet::from_domain(dom);
    volume_sampled(&set, &sample_metric(g, &set)?)
}

/// `∫ (1/θ')α∧dα` over the grid of `dom`.
pub fn contact_volume(cd: &ContactData, dom: &ChartDomain) -> Result<f64> {
    midpoint_sum(dom, |p| Ok(cd.volume_densities(p)?.1))
}

/// Length in the L² metric of `t ↦ (1−t)g0 + t g1`, by composite Simpson with `steps`
/// intervals (rounded up to even); an upper bound for `d(g0, g1)`.
pub fn path_length_upper_sampled(set: &SampleSet, g0: &[Sym3], g1: &[Sym3], steps: usize) -> Result<f64> {
    let steps = steps.max(2).div_ceil(2) * 2;
    let diff: Vec<Sym3> = g0
        .iter()
        .zip(g1)
        .map(|(a, b)| std::array::from_fn(|i| std::array::from_fn(|j| b[i][j] - a[i][j])))
        .collect();
    let mut total = 0.0;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let w = if s == 0 || s == steps {
            1.0
        } else if s % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let speed2 = weighted_sum(set, |i| {
            let gt: Sym3 =
                std::array::from_fn(|a| std::array::from_fn(|b| (1.0 - t) * g0[i][a][b] + t * g1[i][a][b]));
            spd_check(&gt, &set.points[i])?;
            Ok(trace_pairing(&gt, &diff[i], &diff[i]) * det(&gt).sqrt())
        })?;
        total += w * speed2.max(0.0).sqrt();
    }
    Ok(total / (3.0 * steps as f64))
}

pub fn path_length_upper(g0: &dyn MetricField, g1: &dyn MetricField, dom: &ChartDomain, steps: usize) -> Result<f64> {
    let set = SampleSet::from_domain(dom);
    path_length_upper_sampled(&set, &sample_metric(g0, &set)?, &sample_metric(g1, &set)?, steps)
}

/// `(4/3)√(3V)|c^{3/2} − 1|`: the straight-path length from `g` to `c²g` when
/// `Vol(g) = V`.
pub fn conformal_path_length(volume: f64, c: f64) -> f64 {
    4.0 / 3.0 * (3.0 * volume).sqrt() * (c.abs().powf(1.5) - 1.0).abs()
}

/// Samples where the metrics differ beyond [`EQUALITY_TOL`] relative to the larger
/// component magnitude.
pub fn difference_set(g0: &[Sym3], g1: &[Sym3]) -> Vec<bool> {
    g0.iter()
        .zip(g1)
        .map(|(a, b)| {
            let scale = a.iter().chain(b.iter()).flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .any(|(x, y)| (x - y).abs() > EQUALITY_TOL * scale)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClarkeBound {
    /// `√Vol(D,g0) + √Vol(D,g1)` over the difference set `D`.
    pub bound: f64,
    pub volume_g0: f64,
    pub volume_g1: f64,
    pub samples_in_set: usize,
}

pub fn clarke_bound_sampled(set: &SampleSet, g0: &[Sym3], g1: &[Sym3]) -> Result<ClarkeBound> {
    let d = difference_set(g0, g1);
    let vol = |g: &[Sym3]| {
        weighted_sum(set, |i| {
            if !d[i] {
                return Ok(0.0);
            }
            spd_check(&g[i], &set.points[i])?;
            Ok(det(&g[i]).sqrt())
        })
    };
    let (v0, v1) = (vol(g0)?, vol(g1)?);
    Ok(ClarkeBound {
        bound: v0.sqrt() + v1.sqrt(),
        volume_g0: v0,
        volume_g1: v1,
        samples_in_set: d.iter().filter(|b| **b).count(),
    })
}

pub fn clarke_bound(g0: &dyn MetricField, g1: &dyn MetricField, dom: &ChartDomain) -> Result<ClarkeBound> {
    let set = SampleSet::from_domain(dom);
    clarke_bound_sampled(&set, &sample_metric(g0, &set)?, &sample_metric(g1, &set)?)
}

/// One calibration pair: straight-path length against the volume bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationPoint {
    pub band_volume: f64,
    pub amplitude: f64,
    pub path_length: f64,
    pub bound: f64,
}

/// Flat metric on the unit periodic cube against `diag(eᵃ, e⁻ᵃ, 1)` on a band
/// `{z < v}`, for each band volume and amplitude.
pub fn calibration_suite(volumes: &[f64], amplitudes: &[f64], grid: usize, steps: usize) -> Result<Vec<CalibrationPoint>> {
    let dom = ChartDomain::unit_periodic(grid)?;
    let set = SampleSet::from_domain(&dom);
    let flat: Vec<Sym3> = vec![identity(); set.len()];
    let mut out = Vec::new();
    for &v in volumes {
        for &a in amplitudes {
            let bumped: Vec<Sym3> = set
                .points
                .iter()
                .map(|p| {
                    if p[2] < v {
                        [[a.exp(), 0.0, 0.0], [0.0, (-a).exp(), 0.0], [0.0, 0.0, 1.0]]
                    } else {
                        identity()
                    }
                })
                .collect();
            out.push(CalibrationPoint {
                band_volume: v,
                amplitude: a,
                path_length: path_length_upper_sampled(&set, &flat, &bumped, steps)?,
                bound: clarke_bound_sampled(&set, &flat, &bumped)?.bound,
            });
        }
    }
    Ok(out)
}

/// `Ĉ = max path_length / bound` over the suite; an empirical stand-in for the
/// dimensional constant of the volume bound.
pub fn fit_clarke_constant(suite: &[CalibrationPoint]) -> f64 {
    suite
        .iter()
        .filter(|c| c.bound > 0.0)
        .fold(0.0f64, |m, c| m.max(c.path_length / c.bound))
}

pub fn identity() -> Sym3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Symmetric tensor field from expressions for `g11, g12, g13, g22, g23, g33`.
#[derive(Clone)]
pub struct ExprMetric(pub Arc<[Expr; 6]>);

impl ExprMetric {
    pub fn parse(src: &[String; 6]) -> Result<Self> {
        let e: Vec<Expr> = src.iter().map(|s| Expr::parse(s)).collect::<std::result::Result<_, _>>()?;
        Ok(ExprMetric(Arc::new(e.try_into().unwrap())))
    }
}

impl MetricField for ExprMetric {
    fn metric(&self, p: &Point, order: usize) -> Result<JetMat> {
        let seed = Jet::seed(*p, order);
        let c: Vec<Jet> = self.0.iter().map(|e| e.eval(&seed)).collect();
        Ok(symmetrize(&[[c[0], c[1], c[2]], [c[1], c[3], c[4]], [c[2], c[4], c[5]]]))
    }

    fn backend(&self) -> crate::chart::Backend {
        crate::chart::Backend::AnalyticJet
    }
}

/// `c · g`.
pub struct Scaled<'a>(pub f64, pub &'a dyn MetricField);

impl MetricField for Scaled<'_> {
    fn metric(&self, p: &Point, order: usize) -> Result<JetMat> {
        let m = self.1.metric(p, order)?;
        Ok(m.map(|r| r.map(|v| v * self.0)))
    }

    fn backend(&self) -> crate::chart::Backend {
        self.1.backend()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Components, OneForm};
    use crate::contact::{model_manifold, FramePair, ModelParams};

    fn model(name: &str, n: usize) -> ContactData {
        model_manifold(name, &ModelParams { grid: Some([n; 3]), ..Default::default() }).unwrap()
    }

    #[test]
    fn self_pairing_is_three_volumes() {
        let cd = model("heisenberg_r3", 8);
        let v = volume(&cd, &cd.domain).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert!((l2_inner(&cd, &cd, &cd, &cd.domain).unwrap() - 1.5).abs() < 1e-12);
        let twice = Scaled(2.0, &cd);
        assert!((l2_inner(&cd, &twice, &twice, &cd.domain).unwrap() - 6.0).abs() < 1e-12);
        let t = model("torus_xi_n", 8);
        assert!((l2_inner(&t, &t, &t, &t.domain).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn volume_scales_with_the_square_of_alpha() {
        let c = 3.0;
        let alpha = OneForm::parse([&format!("-{c}*y"), "0", &format!("{c}")]).unwrap();
        let pair = FramePair {
            e: Arc::new(Components::parse(["1", "0", "y"]).unwrap()),
            je: Arc::new(Components::parse(["0", "1", "0"]).unwrap()),
        };
        let dom = ChartDomain::new([[0.0, 1.0]; 3], [false; 3], [6; 3], 0.0).unwrap();
        let cd = ContactData::new("scaled", alpha, 2.0, Arc::new(pair), dom.clone()).unwrap();
        assert!((contact_volume(&cd, &dom).unwrap() - 0.5 * c * c).abs() < 1e-12);
        assert!((volume(&cd, &dom).unwrap() - 0.5 * c * c).abs() < 1e-9);
    }

    #[test]
    fn straight_paths() {
        let t = model("torus_xi_n", 6);
        assert_eq!(path_length_upper(&t, &t, &t.domain, 8).unwrap(), 0.0);
        let mut last = 0.0;
        for c in [1.1, 1.3, 1.7] {
            let g1 = Scaled(c * c, &t);
            let d = path_length_upper(&t, &g1, &t.domain, 64).unwrap();
            assert!((d - conformal_path_length(1.0, c)).abs() < 1e-6, "{d}");
            let back = path_length_upper(&g1, &t, &t.domain, 64).unwrap();
            assert!((d - back).abs() < 1e-6 && d > last);
            last = d;
        }
    }

    #[test]
    fn band_bound_and_triangle_inequality() {
        let dom = ChartDomain::unit_periodic(20).unwrap();
        let set = SampleSet::from_domain(&dom);
        let flat = vec![identity(); set.len()];
        let band = |a: f64| -> Vec<Sym3> {
            set.points
                .iter()
                .map(|p| if p[2] < 0.05 { [[a.exp(), 0.0, 0.0], [0.0, (-a).exp(), 0.0], [0.0, 0.0, 1.0]] } else { identity() })
                .collect()
        };
        let b = clarke_bound_sampled(&set, &flat, &band(0.5)).unwrap();
        assert!((b.bound - 2.0 * 0.05f64.sqrt()).abs() < 1e-12);
        assert_eq!(clarke_bound_sampled(&set, &flat, &flat).unwrap().bound, 0.0);
        let (g1, g2) = (band(0.5), band(1.0));
        let d = |a: &[Sym3], b: &[Sym3]| path_length_upper_sampled(&set, a, b, 32).unwrap();
        // Straight paths are not geodesics: the broken path through a third metric
        // off the segment can be shorter, so only collinear triples are additive.
        assert!(d(&flat, &g2) > d(&flat, &g1) + d(&g1, &g2));
        let mid: Vec<Sym3> = flat
            .iter()
            .zip(&g2)
            .map(|(a, b)| std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (a[i][j] + b[i][j]))))
            .collect();
        assert!((d(&flat, &g2) - d(&flat, &mid) - d(&mid, &g2)).abs() < 1e-6);
        let suite = calibration_suite(&[0.1, 0.05], &[0.5, 1.0], 20, 16).unwrap();
        let c = fit_clarke_constant(&suite);
        assert!(suite.iter().all(|p| p.path_length <= c * p.bound + 1e-12) && c > 0.0);
    }

    #[test]
    fn degenerate_metric_is_an_error() {
        let dom = ChartDomain::unit_periodic(4).unwrap();
        let set = SampleSet::from_domain(&dom);
        let bad = vec![[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]; set.len()];
        assert!(matches!(volume_sampled(&set, &bad), Err(Error::NotSpd { .. })));
    }
}
