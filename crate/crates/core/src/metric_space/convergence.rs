//! Three-condition convergence certificate for metric sequences.

use serde::Serialize;

use super::{path_length_upper_sampled, SampleSet, Sym3, EQUALITY_TOL};
use crate::chart::linalg::det;
use crate::Result;

/// `det(g_ref⁻¹ g_k) < DEFLATION_THRESHOLD` marks a sample as deflated.
pub const DEFLATION_THRESHOLD: f64 = 1e-8;
const R2_MIN: f64 = 0.99;

/// A semi-metric sampled on a set, with its deflated samples marked.
#[derive(Debug, Clone, Serialize)]
pub struct SemiMetricField {
    pub values: Vec<Sym3>,
    pub deflated: Vec<bool>,
    /// Description of the degenerate locus, for reports.
    pub singular_set: String,
}

impl SemiMetricField {
    /// Deflated wherever `det(g) < DEFLATION_THRESHOLD · det(reference)`.
    pub fn from_values(values: Vec<Sym3>, reference: &[Sym3], singular_set: impl Into<String>) -> Self {
        let deflated = values
            .iter()
            .zip(reference)
            .map(|(g, r)| det(g) < DEFLATION_THRESHOLD * det(r))
            .collect();
        SemiMetricField {
            values,
            deflated,
            singular_set: singular_set.into(),
        }
    }
}

/// Metrics `g_0, …, g_N` sampled on one set, with upper bounds on consecutive distances.
#[derive(Debug, Clone, Serialize)]
pub struct SampledSequence {
    #[serde(skip)]
    pub set: SampleSet,
    #[serde(skip)]
    pub metrics: Vec<Vec<Sym3>>,
    /// `d̄(g_k, g_{k+1})`.
    pub pair_bounds: Vec<f64>,
}

impl SampledSequence {
    /// Consecutive bounds by straight paths on the common set.
    pub fn from_metrics(set: SampleSet, metrics: Vec<Vec<Sym3>>, steps: usize) -> Result<Self> {
        let pair_bounds = metrics
            .windows(2)
            .map(|w| path_length_upper_sampled(&set, &w[0], &w[1], steps))
            .collect::<Result<_>>()?;
        Ok(SampledSequence {
            set,
            metrics,
            pair_bounds,
        })
    }
}

/// `D = {x : det(g_0(x)⁻¹ g_k(x)) < δ for some k}`.
pub fn deflated_set(metrics: &[Vec<Sym3>]) -> Vec<bool> {
    let Some(reference) = metrics.first() else {
        return Vec::new();
    };
    (0..reference.len())
        .map(|i| {
            let r = det(&reference[i]);
            metrics.iter().any(|g| det(&g[i]) < DEFLATION_THRESHOLD * r)
        })
        .collect()
}

/// Least-squares line `y = intercept + slope·x` with its coefficient of determination.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn log_fit(x: &[f64], y: &[f64]) -> Option<LogFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 0.0 };
    Some(LogFit {
        slope,
        intercept,
        r2,
        points: n,
    })
}

/// Fit `log d_k = a + k log r`; `None` when fewer than three bounds are positive.
pub fn geometric_fit(bounds: &[f64]) -> Option<LogFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = bounds
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(k, d)| (k as f64, d.ln()))
        .unzip();
    if x.len() < 3 {
        return None;
    }
    log_fit(&x, &y)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    /// `d̄(g_k, g_{k+1}) ≥ d(g_k, g_{k+1})`.
    pub pair_bounds: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub geometric: Option<LogFit>,
    /// Fitted ratio `d̄_{k+1}/d̄_k`.
    pub ratio: Option<f64>,
    /// Partial sum plus the fitted geometric tail.
    pub series_estimate: Option<f64>,
    pub summable: bool,
    pub deflated_volume: f64,
    pub limit_deflated_volume: f64,
    pub symmetric_difference_volume: f64,
    pub layer_volume: f64,
    pub deflated_sets_agree: bool,
    /// Volume of non-deflated samples where `g_k` still differs from `g_∞`, per `k`.
    pub unconverged_volume: Vec<f64>,
    /// `max |g_N − g_∞|` outside the deflated set at the final index.
    pub final_deviation: f64,
    pub pointwise: bool,
    pub verdict: bool,
    pub singular_set: String,
}

/// Check summability of the consecutive bounds, agreement of the deflated sets up to
/// one cell layer, and pointwise convergence away from them.
pub fn convergence_report(seq: &SampledSequence, g_inf: &SemiMetricField) -> ConvergenceReport {
    let set = &seq.set;
    let bounds = &seq.pair_bounds;
    let mut partial_sums = Vec::with_capacity(bounds.len());
    let mut acc = 0.0;
    for d in bounds {
        acc += d;
        partial_sums.push(acc);
    }
    let scale = seq
        .metrics
        .first()
        .map(|g| g.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs())))
        .unwrap_or(1.0);
    let all_zero = bounds.iter().all(|d| *d <= EQUALITY_TOL * scale);
    let geometric = if all_zero { None } else { geometric_fit(bounds) };
    let ratio = geometric.map(|f| f.slope.exp());
    let series_estimate = match (ratio, bounds.last()) {
        (Some(r), Some(last)) if r < 1.0 => Some(acc + last * r / (1.0 - r)),
        _ => None,
    };
    let summable = all_zero
        || matches!((geometric, ratio), (Some(f), Some(r)) if r < 1.0 && f.r2 >= R2_MIN);

    let d = deflated_set(&seq.metrics);
    let vol = |mask: &dyn Fn(usize) -> bool| -> f64 {
        (0..set.len()).filter(|&i| mask(i)).map(|i| set.weights[i]).sum::<f64>() + 0.0
    };
    let deflated_volume = vol(&|i| d[i]);
    let limit_deflated_volume = vol(&|i| g_inf.deflated[i]);
    let symmetric_difference_volume = vol(&|i| d[i] != g_inf.deflated[i]);
    let deflated_sets_agree = symmetric_difference_volume <= set.layer_volume * (1.0 + 1e-12);

    let differs = |g: &Sym3, h: &Sym3| -> f64 {
        let s = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        g.iter()
            .flatten()
            .zip(h.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / s))
    };
    let unconverged_volume: Vec<f64> = seq
        .metrics
        .iter()
        .map(|g| vol(&|i| !d[i] && !g_inf.deflated[i] && differs(&g[i], &g_inf.values[i]) > EQUALITY_TOL))
        .collect();
    let final_deviation = seq.metrics.last().map_or(0.0, |g| {
        (0..set.len())
            .filter(|&i| !d[i] && !g_inf.deflated[i])
            .fold(0.0f64, |m, i| m.max(differs(&g[i], &g_inf.values[i])))
    });
    let monotone = unconverged_volume.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
    let pointwise =
        monotone && unconverged_volume.last().is_none_or(|u| *u <= set.layer_volume * (1.0 + 1e-12));

    ConvergenceReport {
        pair_bounds: bounds.clone(),
        partial_sums,
        geometric,
        ratio,
        series_estimate,
        summable,
        deflated_volume,
        limit_deflated_volume,
        symmetric_difference_volume,
        layer_volume: set.layer_volume,
        deflated_sets_agree,
        unconverged_volume,
        final_deviation,
        pointwise,
        verdict: summable && deflated_sets_agree && pointwise,
        singular_set: g_inf.singular_set.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ChartDomain;
    use crate::metric_space::identity;

    fn set() -> SampleSet {
        SampleSet::from_domain(&ChartDomain::unit_periodic(6).unwrap())
    }

    fn scaled(n: usize, c: f64) -> Vec<Sym3> {
        vec![identity().map(|r| r.map(|v| v * c)); n]
    }

    #[test]
    fn constant_sequence_passes() {
        let s = set();
        let n = s.len();
        let seq = SampledSequence::from_metrics(s, vec![scaled(n, 1.0); 5], 8).unwrap();
        let lim = SemiMetricField::from_values(scaled(n, 1.0), &scaled(n, 1.0), "none");
        let r = convergence_report(&seq, &lim);
        assert!(r.verdict && r.summable && r.deflated_volume == 0.0);
    }

    #[test]
    fn alternating_sequence_fails_summability() {
        let s = set();
        let n = s.len();
        let metrics = (0..6).map(|k| scaled(n, if k % 2 == 0 { 1.0 } else { 2.0 })).collect();
        let seq = SampledSequence::from_metrics(s, metrics, 8).unwrap();
        let lim = SemiMetricField::from_values(scaled(n, 1.0), &scaled(n, 1.0), "none");
        let r = convergence_report(&seq, &lim);
        assert!(!r.summable && !r.verdict);
    }

    #[test]
    fn geometric_sequence_is_summable() {
        let s = set();
        let n = s.len();
        let metrics = (0..7).map(|k| scaled(n, 1.0 + 0.5f64.powi(k))).collect();
        let seq = SampledSequence::from_metrics(s, metrics, 8).unwrap();
        let lim = SemiMetricField::from_values(scaled(n, 1.0), &scaled(n, 1.0), "none");
        let r = convergence_report(&seq, &lim);
        assert!(r.summable);
        assert!((r.ratio.unwrap() - 0.5).abs() < 0.05);
        // Every sample still differs from the limit at the last index.
        assert!(!r.pointwise);
    }

    #[test]
    fn collapse_is_detected() {
        let s = set();
        let n = s.len();
        let metrics = vec![scaled(n, 1.0), scaled(n, 1e-4)];
        assert!(deflated_set(&metrics).iter().all(|d| *d));
        let f = log_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.r2 - 1.0).abs() < 1e-14);
    }
}
