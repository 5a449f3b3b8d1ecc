//! Realization on a mapping torus, closed up across the initial page.
//!
//! The local solution runs once around the circle from `Σ₀`. On the band
//! `{T − δ ≤ t ≤ T}` before returning to `Σ₀` the deformation is blended back to the
//! identity by `(λ̃, η̃²) = ((1−h)λ, (1−h)η² + h)`, `h` the quintic smoothstep; the
//! first column `J̃e = (1−h)J_*e + hJe` is the convex combination of the two
//! structures and `η̃`, `λ̃` complete it to a complex structure. Shrinking the band
//! volume along `ε_n = ε/2ⁿ` gives the metric sequence.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::local::{local_realize, FlowBox, RealizationSolution, RealizationSummary, TimeSamples};
use super::perturb::{perturb_unchecked, perturbed_metric_value, PerturbationField};
use crate::chart::{Jet, ScalarField, SharedScalar};
use crate::contact::{ContactData, MetricField};
use crate::curvature::ricci_reeb_oracle;
use crate::metric_space::{
    calibration_suite, clarke_bound_sampled, contact_volume, convergence_report, fit_clarke_constant,
    log_fit, path_length_upper_sampled, volume_sampled, ConvergenceReport, LogFit, SampleSet,
    SampledSequence, SemiMetricField, Sym3,
};
use crate::{tolerance, Error, Point, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalOptions {
    pub epsilon: f64,
    pub n_max: usize,
    pub step: f64,
    /// `τ` samples across each band for the distance integrals.
    pub band_samples: usize,
    /// Simpson intervals along straight paths.
    pub path_steps: usize,
    /// Band volume as a fraction of `ε_n/2`.
    pub band_fraction: f64,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        GlobalOptions {
            epsilon: 0.1,
            n_max: 6,
            step: super::local::DEFAULT_STEP,
            band_samples: 32,
            path_steps: 16,
            band_fraction: 0.9,
        }
    }
}

/// `6s⁵ − 15s⁴ + 10s³` on `[0, 1]`, constant outside.
pub fn smoothstep(s: Jet) -> Jet {
    let v = s.value();
    if v <= 0.0 {
        Jet::zero(s.order())
    } else if v >= 1.0 {
        Jet::zero(s.order()) + 1.0
    } else {
        s * s * s * ((s * 6.0 - 15.0) * s + 10.0)
    }
}

fn smoothstep_value(s: f64) -> f64 {
    smoothstep(Jet::constant(s)).value()
}

/// Band width `δ` with `g`-volume `fraction · ε/2`, for a density constant along the
/// flow (the Reeb flow preserves `α∧dα`).
pub fn band_width(volume: f64, period: f64, epsilon: f64, fraction: f64) -> f64 {
    fraction * 0.5 * epsilon * period / volume
}

#[derive(Clone, Copy)]
enum Which {
    Lambda,
    Eta,
}

/// `λ̃` or `η̃` of the blended deformation.
struct Blended {
    sol: Arc<RealizationSolution>,
    start: f64,
    delta: f64,
    which: Which,
}

impl ScalarField for Blended {
    fn taylor(&self, at: &Point, order: usize) -> Result<Jet> {
        let s = self.sol.sample_at(at, order)?;
        let t = s.flow_time.truncate(order);
        let h = if self.delta > 0.0 {
            smoothstep((t - self.start) * (1.0 / self.delta))
        } else {
            Jet::zero(order)
        };
        let keep = (-h) + 1.0;
        let (lambda, eta) = (s.lambda.truncate(order), s.eta.truncate(order));
        Ok(match self.which {
            Which::Lambda => keep * lambda,
            Which::Eta => (keep * eta * eta + h).sqrt(),
        })
    }
}

fn blended(sol: &Arc<RealizationSolution>, delta: f64) -> PerturbationField {
    let start = sol.flow_box.duration - delta;
    let mk = |which| -> SharedScalar {
        Arc::new(Blended {
            sol: sol.clone(),
            start,
            delta,
            which,
        })
    };
    PerturbationField::new(mk(Which::Lambda), mk(Which::Eta))
}

/// One metric `g_{ε_n}` of the sequence.
#[derive(Debug, Clone, Serialize)]
pub struct SequenceEntry {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub band_volume: f64,
    /// `sup |Ricci(X) − f|` over lattice samples outside the band.
    pub residual_outside: f64,
    pub samples_outside: usize,
    pub samples_in_band: usize,
    /// `sup (Ricci(X) − θ'²/2)` over all lattice samples.
    pub bound_excess: f64,
    pub volume: f64,
    pub volume_drift: f64,
    /// `d̄(g_n, g_{n+1})` on the band lattice of `g_n`.
    pub pair_bound: Option<f64>,
    /// `√Vol(D,g_n) + √Vol(D,g_{n+1})`.
    pub clarke_bound: Option<f64>,
    /// `d̄(g_n, g_∞)`.
    pub distance_to_limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSequence {
    pub entries: Vec<SequenceEntry>,
    pub base_volume: f64,
    pub max_volume_drift: f64,
    /// `d̄(g_n, g_m)` for `n < m`, row `n`, column `m`.
    pub distance_matrix: Vec<Vec<Option<f64>>>,
    /// Fit of `ln d̄(g_n, g_{n+1})` against `ln √ε_n`.
    pub sqrt_eps_fit: Option<LogFit>,
    /// `max_n Σ_{k≤n} d̄_k / Σ_{k≤n} √ε_k`.
    pub partial_sum_ratio: f64,
    /// Empirical constant of the volume bound from the calibration suite.
    pub clarke_constant: f64,
    /// `max_n d̄_n / bound_n` along the sequence.
    pub clarke_ratio: f64,
    pub realization: RealizationSummary,
    pub convergence: ConvergenceReport,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub sequence: SampledSequence,
    #[serde(skip)]
    pub limit: SemiMetricField,
    #[serde(skip)]
    pub solution: Arc<RealizationSolution>,
}

fn check_mapping_torus(cd: &ContactData) -> Result<()> {
    let d = &cd.domain;
    if d.periodic != [false, false, true] {
        return Err(Error::Precondition(
            "the almost-global pipeline needs a chart periodic in the third axis only".into(),
        ));
    }
    for p in d.coarse_points(4) {
        let x = cd.reeb(&p)?;
        if (x[0].abs()).max(x[1].abs()).max((x[2] - 1.0).abs()) > 1e-12 {
            return Err(Error::Precondition(format!(
                "Reeb field {x:?} at {p:?} is not the fiber direction"
            )));
        }
    }
    Ok(())
}

/// Realize `f` on the mapping torus `cd` and build `g_{ε_n}` for `n ≤ n_max`.
pub fn almost_global_realize(cd: &ContactData, f: SharedScalar, opts: &GlobalOptions) -> Result<MetricSequence> {
    check_mapping_torus(cd)?;
    if !(opts.epsilon > 0.0) || opts.n_max == 0 || opts.band_samples == 0 {
        return Err(Error::InvalidParams(
            "epsilon must be positive and n_max, band_samples at least 1".into(),
        ));
    }
    let dom = &cd.domain;
    let inner = dom.interior_bounds();
    let period = dom.length(2);
    let fb = FlowBox {
        axis: 2,
        level: dom.bounds[2][0],
        seed_bounds: [inner[0], inner[1]],
        seed_grid: [dom.grid[0], dom.grid[1]],
        duration: period,
        samples: dom.grid[2],
        times: TimeSamples::Midpoints,
    };
    let sol = Arc::new(local_realize(cd, f.clone(), &fb, opts.step)?);
    let (realization, _) = sol.verify()?;
    let th = cd.theta_prime;

    let set = SampleSet::from_domain(dom);
    let base_volume = contact_volume(cd, dom)?;
    let times: Vec<f64> = set
        .points
        .iter()
        .map(|p| Ok(sol.sample_at(p, 0)?.time))
        .collect::<Result<_>>()?;
    let fvals: Vec<f64> = set.points.iter().map(|p| f.value(p)).collect::<Result<_>>()?;

    let ns: Vec<usize> = (0..=opts.n_max).collect();
    let eps: Vec<f64> = ns.iter().map(|&n| opts.epsilon / 2f64.powi(n as i32)).collect();
    let deltas: Vec<f64> = eps
        .iter()
        .map(|&e| band_width(base_volume, period, e, opts.band_fraction))
        .collect();
    if deltas[0] >= period {
        return Err(Error::InvalidParams(format!(
            "epsilon {} too large: the first band would cover the whole circle",
            opts.epsilon
        )));
    }

    // Lattice metrics and curvature of every g_n.
    let mut entries = Vec::with_capacity(ns.len());
    let mut lattice: Vec<Vec<Sym3>> = Vec::with_capacity(ns.len());
    for &n in &ns {
        let g = perturb_unchecked(cd, &blended(&sol, deltas[n]));
        let start = period - deltas[n];
        let per: Vec<(f64, Sym3)> = set
            .points
            .par_iter()
            .map(|p| Ok((ricci_reeb_oracle(&g, p)?, g.metric_value(p)?)))
            .collect::<Result<_>>()?;
        let mut residual_outside = 0.0f64;
        let mut bound_excess = f64::NEG_INFINITY;
        let mut outside = 0;
        for (i, (r, _)) in per.iter().enumerate() {
            bound_excess = bound_excess.max(r - 0.5 * th * th);
            if times[i] < start {
                outside += 1;
                residual_outside = residual_outside.max((r - fvals[i]).abs());
            }
        }
        let values: Vec<Sym3> = per.into_iter().map(|x| x.1).collect();
        let volume = volume_sampled(&set, &values)?;
        entries.push(SequenceEntry {
            n,
            epsilon: eps[n],
            delta: deltas[n],
            band_volume: base_volume * deltas[n] / period,
            residual_outside,
            samples_outside: outside,
            samples_in_band: set.len() - outside,
            bound_excess,
            volume,
            volume_drift: (volume - base_volume).abs(),
            pair_bound: None,
            clarke_bound: None,
            distance_to_limit: 0.0,
        });
        lattice.push(values);
    }
    let limit_values: Vec<Sym3> = {
        let g = perturb_unchecked(cd, &sol.perturbation());
        set.points.par_iter().map(|p| g.metric_value(p)).collect::<Result<_>>()?
    };

    // Band lattices: values along each flowline at every band time.
    let b = opts.band_samples;
    let mut band_times: Vec<(f64, usize, usize)> = Vec::new();
    for (n, d) in deltas.iter().enumerate() {
        for k in 0..b {
            band_times.push((period - d + (k as f64 + 0.5) * d / b as f64, n, k));
        }
    }
    band_times.sort_by(|x, y| x.0.total_cmp(&y.0));
    let tlist: Vec<f64> = band_times.iter().map(|x| x.0).collect();
    let seeds = fb.seeds();
    let along: Vec<Vec<(Point, f64, f64)>> = seeds
        .par_iter()
        .map(|s| sol.values_along(s, &tlist))
        .collect::<Result<_>>()?;
    let cell_area = (inner[0][1] - inner[0][0]) * (inner[1][1] - inner[1][0]) / seeds.len() as f64;
    let mut distance_matrix = vec![vec![None; ns.len()]; ns.len()];
    for &n in &ns {
        let mut pts = Vec::with_capacity(seeds.len() * b);
        let mut raw = Vec::with_capacity(seeds.len() * b);
        for row in &along {
            for (j, bt) in band_times.iter().enumerate() {
                if bt.1 == n {
                    pts.push(row[j].0);
                    raw.push((bt.0, row[j].1, row[j].2));
                }
            }
        }
        let w = cell_area * deltas[n] / b as f64;
        let band = SampleSet {
            weights: vec![w; pts.len()],
            layer_volume: cell_area * seeds.len() as f64 * deltas[n] / b as f64,
            points: pts,
        };
        let locals = band
            .points
            .par_iter()
            .map(|p| cd.local(p, 0))
            .collect::<Result<Vec<_>>>()?;
        let metric_for = |delta: Option<f64>| -> Vec<Sym3> {
            locals
                .iter()
                .zip(&raw)
                .map(|(l, &(t, eta, lambda))| {
                    let h = delta.map_or(0.0, |d| smoothstep_value((t - (period - d)) / d));
                    perturbed_metric_value(l, (1.0 - h) * lambda, ((1.0 - h) * eta * eta + h).sqrt())
                })
                .collect()
        };
        let gn = metric_for(Some(deltas[n]));
        for &m in ns.iter().filter(|&&m| m > n) {
            let gm = metric_for(Some(deltas[m]));
            let d = path_length_upper_sampled(&band, &gn, &gm, opts.path_steps)?;
            distance_matrix[n][m] = Some(d);
            if m == n + 1 {
                entries[n].pair_bound = Some(d);
                entries[n].clarke_bound = Some(clarke_bound_sampled(&band, &gn, &gm)?.bound);
            }
        }
        entries[n].distance_to_limit = path_length_upper_sampled(&band, &gn, &metric_for(None), opts.path_steps)?;
    }

    let pair_bounds: Vec<f64> = entries.iter().filter_map(|e| e.pair_bound).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = pair_bounds
        .iter()
        .zip(&eps)
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, e)| (e.sqrt().ln(), d.ln()))
        .unzip();
    let sqrt_eps_fit = if lx.len() >= 3 { log_fit(&lx, &ly) } else { None };
    let mut partial_sum_ratio = 0.0f64;
    let (mut sd, mut se) = (0.0, 0.0);
    for (d, e) in pair_bounds.iter().zip(&eps) {
        sd += d;
        se += e.sqrt();
        partial_sum_ratio = partial_sum_ratio.max(sd / se);
    }
    let suite = calibration_suite(&[0.2, 0.1, 0.05, 0.025], &[0.5, 1.0, 2.0], 40, opts.path_steps)?;
    let clarke_constant = fit_clarke_constant(&suite);
    let clarke_ratio = entries
        .iter()
        .filter_map(|e| match (e.pair_bound, e.clarke_bound) {
            (Some(d), Some(c)) if c > 0.0 => Some(d / c),
            _ => None,
        })
        .fold(0.0f64, f64::max);

    let level = fb.level;
    let limit = SemiMetricField {
        deflated: times.iter().map(|t| *t == 0.0).collect(),
        values: limit_values,
        singular_set: format!(
            "initial page {{tau = {level}}}: g_inf jumps across it; null set, no lattice sample lies on it"
        ),
    };
    let sequence = SampledSequence {
        set,
        metrics: lattice,
        pair_bounds,
    };
    let convergence = convergence_report(&sequence, &limit);
    let max_volume_drift = entries.iter().fold(0.0f64, |m, e| m.max(e.volume_drift));
    let notes = vec![
        "distances are upper bounds from straight paths (d_bar >= d)".to_string(),
        "no binding is modeled: the chart margin stands in for the excluded binding neighbourhood".to_string(),
        format!(
            "residuals use the oracle at {} lattice samples per metric; tolerance rung {}",
            sequence.set.len(),
            tolerance::rung(tolerance::NUMERIC)
        ),
    ];
    Ok(MetricSequence {
        entries,
        base_volume,
        max_volume_drift,
        distance_matrix,
        sqrt_eps_fit,
        partial_sum_ratio,
        clarke_constant,
        clarke_ratio,
        realization,
        convergence,
        notes,
        sequence,
        limit,
        solution: sol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{model_manifold, ModelParams};
    use crate::realization::prescribed;

    fn torus(grid: [usize; 3]) -> ContactData {
        model_manifold("mapping_torus_box", &ModelParams { grid: Some(grid), ..Default::default() }).unwrap()
    }

    fn quick() -> GlobalOptions {
        GlobalOptions {
            n_max: 3,
            step: 0.01,
            band_samples: 8,
            path_steps: 8,
            ..Default::default()
        }
    }

    #[test]
    fn smoothstep_is_flat_at_both_ends() {
        for (s, v) in [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)] {
            let j = smoothstep(Jet::variable(0, s, 2));
            assert!((j.value() - v).abs() < 1e-15);
            if s != 0.5 {
                assert!(j.gradient()[0].abs() < 1e-12);
            }
        }
        assert!((smoothstep(Jet::variable(0, 0.5, 2)).gradient()[0] - 1.875).abs() < 1e-12);
    }

    #[test]
    fn band_width_inverts_band_volume() {
        let d = band_width(0.5, 1.0, 0.1, 0.9);
        assert!((0.5 * d - 0.9 * 0.05).abs() < 1e-15);
    }

    #[test]
    fn needs_a_mapping_torus() {
        let cd = model_manifold("heisenberg_r3", &ModelParams { grid: Some([4; 3]), ..Default::default() }).unwrap();
        let r = almost_global_realize(&cd, prescribed("0").unwrap(), &quick());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_curvature_sequence() {
        let cd = torus([4, 4, 24]);
        let seq = almost_global_realize(&cd, prescribed("0").unwrap(), &quick()).unwrap();
        assert_eq!(seq.entries.len(), 4);
        for e in &seq.entries {
            assert!(e.residual_outside < 1e-6, "{}", e.residual_outside);
            assert!(e.volume_drift < 1e-9 && e.bound_excess <= 1e-6);
        }
        let d: Vec<f64> = seq.entries.iter().filter_map(|e| e.pair_bound).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        assert!(seq.convergence.verdict);
    }

    #[test]
    fn maximal_curvature_gives_identity_sequence() {
        let cd = torus([4, 4, 24]);
        let seq = almost_global_realize(&cd, prescribed("2").unwrap(), &quick()).unwrap();
        assert!(seq.realization.clamp_events > 0);
        for e in &seq.entries {
            assert!(e.pair_bound.is_none_or(|d| d == 0.0));
            assert_eq!(e.distance_to_limit, 0.0);
        }
        assert!(seq.convergence.summable && seq.convergence.verdict);
    }

    #[test]
    fn oversized_band_is_rejected() {
        let cd = torus([4, 4, 24]);
        let opts = GlobalOptions { epsilon: 5.0, ..quick() };
        assert!(matches!(
            almost_global_realize(&cd, prescribed("0").unwrap(), &opts),
            Err(Error::InvalidParams(_))
        ));
    }
}
