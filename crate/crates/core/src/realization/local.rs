//! Prescribing `Ricci(X)` on a flow box by integrating two ODEs along Reeb flowlines.
//!
//! With `ℓ = ln η`, `μ = λ/η²`, `S = √(θ'²/4 − f/2)` and the bracket coefficients
//! `A, B, C` of the base structure, the deformation `(λ, η)` realizes `f` when
//!
//! ```text
//! Xℓ = −(A + μB)
//! Xμ = 2 (S e^{−2ℓ} − (B/2) e^{−4ℓ} + C/2 + μA + μ²B/2)
//! ```
//!
//! with `ℓ = μ = 0` on the transverse surface `Σ₀`. Each flowline is integrated by
//! fixed-step RK4 on jets in `(s₁, s₂, σ)`: `s` moves the seed inside `Σ₀` and the
//! step length is `h₀(1 + σ)`, so after `m` steps `σ = τ/t` measures flow time. The
//! chart jets of the discrete solution at every sample follow by inverting the
//! flow-box map on jets.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::perturb::{bracket_coefficients, closed_form_values, perturb_unchecked, PerturbationField};
use crate::chart::linalg::{dot, inverse, values_vec};
use crate::chart::{Jet, JetVec, ScalarField, SharedScalar};
use crate::contact::{ContactData, MetricField};
use crate::curvature::ricci_reeb_oracle;
use crate::{Error, Point, Result};

/// Default RK4 step in flow time.
pub const DEFAULT_STEP: f64 = 1e-3;
/// `clamp_floor = CLAMP_FLOOR_FACTOR · θ'²`.
pub const CLAMP_FLOOR_FACTOR: f64 = 1e-6;
/// A flowline is stiff once `η` leaves `[1/STIFF_LIMIT, STIFF_LIMIT]`.
pub const STIFF_LIMIT: f64 = 1e6;
const JET_ORDER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSamples {
    /// `t_k = kT/K` for `k = 1..=K`.
    Ends,
    /// `t_k = (k + ½)T/K` for `k = 0..K`.
    Midpoints,
}

fn ends() -> TimeSamples {
    TimeSamples::Ends
}

/// `Σ₀ × [0, T]` with `Σ₀ = {x_axis = level}` and seeds on a midpoint grid of
/// `seed_bounds` (the two remaining axes in increasing order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowBox {
    pub axis: usize,
    pub level: f64,
    pub seed_bounds: [[f64; 2]; 2],
    pub seed_grid: [usize; 2],
    pub duration: f64,
    pub samples: usize,
    #[serde(default = "ends")]
    pub times: TimeSamples,
}

impl FlowBox {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.axis > 2 {
            return bad(format!("axis {} out of range", self.axis));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.samples == 0 || self.seed_grid.contains(&0) {
            return bad("flow box needs at least one seed and one sample time".into());
        }
        for b in &self.seed_bounds {
            if !(b[1] > b[0]) {
                return bad(format!("empty seed interval {b:?}"));
            }
        }
        Ok(())
    }

    pub fn tangent_axes(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    pub fn seeds(&self) -> Vec<Point> {
        let [a, b] = self.tangent_axes();
        let mut out = Vec::with_capacity(self.seed_grid[0] * self.seed_grid[1]);
        for i in 0..self.seed_grid[0] {
            for j in 0..self.seed_grid[1] {
                let mut p = [0.0; 3];
                p[self.axis] = self.level;
                let [lo, hi] = self.seed_bounds[0];
                p[a] = lo + (i as f64 + 0.5) * (hi - lo) / self.seed_grid[0] as f64;
                let [lo, hi] = self.seed_bounds[1];
                p[b] = lo + (j as f64 + 0.5) * (hi - lo) / self.seed_grid[1] as f64;
                out.push(p);
            }
        }
        out
    }

    /// Every sample time is an integer multiple of this unit.
    fn time_unit(&self) -> f64 {
        match self.times {
            TimeSamples::Ends => self.duration / self.samples as f64,
            TimeSamples::Midpoints => self.duration / (2 * self.samples) as f64,
        }
    }

    fn multiples(&self) -> Vec<usize> {
        match self.times {
            TimeSamples::Ends => (1..=self.samples).collect(),
            TimeSamples::Midpoints => (0..self.samples).map(|k| 2 * k + 1).collect(),
        }
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let u = self.time_unit();
        self.multiples().iter().map(|&m| m as f64 * u).collect()
    }

    /// The RK4 step actually used for a requested `step`: the unit divided evenly.
    pub fn effective_step(&self, step: f64) -> f64 {
        let u = self.time_unit();
        u / (u / step - 1e-9).ceil().max(1.0)
    }
}

/// Chart jets of the solution at one point of the flow box.
#[derive(Debug, Clone, Copy)]
pub struct FlowSample {
    pub point: Point,
    pub seed: Point,
    pub time: f64,
    pub eta: Jet,
    pub mu: Jet,
    pub lambda: Jet,
    /// Flow time from `Σ₀` as a function on the chart.
    pub flow_time: Jet,
}

#[derive(Clone, Copy)]
struct State {
    pos: JetVec,
    ell: Jet,
    mu: Jet,
}

impl State {
    fn axpy(&self, h: Jet, k: &State) -> State {
        State {
            pos: [
                self.pos[0] + h * k.pos[0],
                self.pos[1] + h * k.pos[1],
                self.pos[2] + h * k.pos[2],
            ],
            ell: self.ell + h * k.ell,
            mu: self.mu + h * k.mu,
        }
    }
}

/// Everything the right-hand side needs.
#[derive(Clone)]
struct Problem {
    cd: ContactData,
    f: SharedScalar,
    floor: f64,
}

impl Problem {
    fn rhs(&self, s: &State, clamps: &mut usize) -> Result<State> {
        let order = s.ell.order();
        let p0 = values_vec(&s.pos);
        let q = self.cd.wrap(&p0);
        let k = bracket_coefficients(&self.cd, &q, order)?;
        let fj = self.f.taylor(&q, order)?;
        let disp = [s.pos[0].nilpotent(), s.pos[1].nilpotent(), s.pos[2].nilpotent()];
        let at = |j: Jet| j.compose(&disp);
        let (a, b, c, f) = (at(k.a), at(k.b), at(k.c), at(fj));
        let x = [at(k.reeb[0]), at(k.reeb[1]), at(k.reeb[2])];
        let th = self.cd.theta_prime;
        let arg = f * -0.5 + 0.25 * th * th;
        let sq = if arg.value() >= 0.5 * self.floor {
            arg.sqrt()
        } else if arg.coeffs().iter().all(|v| v.abs() <= 1e-12 * th * th) {
            *clamps += 1;
            Jet::zero(order)
        } else {
            return Err(Error::Admissibility {
                point: q,
                value: f.value(),
                bound: 0.5 * th * th - self.floor,
            });
        };
        let e2 = (s.ell * -2.0).exp();
        let e4 = e2 * e2;
        let mu = s.mu;
        Ok(State {
            pos: x,
            ell: -(a + mu * b),
            mu: (sq * e2 - b * e4 * 0.5 + c * 0.5 + mu * a + mu * mu * b * 0.5) * 2.0,
        })
    }

    fn rk4(&self, s: &State, h: Jet, clamps: &mut usize) -> Result<State> {
        let k1 = self.rhs(s, clamps)?;
        let k2 = self.rhs(&s.axpy(h * 0.5, &k1), clamps)?;
        let k3 = self.rhs(&s.axpy(h * 0.5, &k2), clamps)?;
        let k4 = self.rhs(&s.axpy(h, &k3), clamps)?;
        let w = h * (1.0 / 6.0);
        let mut out = *s;
        for i in 0..3 {
            out.pos[i] += w * (k1.pos[i] + k2.pos[i] * 2.0 + k3.pos[i] * 2.0 + k4.pos[i]);
        }
        out.ell += w * (k1.ell + k2.ell * 2.0 + k3.ell * 2.0 + k4.ell);
        out.mu += w * (k1.mu + k2.mu * 2.0 + k3.mu * 2.0 + k4.mu);
        Ok(out)
    }

    fn check(&self, s: &State, seed: &Point, t: f64) -> Result<()> {
        let p = values_vec(&s.pos);
        let d = &self.cd.domain;
        for i in 0..3 {
            if !d.periodic[i] && (p[i] < d.bounds[i][0] || p[i] > d.bounds[i][1]) {
                return Err(Error::FlowExit { point: p, time: t });
            }
        }
        let ell = s.ell.value();
        if !ell.is_finite() || !s.mu.value().is_finite() || ell.abs() > STIFF_LIMIT.ln() {
            return Err(Error::Stiff {
                seed: *seed,
                time: t,
                eta: ell.exp(),
            });
        }
        Ok(())
    }

    fn initial(&self, fb: &FlowBox, seed: &Point, order: usize) -> State {
        let [a, b] = fb.tangent_axes();
        let mut pos = [Jet::zero(order); 3];
        pos[fb.axis] = Jet::zero(order) + seed[fb.axis];
        pos[a] = Jet::variable(0, seed[a], order);
        pos[b] = Jet::variable(1, seed[b], order);
        State {
            pos,
            ell: Jet::zero(order),
            mu: Jet::zero(order),
        }
    }

    /// Integrate from `seed` with steps `h0(1 + σ)`, returning the chart jets after
    /// each count in `stops` (increasing).
    fn flowline(&self, fb: &FlowBox, seed: &Point, h0: f64, stops: &[usize]) -> Result<(Vec<FlowSample>, usize)> {
        let order = JET_ORDER;
        let h = Jet::variable(2, 1.0, order) * h0;
        let mut s = self.initial(fb, seed, order);
        let mut clamps = 0;
        let mut out = Vec::with_capacity(stops.len());
        let mut done = 0;
        for &stop in stops {
            while done < stop {
                s = self.rk4(&s, h, &mut clamps)?;
                done += 1;
                self.check(&s, seed, done as f64 * h0)?;
            }
            out.push(to_chart(&self.cd, &s, seed, done as f64 * h0)?);
        }
        Ok((out, clamps))
    }

    /// Values of `(point, η, λ)` at the given increasing flow times, steps at most `step`.
    fn values_along(&self, fb: &FlowBox, seed: &Point, times: &[f64], step: f64) -> Result<Vec<(Point, f64, f64)>> {
        let mut s = self.initial(fb, seed, 0);
        let mut t = 0.0;
        let mut clamps = 0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            let n = ((target - t) / step - 1e-9).ceil().max(0.0) as usize;
            if n > 0 {
                let h = (target - t) / n as f64;
                for _ in 0..n {
                    s = self.rk4(&s, Jet::constant(h), &mut clamps)?;
                    t += h;
                    self.check(&s, seed, t)?;
                }
            }
            t = target;
            let eta = s.ell.value().exp();
            out.push((self.cd.wrap(&values_vec(&s.pos)), eta, s.mu.value() * eta * eta));
        }
        Ok(out)
    }
}

/// Chart jets at the end of a flowline whose state is a jet in `(s₁, s₂, σ)`.
fn to_chart(cd: &ContactData, s: &State, seed: &Point, t: f64) -> Result<FlowSample> {
    let order = s.ell.order();
    let rescale = |j: Jet| j.scale_var(2, 1.0 / t);
    let pos = s.pos.map(rescale);
    let (ell, mu) = (rescale(s.ell), rescale(s.mu));
    let p0 = values_vec(&pos);
    let jac: [[f64; 3]; 3] = std::array::from_fn(|i| pos[i].gradient());
    let det = crate::chart::linalg::det(&jac);
    if !(det.abs() > 1e-12) {
        return Err(Error::Precondition(format!(
            "flow-box map is singular at {p0:?} (det {det:.3e}); is the surface transverse to X?"
        )));
    }
    let inv = inverse(&jac);
    let dp: JetVec = std::array::from_fn(|j| Jet::variable(j, 0.0, order));
    let lin = |r: &JetVec| -> JetVec {
        std::array::from_fn(|i| r[0] * inv[i][0] + r[1] * inv[i][1] + r[2] * inv[i][2])
    };
    let mut w = lin(&dp);
    for _ in 0..order {
        let r: JetVec = std::array::from_fn(|i| pos[i].compose(&w) - p0[i] - dp[i]);
        let corr = lin(&r);
        w = std::array::from_fn(|i| w[i] - corr[i]);
    }
    let ell = ell.compose(&w);
    let mu = mu.compose(&w);
    let eta = ell.exp();
    Ok(FlowSample {
        point: cd.wrap(&p0),
        seed: *seed,
        time: t,
        eta,
        mu,
        lambda: mu * eta * eta,
        flow_time: w[2] + t,
    })
}

fn key(p: &Point) -> [i64; 3] {
    p.map(|v| (v * 1e9).round() as i64)
}

/// Per-sample verification of a realization.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleCheck {
    pub point: Point,
    pub seed: Point,
    pub time: f64,
    pub eta: f64,
    pub mu: f64,
    pub lambda: f64,
    pub f: f64,
    pub ricci_oracle: f64,
    pub ricci_closed: f64,
    /// `|ricci_oracle − f|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RealizationSummary {
    pub samples: usize,
    pub seeds: usize,
    pub step: f64,
    pub clamp_floor: f64,
    /// Right-hand-side evaluations where `f = θ'²/2` identically and `S` was set to 0.
    pub clamp_events: usize,
    /// `sup |Ricci_* − f|` over the samples, from the oracle.
    pub max_residual: f64,
    /// `sup |closed form − oracle|`.
    pub max_closed_gap: f64,
    /// `sup (Ricci_* − θ'²/2)`; non-positive up to rounding.
    pub max_bound_excess: f64,
    /// `sup |g_* − g|` on `Σ₀`.
    pub boundary_defect: f64,
    pub min_eta: f64,
    pub max_eta: f64,
}

/// `(η, μ)` on a flow box, the metric they induce and its verification.
pub struct RealizationSolution {
    pub base: ContactData,
    pub flow_box: FlowBox,
    pub step: f64,
    pub clamp_floor: f64,
    pub clamp_events: usize,
    /// Samples at positive flow time, seed-major.
    pub samples: Vec<FlowSample>,
    /// Value samples on `Σ₀`: `η = 1`, `μ = 0`.
    pub boundary: Vec<FlowSample>,
    problem: Problem,
    index: HashMap<[i64; 3], usize>,
}

impl std::fmt::Debug for RealizationSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealizationSolution")
            .field("flow_box", &self.flow_box)
            .field("step", &self.step)
            .field("samples", &self.samples.len())
            .finish()
    }
}

/// Solve the realization ODEs on `fb` for the prescribed `f`.
///
/// Requires `f ≤ θ'²/2 − clamp_floor` wherever the flow passes, except where
/// `f = θ'²/2` to every computed order (then the square root is taken as 0).
pub fn local_realize(cd: &ContactData, f: SharedScalar, fb: &FlowBox, step: f64) -> Result<RealizationSolution> {
    fb.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParams(format!("step must be positive, got {step}")));
    }
    if cd.max_local_order() < JET_ORDER + 1 {
        return Err(Error::UnsupportedOrder {
            requested: JET_ORDER + 1,
            max: cd.max_local_order(),
        });
    }
    let problem = Problem {
        cd: cd.clone(),
        f,
        floor: CLAMP_FLOOR_FACTOR * cd.theta_prime * cd.theta_prime,
    };
    let h0 = fb.effective_step(step);
    let per_unit = (fb.time_unit() / h0).round() as usize;
    let stops: Vec<usize> = fb.multiples().iter().map(|m| m * per_unit).collect();
    let seeds = fb.seeds();
    let runs: Vec<(Vec<FlowSample>, usize)> = seeds
        .par_iter()
        .map(|s| problem.flowline(fb, s, h0, &stops))
        .collect::<Result<_>>()?;
    let clamp_events = runs.iter().map(|r| r.1).sum();
    let samples: Vec<FlowSample> = runs.into_iter().flat_map(|r| r.0).collect();
    let boundary: Vec<FlowSample> = seeds
        .iter()
        .map(|s| FlowSample {
            point: cd.wrap(s),
            seed: *s,
            time: 0.0,
            eta: Jet::zero(0) + 1.0,
            mu: Jet::zero(0),
            lambda: Jet::zero(0),
            flow_time: Jet::zero(0),
        })
        .collect();
    let mut index = HashMap::with_capacity(samples.len() + boundary.len());
    for (i, s) in samples.iter().chain(boundary.iter()).enumerate() {
        index.insert(key(&s.point), i);
    }
    Ok(RealizationSolution {
        base: cd.clone(),
        flow_box: fb.clone(),
        step: h0,
        clamp_floor: problem.floor,
        clamp_events,
        samples,
        boundary,
        problem,
        index,
    })
}

#[derive(Clone, Copy)]
enum Component {
    Lambda,
    Eta,
}

struct SolutionField {
    sol: Arc<RealizationSolution>,
    which: Component,
}

impl ScalarField for SolutionField {
    fn taylor(&self, at: &Point, order: usize) -> Result<Jet> {
        let s = self.sol.sample_at(at, order)?;
        let j = match self.which {
            Component::Lambda => s.lambda,
            Component::Eta => s.eta,
        };
        Ok(j.truncate(order))
    }
}

impl RealizationSolution {
    pub fn f(&self) -> &SharedScalar {
        &self.problem.f
    }

    /// Stored sample at `p`, or a fresh flowline from the point's foot on `Σ₀`.
    pub fn sample_at(&self, p: &Point, order: usize) -> Result<FlowSample> {
        let q = self.base.wrap(p);
        if let Some(&i) = self.index.get(&key(&q)) {
            let s = if i < self.samples.len() {
                self.samples[i]
            } else {
                self.boundary[i - self.samples.len()]
            };
            if s.eta.order() >= order {
                return Ok(s);
            }
        }
        self.evaluate(&q, order)
    }

    /// Flow backward to `Σ₀`, then integrate forward to `p` with steps of at most
    /// the solution's step.
    pub fn evaluate(&self, p: &Point, order: usize) -> Result<FlowSample> {
        if order > JET_ORDER {
            return Err(Error::UnsupportedOrder {
                requested: order,
                max: JET_ORDER,
            });
        }
        let (seed, t) = self.foot(p)?;
        if t <= 1e-14 {
            return Err(Error::Precondition(format!(
                "{p:?} lies on the initial surface, where only values are defined"
            )));
        }
        let m = (t / self.step - 1e-9).ceil().max(1.0) as usize;
        let (mut out, _) = self.problem.flowline(&self.flow_box, &seed, t / m as f64, &[m])?;
        Ok(out.pop().unwrap())
    }

    /// Foot of the flowline through `p` on `Σ₀` and the flow time from it.
    pub fn foot(&self, p: &Point) -> Result<(Point, f64)> {
        let fb = &self.flow_box;
        let cd = &self.base;
        let mut q = *p;
        let ax = fb.axis;
        if cd.domain.periodic[ax] {
            let period = cd.domain.length(ax);
            while q[ax] < fb.level - 1e-12 {
                q[ax] += period;
            }
        }
        let mut t = 0.0;
        let limit = 10 * ((fb.duration / self.step).ceil() as usize + 10);
        for _ in 0..limit {
            let gap = q[ax] - fb.level;
            if gap.abs() <= 1e-13 {
                break;
            }
            let x = cd.reeb(&q)?;
            if !(x[ax] > 0.0) {
                return Err(Error::Precondition(format!(
                    "Reeb field is not transverse to the initial surface at {q:?}"
                )));
            }
            let dt = (gap / x[ax]).min(self.step);
            q = backward_step(cd, &q, dt)?;
            t += dt;
        }
        q[ax] = fb.level;
        if t > fb.duration * (1.0 + 1e-9) + 1e-12 || t < -1e-12 {
            return Err(Error::Precondition(format!(
                "{p:?} is outside the flow box (flow time {t})"
            )));
        }
        Ok((q, t.max(0.0)))
    }

    /// `(λ, η)` of this solution as fields.
    pub fn perturbation(self: &Arc<Self>) -> PerturbationField {
        PerturbationField::new(
            Arc::new(SolutionField {
                sol: self.clone(),
                which: Component::Lambda,
            }),
            Arc::new(SolutionField {
                sol: self.clone(),
                which: Component::Eta,
            }),
        )
    }

    /// Values of `(point, η, λ)` along the flowline from `seed` at increasing times.
    pub fn values_along(&self, seed: &Point, times: &[f64]) -> Result<Vec<(Point, f64, f64)>> {
        self.problem.values_along(&self.flow_box, seed, times, self.step)
    }

    /// Oracle and closed-form Ricci of the realized metric at one sample.
    pub fn check_sample(self: &Arc<Self>, s: &FlowSample) -> Result<SampleCheck> {
        let pf = PerturbationField::new(
            Arc::new(FixedJet(s.point, s.lambda)),
            Arc::new(FixedJet(s.point, s.eta)),
        );
        let realized = perturb_unchecked(&self.base, &pf);
        let oracle = ricci_reeb_oracle(&realized, &s.point)?;
        let k = bracket_coefficients(&self.base, &s.point, 0)?;
        let x = values_vec(&k.reeb);
        let closed = closed_form_values(
            self.base.theta_prime,
            [k.a.value(), k.b.value(), k.c.value()],
            s.lambda.value(),
            s.eta.value(),
            dot(&x, &s.eta.gradient()),
            dot(&x, &(s.lambda / s.eta).gradient()),
        );
        let f = self.problem.f.value(&s.point)?;
        Ok(SampleCheck {
            point: s.point,
            seed: s.seed,
            time: s.time,
            eta: s.eta.value(),
            mu: s.mu.value(),
            lambda: s.lambda.value(),
            f,
            ricci_oracle: oracle,
            ricci_closed: closed,
            residual: (oracle - f).abs(),
        })
    }

    /// Verify every sample against the oracle and `Σ₀` against the base metric.
    pub fn verify(self: &Arc<Self>) -> Result<(RealizationSummary, Vec<SampleCheck>)> {
        let checks: Vec<SampleCheck> = self
            .samples
            .par_iter()
            .map(|s| self.check_sample(s))
            .collect::<Result<_>>()?;
        let pf = self.perturbation();
        let realized = perturb_unchecked(&self.base, &pf);
        let mut boundary_defect = 0.0f64;
        for s in &self.boundary {
            let g0 = self.base.metric_value(&s.point)?;
            let g1 = realized.metric_value(&s.point)?;
            for i in 0..3 {
                for j in 0..3 {
                    boundary_defect = boundary_defect.max((g0[i][j] - g1[i][j]).abs());
                }
            }
        }
        let th = self.base.theta_prime;
        let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&SampleCheck) -> f64| {
            checks.iter().map(get).fold(init, f)
        };
        let summary = RealizationSummary {
            samples: checks.len(),
            seeds: self.boundary.len(),
            step: self.step,
            clamp_floor: self.clamp_floor,
            clamp_events: self.clamp_events,
            max_residual: fold(f64::max, 0.0, |c| c.residual),
            max_closed_gap: checks
                .iter()
                .fold(0.0f64, |m, c| m.max((c.ricci_closed - c.ricci_oracle).abs())),
            max_bound_excess: checks
                .iter()
                .fold(f64::NEG_INFINITY, |m, c| m.max(c.ricci_oracle - 0.5 * th * th)),
            boundary_defect,
            min_eta: fold(f64::min, f64::INFINITY, |c| c.eta),
            max_eta: fold(f64::max, f64::NEG_INFINITY, |c| c.eta),
        };
        Ok((summary, checks))
    }
}

/// A jet known at one point only.
struct FixedJet(Point, Jet);

impl ScalarField for FixedJet {
    fn taylor(&self, at: &Point, order: usize) -> Result<Jet> {
        if key(at) != key(&self.0) || self.1.order() < order {
            return Err(Error::Precondition(format!(
                "jet stored at {:?} requested at {at:?} to order {order}",
                self.0
            )));
        }
        Ok(self.1.truncate(order))
    }
}

fn backward_step(cd: &ContactData, p: &Point, h: f64) -> Result<Point> {
    let f = |q: &Point| -> Result<[f64; 3]> { cd.reeb(q) };
    let add = |a: &Point, k: &[f64; 3], s: f64| [a[0] - s * k[0], a[1] - s * k[1], a[2] - s * k[2]];
    let k1 = f(p)?;
    let k2 = f(&add(p, &k1, 0.5 * h))?;
    let k3 = f(&add(p, &k2, 0.5 * h))?;
    let k4 = f(&add(p, &k3, h))?;
    Ok(std::array::from_fn(|i| {
        p[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// `f` as an [`Arc`]ed expression field.
pub fn prescribed(expr: &str) -> Result<SharedScalar> {
    Ok(Arc::new(crate::chart::ExprField(crate::chart::Expr::parse(expr)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{model_manifold, ModelParams};

    fn heisenberg() -> ContactData {
        model_manifold("heisenberg_r3", &ModelParams { grid: Some([6; 3]), ..Default::default() }).unwrap()
    }

    fn small_box() -> FlowBox {
        FlowBox {
            axis: 2,
            level: 0.05,
            seed_bounds: [[0.3, 0.7], [0.3, 0.7]],
            seed_grid: [2, 2],
            duration: 0.4,
            samples: 4,
            times: TimeSamples::Ends,
        }
    }

    #[test]
    fn sample_times_and_step() {
        let mut fb = small_box();
        assert_eq!(fb.sample_times(), vec![0.1, 0.2, 0.30000000000000004, 0.4]);
        let h = fb.effective_step(0.03);
        assert!(((0.1 / h).round() - 0.1 / h).abs() < 1e-9 && h <= 0.03);
        fb.times = TimeSamples::Midpoints;
        assert!((fb.sample_times()[0] - 0.05).abs() < 1e-15);
        fb.seed_grid = [0, 1];
        assert!(fb.validate().is_err());
    }

    #[test]
    fn zero_on_heisenberg_is_linear_lambda() {
        let cd = heisenberg();
        let sol = Arc::new(local_realize(&cd, prescribed("0").unwrap(), &small_box(), DEFAULT_STEP).unwrap());
        for s in &sol.samples {
            assert!((s.eta.value() - 1.0).abs() < 1e-12);
            assert!((s.lambda.value() - 2.0 * s.time).abs() < 1e-10);
        }
        let (summary, _) = sol.verify().unwrap();
        assert!(summary.max_residual < 1e-6);
        assert_eq!(summary.boundary_defect, 0.0);
        assert_eq!(summary.clamp_events, 0);
    }

    #[test]
    fn maximum_is_the_identity_case() {
        let cd = heisenberg();
        let sol = local_realize(&cd, prescribed("2").unwrap(), &small_box(), DEFAULT_STEP).unwrap();
        assert!(sol.clamp_events > 0);
        assert!(sol.samples.iter().all(|s| s.lambda.value() == 0.0 && s.eta.value() == 1.0));
    }

    #[test]
    fn above_maximum_is_rejected() {
        let cd = heisenberg();
        let r = local_realize(&cd, prescribed("2.5").unwrap(), &small_box(), DEFAULT_STEP);
        assert!(matches!(r, Err(Error::Admissibility { .. })));
    }

    #[test]
    fn off_sample_evaluation_agrees() {
        let cd = heisenberg();
        let f = prescribed("2 - 2*sin(2*pi*z)^2").unwrap();
        let sol = local_realize(&cd, f, &small_box(), DEFAULT_STEP).unwrap();
        let s = sol.samples[5];
        let q = [s.point[0] + 0.013, s.point[1] - 0.02, s.point[2] + 0.01];
        let direct = sol.evaluate(&q, 1).unwrap();
        let d = [q[0] - s.point[0], q[1] - s.point[1], q[2] - s.point[2]];
        let (g, h) = (s.lambda.gradient(), s.lambda.hessian());
        let mut taylor = s.lambda.value();
        for i in 0..3 {
            taylor += g[i] * d[i];
            for j in 0..3 {
                taylor += 0.5 * h[i][j] * d[i] * d[j];
            }
        }
        assert!((direct.lambda.value() - taylor).abs() < 1e-4);
        let (seed, t) = sol.foot(&s.point).unwrap();
        assert!((t - s.time).abs() < 1e-9 && (seed[0] - s.seed[0]).abs() < 1e-9);
    }
}
