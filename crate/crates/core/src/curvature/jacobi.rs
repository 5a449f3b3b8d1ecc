//! α-Jacobi fields: vectors of `ξ` pushed forward along Reeb flowlines.
//!
//! The push-forward `ẽ(t) = dφ_t(v₀)` solves `dẽ/dt = DX · ẽ` alongside `ẋ = X(x)`,
//! which is the equation `X ẽ = ∇_ẽ X` written in coordinates.

use serde::Serialize;

use super::oracle::{apply_riemann, Connection};
use crate::chart::linalg::{bilinear, mat_vec, values_mat, values_vec};
use crate::contact::ContactData;
use crate::{tolerance, Error, Point, Result};

/// Samples of two α-Jacobi fields along one Reeb flowline.
#[derive(Debug, Clone, Serialize)]
pub struct JacobiPath {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub e_tilde: Vec<[f64; 3]>,
    pub e_perp: Vec<[f64; 3]>,
    /// `ẽ(t) / |ẽ(t)|`.
    pub e_unit: Vec<[f64; 3]>,
    /// Angle between `ẽ` and `ẽ⊥`.
    pub beta: Vec<f64>,
    /// `|ẽ||ẽ⊥| sin β`.
    pub area: Vec<f64>,
}

impl JacobiPath {
    /// `max_t |area(t) − area(0)| / area(0)`.
    pub fn area_drift(&self) -> f64 {
        let a0 = self.area[0];
        self.area.iter().fold(0.0f64, |m, a| m.max((a - a0).abs())) / a0
    }
}

#[derive(Clone, Copy)]
struct State {
    x: Point,
    v: [f64; 3],
    w: [f64; 3],
}

fn axpy(a: &State, h: f64, k: &State) -> State {
    let f = |p: &[f64; 3], q: &[f64; 3]| [p[0] + h * q[0], p[1] + h * q[1], p[2] + h * q[2]];
    State {
        x: f(&a.x, &k.x),
        v: f(&a.v, &k.v),
        w: f(&a.w, &k.w),
    }
}

fn rhs(cd: &ContactData, s: &State) -> Result<State> {
    let xj = cd.reeb_jet(&s.x, 1)?;
    let x = values_vec(&xj);
    let dx = [xj[0].gradient(), xj[1].gradient(), xj[2].gradient()];
    Ok(State {
        x,
        v: mat_vec(&dx, &s.v),
        w: mat_vec(&dx, &s.w),
    })
}

fn rk4(cd: &ContactData, s: &State, h: f64) -> Result<State> {
    let k1 = rhs(cd, s)?;
    let k2 = rhs(cd, &axpy(s, 0.5 * h, &k1))?;
    let k3 = rhs(cd, &axpy(s, 0.5 * h, &k2))?;
    let k4 = rhs(cd, &axpy(s, h, &k3))?;
    let mut out = *s;
    for i in 0..3 {
        out.x[i] += h / 6.0 * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
        out.v[i] += h / 6.0 * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
        out.w[i] += h / 6.0 * (k1.w[i] + 2.0 * k2.w[i] + 2.0 * k3.w[i] + k4.w[i]);
    }
    Ok(out)
}

fn check_inside(cd: &ContactData, p: &Point, t: f64) -> Result<()> {
    let d = &cd.domain;
    for i in 0..3 {
        if !d.periodic[i] && (p[i] < d.bounds[i][0] || p[i] > d.bounds[i][1]) {
            return Err(Error::FlowExit { point: *p, time: t });
        }
    }
    Ok(())
}

fn transport(cd: &ContactData, s: State, t: f64, steps: usize) -> Result<State> {
    let h = t / steps as f64;
    let mut s = s;
    for k in 0..steps {
        s = rk4(cd, &s, h)?;
        check_inside(cd, &s.x, (k + 1) as f64 * h)?;
    }
    Ok(s)
}

/// Push `v0` and `J v0` forward along the flowline through `point` for time `t_end`.
pub fn alpha_jacobi_propagate(
    cd: &ContactData,
    point: &Point,
    v0: &[f64; 3],
    t_end: f64,
    steps: usize,
) -> Result<JacobiPath> {
    if steps == 0 {
        return Err(Error::InvalidParams("steps must be positive".into()));
    }
    let l = cd.local(point, 0)?;
    let a = values_vec(&l.alpha);
    let residual = crate::chart::linalg::dot(&a, v0).abs();
    if residual > tolerance::STRUCTURAL * crate::chart::linalg::dot(v0, v0).sqrt() {
        return Err(Error::NotInXi { residual });
    }
    check_inside(cd, point, 0.0)?;
    let w0 = mat_vec(&values_mat(&l.j), v0);
    let h = t_end / steps as f64;
    let mut s = State {
        x: *point,
        v: *v0,
        w: w0,
    };
    let mut path = JacobiPath {
        times: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity(steps + 1),
        e_tilde: Vec::with_capacity(steps + 1),
        e_perp: Vec::with_capacity(steps + 1),
        e_unit: Vec::with_capacity(steps + 1),
        beta: Vec::with_capacity(steps + 1),
        area: Vec::with_capacity(steps + 1),
    };
    for k in 0..=steps {
        if k > 0 {
            s = rk4(cd, &s, h)?;
            check_inside(cd, &s.x, k as f64 * h)?;
        }
        let g = values_mat(&cd.local(&s.x, 0)?.g);
        let vv = bilinear(&g, &s.v, &s.v);
        let ww = bilinear(&g, &s.w, &s.w);
        let vw = bilinear(&g, &s.v, &s.w);
        let nv = vv.sqrt();
        path.times.push(k as f64 * h);
        path.points.push(s.x);
        path.e_tilde.push(s.v);
        path.e_perp.push(s.w);
        path.e_unit.push([s.v[0] / nv, s.v[1] / nv, s.v[2] / nv]);
        path.beta.push((vw / (nv * ww.sqrt())).clamp(-1.0, 1.0).acos());
        path.area.push((vv * ww - vw * vw).max(0.0).sqrt());
    }
    Ok(path)
}

/// Largest `|D²ẽ/dt² + R(ẽ,X)X|_g / |ẽ|_g` over every `stride`-th interior sample.
///
/// `Dẽ/dt = ∇_ẽ X` exactly; its covariant derivative along the flowline is taken by
/// central differences between neighbouring samples.
pub fn jacobi_equation_residual(cd: &ContactData, path: &JacobiPath, stride: usize) -> Result<f64> {
    let n = path.times.len();
    if n < 3 {
        return Ok(0.0);
    }
    let dt = path.times[1] - path.times[0];
    let nabla_x = |k: usize| -> Result<[f64; 3]> {
        let l = cd.local(&path.points[k], 1)?;
        let conn = Connection::from_jets(&path.points[k], &l.g)?;
        Ok(conn.covariant(&path.e_tilde[k], &l.reeb))
    };
    let mut worst = 0.0f64;
    let mut k = 1;
    while k + 1 < n {
        let w_minus = nabla_x(k - 1)?;
        let w_plus = nabla_x(k + 1)?;
        let p = path.points[k];
        let (conn2, xj) = if cd.max_local_order() >= 2 {
            let l = cd.local(&p, 2)?;
            (Connection::from_jets(&p, &l.g)?, l.reeb)
        } else {
            (Connection::at(cd, &p, 2)?, cd.reeb_jet(&p, 1)?)
        };
        let w = conn2.covariant(&path.e_tilde[k], &xj);
        let x = values_vec(&xj);
        let mut dw = [0.0; 3];
        for i in 0..3 {
            dw[i] = (w_plus[i] - w_minus[i]) / (2.0 * dt);
            for a in 0..3 {
                for b in 0..3 {
                    dw[i] += conn2.gamma[i][a][b] * x[a] * w[b];
                }
            }
        }
        let r = apply_riemann(&conn2.riemann()?, &path.e_tilde[k], &x, &x);
        let res = [dw[0] + r[0], dw[1] + r[1], dw[2] + r[2]];
        let norm = bilinear(&conn2.g, &path.e_tilde[k], &path.e_tilde[k]).sqrt();
        worst = worst.max(bilinear(&conn2.g, &res, &res).sqrt() / norm);
        k += stride.max(1);
    }
    Ok(worst)
}

/// Central-difference step for the derivative along the Jacobi path.
pub const JACOBI_DT: f64 = 1e-3;

/// `g(e(t), ∇_{e(t)} X)` at the end of a transport of `e` for time `t`.
fn rate(cd: &ContactData, point: &Point, e: &[f64; 3], t: f64, steps: usize) -> Result<f64> {
    let s = State {
        x: *point,
        v: *e,
        w: *e,
    };
    let s = if t == 0.0 { s } else { transport(cd, s, t, steps)? };
    let l = cd.local(&s.x, 1)?;
    let conn = Connection::from_jets(&s.x, &l.g)?;
    let n = bilinear(&conn.g, &s.v, &s.v).sqrt();
    let u = [s.v[0] / n, s.v[1] / n, s.v[2] / n];
    Ok(bilinear(&conn.g, &u, &conn.covariant(&u, &l.reeb)))
}

/// `k(e,X) = g(Je,∇_e X)² − g(e,∇_e X)² − ∂_t g(e(t),∇_{e(t)} X)|₀` for a unit `e ∈ ξ`.
///
/// The derivative is a central difference with step [`JACOBI_DT`] and one Richardson
/// level; the transports use RK4 steps of `JACOBI_DT/2`.
pub fn sectional_via_jacobi(cd: &ContactData, point: &Point, e: &[f64; 3]) -> Result<f64> {
    let l = cd.local(point, 1)?;
    let a = values_vec(&l.alpha);
    let residual = crate::chart::linalg::dot(&a, e).abs();
    if residual > tolerance::STRUCTURAL * crate::chart::linalg::dot(e, e).sqrt() {
        return Err(Error::NotInXi { residual });
    }
    let conn = Connection::from_jets(point, &l.g)?;
    let n = bilinear(&conn.g, e, e).sqrt();
    let u = [e[0] / n, e[1] / n, e[2] / n];
    let ju = mat_vec(&values_mat(&l.j), &u);
    let nabla = conn.covariant(&u, &l.reeb);
    let a = bilinear(&conn.g, &ju, &nabla);
    let b = bilinear(&conn.g, &u, &nabla);
    let h = JACOBI_DT;
    let d_h = (rate(cd, point, &u, h, 2)? - rate(cd, point, &u, -h, 2)?) / (2.0 * h);
    let d_half = (rate(cd, point, &u, 0.5 * h, 1)? - rate(cd, point, &u, -0.5 * h, 1)?) / h;
    let derivative = (4.0 * d_half - d_h) / 3.0;
    Ok(a * a - b * b - derivative)
}
