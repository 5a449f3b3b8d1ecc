//! Closed-form curvature quantities of compatible metrics, each paired with the
//! oracle value it must reproduce.

use serde::Serialize;

use super::oracle::{sectional_from, Connection};
use crate::chart::linalg::{self, bilinear, mat_vec, values_mat, values_vec};
use crate::chart::{bracket_jets, Backend, JetMat, JetVec};
use crate::contact::{ContactData, FrameJets, LocalGeometry, MetricField};
use crate::{tolerance, Error, Point, Result};

/// `P`, `Q` and `Ricci(X) = −2P² + θ'²/2 − 2Q²` of one frame.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Pq {
    pub p: f64,
    pub q: f64,
    pub ricci: f64,
}

/// `P = dα([e,X],Je)/θ'`, `Q = dα([e,X],e)/2θ' − dα([Je,X],Je)/2θ'`, from brackets only.
pub fn pq_from_frame(f: &FrameJets, theta: f64) -> Pq {
    let ex = values_vec(&bracket_jets(&f.e, &f.x));
    let jex = values_vec(&bracket_jets(&f.je, &f.x));
    let e = values_vec(&f.e);
    let je = values_vec(&f.je);
    let p = bilinear(&f.omega, &ex, &je) / theta;
    let q = (bilinear(&f.omega, &ex, &e) - bilinear(&f.omega, &jex, &je)) / (2.0 * theta);
    Pq {
        p,
        q,
        ricci: -2.0 * p * p + 0.5 * theta * theta - 2.0 * q * q,
    }
}

/// [`pq_from_frame`] for the seeded frame rotated by `phi`.
pub fn pq_ricci(cd: &ContactData, point: &Point, phi: f64) -> Result<Pq> {
    Ok(pq_from_frame(&cd.frame_jets(point, phi)?, cd.theta_prime))
}

fn check_in_xi(l: &LocalGeometry, e: &[f64; 3]) -> Result<()> {
    let a = values_vec(&l.alpha);
    let residual = linalg::dot(&a, e).abs();
    let scale = linalg::dot(e, e).sqrt().max(1e-300);
    if residual > tolerance::STRUCTURAL * scale {
        return Err(Error::NotInXi { residual });
    }
    Ok(())
}

/// `J(θ'/2 e − ½(L_X J)e)` against `∇_e X` from Christoffel symbols.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CovariantCheck {
    pub closed: [f64; 3],
    pub oracle: [f64; 3],
    pub residual: f64,
    /// `g(∇_e X, X)`.
    pub reeb_component: f64,
}

pub fn covariant_reeb_derivative(cd: &ContactData, point: &Point, e: &[f64; 3]) -> Result<CovariantCheck> {
    let l = cd.local(point, 1)?;
    check_in_xi(&l, e)?;
    let conn = Connection::from_jets(point, &l.g)?;
    let lxj = values_mat(&l.lie_derivative_j());
    let j = values_mat(&l.j);
    let le = mat_vec(&lxj, e);
    let inner = [
        0.5 * cd.theta_prime * e[0] - 0.5 * le[0],
        0.5 * cd.theta_prime * e[1] - 0.5 * le[1],
        0.5 * cd.theta_prime * e[2] - 0.5 * le[2],
    ];
    let closed = mat_vec(&j, &inner);
    let oracle = conn.covariant(e, &l.reeb);
    let d = linalg::sub(&closed, &oracle);
    let residual = bilinear(&conn.g, &d, &d).sqrt();
    Ok(CovariantCheck {
        closed,
        oracle,
        residual,
        reeb_component: bilinear(&conn.g, &oracle, &values_vec(&l.reeb)),
    })
}

/// Second fundamental form of `ξ` in the seeded frame, `II(u,v) = g(∇_u v, X)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondFundamental {
    pub ii: [[f64; 2]; 2],
    pub mean: f64,
    pub extrinsic: f64,
}

fn second_fundamental_from(conn: &Connection, e: &[f64; 3], je: &[f64; 3], x: &JetVec) -> SecondFundamental {
    // along sections of ξ, g(∇_u v, X) = −g(v, ∇_u X)
    let basis = [e, je];
    let mut ii = [[0.0; 2]; 2];
    for (a, u) in basis.iter().enumerate() {
        let nabla = conn.covariant(u, x);
        for (b, v) in basis.iter().enumerate() {
            ii[a][b] = -bilinear(&conn.g, v, &nabla);
        }
    }
    SecondFundamental {
        ii,
        mean: ii[0][0] + ii[1][1],
        extrinsic: ii[0][0] * ii[1][1] - ii[0][1] * ii[1][0],
    }
}

pub fn second_fundamental(cd: &ContactData, point: &Point) -> Result<SecondFundamental> {
    let l = cd.local(point, 1)?;
    let (e, je) = l.seeded_frame(0.0)?;
    let conn = Connection::from_jets(point, &l.g)?;
    Ok(second_fundamental_from(&conn, &values_vec(&e), &values_vec(&je), &l.reeb))
}

/// Every curvature quantity at one point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvatureReport {
    pub point: Point,
    pub p: f64,
    pub q: f64,
    pub ricci_closed: f64,
    pub ricci_oracle: f64,
    pub k_e: f64,
    pub k_je: f64,
    #[serde(rename = "G")]
    pub extrinsic: f64,
    #[serde(rename = "H")]
    pub mean: f64,
    /// `|ricci_closed − ricci_oracle|`.
    pub residual: f64,
}

/// Shared per-point state: first-order frame jets, a connection with curvature.
pub(crate) struct PointCurvature {
    pub local: LocalGeometry,
    pub conn: Connection,
    pub riemann: [[[[f64; 3]; 3]; 3]; 3],
    pub frame: FrameJets,
}

impl PointCurvature {
    pub fn new(cd: &ContactData, point: &Point) -> Result<Self> {
        let (local, gj): (LocalGeometry, JetMat) = if cd.max_local_order() >= 2 {
            let l = cd.local(point, 2)?;
            let g = l.g;
            (l, g)
        } else {
            (cd.local(point, 1)?, cd.metric(point, 2)?)
        };
        let conn = Connection::from_jets(point, &gj)?;
        let riemann = conn.riemann()?;
        let (e, je) = local.seeded_frame(0.0)?;
        let frame = FrameJets {
            e,
            je,
            x: local.reeb,
            omega: values_mat(&local.omega),
        };
        Ok(PointCurvature {
            local,
            conn,
            riemann,
            frame,
        })
    }

    pub fn sectional(&self, u: &[f64; 3], v: &[f64; 3]) -> Result<f64> {
        sectional_from(&self.conn.g, &self.riemann, u, v)
    }

    pub fn report(&self, theta: f64) -> Result<CurvatureReport> {
        let pq = pq_from_frame(&self.frame, theta);
        let e = values_vec(&self.frame.e);
        let je = values_vec(&self.frame.je);
        let x = values_vec(&self.frame.x);
        let k_e = self.sectional(&e, &x)?;
        let k_je = self.sectional(&je, &x)?;
        let ricci_oracle = k_e + k_je;
        let sf = second_fundamental_from(&self.conn, &e, &je, &self.frame.x);
        Ok(CurvatureReport {
            point: self.local.point,
            p: pq.p,
            q: pq.q,
            ricci_closed: pq.ricci,
            ricci_oracle,
            k_e,
            k_je,
            extrinsic: sf.extrinsic,
            mean: sf.mean,
            residual: (pq.ricci - ricci_oracle).abs(),
        })
    }
}

pub fn curvature_report(cd: &ContactData, point: &Point) -> Result<CurvatureReport> {
    PointCurvature::new(cd, point)?.report(cd.theta_prime)
}

/// `Ricci(X) = k(e,X) + k(Je,X)` from the oracle alone.
pub fn ricci_reeb_oracle(cd: &ContactData, point: &Point) -> Result<f64> {
    let pc = PointCurvature::new(cd, point)?;
    let e = values_vec(&pc.frame.e);
    let je = values_vec(&pc.frame.je);
    let x = values_vec(&pc.frame.x);
    Ok(pc.sectional(&e, &x)? + pc.sectional(&je, &x)?)
}

/// Tolerance rung matching a derivative backend.
pub fn backend_tolerance(b: Backend) -> f64 {
    match b {
        Backend::AnalyticJet => tolerance::ANALYTIC,
        Backend::FiniteDifference => tolerance::NUMERIC,
    }
}

/// Number of equally spaced directions in `ξ` used for "for every `e`" checks.
pub const SWEEP: usize = 32;

/// The four maximality conditions at one point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceReport {
    pub point: Point,
    pub ricci_max: bool,
    pub geodesible: bool,
    pub lie_j_zero: bool,
    pub lie_g_zero: bool,
    pub agree: bool,
    pub ricci_gap: f64,
    pub sweep_max: f64,
    pub lie_j_norm: f64,
    pub lie_g_norm: f64,
    /// `√(P² + Q²)`, the amplitude of `φ ↦ g(e_φ, ∇_{e_φ} X)`.
    pub amplitude: f64,
    pub zero_directions: usize,
}

/// Tolerances for the four conditions derived from the one on `Ricci`.
///
/// `θ'²/2 − Ricci = 2(P² + Q²)`, so a Ricci gap of `t` allows an amplitude
/// `√(t/2)` of `g(e,∇_e X)`, and the Lie derivatives of `J` and `g` in an
/// orthonormal frame have Frobenius norm `2√2` times that amplitude.
pub fn scaled_tolerances(tol: f64) -> [f64; 4] {
    let t2 = (tol / 2.0).sqrt();
    let t3 = 2.0 * std::f64::consts::SQRT_2 * t2;
    [tol, t2, t3, t3]
}

/// Sign changes of a periodic sample sequence; runs of near-zeros count once.
pub fn count_zero_directions(vals: &[f64], zero_tol: f64) -> usize {
    let tokens: Vec<i8> = vals
        .iter()
        .map(|v| {
            if v.abs() <= zero_tol {
                0
            } else if *v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let n = tokens.len();
    let Some(start) = tokens.iter().position(|t| *t != 0) else {
        return 0;
    };
    let mut count = 0;
    let mut prev = tokens[start];
    let mut in_zero = false;
    for k in 1..=n {
        let t = tokens[(start + k) % n];
        if t == 0 {
            if !in_zero {
                count += 1;
                in_zero = true;
            }
        } else {
            if !in_zero && t != prev {
                count += 1;
            }
            in_zero = false;
            prev = t;
        }
    }
    count
}

pub fn max_ricci_equivalence(cd: &ContactData, point: &Point, tol: f64) -> Result<EquivalenceReport> {
    let pc = PointCurvature::new(cd, point)?;
    equivalence_from(&pc, cd.theta_prime, tol)
}

pub(crate) fn equivalence_from(pc: &PointCurvature, theta: f64, tol: f64) -> Result<EquivalenceReport> {
    let [t1, t2, t3, t4] = scaled_tolerances(tol);
    let rep = pc.report(theta)?;
    let ricci_gap = 0.5 * theta * theta - rep.ricci_oracle;
    let e = values_vec(&pc.frame.e);
    let je = values_vec(&pc.frame.je);
    let x = values_vec(&pc.frame.x);
    let g = &pc.conn.g;
    let mut sweep = [0.0; SWEEP];
    for (k, s) in sweep.iter_mut().enumerate() {
        let (sn, cs) = (2.0 * std::f64::consts::PI * k as f64 / SWEEP as f64).sin_cos();
        let v = [cs * e[0] + sn * je[0], cs * e[1] + sn * je[1], cs * e[2] + sn * je[2]];
        *s = bilinear(g, &v, &pc.conn.covariant(&v, &pc.frame.x));
    }
    let sweep_max = sweep.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let frame = linalg::from_columns([&e, &je, &x]);
    let frame_inv = linalg::inverse(&frame);
    let lxj = values_mat(&pc.local.lie_derivative_j());
    let lxg = values_mat(&pc.local.lie_derivative_g());
    let lie_j_norm = linalg::frobenius(&linalg::mat_mul(&frame_inv, &linalg::mat_mul(&lxj, &frame)));
    let lie_g_norm =
        linalg::frobenius(&linalg::mat_mul(&linalg::transpose(&frame), &linalg::mat_mul(&lxg, &frame)));
    let amplitude = (rep.p * rep.p + rep.q * rep.q).sqrt();
    let flags = [
        ricci_gap.abs() <= t1,
        sweep_max <= t2,
        lie_j_norm <= t3,
        lie_g_norm <= t4,
    ];
    let zero_directions = if flags[0] {
        0
    } else {
        count_zero_directions(&sweep, 1e-9 * amplitude.max(sweep_max))
    };
    Ok(EquivalenceReport {
        point: rep.point,
        ricci_max: flags[0],
        geodesible: flags[1],
        lie_j_zero: flags[2],
        lie_g_zero: flags[3],
        agree: flags.iter().all(|f| *f == flags[0]),
        ricci_gap,
        sweep_max,
        lie_j_norm,
        lie_g_norm,
        amplitude,
        zero_directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_counting() {
        let n = 32;
        let f = |a: f64, b: f64| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    a * (2.0 * t).cos() - b * (2.0 * t).sin()
                })
                .collect()
        };
        // zeros exactly on samples
        assert_eq!(count_zero_directions(&f(0.0, std::f64::consts::PI), 1e-9), 4);
        // zeros between samples
        assert_eq!(count_zero_directions(&f(0.3, 0.7), 1e-9), 4);
        assert_eq!(count_zero_directions(&[0.0; 8], 1e-9), 0);
        assert_eq!(count_zero_directions(&[1.0, -1.0, 1.0, -1.0], 1e-9), 4);
    }

    #[test]
    fn tolerance_scaling() {
        let [t1, t2, t3, t4] = scaled_tolerances(1e-6);
        assert_eq!(t1, 1e-6);
        assert!((t2 - (0.5e-6f64).sqrt()).abs() < 1e-18);
        assert_eq!(t3, t4);
    }
}
