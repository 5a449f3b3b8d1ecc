use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::structure::ComplexStructure;
use super::{curl, gradients};
use crate::chart::field::fd_taylor;
use crate::chart::linalg::{
    self, add, bilinear, dot, from_columns, inverse, mat_mul, mat_vec, min_eigenvalue,
    scale, sub, symmetrize, truncate_mat, truncate_vec, values_mat, values_vec,
};
use crate::chart::{Backend, ChartDomain, Jet, JetMat, JetVec, OneForm};
use crate::{Error, Point, Result};

/// Step for differentiating metric values when the backend cannot supply enough jet orders.
pub const METRIC_FD_STEP: f64 = 1e-3;
const METRIC_FD_TOL: f64 = 1e-4;

/// A symmetric 3×3 tensor field with jets.
pub trait MetricField: Send + Sync {
    fn metric(&self, p: &Point, order: usize) -> Result<JetMat>;

    fn backend(&self) -> Backend;

    fn metric_value(&self, p: &Point) -> Result<[[f64; 3]; 3]> {
        Ok(values_mat(&self.metric(p, 0)?))
    }
}

/// A contact form with rotation constant `θ'` and complex structure `J` on a chart.
#[derive(Clone)]
pub struct ContactData {
    pub name: String,
    pub alpha: OneForm,
    pub theta_prime: f64,
    pub structure: Arc<dyn ComplexStructure>,
    pub domain: ChartDomain,
}

/// Everything the metric depends on, as jets of one common order at one point.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub point: Point,
    pub order: usize,
    pub theta_prime: f64,
    pub alpha: JetVec,
    /// `Ω_ij = dα(∂_i, ∂_j)`.
    pub omega: JetMat,
    pub reeb: JetVec,
    /// Coefficient of `α∧dα`.
    pub density: Jet,
    /// The structure's section normalized to `dα(e, Je) = θ'`.
    pub e: JetVec,
    pub je: JetVec,
    pub j: JetMat,
    pub g: JetMat,
}

/// Oriented `g`-orthonormal adapted frame at a point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FramePoint {
    pub point: Point,
    pub e: [f64; 3],
    pub je: [f64; 3],
    pub x: [f64; 3],
}

/// First-order jets of a frame, enough for brackets.
#[derive(Debug, Clone)]
pub struct FrameJets {
    pub e: JetVec,
    pub je: JetVec,
    pub x: JetVec,
    pub omega: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidationReport {
    pub points: usize,
    pub min_contact_density: f64,
    pub max_alpha_reeb_residual: f64,
    pub max_dalpha_reeb_residual: f64,
    pub max_j_squared_residual: f64,
    pub min_dalpha_e_je: f64,
    pub min_metric_eigenvalue: f64,
    pub max_reeb_metric_residual: f64,
    pub max_volume_residual: f64,
}

fn omega_of(a: &JetVec) -> JetMat {
    crate::chart::exterior_derivative_jets(a)
}

impl LocalGeometry {
    /// Frame seeded from `∂x` projected onto `ξ` along `X` (or `∂y` when that
    /// degenerates), `g`-normalized and rotated by `phi` inside `ξ`.
    pub fn seeded_frame(&self, phi: f64) -> Result<(JetVec, JetVec)> {
        let one = Jet::constant(1.0);
        let zero = Jet::constant(0.0);
        let mut chosen = None;
        for axis in 0..2 {
            let mut v = [zero; 3];
            v[axis] = one;
            let v = sub(&v, &scale(self.alpha[axis], &self.reeb));
            let n2 = bilinear(&self.g, &v, &v);
            if n2.value() >= 1e-16 {
                chosen = Some(scale(n2.sqrt().recip(), &v));
                break;
            }
        }
        let e = chosen.ok_or(Error::FrameDegenerate { point: self.point })?;
        let je = mat_vec(&self.j, &e);
        let (s, c) = phi.sin_cos();
        Ok((
            add(&scale(Jet::constant(c), &e), &scale(Jet::constant(s), &je)),
            sub(&scale(Jet::constant(c), &je), &scale(Jet::constant(s), &e)),
        ))
    }

    /// `(L_X J)^i_j = X^k ∂_k J^i_j − J^k_j ∂_k X^i + J^i_k ∂_j X^k`; one order is lost.
    pub fn lie_derivative_j(&self) -> JetMat {
        let x = &self.reeb;
        let dj: [JetMat; 3] = std::array::from_fn(|k| {
            std::array::from_fn(|i| std::array::from_fn(|j| self.j[i][j].derivative(k)))
        });
        let dx: [JetVec; 3] = std::array::from_fn(|k| std::array::from_fn(|i| x[i].derivative(k)));
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = Jet::constant(0.0);
                for k in 0..3 {
                    s += x[k] * dj[k][i][j] - self.j[k][j] * dx[k][i] + self.j[i][k] * dx[j][k];
                }
                s
            })
        })
    }

    /// `(L_X g)_ij = X^k ∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k`; one order is lost.
    pub fn lie_derivative_g(&self) -> JetMat {
        let x = &self.reeb;
        let dx: [JetVec; 3] = std::array::from_fn(|k| std::array::from_fn(|i| x[i].derivative(k)));
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = Jet::constant(0.0);
                for k in 0..3 {
                    s += x[k] * self.g[i][j].derivative(k)
                        + self.g[k][j] * dx[i][k]
                        + self.g[i][k] * dx[j][k];
                }
                s
            })
        })
    }
}

impl ContactData {
    pub fn new(
        name: impl Into<String>,
        alpha: OneForm,
        theta_prime: f64,
        structure: Arc<dyn ComplexStructure>,
        domain: ChartDomain,
    ) -> Result<Self> {
        if !(theta_prime > 0.0 && theta_prime.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "theta' must be positive, got {theta_prime}"
            )));
        }
        domain.validate()?;
        Ok(ContactData {
            name: name.into(),
            alpha,
            theta_prime,
            structure,
            domain,
        })
    }

    pub fn with_structure(&self, name: impl Into<String>, structure: Arc<dyn ComplexStructure>) -> Self {
        ContactData {
            name: name.into(),
            structure,
            ..self.clone()
        }
    }

    pub fn backend(&self) -> Backend {
        self.alpha.backend().combine(self.structure.backend())
    }

    /// Highest order for which [`ContactData::local`] is available.
    pub fn max_local_order(&self) -> usize {
        self.backend().max_order() - 1
    }

    /// Periodic axes reduced; non-periodic coordinates are passed through.
    pub fn wrap(&self, p: &Point) -> Point {
        let mut q = *p;
        for i in 0..3 {
            if self.domain.periodic[i] {
                let [lo, hi] = self.domain.bounds[i];
                q[i] = lo + (q[i] - lo).rem_euclid(hi - lo);
            }
        }
        q
    }

    fn parts(&self, q: &Point, order: usize) -> Result<(JetVec, JetMat, JetVec, Jet, JetVec, JetVec)> {
        let top = order + 1;
        let max = self.alpha.backend().max_order();
        if top > max {
            return Err(Error::UnsupportedOrder {
                requested: order,
                max: max.saturating_sub(1),
            });
        }
        let a_full = self.alpha.taylor(q, top)?;
        let d = gradients(&a_full);
        let c = curl(&d);
        let a = truncate_vec(&a_full, order);
        let omega = omega_of(&a_full);
        let density = dot(&a, &c);
        if !(density.value() > 0.0) {
            return Err(Error::NotContact {
                point: *q,
                density: density.value(),
            });
        }
        let x = scale(density.recip(), &c);
        let (e1, e2) = self.structure.pair(q, order)?;
        let (e1, e2) = (truncate_vec(&e1, order), truncate_vec(&e2, order));
        let w = bilinear(&omega, &e1, &e2);
        if !(w.value() > 0.0) {
            return Err(Error::NotCompatible {
                point: *q,
                reason: format!("dα(e, Je) = {:.3e} is not positive", w.value()),
            });
        }
        let s = (w / self.theta_prime).sqrt().recip();
        Ok((a, omega, x, density, scale(s, &e1), scale(s, &e2)))
    }

    /// Unit section `e` (`g(e,e) = 1`) of the structure and `Je`.
    pub fn unit_section(&self, p: &Point, order: usize) -> Result<(JetVec, JetVec)> {
        let (_, _, _, _, e, je) = self.parts(&self.wrap(p), order)?;
        Ok((e, je))
    }

    /// Jets of every ingredient of `g` at `p`.
    pub fn local(&self, p: &Point, order: usize) -> Result<LocalGeometry> {
        let q = self.wrap(p);
        let (a, omega, x, density, e, je) = self.parts(&q, order)?;
        let zero = [Jet::constant(0.0); 3];
        let frame = from_columns([&e, &je, &x]);
        let image = from_columns([&je, &scale(Jet::constant(-1.0), &e), &zero]);
        let j = mat_mul(&image, &inverse(&frame));
        let mut g = mat_mul(&omega, &j);
        let inv_theta = 1.0 / self.theta_prime;
        for r in 0..3 {
            for s in 0..3 {
                g[r][s] = g[r][s] * inv_theta + a[r] * a[s];
            }
        }
        let g = symmetrize(&g);
        Ok(LocalGeometry {
            point: q,
            order,
            theta_prime: self.theta_prime,
            alpha: a,
            omega: truncate_mat(&omega, order),
            reeb: truncate_vec(&x, order),
            density: density.truncate(order),
            e: truncate_vec(&e, order),
            je: truncate_vec(&je, order),
            j: truncate_mat(&j, order),
            g: truncate_mat(&g, order),
        })
    }

    /// Jets of the Reeb field alone.
    pub fn reeb_jet(&self, p: &Point, order: usize) -> Result<JetVec> {
        let a = self.alpha.taylor(&self.wrap(p), order + 1)?;
        Ok(super::reeb_jets(&a).0)
    }

    pub fn reeb(&self, p: &Point) -> Result<[f64; 3]> {
        Ok(values_vec(&self.local(p, 0)?.reeb))
    }

    /// Seeded frame rotated by `phi`, as values.
    pub fn frame_point(&self, p: &Point, phi: f64) -> Result<FramePoint> {
        let l = self.local(p, 0)?;
        let (e, je) = l.seeded_frame(phi)?;
        Ok(FramePoint {
            point: l.point,
            e: values_vec(&e),
            je: values_vec(&je),
            x: values_vec(&l.reeb),
        })
    }

    /// First-order jets of the seeded frame rotated by `phi`.
    pub fn frame_jets(&self, p: &Point, phi: f64) -> Result<FrameJets> {
        let l = self.local(p, 1)?;
        let (e, je) = l.seeded_frame(phi)?;
        Ok(FrameJets {
            e,
            je,
            x: l.reeb,
            omega: values_mat(&l.omega),
        })
    }

    /// Metric volume density `√det g` and `(1/θ')(α∧dα)` at `p`.
    pub fn volume_densities(&self, p: &Point) -> Result<(f64, f64)> {
        let l = self.local(p, 0)?;
        let g = values_mat(&l.g);
        Ok((linalg::to_na(&g).determinant().sqrt(), l.density.value() / self.theta_prime))
    }

    fn point_residuals(&self, p: &Point) -> Result<ValidationReport> {
        let l = self.local(p, 0)?;
        let om = values_mat(&l.omega);
        let a = values_vec(&l.alpha);
        let x = values_vec(&l.reeb);
        let e = values_vec(&l.e);
        let je = values_vec(&l.je);
        let j = values_mat(&l.j);
        let g = values_mat(&l.g);
        let jj = linalg::mat_mul(&j, &j);
        let j2e = add(&mat_vec(&jj, &e), &e);
        let j2je = add(&mat_vec(&jj, &je), &je);
        let ox = mat_vec(&om, &x);
        let min_eig = min_eigenvalue(&g);
        if !(min_eig > 0.0) {
            return Err(Error::NotSpd {
                point: l.point,
                min_eig,
            });
        }
        let vol = linalg::to_na(&g).determinant().sqrt() - l.density.value() / self.theta_prime;
        let gx = mat_vec(&g, &x);
        let reeb_metric = (gx[0] - a[0]).abs().max((gx[1] - a[1]).abs()).max((gx[2] - a[2]).abs());
        let (e1, e2) = self.structure.pair(&l.point, 0)?;
        Ok(ValidationReport {
            points: 1,
            min_contact_density: l.density.value(),
            max_alpha_reeb_residual: (dot(&a, &x) - 1.0).abs(),
            max_dalpha_reeb_residual: ox.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            max_j_squared_residual: j2e.iter().chain(j2je.iter()).fold(0.0f64, |m, v| m.max(v.abs())),
            min_dalpha_e_je: bilinear(&om, &values_vec(&e1), &values_vec(&e2)),
            min_metric_eigenvalue: min_eig,
            max_reeb_metric_residual: reeb_metric,
            max_volume_residual: vol.abs(),
        })
    }

    /// Check every invariant on the domain grid; the first failing point is reported.
    pub fn validate(&self) -> Result<ValidationReport> {
        self.validate_on(&self.domain.sample_points())
    }

    pub fn validate_on(&self, pts: &[Point]) -> Result<ValidationReport> {
        let per: Vec<Result<ValidationReport>> = pts.par_iter().map(|p| self.point_residuals(p)).collect();
        let mut acc = ValidationReport {
            points: 0,
            min_contact_density: f64::INFINITY,
            max_alpha_reeb_residual: 0.0,
            max_dalpha_reeb_residual: 0.0,
            max_j_squared_residual: 0.0,
            min_dalpha_e_je: f64::INFINITY,
            min_metric_eigenvalue: f64::INFINITY,
            max_reeb_metric_residual: 0.0,
            max_volume_residual: 0.0,
        };
        for r in per {
            let r = r?;
            acc.points += 1;
            acc.min_contact_density = acc.min_contact_density.min(r.min_contact_density);
            acc.max_alpha_reeb_residual = acc.max_alpha_reeb_residual.max(r.max_alpha_reeb_residual);
            acc.max_dalpha_reeb_residual = acc.max_dalpha_reeb_residual.max(r.max_dalpha_reeb_residual);
            acc.max_j_squared_residual = acc.max_j_squared_residual.max(r.max_j_squared_residual);
            acc.min_dalpha_e_je = acc.min_dalpha_e_je.min(r.min_dalpha_e_je);
            acc.min_metric_eigenvalue = acc.min_metric_eigenvalue.min(r.min_metric_eigenvalue);
            acc.max_reeb_metric_residual = acc.max_reeb_metric_residual.max(r.max_reeb_metric_residual);
            acc.max_volume_residual = acc.max_volume_residual.max(r.max_volume_residual);
        }
        Ok(acc)
    }

    /// The compatible metric, after checking it is SPD on the grid.
    pub fn build_compatible_metric(&self) -> Result<CompatibleMetric> {
        self.validate()?;
        Ok(CompatibleMetric(self.clone()))
    }
}

impl MetricField for ContactData {
    /// Jets of `g`; orders the backend cannot reach are obtained by central differences
    /// of metric values with step [`METRIC_FD_STEP`].
    fn metric(&self, p: &Point, order: usize) -> Result<JetMat> {
        if order <= self.max_local_order() {
            return Ok(self.local(p, order)?.g);
        }
        if order > 2 {
            return Err(Error::UnsupportedOrder {
                requested: order,
                max: 2,
            });
        }
        let q = self.wrap(p);
        let mut out = [[Jet::zero(order); 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let f = |x: &Point| {
                    self.local(x, 0)
                        .map(|l| l.g[i][j].value())
                        .unwrap_or(f64::NAN)
                };
                let (jet, _) = fd_taylor(&f, &q, order, METRIC_FD_STEP, METRIC_FD_TOL)?;
                out[i][j] = jet;
                out[j][i] = jet;
            }
        }
        Ok(out)
    }

    fn backend(&self) -> Backend {
        ContactData::backend(self)
    }
}

/// The metric `g(u,v) = dα(u,Jv)/θ' + α(u)α(v)` of validated contact data.
#[derive(Clone)]
pub struct CompatibleMetric(pub ContactData);

impl MetricField for CompatibleMetric {
    fn metric(&self, p: &Point, order: usize) -> Result<JetMat> {
        self.0.metric(p, order)
    }

    fn backend(&self) -> Backend {
        self.0.backend()
    }
}

/// `g(u, v)` from metric values.
pub fn inner(g: &[[f64; 3]; 3], u: &[f64; 3], v: &[f64; 3]) -> f64 {
    bilinear(g, u, v)
}
