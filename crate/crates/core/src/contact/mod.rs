//! Contact forms, Reeb fields, complex structures on `ξ = ker α` and the compatible
//! metrics they induce, together with a small library of model charts.

mod data;
pub mod models;
mod structure;

pub use data::{inner, CompatibleMetric, ContactData, FrameJets, FramePoint, LocalGeometry, MetricField, ValidationReport};
pub use models::{model_manifold, ModelParams};
pub use structure::{ComplexStructure, FramePair, Perturbed};

use crate::chart::linalg::{dot, Vec3};
use crate::chart::{ChartDomain, Jet, JetVec, OneForm, Scalar};
use crate::{Error, Point, Result};

/// `curl α`, so that `dα(u,v) = (curl α)·(u × v)` and `α∧dα = (α·curl α) dx∧dy∧dz`.
pub fn curl<T: Scalar>(d: &[Vec3<T>; 3]) -> Vec3<T> {
    // d[i] = ∂_i α
    [d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]]
}

fn gradients(a: &JetVec) -> [JetVec; 3] {
    let mut d = [[Jet::constant(0.0); 3]; 3];
    for (i, di) in d.iter_mut().enumerate() {
        for j in 0..3 {
            di[j] = a[j].derivative(i);
        }
    }
    d
}

/// Reeb field and contact density from jets of `α` (one order is consumed).
pub fn reeb_jets(alpha: &JetVec) -> (JetVec, Jet) {
    let c = curl(&gradients(alpha));
    let a = [alpha[0].truncate(c[0].order()), alpha[1].truncate(c[1].order()), alpha[2].truncate(c[2].order())];
    let density = dot(&a, &c);
    let inv = density.recip();
    ([c[0] * inv, c[1] * inv, c[2] * inv], density)
}

/// Coefficient of `α∧dα` against `dx∧dy∧dz` at a point.
pub fn contact_density(alpha: &OneForm, p: &Point) -> Result<f64> {
    let a = alpha.taylor(p, 1)?;
    let c = curl(&gradients(&a));
    Ok(a[0].value() * c[0].value() + a[1].value() * c[1].value() + a[2].value() * c[2].value())
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ContactReport {
    pub min_density: f64,
    pub argmin: Point,
    pub points: usize,
    pub contact: bool,
}

/// Grid minimum of the `α∧dα` coefficient.
pub fn verify_contact(alpha: &OneForm, dom: &ChartDomain) -> Result<ContactReport> {
    use rayon::prelude::*;
    let pts = dom.sample_points();
    if pts.is_empty() {
        return Err(Error::InvalidDomain("empty grid".into()));
    }
    let vals: Vec<Result<f64>> = pts.par_iter().map(|p| contact_density(alpha, p)).collect();
    let mut min_density = f64::INFINITY;
    let mut argmin = pts[0];
    for (p, v) in pts.iter().zip(vals) {
        let v = v?;
        if v < min_density {
            min_density = v;
            argmin = *p;
        }
    }
    Ok(ContactReport {
        min_density,
        argmin,
        points: pts.len(),
        contact: min_density > 0.0,
    })
}

/// Solve `α(X) = 1`, `dα(X,·) = 0` at a point as a linear system.
///
/// The normal equations `(ΩᵀΩ + ααᵀ) X = α` have a unique solution exactly when the
/// form is contact at `p`.
pub fn reeb_field(alpha: &OneForm, p: &Point) -> Result<[f64; 3]> {
    let a = alpha.taylor(p, 1)?;
    let d = gradients(&a);
    let av = nalgebra::Vector3::new(a[0].value(), a[1].value(), a[2].value());
    let om = nalgebra::Matrix3::from_fn(|i, j| d[i][j].value() - d[j][i].value());
    let m = om.transpose() * om + av * av.transpose();
    let x = m
        .lu()
        .solve(&av)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularSystem { point: *p })?;
    let scale = m.norm() * x.norm();
    let resid = (av.dot(&x) - 1.0).abs().max((om * x).amax());
    if !(resid <= 1e-8 * (1.0 + scale)) {
        return Err(Error::SingularSystem { point: *p });
    }
    Ok([x[0], x[1], x[2]])
}
