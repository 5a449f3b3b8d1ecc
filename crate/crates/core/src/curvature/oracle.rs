//! Levi-Civita connection and curvature computed from metric jets alone.

use crate::chart::linalg::{bilinear, inverse, values_mat};
use crate::chart::{Jet, JetMat, JetVec};
use crate::contact::MetricField;
use crate::{Error, Point, Result};

/// `Γ^l_ij`, indexed `[l][i][j]`.
pub type Christoffel = [[[f64; 3]; 3]; 3];

/// Connection data at one point: metric, inverse, Christoffel jets of order one less
/// than the metric jets they came from.
#[derive(Debug, Clone)]
pub struct Connection {
    pub point: Point,
    pub g: [[f64; 3]; 3],
    pub gamma_jets: [[[Jet; 3]; 3]; 3],
    pub gamma: Christoffel,
}

/// `Γ^l_ij = ½ g^{lm}(∂_i g_mj + ∂_j g_mi − ∂_m g_ij)` from metric jets of order ≥ 1.
pub fn christoffel_jets(g: &JetMat) -> [[[Jet; 3]; 3]; 3] {
    let ginv = inverse(g);
    let dg: [JetMat; 3] =
        std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| g[i][j].derivative(k))));
    let order = dg[0][0][0].order();
    std::array::from_fn(|l| {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = Jet::zero(order);
                for m in 0..3 {
                    let lower = dg[i][m][j] + dg[j][m][i] - dg[m][i][j];
                    s += ginv[l][m].truncate(order) * lower;
                }
                s * 0.5
            })
        })
    })
}

impl Connection {
    /// Needs metric jets of order `1 + derivative_order`.
    pub fn at(metric: &dyn MetricField, p: &Point, metric_order: usize) -> Result<Connection> {
        Connection::from_jets(p, &metric.metric(p, metric_order)?)
    }

    pub fn from_jets(p: &Point, gj: &JetMat) -> Result<Connection> {
        let g = values_mat(gj);
        let gamma_jets = christoffel_jets(gj);
        let mut gamma = [[[0.0; 3]; 3]; 3];
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    gamma[l][i][j] = gamma_jets[l][i][j].value();
                }
            }
        }
        if !gamma.iter().flatten().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Christoffel symbol",
                point: *p,
            });
        }
        Ok(Connection {
            point: *p,
            g,
            gamma_jets,
            gamma,
        })
    }

    /// `∇_u V` for a vector field given by first-order jets.
    pub fn covariant(&self, u: &[f64; 3], v: &JetVec) -> [f64; 3] {
        let mut out = [0.0; 3];
        for l in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                let grad = v[l].gradient();
                s += u[i] * grad[i];
                for j in 0..3 {
                    s += self.gamma[l][i][j] * u[i] * v[j].value();
                }
            }
            out[l] = s;
        }
        out
    }

    /// `R^l_ijk = ∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik`, so that
    /// `R(∂_i, ∂_j)∂_k = ∇_i∇_j∂_k − ∇_j∇_i∂_k`. Needs Christoffel jets of order ≥ 1.
    pub fn riemann(&self) -> Result<[[[[f64; 3]; 3]; 3]; 3]> {
        if self.gamma_jets[0][0][0].order() < 1 {
            return Err(Error::UnsupportedOrder {
                requested: 2,
                max: 1,
            });
        }
        let gm = &self.gamma;
        let d = |l: usize, j: usize, k: usize, i: usize| self.gamma_jets[l][j][k].gradient()[i];
        let mut r = [[[[0.0; 3]; 3]; 3]; 3];
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let mut s = d(l, j, k, i) - d(l, i, k, j);
                        for m in 0..3 {
                            s += gm[l][i][m] * gm[m][j][k] - gm[l][j][m] * gm[m][i][k];
                        }
                        r[l][i][j][k] = s;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Largest `|∇_k g_ij|`; zero for the Levi-Civita connection.
    pub fn compatibility_residual(&self, metric_jets: &JetMat) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = metric_jets[i][j].gradient()[k];
                    for m in 0..3 {
                        v -= self.gamma[m][k][i] * self.g[m][j] + self.gamma[m][k][j] * self.g[i][m];
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }
}

/// `R(u,v)w`.
pub fn apply_riemann(r: &[[[[f64; 3]; 3]; 3]; 3], u: &[f64; 3], v: &[f64; 3], w: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (l, o) in out.iter_mut().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    *o += r[l][i][j][k] * u[i] * v[j] * w[k];
                }
            }
        }
    }
    out
}

/// `K(u,v) = g(R(u,v)v, u) / (|u|²|v|² − g(u,v)²)`.
pub fn sectional_from(
    g: &[[f64; 3]; 3],
    r: &[[[[f64; 3]; 3]; 3]; 3],
    u: &[f64; 3],
    v: &[f64; 3],
) -> Result<f64> {
    let uu = bilinear(g, u, u);
    let vv = bilinear(g, v, v);
    let uv = bilinear(g, u, v);
    let area2 = uu * vv - uv * uv;
    if !(area2 > 1e-24 * (uu * vv).max(f64::MIN_POSITIVE)) {
        return Err(Error::DegeneratePlane);
    }
    let rv = apply_riemann(r, u, v, v);
    Ok(bilinear(g, &rv, u) / area2)
}

/// Christoffel symbols at a point with the metric-compatibility residual.
pub fn christoffel_oracle(metric: &dyn MetricField, p: &Point) -> Result<(Christoffel, f64)> {
    let gj = metric.metric(p, 1)?;
    let conn = Connection::from_jets(p, &gj)?;
    let resid = conn.compatibility_residual(&gj);
    Ok((conn.gamma, resid))
}

/// Sectional curvature of the plane spanned by `u` and `v`.
pub fn sectional_oracle(metric: &dyn MetricField, p: &Point, u: &[f64; 3], v: &[f64; 3]) -> Result<f64> {
    let conn = Connection::at(metric, p, 2)?;
    sectional_from(&conn.g, &conn.riemann()?, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Backend, Expr};

    /// Round unit sphere in stereographic coordinates on the first two axes, times a
    /// line: `g = 4/(1+x²+y²)² (dx² + dy²) + dz²`.
    struct Sphere;

    impl MetricField for Sphere {
        fn metric(&self, p: &Point, order: usize) -> Result<JetMat> {
            let c = Expr::parse("4 / (1 + x^2 + y^2)^2").unwrap().eval(&Jet::seed(*p, order));
            let z = Jet::zero(order);
            let one = Jet::constant(1.0).truncate(order);
            Ok([[c, z, z], [z, c, z], [z, z, one]])
        }
        fn backend(&self) -> Backend {
            Backend::AnalyticJet
        }
    }

    #[test]
    fn sphere_factor_has_unit_curvature() {
        let p = [0.3, -0.4, 0.0];
        let k = sectional_oracle(&Sphere, &p, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((k - 1.0).abs() < 1e-12, "{k}");
        let k = sectional_oracle(&Sphere, &p, &[1.0, 0.5, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!(k.abs() < 1e-12);
        let (gamma, resid) = christoffel_oracle(&Sphere, &p).unwrap();
        assert!(resid < 1e-14);
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(gamma[l][i][j], gamma[l][j][i]);
                }
            }
        }
    }

    #[test]
    fn degenerate_plane_is_rejected() {
        let r = sectional_oracle(&Sphere, &[0.0; 3], &[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0]);
        assert!(matches!(r, Err(Error::DegeneratePlane)));
    }
}
