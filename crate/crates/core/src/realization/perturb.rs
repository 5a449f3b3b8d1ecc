//! Deformations `J_*: e ↦ η²Je + λe` of a complex structure along its unit section.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::linalg::{
    bilinear, dot, from_columns, inverse, mat_mul, symmetrize, truncate_mat, truncate_vec, values_mat,
    values_vec,
};
use crate::chart::{bracket_jets, ConstField, Expr, ExprField, Jet, JetVec, SharedScalar};
use crate::contact::{ContactData, LocalGeometry, MetricField, Perturbed};
use crate::curvature::ricci_reeb_oracle;
use crate::{Error, Point, Result};

/// The pair `(λ, η)` of a deformation; `η > 0`.
#[derive(Clone)]
pub struct PerturbationField {
    pub lambda: SharedScalar,
    pub eta: SharedScalar,
}

impl PerturbationField {
    pub fn new(lambda: SharedScalar, eta: SharedScalar) -> Self {
        PerturbationField { lambda, eta }
    }

    pub fn identity() -> Self {
        Self::constant(0.0, 1.0)
    }

    pub fn constant(lambda: f64, eta: f64) -> Self {
        PerturbationField {
            lambda: Arc::new(ConstField(lambda)),
            eta: Arc::new(ConstField(eta)),
        }
    }

    pub fn from_exprs(lambda: Expr, eta: Expr) -> Self {
        PerturbationField {
            lambda: Arc::new(ExprField(lambda)),
            eta: Arc::new(ExprField(eta)),
        }
    }

    pub fn parse(lambda: &str, eta: &str) -> Result<Self> {
        Ok(Self::from_exprs(Expr::parse(lambda)?, Expr::parse(eta)?))
    }

    /// `μ = λ/η²`.
    pub fn mu(&self, p: &Point, order: usize) -> Result<Jet> {
        let eta = self.eta.taylor(p, order)?;
        Ok(self.lambda.taylor(p, order)? / (eta * eta))
    }
}

/// `A = dα([e,X],Je)/θ'`, `B = dα([e,X],e)/θ'`, `C = dα([Je,X],Je)/θ'` for the unit
/// section `e` of the structure, with the Reeb field, as jets of `order`.
#[derive(Debug, Clone, Copy)]
pub struct BracketCoefficients {
    pub a: Jet,
    pub b: Jet,
    pub c: Jet,
    pub reeb: JetVec,
}

pub fn bracket_coefficients(cd: &ContactData, p: &Point, order: usize) -> Result<BracketCoefficients> {
    let l = cd.local(p, order + 1)?;
    let ex = bracket_jets(&l.e, &l.reeb);
    let jex = bracket_jets(&l.je, &l.reeb);
    let om = truncate_mat(&l.omega, order);
    let e = truncate_vec(&l.e, order);
    let je = truncate_vec(&l.je, order);
    let k = 1.0 / cd.theta_prime;
    Ok(BracketCoefficients {
        a: bilinear(&om, &ex, &je) * k,
        b: bilinear(&om, &ex, &e) * k,
        c: bilinear(&om, &jex, &je) * k,
        reeb: truncate_vec(&l.reeb, order),
    })
}

/// `ContactData` with `J` replaced by `J_*`, validated on the domain grid.
///
/// Fails if `η ≤ 0` or the perturbed metric is not positive definite at a grid point.
pub fn perturb_complex_structure(cd: &ContactData, p: &PerturbationField) -> Result<ContactData> {
    let out = perturb_unchecked(cd, p);
    for q in cd.domain.sample_points() {
        let eta = p.eta.value(&q)?;
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParams(format!("eta = {eta} is not positive at {q:?}")));
        }
    }
    out.validate()?;
    Ok(out)
}

/// [`perturb_complex_structure`] without the grid sweep; errors surface on evaluation.
pub fn perturb_unchecked(cd: &ContactData, p: &PerturbationField) -> ContactData {
    let structure = Perturbed {
        base: cd.clone(),
        lambda: p.lambda.clone(),
        eta: p.eta.clone(),
    };
    cd.with_structure(format!("{}*", cd.name), Arc::new(structure))
}

/// `|e|_{g_*}` for the unit section `e` of the unperturbed structure; equals `η`.
pub fn perturbed_section_length(cd: &ContactData, perturbed: &ContactData, p: &Point) -> Result<f64> {
    let (e, _) = cd.unit_section(p, 0)?;
    let e = values_vec(&e);
    let g = perturbed.metric_value(p)?;
    Ok(bilinear(&g, &e, &e).sqrt())
}

/// Closed form of `Ricci_*(X)` for the deformed structure:
///
/// `−2(P_* + Xη/η)² + θ'²/2 − 2(Q_* − (λ/2η)Xη + (η/2)X(λ/η))²` with
/// `P_* = A + (λ/η²)B` and `Q_* = B/(2η²) − (η²/2)C − λA − (λ²/(2η²))B`.
pub fn ricci_perturbed_closed_form(cd: &ContactData, p: &PerturbationField, point: &Point) -> Result<f64> {
    let q = cd.wrap(point);
    let k = bracket_coefficients(cd, &q, 0)?;
    let x = values_vec(&k.reeb);
    let lambda = p.lambda.taylor(&q, 1)?;
    let eta = p.eta.taylor(&q, 1)?;
    let (l, n) = (lambda.value(), eta.value());
    if !(n > 0.0) {
        return Err(Error::InvalidParams(format!("eta = {n} is not positive at {q:?}")));
    }
    let x_eta = dot(&x, &eta.gradient());
    let x_ratio = dot(&x, &(lambda / eta).gradient());
    Ok(closed_form_values(
        cd.theta_prime,
        [k.a.value(), k.b.value(), k.c.value()],
        l,
        n,
        x_eta,
        x_ratio,
    ))
}

/// The closed form from coefficient values, `λ`, `η`, `Xη` and `X(λ/η)`.
pub fn closed_form_values(theta: f64, abc: [f64; 3], lambda: f64, eta: f64, x_eta: f64, x_ratio: f64) -> f64 {
    let [a, b, c] = abc;
    let e2 = eta * eta;
    let p_star = a + lambda / e2 * b;
    let q_star = b / (2.0 * e2) - 0.5 * e2 * c - lambda * a - lambda * lambda / (2.0 * e2) * b;
    let p_term = p_star + x_eta / eta;
    let q_term = q_star - lambda / (2.0 * eta) * x_eta + 0.5 * eta * x_ratio;
    -2.0 * p_term * p_term + 0.5 * theta * theta - 2.0 * q_term * q_term
}

/// `g_*` at a point from the base geometry (order 0) and values of `λ`, `η`.
pub fn perturbed_metric_value(l: &LocalGeometry, lambda: f64, eta: f64) -> [[f64; 3]; 3] {
    let e = values_vec(&l.e);
    let je = values_vec(&l.je);
    let x = values_vec(&l.reeb);
    let a = values_vec(&l.alpha);
    let om = values_mat(&l.omega);
    let je_star: [f64; 3] = std::array::from_fn(|i| eta * eta * je[i] + lambda * e[i]);
    let s = (l.theta_prime / bilinear(&om, &e, &je_star)).sqrt();
    let e1 = e.map(|v| s * v);
    let e2 = je_star.map(|v| s * v);
    let frame = from_columns([&e1, &e2, &x]);
    let image = from_columns([&e2, &e1.map(|v| -v), &[0.0; 3]]);
    let j = mat_mul(&image, &inverse(&frame));
    let oj = mat_mul(&om, &j);
    let mut g = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            g[r][c] = oj[r][c] / l.theta_prime + a[r] * a[c];
        }
    }
    symmetrize(&g)
}

/// `count` seeded smooth pairs `λ = a sin(2π(x + φ)) + b cos(2π(z + ψ))`,
/// `η = d + c cos(2π(y + χ))` with `|c| < d/2`, so `η > 0` everywhere.
pub fn random_perturbations(seed: u64, count: usize) -> Vec<PerturbationField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-0.5..0.5);
            let d: f64 = rng.gen_range(0.6..1.6);
            let c: f64 = rng.gen_range(-0.45..0.45) * d;
            let [phi, psi, chi]: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            PerturbationField::parse(
                &format!("{a}*sin(2*pi*(x + {phi})) + {b}*cos(2*pi*(z + {psi}))"),
                &format!("{d} + {c}*cos(2*pi*(y + {chi}))"),
            )
            .expect("generated expressions parse")
        })
        .collect()
}

/// Worst `|closed form − oracle|` of `Ricci_*(X)` over perturbations and points.
#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub perturbations: usize,
    pub points: usize,
    pub max_gap: f64,
    pub worst_point: Option<Point>,
    /// `max (Ricci_* − θ'²/2)` from the oracle.
    pub max_bound_excess: f64,
}

pub fn closed_form_agreement(cd: &ContactData, fields: &[PerturbationField], points: &[Point]) -> Result<AgreementReport> {
    let pairs: Vec<(usize, usize)> = (0..fields.len())
        .flat_map(|i| (0..points.len()).map(move |j| (i, j)))
        .collect();
    let gaps: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let g = perturb_unchecked(cd, &fields[i]);
            let oracle = ricci_reeb_oracle(&g, &points[j])?;
            let closed = ricci_perturbed_closed_form(cd, &fields[i], &points[j])?;
            Ok(((closed - oracle).abs(), oracle))
        })
        .collect::<Result<_>>()?;
    let th2 = 0.5 * cd.theta_prime * cd.theta_prime;
    let mut out = AgreementReport {
        perturbations: fields.len(),
        points: points.len(),
        max_gap: 0.0,
        worst_point: None,
        max_bound_excess: f64::NEG_INFINITY,
    };
    for (k, (gap, oracle)) in gaps.iter().enumerate() {
        if *gap > out.max_gap || out.worst_point.is_none() {
            out.max_gap = out.max_gap.max(*gap);
            out.worst_point = Some(points[pairs[k].1]);
        }
        out.max_bound_excess = out.max_bound_excess.max(oracle - th2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{model_manifold, ModelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(name: &str) -> ContactData {
        model_manifold(name, &ModelParams { grid: Some([6; 3]), ..Default::default() }).unwrap()
    }

    #[test]
    fn section_length_is_eta() {
        let cd = model("heisenberg_r3");
        let g = perturb_complex_structure(&cd, &PerturbationField::constant(0.4, 2.0)).unwrap();
        let l = perturbed_section_length(&cd, &g, &[0.3, 0.6, 0.2]).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
    }

    #[test]
    fn metric_value_matches_structure() {
        let cd = model("torus_xi_n");
        let pf = PerturbationField::parse("0.3*sin(2*pi*y)", "1 + 0.2*cos(2*pi*x)").unwrap();
        let g = perturb_unchecked(&cd, &pf);
        let p = [0.21, 0.37, 0.66];
        let l = cd.local(&p, 0).unwrap();
        let direct = perturbed_metric_value(&l, pf.lambda.value(&p).unwrap(), pf.eta.value(&p).unwrap());
        let via = g.metric_value(&p).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((direct[r][c] - via[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_lambda_keeps_torus_flat_ricci() {
        let cd = model("torus_xi_n");
        let g = perturb_complex_structure(&cd, &PerturbationField::constant(0.7, 1.0)).unwrap();
        for p in [[0.1, 0.2, 0.3], [0.8, 0.5, 0.05]] {
            assert!(ricci_reeb_oracle(&g, &p).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn closed_form_matches_oracle_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in ["torus_xi_n", "heisenberg_r3"] {
            let cd = model(name);
            for _ in 0..4 {
                let (a, b, c, d) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.3..0.3), rng.gen_range(0.5..1.5));
                let pf = PerturbationField::parse(
                    &format!("{a}*sin(2*pi*x) + {b}*z"),
                    &format!("{d} + {c}*cos(2*pi*y)"),
                )
                .unwrap();
                let g = perturb_complex_structure(&cd, &pf).unwrap();
                let p = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)];
                let closed = ricci_perturbed_closed_form(&cd, &pf, &p).unwrap();
                let oracle = ricci_reeb_oracle(&g, &p).unwrap();
                assert!((closed - oracle).abs() < 1e-6, "{name}: {closed} vs {oracle}");
            }
        }
    }

    #[test]
    fn nonpositive_eta_is_rejected() {
        let cd = model("heisenberg_r3");
        let pf = PerturbationField::parse("0", "x - 0.5").unwrap();
        assert!(matches!(perturb_complex_structure(&cd, &pf), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn seeded_suite_is_reproducible_and_agrees() {
        let a = random_perturbations(3, 4);
        let b = random_perturbations(3, 4);
        let p = [0.3, 0.3, 0.3];
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lambda.value(&p).unwrap(), y.lambda.value(&p).unwrap());
        }
        let cd = model("torus_xi_n");
        let r = closed_form_agreement(&cd, &a, &cd.domain.coarse_points(4)[..8]).unwrap();
        assert!(r.max_gap < 1e-6 && r.max_bound_excess < 1e-6);
    }

    #[test]
    fn torus_coefficients() {
        let cd = model("torus_xi_n");
        let k = bracket_coefficients(&cd, &[0.4, 0.1, 0.7], 0).unwrap();
        assert!(k.a.value().abs() < 1e-12 && k.b.value().abs() < 1e-12);
        assert!((k.c.value() + 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
