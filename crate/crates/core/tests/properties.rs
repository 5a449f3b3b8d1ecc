use std::sync::Arc;

use contact_ricci::chart::{bracket_jets, exterior_derivative_jets, ChartDomain, Components, Expr, Jet, JetVec, OneForm};
use contact_ricci::contact::{ContactData, FramePair};
use contact_ricci::curvature::sectional_oracle;
use contact_ricci::metric_space::ExprMetric;
use proptest::prelude::*;

/// `a + b x + c y z + d x² + k sin(2π(z + φ))`: polynomial plus one periodic mode.
fn component(c: &[f64; 6]) -> String {
    format!(
        "{} + {}*x + {}*y*z + {}*x^2 + {}*sin(2*pi*(z + {}))",
        c[0], c[1], c[2], c[3], c[4], c[5]
    )
}

fn field(c: &[[f64; 6]; 3], p: &[f64; 3], order: usize) -> JetVec {
    let seed = Jet::seed(*p, order);
    std::array::from_fn(|i| Expr::parse(&component(&c[i])).unwrap().eval(&seed))
}

fn coeffs() -> impl Strategy<Value = [[f64; 6]; 3]> {
    prop::array::uniform3(prop::array::uniform6(-1.0..1.0f64))
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0f64)
}

fn add(a: &JetVec, b: &JetVec) -> JetVec {
    std::array::from_fn(|i| a[i] + b[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bracket_is_antisymmetric(u in coeffs(), v in coeffs(), p in point()) {
        let (u, v) = (field(&u, &p, 2), field(&v, &p, 2));
        let s = add(&bracket_jets(&u, &v), &bracket_jets(&v, &u));
        for c in &s {
            prop_assert!(c.coeffs().iter().all(|x| x.abs() < 1e-12));
        }
        prop_assert!(bracket_jets(&u, &u).iter().all(|c| c.value() == 0.0));
    }

    #[test]
    fn bracket_satisfies_the_jacobi_identity(u in coeffs(), v in coeffs(), w in coeffs(), p in point()) {
        let (u, v, w) = (field(&u, &p, 2), field(&v, &p, 2), field(&w, &p, 2));
        let b = |a: &JetVec, c: &JetVec| bracket_jets(a, c);
        let s = add(&add(&b(&u, &b(&v, &w)), &b(&v, &b(&w, &u))), &b(&w, &b(&u, &v)));
        let scale = u.iter().chain(&v).chain(&w).map(|c| c.coeffs().iter().fold(0.0f64, |m, x| m.max(x.abs()))).fold(1.0, f64::max);
        for c in &s {
            prop_assert!(c.value().abs() < 1e-10 * scale.powi(3), "{}", c.value());
        }
    }

    #[test]
    fn d_squared_vanishes(w in coeffs(), f in prop::array::uniform6(-1.0..1.0f64), p in point()) {
        // d(df) = 0 on a scalar.
        let seed = Jet::seed(p, 3);
        let fj = Expr::parse(&component(&f)).unwrap().eval(&seed);
        let df: JetVec = std::array::from_fn(|i| fj.derivative(i));
        let ddf = exterior_derivative_jets(&df);
        prop_assert!(ddf.iter().flatten().all(|c| c.value().abs() < 1e-10));
        // The three-form of d(dω) on a one-form.
        let om = exterior_derivative_jets(&field(&w, &p, 2));
        let dd = om[1][2].derivative(0) + om[2][0].derivative(1) + om[0][1].derivative(2);
        prop_assert!(dd.value().abs() < 1e-10, "{}", dd.value());
    }

    #[test]
    fn sectional_curvature_is_independent_of_the_plane_basis(
        amp in prop::array::uniform3(-0.3..0.3f64),
        off in -0.2..0.2f64,
        u in prop::array::uniform3(-1.0..1.0f64),
        v in prop::array::uniform3(-1.0..1.0f64),
        m in prop::array::uniform4(-2.0..2.0f64),
        p in prop::array::uniform3(0.2..0.8f64),
    ) {
        let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let det = m[0] * m[3] - m[1] * m[2];
        prop_assume!(cross.iter().map(|c| c * c).sum::<f64>() > 1e-2 && det.abs() > 1e-1);
        let g = ExprMetric::parse(&[
            format!("1 + {}*sin(2*pi*y)", amp[0]),
            format!("{off}*cos(2*pi*z)"),
            "0".into(),
            format!("1 + {}*x^2", amp[1]),
            "0".into(),
            format!("1 + {}*cos(2*pi*x)", amp[2]),
        ]).unwrap();
        let a = std::array::from_fn(|i| m[0] * u[i] + m[1] * v[i]);
        let b = std::array::from_fn(|i| m[2] * u[i] + m[3] * v[i]);
        let k0 = sectional_oracle(&g, &p, &u, &v).unwrap();
        let k1 = sectional_oracle(&g, &p, &a, &b).unwrap();
        prop_assert!((k0 - k1).abs() <= 1e-8 * k0.abs().max(1.0), "{k0} vs {k1}");
    }

    #[test]
    fn reeb_field_follows_rescalings(
        a in -0.5..0.5f64,
        c in 0.3..3.0f64,
        s in prop::array::uniform3(0.5..2.0f64),
        p in prop::array::uniform3(0.2..0.8f64),
    ) {
        // α = dz + (−y + a sin 2πz) dx with e = ∂x − A∂z, Je = ∂y, written in the
        // coordinates x = s·x' and multiplied by c.
        let build = |s: [f64; 3], c: f64| {
            let (y, z) = (format!("({}*y)", s[1]), format!("({}*z)", s[2]));
            let big_a = format!("(-{y} + {a}*sin(2*pi*{z}))");
            let alpha = OneForm::parse([&format!("{c}*{}*{big_a}", s[0]), "0", &format!("{c}*{}", s[2])]).unwrap();
            let pair = FramePair {
                e: Arc::new(Components::parse([&format!("1/{}", s[0]), "0", &format!("-{big_a}/{}", s[2])]).unwrap()),
                je: Arc::new(Components::parse(["0", &format!("1/{}", s[1]), "0"]).unwrap()),
            };
            let dom = ChartDomain::new([[0.0, 2.0]; 3], [false; 3], [4; 3], 0.0).unwrap();
            ContactData::new("rescaled", alpha, 2.0 * c, Arc::new(pair), dom).unwrap()
        };
        let base = build([1.0; 3], 1.0).reeb(&[s[0] * p[0], s[1] * p[1], s[2] * p[2]]).unwrap();
        let moved = build(s, c).reeb(&p).unwrap();
        for i in 0..3 {
            let expect = base[i] / (s[i] * c);
            prop_assert!((moved[i] - expect).abs() < 1e-10 * (1.0 + expect.abs()), "{moved:?} vs {base:?}");
        }
    }
}
