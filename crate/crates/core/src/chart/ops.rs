//! Pointwise calculus on fields and quadrature over chart domains.

use std::io::Write;

use rayon::prelude::*;

use super::domain::ChartDomain;
use super::field::{OneForm, ScalarField, TwoForm, VectorField};
use super::jet::{Jet, JetMat, JetVec};
use crate::{Error, Point, Result};

/// A jet together with the backend's derivative error estimate.
#[derive(Debug, Clone, Copy)]
pub struct JetEval {
    pub jet: Jet,
    pub error: f64,
}

/// Value and partials (order ≤ 2) of `field` at `point`, after periodic wrap.
pub fn evaluate_jet(
    field: &dyn ScalarField,
    dom: &ChartDomain,
    point: &Point,
    order: usize,
) -> Result<JetEval> {
    if order > 2 {
        return Err(Error::UnsupportedOrder {
            requested: order,
            max: 2,
        });
    }
    let p = dom.wrap(point)?;
    let (jet, error) = field.taylor_with_error(&p, order)?;
    Ok(JetEval { jet, error })
}

/// `[u,v]^i = u^j ∂_j v^i − v^j ∂_j u^i` on jets; the result loses one order.
pub fn bracket_jets(u: &JetVec, v: &JetVec) -> JetVec {
    let mut out = [Jet::constant(0.0); 3];
    for i in 0..3 {
        let mut s = Jet::constant(0.0);
        for j in 0..3 {
            s += u[j] * v[i].derivative(j) - v[j] * u[i].derivative(j);
        }
        out[i] = s;
    }
    out
}

pub fn lie_bracket(u: &dyn VectorField, v: &dyn VectorField, point: &Point) -> Result<[f64; 3]> {
    let uj = u.taylor(point, 1)?;
    let vj = v.taylor(point, 1)?;
    let b = bracket_jets(&uj, &vj);
    Ok([b[0].value(), b[1].value(), b[2].value()])
}

/// `(dω)_ij = ∂_i ω_j − ∂_j ω_i` on jets; the result loses one order.
pub fn exterior_derivative_jets(w: &JetVec) -> JetMat {
    let zero = Jet::constant(0.0);
    let mut out = [[zero; 3]; 3];
    for i in 0..3 {
        for j in (i + 1)..3 {
            let d = w[j].derivative(i) - w[i].derivative(j);
            out[i][j] = d;
            out[j][i] = -d;
        }
    }
    out
}

pub fn exterior_derivative(w: &OneForm, point: &Point) -> Result<TwoForm> {
    let d = exterior_derivative_jets(&w.taylor(point, 1)?);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = d[i][j].value();
        }
    }
    Ok(TwoForm(m))
}

/// Default absolute agreement required between a grid and its doubling.
pub const QUADRATURE_TOL: f64 = 1e-6;

/// Midpoint rule over the interior grid of `dom`.
///
/// Samples are evaluated in parallel and summed sequentially so the result does not
/// depend on the thread count.
pub fn midpoint_sum<F>(dom: &ChartDomain, f: F) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    let pts = dom.sample_points();
    let vals: Vec<Result<f64>> = pts.par_iter().map(&f).collect();
    let mut s = 0.0;
    for (p, v) in pts.iter().zip(vals) {
        let v = v?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "density sample",
                point: *p,
            });
        }
        s += v;
    }
    Ok(s * dom.cell_volume())
}

/// Integral with the grid-doubling estimate it was checked against.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Quadrature {
    /// Value on the doubled grid.
    pub value: f64,
    /// Value on the configured grid.
    pub coarse: f64,
    pub tol: f64,
}

/// Midpoint integral of `ρ`; fails when doubling the grid moves the result by more
/// than `tol`.
pub fn integrate_density(rho: &dyn ScalarField, dom: &ChartDomain, tol: f64) -> Result<Quadrature> {
    let f = |p: &Point| rho.value(p);
    let value = midpoint_sum(dom, f)?;
    let fine = dom.with_grid([dom.grid[0] * 2, dom.grid[1] * 2, dom.grid[2] * 2]);
    let doubled = midpoint_sum(&fine, f)?;
    if (doubled - value).abs() > tol {
        return Err(Error::QuadratureNotConverged {
            coarse: value,
            fine: doubled,
            tol,
        });
    }
    Ok(Quadrature {
        value: doubled,
        coarse: value,
        tol,
    })
}

/// Write rows `x,y,z,values...` with a header; floats use round-trip formatting.
pub fn write_grid_csv<W: Write>(
    out: W,
    columns: &[&str],
    rows: impl IntoIterator<Item = (Point, Vec<f64>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x", "y", "z"];
    header.extend_from_slice(columns);
    w.write_record(&header)?;
    for (p, vals) in rows {
        let rec: Vec<String> = p.iter().chain(vals.iter()).map(|v| format!("{v:?}")).collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Components, ConstField, Expr, ExprField};
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_zero_partials() {
        let dom = ChartDomain::unit_periodic(8).unwrap();
        let j = evaluate_jet(&ConstField(3.5), &dom, &[0.3, 2.4, -0.1], 1).unwrap();
        assert_eq!(j.jet.gradient(), [0.0; 3]);
        assert_eq!(j.jet.value(), 3.5);
    }

    #[test]
    fn sine_derivative() {
        let dom = ChartDomain::unit_periodic(8).unwrap();
        let f = ExprField(Expr::parse("sin(2*pi*z)").unwrap());
        let j = evaluate_jet(&f, &dom, &[0.0; 3], 1).unwrap();
        assert!((j.jet.gradient()[2] - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn coordinate_bracket() {
        let u = Components::parse(["1", "0", "0"]).unwrap();
        let v = Components::parse(["0", "x", "0"]).unwrap();
        let b = lie_bracket(&u, &v, &[0.4, 0.1, 0.9]).unwrap();
        assert_eq!(b, [0.0, 1.0, 0.0]);
        assert_eq!(lie_bracket(&v, &v, &[0.4, 0.1, 0.9]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn quadrature_of_constant_and_sine_square() {
        let dom = ChartDomain::unit_periodic(8).unwrap();
        let q = integrate_density(&ConstField(2.5), &dom, QUADRATURE_TOL).unwrap();
        assert!((q.value - 2.5).abs() < 1e-12);
        let s = ExprField(Expr::parse("sin(2*pi*z)^2").unwrap());
        let q = integrate_density(&s, &dom, QUADRATURE_TOL).unwrap();
        assert!((q.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trips_floats() {
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &["v"], vec![([0.1, 0.2, 0.3], vec![1.0 / 3.0])]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let last = s.lines().nth(1).unwrap().split(',').next_back().unwrap();
        assert_eq!(last.parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
