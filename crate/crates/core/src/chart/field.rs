//! Scalar, vector and covector fields in chart coordinates.
//!
//! A field answers one question: its truncated Taylor expansion at a point. Expression
//! fields answer exactly at any order up to [`MAX_ORDER`]; closure fields answer by
//! central differences (order ≤ 2) with one Richardson level and flag disagreement
//! between the step `h` and `h/2` estimates.

use std::fmt;
use std::sync::Arc;

use super::expr::Expr;
use super::jet::{Jet, JetVec, Scalar, MAX_ORDER, NCOEF};
use crate::{Error, Result};

pub use crate::Point;

/// How a field produces derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    AnalyticJet,
    FiniteDifference,
}

impl Backend {
    pub fn combine(self, other: Backend) -> Backend {
        if self == Backend::AnalyticJet && other == Backend::AnalyticJet {
            Backend::AnalyticJet
        } else {
            Backend::FiniteDifference
        }
    }

    /// Highest derivative order the backend can supply.
    pub fn max_order(self) -> usize {
        match self {
            Backend::AnalyticJet => MAX_ORDER,
            Backend::FiniteDifference => 2,
        }
    }
}

pub trait ScalarField: Send + Sync {
    /// Taylor expansion at `at` in the displacement `x - at`.
    fn taylor(&self, at: &Point, order: usize) -> Result<Jet>;

    fn backend(&self) -> Backend {
        Backend::AnalyticJet
    }

    /// Expansion plus an estimate of its derivative error (zero for exact backends).
    fn taylor_with_error(&self, at: &Point, order: usize) -> Result<(Jet, f64)> {
        Ok((self.taylor(at, order)?, 0.0))
    }

    fn value(&self, at: &Point) -> Result<f64> {
        Ok(self.taylor(at, 0)?.value())
    }
}

pub trait VectorField: Send + Sync {
    fn taylor(&self, at: &Point, order: usize) -> Result<JetVec>;

    fn backend(&self) -> Backend {
        Backend::AnalyticJet
    }

    fn value(&self, at: &Point) -> Result<[f64; 3]> {
        let v = self.taylor(at, 0)?;
        Ok([v[0].value(), v[1].value(), v[2].value()])
    }
}

pub type SharedScalar = Arc<dyn ScalarField>;
pub type SharedVector = Arc<dyn VectorField>;

/// Scalar field given by an expression; derivatives are exact.
#[derive(Clone)]
pub struct ExprField(pub Expr);

impl ScalarField for ExprField {
    fn taylor(&self, at: &Point, order: usize) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                requested: order,
                max: MAX_ORDER,
            });
        }
        let j = self.0.eval(&Jet::seed(*at, order));
        if !j.coeffs().iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite {
                what: "field expansion",
                point: *at,
            });
        }
        Ok(j)
    }
}

impl fmt::Debug for ExprField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExprField({})", self.0)
    }
}

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-4;
/// Default relative agreement required between the `h` and `h/2` estimates.
pub const FD_RICHARDSON_TOL: f64 = 1e-5;

type PointFn = dyn Fn(&Point) -> f64 + Send + Sync;

/// Scalar field given by an opaque closure; derivatives by central differences.
#[derive(Clone)]
pub struct FdField {
    f: Arc<PointFn>,
    pub step: f64,
    pub richardson_tol: f64,
}

impl FdField {
    pub fn new(f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        FdField {
            f: Arc::new(f),
            step: FD_STEP,
            richardson_tol: FD_RICHARDSON_TOL,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.richardson_tol = tol;
        self
    }

    /// Expansion together with the worst Richardson error estimate.
    pub fn taylor_with_error(&self, at: &Point, order: usize) -> Result<(Jet, f64)> {
        fd_taylor(&*self.f, at, order, self.step, self.richardson_tol)
    }
}

impl fmt::Debug for FdField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FdField(h = {})", self.step)
    }
}

impl ScalarField for FdField {
    fn taylor(&self, at: &Point, order: usize) -> Result<Jet> {
        Ok(self.taylor_with_error(at, order)?.0)
    }

    fn backend(&self) -> Backend {
        Backend::FiniteDifference
    }

    fn taylor_with_error(&self, at: &Point, order: usize) -> Result<(Jet, f64)> {
        FdField::taylor_with_error(self, at, order)
    }
}

fn shifted(p: &Point, d: [f64; 3]) -> Point {
    [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
}

fn unit(i: usize, h: f64) -> [f64; 3] {
    let mut d = [0.0; 3];
    d[i] = h;
    d
}

/// Central-difference Taylor expansion of order ≤ 2 with one Richardson level.
///
/// Returns the expansion and the largest `|D(h) - D(h/2)|` seen; errors when that
/// exceeds `tol · (1 + |D|)`.
pub fn fd_taylor(
    f: &(dyn Fn(&Point) -> f64 + Send + Sync),
    at: &Point,
    order: usize,
    h: f64,
    tol: f64,
) -> Result<(Jet, f64)> {
    if order > 2 {
        return Err(Error::UnsupportedOrder {
            requested: order,
            max: 2,
        });
    }
    let f0 = f(at);
    if !f0.is_finite() {
        return Err(Error::NonFinite {
            what: "field value",
            point: *at,
        });
    }
    let mut coeffs = [0.0; 10];
    coeffs[0] = f0;
    let mut worst = 0.0f64;
    let mut accept = |coarse: f64, fine: f64| -> Result<f64> {
        let est = (fine - coarse).abs();
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        if !extrapolated.is_finite() {
            return Err(Error::NonFinite {
                what: "finite difference",
                point: *at,
            });
        }
        if est > tol * (1.0 + extrapolated.abs()) {
            return Err(Error::FdDisagreement {
                point: *at,
                estimate: est,
                tol,
            });
        }
        worst = worst.max(est);
        Ok(extrapolated)
    };
    if order >= 1 {
        for i in 0..3 {
            let d1 = |s: f64| (f(&shifted(at, unit(i, s))) - f(&shifted(at, unit(i, -s)))) / (2.0 * s);
            coeffs[1 + i] = accept(d1(h), d1(h / 2.0))?;
        }
    }
    if order >= 2 {
        for i in 0..3 {
            for j in i..3 {
                let d2 = |s: f64| {
                    if i == j {
                        (f(&shifted(at, unit(i, s))) - 2.0 * f0 + f(&shifted(at, unit(i, -s))))
                            / (s * s)
                    } else {
                        let mut pp = unit(i, s);
                        pp[j] = s;
                        let mut pm = unit(i, s);
                        pm[j] = -s;
                        let mut mp = unit(i, -s);
                        mp[j] = s;
                        let mut mm = unit(i, -s);
                        mm[j] = -s;
                        (f(&shifted(at, pp)) - f(&shifted(at, pm)) - f(&shifted(at, mp))
                            + f(&shifted(at, mm)))
                            / (4.0 * s * s)
                    }
                };
                // second derivatives need a wider step to stay above roundoff
                let s = h * 10.0;
                let d = accept(d2(s), d2(s / 2.0))?;
                let mut e = [0u8; 3];
                e[i] += 1;
                e[j] += 1;
                let scale = if i == j { 0.5 } else { 1.0 };
                coeffs[super::jet::monomial_index(e)] = d * scale;
            }
        }
    }
    Ok((Jet::from_coeffs(&coeffs[..NCOEF[order]], order), worst))
}

/// Three scalar components (a vector field or a one-form).
#[derive(Clone)]
pub struct Components(pub [SharedScalar; 3]);

impl Components {
    pub fn from_exprs(e: [Expr; 3]) -> Self {
        let [a, b, c] = e;
        Components([
            Arc::new(ExprField(a)),
            Arc::new(ExprField(b)),
            Arc::new(ExprField(c)),
        ])
    }

    pub fn parse(src: [&str; 3]) -> Result<Self> {
        Ok(Components::from_exprs([
            Expr::parse(src[0])?,
            Expr::parse(src[1])?,
            Expr::parse(src[2])?,
        ]))
    }

    pub fn from_closures(
        f: [Arc<dyn Fn(&Point) -> f64 + Send + Sync>; 3],
    ) -> Self {
        let [a, b, c] = f;
        Components([
            Arc::new(FdField {
                f: a,
                step: FD_STEP,
                richardson_tol: FD_RICHARDSON_TOL,
            }),
            Arc::new(FdField {
                f: b,
                step: FD_STEP,
                richardson_tol: FD_RICHARDSON_TOL,
            }),
            Arc::new(FdField {
                f: c,
                step: FD_STEP,
                richardson_tol: FD_RICHARDSON_TOL,
            }),
        ])
    }
}

impl VectorField for Components {
    fn taylor(&self, at: &Point, order: usize) -> Result<JetVec> {
        Ok([
            self.0[0].taylor(at, order)?,
            self.0[1].taylor(at, order)?,
            self.0[2].taylor(at, order)?,
        ])
    }

    fn backend(&self) -> Backend {
        self.0
            .iter()
            .fold(Backend::AnalyticJet, |b, c| b.combine(c.backend()))
    }
}

/// A one-form stored by its components `ω = ω_i dx^i`.
#[derive(Clone)]
pub struct OneForm(pub SharedVector);

impl OneForm {
    pub fn new(components: impl VectorField + 'static) -> Self {
        OneForm(Arc::new(components))
    }

    pub fn parse(src: [&str; 3]) -> Result<Self> {
        Ok(OneForm::new(Components::parse(src)?))
    }

    pub fn taylor(&self, at: &Point, order: usize) -> Result<JetVec> {
        self.0.taylor(at, order)
    }

    pub fn backend(&self) -> Backend {
        self.0.backend()
    }
}

/// Value of a two-form at a point, `Ω_ij = Ω(∂_i, ∂_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoForm(pub [[f64; 3]; 3]);

impl TwoForm {
    pub fn apply(&self, u: &[f64; 3], v: &[f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * u[i] * v[j];
            }
        }
        s
    }

    /// Largest `|Ω_ij + Ω_ji|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((self.0[i][j] + self.0[j][i]).abs());
            }
        }
        m
    }
}

/// Constant scalar field.
#[derive(Debug, Clone, Copy)]
pub struct ConstField(pub f64);

impl ScalarField for ConstField {
    fn taylor(&self, _at: &Point, order: usize) -> Result<Jet> {
        Ok(Jet::constant(self.0).truncate(order))
    }
}

/// Evaluate an expression-defined generic formula on plain numbers.
pub fn eval_f64(e: &Expr, p: &Point) -> f64 {
    e.eval::<f64>(p)
}

/// `v ↦ v.value()` on three components.
pub fn values<T: Scalar>(v: &[T; 3]) -> [f64; 3] {
    [v[0].value(), v[1].value(), v[2].value()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_matches_analytic_on_smooth_field() {
        let e = Expr::parse("exp(x)*y^2 + sin(z)*x").unwrap();
        let exact = ExprField(e.clone()).taylor(&[0.2, -0.7, 0.4], 2).unwrap();
        let fd = FdField::new(move |p| eval_f64(&e, p))
            .taylor(&[0.2, -0.7, 0.4], 2)
            .unwrap();
        for (a, b) in exact.coeffs().iter().zip(fd.coeffs()) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn fd_rejects_high_order_and_flags_noise() {
        let f = FdField::new(|p| p[0]);
        assert!(matches!(
            f.taylor(&[0.0; 3], 3),
            Err(Error::UnsupportedOrder { .. })
        ));
        // a kink at the evaluation point makes h and h/2 disagree
        let kink = FdField::new(|p| (p[0] - 3e-5).abs());
        assert!(matches!(
            kink.taylor(&[0.0; 3], 1),
            Err(Error::FdDisagreement { .. })
        ));
    }
}
