//! Truncated multivariate Taylor polynomials in three variables.
//!
//! A [`Jet`] stores the Taylor coefficients `c_a = (d^a f)(p) / a!` of a
//! function around a base point `p`, for every multi-index `a` of total
//! degree up to the jet's order (at most [`MAX_ORDER`]). Arithmetic and the
//! elementary functions propagate the expansion exactly, so derivatives of
//! composite expressions come out without truncation error.
//!
//! Jets of different orders may be combined; the result carries the smaller
//! order. Constants are exact to every order and never limit the result.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Highest total degree a jet can carry.
pub const MAX_ORDER: usize = 4;
/// Number of independent variables.
pub const NVARS: usize = 3;
/// Coefficient count for each truncation order.
pub const NCOEF: [usize; MAX_ORDER + 1] = [1, 4, 10, 20, 35];
const CAP: usize = 35;

struct Tables {
    exps: Vec<[u8; 3]>,
    lookup: [[[u8; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1],
    mul_pairs: Vec<Vec<(u8, u8, u8)>>,
    // (source, target, factor) for d/dx_v, listed per variable
    deriv: Vec<Vec<(u8, u8, f64)>>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exps = Vec::with_capacity(CAP);
        for deg in 0..=MAX_ORDER {
            // graded, then lexicographically decreasing in x
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    let c = deg - a - b;
                    exps.push([a as u8, b as u8, c as u8]);
                }
            }
        }
        debug_assert_eq!(exps.len(), CAP);
        let mut lookup = [[[u8::MAX; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1];
        for (i, e) in exps.iter().enumerate() {
            lookup[e[0] as usize][e[1] as usize][e[2] as usize] = i as u8;
        }
        let degree = |e: &[u8; 3]| (e[0] + e[1] + e[2]) as usize;
        let mut mul_pairs = Vec::with_capacity(MAX_ORDER + 1);
        for order in 0..=MAX_ORDER {
            let mut pairs = Vec::new();
            for (i, a) in exps.iter().enumerate() {
                for (j, b) in exps.iter().enumerate() {
                    if degree(a) + degree(b) <= order {
                        let k = lookup[(a[0] + b[0]) as usize][(a[1] + b[1]) as usize]
                            [(a[2] + b[2]) as usize];
                        pairs.push((i as u8, j as u8, k));
                    }
                }
            }
            mul_pairs.push(pairs);
        }
        let mut deriv = Vec::with_capacity(NVARS);
        for v in 0..NVARS {
            let mut list = Vec::new();
            for (i, e) in exps.iter().enumerate() {
                if e[v] > 0 {
                    let mut t = *e;
                    t[v] -= 1;
                    let k = lookup[t[0] as usize][t[1] as usize][t[2] as usize];
                    list.push((i as u8, k, e[v] as f64));
                }
            }
            deriv.push(list);
        }
        Tables {
            exps,
            lookup,
            mul_pairs,
            deriv,
        }
    })
}

/// Multi-index exponents of coefficient `i`.
pub fn exponents(i: usize) -> [u8; 3] {
    tables().exps[i]
}

/// Coefficient index of the monomial with exponents `e`.
pub fn monomial_index(e: [u8; 3]) -> usize {
    assert!(
        (e[0] + e[1] + e[2]) as usize <= MAX_ORDER,
        "monomial degree exceeds MAX_ORDER"
    );
    tables().lookup[e[0] as usize][e[1] as usize][e[2] as usize] as usize
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).product::<u32>() as f64
}

/// Truncated Taylor expansion in three variables.
#[derive(Clone, Copy)]
pub struct Jet {
    c: [f64; CAP],
    order: u8,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("coeffs", &&self.c[..self.len()])
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        let n = self.len().min(other.len());
        self.c[..n] == other.c[..n]
    }
}

impl Jet {
    /// Exact constant (valid to every order).
    pub fn constant(value: f64) -> Self {
        let mut c = [0.0; CAP];
        c[0] = value;
        Jet {
            c,
            order: MAX_ORDER as u8,
        }
    }

    pub fn zero(order: usize) -> Self {
        assert!(order <= MAX_ORDER);
        Jet {
            c: [0.0; CAP],
            order: order as u8,
        }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(var: usize, value: f64, order: usize) -> Self {
        let mut j = Jet::zero(order);
        j.c[0] = value;
        if order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    /// Identity jets of the three coordinates at `p`.
    pub fn seed(p: [f64; 3], order: usize) -> [Jet; 3] {
        [
            Jet::variable(0, p[0], order),
            Jet::variable(1, p[1], order),
            Jet::variable(2, p[2], order),
        ]
    }

    /// Build from raw Taylor coefficients (missing entries are zero).
    pub fn from_coeffs(coeffs: &[f64], order: usize) -> Self {
        assert!(order <= MAX_ORDER && coeffs.len() <= NCOEF[order]);
        let mut j = Jet::zero(order);
        j.c[..coeffs.len()].copy_from_slice(coeffs);
        j
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    #[inline]
    fn len(&self) -> usize {
        NCOEF[self.order as usize]
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.len()]
    }

    /// Taylor coefficient of the monomial with exponents `e` (zero above the order).
    pub fn coeff(&self, e: [u8; 3]) -> f64 {
        if (e[0] + e[1] + e[2]) as usize > self.order() {
            return 0.0;
        }
        self.c[monomial_index(e)]
    }

    pub fn set_coeff(&mut self, e: [u8; 3], v: f64) {
        assert!((e[0] + e[1] + e[2]) as usize <= self.order());
        self.c[monomial_index(e)] = v;
    }

    /// Mixed partial derivative `d^e f` at the base point.
    pub fn partial(&self, e: [u8; 3]) -> f64 {
        self.coeff(e) * factorial(e[0]) * factorial(e[1]) * factorial(e[2])
    }

    pub fn gradient(&self) -> [f64; 3] {
        [
            self.coeff([1, 0, 0]),
            self.coeff([0, 1, 0]),
            self.coeff([0, 0, 1]),
        ]
    }

    pub fn hessian(&self) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut e = [0u8; 3];
                e[i] += 1;
                e[j] += 1;
                h[i][j] = self.partial(e);
            }
        }
        h
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order());
        let mut j = Jet::zero(order);
        j.c[..NCOEF[order]].copy_from_slice(&self.c[..NCOEF[order]]);
        j
    }

    /// Same expansion with the constant term removed.
    pub fn nilpotent(&self) -> Jet {
        let mut j = *self;
        j.c[0] = 0.0;
        j
    }

    /// Partial derivative with respect to `var`; the order drops by one.
    pub fn derivative(&self, var: usize) -> Jet {
        if self.order == 0 {
            return Jet::zero(0);
        }
        let order = self.order() - 1;
        let mut out = Jet::zero(order);
        let n = NCOEF[self.order()];
        for &(src, dst, f) in &tables().deriv[var] {
            if (src as usize) < n {
                out.c[dst as usize] += f * self.c[src as usize];
            }
        }
        out
    }

    /// Antiderivative in `var` vanishing on `x_var = base`; the order rises by one
    /// (capped at [`MAX_ORDER`], where the top degree is dropped).
    pub fn integrate(&self, var: usize) -> Jet {
        let order = (self.order() + 1).min(MAX_ORDER);
        let mut out = Jet::zero(order);
        for i in 0..self.len() {
            let mut e = exponents(i);
            if (e[0] + e[1] + e[2]) as usize + 1 > order {
                continue;
            }
            e[var] += 1;
            out.c[monomial_index(e)] = self.c[i] / e[var] as f64;
        }
        out
    }

    /// Multiply every coefficient by `scale^(exponent of var)`.
    pub fn scale_var(&self, var: usize, scale: f64) -> Jet {
        let mut out = *self;
        for i in 1..self.len() {
            let p = exponents(i)[var];
            if p > 0 {
                out.c[i] *= scale.powi(p as i32);
            }
        }
        out
    }

    fn mul_jet(&self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order) as usize;
        let mut out = Jet::zero(order);
        if order == 0 {
            out.c[0] = self.c[0] * rhs.c[0];
            return out;
        }
        for &(i, j, k) in &tables().mul_pairs[order] {
            out.c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        out
    }

    /// `f(self)` given `derivs[n] = f^(n)(self.value())` for `n = 0..=order`.
    pub fn compose_univariate(&self, derivs: &[f64]) -> Jet {
        let order = self.order();
        assert!(derivs.len() > order);
        let mut out = Jet::zero(order);
        out.c[0] = derivs[0];
        if order == 0 {
            return out;
        }
        let h = self.nilpotent();
        let mut power = h;
        let mut fact = 1.0;
        for (n, d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            fact *= n as f64;
            let w = d / fact;
            if w != 0.0 {
                for k in 1..out.len() {
                    out.c[k] += w * power.c[k];
                }
            }
            if n < order {
                power = power.mul_jet(&h);
            }
        }
        out
    }

    /// Substitute nilpotent jets (zero constant term) for the three variables.
    ///
    /// `self` is read as a polynomial in the displacement from its base point.
    pub fn compose(&self, args: &[Jet; 3]) -> Jet {
        let order = args
            .iter()
            .map(|a| a.order())
            .min()
            .unwrap()
            .min(self.order());
        let mut out = Jet::zero(order);
        out.c[0] = self.c[0];
        if order == 0 {
            return out;
        }
        let mut powers: [[Jet; MAX_ORDER + 1]; 3] = [[Jet::constant(1.0); MAX_ORDER + 1]; 3];
        for v in 0..3 {
            let a = args[v].truncate(order).nilpotent();
            for p in 1..=order {
                powers[v][p] = if p == 1 { a } else { powers[v][p - 1].mul_jet(&a) };
            }
        }
        for i in 1..NCOEF[order] {
            let w = self.c[i];
            if w == 0.0 {
                continue;
            }
            let e = exponents(i);
            let mut term = powers[0][e[0] as usize];
            if e[1] > 0 {
                term = term.mul_jet(&powers[1][e[1] as usize]);
            }
            if e[2] > 0 {
                term = term.mul_jet(&powers[2][e[2] as usize]);
            }
            for k in 1..out.len() {
                out.c[k] += w * term.c[k];
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let x = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        let mut v = 1.0 / x;
        for (n, slot) in d.iter_mut().enumerate() {
            *slot = v;
            v *= -((n + 1) as f64) / x;
        }
        self.compose_univariate(&d)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.compose_univariate(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.compose_univariate(&[c, -s, -c, s, c])
    }

    pub fn exp(&self) -> Jet {
        let e = self.c[0].exp();
        self.compose_univariate(&[e; MAX_ORDER + 1])
    }

    pub fn ln(&self) -> Jet {
        let x = self.c[0];
        let mut d = [x.ln(), 0.0, 0.0, 0.0, 0.0];
        let mut v = 1.0 / x;
        for (n, slot) in d.iter_mut().enumerate().skip(1) {
            *slot = v;
            v *= -(n as f64) / x;
        }
        self.compose_univariate(&d)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let x = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        let mut coef = 1.0;
        for (n, slot) in d.iter_mut().enumerate() {
            *slot = coef * x.powf(p - n as f64);
            coef *= p - n as f64;
        }
        self.compose_univariate(&d)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = Jet::constant(1.0);
        let mut base = *self;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul_jet(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul_jet(&base);
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet::zero(order as usize);
        for k in 0..out.len() {
            out.c[k] = self.c[k] + rhs.c[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet::zero(order as usize);
        for k in 0..out.len() {
            out.c[k] = self.c[k] - rhs.c[k];
        }
        out
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut out = self;
        for k in 0..out.len() {
            out.c[k] = -out.c[k];
        }
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for k in 0..self.len() {
            self.c[k] *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

/// Numbers the geometric formulas are generic over: plain `f64` or [`Jet`].
pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn recip(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

impl Scalar for Jet {
    fn from_f64(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn sin(self) -> Self {
        Jet::sin(&self)
    }
    fn cos(self) -> Self {
        Jet::cos(&self)
    }
    fn exp(self) -> Self {
        Jet::exp(&self)
    }
    fn ln(self) -> Self {
        Jet::ln(&self)
    }
    fn sqrt(self) -> Self {
        Jet::sqrt(&self)
    }
    fn recip(self) -> Self {
        Jet::recip(&self)
    }
    fn powi(self, n: i32) -> Self {
        Jet::powi(&self, n)
    }
    fn powf(self, p: f64) -> Self {
        Jet::powf(&self, p)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

pub type JetVec = [Jet; 3];
pub type JetMat = [[Jet; 3]; 3];

/// Partial derivative of each component.
pub fn vec_derivative(v: &JetVec, var: usize) -> JetVec {
    [
        v[0].derivative(var),
        v[1].derivative(var),
        v[2].derivative(var),
    ]
}

pub fn vec_values(v: &JetVec) -> [f64; 3] {
    [v[0].value(), v[1].value(), v[2].value()]
}

pub fn vec_truncate(v: &JetVec, order: usize) -> JetVec {
    [v[0].truncate(order), v[1].truncate(order), v[2].truncate(order)]
}

/// Re-expand a jet given at base `b` around the moving point `pos`
/// (a jet-valued position whose constant part is `b`).
pub fn vec_compose(v: &JetVec, displacement: &JetVec) -> JetVec {
    [
        v[0].compose(displacement),
        v[1].compose(displacement),
        v[2].compose(displacement),
    ]
}
