//! Field expressions in chart coordinates.
//!
//! Grammar of the infix form (whitespace insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 'x' | 'y' | 'z' | 'tau' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'tan' | 'exp' | 'log' | 'sqrt'
//! ```
//!
//! In JSON an expression is a number, a string in the infix form, or an
//! object `{"op": <name>, "args": [...]}` with `op` one of `add`, `sub`,
//! `mul`, `div`, `neg`, `pow`, `sin`, `cos`, `tan`, `exp`, `log`, `sqrt`,
//! `var` (`args: ["x"]`) or `const` (`args: [number]`). `add` and `mul`
//! accept any number of arguments.

use std::fmt;
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use super::jet::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid expression JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree over the chart coordinates `x`, `y`, `z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
    Call(Func, Arc<Expr>),
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }
    pub fn x() -> Expr {
        Expr::Var(0)
    }
    pub fn y() -> Expr {
        Expr::Var(1)
    }
    pub fn z() -> Expr {
        Expr::Var(2)
    }
    pub fn sin(self) -> Expr {
        Expr::Call(Func::Sin, Arc::new(self))
    }
    pub fn cos(self) -> Expr {
        Expr::Call(Func::Cos, Arc::new(self))
    }
    pub fn exp(self) -> Expr {
        Expr::Call(Func::Exp, Arc::new(self))
    }
    pub fn sqrt(self) -> Expr {
        Expr::Call(Func::Sqrt, Arc::new(self))
    }
    pub fn pow(self, p: f64) -> Expr {
        Expr::Pow(Arc::new(self), Arc::new(Expr::Const(p)))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    pub fn eval<T: Scalar>(&self, vars: &[T; 3]) -> T {
        match self {
            Expr::Const(v) => T::from_f64(*v),
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => {
                // skip work on structural zeros
                if a.is_zero() || b.is_zero() {
                    return T::from_f64(0.0);
                }
                match (a.as_ref(), b.as_ref()) {
                    (Expr::Const(k), _) => b.eval(vars).scale(*k),
                    (_, Expr::Const(k)) => a.eval(vars).scale(*k),
                    _ => a.eval(vars) * b.eval(vars),
                }
            }
            Expr::Div(a, b) => match b.as_ref() {
                Expr::Const(k) => a.eval(vars).scale(1.0 / *k),
                _ => a.eval(vars) / b.eval(vars),
            },
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                match b.as_ref() {
                    Expr::Const(p) if p.fract() == 0.0 && p.abs() <= 64.0 => base.powi(*p as i32),
                    Expr::Const(p) => base.powf(*p),
                    _ => (b.eval(vars) * base.ln()).exp(),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(vars);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.sin() / v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn from_json(v: &Value) -> Result<Expr, ExprError> {
        match v {
            Value::Number(n) => n
                .as_f64()
                .map(Expr::Const)
                .ok_or_else(|| ExprError::Json(format!("non-finite number {n}"))),
            Value::String(s) => Expr::parse(s),
            Value::Object(map) => {
                for k in map.keys() {
                    if k != "op" && k != "args" {
                        return Err(ExprError::Json(format!("unknown key `{k}`")));
                    }
                }
                let op = map
                    .get("op")
                    .and_then(Value::as_str)
                    .ok_or_else(|| ExprError::Json("missing string `op`".into()))?;
                let raw = map
                    .get("args")
                    .and_then(Value::as_array)
                    .ok_or_else(|| ExprError::Json("missing array `args`".into()))?;
                match op {
                    "const" => match raw.as_slice() {
                        [Value::Number(n)] => Ok(Expr::Const(n.as_f64().unwrap_or(f64::NAN))),
                        _ => Err(ExprError::Json("`const` takes one number".into())),
                    },
                    "var" => match raw.as_slice() {
                        [Value::String(s)] => var_index(s)
                            .map(Expr::Var)
                            .ok_or_else(|| ExprError::Json(format!("unknown variable `{s}`"))),
                        _ => Err(ExprError::Json("`var` takes one name".into())),
                    },
                    _ => {
                        let args = raw
                            .iter()
                            .map(Expr::from_json)
                            .collect::<Result<Vec<_>, _>>()?;
                        build_op(op, args)
                    }
                }
            }
            other => Err(ExprError::Json(format!("unsupported JSON value {other}"))),
        }
    }
}

fn build_op(op: &str, mut args: Vec<Expr>) -> Result<Expr, ExprError> {
    let arity = |n: usize, args: &Vec<Expr>| {
        if args.len() == n {
            Ok(())
        } else {
            Err(ExprError::Json(format!(
                "`{op}` takes {n} argument(s), got {}",
                args.len()
            )))
        }
    };
    let fold = |args: Vec<Expr>, f: fn(Arc<Expr>, Arc<Expr>) -> Expr| {
        let mut it = args.into_iter();
        let first = it
            .next()
            .ok_or_else(|| ExprError::Json(format!("`{op}` needs arguments")))?;
        Ok(it.fold(first, |acc, e| f(Arc::new(acc), Arc::new(e))))
    };
    match op {
        "add" => fold(args, Expr::Add),
        "mul" => fold(args, Expr::Mul),
        "sub" => {
            arity(2, &args)?;
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            Ok(Expr::Sub(Arc::new(a), Arc::new(b)))
        }
        "div" => {
            arity(2, &args)?;
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            Ok(Expr::Div(Arc::new(a), Arc::new(b)))
        }
        "pow" => {
            arity(2, &args)?;
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            Ok(Expr::Pow(Arc::new(a), Arc::new(b)))
        }
        "neg" => {
            arity(1, &args)?;
            Ok(Expr::Neg(Arc::new(args.pop().unwrap())))
        }
        name => match Func::from_name(name) {
            Some(f) => {
                arity(1, &args)?;
                Ok(Expr::Call(f, Arc::new(args.pop().unwrap())))
            }
            None => Err(ExprError::Json(format!("unknown op `{name}`"))),
        },
    }
}

fn var_index(s: &str) -> Option<usize> {
    match s {
        "x" => Some(0),
        "y" => Some(1),
        "z" | "tau" => Some(2),
        _ => None,
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Arc::new(lhs), Arc::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Arc::new(lhs), Arc::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(v) => Expr::Const(-v),
                e => Expr::Neg(Arc::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            if let (Expr::Const(b), Expr::Const(e)) = (&base, &exp) {
                return Ok(Expr::Const(b.powf(*e)));
            }
            return Ok(Expr::Pow(Arc::new(base), Arc::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if let Some(i) = var_index(name) {
                    return Ok(Expr::Var(i));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                match Func::from_name(name) {
                    Some(f) => {
                        self.expect(b'(')?;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        Ok(Expr::Call(f, Arc::new(arg)))
                    }
                    None => {
                        self.pos = start;
                        Err(self.err(&format!("unknown identifier `{name}`")))
                    }
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&bytes[start..i]).unwrap();
        let v: f64 = text.parse().map_err(|_| self.err("malformed number"))?;
        self.pos = i;
        Ok(Expr::Const(v))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => {
                if *v < 0.0 {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(i) => write!(f, "{}", ["x", "y", "z"][*i]),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Arc::new(self), Arc::new(rhs))
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Arc::new(self), Arc::new(Expr::Const(rhs)))
            }
        }
        impl std::ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Arc::new(Expr::Const(self)), Arc::new(rhs))
            }
        }
    };
}

expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Arc::new(self))
    }
}
