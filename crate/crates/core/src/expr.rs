//! Scalar coefficient functions of the base coordinates.
//!
//! A [`ScalarExpr`] is an immutable expression tree over the chart
//! coordinates `x1 … xm`. Subtrees are reference counted, so cloning is cheap
//! and the same expression can be shared freely between tensor entries and
//! threads.
//!
//! Variables are 0-based internally (`Var(0)` is `x1`); the text syntax is
//! 1-based.

use std::collections::HashMap;
use std::fmt;
use std::ops;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

/// Elementary functions available in the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// 0-based coordinate index.
    Var(usize),
    Add(ScalarExpr, ScalarExpr),
    Sub(ScalarExpr, ScalarExpr),
    Mul(ScalarExpr, ScalarExpr),
    Div(ScalarExpr, ScalarExpr),
    Pow(ScalarExpr, u32),
    Neg(ScalarExpr),
    Call(Func, ScalarExpr),
}

/// Immutable expression tree for one smooth function of the base coordinates.
///
/// Equality is structural. The arithmetic operators (`+`, `-`, `*`, `/`) and
/// the named constructors fold constants and drop additive zeros and
/// multiplicative ones; [`ScalarExpr::from_node`] builds a node verbatim.
#[derive(Clone, PartialEq)]
pub struct ScalarExpr(Arc<Node>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("variable x{var} is not defined at a point of dimension {dim}", var = .index + 1)]
    MissingCoordinate { index: usize, dim: usize },
}

/// A point of the base chart, given by its coordinates `x^λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint(pub Vec<f64>);

impl BasePoint {
    pub fn new(coords: Vec<f64>) -> Self {
        BasePoint(coords)
    }

    pub fn origin(m: usize) -> Self {
        BasePoint(vec![0.0; m])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// The point moved by `delta` along coordinate axis `axis`.
    pub fn shifted(&self, axis: usize, delta: f64) -> BasePoint {
        let mut c = self.0.clone();
        c[axis] += delta;
        BasePoint(c)
    }
}

impl From<Vec<f64>> for BasePoint {
    fn from(v: Vec<f64>) -> Self {
        BasePoint(v)
    }
}

impl From<&[f64]> for BasePoint {
    fn from(v: &[f64]) -> Self {
        BasePoint(v.to_vec())
    }
}

impl fmt::Display for BasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

impl ScalarExpr {
    pub fn from_node(node: Node) -> Self {
        ScalarExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    /// Shares one allocation, so dense zero-filled tensors stay cheap.
    pub fn zero() -> Self {
        static ZERO: OnceLock<ScalarExpr> = OnceLock::new();
        ZERO.get_or_init(|| Self::constant(0.0)).clone()
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// The coordinate function `x_{index+1}`.
    pub fn var(index: usize) -> Self {
        Self::from_node(Node::Var(index))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn powi(&self, exp: u32) -> Self {
        match exp {
            0 => Self::one(),
            1 => self.clone(),
            _ => match self.as_const() {
                Some(c) => Self::constant(c.powi(exp as i32)),
                None => Self::from_node(Node::Pow(self.clone(), exp)),
            },
        }
    }

    pub fn call(func: Func, arg: ScalarExpr) -> Self {
        match arg.as_const() {
            Some(c) => Self::constant(func.apply(c)),
            None => Self::from_node(Node::Call(func, arg)),
        }
    }

    pub fn sin(&self) -> Self {
        Self::call(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Self {
        Self::call(Func::Cos, self.clone())
    }

    pub fn exp(&self) -> Self {
        Self::call(Func::Exp, self.clone())
    }

    /// Scales by a real factor.
    pub fn scale(&self, factor: f64) -> Self {
        Self::constant(factor) * self
    }

    /// Largest variable index used plus one, i.e. the smallest base
    /// dimension this expression is valid over.
    pub fn min_dim(&self) -> usize {
        match self.node() {
            Node::Const(_) => 0,
            Node::Var(k) => k + 1,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.min_dim().max(b.min_dim())
            }
            Node::Pow(a, _) | Node::Neg(a) | Node::Call(_, a) => a.min_dim(),
        }
    }

    pub fn depends_on(&self, axis: usize) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(k) => *k == axis,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.depends_on(axis) || b.depends_on(axis)
            }
            Node::Pow(a, _) | Node::Neg(a) | Node::Call(_, a) => a.depends_on(axis),
        }
    }

    pub fn eval(&self, p: &BasePoint) -> Result<f64, EvalError> {
        self.eval_at(p.coords())
    }

    pub fn eval_at(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(match self.node() {
            Node::Const(c) => *c,
            Node::Var(k) => *x.get(*k).ok_or(EvalError::MissingCoordinate {
                index: *k,
                dim: x.len(),
            })?,
            Node::Add(a, b) => a.eval_at(x)? + b.eval_at(x)?,
            Node::Sub(a, b) => a.eval_at(x)? - b.eval_at(x)?,
            Node::Mul(a, b) => a.eval_at(x)? * b.eval_at(x)?,
            Node::Div(a, b) => {
                let num = a.eval_at(x)?;
                let den = b.eval_at(x)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Node::Pow(a, e) => a.eval_at(x)?.powi(*e as i32),
            Node::Neg(a) => -a.eval_at(x)?,
            Node::Call(f, a) => f.apply(a.eval_at(x)?),
        })
    }

    /// Exact partial derivative along coordinate `axis` (0-based).
    pub fn diff(&self, axis: usize) -> ScalarExpr {
        match self.node() {
            Node::Const(_) => Self::zero(),
            Node::Var(k) => {
                if *k == axis {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Node::Add(a, b) => a.diff(axis) + b.diff(axis),
            Node::Sub(a, b) => a.diff(axis) - b.diff(axis),
            Node::Mul(a, b) => a.diff(axis) * b + a * b.diff(axis),
            Node::Div(a, b) => {
                let num = a.diff(axis) * b - a * b.diff(axis);
                num / b.powi(2)
            }
            Node::Pow(a, e) => Self::constant(*e as f64) * a.powi(e - 1) * a.diff(axis),
            Node::Neg(a) => -a.diff(axis),
            Node::Call(f, a) => {
                let outer = match f {
                    Func::Sin => a.cos(),
                    Func::Cos => -a.sin(),
                    Func::Exp => a.exp(),
                };
                outer * a.diff(axis)
            }
        }
    }

    /// Central difference `(e(p + h e_k) - e(p - h e_k)) / 2h`.
    pub fn diff_numeric(&self, axis: usize, p: &BasePoint, h: f64) -> Result<f64, EvalError> {
        if axis >= p.dim() {
            return Err(EvalError::MissingCoordinate {
                index: axis,
                dim: p.dim(),
            });
        }
        let fwd = self.eval(&p.shifted(axis, h))?;
        let bwd = self.eval(&p.shifted(axis, -h))?;
        Ok((fwd - bwd) / (2.0 * h))
    }

    /// Renders the expression in the input syntax. Parsing the result yields
    /// a structurally equal tree for every tree the parser can produce.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_prec(&mut out, 0);
        out
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Const(c) if c.is_sign_negative() => 3,
            Node::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_prec(&self, out: &mut String, min_prec: u8) {
        let prec = self.precedence();
        let wrap = prec < min_prec;
        if wrap {
            out.push('(');
        }
        match self.node() {
            Node::Const(c) => {
                if c.is_sign_negative() {
                    out.push('-');
                }
                write_number(out, c.abs());
            }
            Node::Var(k) => {
                out.push('x');
                out.push_str(&(k + 1).to_string());
            }
            Node::Add(a, b) => binary(out, a, " + ", b, 1),
            Node::Sub(a, b) => binary(out, a, " - ", b, 1),
            Node::Mul(a, b) => binary(out, a, "*", b, 2),
            Node::Div(a, b) => binary(out, a, "/", b, 2),
            Node::Pow(a, e) => {
                a.write_prec(out, 5);
                out.push('^');
                out.push_str(&e.to_string());
            }
            Node::Neg(a) => {
                out.push('-');
                a.write_prec(out, 3);
            }
            Node::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write_prec(out, 0);
                out.push(')');
            }
        }
        if wrap {
            out.push(')');
        }
    }
}

fn binary(out: &mut String, a: &ScalarExpr, op: &str, b: &ScalarExpr, prec: u8) {
    a.write_prec(out, prec);
    out.push_str(op);
    b.write_prec(out, prec + 1);
}

// `Display` for f64 is the shortest round-tripping decimal and never uses
// exponent notation.
fn write_number(out: &mut String, c: f64) {
    out.push_str(&format!("{c}"));
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarExpr({})", self.to_text())
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl From<f64> for ScalarExpr {
    fn from(c: f64) -> Self {
        ScalarExpr::constant(c)
    }
}

fn fold_add(a: &ScalarExpr, b: &ScalarExpr) -> ScalarExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarExpr::constant(x + y),
        (Some(0.0), _) => b.clone(),
        (_, Some(0.0)) => a.clone(),
        _ => ScalarExpr::from_node(Node::Add(a.clone(), b.clone())),
    }
}

fn fold_sub(a: &ScalarExpr, b: &ScalarExpr) -> ScalarExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarExpr::constant(x - y),
        (Some(0.0), _) => fold_neg(b),
        (_, Some(0.0)) => a.clone(),
        _ => ScalarExpr::from_node(Node::Sub(a.clone(), b.clone())),
    }
}

fn fold_mul(a: &ScalarExpr, b: &ScalarExpr) -> ScalarExpr {
    if a.is_zero() || b.is_zero() {
        return ScalarExpr::zero();
    }
    if a.is_one() {
        return b.clone();
    }
    if b.is_one() {
        return a.clone();
    }
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarExpr::constant(x * y),
        (Some(-1.0), _) => fold_neg(b),
        (_, Some(-1.0)) => fold_neg(a),
        _ => ScalarExpr::from_node(Node::Mul(a.clone(), b.clone())),
    }
}

fn fold_div(a: &ScalarExpr, b: &ScalarExpr) -> ScalarExpr {
    if b.is_one() {
        return a.clone();
    }
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => ScalarExpr::constant(x / y),
        _ => ScalarExpr::from_node(Node::Div(a.clone(), b.clone())),
    }
}

fn fold_neg(a: &ScalarExpr) -> ScalarExpr {
    match a.node() {
        Node::Const(c) => ScalarExpr::constant(-c),
        Node::Neg(inner) => inner.clone(),
        _ => ScalarExpr::from_node(Node::Neg(a.clone())),
    }
}

macro_rules! impl_binop {
    ($tr:ident, $method:ident, $fold:ident) => {
        impl ops::$tr<ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                $fold(&self, &rhs)
            }
        }
        impl ops::$tr<&ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                $fold(&self, rhs)
            }
        }
        impl ops::$tr<ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                $fold(self, &rhs)
            }
        }
        impl ops::$tr<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                $fold(self, rhs)
            }
        }
    };
}

impl_binop!(Add, add, fold_add);
impl_binop!(Sub, sub, fold_sub);
impl_binop!(Mul, mul, fold_mul);
impl_binop!(Div, div, fold_div);

impl ops::Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        fold_neg(&self)
    }
}

impl ops::Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        fold_neg(self)
    }
}

impl std::iter::Sum for ScalarExpr {
    fn sum<I: Iterator<Item = ScalarExpr>>(iter: I) -> Self {
        iter.fold(ScalarExpr::zero(), |acc, e| acc + e)
    }
}

/// Evaluates many expressions at one point, computing each shared subtree
/// once. Derivatives and covariant differentials reuse subtrees heavily, so
/// a plain tree walk revisits them exponentially often.
pub struct EvalCache<'a> {
    x: &'a [f64],
    memo: HashMap<*const Node, f64>,
}

impl<'a> EvalCache<'a> {
    pub fn new(x: &'a [f64]) -> Self {
        EvalCache {
            x,
            memo: HashMap::new(),
        }
    }

    /// Same value as [`ScalarExpr::eval_at`], bit for bit. Memo keys are node
    /// addresses, which the `'a` borrow keeps valid.
    pub fn eval(&mut self, e: &'a ScalarExpr) -> Result<f64, EvalError> {
        let shared = Arc::strong_count(&e.0) > 1;
        let key = Arc::as_ptr(&e.0);
        if shared {
            if let Some(&v) = self.memo.get(&key) {
                return Ok(v);
            }
        }
        let x = self.x;
        let v = match e.node() {
            Node::Const(c) => *c,
            Node::Var(k) => *x.get(*k).ok_or(EvalError::MissingCoordinate {
                index: *k,
                dim: x.len(),
            })?,
            Node::Add(a, b) => self.eval(a)? + self.eval(b)?,
            Node::Sub(a, b) => self.eval(a)? - self.eval(b)?,
            Node::Mul(a, b) => self.eval(a)? * self.eval(b)?,
            Node::Div(a, b) => {
                let num = self.eval(a)?;
                let den = self.eval(b)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Node::Pow(a, n) => self.eval(a)?.powi(*n as i32),
            Node::Neg(a) => -self.eval(a)?,
            Node::Call(f, a) => f.apply(self.eval(a)?),
        };
        if shared {
            self.memo.insert(key, v);
        }
        Ok(v)
    }
}
