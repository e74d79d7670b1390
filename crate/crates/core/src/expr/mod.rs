//! Scalar expressions over state variables `x1..xn`.
//!
//! Nonlinear systems are described declaratively: `f`, `g`, `h` and candidate
//! storage functions `V` are strings such as `"-x1 + x1*x2^2"`. This module
//! parses them, evaluates them, and differentiates them exactly so that `∇V`
//! and `∇h` come from the same source as the dynamics.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr     = term { ("+" | "-") term } ;
//! term     = unary { ("*" | "/") unary } ;
//! unary    = "-" unary | power ;
//! power    = primary { "^" integer } ;
//! integer  = [ "-" ] digit { digit } ;
//! primary  = number | variable | func "(" expr ")" | "(" expr ")" ;
//! variable = "x" digit { digit } ;            (* 1-based, at most n *)
//! func     = "sin" | "cos" | "exp" | "tanh" ;
//! number   = digits [ "." [ digits ] ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!          | "." digits [ exponent ] ;
//! ```
//!
//! `^` binds tighter than unary minus (`-x1^2` is `-(x1^2)`), and all binary
//! operators of equal precedence associate to the left.
//!
//! Gradient layout follows the convention used throughout the crate: for a
//! vector field `h`, [`jacobian`] returns the `n × m` matrix whose entry
//! `(i, j)` is `∂h_j/∂x_i`, i.e. the transpose of the usual Jacobian, so that
//! `ẏ = ∇hᵀ ẋ`.

mod diff;
mod parse;

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

pub use diff::diff;
pub use parse::{parse, ParseError, ParseErrorKind};

/// Elementary functions understood by the parser. Adding a function means
/// adding a variant here, a name in [`Func::from_name`], its value in
/// [`Func::apply`] and its derivative in `diff.rs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 4] = [Func::Sin, Func::Cos, Func::Exp, Func::Tanh];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
        }
    }
}

/// Expression tree. Variables are stored zero-based; `Var(0)` prints as `x1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value")]
    NonFinite,
    #[error("expression refers to x{index} but the point has dimension {dim}")]
    DimensionMismatch { index: usize, dim: usize },
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    /// Variable by zero-based index.
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    /// `Σ coeffs[j]·x_{j+1}`, omitting zero coefficients.
    pub fn linear(coeffs: &[f64]) -> Expr {
        let mut acc: Option<Expr> = None;
        for (j, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let term = if c == 1.0 {
                Expr::Var(j)
            } else {
                Expr::Mul(Box::new(Expr::Num(c)), Box::new(Expr::Var(j)))
            };
            acc = Some(match acc {
                None => term,
                Some(prev) => Expr::Add(Box::new(prev), Box::new(term)),
            });
        }
        acc.unwrap_or(Expr::Num(0.0))
    }

    /// Largest zero-based variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(c) => *c,
            Expr::Var(i) => *x.get(*i).ok_or(EvalError::DimensionMismatch {
                index: i + 1,
                dim: x.len(),
            })?,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let num = a.eval(x)?;
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Expr::Pow(e, k) => {
                let base = e.eval(x)?;
                if *k < 0 && base == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                base.powi(*k)
            }
            Expr::Call(f, e) => f.apply(e.eval(x)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", c.abs())
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(e, k) => write!(f, "({e}^{k})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// `n` expressions, one per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub exprs: Vec<Expr>,
}

impl VectorField {
    pub fn new(exprs: Vec<Expr>) -> Self {
        VectorField { exprs }
    }

    pub fn parse(texts: &[impl AsRef<str>], n: usize) -> Result<Self, ParseError> {
        let exprs = texts.iter().map(|t| parse(t.as_ref(), n)).collect::<Result<_, _>>()?;
        Ok(VectorField { exprs })
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.exprs.iter().map(|e| e.eval(x)).collect()
    }
}

/// Row-major grid of expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    pub rows: usize,
    pub cols: usize,
    pub exprs: Vec<Expr>,
}

impl MatrixField {
    pub fn new(rows: usize, cols: usize, exprs: Vec<Expr>) -> Self {
        assert_eq!(exprs.len(), rows * cols, "matrix field shape");
        MatrixField { rows, cols, exprs }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        let exprs = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| Expr::Num(m[(i, j)]))
            .collect();
        MatrixField::new(m.nrows(), m.ncols(), exprs)
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.exprs[i * self.cols + j]
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self.get(i, j).eval(x)?;
            }
        }
        Ok(m)
    }
}

/// `∇e`: component `i` is `∂e/∂x_{i+1}`.
pub fn gradient(e: &Expr, n: usize) -> VectorField {
    VectorField::new((0..n).map(|i| diff(e, i)).collect())
}

/// `∇v` in the transposed layout: entry `(i, j)` is `∂v_j/∂x_i`.
pub fn jacobian(v: &VectorField, n: usize) -> MatrixField {
    let m = v.len();
    let mut exprs = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            exprs.push(diff(&v.exprs[j], i));
        }
    }
    MatrixField::new(n, m, exprs)
}
