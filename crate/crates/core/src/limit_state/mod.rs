//! Limit-state functions `g(x)` written as text expressions.
//!
//! Grammar: numbers, variables `x1..xn`, binary `+ - * / ^`, unary minus,
//! parentheses and the functions `sqrt exp log abs sin cos`. Failure is
//! `g ≤ 0` throughout the crate.

mod ast;
mod parser;

use std::fmt;

use thiserror::Error;

pub use ast::{BinOp, Expr, Func};
pub use parser::ParseError;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    SqrtOfNegative,
    LogOfNonPositive,
    DivisionByZero,
    /// Negative base with a non-integer exponent, or zero to a negative power.
    InvalidPower,
    NotANumber,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation domain error ({kind:?}) in {subexpr}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    /// The offending subexpression, printed in canonical form.
    pub subexpr: String,
}

/// A parsed limit-state function of a fixed number of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitStateExpr {
    expr: Expr,
    arity: usize,
}

impl LimitStateExpr {
    pub fn parse(text: &str, arity: usize) -> Result<Self> {
        let expr = parser::Parser::new(text, arity)?.parse_all()?;
        Ok(Self { expr, arity })
    }

    pub fn from_expr(expr: Expr, arity: usize) -> Result<Self> {
        if let Some(i) = expr.max_var() {
            if i >= arity {
                return Err(ParseError::VariableOutOfRange { index: i + 1, arity, offset: 0 }.into());
            }
        }
        Ok(Self { expr, arity })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn ast(&self) -> &Expr {
        &self.expr
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity {
            return Err(Error::DimensionMismatch { expected: self.arity, found: x.len() });
        }
        Ok(self.eval_unchecked(x)?)
    }

    /// Evaluation without the length check; `x` must have `arity` entries.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64]) -> Result<f64, EvalError> {
        eval(&self.expr, x)
    }

    /// Finite-difference gradient at `x`.
    pub fn gradient(&self, x: &[f64], settings: &GradientSettings) -> Result<Vec<f64>> {
        let g0 = match settings.scheme {
            DifferenceScheme::Forward => self.evaluate(x)?,
            DifferenceScheme::Central => {
                if x.len() != self.arity {
                    return Err(Error::DimensionMismatch { expected: self.arity, found: x.len() });
                }
                f64::NAN
            }
        };
        self.gradient_at(x, g0, settings)
    }

    /// Gradient reusing an already computed `g(x)` for the forward scheme.
    pub fn gradient_at(&self, x: &[f64], g_x: f64, settings: &GradientSettings) -> Result<Vec<f64>> {
        if x.len() != self.arity {
            return Err(Error::DimensionMismatch { expected: self.arity, found: x.len() });
        }
        let h = settings.step;
        let mut probe = x.to_vec();
        let mut grad = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let xi = x[i];
            let d = match settings.scheme {
                DifferenceScheme::Forward => {
                    probe[i] = xi + h;
                    (self.eval_unchecked(&probe)? - g_x) / h
                }
                DifferenceScheme::Central => {
                    probe[i] = xi + h;
                    let plus = self.eval_unchecked(&probe)?;
                    probe[i] = xi - h;
                    let minus = self.eval_unchecked(&probe)?;
                    (plus - minus) / (2.0 * h)
                }
            };
            probe[i] = xi;
            grad.push(d);
        }
        Ok(grad)
    }
}

impl fmt::Display for LimitStateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

fn domain(kind: EvalErrorKind, e: &Expr) -> EvalError {
    EvalError { kind, subexpr: e.to_string() }
}

fn eval(e: &Expr, x: &[f64]) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Const(c) => return Ok(*c),
        Expr::Var(i) => return Ok(x[*i]),
        Expr::Neg(a) => -eval(a, x)?,
        Expr::Binary(op, a, b) => {
            let (l, r) = (eval(a, x)?, eval(b, x)?);
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(domain(EvalErrorKind::DivisionByZero, e));
                    }
                    l / r
                }
                BinOp::Pow => power(l, r).ok_or_else(|| domain(EvalErrorKind::InvalidPower, e))?,
            }
        }
        Expr::Call(func, a) => {
            let v = eval(a, x)?;
            match func {
                Func::Sqrt if v < 0.0 => return Err(domain(EvalErrorKind::SqrtOfNegative, e)),
                Func::Sqrt => v.sqrt(),
                Func::Log if v <= 0.0 => return Err(domain(EvalErrorKind::LogOfNonPositive, e)),
                Func::Log => v.ln(),
                Func::Exp => v.exp(),
                Func::Abs => v.abs(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
            }
        }
    };
    if v.is_nan() {
        return Err(domain(EvalErrorKind::NotANumber, e));
    }
    Ok(v)
}

#[inline]
fn power(base: f64, exp: f64) -> Option<f64> {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        if base == 0.0 && exp < 0.0 {
            return None;
        }
        return Some(base.powi(exp as i32));
    }
    if base < 0.0 || (base == 0.0 && exp < 0.0) {
        return None;
    }
    Some(base.powf(exp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DifferenceScheme {
    #[default]
    Forward,
    Central,
}

/// Absolute finite-difference step and scheme.
///
/// The step is not scaled by `|xᵢ|`, so badly scaled variables need a
/// hand-picked step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSettings {
    step: f64,
    scheme: DifferenceScheme,
}

impl GradientSettings {
    pub fn new(step: f64, scheme: DifferenceScheme) -> Result<Self> {
        if !(step > 0.0 && step < 0.1) {
            return Err(Error::InvalidArgument(format!("finite-difference step must satisfy 0 < h < 0.1, got {step}")));
        }
        Ok(Self { step, scheme })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn scheme(&self) -> DifferenceScheme {
        self.scheme
    }
}

impl Default for GradientSettings {
    fn default() -> Self {
        Self { step: 1e-5, scheme: DifferenceScheme::Forward }
    }
}
