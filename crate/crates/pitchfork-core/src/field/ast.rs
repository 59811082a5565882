use crate::{Error, Result};
use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;

/// Reference to a state variable (by index) or the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    State(usize),
    Param,
}

/// Expression tree node. `Pow` exponents are restricted to non-negative
/// integer literals so that derivative jets are total on polynomials.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Const(f64),
    Var(VarRef),
    Neg(Box<ExprNode>),
    Sin(Box<ExprNode>),
    Cos(Box<ExprNode>),
    Exp(Box<ExprNode>),
    Sqrt(Box<ExprNode>),
    Add(Box<ExprNode>, Box<ExprNode>),
    Sub(Box<ExprNode>, Box<ExprNode>),
    Mul(Box<ExprNode>, Box<ExprNode>),
    Div(Box<ExprNode>, Box<ExprNode>),
    Pow(Box<ExprNode>, u32),
}

impl ExprNode {
    pub fn add(a: ExprNode, b: ExprNode) -> ExprNode {
        ExprNode::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: ExprNode, b: ExprNode) -> ExprNode {
        ExprNode::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: ExprNode, b: ExprNode) -> ExprNode {
        ExprNode::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: ExprNode, b: ExprNode) -> ExprNode {
        ExprNode::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: ExprNode, k: u32) -> ExprNode {
        ExprNode::Pow(Box::new(a), k)
    }

    pub(crate) fn check_vars(&self, dim: usize) -> Result<()> {
        match self {
            ExprNode::Const(_) => Ok(()),
            ExprNode::Var(VarRef::State(i)) => {
                if *i < dim {
                    Ok(())
                } else {
                    Err(Error::Invalid(format!("variable index {i} out of range for dim {dim}")))
                }
            }
            ExprNode::Var(VarRef::Param) => Ok(()),
            ExprNode::Neg(a) | ExprNode::Sin(a) | ExprNode::Cos(a) | ExprNode::Exp(a)
            | ExprNode::Sqrt(a) | ExprNode::Pow(a, _) => a.check_vars(dim),
            ExprNode::Add(a, b) | ExprNode::Sub(a, b) | ExprNode::Mul(a, b)
            | ExprNode::Div(a, b) => {
                a.check_vars(dim)?;
                b.check_vars(dim)
            }
        }
    }

    pub fn eval(&self, x: &[f64], eps: f64) -> Result<f64> {
        Ok(match self {
            ExprNode::Const(c) => *c,
            ExprNode::Var(VarRef::State(i)) => x[*i],
            ExprNode::Var(VarRef::Param) => eps,
            ExprNode::Neg(a) => -a.eval(x, eps)?,
            ExprNode::Sin(a) => libm::sin(a.eval(x, eps)?),
            ExprNode::Cos(a) => libm::cos(a.eval(x, eps)?),
            ExprNode::Exp(a) => libm::exp(a.eval(x, eps)?),
            ExprNode::Sqrt(a) => {
                let v = a.eval(x, eps)?;
                if v < 0.0 {
                    return Err(Error::SqrtNegative);
                }
                libm::sqrt(v)
            }
            ExprNode::Add(a, b) => a.eval(x, eps)? + b.eval(x, eps)?,
            ExprNode::Sub(a, b) => a.eval(x, eps)? - b.eval(x, eps)?,
            ExprNode::Mul(a, b) => a.eval(x, eps)? * b.eval(x, eps)?,
            ExprNode::Div(a, b) => {
                let d = b.eval(x, eps)?;
                if d == 0.0 {
                    return Err(Error::DivisionByZero);
                }
                a.eval(x, eps)? / d
            }
            ExprNode::Pow(a, k) => powi(a.eval(x, eps)?, *k),
        })
    }

    /// Replace each state variable with the corresponding expression.
    /// The parameter is left as-is.
    pub(crate) fn substitute(&self, subs: &[ExprNode]) -> ExprNode {
        match self {
            ExprNode::Const(c) => ExprNode::Const(*c),
            ExprNode::Var(VarRef::State(i)) => subs[*i].clone(),
            ExprNode::Var(VarRef::Param) => ExprNode::Var(VarRef::Param),
            ExprNode::Neg(a) => ExprNode::Neg(Box::new(a.substitute(subs))),
            ExprNode::Sin(a) => ExprNode::Sin(Box::new(a.substitute(subs))),
            ExprNode::Cos(a) => ExprNode::Cos(Box::new(a.substitute(subs))),
            ExprNode::Exp(a) => ExprNode::Exp(Box::new(a.substitute(subs))),
            ExprNode::Sqrt(a) => ExprNode::Sqrt(Box::new(a.substitute(subs))),
            ExprNode::Add(a, b) => ExprNode::add(a.substitute(subs), b.substitute(subs)),
            ExprNode::Sub(a, b) => ExprNode::sub(a.substitute(subs), b.substitute(subs)),
            ExprNode::Mul(a, b) => ExprNode::mul(a.substitute(subs), b.substitute(subs)),
            ExprNode::Div(a, b) => ExprNode::div(a.substitute(subs), b.substitute(subs)),
            ExprNode::Pow(a, k) => ExprNode::pow(a.substitute(subs), *k),
        }
    }

    pub(crate) fn unparse(&self, vars: &[String], param: &str) -> String {
        self.unparse_prec(vars, param, 0)
    }

    // prec levels: 0 add/sub, 1 mul/div, 2 unary minus, 3 pow/atom
    fn unparse_prec(&self, vars: &[String], param: &str, parent: u8) -> String {
        let (s, prec) = match self {
            ExprNode::Const(c) => (format!("{c:?}"), 3),
            ExprNode::Var(VarRef::State(i)) => (vars[*i].clone(), 3),
            ExprNode::Var(VarRef::Param) => (String::from(param), 3),
            ExprNode::Neg(a) => (format!("-{}", a.unparse_prec(vars, param, 2)), 2),
            ExprNode::Sin(a) => (format!("sin({})", a.unparse_prec(vars, param, 0)), 3),
            ExprNode::Cos(a) => (format!("cos({})", a.unparse_prec(vars, param, 0)), 3),
            ExprNode::Exp(a) => (format!("exp({})", a.unparse_prec(vars, param, 0)), 3),
            ExprNode::Sqrt(a) => (format!("sqrt({})", a.unparse_prec(vars, param, 0)), 3),
            ExprNode::Add(a, b) => (
                format!(
                    "{} + {}",
                    a.unparse_prec(vars, param, 0),
                    b.unparse_prec(vars, param, 1)
                ),
                0,
            ),
            ExprNode::Sub(a, b) => (
                format!(
                    "{} - {}",
                    a.unparse_prec(vars, param, 0),
                    b.unparse_prec(vars, param, 1)
                ),
                0,
            ),
            ExprNode::Mul(a, b) => (
                format!(
                    "{}*{}",
                    a.unparse_prec(vars, param, 1),
                    b.unparse_prec(vars, param, 2)
                ),
                1,
            ),
            ExprNode::Div(a, b) => (
                format!(
                    "{}/{}",
                    a.unparse_prec(vars, param, 1),
                    b.unparse_prec(vars, param, 2)
                ),
                1,
            ),
            ExprNode::Pow(a, k) => (format!("{}^{}", a.unparse_prec(vars, param, 3), k), 2),
        };
        if prec < parent {
            format!("({s})")
        } else {
            s
        }
    }
}

pub(crate) fn powi(base: f64, k: u32) -> f64 {
    // 0^0 = 1 by the polynomial convention.
    let mut acc = 1.0;
    let mut b = base;
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}
