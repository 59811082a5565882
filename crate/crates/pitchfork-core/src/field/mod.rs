//! Parsed vector fields with derivative jets.
//!
//! A [`FieldSpec`] is an n-dimensional vector field with one scalar
//! parameter, parsed from the line-oriented problem-file grammar. It is
//! immutable after parsing and all operations here are pure functions, so a
//! spec may be shared freely across threads.
//!
//! Derivatives up to third order in `(x, eps)` are produced either exactly,
//! by forward Taylor-mode arithmetic on the expression tree ([`jet`]), or by
//! centered finite differences ([`jet_fd`]) as a fallback near points where
//! some subexpression is not differentiable.

mod ast;
mod fd;
mod jet;
mod parse;

pub use ast::{ExprNode, VarRef};
pub use fd::jet_fd;
pub use jet::jet;

use crate::{Error, Result};
use alloc::string::String;
use alloc::vec::Vec;

/// A parsed n-dimensional vector field with one scalar parameter.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub(crate) dim: usize,
    pub(crate) param_name: String,
    pub(crate) var_names: Vec<String>,
    pub(crate) exprs: Vec<ExprNode>,
    pub(crate) source: String,
}

impl FieldSpec {
    /// Build a spec directly from expression trees. Every variable index in
    /// the trees must be `< var_names.len()`.
    pub fn from_parts(
        param_name: String,
        var_names: Vec<String>,
        exprs: Vec<ExprNode>,
        source: String,
    ) -> Result<Self> {
        let dim = var_names.len();
        if dim == 0 {
            return Err(Error::Invalid("dimension must be at least 1".into()));
        }
        if exprs.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: exprs.len() });
        }
        for e in &exprs {
            e.check_vars(dim)?;
        }
        Ok(Self { dim, param_name, var_names, exprs, source })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_name(&self) -> &str {
        &self.param_name
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn exprs(&self) -> &[ExprNode] {
        &self.exprs
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Componentwise evaluation of the field at `(x, eps)`.
    pub fn eval(&self, x: &[f64], eps: f64) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        self.exprs.iter().map(|e| e.eval(x, eps)).collect()
    }

    /// Render the field back to `eq i = ...` lines (used by round-trip
    /// tests and reports).
    pub fn unparse(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for (i, e) in self.exprs.iter().enumerate() {
            let _ = writeln!(s, "eq {} = {}", i + 1, e.unparse(&self.var_names, &self.param_name));
        }
        s
    }

    /// The field `W(z, eps) = out * V(shift + in_x * z + in_eps * eps, eps)`
    /// as a new spec, built by substituting linear expressions for the
    /// variables. `out` and `in_x` are `n x n`, `shift` and `in_eps` are
    /// length-`n`.
    pub fn linear_transform(
        &self,
        out: &crate::Matrix,
        shift: &[f64],
        in_x: &crate::Matrix,
        in_eps: &[f64],
    ) -> Result<FieldSpec> {
        let n = self.dim;
        if out.rows() != n || out.cols() != n || in_x.rows() != n || in_x.cols() != n {
            return Err(Error::MatrixShape("linear_transform expects n x n matrices".into()));
        }
        if shift.len() != n || in_eps.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: shift.len() });
        }
        // Substitution for old variable j: shift[j] + sum_k in_x[j][k] z_k + in_eps[j] * eps.
        let subs: Vec<ExprNode> = (0..n)
            .map(|j| {
                let mut acc = ExprNode::Const(shift[j]);
                for k in 0..n {
                    let c = in_x.get(j, k);
                    if c != 0.0 {
                        acc = ExprNode::add(
                            acc,
                            ExprNode::mul(ExprNode::Const(c), ExprNode::Var(VarRef::State(k))),
                        );
                    }
                }
                if in_eps[j] != 0.0 {
                    acc = ExprNode::add(
                        acc,
                        ExprNode::mul(ExprNode::Const(in_eps[j]), ExprNode::Var(VarRef::Param)),
                    );
                }
                acc
            })
            .collect();
        let substituted: Vec<ExprNode> = self.exprs.iter().map(|e| e.substitute(&subs)).collect();
        let exprs: Vec<ExprNode> = (0..n)
            .map(|i| {
                let mut acc = ExprNode::Const(0.0);
                for (j, sub) in substituted.iter().enumerate() {
                    let c = out.get(i, j);
                    if c != 0.0 {
                        acc = ExprNode::add(acc, ExprNode::mul(ExprNode::Const(c), sub.clone()));
                    }
                }
                acc
            })
            .collect();
        FieldSpec::from_parts(
            self.param_name.clone(),
            self.var_names.clone(),
            exprs,
            String::new(),
        )
    }
}

impl core::str::FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse::parse_problem(s).map(|p| p.field)
    }
}

/// Parse a problem file (see the grammar in the crate README) and return
/// just the vector field.
pub fn parse_field(text: &str) -> Result<FieldSpec> {
    text.parse()
}

/// A complete analysis problem: the field plus the point under study.
#[derive(Debug, Clone)]
pub struct Problem {
    pub field: FieldSpec,
    /// The candidate bifurcation point `x0` (defaults to the origin).
    pub point: Vec<f64>,
    /// The candidate bifurcation parameter value `eps0` (defaults to 0).
    pub eps0: f64,
    /// Search-ball radius around `point` (defaults to 0.5).
    pub radius: f64,
}

impl Problem {
    pub fn parse(text: &str) -> Result<Problem> {
        parse::parse_problem(text)
    }
}

/// Value and derivative tensors of `V` at a point in `(x, eps)`.
///
/// Column/slot order is `x_1 .. x_n, eps`, so each derivative tensor has
/// `m = n + 1` entries per slot. `d2[i]` is symmetric and `d3[i]` is
/// symmetric under all permutations of the last three slots.
#[derive(Debug, Clone)]
pub struct Jet3 {
    n: usize,
    m: usize,
    order: u8,
    value: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Jet3 {
    pub(crate) fn new(n: usize, order: u8, value: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>, d3: Vec<f64>) -> Self {
        let m = n + 1;
        debug_assert!(matches!(order, 1..=3));
        debug_assert_eq!(value.len(), n);
        debug_assert_eq!(d1.len(), n * m);
        debug_assert_eq!(d2.len(), if order >= 2 { n * m * m } else { 0 });
        debug_assert_eq!(d3.len(), if order >= 3 { n * m * m * m } else { 0 });
        Self { n, m, order, value, d1, d2, d3 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of derivative slots (`n + 1`: the state variables then eps).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    /// First derivative of component `i` along slot `a`.
    pub fn d1(&self, i: usize, a: usize) -> f64 {
        self.d1[i * self.m + a]
    }

    pub fn d2(&self, i: usize, a: usize, b: usize) -> f64 {
        debug_assert!(self.order >= 2);
        self.d2[(i * self.m + a) * self.m + b]
    }

    pub fn d3(&self, i: usize, a: usize, b: usize, c: usize) -> f64 {
        debug_assert!(self.order >= 3);
        self.d3[((i * self.m + a) * self.m + b) * self.m + c]
    }

    /// The n x n Jacobian block `D_x V`.
    pub fn x_jacobian(&self) -> crate::Matrix {
        let n = self.n;
        crate::Matrix::from_fn(n, n, |i, j| self.d1(i, j))
    }

    /// The full n x (n+1) Jacobian over `(x, eps)`.
    pub fn extended_jacobian(&self) -> crate::Matrix {
        let n = self.n;
        crate::Matrix::from_fn(n, n + 1, |i, j| self.d1(i, j))
    }

    /// `d/d eps V` column.
    pub fn d_eps(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.d1(i, self.n)).collect()
    }

    /// Entry (i,j) of `D_x V` differentiated along slot `a`.
    pub fn jacobian_deriv(&self, a: usize) -> crate::Matrix {
        let n = self.n;
        crate::Matrix::from_fn(n, n, |i, j| self.d2(i, j, a))
    }

    /// Entry (i,j) of `D_x V` twice differentiated along slots `a`, `b`.
    pub fn jacobian_deriv2(&self, a: usize, b: usize) -> crate::Matrix {
        let n = self.n;
        crate::Matrix::from_fn(n, n, |i, j| self.d3(i, j, a, b))
    }
}
