//! Forward Taylor-mode derivative propagation on the expression tree.
//!
//! A [`Tay`] carries the value and the full (symmetric) derivative tensors
//! of a scalar subexpression with respect to the `m = n + 1` inputs
//! `(x_1 .. x_n, eps)`, truncated at the requested order. Arithmetic on
//! `Tay` follows the product rule; elementary functions compose via Faà di
//! Bruno truncated at order 3. The result is exact for the supported
//! function set (no truncation error beyond floating point).

use super::ast::{powi, ExprNode, VarRef};
use super::{FieldSpec, Jet3};
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

/// Exact derivative jet of `spec` at `(x, eps)` up to `order` (1, 2 or 3).
///
/// Fails with [`Error::SingularJetPoint`] when a subexpression is not
/// differentiable at the point (division by zero, `sqrt` at or below zero).
pub fn jet(spec: &FieldSpec, x: &[f64], eps: f64, order: u8) -> Result<Jet3> {
    if !matches!(order, 1..=3) {
        return Err(Error::Invalid("jet order must be 1, 2 or 3".into()));
    }
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: x.len() });
    }
    let n = spec.dim;
    let m = n + 1;
    let ord = order as usize;
    let mut value = Vec::with_capacity(n);
    let mut d1 = Vec::with_capacity(n * m);
    let mut d2 = if ord >= 2 { Vec::with_capacity(n * m * m) } else { Vec::new() };
    let mut d3 = if ord >= 3 { Vec::with_capacity(n * m * m * m) } else { Vec::new() };
    for e in &spec.exprs {
        let t = eval_tay(e, x, eps, m, ord).map_err(|e| match e {
            // During differentiation, local non-smoothness surfaces as an
            // arithmetic failure; report it as a singular jet point so
            // callers can switch to the finite-difference fallback.
            Error::DivisionByZero | Error::SqrtNegative => Error::SingularJetPoint,
            other => other,
        })?;
        value.push(t.v);
        d1.extend_from_slice(&t.d1);
        if ord >= 2 {
            d2.extend_from_slice(&t.d2);
        }
        if ord >= 3 {
            d3.extend_from_slice(&t.d3);
        }
    }
    Ok(Jet3::new(n, order, value, d1, d2, d3))
}

#[derive(Clone)]
struct Tay {
    m: usize,
    ord: usize,
    v: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Tay {
    fn constant(c: f64, m: usize, ord: usize) -> Self {
        Tay {
            m,
            ord,
            v: c,
            d1: vec![0.0; m],
            d2: if ord >= 2 { vec![0.0; m * m] } else { Vec::new() },
            d3: if ord >= 3 { vec![0.0; m * m * m] } else { Vec::new() },
        }
    }

    fn variable(value: f64, slot: usize, m: usize, ord: usize) -> Self {
        let mut t = Tay::constant(value, m, ord);
        t.d1[slot] = 1.0;
        t
    }

    fn neg(mut self) -> Self {
        self.v = -self.v;
        for a in &mut self.d1 {
            *a = -*a;
        }
        for a in &mut self.d2 {
            *a = -*a;
        }
        for a in &mut self.d3 {
            *a = -*a;
        }
        self
    }

    fn add(mut self, o: &Tay) -> Self {
        self.v += o.v;
        for (a, b) in self.d1.iter_mut().zip(&o.d1) {
            *a += *b;
        }
        for (a, b) in self.d2.iter_mut().zip(&o.d2) {
            *a += *b;
        }
        for (a, b) in self.d3.iter_mut().zip(&o.d3) {
            *a += *b;
        }
        self
    }

    fn sub(mut self, o: &Tay) -> Self {
        self.v -= o.v;
        for (a, b) in self.d1.iter_mut().zip(&o.d1) {
            *a -= *b;
        }
        for (a, b) in self.d2.iter_mut().zip(&o.d2) {
            *a -= *b;
        }
        for (a, b) in self.d3.iter_mut().zip(&o.d3) {
            *a -= *b;
        }
        self
    }

    fn mul(&self, o: &Tay) -> Self {
        let (m, ord) = (self.m, self.ord);
        let mut r = Tay::constant(0.0, m, ord);
        r.v = self.v * o.v;
        for i in 0..m {
            r.d1[i] = self.v * o.d1[i] + self.d1[i] * o.v;
        }
        if ord >= 2 {
            for i in 0..m {
                for j in 0..m {
                    r.d2[i * m + j] = self.v * o.d2[i * m + j]
                        + self.d1[i] * o.d1[j]
                        + self.d1[j] * o.d1[i]
                        + self.d2[i * m + j] * o.v;
                }
            }
        }
        if ord >= 3 {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let idx = (i * m + j) * m + k;
                        r.d3[idx] = self.v * o.d3[idx]
                            + self.d1[i] * o.d2[j * m + k]
                            + self.d1[j] * o.d2[i * m + k]
                            + self.d1[k] * o.d2[i * m + j]
                            + self.d2[j * m + k] * o.d1[i]
                            + self.d2[i * m + k] * o.d1[j]
                            + self.d2[i * m + j] * o.d1[k]
                            + self.d3[idx] * o.v;
                    }
                }
            }
        }
        r
    }

    /// Compose with a univariate function given its derivatives
    /// `f(v), f'(v), f''(v), f'''(v)` at the inner value (Faà di Bruno to
    /// order 3).
    fn compose(&self, f0: f64, f1: f64, f2: f64, f3: f64) -> Self {
        let (m, ord) = (self.m, self.ord);
        let mut r = Tay::constant(f0, m, ord);
        for i in 0..m {
            r.d1[i] = f1 * self.d1[i];
        }
        if ord >= 2 {
            for i in 0..m {
                for j in 0..m {
                    r.d2[i * m + j] =
                        f2 * self.d1[i] * self.d1[j] + f1 * self.d2[i * m + j];
                }
            }
        }
        if ord >= 3 {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let idx = (i * m + j) * m + k;
                        r.d3[idx] = f3 * self.d1[i] * self.d1[j] * self.d1[k]
                            + f2 * (self.d1[i] * self.d2[j * m + k]
                                + self.d1[j] * self.d2[i * m + k]
                                + self.d1[k] * self.d2[i * m + j])
                            + f1 * self.d3[idx];
                    }
                }
            }
        }
        r
    }
}

fn eval_tay(e: &ExprNode, x: &[f64], eps: f64, m: usize, ord: usize) -> Result<Tay> {
    Ok(match e {
        ExprNode::Const(c) => Tay::constant(*c, m, ord),
        ExprNode::Var(VarRef::State(i)) => Tay::variable(x[*i], *i, m, ord),
        ExprNode::Var(VarRef::Param) => Tay::variable(eps, m - 1, m, ord),
        ExprNode::Neg(a) => eval_tay(a, x, eps, m, ord)?.neg(),
        ExprNode::Add(a, b) => {
            eval_tay(a, x, eps, m, ord)?.add(&eval_tay(b, x, eps, m, ord)?)
        }
        ExprNode::Sub(a, b) => {
            eval_tay(a, x, eps, m, ord)?.sub(&eval_tay(b, x, eps, m, ord)?)
        }
        ExprNode::Mul(a, b) => {
            eval_tay(a, x, eps, m, ord)?.mul(&eval_tay(b, x, eps, m, ord)?)
        }
        ExprNode::Div(a, b) => {
            let den = eval_tay(b, x, eps, m, ord)?;
            if den.v == 0.0 {
                return Err(Error::DivisionByZero);
            }
            let inv = den.compose(
                1.0 / den.v,
                -1.0 / (den.v * den.v),
                2.0 / (den.v * den.v * den.v),
                -6.0 / (den.v * den.v * den.v * den.v),
            );
            eval_tay(a, x, eps, m, ord)?.mul(&inv)
        }
        ExprNode::Sin(a) => {
            let g = eval_tay(a, x, eps, m, ord)?;
            let (s, c) = (libm::sin(g.v), libm::cos(g.v));
            g.compose(s, c, -s, -c)
        }
        ExprNode::Cos(a) => {
            let g = eval_tay(a, x, eps, m, ord)?;
            let (s, c) = (libm::sin(g.v), libm::cos(g.v));
            g.compose(c, -s, -c, s)
        }
        ExprNode::Exp(a) => {
            let g = eval_tay(a, x, eps, m, ord)?;
            let v = libm::exp(g.v);
            g.compose(v, v, v, v)
        }
        ExprNode::Sqrt(a) => {
            let g = eval_tay(a, x, eps, m, ord)?;
            // sqrt is not differentiable at 0, so <= 0 is singular here.
            if g.v <= 0.0 {
                return Err(Error::SqrtNegative);
            }
            let r = libm::sqrt(g.v);
            g.compose(r, 0.5 / r, -0.25 / (r * g.v), 0.375 / (r * g.v * g.v))
        }
        ExprNode::Pow(a, k) => {
            let g = eval_tay(a, x, eps, m, ord)?;
            let k = *k;
            let f0 = powi(g.v, k);
            let f1 = if k >= 1 { k as f64 * powi(g.v, k - 1) } else { 0.0 };
            let f2 = if k >= 2 { (k * (k - 1)) as f64 * powi(g.v, k - 2) } else { 0.0 };
            let f3 = if k >= 3 { (k * (k - 1) * (k - 2)) as f64 * powi(g.v, k - 3) } else { 0.0 };
            g.compose(f0, f1, f2, f3)
        }
    })
}
