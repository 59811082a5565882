//! Finite-difference derivative jets.
//!
//! Fallback for points where the exact jet is unavailable because some
//! subexpression is non-differentiable (typically `sin(1/x)` on the axis
//! `x = 0`). All stencils are built from the four half-step nodes
//! `{-3h/2, -h/2, +h/2, +3h/2}` per slot and never place a node at the
//! center, so a slot that sits exactly on a singular axis can still be
//! handled by displacing it and Richardson-extrapolating the value back.
//!
//! Accuracy is O(h^2) for second and third derivatives and O(h^4) for
//! values and first derivatives, assuming enough smoothness off the
//! singular set.

use super::{FieldSpec, Jet3};
use crate::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Finite-difference analogue of [`super::jet`] with step `h`.
pub fn jet_fd(spec: &FieldSpec, x: &[f64], eps: f64, order: u8, h: f64) -> Result<Jet3> {
    if !matches!(order, 1..=3) {
        return Err(Error::Invalid("jet order must be 1, 2 or 3".into()));
    }
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: x.len() });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::FdStencil(format!("invalid step h = {h}")));
    }
    let n = spec.dim;
    let m = n + 1;
    let a = 0.5 * h;
    let st = Stencil { spec, x, eps, a };

    let value = st.entry(&vec![0u8; m])?;
    let mut d1 = vec![0.0; n * m];
    for s in 0..m {
        let mut orders = vec![0u8; m];
        orders[s] = 1;
        let col = st.entry(&orders)?;
        for (i, v) in col.iter().enumerate() {
            d1[i * m + s] = *v;
        }
    }
    let mut d2 = Vec::new();
    if order >= 2 {
        d2 = vec![0.0; n * m * m];
        for s in 0..m {
            for t in s..m {
                let mut orders = vec![0u8; m];
                orders[s] += 1;
                orders[t] += 1;
                let col = st.entry(&orders)?;
                for (i, v) in col.iter().enumerate() {
                    d2[(i * m + s) * m + t] = *v;
                    d2[(i * m + t) * m + s] = *v;
                }
            }
        }
    }
    let mut d3 = Vec::new();
    if order >= 3 {
        d3 = vec![0.0; n * m * m * m];
        for s in 0..m {
            for t in s..m {
                for u in t..m {
                    let mut orders = vec![0u8; m];
                    orders[s] += 1;
                    orders[t] += 1;
                    orders[u] += 1;
                    let col = st.entry(&orders)?;
                    for (i, v) in col.iter().enumerate() {
                        for (p, q, r) in perms3(s, t, u) {
                            d3[((i * m + p) * m + q) * m + r] = *v;
                        }
                    }
                }
            }
        }
    }
    Ok(Jet3::new(n, order, value, d1, d2, d3))
}

fn perms3(a: usize, b: usize, c: usize) -> [(usize, usize, usize); 6] {
    [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
}

struct Stencil<'a> {
    spec: &'a FieldSpec,
    x: &'a [f64],
    eps: f64,
    a: f64,
}

const NODES: [f64; 4] = [1.0, -1.0, 3.0, -3.0];

fn weights(order: u8, a: f64) -> [f64; 4] {
    match order {
        // Value extrapolation: [9(f(a)+f(-a)) - (f(3a)+f(-3a))] / 16.
        0 => [9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0, -1.0 / 16.0],
        // f' = [27(f(a)-f(-a)) - (f(3a)-f(-3a))] / 48a.
        1 => {
            let d = 48.0 * a;
            [27.0 / d, -27.0 / d, -1.0 / d, 1.0 / d]
        }
        // f'' = [(f(3a)+f(-3a)) - (f(a)+f(-a))] / 8a^2.
        2 => {
            let d = 8.0 * a * a;
            [-1.0 / d, -1.0 / d, 1.0 / d, 1.0 / d]
        }
        // f''' = [(f(3a)-f(-3a)) - 3(f(a)-f(-a))] / 8a^3.
        3 => {
            let d = 8.0 * a * a * a;
            [-3.0 / d, 3.0 / d, 1.0 / d, -1.0 / d]
        }
        _ => unreachable!("per-slot differentiation order is at most 3"),
    }
}

impl Stencil<'_> {
    /// One derivative-tensor entry (all field components at once) with the
    /// per-slot differentiation orders given in `orders`.
    ///
    /// Slots of order 0 are normally held at the center point. If any
    /// evaluation fails there (a singular axis), the entry is recomputed
    /// with *every* slot displaced onto the four nodes, using the value
    /// extrapolation weights for the order-0 slots.
    fn entry(&self, orders: &[u8]) -> Result<Vec<f64>> {
        match self.accumulate(orders, false) {
            Ok(v) => Ok(v),
            Err(Error::DivisionByZero) | Err(Error::SqrtNegative) => {
                self.accumulate(orders, true).map_err(|e| {
                    Error::FdStencil(format!("stencil evaluation failed: {e}"))
                })
            }
            Err(e) => Err(e),
        }
    }

    fn accumulate(&self, orders: &[u8], displace_all: bool) -> Result<Vec<f64>> {
        let m = orders.len();
        let mut offsets = vec![0.0; m];
        let mut acc = vec![0.0; self.spec.dim()];
        self.recurse(orders, displace_all, 0, 1.0, &mut offsets, &mut acc)?;
        Ok(acc)
    }

    fn recurse(
        &self,
        orders: &[u8],
        displace_all: bool,
        slot: usize,
        weight: f64,
        offsets: &mut [f64],
        acc: &mut [f64],
    ) -> Result<()> {
        let m = orders.len();
        if slot == m {
            let n = self.spec.dim();
            let mut xs = Vec::with_capacity(n);
            for i in 0..n {
                xs.push(self.x[i] + offsets[i]);
            }
            let v = self.spec.eval(&xs, self.eps + offsets[n])?;
            for (a, vi) in acc.iter_mut().zip(&v) {
                *a += weight * vi;
            }
            return Ok(());
        }
        if orders[slot] == 0 && !displace_all {
            offsets[slot] = 0.0;
            return self.recurse(orders, displace_all, slot + 1, weight, offsets, acc);
        }
        let w = weights(orders[slot], self.a);
        for (node, wk) in NODES.iter().zip(w) {
            offsets[slot] = node * self.a;
            self.recurse(orders, displace_all, slot + 1, weight * wk, offsets, acc)?;
        }
        offsets[slot] = 0.0;
        Ok(())
    }
}
