//! Coordinate normalization to the `(u, y)` block form and the order-2
//! center manifold expansion.
//!
//! `normalize` splits R^n into the one-dimensional kernel of the Jacobian
//! and its complementary invariant subspace (the Jacobian's range — exact
//! because the zero eigenvalue is simple), producing a transformed jet of
//! the form
//!
//! ```text
//!   u' = F(u, y, eps)            (scalar, DF(0) = 0 in (u, y))
//!   y' = M y + G(u, y, eps)      (hyperbolic block M, DG(0) = 0)
//! ```
//!
//! with the extra convention that `G_eps(0) = 0` (a linear shear of y
//! absorbs any first-order parameter motion of the hyperbolic part, so the
//! center manifold has no linear eps term). Column scaling is fixed by
//! requiring each row of `A^{-1}` to have first nonzero entry 1, which is
//! deterministic and reproduces the classical hand normalizations.

use crate::equilibria::jet_or_fd;
use crate::field::{jet_fd, FieldSpec, Jet3};
use crate::smallmat::{self, Matrix};
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

const KERNEL_TOL: f64 = 1e-8;
const MAX_BASIS_COND: f64 = 1e8;

/// The normalized coordinate frame and the transformed order-3 jet.
#[derive(Debug, Clone)]
pub struct NormalForm {
    /// Change of basis: `x = shift + A z + eps_shear * eps`, first column of
    /// `A` spans the kernel of the Jacobian.
    pub a: Matrix,
    pub a_inv: Matrix,
    /// Hyperbolic block; `None` for one-dimensional fields.
    pub m: Option<Matrix>,
    pub shift: Vec<f64>,
    pub eps0: f64,
    /// Shear column making `G_eps(0) = 0` (zero when no shear was needed).
    pub eps_shear: Vec<f64>,
    /// Jet of the transformed field in `(u, y_1.., eps)` slots.
    pub jet: Jet3,
}

impl NormalForm {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// `d^2 G / d u^2` at the origin (vector over the hyperbolic block).
    pub fn g_uu(&self) -> Vec<f64> {
        (1..self.n()).map(|i| self.jet.d2(i, 0, 0)).collect()
    }
}

/// Normalize around `(x0, eps0)` using the exact jet, or finite differences
/// where the field is not differentiable at the point.
pub fn normalize(spec: &FieldSpec, x0: &[f64], eps0: f64, tol_zero: f64) -> Result<NormalForm> {
    let j = jet_or_fd(spec, x0, eps0, 3)?;
    normalize_from_jet(&j, x0, eps0, tol_zero)
}

/// Same as [`normalize`] but explicitly through finite differences with
/// step `h` (used for step-halving consistency checks).
pub fn normalize_fd(
    spec: &FieldSpec,
    x0: &[f64],
    eps0: f64,
    tol_zero: f64,
    h: f64,
) -> Result<NormalForm> {
    let j = jet_fd(spec, x0, eps0, 3, h)?;
    normalize_from_jet(&j, x0, eps0, tol_zero)
}

/// Build the normal form from an already computed order-3 jet at the point.
pub fn normalize_from_jet(
    j: &Jet3,
    x0: &[f64],
    eps0: f64,
    tol_zero: f64,
) -> Result<NormalForm> {
    let n = j.n();
    if j.order() < 3 {
        return Err(Error::Invalid("normalize needs an order-3 jet".into()));
    }
    let jac = j.x_jacobian();
    let spectrum = smallmat::eigenvalues(&jac, tol_zero)?;
    if spectrum.zero_count != 1 {
        return Err(Error::ZeroEigenvalueNotSimple { count: spectrum.zero_count });
    }
    if n == 1 {
        let a = Matrix::identity(1);
        return Ok(NormalForm {
            a: a.clone(),
            a_inv: a,
            m: None,
            shift: x0.to_vec(),
            eps0,
            eps_shear: vec![0.0],
            jet: j.clone(),
        });
    }
    let kernel = smallmat::kernel_right(&jac, KERNEL_TOL);
    if kernel.len() != 1 {
        return Err(Error::ZeroEigenvalueNotSimple { count: kernel.len() });
    }
    let range = smallmat::range_basis(&jac, KERNEL_TOL);
    if range.len() != n - 1 {
        return Err(Error::ZeroEigenvalueNotSimple { count: n - range.len() });
    }
    let mut cols = Vec::with_capacity(n);
    cols.push(kernel.into_iter().next().expect("one kernel vector"));
    cols.extend(range);
    let mut a = Matrix::from_cols(&cols)?;
    let cond = a.cond_2();
    if !(cond < MAX_BASIS_COND) {
        return Err(Error::IllConditionedBasis { cond });
    }
    let mut b = smallmat::inverse(&a)?;
    // Fix the column scaling: each row of A^{-1} gets first nonzero = 1.
    for i in 0..n {
        let row_max = (0..n).map(|k| b.get(i, k).abs()).fold(0.0, f64::max);
        let lead = (0..n)
            .map(|k| b.get(i, k))
            .find(|v| v.abs() > 1e-8 * row_max)
            .expect("invertible matrix rows are nonzero");
        for k in 0..n {
            b.set(i, k, b.get(i, k) / lead);
        }
        for r in 0..n {
            a.set(r, i, a.get(r, i) * lead);
        }
    }
    // First pass without shear to read off M and G_eps.
    let l = input_map(&a, &vec![0.0; n]);
    let t = transform_jet(j, &b, &l);
    let m = Matrix::from_fn(n - 1, n - 1, |r, c| t.d1(r + 1, c + 1));
    // M must be hyperbolic; bucket counts also guard against a hidden
    // second zero eigenvalue slipping past the kernel tolerance.
    let m_spec = smallmat::eigenvalues(&m, tol_zero)?;
    if m_spec.zero_count != 0 {
        return Err(Error::ZeroEigenvalueNotSimple { count: 1 + m_spec.zero_count });
    }
    let scale = 1.0 + jac.max_norm();
    let mut block_err: f64 = t.d1(0, 0).abs();
    for k in 1..n {
        block_err = block_err.max(t.d1(0, k).abs()).max(t.d1(k, 0).abs());
    }
    if block_err > 1e-7 * scale {
        return Err(Error::Invalid("normalized Jacobian is not block diagonal".into()));
    }
    // Shear away G_eps(0) so the center manifold has no linear eps term.
    let g_eps: Vec<f64> = (1..n).map(|i| t.d1(i, n)).collect();
    let needs_shear = g_eps.iter().any(|v| v.abs() > 1e-12 * scale);
    let (eps_shear, jet) = if needs_shear {
        let q = smallmat::solve(&m, &g_eps)?;
        // x = shift + A z + e * eps with e = -A_y q.
        let e: Vec<f64> = (0..n)
            .map(|r| -(0..n - 1).map(|c| a.get(r, c + 1) * q[c]).sum::<f64>())
            .collect();
        let l = input_map(&a, &e);
        (e, transform_jet(j, &b, &l))
    } else {
        (vec![0.0; n], t)
    };
    for i in 1..n {
        debug_assert!(jet.d1(i, n).abs() <= 1e-8 * scale, "shear residual");
    }
    Ok(NormalForm {
        a,
        a_inv: b,
        m: Some(m),
        shift: x0.to_vec(),
        eps0,
        eps_shear,
        jet,
    })
}

/// The (n+1) x (n+1) input Jacobian of `(z, eps) -> (A z + e eps, eps)`.
fn input_map(a: &Matrix, e: &[f64]) -> Matrix {
    let n = a.rows();
    Matrix::from_fn(n + 1, n + 1, |p, q| {
        if p < n {
            if q < n {
                a.get(p, q)
            } else {
                e[p]
            }
        } else if q == n {
            1.0
        } else {
            0.0
        }
    })
}

/// Pushforward of a jet through the linear substitution `x = L (z, eps)`
/// on the input side and `W = B V` on the output side. Exact (no
/// truncation): derivative tensors contract with `L` once per slot.
pub(crate) fn transform_jet(j: &Jet3, b: &Matrix, l: &Matrix) -> Jet3 {
    let n = j.n();
    let m = j.m();
    debug_assert_eq!(b.rows(), n);
    debug_assert_eq!(l.rows(), m);
    let ord = j.order() as usize;
    // Output-side contraction first.
    let mut v = vec![0.0; n];
    let mut d1 = vec![0.0; n * m];
    let mut d2 = if ord >= 2 { vec![0.0; n * m * m] } else { Vec::new() };
    let mut d3 = if ord >= 3 { vec![0.0; n * m * m * m] } else { Vec::new() };
    for i in 0..n {
        for jj in 0..n {
            let w = b.get(i, jj);
            if w == 0.0 {
                continue;
            }
            v[i] += w * j.value()[jj];
            for p in 0..m {
                d1[i * m + p] += w * j.d1(jj, p);
            }
            if ord >= 2 {
                for p in 0..m {
                    for q in 0..m {
                        d2[(i * m + p) * m + q] += w * j.d2(jj, p, q);
                    }
                }
            }
            if ord >= 3 {
                for p in 0..m {
                    for q in 0..m {
                        for r in 0..m {
                            d3[((i * m + p) * m + q) * m + r] += w * j.d3(jj, p, q, r);
                        }
                    }
                }
            }
        }
    }
    // Input-side: contract each derivative slot with L, one slot at a time.
    let contract_last = |t: &[f64], rank: usize| -> Vec<f64> {
        // t has shape n x m^rank; replace the last slot index by the new
        // coordinate index via L[old][new].
        let stride = m.pow(rank as u32 - 1);
        let mut out = vec![0.0; t.len()];
        for lead in 0..n * stride {
            for new in 0..m {
                let mut acc = 0.0;
                for old in 0..m {
                    acc += t[lead * m + old] * l.get(old, new);
                }
                out[lead * m + new] = acc;
            }
        }
        out
    };
    // Rotate slots so every slot takes a turn as the last one.
    let rotate = |t: &[f64], rank: usize| -> Vec<f64> {
        // (i, s1, s2, .. sr) -> (i, sr, s1, .. s_{r-1})
        let total = m.pow(rank as u32);
        let mut out = vec![0.0; t.len()];
        for i in 0..n {
            for idx in 0..total {
                let last = idx % m;
                let rest = idx / m;
                let new_idx = last * (total / m) + rest;
                out[i * total + new_idx] = t[i * total + idx];
            }
        }
        out
    };
    let d1 = contract_last(&d1, 1);
    let d2 = if ord >= 2 {
        let t = contract_last(&d2, 2);
        let t = rotate(&t, 2);
        let t = contract_last(&t, 2);
        rotate(&t, 2)
    } else {
        d2
    };
    let d3 = if ord >= 3 {
        let mut t = d3;
        for _ in 0..3 {
            t = contract_last(&t, 3);
            t = rotate(&t, 3);
        }
        t
    } else {
        d3
    };
    Jet3::new(n, j.order(), v, d1, d2, d3)
}

/// Order-2 Taylor coefficients of the center manifold `y = h(u, eps)`.
#[derive(Debug, Clone)]
pub struct CenterCoeffs {
    /// Coefficient of `u^2`.
    pub h20: Vec<f64>,
    /// Coefficient of `u * eps`.
    pub h11: Vec<f64>,
    /// Coefficient of `eps^2`.
    pub h02: Vec<f64>,
}

/// Solve the invariance equation at order 2: since `F` and `G` have no
/// linear part and `eps' = 0`, the quadratic terms decouple into
/// `M h20 = -G_uu/2`, `M h11 = -G_ue`, `M h02 = -G_ee/2`.
pub fn center_coeffs(nf: &NormalForm) -> Result<CenterCoeffs> {
    let n = nf.n();
    if n == 1 {
        return Ok(CenterCoeffs { h20: Vec::new(), h11: Vec::new(), h02: Vec::new() });
    }
    let m = nf.m.as_ref().expect("n > 1 has a hyperbolic block");
    let jet = &nf.jet;
    let rhs = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (1..n).map(f).collect() };
    let g_uu = rhs(&|i| -0.5 * jet.d2(i, 0, 0));
    let g_ue = rhs(&|i| -jet.d2(i, 0, n));
    let g_ee = rhs(&|i| -0.5 * jet.d2(i, n, n));
    let h20 = smallmat::solve(m, &g_uu)?;
    let h11 = smallmat::solve(m, &g_ue)?;
    let h02 = smallmat::solve(m, &g_ee)?;
    // Residual of the order-2 invariance identity (sanity, should be exact
    // up to roundoff).
    for (h, g) in [(&h20, &g_uu), (&h11, &g_ue), (&h02, &g_ee)] {
        let mh = m.mul_vec(h)?;
        for (a, b) in mh.iter().zip(g.iter()) {
            if (a - b).abs() > 1e-8 * (1.0 + b.abs()) {
                return Err(Error::Invalid("invariance equation residual too large".into()));
            }
        }
    }
    Ok(CenterCoeffs { h20, h11, h02 })
}

/// Derivatives of the reduced scalar field `F(u, h(u, eps), eps)` at 0.
#[derive(Debug, Clone)]
pub struct ReducedField {
    /// Mixed `u`-`eps` second derivative (the transversality quantity).
    pub f_ue: f64,
    /// Second `u`-derivative (vanishes in theory when P1/P2 hold; recorded
    /// as a diagnostic).
    pub f_uu: f64,
    /// Third `u`-derivative, including the curvature coupling through h.
    pub f_uuu: f64,
}

pub fn reduced_derivs(nf: &NormalForm, cc: &CenterCoeffs) -> ReducedField {
    let n = nf.n();
    let jet = &nf.jet;
    let f_uu = jet.d2(0, 0, 0);
    // h has no linear terms (after the shear), and F_y(0) = 0, so the only
    // extra contributions at this order come through h's curvature.
    let f_ue = jet.d2(0, 0, n)
        + (1..n).map(|j| jet.d2(0, 0, j) * cc.h11[j - 1]).sum::<f64>() * 0.0;
    let f_uuu = jet.d3(0, 0, 0, 0)
        + 6.0 * (1..n).map(|j| jet.d2(0, 0, j) * cc.h20[j - 1]).sum::<f64>();
    ReducedField { f_ue, f_uu, f_uuu }
}

/// The two pieces of the P3 combination and their sum.
#[derive(Debug, Clone, Copy)]
pub struct P3Parts {
    /// `D_uu det(D_z W)` at the origin.
    pub d_uu_det: f64,
    /// `-D_y det(D_z W) . (M^{-1} G_uu)`.
    pub correction: f64,
    pub value: f64,
}

/// P3 evaluated directly: second `u`-derivative of the Jacobian determinant
/// plus the hyperbolic correction. The determinant curve is expanded with a
/// division-free series determinant, so a singular Jacobian at the point is
/// fine.
pub fn p3_value(nf: &NormalForm) -> Result<P3Parts> {
    let n = nf.n();
    let jet = &nf.jet;
    let j0 = jet.x_jacobian();
    let j1 = jet.jacobian_deriv(0);
    let j2 = jet.jacobian_deriv2(0, 0).scale(0.5);
    let s = smallmat::det_series2(&j0, &j1, &j2)?;
    let d_uu_det = 2.0 * s.a2;
    let correction = if n == 1 {
        0.0
    } else {
        let m = nf.m.as_ref().expect("hyperbolic block");
        let minv_guu = smallmat::solve(m, &nf.g_uu())?;
        let grad = smallmat::det_gradient_of_jet(jet)?;
        -(1..n).map(|j| grad[j] * minv_guu[j - 1]).sum::<f64>()
    };
    Ok(P3Parts { d_uu_det, correction, value: d_uu_det + correction })
}

/// P3 through the center manifold: second derivative of
/// `u -> det(D_z W)(u, h(u, 0))`, using the curve's curvature
/// `c''(0) = (0, 2 h20) = (0, -M^{-1} G_uu)`.
pub fn p3_via_manifold(nf: &NormalForm, cc: &CenterCoeffs) -> Result<f64> {
    let n = nf.n();
    let jet = &nf.jet;
    let j0 = jet.x_jacobian();
    let j1 = jet.jacobian_deriv(0);
    let mut j2 = jet.jacobian_deriv2(0, 0).scale(0.5);
    for j in 1..n {
        j2 = j2.add(&jet.jacobian_deriv(j).scale(cc.h20[j - 1]))?;
    }
    let s = smallmat::det_series2(&j0, &j1, &j2)?;
    Ok(2.0 * s.a2)
}
