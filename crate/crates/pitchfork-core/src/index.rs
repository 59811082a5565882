//! Topological index of isolated zeros.
//!
//! Four routes are implemented and cross-checked against each other:
//! the sign-of-determinant rule at nondegenerate zeros, the 1D sign-change
//! rule, the center-block product formula, and (for n = 2) a boundary
//! winding number. A perturbation-sum fallback covers degenerate zeros in
//! any dimension: nudge the field by a small generic constant so every zero
//! in the ball becomes nondegenerate, then add up their signs.

use crate::equilibria::find_zeros_in_ball;
use crate::field::{ExprNode, FieldSpec};
use crate::rng::XorShift64;
use crate::smallmat::{self, Matrix};
use crate::{Error, Result};
use alloc::string::String;
use alloc::vec::Vec;

/// How an index value was obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexMethod {
    SignDet,
    OneDim,
    Product,
    Winding,
    PerturbationSum,
}

/// Method-specific witness for the reported value.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Determinant of the Jacobian.
    Determinant(f64),
    /// Boundary values `(f(u0 - r), f(u0 + r))`.
    BoundaryValues(f64, f64),
    /// `(center index, unstable eigenvalue count)`.
    ProductFactors(i32, usize),
    /// `(samples used, accumulated winding before rounding)`.
    WindingSamples(usize, f64),
    /// The two perturbation vectors and their (equal) index sums.
    Perturbations(Vec<f64>, Vec<f64>, i32),
}

/// An index value together with how it was computed.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexResult {
    pub value: i32,
    pub method: IndexMethod,
    pub certificate: Certificate,
}

/// Index of a nondegenerate zero: the sign of `det J`.
pub fn index_nondegenerate(j: &Matrix, tol: f64) -> Result<IndexResult> {
    let d = smallmat::det(j)?;
    if d.abs() <= tol {
        return Err(Error::SingularJacobian);
    }
    Ok(IndexResult {
        value: if d > 0.0 { 1 } else { -1 },
        method: IndexMethod::SignDet,
        certificate: Certificate::Determinant(d),
    })
}

/// Index of an isolated zero of a scalar function by the sign-change rule
/// on `[u0 - r, u0 + r]`. The caller is responsible for isolation.
pub fn index_1d(
    f: &dyn Fn(f64) -> Result<f64>,
    u0: f64,
    r: f64,
    tol: f64,
) -> Result<IndexResult> {
    if !(r > 0.0) {
        return Err(Error::Invalid("radius must be positive".into()));
    }
    let lo = f(u0 - r)?;
    let hi = f(u0 + r)?;
    for v in [lo, hi] {
        if v.abs() <= tol {
            return Err(Error::InconclusiveRadius { value: v });
        }
    }
    let value = if lo < 0.0 && hi > 0.0 {
        1
    } else if lo > 0.0 && hi < 0.0 {
        -1
    } else {
        0
    };
    Ok(IndexResult {
        value,
        method: IndexMethod::OneDim,
        certificate: Certificate::BoundaryValues(lo, hi),
    })
}

/// Product formula: the index of the full zero equals the index of the
/// center-block zero times the degree of the hyperbolic block, which is
/// `sign(det M) = (-1)^stable_count` (complex pairs contribute evenly).
///
/// `stable_count` is the number of eigenvalues of the hyperbolic block with
/// negative real part. Note this is the convention matching the boundary
/// degree of `V` itself (what the winding and perturbation oracles
/// compute); the flow's fixed-point index differs from it by `(-1)^n`.
pub fn index_product(ind_center: i32, stable_count: usize) -> i32 {
    let sign = if stable_count % 2 == 0 { 1 } else { -1 };
    ind_center * sign
}

/// Winding number of a planar field around the circle of radius `r`:
/// accumulated angular variation of `V` divided by `2 pi`.
///
/// Sample count doubles (up to 4096) until the total rounds to an integer
/// with residual below 0.2.
pub fn winding_2d(
    spec: &FieldSpec,
    center: &[f64],
    eps: f64,
    r: f64,
    samples: usize,
) -> Result<IndexResult> {
    if spec.dim() != 2 {
        return Err(Error::Invalid("winding_2d requires a 2D field".into()));
    }
    if center.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: center.len() });
    }
    if samples < 64 {
        return Err(Error::Invalid("winding_2d needs at least 64 samples".into()));
    }
    let mut n = samples;
    loop {
        let mut vals = Vec::with_capacity(n + 1);
        let mut max_norm: f64 = 0.0;
        let mut min_norm = f64::INFINITY;
        for k in 0..=n {
            let th = 2.0 * core::f64::consts::PI * k as f64 / n as f64;
            let x = [center[0] + r * libm::cos(th), center[1] + r * libm::sin(th)];
            let v = spec.eval(&x, eps)?;
            let norm = libm::hypot(v[0], v[1]);
            max_norm = max_norm.max(norm);
            min_norm = min_norm.min(norm);
            vals.push(v);
        }
        if min_norm <= 1e-12 * (1.0 + max_norm) {
            return Err(Error::ZeroOnBoundary);
        }
        let mut total = 0.0;
        for w in vals.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            // Signed angle between consecutive samples, always in (-pi, pi).
            let cross = a[0] * b[1] - a[1] * b[0];
            let dot = a[0] * b[0] + a[1] * b[1];
            total += libm::atan2(cross, dot);
        }
        let winding = total / (2.0 * core::f64::consts::PI);
        let rounded = libm::round(winding);
        if (winding - rounded).abs() < 0.2 {
            return Ok(IndexResult {
                value: rounded as i32,
                method: IndexMethod::Winding,
                certificate: Certificate::WindingSamples(n, winding),
            });
        }
        if n >= 4096 {
            return Err(Error::NonIntegerWinding { value: winding });
        }
        n *= 2;
    }
}

/// Index of the ball around `center` by the perturbation-sum route: shift
/// the field by a small generic constant, locate all zeros of the shifted
/// field in the ball, and sum `sign(det J)` over them. Run twice with
/// independent draws; the two sums must agree.
pub fn index_by_perturbation(
    spec: &FieldSpec,
    center: &[f64],
    eps: f64,
    r: f64,
    seed: u64,
) -> Result<IndexResult> {
    let n = spec.dim();
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: center.len() });
    }
    // Boundary minimum of |V| (sampled) fixes the perturbation scale.
    let (min_boundary, max_boundary) = sample_boundary_min(spec, center, eps, r)?;
    if min_boundary <= 1e-12 {
        return Err(Error::ZeroOnBoundary);
    }
    // When |V| nearly vanishes somewhere on the boundary relative to its
    // peak, the zero is flat along some direction and a generic shift
    // splits it into zeros far below any seeding grid's resolution; the
    // sum would silently miss some of them, so abstain instead.
    if min_boundary <= 1e-4 * max_boundary {
        return Err(Error::InconclusiveRadius { value: min_boundary });
    }
    let mag = 1e-3 * min_boundary;
    let eta1 = draw_direction(n, seed, mag);
    let eta2 = draw_direction(n, seed.wrapping_add(1), mag);
    let s1 = perturbed_sum(spec, center, eps, r, &eta1)?;
    let s2 = perturbed_sum(spec, center, eps, r, &eta2)?;
    if s1 != s2 {
        return Err(Error::PerturbationDisagreement { first: s1, second: s2 });
    }
    Ok(IndexResult {
        value: s1,
        method: IndexMethod::PerturbationSum,
        certificate: Certificate::Perturbations(eta1, eta2, s1),
    })
}

fn draw_direction(n: usize, seed: u64, mag: f64) -> Vec<f64> {
    let mut rng = XorShift64::new(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.next_sym()).collect();
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
    // A draw of exactly zero is (measure-)impossible but cheap to guard.
    let scale = if norm > 0.0 { mag / norm } else { mag };
    for x in &mut v {
        *x *= scale;
    }
    v
}

fn sample_boundary_min(
    spec: &FieldSpec,
    center: &[f64],
    eps: f64,
    r: f64,
) -> Result<(f64, f64)> {
    let n = spec.dim();
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    let mut eval_at = |x: &[f64]| -> Result<()> {
        let v = spec.eval(x, eps)?;
        let norm = libm::sqrt(v.iter().map(|t| t * t).sum());
        min = min.min(norm);
        max = max.max(norm);
        Ok(())
    };
    if n == 1 {
        eval_at(&[center[0] - r])?;
        eval_at(&[center[0] + r])?;
        return Ok((min, max));
    }
    // Random directions give adequate boundary coverage for small n.
    let mut rng = XorShift64::new(0x5EED_B0DA);
    for _ in 0..256 {
        let mut d: Vec<f64> = (0..n).map(|_| rng.next_sym()).collect();
        let norm = libm::sqrt(d.iter().map(|x| x * x).sum());
        if norm < 1e-9 {
            continue;
        }
        for (i, di) in d.iter_mut().enumerate() {
            *di = center[i] + r * *di / norm;
        }
        eval_at(&d)?;
    }
    Ok((min, max))
}

fn perturbed_sum(
    spec: &FieldSpec,
    center: &[f64],
    eps: f64,
    r: f64,
    eta: &[f64],
) -> Result<i32> {
    let shifted = shift_field(spec, eta)?;
    let n = spec.dim();
    let grid = match n {
        1 => 101,
        2 => 25,
        3 => 11,
        _ => 5,
    };
    let zeros = find_zeros_in_ball(&shifted, center, r, eps, grid, 1e-11)?;
    let mut sum = 0;
    for z in &zeros {
        if z.det_jac.abs() <= 1e-12 {
            // The draw failed to make this zero nondegenerate.
            return Err(Error::SingularJacobian);
        }
        sum += if z.det_jac > 0.0 { 1 } else { -1 };
    }
    Ok(sum)
}

/// The field `V - eta` for a constant vector `eta`.
fn shift_field(spec: &FieldSpec, eta: &[f64]) -> Result<FieldSpec> {
    let exprs: Vec<ExprNode> = spec
        .exprs()
        .iter()
        .zip(eta)
        .map(|(e, c)| ExprNode::sub(e.clone(), ExprNode::Const(*c)))
        .collect();
    FieldSpec::from_parts(
        String::from(spec.param_name()),
        spec.var_names().to_vec(),
        exprs,
        String::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> FieldSpec {
        src.parse().unwrap()
    }

    #[test]
    fn sign_det_basics() {
        let neg_i2 = Matrix::identity(2).scale(-1.0);
        assert_eq!(index_nondegenerate(&neg_i2, 1e-12).unwrap().value, 1);
        let saddle = Matrix::new(2, 2, alloc::vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(index_nondegenerate(&saddle, 1e-12).unwrap().value, -1);
        assert!(matches!(
            index_nondegenerate(&Matrix::zeros(2, 2), 1e-12),
            Err(Error::SingularJacobian)
        ));
    }

    #[test]
    fn one_dim_sign_rules() {
        let inc = |u: f64| Ok(u);
        assert_eq!(index_1d(&inc, 0.0, 0.5, 1e-12).unwrap().value, 1);
        // u^2 + u^3: no sign change through 0.
        let even = |u: f64| Ok(u * u + u * u * u);
        assert_eq!(index_1d(&even, 0.0, 0.4, 1e-12).unwrap().value, 0);
        // -u^3 - u^5: + to -.
        let dec = |u: f64| Ok(-u * u * u - u.powi(5));
        assert_eq!(index_1d(&dec, 0.0, 0.1, 1e-12).unwrap().value, -1);
    }

    #[test]
    fn one_dim_scale_invariance_and_inconclusive() {
        let f = |u: f64| Ok(u * u * u);
        let g = |u: f64| Ok(37.0 * u * u * u);
        assert_eq!(
            index_1d(&f, 0.0, 0.2, 1e-12).unwrap().value,
            index_1d(&g, 0.0, 0.2, 1e-12).unwrap().value
        );
        let tiny = |_: f64| Ok(1e-15);
        assert!(matches!(
            index_1d(&tiny, 0.0, 0.2, 1e-12),
            Err(Error::InconclusiveRadius { .. })
        ));
    }

    #[test]
    fn product_formula_table() {
        assert_eq!(index_product(-1, 0), -1);
        assert_eq!(index_product(1, 1), -1);
        assert_eq!(index_product(-1, 2), -1);
        assert_eq!(index_product(0, 5), 0);
    }

    #[test]
    fn winding_of_identity_and_squaring_maps() {
        let ident = parse("dim = 2\nparam = e\nvars = x y\neq 1 = x\neq 2 = y\n");
        assert_eq!(winding_2d(&ident, &[0.0, 0.0], 0.0, 1.0, 64).unwrap().value, 1);
        let square =
            parse("dim = 2\nparam = e\nvars = x y\neq 1 = x^2 - y^2\neq 2 = 2*x*y\n");
        assert_eq!(winding_2d(&square, &[0.0, 0.0], 0.0, 1.0, 64).unwrap().value, 2);
    }

    #[test]
    fn winding_zero_on_boundary_is_detected() {
        let ident = parse("dim = 2\nparam = e\nvars = x y\neq 1 = x\neq 2 = y\n");
        // Circle through the zero itself: center offset by r.
        assert!(matches!(
            winding_2d(&ident, &[1.0, 0.0], 0.0, 1.0, 64),
            Err(Error::ZeroOnBoundary)
        ));
    }

    #[test]
    fn winding_homotopy_invariance_under_radius_halving() {
        let spec = parse(
            "dim = 2\nparam = e\nvars = x y\neq 1 = y^2 - (e + 1)*y - x\neq 2 = x^2 - (e + 1)*x - y\n",
        );
        let a = winding_2d(&spec, &[0.0, 0.0], 0.0, 0.3, 128).unwrap();
        let b = winding_2d(&spec, &[0.0, 0.0], 0.0, 0.15, 128).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn perturbation_sum_matches_winding_on_degenerate_zero() {
        let spec = parse(
            "dim = 2\nparam = e\nvars = x y\neq 1 = y^2 - (e + 1)*y - x\neq 2 = x^2 - (e + 1)*x - y\n",
        );
        let w = winding_2d(&spec, &[0.0, 0.0], 0.0, 0.3, 256).unwrap();
        let p = index_by_perturbation(&spec, &[0.0, 0.0], 0.0, 0.3, 42).unwrap();
        assert_eq!(w.value, p.value);
        // Center index -1 (reduced cubic with negative coefficient) times
        // the hyperbolic degree (-1)^1: total +1.
        assert_eq!(w.value, index_product(-1, 1));
        assert_eq!(w.value, 1);
    }

    #[test]
    fn perturbation_on_nondegenerate_zero_equals_sign_det() {
        let spec = parse("dim = 2\nparam = e\nvars = x y\neq 1 = -x\neq 2 = -y\n");
        let p = index_by_perturbation(&spec, &[0.0, 0.0], 0.0, 0.5, 7).unwrap();
        assert_eq!(p.value, 1);
    }

    #[test]
    fn perturbation_1d_cubic_family_index_zero() {
        // e*x + x^2 + x^3 at e = 0 in a small ball: zero of index 0.
        let spec = parse("dim = 1\nparam = e\nvars = x\neq 1 = e*x + x^2 + x^3\n");
        let p = index_by_perturbation(&spec, &[0.0], 0.0, 0.4, 3).unwrap();
        assert_eq!(p.value, 0);
    }
}
