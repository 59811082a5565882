//! Randomized structural properties of the expression layer and jets.

use pitchfork_core::field::{jet, jet_fd, parse_field};
use pitchfork_core::{FieldSpec, Problem};
use proptest::prelude::*;

/// Random degree-3 polynomial field in two variables, vanishing at the
/// origin, rendered as problem-file source.
fn poly_field(c: &[f64; 12]) -> FieldSpec {
    let eq = |c: &[f64]| {
        format!(
            "{}*x + {}*y + {}*x^2 + {}*x*y + {}*y^2 + {}*x^3",
            c[0], c[1], c[2], c[3], c[4], c[5]
        )
    };
    let text = format!(
        "dim = 2\nparam = e\nvars = x y\npoint = 0 0\neps0 = 0\nradius = 1\n\
         eq 1 = {}\neq 2 = {}\n",
        eq(&c[..6]),
        eq(&c[6..])
    );
    Problem::parse(&text).unwrap().field
}

fn coeff() -> impl Strategy<Value = f64> {
    (-2.0f64..2.0).prop_map(|v| (v * 64.0).round() / 64.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Second and third derivative tensors are symmetric in their
    /// differentiation slots.
    #[test]
    fn jet_mixed_partials_are_symmetric(
        c in prop::array::uniform12(coeff()),
        x in -0.5f64..0.5,
        y in -0.5f64..0.5,
        eps in -0.2f64..0.2,
    ) {
        let spec = poly_field(&c);
        let j = jet(&spec, &[x, y], eps, 3).unwrap();
        for i in 0..2 {
            for a in 0..3 {
                for b in 0..3 {
                    prop_assert!((j.d2(i, a, b) - j.d2(i, b, a)).abs() <= 1e-13);
                    for d in 0..3 {
                        let base = j.d3(i, a, b, d);
                        for perm in [(a, d, b), (b, a, d), (b, d, a), (d, a, b), (d, b, a)] {
                            prop_assert!((j.d3(i, perm.0, perm.1, perm.2) - base).abs() <= 1e-13);
                        }
                    }
                }
            }
        }
    }

    /// Pretty-printing and re-parsing preserves the evaluated function.
    #[test]
    fn unparse_round_trip_preserves_values(
        c in prop::array::uniform12(coeff()),
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
        eps in -0.5f64..0.5,
    ) {
        let spec = poly_field(&c);
        let text = format!("dim = 2\nparam = e\nvars = x y\n{}", spec.unparse());
        let reparsed = parse_field(&text).unwrap();
        let a = spec.eval(&[x, y], eps).unwrap();
        let b = reparsed.eval(&[x, y], eps).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-14 * (1.0 + u.abs()));
        }
    }

    /// Central differences approximate the exact jet at second order:
    /// halving h shrinks the error by about four. The stencils are exact
    /// on cubic polynomials, so a transcendental field is needed to see
    /// the truncation term at all.
    #[test]
    fn jet_fd_is_second_order(
        a in 0.5f64..2.0,
        b in 0.5f64..2.0,
        x in -0.4f64..0.4,
        y in -0.4f64..0.4,
    ) {
        let text = format!(
            "dim = 2\nparam = e\nvars = x y\n\
             eq 1 = sin({a}*x + {b}*y) + e*x\n\
             eq 2 = exp({b}*x*y) - 1 + {a}*y^2 - e*y\n"
        );
        let spec = parse_field(&text).unwrap();
        let exact = jet(&spec, &[x, y], 0.1, 2).unwrap();
        let err = |h: f64| {
            let fd = jet_fd(&spec, &[x, y], 0.1, 2, h).unwrap();
            let mut e = 0.0f64;
            for i in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        e = e.max((exact.d2(i, p, q) - fd.d2(i, p, q)).abs());
                    }
                }
            }
            e
        };
        let e1 = err(1e-2);
        let e2 = err(5e-3);
        // Skip points where the fourth derivatives happen to vanish: the
        // leading error term is then roundoff, not O(h^2).
        prop_assume!(e1 > 1e-9);
        let slope = (e1 / e2).log2();
        prop_assert!((slope - 2.0).abs() <= 0.5, "slope {} ({} vs {})", slope, e1, e2);
    }
}
