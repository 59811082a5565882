//! Plain-text analysis report with aligned `key: value` lines, stable
//! enough for golden-file comparison.

use pitchfork_core::criteria::{Classification, ConditionReport};
use pitchfork_core::Problem;
use std::fmt::Write as _;
use std::path::Path;

/// Deterministic float formatting: round to 12 significant digits, then
/// print the shortest representation that round-trips (so `-2.0` prints as
/// `-2.0`, never `-1.9999999999998`).
pub fn fmt_f(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return String::from("0.0");
    }
    let mag = x.abs().log10().floor();
    let scale = 10f64.powf(11.0 - mag);
    let y = (x * scale).round() / scale;
    format!("{y:?}")
}

fn vec_f(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(" ")
}

fn pass(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn render(
    file: &Path,
    problem: &Problem,
    radius: f64,
    delta_eps: f64,
    report: &ConditionReport,
    class: &Classification,
) -> String {
    let mut s = String::new();
    let t = &report.tolerances;
    let _ = writeln!(s, "problem:     {}", file.display());
    let _ = writeln!(s, "field:       dim {}, param {}", problem.field.dim(), problem.field.param_name());
    let _ = writeln!(s, "point:       {}", vec_f(&problem.point));
    let _ = writeln!(s, "eps0:        {}", fmt_f(problem.eps0));
    let _ = writeln!(s, "radius:      {}", fmt_f(radius));
    let _ = writeln!(s, "delta_eps:   {}", fmt_f(delta_eps));
    let _ = writeln!(s);

    let p0 = &report.p0;
    let _ = writeln!(s, "P0: {}", pass(p0.pass));
    let _ = writeln!(s, "P0: residual = {} (<= {})", fmt_f(p0.residual), fmt_f(t.tol_res));
    let _ = writeln!(s, "P0: isolated = {}", p0.isolated);
    let _ = writeln!(s, "P0: simple non-hyperbolic = {}", p0.simple_nonhyp);
    match p0.index {
        Some(i) => {
            let methods = p0
                .index_methods
                .iter()
                .map(|m| format!("{m:?}"))
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(s, "P0: index = {i} (by {methods})");
        }
        None => {
            let _ = writeln!(s, "P0: index = undetermined");
        }
    }

    let p1 = &report.p1;
    let _ = writeln!(s, "P1: {}", pass(p1.pass));
    let _ = writeln!(s, "P1: v_l . dV/deps = {} (|.| <= {})", fmt_f(p1.vl_dveps), fmt_f(t.tol_p1));

    let p2 = &report.p2;
    let _ = writeln!(s, "P2: {}", pass(p2.pass));
    if p2.applicable {
        let _ = writeln!(
            s,
            "P2: directional derivative = {} (|.| > {})",
            fmt_f(p2.directional_deriv),
            fmt_f(t.tol_p2)
        );
        let _ = writeln!(s, "P2: omega = {}", vec_f(&p2.omega));
        let _ = writeln!(s, "P2: representative check = {}", fmt_f(p2.representative_check));
    } else {
        let _ = writeln!(s, "P2: inapplicable (no kernel direction with nonzero parameter component)");
    }

    let p3 = &report.p3;
    match p3.pass {
        Some(b) => {
            let _ = writeln!(s, "P3: {}", pass(b));
        }
        None => {
            let _ = writeln!(s, "P3: UNDETERMINED");
        }
    }
    match (p3.value, p3.via_manifold) {
        (Some(v), Some(w)) => {
            let _ = writeln!(s, "P3: value = {} (|.| > {})", fmt_f(v), fmt_f(t.tol_p3));
            let _ = writeln!(s, "P3: via manifold = {}", fmt_f(w));
        }
        _ => {
            let _ = writeln!(s, "P3: value unavailable (third derivatives not reliable here)");
        }
    }

    let _ = writeln!(s);
    let (k_lo, k_hi) = class.numeric_counts;
    let _ = writeln!(s, "counts:      {k_lo} -> {k_hi}");
    let _ = writeln!(s, "theory:      {}", class.theory_basis);
    for note in &class.notes {
        let _ = writeln!(s, "note:        {note}");
    }
    let _ = writeln!(s, "verdict:     {}", class.verdict);
    s
}
