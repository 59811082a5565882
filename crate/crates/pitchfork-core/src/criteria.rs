//! The four conditions P0-P3, margin-aware reports, and the classifier
//! that reconciles them with brute-force equilibrium counts.
//!
//! For a parametrized field `V(x, eps)` with `V(x0, eps0) = 0`:
//!
//! * **P0** — `x0` is an isolated equilibrium, the Jacobian has a simple
//!   zero eigenvalue and no other imaginary spectrum, and the topological
//!   index of `x0` is nonzero.
//! * **P1** — `v_l . dV/deps = 0` for the left kernel vector `v_l`.
//! * **P2** — the extended Jacobian `[D_x V | dV/deps]` has a kernel vector
//!   `omega` with nonzero last component, and the gradient of
//!   `det(D_x V)` paired with `omega` is nonzero.
//! * **P3** — the cubic-order combination `D_uu det - D_y det . (M^-1 G_uu)`
//!   from the center reduction is nonzero.
//!
//! P0-P2 plus a count change force a pitchfork-type (1 -> k) bifurcation;
//! adding P3 pins k = 3 (a genuine pitchfork).

use crate::centerman::{self, NormalForm};
use crate::equilibria::{self, jet_or_fd};
use crate::field::{jet, FieldSpec};
use crate::index::{self, IndexMethod};
use crate::smallmat;
use crate::{Error, Result};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Numeric thresholds for every pass/fail decision, so reports can show
/// the margin between witness and threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Residual below which a point counts as an equilibrium.
    pub tol_res: f64,
    /// Modulus below which an eigenvalue counts as zero.
    pub tol_zero: f64,
    /// Bound on |v_l . dV/deps| for P1 to hold.
    pub tol_p1: f64,
    /// Minimum |directional derivative| for P2 to hold.
    pub tol_p2: f64,
    /// Minimum |P3 value| (and minimum magnitude to call a Taylor
    /// coefficient decisively nonzero).
    pub tol_p3: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_res: 1e-10,
            tol_zero: 1e-7,
            tol_p1: 1e-7,
            tol_p2: 1e-7,
            tol_p3: 1e-6,
        }
    }
}

/// Newton seeding grid per axis, sized so the seed budget holds in any
/// dimension.
pub fn grid_for_dim(n: usize) -> usize {
    match n {
        1 => 101,
        2 => 25,
        3 => 11,
        _ => 5,
    }
}

/// Fraction of the ball radius treated as "the x0 cluster" by the
/// isolation check (anything farther out is a distinct equilibrium).
const ISOLATION_FRACTION: f64 = 0.05;

/// Relative kernel cutoff for rank decisions inside the checks.
const KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct P0Report {
    pub residual: f64,
    pub isolated: bool,
    pub simple_nonhyp: bool,
    /// Index of `x0`; `None` when no method could determine it.
    pub index: Option<i32>,
    /// Which methods produced the (agreeing) index.
    pub index_methods: Vec<IndexMethod>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct P1Report {
    /// `v_l . dV/deps` with `|v_l| = 1`.
    pub vl_dveps: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct P2Report {
    /// Kernel vector of the extended Jacobian, last component normalized
    /// to 1 (empty when inapplicable).
    pub omega: Vec<f64>,
    /// `grad det(D_x V) . omega`.
    pub directional_deriv: f64,
    /// Sanity witness: `grad det . (v_r, 0)`, which must vanish when
    /// P0 and P1 hold (the value is then representative-independent).
    pub representative_check: f64,
    /// False when no kernel vector has a nonzero last component.
    pub applicable: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct P3Report {
    pub value: Option<f64>,
    pub via_manifold: Option<f64>,
    /// False when third derivatives could not be computed reliably
    /// (exact jets unavailable and finite differences inconsistent
    /// under step halving).
    pub available: bool,
    /// `None` exactly when `available` is false.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub p0: P0Report,
    pub p1: P1Report,
    pub p2: P2Report,
    pub p3: P3Report,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pitchfork1to3,
    Pitchfork3to1,
    PitchforkType1toK(usize),
    PitchforkTypeKto1(usize),
    SaddleNodeLikely,
    NoBifurcationDetected,
    Inconsistent,
    Undetermined,
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Verdict::Pitchfork1to3 => write!(f, "pitchfork 1->3"),
            Verdict::Pitchfork3to1 => write!(f, "pitchfork 3->1"),
            Verdict::PitchforkType1toK(k) => write!(f, "pitchfork-type 1->{k}"),
            Verdict::PitchforkTypeKto1(k) => write!(f, "pitchfork-type {k}->1"),
            Verdict::SaddleNodeLikely => write!(f, "saddle-node likely"),
            Verdict::NoBifurcationDetected => write!(f, "no bifurcation detected"),
            Verdict::Inconsistent => write!(f, "inconsistent"),
            Verdict::Undetermined => write!(f, "undetermined"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub verdict: Verdict,
    /// Which criterion chain produced the verdict.
    pub theory_basis: String,
    /// Equilibrium counts just below and just above eps0.
    pub numeric_counts: (usize, usize),
    pub notes: Vec<String>,
}

/// P0: isolated simple non-hyperbolic equilibrium with nonzero index.
pub fn check_p0(
    spec: &FieldSpec,
    x0: &[f64],
    eps0: f64,
    r: f64,
    tols: &Tolerances,
    seed: u64,
) -> Result<P0Report> {
    let n = spec.dim();
    // A singular subexpression (1/x at 0) can make the exact evaluation
    // fail even where the field extends continuously; the stencil value
    // extrapolates over the singular point.
    let v = match spec.eval(x0, eps0) {
        Ok(v) => v,
        Err(Error::DivisionByZero) | Err(Error::SqrtNegative) => {
            // Symmetric average along the main diagonal keeps every
            // coordinate away from the singular locus and recovers the
            // continuous limit to O(h^2).
            let h = 1e-6;
            let xp: Vec<f64> = x0.iter().map(|a| a + h).collect();
            let xm: Vec<f64> = x0.iter().map(|a| a - h).collect();
            let vp = spec.eval(&xp, eps0)?;
            let vm = spec.eval(&xm, eps0)?;
            vp.iter().zip(&vm).map(|(a, b)| 0.5 * (a + b)).collect()
        }
        Err(e) => return Err(e),
    };
    let residual = norm2(&v);
    if residual > tols.tol_res {
        return Err(Error::NotAnEquilibrium { residual });
    }
    let zeros = equilibria::find_zeros_in_ball(spec, x0, r, eps0, grid_for_dim(n), tols.tol_res)?;
    let cluster = ISOLATION_FRACTION * r;
    let mut nearest_outside = f64::INFINITY;
    for z in &zeros {
        let d: Vec<f64> = z.x.iter().zip(x0).map(|(a, b)| a - b).collect();
        let d = norm2(&d);
        if d > cluster {
            nearest_outside = nearest_outside.min(d);
        }
    }
    let isolated = nearest_outside.is_infinite();
    // Index oracles sample a sphere around x0; keep it as large as the
    // nearest foreign zero allows so the boundary stays well clear of the
    // zero set.
    let index_radius = if isolated { r } else { (0.5 * nearest_outside).min(r) };
    let j = jet_or_fd(spec, x0, eps0, 2)?;
    let spectrum = smallmat::eigenvalues(&j.x_jacobian(), tols.tol_zero)?;
    let simple_nonhyp = spectrum.zero_count == 1;

    let (index, index_methods) = if simple_nonhyp {
        equilibrium_index(spec, x0, eps0, index_radius, tols, seed)?
    } else {
        (None, Vec::new())
    };
    let pass = isolated && simple_nonhyp && index.map_or(false, |i| i != 0);
    Ok(P0Report { residual, isolated, simple_nonhyp, index, index_methods, pass })
}

/// Topological index of an isolated (possibly degenerate) equilibrium,
/// by consensus of every applicable method: center reduction + product
/// formula (all dimensions), boundary sign change (1D), winding and
/// perturbation sums (2D). Methods may individually abstain; the ones
/// that answer must agree. `Ok((None, _))` means no method could decide.
pub fn equilibrium_index(
    spec: &FieldSpec,
    x0: &[f64],
    eps0: f64,
    r: f64,
    tols: &Tolerances,
    seed: u64,
) -> Result<(Option<i32>, Vec<IndexMethod>)> {
    let n = spec.dim();
    let mut values: Vec<(i32, IndexMethod)> = Vec::new();
    // Primary route: center reduction + product formula; inconclusive when
    // the reduced Taylor coefficients are all below tolerance.
    if let Ok(Some(v)) = center_index(spec, x0, eps0, tols) {
        values.push((v, IndexMethod::Product));
    }
    if n == 1 {
        let f = |u: f64| -> Result<f64> { Ok(spec.eval(&[u], eps0)?[0]) };
        match index::index_1d(&f, x0[0], r, tols.tol_res) {
            Ok(res) => values.push((res.value, res.method)),
            Err(Error::InconclusiveRadius { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if n == 2 {
        match index::winding_2d(spec, x0, eps0, r, 256) {
            Ok(res) => values.push((res.value, res.method)),
            Err(Error::ZeroOnBoundary) => {}
            Err(e) => return Err(e),
        }
        match index::index_by_perturbation(spec, x0, eps0, r, seed) {
            Ok(res) => values.push((res.value, res.method)),
            Err(Error::ZeroOnBoundary)
            | Err(Error::BudgetExceeded { .. })
            | Err(Error::InconclusiveRadius { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    for w in values.windows(2) {
        if w[0].0 != w[1].0 {
            return Err(Error::IndexOracleDisagreement { a: w[0].0, b: w[1].0 });
        }
    }
    let index = values.first().map(|(v, _)| *v);
    let methods = values.into_iter().map(|(_, m)| m).collect();
    Ok((index, methods))
}

/// Index from the center reduction: sign analysis of the reduced scalar
/// field times the degree of the hyperbolic block. `Ok(None)` when the
/// reduced Taylor coefficients are too small to decide.
fn center_index(
    spec: &FieldSpec,
    x0: &[f64],
    eps0: f64,
    tols: &Tolerances,
) -> Result<Option<i32>> {
    let nf = centerman::normalize(spec, x0, eps0, tols.tol_zero)?;
    let cc = centerman::center_coeffs(&nf)?;
    let rf = centerman::reduced_derivs(&nf, &cc);
    let ind_center = if rf.f_uu.abs() > tols.tol_p3 {
        // Leading term even: no sign change, index 0.
        0
    } else if rf.f_uuu.abs() > tols.tol_p3 {
        if rf.f_uuu > 0.0 {
            1
        } else {
            -1
        }
    } else {
        return Ok(None);
    };
    let stable = match &nf.m {
        Some(m) => smallmat::eigenvalues(m, tols.tol_zero)?.stable_count,
        None => 0,
    };
    Ok(Some(index::index_product(ind_center, stable)))
}

/// P1: the left kernel vector annihilates the parameter derivative.
pub fn check_p1(spec: &FieldSpec, x0: &[f64], eps0: f64, tols: &Tolerances) -> Result<P1Report> {
    let j = jet_or_fd(spec, x0, eps0, 1)?;
    let left = smallmat::kernel_left(&j.x_jacobian(), KERNEL_TOL);
    if left.len() != 1 {
        return Err(Error::ZeroEigenvalueNotSimple { count: left.len() });
    }
    let vl = &left[0];
    let deps = j.d_eps();
    let vl_dveps: f64 = vl.iter().zip(&deps).map(|(a, b)| a * b).sum();
    Ok(P1Report { vl_dveps, pass: vl_dveps.abs() <= tols.tol_p1 })
}

/// P2: kernel direction of the extended Jacobian with nonzero parameter
/// component, along which the determinant gradient is nonzero.
pub fn check_p2(spec: &FieldSpec, x0: &[f64], eps0: f64, tols: &Tolerances) -> Result<P2Report> {
    let n = spec.dim();
    let j = jet_or_fd(spec, x0, eps0, 2)?;
    let ext = j.extended_jacobian();
    let kernel = smallmat::kernel_right(&ext, KERNEL_TOL);
    let grad = smallmat::det_gradient_of_jet(&j)?;
    // Sanity: the gradient annihilates the state-space kernel direction,
    // so the choice of representative below does not matter.
    let vr = smallmat::kernel_right(&j.x_jacobian(), KERNEL_TOL);
    let representative_check = vr
        .first()
        .map(|v| v.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>())
        .unwrap_or(0.0);
    let best = kernel
        .iter()
        .max_by(|a, b| a[n].abs().partial_cmp(&b[n].abs()).expect("finite"));
    let omega: Vec<f64> = match best {
        Some(w) if w[n].abs() > 1e-6 => w.iter().map(|v| v / w[n]).collect(),
        _ => {
            return Ok(P2Report {
                omega: Vec::new(),
                directional_deriv: 0.0,
                representative_check,
                applicable: false,
                pass: false,
            });
        }
    };
    let directional_deriv: f64 = grad.iter().zip(&omega).map(|(a, b)| a * b).sum();
    Ok(P2Report {
        omega,
        directional_deriv,
        representative_check,
        applicable: true,
        pass: directional_deriv.abs() > tols.tol_p2,
    })
}

/// P3: the cubic combination from the center reduction, through exact jets
/// when possible and step-halved finite differences otherwise.
pub fn check_p3(spec: &FieldSpec, x0: &[f64], eps0: f64, tols: &Tolerances) -> Result<P3Report> {
    match jet(spec, x0, eps0, 3) {
        Ok(j) => {
            let nf = centerman::normalize_from_jet(&j, x0, eps0, tols.tol_zero)?;
            let (value, via) = p3_pair(&nf)?;
            Ok(p3_report(value, via, tols))
        }
        Err(Error::SingularJetPoint) => {
            // Finite differences only: accept the estimate when halving
            // the step does not move it.
            let h = 1e-5;
            let run = |h: f64| -> Result<(f64, f64)> {
                let nf = centerman::normalize_fd(spec, x0, eps0, tols.tol_zero, h)?;
                p3_pair(&nf)
            };
            let (a, av) = run(h)?;
            let (b, bv) = run(0.5 * h)?;
            let consistent = (a - b).abs() <= f64::max(tols.tol_p3, 1e-3 * a.abs())
                && (av - bv).abs() <= f64::max(tols.tol_p3, 1e-3 * av.abs());
            if consistent {
                Ok(p3_report(a, av, tols))
            } else {
                Ok(P3Report { value: None, via_manifold: None, available: false, pass: None })
            }
        }
        Err(e) => Err(e),
    }
}

fn p3_pair(nf: &NormalForm) -> Result<(f64, f64)> {
    let cc = centerman::center_coeffs(nf)?;
    let parts = centerman::p3_value(nf)?;
    let via = centerman::p3_via_manifold(nf, &cc)?;
    Ok((parts.value, via))
}

fn p3_report(value: f64, via: f64, tols: &Tolerances) -> P3Report {
    let pass = value.abs() > tols.tol_p3 && via.abs() > tols.tol_p3 && value * via > 0.0;
    P3Report { value: Some(value), via_manifold: Some(via), available: true, pass: Some(pass) }
}

/// Run every check plus two-sided counting and produce the verdict.
///
/// Numeric failures inside individual checks degrade to `Undetermined`
/// with an explanatory note instead of an error; only problem-level
/// failures (not an equilibrium, dimension mismatch, budget) propagate.
pub fn classify(
    spec: &FieldSpec,
    x0: &[f64],
    eps0: f64,
    r: f64,
    delta_eps: f64,
    tols: &Tolerances,
    seed: u64,
) -> Result<(ConditionReport, Classification)> {
    let mut notes: Vec<String> = Vec::new();
    let mut check_failed = false;

    let p0 = match check_p0(spec, x0, eps0, r, tols, seed) {
        Ok(p) => p,
        Err(e @ Error::NotAnEquilibrium { .. }) => return Err(e),
        Err(e) => {
            check_failed = true;
            notes.push(format!("P0 check failed: {e}"));
            P0Report {
                residual: f64::NAN,
                isolated: false,
                simple_nonhyp: false,
                index: None,
                index_methods: Vec::new(),
                pass: false,
            }
        }
    };
    let p1 = match check_p1(spec, x0, eps0, tols) {
        Ok(p) => p,
        Err(e) => {
            check_failed = true;
            notes.push(format!("P1 check failed: {e}"));
            P1Report { vl_dveps: f64::NAN, pass: false }
        }
    };
    let p2 = match check_p2(spec, x0, eps0, tols) {
        Ok(p) => p,
        Err(e) => {
            check_failed = true;
            notes.push(format!("P2 check failed: {e}"));
            P2Report {
                omega: Vec::new(),
                directional_deriv: f64::NAN,
                representative_check: f64::NAN,
                applicable: false,
                pass: false,
            }
        }
    };
    let p3 = match check_p3(spec, x0, eps0, tols) {
        Ok(p) => p,
        Err(e) => {
            notes.push(format!("P3 check failed: {e}"));
            P3Report { value: None, via_manifold: None, available: false, pass: None }
        }
    };
    if !p3.available {
        notes.push("P3 unavailable: third derivatives not reliably computable here".into());
    }

    let counts =
        equilibria::count_two_sided(spec, x0, eps0, delta_eps, r, grid_for_dim(spec.dim()), tols.tol_res)?;
    let (k_lo, k_hi) = counts;

    // Transversal direction as corroboration of which side holds the
    // extra equilibria.
    if p0.pass && p1.pass && p2.pass {
        if let Ok(nf) = centerman::normalize(spec, x0, eps0, tols.tol_zero) {
            if let Ok(cc) = centerman::center_coeffs(&nf) {
                let rf = centerman::reduced_derivs(&nf, &cc);
                if rf.f_ue.abs() > tols.tol_p2 {
                    let side = if rf.f_ue * sign_of_counts(counts) > 0.0 { "agrees" } else { "disagrees" };
                    notes.push(format!(
                        "transversal coefficient F_ue = {:.6e} {} with the counted direction",
                        rf.f_ue, side
                    ));
                }
            }
        }
    }

    let verdict;
    let theory_basis;
    if check_failed {
        verdict = Verdict::Undetermined;
        theory_basis = String::from("none (check failure)");
    } else if p0.pass && p1.pass && p2.pass && p3.pass == Some(true) {
        theory_basis = String::from("full pitchfork criteria (P0-P3)");
        verdict = match counts {
            (1, 3) => Verdict::Pitchfork1to3,
            (3, 1) => Verdict::Pitchfork3to1,
            _ => {
                notes.push(format!(
                    "criteria predict a 1->3 or 3->1 pattern but counts are {k_lo}->{k_hi}"
                ));
                Verdict::Inconsistent
            }
        };
    } else if p0.pass && p1.pass && p2.pass {
        theory_basis = String::from("pitchfork-type criteria (P0-P2)");
        verdict = if k_lo == 1 && k_hi >= 3 {
            Verdict::PitchforkType1toK(k_hi)
        } else if k_hi == 1 && k_lo >= 3 {
            Verdict::PitchforkTypeKto1(k_lo)
        } else {
            notes.push(format!(
                "criteria predict a 1->k (k >= 3) pattern but counts are {k_lo}->{k_hi}"
            ));
            Verdict::Inconsistent
        };
    } else if !p0.pass && p0.index == Some(0) && k_lo.abs_diff(k_hi) == 2 {
        theory_basis = String::from("index-zero equilibrium, a pair of zeros appears/disappears");
        verdict = Verdict::SaddleNodeLikely;
    } else if !p0.pass && p0.index == Some(0) && k_lo.abs_diff(k_hi) == 1 {
        theory_basis = String::from("index-zero equilibrium (count change from a ball-boundary crossing)");
        notes.push(format!(
            "count change {k_lo}->{k_hi} is consistent with a zero crossing the search-ball boundary"
        ));
        verdict = Verdict::NoBifurcationDetected;
    } else if k_lo == k_hi {
        theory_basis = String::from("count-only (criteria not satisfied)");
        verdict = Verdict::NoBifurcationDetected;
    } else {
        theory_basis = String::from("none");
        notes.push(format!(
            "equilibrium count changes ({k_lo}->{k_hi}) but the criteria do not apply"
        ));
        verdict = Verdict::Undetermined;
    }

    Ok((
        ConditionReport { p0, p1, p2, p3, tolerances: *tols },
        Classification { verdict, theory_basis, numeric_counts: counts, notes },
    ))
}

fn sign_of_counts((lo, hi): (usize, usize)) -> f64 {
    if hi > lo {
        1.0
    } else if lo > hi {
        -1.0
    } else {
        0.0
    }
}

fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}
