//! Solvability conditions for Δᵐu = c − h·eᵘ, and explicit constructions of
//! functions satisfying the constraint sets the variational solvers minimize
//! over: {∫h·eᵛ dμ = 0, ∫v dμ = 0} for c = 0 and {∫h·eᵘ dμ = c·Vol(V)} for
//! c ≠ 0.

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, GraphError, VertexFunction};
use crate::operators::{average, integrate, OperatorError, Problem};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FeasibilityError {
    #[error(transparent)]
    Domain(#[from] GraphError),

    #[error("precondition failed: {detail}")]
    PreconditionFailed { detail: String },

    #[error("bracketing failed: {detail}")]
    BracketingFailed { detail: String },
}

impl From<OperatorError> for FeasibilityError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Domain(d) => FeasibilityError::Domain(d),
            other => FeasibilityError::PreconditionFailed { detail: other.to_string() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseSign {
    ZeroC,
    PositiveC,
    NegativeC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeasibilityStatus {
    /// A theorem-backed existence certificate applies.
    SolvableCertified,
    /// Necessary conditions hold but sufficiency depends on c vs the
    /// critical constant c₋(h).
    NecessaryConditionsHold,
    /// A necessary condition fails; no solution exists.
    Infeasible,
}

/// Named condition results backing a verdict.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionReasons {
    pub h_changes_sign: bool,
    pub integral_h_negative: bool,
    pub h_positive_somewhere: bool,
    pub mean_h_negative: bool,
    pub h_nonpositive_nontrivial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityVerdict {
    pub case: CaseSign,
    pub status: FeasibilityStatus,
    pub reasons: ConditionReasons,
}

/// Evaluates the solvability conditions for the given problem.
///
/// For c = 0 existence is equivalent to h changing sign with ∫h dμ < 0; for
/// c > 0 it is equivalent to h being positive somewhere. For c < 0 a mean
/// h̄ ≥ 0 rules out solutions, h̄ < 0 leaves solvability dependent on the
/// critical constant, and for m > 1 a strictly negative h certifies a
/// solution outright.
pub fn check(g: &Graph, p: &Problem) -> Result<FeasibilityVerdict, FeasibilityError> {
    g.check_domain(p.h())?;
    let h = p.h();
    let integral = integrate(g, h)?;
    let positive_somewhere = h.values().iter().any(|&v| v > 0.0);
    let negative_somewhere = h.values().iter().any(|&v| v < 0.0);
    let nonpositive_everywhere = h.values().iter().all(|&v| v <= 0.0);
    let negative_everywhere = h.values().iter().all(|&v| v < 0.0);

    let reasons = ConditionReasons {
        h_changes_sign: positive_somewhere && negative_somewhere,
        integral_h_negative: integral < 0.0,
        h_positive_somewhere: positive_somewhere,
        mean_h_negative: integral < 0.0,
        h_nonpositive_nontrivial: nonpositive_everywhere && negative_somewhere,
    };

    let c = p.constant();
    let (case, status) = if c == 0.0 {
        let ok = reasons.h_changes_sign && reasons.integral_h_negative;
        (
            CaseSign::ZeroC,
            if ok { FeasibilityStatus::SolvableCertified } else { FeasibilityStatus::Infeasible },
        )
    } else if c > 0.0 {
        (
            CaseSign::PositiveC,
            if reasons.h_positive_somewhere {
                FeasibilityStatus::SolvableCertified
            } else {
                FeasibilityStatus::Infeasible
            },
        )
    } else {
        let status = if !reasons.mean_h_negative {
            FeasibilityStatus::Infeasible
        } else if p.order() > 1 && negative_everywhere {
            FeasibilityStatus::SolvableCertified
        } else {
            FeasibilityStatus::NecessaryConditionsHold
        };
        (CaseSign::NegativeC, status)
    };

    Ok(FeasibilityVerdict { case, status, reasons })
}

const ELL_MAX: f64 = 700.0;
const BISECT_MAX_ITER: usize = 200;

fn spike_heights() -> impl Iterator<Item = f64> {
    let mut ell = 0.5;
    std::iter::from_fn(move || {
        ell *= 2.0;
        if ell <= 512.0 {
            Some(ell)
        } else if ell < 2.0 * ELL_MAX {
            ell = 2.0 * ELL_MAX;
            Some(ELL_MAX)
        } else {
            None
        }
    })
}

/// Constructs v* with ∫h·e^{v*} dμ = 0 and ∫v* dμ = 0.
///
/// A spike of height ℓ at the vertex maximizing h makes ∫h·e^{tv₁} change
/// sign on t ∈ (0,1); bisection locates the root, and subtracting the mean
/// rescales the first constraint by a positive factor, preserving the zero.
pub fn seed_b1(g: &Graph, h: &VertexFunction) -> Result<VertexFunction, FeasibilityError> {
    g.check_domain(h)?;
    let integral = integrate(g, h)?;
    let changes_sign =
        h.values().iter().any(|&v| v > 0.0) && h.values().iter().any(|&v| v < 0.0);
    if !changes_sign || integral >= 0.0 {
        return Err(FeasibilityError::PreconditionFailed {
            detail: format!(
                "requires sign-changing h with ∫h dμ < 0; got ∫h dμ = {integral}, changes sign: {changes_sign}"
            ),
        });
    }

    let spike = argmax(h.values());
    let spike_mass = g.measure(spike) * h.value(spike);
    let rest = integral - spike_mass;
    // φ(t) = ∫h e^{t v₁} dμ with v₁ the ℓ-spike; φ(0) = ∫h < 0
    let mut chosen = None;
    for ell in spike_heights() {
        if spike_mass * (ell.exp() - 1.0) + integral > 0.0 {
            chosen = Some(ell);
            break;
        }
    }
    let ell = chosen.ok_or_else(|| FeasibilityError::BracketingFailed {
        detail: "no spike height makes ∫h·e^{v₁} dμ positive".into(),
    })?;

    let phi = |t: f64| spike_mass * (t * ell).exp() + rest;
    let t0 = bisect_to_zero(phi, 0.0, 1.0, 1e-12);

    let mut v = VertexFunction::zero(g);
    v.set(spike, t0 * ell);
    let mean = average(g, &v)?;
    Ok(v.shift(-mean))
}

/// Constructs u with ∫h·eᵘ dμ = c·Vol(V) by interpolating between an ℓ-spike
/// and the constant −ℓ, doubling ℓ until the endpoints bracket the target.
pub fn seed_b2(g: &Graph, h: &VertexFunction, c: f64) -> Result<VertexFunction, FeasibilityError> {
    g.check_domain(h)?;
    let target = c * g.volume();
    let integral = integrate(g, h)?;
    let tol = 1e-10 * (1.0 + target.abs());
    if (integral - target).abs() <= tol {
        return Ok(VertexFunction::zero(g));
    }

    // spike pushes ∫h·eᵘ toward +∞ (at max h) or −∞ (at min h)
    let push_up = if target != 0.0 { target > 0.0 } else { integral < 0.0 };
    let spike = if push_up { argmax(h.values()) } else { argmin(h.values()) };
    let spike_mass = g.measure(spike) * h.value(spike);
    if (push_up && spike_mass <= 0.0) || (!push_up && spike_mass >= 0.0) {
        return Err(FeasibilityError::BracketingFailed {
            detail: format!(
                "∫h·eᵘ dμ cannot reach {target}: h has no vertex of the required sign"
            ),
        });
    }

    let mut bracket = None;
    for ell in spike_heights() {
        let at_constant = (-ell).exp() * integral;
        let at_spike = spike_mass * (ell.exp() - 1.0) + integral;
        if (at_constant - target) * (at_spike - target) <= 0.0 {
            bracket = Some(ell);
            break;
        }
    }
    let ell = bracket.ok_or_else(|| FeasibilityError::BracketingFailed {
        detail: format!("no spike height ≤ {ELL_MAX} brackets the target {target}"),
    })?;

    // ψ(t) = ∫h e^{t·u_ℓ + (1−t)(−ℓ)} dμ − target, continuous on [0,1]
    let rest = integral - spike_mass;
    let psi = |t: f64| {
        spike_mass * ((2.0 * t - 1.0) * ell).exp() + rest * (-(1.0 - t) * ell).exp() - target
    };
    let t0 = bisect_to_zero(psi, 0.0, 1.0, 1e-12 * (1.0 + target.abs()));

    let mut u = VertexFunction::constant(g, -(1.0 - t0) * ell);
    u.set(spike, (2.0 * t0 - 1.0) * ell);

    let achieved: f64 = u
        .values()
        .iter()
        .zip(h.values())
        .zip(g.measures())
        .map(|((&uv, &hv), &mu)| mu * crate::operators::h_exp_term(hv, uv))
        .sum();
    if (achieved - target).abs() > tol {
        return Err(FeasibilityError::BracketingFailed {
            detail: format!("root-finding left constraint gap {:e}", (achieved - target).abs()),
        });
    }
    Ok(u)
}

/// Bisection for a sign change of `f` on [lo, hi], to |f| ≤ tol or the
/// iteration cap. Callers guarantee the bracket.
fn bisect_to_zero(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    let mut mid = 0.5 * (lo + hi);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..BISECT_MAX_ITER {
        mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid.abs() <= tol {
            return mid;
        }
        if (fmid > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    mid
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeSpec, GraphSpec, VertexSpec};
    use crate::operators::Problem;
    use approx::assert_relative_eq;

    fn k2() -> Graph {
        build_graph(&GraphSpec {
            vertices: vec![
                VertexSpec { id: "a".into(), mu: 1.0 },
                VertexSpec { id: "b".into(), mu: 1.0 },
            ],
            edges: vec![EdgeSpec { u: "a".into(), v: "b".into(), w: 1.0 }],
        })
        .unwrap()
    }

    #[test]
    fn check_zero_c() {
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![1.0, -2.0]).unwrap();
        let p = Problem::new(1, 0.0, h).unwrap();
        let v = check(&g, &p).unwrap();
        assert_eq!(v.case, CaseSign::ZeroC);
        assert_eq!(v.status, FeasibilityStatus::SolvableCertified);
        assert!(v.reasons.h_changes_sign && v.reasons.integral_h_negative);

        let h = VertexFunction::from_values(&g, vec![2.0, -1.0]).unwrap();
        let p = Problem::new(1, 0.0, h).unwrap();
        assert_eq!(check(&g, &p).unwrap().status, FeasibilityStatus::Infeasible);
    }

    #[test]
    fn check_positive_c() {
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![-1.0, -1.0]).unwrap();
        let p = Problem::new(1, 1.0, h).unwrap();
        let v = check(&g, &p).unwrap();
        assert_eq!(v.case, CaseSign::PositiveC);
        assert_eq!(v.status, FeasibilityStatus::Infeasible);

        let h = VertexFunction::from_values(&g, vec![-1.0, 0.5]).unwrap();
        let p = Problem::new(1, 1.0, h).unwrap();
        assert_eq!(check(&g, &p).unwrap().status, FeasibilityStatus::SolvableCertified);
    }

    #[test]
    fn check_negative_c() {
        let g = k2();
        // h̄ = 0 is not < 0
        let h = VertexFunction::from_values(&g, vec![1.0, -1.0]).unwrap();
        let p = Problem::new(1, -1.0, h).unwrap();
        let v = check(&g, &p).unwrap();
        assert_eq!(v.case, CaseSign::NegativeC);
        assert_eq!(v.status, FeasibilityStatus::Infeasible);

        let h = VertexFunction::from_values(&g, vec![1.0, -2.0]).unwrap();
        let p = Problem::new(1, -1.0, h).unwrap();
        assert_eq!(
            check(&g, &p).unwrap().status,
            FeasibilityStatus::NecessaryConditionsHold
        );

        // strictly negative h certifies for higher order
        let h = VertexFunction::from_values(&g, vec![-1.0, -2.0]).unwrap();
        let p = Problem::new(2, -1.0, h.clone()).unwrap();
        assert_eq!(
            check(&g, &p).unwrap().status,
            FeasibilityStatus::SolvableCertified
        );
        // but h ≤ 0 with a zero does not (left open for m > 1)
        let h0 = VertexFunction::from_values(&g, vec![0.0, -2.0]).unwrap();
        let p = Problem::new(2, -1.0, h0).unwrap();
        assert_eq!(
            check(&g, &p).unwrap().status,
            FeasibilityStatus::NecessaryConditionsHold
        );
    }

    #[test]
    fn seed_b1_k2_closed_form() {
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![1.0, -2.0]).unwrap();
        let v = seed_b1(&g, &h).unwrap();
        let half_ln2 = 0.5 * 2f64.ln();
        assert_relative_eq!(v.value(0), half_ln2, epsilon = 1e-12);
        assert_relative_eq!(v.value(1), -half_ln2, epsilon = 1e-12);

        let weighted: f64 = integrate(&g, &v.zip_map(&h, |vv, hv| hv * vv.exp())).unwrap();
        assert!(weighted.abs() <= 1e-10);
        assert!(average(&g, &v).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn seed_b1_rejects_bad_h() {
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            seed_b1(&g, &h),
            Err(FeasibilityError::PreconditionFailed { .. })
        ));
    }

    #[test]
    fn seed_b2_brackets_and_roots() {
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![1.0, -1.0]).unwrap();
        let u = seed_b2(&g, &h, 1.0).unwrap();
        let achieved = integrate(&g, &u.zip_map(&h, |uv, hv| hv * uv.exp())).unwrap();
        assert!((achieved - 2.0).abs() <= 1e-10 * 3.0);

        // already met by the zero function
        let h = VertexFunction::from_values(&g, vec![3.0, -1.0]).unwrap();
        let u = seed_b2(&g, &h, 1.0).unwrap();
        assert_eq!(u.norm_inf(), 0.0);

        // unreachable target
        let h = VertexFunction::from_values(&g, vec![-1.0, -1.0]).unwrap();
        assert!(matches!(
            seed_b2(&g, &h, 1.0),
            Err(FeasibilityError::BracketingFailed { .. })
        ));
    }

    #[test]
    fn seed_b2_negative_target() {
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![-0.5, -2.0]).unwrap();
        let c = -3.0;
        let u = seed_b2(&g, &h, c).unwrap();
        let achieved = integrate(&g, &u.zip_map(&h, |uv, hv| hv * uv.exp())).unwrap();
        assert!((achieved - c * g.volume()).abs() <= 1e-10 * (1.0 + (c * g.volume()).abs()));
    }
}
