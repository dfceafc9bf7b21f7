//! Explicit upper- and lower-solution constructions for Δu = c − h·eᵘ with
//! c < 0. An upper solution satisfies Δu₊ − c + h·e^{u₊} ≤ 0 pointwise, a
//! lower solution reverses the inequality, and a verified sandwich feeds the
//! monotone iteration.

use crate::graph::{Graph, VertexFunction};
use crate::numerics::solve_poisson_mean_zero;
use crate::operators::{average, h_exp_term, laplacian};
use crate::solvers::SolverError;

/// Pointwise defect Δu − c + h·eᵘ, with 0·eᵘ = 0 at vertices where h
/// vanishes. Upper solutions need every entry ≤ 1e−12, lower solutions
/// every entry ≥ −1e−12.
pub(crate) fn defect(
    g: &Graph,
    h: &VertexFunction,
    c: f64,
    u: &VertexFunction,
) -> Result<VertexFunction, SolverError> {
    let lap = laplacian(g, u)?;
    Ok(VertexFunction::from_fn(g, |x| {
        lap.value(x) - c + h_exp_term(h.value(x), u.value(x))
    }))
}

/// Outcome of the affine construction u₊ = a·v + b with Δv = h̄ − h:
/// a maximal with max|e^{a·v} − 1| ≤ −h̄/(2·max|h|) and e^b = a, which makes
/// u₊ an upper solution for every c ≤ c_star = a·h̄/2.
#[derive(Debug, Clone)]
pub struct UpperSolutionParams {
    /// Mean-zero solution of Δv = h̄ − h.
    pub v: VertexFunction,
    pub a: f64,
    pub b: f64,
    /// Most negative constant certified by this construction: c_star = a·h̄/2.
    pub c_star: f64,
}

impl UpperSolutionParams {
    pub fn upper_solution(&self) -> VertexFunction {
        self.v.map(|vx| self.a * vx + self.b)
    }
}

const A_MAX: f64 = 1.0;

/// Builds the affine upper solution for sign-changing h with negative mean.
///
/// The scale a is the largest value in (0, A_MAX] satisfying the defining
/// inequality (found by bisection; the degenerate v ≡ 0 admits every a and
/// is capped at A_MAX). The returned u₊ is verified pointwise at c_star.
pub fn construct_upper_solution(
    g: &Graph,
    h: &VertexFunction,
) -> Result<UpperSolutionParams, SolverError> {
    g.check_domain(h)?;
    let h_bar = average(g, h)?;
    if !(h_bar < 0.0) {
        return Err(SolverError::PreconditionFailed {
            detail: format!("requires negative mean; h̄ = {h_bar}"),
        });
    }
    let max_abs_h = h.norm_inf();
    if max_abs_h == 0.0 {
        return Err(SolverError::PreconditionFailed { detail: "h is identically zero".into() });
    }
    let bound = -h_bar / (2.0 * max_abs_h);

    let f = h.map(|hx| h_bar - hx);
    let v = solve_poisson_mean_zero(g, &f)?;

    let growth = |a: f64| -> f64 {
        v.values()
            .iter()
            .map(|&vx| ((a * vx).exp() - 1.0).abs())
            .fold(0.0, f64::max)
    };
    let a = if growth(A_MAX) <= bound {
        A_MAX
    } else {
        // keep lo on the feasible side of the inequality
        let (mut lo, mut hi) = (0.0f64, A_MAX);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if growth(mid) <= bound {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if !(a > 0.0) {
        return Err(SolverError::ConstructionFailed {
            detail: "bisection collapsed to a = 0".into(),
        });
    }

    let params = UpperSolutionParams { v, a, b: a.ln(), c_star: 0.5 * a * h_bar };
    let u_plus = params.upper_solution();
    let d = defect(g, h, params.c_star, &u_plus)?;
    if let Some(x) = d.values().iter().position(|&r| !(r <= 1e-12)) {
        return Err(SolverError::ConstructionFailed {
            detail: format!(
                "upper-solution defect {:e} at vertex {}",
                d.value(x),
                g.vertex_ids()[x]
            ),
        });
    }
    Ok(params)
}

/// Upper solution for non-positive h (h ≢ 0) at any c < 0: u₊ = a·v + b with
/// a·h̄ < c and min e^{a·v+b} > a, so the defect is h·(e^{u₊} − a) + (a·h̄ − c) ≤ 0.
pub fn construct_upper_solution_nonpositive_h(
    g: &Graph,
    h: &VertexFunction,
    c: f64,
) -> Result<VertexFunction, SolverError> {
    g.check_domain(h)?;
    require_nonpositive_h(h, c)?;
    let h_bar = average(g, h)?;

    let f = h.map(|hx| h_bar - hx);
    let v = solve_poisson_mean_zero(g, &f)?;
    let a = c / h_bar + 1.0;
    let b = (a + 1.0).ln() - a * v.min();
    let u_plus = v.map(|vx| a * vx + b);

    verify_upper_defect(g, h, c, &u_plus)?;
    Ok(u_plus)
}

/// Constant upper solution for strictly negative h: u₊ ≡ ln((|c|+1)/min|h|),
/// which keeps e^{u₊} of size |c| rather than e^{|c|}. Preferred by the
/// dispatcher for very negative c.
pub(crate) fn constant_upper_solution(
    g: &Graph,
    h: &VertexFunction,
    c: f64,
) -> Result<VertexFunction, SolverError> {
    if !(c < 0.0) || !h.values().iter().all(|&v| v < 0.0) {
        return Err(SolverError::PreconditionFailed {
            detail: "constant upper solution requires c < 0 and strictly negative h".into(),
        });
    }
    let min_abs = h.values().iter().fold(f64::INFINITY, |acc, &v| acc.min(v.abs()));
    let level = ((-c + 1.0) / min_abs).ln();
    let u_plus = VertexFunction::constant(g, level);
    verify_upper_defect(g, h, c, &u_plus)?;
    Ok(u_plus)
}

/// Affine upper solution for h ≤ 0 with the additive constant chosen as
/// small as the pointwise inequalities allow, instead of uniformly
/// dominating a. Vertices where h = 0 impose no exponential condition, so
/// only the strictly negative ones set the level.
pub(crate) fn affine_upper_solution_minimal(
    g: &Graph,
    h: &VertexFunction,
    c: f64,
) -> Result<VertexFunction, SolverError> {
    require_nonpositive_h(h, c)?;
    let h_bar = average(g, h)?;

    let f = h.map(|hx| h_bar - hx);
    let v = solve_poisson_mean_zero(g, &f)?;
    let a = c / h_bar + 1.0;

    let mut b = f64::NEG_INFINITY;
    for x in 0..g.vertex_count() {
        let hx = h.value(x);
        if hx < 0.0 {
            let needed = a * (h_bar - hx) - c;
            if needed > 0.0 {
                b = b.max(((needed + 1.0) / -hx).ln() - a * v.value(x));
            }
        }
    }
    if !b.is_finite() {
        b = 0.0;
    }
    let u_plus = v.map(|vx| a * vx + b);
    verify_upper_defect(g, h, c, &u_plus)?;
    Ok(u_plus)
}

fn require_nonpositive_h(h: &VertexFunction, c: f64) -> Result<(), SolverError> {
    if !(c < 0.0) {
        return Err(SolverError::PreconditionFailed {
            detail: format!("requires c < 0, got c = {c}"),
        });
    }
    if h.values().iter().any(|&v| v > 0.0) {
        return Err(SolverError::PreconditionFailed {
            detail: "requires h ≤ 0 everywhere".into(),
        });
    }
    if h.values().iter().all(|&v| v == 0.0) {
        return Err(SolverError::PreconditionFailed { detail: "h is identically zero".into() });
    }
    Ok(())
}

fn verify_upper_defect(
    g: &Graph,
    h: &VertexFunction,
    c: f64,
    u_plus: &VertexFunction,
) -> Result<(), SolverError> {
    let d = defect(g, h, c, u_plus)?;
    if let Some(x) = d.values().iter().position(|&r| !(r <= 1e-12)) {
        return Err(SolverError::ConstructionFailed {
            detail: format!(
                "upper-solution defect {:e} at vertex {}",
                d.value(x),
                g.vertex_ids()[x]
            ),
        });
    }
    Ok(())
}

/// Constant lower solution u₋ ≡ −A for c < 0, with A the smallest power of
/// two making −c + h·e^{−A} ≥ |c|/2 everywhere. Always exists: the left side
/// tends to −c = |c| uniformly as A grows.
pub fn lower_solution_constant(
    g: &Graph,
    h: &VertexFunction,
    c: f64,
) -> Result<VertexFunction, SolverError> {
    g.check_domain(h)?;
    if !(c < 0.0) {
        return Err(SolverError::PreconditionFailed {
            detail: format!("requires c < 0, got c = {c}"),
        });
    }
    let mut a = 1.0f64;
    while !lower_level_ok(h, c, a) {
        a *= 2.0;
        if a > 1e18 {
            return Err(SolverError::ConstructionFailed {
                detail: "no constant lower level found".into(),
            });
        }
    }
    Ok(VertexFunction::constant(g, -a))
}

fn lower_level_ok(h: &VertexFunction, c: f64, a: f64) -> bool {
    let floor = -c / 2.0;
    h.values().iter().all(|&hx| -c + hx * (-a).exp() >= floor)
}

/// Constant lower solution additionally lying below a given upper solution.
/// Raising A keeps the lower-solution inequality valid (h·e^{−A} → 0), so
/// doubling until −A ≤ min u₊ is safe.
pub(crate) fn lower_solution_below(
    g: &Graph,
    h: &VertexFunction,
    c: f64,
    u_plus: &VertexFunction,
) -> Result<VertexFunction, SolverError> {
    let base = lower_solution_constant(g, h, c)?;
    let mut a = -base.value(0);
    let floor = u_plus.min();
    while -a > floor {
        a *= 2.0;
        if a > 1e18 {
            return Err(SolverError::ConstructionFailed {
                detail: "upper solution is unboundedly negative".into(),
            });
        }
    }
    Ok(VertexFunction::constant(g, -a))
}
