//! Solution machinery for Δᵐu = c − h·eᵘ: damped Newton, constrained
//! variational minimization, monotone iteration between upper and lower
//! solutions, and a dispatcher that picks the certified route for the sign
//! of c.
//!
//! Every solver re-certifies its result through the equation residual; no
//! success is reported with ‖Δᵐu − c + h·eᵘ‖∞ above the configured
//! tolerance.

mod monotone;
mod newton;
mod upper_lower;
mod variational;

pub use monotone::{monotone_iterate, monotone_iterate_with_state, MonotoneState};
pub use newton::solve_newton;
pub use upper_lower::{
    construct_upper_solution, construct_upper_solution_nonpositive_h, lower_solution_constant,
    UpperSolutionParams,
};
pub use variational::minimize_variational;

use serde::Serialize;
use thiserror::Error;

use crate::feasibility::{self, CaseSign, FeasibilityError, FeasibilityStatus};
use crate::graph::{Graph, GraphError, VertexFunction};
use crate::numerics::NumericsError;
use crate::operators::{energy, residual_inf, OperatorError, Problem};

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error(transparent)]
    Domain(#[from] GraphError),

    #[error(transparent)]
    Operator(#[from] OperatorError),

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),

    #[error("invalid solver configuration: {detail}")]
    InvalidConfig { detail: String },

    #[error("precondition failed: {detail}")]
    PreconditionFailed { detail: String },

    #[error("no convergence within {iterations} iterations; residual {residual_inf:e}")]
    MaxIterations { iterations: usize, residual_inf: f64 },

    #[error("singular linearization: {detail}")]
    SingularJacobian { detail: String },

    #[error("non-finite value encountered during the solve")]
    NonFinite,

    #[error("constraint drift {drift:e} exceeds tolerance {tol:e}")]
    ConstraintDriftExceeded { drift: f64, tol: f64 },

    #[error("not an upper solution: defect {violation:e} > 1e-12 at vertex {vertex}")]
    NotUpperSolution { vertex: String, violation: f64 },

    #[error("not a lower solution: defect {violation:e} < -1e-12 at vertex {vertex}")]
    NotLowerSolution { vertex: String, violation: f64 },

    #[error("monotone ordering violated at vertex {vertex} in iteration {iteration}")]
    OrderingViolated { vertex: String, iteration: usize },

    #[error("problem is infeasible: {detail}")]
    Infeasible { detail: String },

    #[error("no upper solution found: {detail}")]
    NoUpperSolutionFound { detail: String },

    #[error("no certified solution method applies: {detail}")]
    NoCertifiedMethod { detail: String },

    #[error("recovered multiplier λ = {lambda:e} is not positive; no constant shift solves the unconstrained equation")]
    MultiplierNotPositive { lambda: f64 },

    #[error("result failed residual certification: {residual_inf:e} above tolerance")]
    CertificationFailed { residual_inf: f64 },

    #[error("construction failed: {detail}")]
    ConstructionFailed { detail: String },
}

/// Tolerances and budgets shared by all solvers.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub residual_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
    /// Backtracking factor for the Newton line search, in (0,1).
    pub newton_damping: f64,
    pub constraint_tol: f64,
    pub rng_seed: u64,
    /// Number of random initializations for multi-start Newton.
    pub newton_starts: usize,
    /// Geometric factor for the downward march of the threshold estimator.
    pub march_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            step_tol: 1e-12,
            max_iterations: 500,
            newton_damping: 0.5,
            constraint_tol: 1e-10,
            rng_seed: 0,
            newton_starts: 20,
            march_factor: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |detail: &str| Err(SolverError::InvalidConfig { detail: detail.into() });
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        if !(self.step_tol > 0.0) {
            return bad("step_tol must be positive");
        }
        if !(self.constraint_tol > 0.0) {
            return bad("constraint_tol must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.newton_damping > 0.0 && self.newton_damping < 1.0) {
            return bad("newton_damping must lie in (0,1)");
        }
        if !(self.march_factor > 1.0) {
            return bad("march_factor must exceed 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Newton,
    Variational,
    Monotone,
}

/// Lagrange multipliers recovered from a variational run, in the convention
/// of minimizing ∫|∇v|² dμ: the stationarity system is
/// Δv + (λ/2)h·eᵛ + γ/2 = 0, and for c = 0 the returned solution is
/// u = v + θ with e^θ = λ/2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Multipliers {
    pub lambda: f64,
    pub gamma: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Equation residual for Newton/monotone; first-order optimality for
    /// variational descent.
    pub residual_inf: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub solution: VertexFunction,
    pub residual_inf: f64,
    pub iterations: usize,
    pub method: Method,
    pub energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Multipliers>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry>,
    pub rng_seed: u64,
}

/// Solves Δᵐu = c − h·eᵘ by the certified route for the sign of c:
/// variational minimization for c = 0 and c > 0 (with a Newton polish),
/// upper/lower-solution monotone iteration for c < 0 with m = 1, and the
/// variational route for c < 0 with m > 1 and strictly negative h.
///
/// The final report is always re-certified through the equation residual.
pub fn solve(g: &Graph, p: &Problem, cfg: &SolverConfig) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    g.check_domain(p.h())?;
    let verdict = feasibility::check(g, p)?;
    if verdict.status == FeasibilityStatus::Infeasible {
        return Err(SolverError::Infeasible {
            detail: format!("{:?} with reasons {:?}", verdict.case, verdict.reasons),
        });
    }

    match verdict.case {
        CaseSign::ZeroC | CaseSign::PositiveC => {
            let seed = if p.constant() == 0.0 {
                feasibility::seed_b1(g, p.h())?
            } else {
                feasibility::seed_b2(g, p.h(), p.constant())?
            };
            match minimize_variational(g, p, cfg) {
                Ok(mut report) => {
                    // polish: a few Newton steps from the variational solution
                    if let Ok(polished) = solve_newton(g, p, &report.solution, cfg) {
                        if polished.residual_inf < report.residual_inf {
                            report.solution = polished.solution;
                            report.residual_inf = polished.residual_inf;
                            report.energy = energy(g, p, &report.solution)?;
                            report.iterations += polished.iterations;
                        }
                    }
                    Ok(report)
                }
                Err(variational_err) => {
                    match newton::multi_start_newton(g, p, cfg, &[seed]) {
                        Some(report) => Ok(report),
                        None => Err(variational_err),
                    }
                }
            }
        }
        CaseSign::NegativeC => {
            if p.order() == 1 {
                solve_negative_c_first_order(g, p, cfg)
            } else if p.h().values().iter().all(|&v| v < 0.0) {
                minimize_variational(g, p, cfg)
            } else {
                Err(SolverError::NoCertifiedMethod {
                    detail: "c < 0 with m > 1 is only certified for strictly negative h".into(),
                })
            }
        }
    }
}

/// c < 0, m = 1: monotone iteration from the best verified upper-solution
/// candidate, with multi-start Newton as a heuristic fallback below the
/// certified range.
fn solve_negative_c_first_order(
    g: &Graph,
    p: &Problem,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    let c = p.constant();
    let h = p.h();
    let mut candidates: Vec<VertexFunction> = Vec::new();

    if h.values().iter().all(|&v| v < 0.0) {
        candidates.push(upper_lower::constant_upper_solution(g, h, c)?);
    }
    if h.values().iter().all(|&v| v <= 0.0) {
        if let Ok(u) = construct_upper_solution_nonpositive_h(g, h, c) {
            candidates.push(u);
        }
        if let Ok(u) = upper_lower::affine_upper_solution_minimal(g, h, c) {
            candidates.push(u);
        }
    }
    if let Ok(params) = construct_upper_solution(g, h) {
        if c >= params.c_star {
            candidates.push(params.upper_solution());
        }
    }

    // keep verified, iteration-friendly candidates, best-conditioned first
    let mut usable: Vec<VertexFunction> = candidates
        .into_iter()
        .filter(|u| {
            u.is_finite()
                && monotone::verify_upper(g, p, u).is_ok()
                && monotone::shift_is_finite(h, u)
        })
        .collect();
    usable.sort_by(|a, b| a.norm_inf().total_cmp(&b.norm_inf()));

    let mut newton_starts: Vec<VertexFunction> = usable.clone();
    for u_plus in &usable {
        let u_minus = upper_lower::lower_solution_below(g, h, c, u_plus)?;
        match monotone_iterate(g, p, u_plus, &u_minus, cfg) {
            Ok(report) => return Ok(report),
            Err(_) => continue,
        }
    }

    // heuristic fallback; a certified Newton solution is still a genuine
    // solution, only the existence route differs
    newton_starts.push(VertexFunction::constant(
        g,
        (c / crate::operators::average(g, h)?).max(1e-6).ln(),
    ));
    match newton::multi_start_newton(g, p, cfg, &newton_starts) {
        Some(report) => Ok(report),
        None => Err(SolverError::NoUpperSolutionFound {
            detail: format!(
                "no verified upper solution usable at c = {c} and multi-start Newton failed; \
                 this is a heuristic failure, not a proof of non-existence"
            ),
        }),
    }
}

pub(crate) fn certified_report(
    g: &Graph,
    p: &Problem,
    solution: VertexFunction,
    iterations: usize,
    method: Method,
    multipliers: Option<Multipliers>,
    trace: Vec<TraceEntry>,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    let res = residual_inf(g, p, &solution)?;
    if !(res <= cfg.residual_tol) {
        return Err(SolverError::CertificationFailed { residual_inf: res });
    }
    let energy = energy(g, p, &solution)?;
    Ok(SolveReport {
        solution,
        residual_inf: res,
        iterations,
        method,
        energy,
        multipliers,
        trace,
        rng_seed: cfg.rng_seed,
    })
}
