//! Monotone iteration between verified upper and lower solutions for
//! Δu = c − h·eᵘ with c < 0: with k₁ = max{1, −h} and k = k₁·e^{u₊}, the
//! scheme (Δ − k)u_{j+1} = c − h·e^{u_j} − k·u_j started at u₀ = u₊ produces
//! a pointwise non-increasing sequence trapped above u₋ that converges to a
//! solution.

use crate::graph::{Graph, VertexFunction};
use crate::numerics::solve_shifted;
use crate::operators::{energy, h_exp_term, Problem};
use crate::solvers::upper_lower::defect;
use crate::solvers::{certified_report, Method, SolveReport, SolverConfig, SolverError, TraceEntry};

const VERIFY_SLACK: f64 = 1e-12;

/// Workspace of a monotone run: the sandwich, the shift functions, and every
/// iterate in order (starting from u₊ itself).
#[derive(Debug, Clone)]
pub struct MonotoneState {
    pub u_plus: VertexFunction,
    pub u_minus: VertexFunction,
    /// k₁ = max{1, −h}.
    pub k1: VertexFunction,
    /// k = k₁·e^{u₊}; positive everywhere.
    pub k: VertexFunction,
    pub iterates: Vec<VertexFunction>,
}

/// Pointwise upper-solution check: Δu₊ − c + h·e^{u₊} ≤ 1e−12 everywhere.
pub(crate) fn verify_upper(
    g: &Graph,
    p: &Problem,
    u_plus: &VertexFunction,
) -> Result<(), SolverError> {
    let d = defect(g, p.h(), p.constant(), u_plus)?;
    for (x, &r) in d.values().iter().enumerate() {
        // −∞ can only arise from h < 0 against an overflowing exponential,
        // which satisfies the inequality; NaN never does
        if r.is_nan() || r > VERIFY_SLACK {
            return Err(SolverError::NotUpperSolution {
                vertex: g.vertex_ids()[x].clone(),
                violation: r,
            });
        }
    }
    Ok(())
}

pub(crate) fn verify_lower(
    g: &Graph,
    p: &Problem,
    u_minus: &VertexFunction,
) -> Result<(), SolverError> {
    let d = defect(g, p.h(), p.constant(), u_minus)?;
    for (x, &r) in d.values().iter().enumerate() {
        if !(r >= -VERIFY_SLACK) {
            return Err(SolverError::NotLowerSolution {
                vertex: g.vertex_ids()[x].clone(),
                violation: r,
            });
        }
    }
    Ok(())
}

/// True when k = max{1,−h}·e^{u₊} is finite everywhere, i.e. the iteration
/// scheme can actually be assembled for this upper solution.
pub(crate) fn shift_is_finite(h: &VertexFunction, u_plus: &VertexFunction) -> bool {
    h.values()
        .iter()
        .zip(u_plus.values())
        .all(|(&hx, &ux)| ((-hx).max(1.0) * ux.exp()).is_finite())
}

pub fn monotone_iterate(
    g: &Graph,
    p: &Problem,
    u_plus: &VertexFunction,
    u_minus: &VertexFunction,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    monotone_iterate_with_state(g, p, u_plus, u_minus, cfg).map(|(report, _)| report)
}

/// Monotone iteration, additionally returning the full iterate history for
/// inspection of the sandwich property.
pub fn monotone_iterate_with_state(
    g: &Graph,
    p: &Problem,
    u_plus: &VertexFunction,
    u_minus: &VertexFunction,
    cfg: &SolverConfig,
) -> Result<(SolveReport, MonotoneState), SolverError> {
    cfg.validate()?;
    g.check_domain(u_plus)?;
    g.check_domain(u_minus)?;
    g.check_domain(p.h())?;
    if p.order() != 1 {
        return Err(SolverError::PreconditionFailed {
            detail: format!("monotone iteration applies to m = 1 only, got m = {}", p.order()),
        });
    }
    if let Some(x) = (0..g.vertex_count()).find(|&x| u_minus.value(x) > u_plus.value(x) + VERIFY_SLACK)
    {
        return Err(SolverError::PreconditionFailed {
            detail: format!(
                "lower solution exceeds upper solution at vertex {}: {} > {}",
                g.vertex_ids()[x],
                u_minus.value(x),
                u_plus.value(x)
            ),
        });
    }
    verify_upper(g, p, u_plus)?;
    verify_lower(g, p, u_minus)?;

    let h = p.h();
    let c = p.constant();
    let k1 = h.map(|hx| (-hx).max(1.0));
    let k = k1.zip_map(u_plus, |k1x, ux| k1x * ux.exp());
    if !k.is_finite() {
        return Err(SolverError::PreconditionFailed {
            detail: "k = max{1,−h}·e^{u₊} overflows; upper solution too large for the scheme"
                .into(),
        });
    }

    let mut state = MonotoneState {
        u_plus: u_plus.clone(),
        u_minus: u_minus.clone(),
        k1,
        k: k.clone(),
        iterates: vec![u_plus.clone()],
    };

    let mut current = u_plus.clone();
    let mut trace = Vec::new();
    let mut last_residual = f64::INFINITY;
    for iter in 0..cfg.max_iterations {
        let rhs = VertexFunction::from_fn(g, |x| {
            c - h_exp_term(h.value(x), current.value(x)) - k.value(x) * current.value(x)
        });
        let next = solve_shifted(g, &k, &rhs)?;

        for x in 0..g.vertex_count() {
            let below = next.value(x) >= u_minus.value(x) - VERIFY_SLACK;
            let above = next.value(x) <= current.value(x) + VERIFY_SLACK;
            if !below || !above {
                return Err(SolverError::OrderingViolated {
                    vertex: g.vertex_ids()[x].clone(),
                    iteration: iter + 1,
                });
            }
        }

        let step = next
            .values()
            .iter()
            .zip(current.values())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()));
        current = next;
        state.iterates.push(current.clone());

        let res = defect(g, h, c, &current)?.norm_inf();
        last_residual = res;
        trace.push(TraceEntry {
            iteration: iter + 1,
            residual_inf: res,
            energy: energy(g, p, &current).unwrap_or(f64::INFINITY),
        });

        if step <= cfg.step_tol && res <= cfg.residual_tol {
            let report =
                certified_report(g, p, current, iter + 1, Method::Monotone, None, trace, cfg)?;
            return Ok((report, state));
        }
    }

    Err(SolverError::MaxIterations {
        iterations: cfg.max_iterations,
        residual_inf: last_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeSpec, GraphSpec, VertexSpec};

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
    fn converges_to_constant_solution() {
        let g = k2();
        let h = VertexFunction::constant(&g, -1.0);
        let p = Problem::new(1, -1.0, h).unwrap();
        let u_plus = VertexFunction::constant(&g, 2f64.ln());
        let u_minus = VertexFunction::constant(&g, -2.0);
        let (report, state) =
            monotone_iterate_with_state(&g, &p, &u_plus, &u_minus, &SolverConfig::default())
                .unwrap();
        assert!(report.solution.norm_inf() <= 1e-9);
        assert!(report.residual_inf <= 1e-10);
        // sandwich: pointwise non-increasing, bounded below
        for pair in state.iterates.windows(2) {
            for x in 0..2 {
                assert!(pair[1].value(x) <= pair[0].value(x) + 1e-12);
                assert!(pair[1].value(x) >= u_minus.value(x) - 1e-12);
            }
        }
    }

    #[test]
    fn exact_solution_is_a_fixed_point() {
        let g = k2();
        let h = VertexFunction::constant(&g, -1.0);
        let p = Problem::new(1, -1.0, h).unwrap();
        let solution = VertexFunction::zero(&g);
        let u_minus = VertexFunction::constant(&g, -1.0);
        let report =
            monotone_iterate(&g, &p, &solution, &u_minus, &SolverConfig::default()).unwrap();
        assert_eq!(report.iterations, 1);
        assert_eq!(report.residual_inf, 0.0);
    }

    #[test]
    fn rejects_inverted_sandwich() {
        let g = k2();
        let h = VertexFunction::constant(&g, -1.0);
        let p = Problem::new(1, -1.0, h).unwrap();
        let u_plus = VertexFunction::constant(&g, 2f64.ln());
        let u_minus = VertexFunction::constant(&g, 1.0);
        assert!(matches!(
            monotone_iterate(&g, &p, &u_plus, &u_minus, &SolverConfig::default()),
            Err(SolverError::PreconditionFailed { .. })
        ));
    }

    #[test]
    fn rejects_invalid_upper_solution() {
        let g = k2();
        let h = VertexFunction::constant(&g, -1.0);
        let p = Problem::new(1, -1.0, h).unwrap();
        // Δu − c + h e^u at u ≡ −3: 0 + 1 − e^{−3} > 0, not an upper solution
        let bad_plus = VertexFunction::constant(&g, -3.0);
        let u_minus = VertexFunction::constant(&g, -4.0);
        assert!(matches!(
            monotone_iterate(&g, &p, &bad_plus, &u_minus, &SolverConfig::default()),
            Err(SolverError::NotUpperSolution { .. })
        ));
    }

    #[test]
    fn rejects_invalid_lower_solution() {
        let g = k2();
        let h = VertexFunction::constant(&g, -1.0);
        let p = Problem::new(1, -1.0, h).unwrap();
        let u_plus = VertexFunction::constant(&g, 2f64.ln());
        // u ≡ 0.5 is above the solution: 1 − e^{0.5} < 0, not a lower solution
        let bad_minus = VertexFunction::constant(&g, 0.5);
        assert!(matches!(
            monotone_iterate(&g, &p, &u_plus, &bad_minus, &SolverConfig::default()),
            Err(SolverError::NotLowerSolution { .. })
        ));
    }

    #[test]
    fn rejects_higher_order() {
        let g = k2();
        let h = VertexFunction::constant(&g, -1.0);
        let p = Problem::new(2, -1.0, h).unwrap();
        let u_plus = VertexFunction::zero(&g);
        let u_minus = VertexFunction::constant(&g, -1.0);
        assert!(matches!(
            monotone_iterate(&g, &p, &u_plus, &u_minus, &SolverConfig::default()),
            Err(SolverError::PreconditionFailed { .. })
        ));
    }
}
