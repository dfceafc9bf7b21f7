//! Discrete differential operators on weighted graphs: the μ-Laplacian,
//! the gradient form Γ, gradient lengths, integrals, the poly-harmonic
//! operator Δᵐ, and residual/energy of the equation Δᵐu = c − h·eᵘ.
//!
//! Sign convention: Δu(x) = (1/μ(x)) Σ_{y∼x} w_xy (u(y) − u(x)), which is
//! negative semidefinite in the μ-weighted inner product.

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, GraphError, VertexFunction};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OperatorError {
    #[error(transparent)]
    Domain(#[from] GraphError),

    #[error("operator order must be at least 1, got {m}")]
    InvalidOrder { m: usize },

    #[error("weight function h is identically zero")]
    ZeroWeightFunction,

    #[error("constant c is not finite")]
    NonFiniteConstant,

    #[error("result is not finite at vertex index {index}")]
    NonFinite { index: usize },
}

/// The problem data (m, c, h) of Δᵐu = c − h·eᵘ.
#[derive(Debug, Clone)]
pub struct Problem {
    m: usize,
    c: f64,
    h: VertexFunction,
}

impl Problem {
    pub fn new(m: usize, c: f64, h: VertexFunction) -> Result<Self, OperatorError> {
        if m < 1 {
            return Err(OperatorError::InvalidOrder { m });
        }
        if !c.is_finite() {
            return Err(OperatorError::NonFiniteConstant);
        }
        if h.values().iter().all(|&v| v == 0.0) {
            return Err(OperatorError::ZeroWeightFunction);
        }
        Ok(Self { m, c, h })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn h(&self) -> &VertexFunction {
        &self.h
    }
}

/// h(x)·e^{u(x)} with the algebraic convention 0·e^u = 0, so that vertices
/// where h vanishes cannot poison the product with overflow of e^u.
pub(crate) fn h_exp_term(h: f64, u: f64) -> f64 {
    if h == 0.0 {
        0.0
    } else {
        h * u.exp()
    }
}

/// Δu(x) = (1/μ(x)) Σ_{y∼x} w_xy (u(y) − u(x)).
pub fn laplacian(g: &Graph, u: &VertexFunction) -> Result<VertexFunction, OperatorError> {
    g.check_domain(u)?;
    Ok(VertexFunction::from_fn(g, |x| {
        let ux = u.value(x);
        let sum: f64 = g
            .neighbors(x)
            .iter()
            .map(|&(y, w)| w * (u.value(y) - ux))
            .sum();
        sum / g.measure(x)
    }))
}

/// Gradient form Γ(u,v)(x) = (1/2μ(x)) Σ_{y∼x} w_xy (u(y)−u(x))(v(y)−v(x)).
pub fn gamma(
    g: &Graph,
    u: &VertexFunction,
    v: &VertexFunction,
) -> Result<VertexFunction, OperatorError> {
    g.check_domain(u)?;
    g.check_domain(v)?;
    Ok(VertexFunction::from_fn(g, |x| {
        let ux = u.value(x);
        let vx = v.value(x);
        let sum: f64 = g
            .neighbors(x)
            .iter()
            .map(|&(y, w)| w * (u.value(y) - ux) * (v.value(y) - vx))
            .sum();
        sum / (2.0 * g.measure(x))
    }))
}

/// |∇u|(x) = sqrt(Γ(u,u)(x)).
pub fn grad_norm(g: &Graph, u: &VertexFunction) -> Result<VertexFunction, OperatorError> {
    let gm = gamma(g, u, u)?;
    Ok(gm.map(|v| v.max(0.0).sqrt()))
}

/// ∫_V f dμ = Σ_x μ(x) f(x).
pub fn integrate(g: &Graph, f: &VertexFunction) -> Result<f64, OperatorError> {
    g.check_domain(f)?;
    Ok(f.values()
        .iter()
        .zip(g.measures())
        .map(|(&v, &mu)| mu * v)
        .sum())
}

/// Integral average f̄ = ∫_V f dμ / Vol(V).
pub fn average(g: &Graph, f: &VertexFunction) -> Result<f64, OperatorError> {
    Ok(integrate(g, f)? / g.volume())
}

/// Total measure Vol(V).
pub fn vol(g: &Graph) -> f64 {
    g.volume()
}

/// Δᵐu, the m-fold composition of the Laplacian.
pub fn poly_laplacian(
    g: &Graph,
    u: &VertexFunction,
    m: usize,
) -> Result<VertexFunction, OperatorError> {
    if m < 1 {
        return Err(OperatorError::InvalidOrder { m });
    }
    g.check_domain(u)?;
    let mut out = laplacian(g, u)?;
    for _ in 1..m {
        out = laplacian(g, &out)?;
    }
    Ok(out)
}

/// |∇ᵐu|: for odd m the gradient length of Δ^{(m−1)/2}u, for even m the
/// pointwise absolute value of Δ^{m/2}u.
pub fn grad_m_norm(
    g: &Graph,
    u: &VertexFunction,
    m: usize,
) -> Result<VertexFunction, OperatorError> {
    if m < 1 {
        return Err(OperatorError::InvalidOrder { m });
    }
    g.check_domain(u)?;
    if m % 2 == 1 {
        let base = if m == 1 { u.clone() } else { poly_laplacian(g, u, (m - 1) / 2)? };
        grad_norm(g, &base)
    } else {
        Ok(poly_laplacian(g, u, m / 2)?.map(f64::abs))
    }
}

/// |∇ᵐu|² without the intermediate square root.
pub(crate) fn grad_m_norm_sq(
    g: &Graph,
    u: &VertexFunction,
    m: usize,
) -> Result<VertexFunction, OperatorError> {
    if m % 2 == 1 {
        let base = if m == 1 { u.clone() } else { poly_laplacian(g, u, (m - 1) / 2)? };
        gamma(g, &base, &base)
    } else {
        Ok(poly_laplacian(g, u, m / 2)?.map(|v| v * v))
    }
}

/// Pointwise residual Δᵐu(x) − c + h(x)·e^{u(x)}; a solution has residual ≡ 0.
///
/// No clamping is applied: if any entry is not finite the error names the
/// offending vertex so callers cannot mistake overflow for success.
pub fn residual(g: &Graph, p: &Problem, u: &VertexFunction) -> Result<VertexFunction, OperatorError> {
    let r = residual_unchecked(g, p, u)?;
    if let Some(index) = r.values().iter().position(|v| !v.is_finite()) {
        return Err(OperatorError::NonFinite { index });
    }
    Ok(r)
}

/// Residual without the finiteness check, for line searches that must be
/// able to observe and reject overflowing trial points.
pub(crate) fn residual_unchecked(
    g: &Graph,
    p: &Problem,
    u: &VertexFunction,
) -> Result<VertexFunction, OperatorError> {
    g.check_domain(u)?;
    g.check_domain(p.h())?;
    let lap = poly_laplacian(g, u, p.order())?;
    Ok(VertexFunction::from_fn(g, |x| {
        lap.value(x) - p.constant() + h_exp_term(p.h().value(x), u.value(x))
    }))
}

/// Sup-norm of the residual.
pub fn residual_inf(g: &Graph, p: &Problem, u: &VertexFunction) -> Result<f64, OperatorError> {
    Ok(residual(g, p, u)?.norm_inf())
}

/// J(u) = ½ ∫ |∇ᵐu|² dμ + c ∫ u dμ.
pub fn energy(g: &Graph, p: &Problem, u: &VertexFunction) -> Result<f64, OperatorError> {
    g.check_domain(u)?;
    let sq = grad_m_norm_sq(g, u, p.order())?;
    let val = 0.5 * integrate(g, &sq)? + p.constant() * integrate(g, u)?;
    if !val.is_finite() {
        return Err(OperatorError::NonFinite { index: 0 });
    }
    Ok(val)
}

/// Machine-readable spectral data exposed by the `spectrum` CLI subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralInfo {
    /// Smallest nonzero eigenvalue of −Δ in the μ-weighted inner product.
    pub lambda1: f64,
    /// Poincaré constant C₀ = 1/λ₁: ∫u²dμ ≤ C₀∫|∇u|²dμ for mean-zero u.
    pub poincare_constant: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeSpec, GraphSpec, VertexSpec};
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

    fn path3() -> Graph {
        build_graph(&GraphSpec {
            vertices: vec![
                VertexSpec { id: "a".into(), mu: 1.0 },
                VertexSpec { id: "b".into(), mu: 1.0 },
                VertexSpec { id: "c".into(), mu: 1.0 },
            ],
            edges: vec![
                EdgeSpec { u: "a".into(), v: "b".into(), w: 1.0 },
                EdgeSpec { u: "b".into(), v: "c".into(), w: 1.0 },
            ],
        })
        .unwrap()
    }

    #[test]
    fn laplacian_k2_and_path() {
        let g = k2();
        let u = VertexFunction::from_values(&g, vec![0.0, 3.0]).unwrap();
        let lap = laplacian(&g, &u).unwrap();
        assert_eq!(lap.values(), &[3.0, -3.0]);

        let constant = VertexFunction::constant(&g, 7.5);
        assert_eq!(laplacian(&g, &constant).unwrap().values(), &[0.0, 0.0]);

        let p = path3();
        let u = VertexFunction::from_values(&p, vec![0.0, 1.0, 4.0]).unwrap();
        let lap = laplacian(&p, &u).unwrap();
        assert_relative_eq!(lap.value(1), 2.0);
    }

    #[test]
    fn laplacian_rejects_domain_mismatch() {
        let g = k2();
        let p = path3();
        let u = VertexFunction::constant(&p, 1.0);
        assert!(matches!(
            laplacian(&g, &u),
            Err(OperatorError::Domain(GraphError::DomainMismatch { .. }))
        ));
    }

    #[test]
    fn gamma_values_and_degeneracies() {
        let g = k2();
        let u = VertexFunction::from_values(&g, vec![0.0, 3.0]).unwrap();
        let v = VertexFunction::from_values(&g, vec![0.0, 1.0]).unwrap();
        let gm = gamma(&g, &u, &v).unwrap();
        assert_relative_eq!(gm.value(0), 1.5);

        let c = VertexFunction::constant(&g, -4.0);
        assert_eq!(gamma(&g, &u, &c).unwrap().values(), &[0.0, 0.0]);

        let guu = gamma(&g, &u, &u).unwrap();
        assert!(guu.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn grad_norm_values_and_homogeneity() {
        let g = k2();
        let u = VertexFunction::from_values(&g, vec![0.0, 3.0]).unwrap();
        let n = grad_norm(&g, &u).unwrap();
        assert_relative_eq!(n.value(0), (4.5f64).sqrt(), max_relative = 1e-15);

        let doubled = grad_norm(&g, &u.scale(2.0)).unwrap();
        for i in 0..2 {
            assert_relative_eq!(doubled.value(i), 2.0 * n.value(i), max_relative = 1e-15);
        }
    }

    #[test]
    fn integrate_average() {
        let g = k2();
        let f = VertexFunction::from_values(&g, vec![1.0, -2.0]).unwrap();
        assert_relative_eq!(integrate(&g, &f).unwrap(), -1.0);
        assert_relative_eq!(average(&g, &f).unwrap(), -0.5);
        assert_eq!(integrate(&g, &VertexFunction::zero(&g)).unwrap(), 0.0);

        let g2 = build_graph(&GraphSpec {
            vertices: vec![
                VertexSpec { id: "a".into(), mu: 2.0 },
                VertexSpec { id: "b".into(), mu: 3.0 },
            ],
            edges: vec![EdgeSpec { u: "a".into(), v: "b".into(), w: 1.0 }],
        })
        .unwrap();
        let f2 = VertexFunction::from_values(&g2, vec![1.0, -2.0]).unwrap();
        assert_relative_eq!(integrate(&g2, &f2).unwrap(), -4.0);
    }

    #[test]
    fn poly_laplacian_composition() {
        let g = k2();
        let u = VertexFunction::from_values(&g, vec![0.0, 3.0]).unwrap();
        let l1 = poly_laplacian(&g, &u, 1).unwrap();
        assert_eq!(l1.values(), laplacian(&g, &u).unwrap().values());

        let l2 = poly_laplacian(&g, &u, 2).unwrap();
        assert_eq!(l2.value(0), -6.0);

        let l3 = poly_laplacian(&g, &u, 3).unwrap();
        let l2_then_1 = poly_laplacian(&g, &l2, 1).unwrap();
        assert_eq!(l3.values(), l2_then_1.values());

        assert!(matches!(
            poly_laplacian(&g, &u, 0),
            Err(OperatorError::InvalidOrder { m: 0 })
        ));
    }

    #[test]
    fn grad_m_norm_parities() {
        let g = k2();
        let u = VertexFunction::from_values(&g, vec![0.0, 3.0]).unwrap();

        let m1 = grad_m_norm(&g, &u, 1).unwrap();
        let gn = grad_norm(&g, &u).unwrap();
        assert_eq!(m1.values(), gn.values());

        let m2 = grad_m_norm(&g, &u, 2).unwrap();
        assert_eq!(m2.values(), &[3.0, 3.0]);

        let m3 = grad_m_norm(&g, &u, 3).unwrap();
        assert_relative_eq!(m3.value(0), 18f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn residual_closed_forms() {
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![1.0, -2.0]).unwrap();
        let p = Problem::new(1, 0.0, h).unwrap();
        let ln2 = 2f64.ln();
        let u = VertexFunction::from_values(&g, vec![ln2.ln(), (ln2 / 2.0).ln()]).unwrap();
        assert!(residual_inf(&g, &p, &u).unwrap() <= 1e-12);

        let h = VertexFunction::constant(&g, -1.0);
        let p = Problem::new(1, -1.0, h).unwrap();
        let u = VertexFunction::zero(&g);
        assert_eq!(residual_inf(&g, &p, &u).unwrap(), 0.0);
    }

    #[test]
    fn problem_rejects_zero_h_and_bad_order() {
        let g = k2();
        assert!(matches!(
            Problem::new(1, 0.0, VertexFunction::zero(&g)),
            Err(OperatorError::ZeroWeightFunction)
        ));
        assert!(matches!(
            Problem::new(0, 0.0, VertexFunction::constant(&g, 1.0)),
            Err(OperatorError::InvalidOrder { m: 0 })
        ));
    }

    #[test]
    fn residual_reports_overflow() {
        let g = k2();
        let h = VertexFunction::constant(&g, 1.0);
        let p = Problem::new(1, 0.0, h).unwrap();
        let u = VertexFunction::constant(&g, 1000.0);
        assert!(matches!(
            residual(&g, &p, &u),
            Err(OperatorError::NonFinite { .. })
        ));
    }

    #[test]
    fn zero_h_vertices_do_not_poison_residual() {
        // h = 0 at one vertex: the product h·e^u is identically zero there
        // even when e^u overflows.
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![0.0, -1.0]).unwrap();
        let p = Problem::new(1, -1.0, h).unwrap();
        let u = VertexFunction::from_values(&g, vec![800.0, 0.0]).unwrap();
        let r = residual(&g, &p, &u).unwrap();
        assert!(r.is_finite());
    }

    #[test]
    fn energy_values() {
        let g = k2();
        let h = VertexFunction::from_values(&g, vec![1.0, -2.0]).unwrap();

        let p = Problem::new(1, 0.0, h.clone()).unwrap();
        let u = VertexFunction::from_values(&g, vec![0.0, 3.0]).unwrap();
        assert_relative_eq!(energy(&g, &p, &u).unwrap(), 4.5);

        // constant u: gradient term vanishes, J = c·k·Vol
        let p2 = Problem::new(2, 1.5, h.clone()).unwrap();
        let k = VertexFunction::constant(&g, 2.0);
        assert_relative_eq!(energy(&g, &p2, &k).unwrap(), 1.5 * 2.0 * 2.0);

        // shift invariance iff c = 0
        let p0 = Problem::new(1, 0.0, h).unwrap();
        assert_relative_eq!(
            energy(&g, &p0, &u).unwrap(),
            energy(&g, &p0, &u.shift(10.0)).unwrap()
        );
    }
}
