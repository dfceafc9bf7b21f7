//! Linear-algebraic kernel: dense factorizations for the shifted Laplacian,
//! the mean-zero Poisson problem, and the spectral gap of −Δ in the
//! μ-weighted inner product.
//!
//! Everything here is dense and direct. The intended scale is desk-sized
//! graphs (n up to a few thousand), where robustness beats asymptotics.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{Graph, GraphError, VertexFunction};
use crate::operators::{average, integrate, laplacian, OperatorError, SpectralInfo};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    #[error(transparent)]
    Domain(#[from] GraphError),

    #[error("shift must be positive everywhere; k({vertex}) = {value}")]
    NonPositiveShift { vertex: String, value: f64 },

    #[error("linear solve failed: {detail}")]
    SolveFailed { detail: String },

    #[error("right-hand side is not in the image of the Laplacian: ∫f dμ = {integral}")]
    IncompatibleRHS { integral: f64 },

    #[error("eigenvalue computation failed: {detail}")]
    EigenFailed { detail: String },
}

impl From<OperatorError> for NumericsError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Domain(d) => NumericsError::Domain(d),
            other => NumericsError::SolveFailed { detail: other.to_string() },
        }
    }
}

/// Dense matrix of the μ-Laplacian acting on values in declaration order:
/// (Au)(x) = Δu(x).
pub(crate) fn laplacian_matrix(g: &Graph) -> DMatrix<f64> {
    let n = g.vertex_count();
    let mut a = DMatrix::zeros(n, n);
    for x in 0..n {
        let mu = g.measure(x);
        let mut diag = 0.0;
        for &(y, w) in g.neighbors(x) {
            a[(x, y)] += w / mu;
            diag += w / mu;
        }
        a[(x, x)] = -diag;
    }
    a
}

/// Solves (Δ − diag(k)) φ = rhs for the unique φ.
///
/// Requires k > 0 everywhere, which makes the system strictly diagonally
/// dominant and hence nonsingular. The result is verified against the
/// operator before returning.
pub fn solve_shifted(
    g: &Graph,
    k: &VertexFunction,
    rhs: &VertexFunction,
) -> Result<VertexFunction, NumericsError> {
    g.check_domain(k)?;
    g.check_domain(rhs)?;
    if let Some(x) = k.values().iter().position(|&v| !(v > 0.0)) {
        return Err(NumericsError::NonPositiveShift {
            vertex: g.vertex_ids()[x].clone(),
            value: k.value(x),
        });
    }

    let n = g.vertex_count();
    let mut a = laplacian_matrix(g);
    for x in 0..n {
        a[(x, x)] -= k.value(x);
    }
    let b = DVector::from_column_slice(rhs.values());
    let phi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| NumericsError::SolveFailed { detail: "singular shifted system".into() })?;
    let phi = VertexFunction::from_values(g, phi.as_slice().to_vec())?;

    let tol = 1e-10 * (1.0 + rhs.norm_inf());
    let check = laplacian(g, &phi)?;
    let worst = (0..n)
        .map(|x| (check.value(x) - k.value(x) * phi.value(x) - rhs.value(x)).abs())
        .fold(0.0f64, f64::max);
    if !worst.is_finite() || worst > tol {
        return Err(NumericsError::SolveFailed {
            detail: format!("verified residual {worst:e} exceeds tolerance {tol:e}"),
        });
    }
    Ok(phi)
}

/// Solves Δv = f with the gauge ∫v dμ = 0.
///
/// The image of Δ is the space of mean-zero functions, so ∫f dμ must vanish
/// numerically (relative to ‖f‖∞ and Vol(V)). Solved via the symmetric
/// bordered system [[DΔ, μ],[μᵀ, 0]], where D = diag(μ).
pub fn solve_poisson_mean_zero(
    g: &Graph,
    f: &VertexFunction,
) -> Result<VertexFunction, NumericsError> {
    g.check_domain(f)?;
    let n = g.vertex_count();
    let integral = integrate(g, f)?;
    let compat_tol = 1e-10 * g.volume() * (1.0 + f.norm_inf());
    if integral.abs() > compat_tol {
        return Err(NumericsError::IncompatibleRHS { integral });
    }

    // D·Δ is the symmetric combinatorial form W − diag(deg).
    let mut sys = DMatrix::zeros(n + 1, n + 1);
    for x in 0..n {
        let mut deg = 0.0;
        for &(y, w) in g.neighbors(x) {
            sys[(x, y)] += w;
            deg += w;
        }
        sys[(x, x)] = -deg;
        sys[(x, n)] = g.measure(x);
        sys[(n, x)] = g.measure(x);
    }
    let mut b = DVector::zeros(n + 1);
    for x in 0..n {
        b[x] = g.measure(x) * f.value(x);
    }
    let sol = sys
        .lu()
        .solve(&b)
        .ok_or_else(|| NumericsError::SolveFailed { detail: "singular bordered system".into() })?;

    let mut v = VertexFunction::from_values(g, sol.as_slice()[..n].to_vec())?;
    // exact mean-zero gauge, removing the bordered system's rounding
    let mean = average(g, &v)?;
    v = v.shift(-mean);

    let tol = 1e-10 * (1.0 + f.norm_inf());
    let check = laplacian(g, &v)?;
    let worst = (0..n)
        .map(|x| (check.value(x) - f.value(x)).abs())
        .fold(0.0f64, f64::max);
    if !worst.is_finite() || worst > tol {
        return Err(NumericsError::SolveFailed {
            detail: format!("Poisson residual {worst:e} exceeds tolerance {tol:e}"),
        });
    }
    Ok(v)
}

/// Computes λ₁, the smallest nonzero eigenvalue of −Δ, and the Poincaré
/// constant C₀ = 1/λ₁.
///
/// −Δ is self-adjoint with respect to ⟨u,v⟩ = Σ μ(x)u(x)v(x); the eigenvalues
/// are those of the symmetrized matrix D^{-1/2}(deg − W)D^{-1/2}.
pub fn spectral_gap(g: &Graph) -> Result<SpectralInfo, NumericsError> {
    let n = g.vertex_count();
    let mut s = DMatrix::zeros(n, n);
    for x in 0..n {
        let mx = g.measure(x);
        let mut deg = 0.0;
        for &(y, w) in g.neighbors(x) {
            s[(x, y)] = -w / (mx * g.measure(y)).sqrt();
            deg += w;
        }
        s[(x, x)] = deg / mx;
    }
    let eig = s.symmetric_eigen();
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    if eigenvalues.len() < 2 {
        return Err(NumericsError::EigenFailed {
            detail: "graph must have at least 2 vertices".into(),
        });
    }
    // connected graph: the zero eigenvalue is simple
    let lambda1 = eigenvalues[1];
    if !(lambda1 > 0.0) {
        return Err(NumericsError::EigenFailed {
            detail: format!("second eigenvalue {lambda1} is not positive; graph disconnected?"),
        });
    }
    Ok(SpectralInfo { lambda1, poincare_constant: 1.0 / lambda1 })
}
