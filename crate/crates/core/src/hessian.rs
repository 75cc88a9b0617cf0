//! Hessian-metric geometry of a convex potential: the metric `γ = ∂²F`, the
//! one-parameter connection family `Γ^(s) = ½(1−s) ∂³F`, the duality pairing
//! between `Γ^(s)` and `Γ^(−s)`, and Legendre-dual coordinates `ξ = ∂F`.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::potential::Potential;
use crate::tensor::Rank3;

/// Relative eigenvalue floor for positive-definiteness checks.
const SPD_EIGENVALUE_FLOOR: f64 = 1e-12;

/// Newton iteration cap for the Legendre solve.
const NEWTON_MAX_ITERATIONS: usize = 100;

/// Smallest damping factor tried before the Newton solve is declared lost.
const NEWTON_MIN_DAMPING: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("newton solve diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("connection parameter s = {s} outside [-1, 1]")]
    SOutOfRange { s: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Lowered connection coefficients `Γ^(s)_{αβδ}` at a point.
///
/// The family interpolates between the flat connection (`s = 1`, all
/// coefficients zero) and its dual (`s = −1`); `s = 0` is Levi-Civita.
#[derive(Debug, Clone)]
pub struct ConnectionCoefficients {
    pub s: f64,
    pub coeffs: Rank3,
}

/// Primal/dual coordinate pair produced by the Legendre transform:
/// `xi = ∂F(x)` and `phi = x·xi − F(x)`.
#[derive(Debug, Clone)]
pub struct DualChart {
    pub x: DVector<f64>,
    pub xi: DVector<f64>,
    pub phi: f64,
}

fn check_dim(pot: &dyn Potential, x: &DVector<f64>) -> Result<(), GeometryError> {
    if x.len() != pot.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: pot.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, b| a.min(*b))
}

/// Fails unless the smallest eigenvalue clears `1e-12 · trace`.
pub fn validate_spd(m: &DMatrix<f64>) -> Result<(), GeometryError> {
    let min = min_symmetric_eigenvalue(m);
    if min <= SPD_EIGENVALUE_FLOOR * m.trace() {
        return Err(GeometryError::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(())
}

/// The metric `γ_{αβ}(x) = ∂²F(x)`.
pub fn metric_from_potential(pot: &dyn Potential, x: &DVector<f64>) -> DMatrix<f64> {
    pot.hess(x)
}

/// Same as [`metric_from_potential`] but rejects non-SPD Hessians, which
/// signal that `F` is not convex at `x`.
pub fn metric_from_potential_checked(
    pot: &dyn Potential,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>, GeometryError> {
    check_dim(pot, x)?;
    let m = pot.hess(x);
    validate_spd(&m)?;
    Ok(m)
}

/// Lowered coefficients of the s-connection, `Γ^(s) = ½(1−s) ∂³F`.
/// `s` must lie in `[-1, 1]`.
pub fn s_connection(
    pot: &dyn Potential,
    x: &DVector<f64>,
    s: f64,
) -> Result<ConnectionCoefficients, GeometryError> {
    check_dim(pot, x)?;
    if !(-1.0..=1.0).contains(&s) || s.is_nan() {
        return Err(GeometryError::SOutOfRange { s });
    }
    let coeffs = pot.third(x).scaled(0.5 * (1.0 - s));
    Ok(ConnectionCoefficients { s, coeffs })
}

/// Levi-Civita coefficients of the Hessian metric, `Γ^(0) = ½ ∂³F`.
pub fn levi_civita_connection(
    pot: &dyn Potential,
    x: &DVector<f64>,
) -> Result<ConnectionCoefficients, GeometryError> {
    s_connection(pot, x, 0.0)
}

/// Residual of the duality identity
/// `Z γ(V, W) = γ(∇^(s)_Z V, W) + γ(V, ∇^(−s)_Z W)`
/// for constant coefficient vectors `V`, `W`, `Z`. The exact value is zero;
/// the returned number is pure floating-point roundoff.
pub fn duality_residual(
    pot: &dyn Potential,
    x: &DVector<f64>,
    s: f64,
    v: &DVector<f64>,
    w: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<f64, GeometryError> {
    check_dim(pot, x)?;
    if !(-1.0..=1.0).contains(&s) || s.is_nan() {
        return Err(GeometryError::SOutOfRange { s });
    }
    let third = pot.third(x);
    // Directional derivative of γ(V, W) along Z: the metric entries are
    // second derivatives, so the derivative contracts ∂³F.
    let z_gamma_vw = third.contract3(v.as_slice(), w.as_slice(), z.as_slice());
    // ⟨∇^(s)_Z V, W⟩ with all indices lowered is Γ^(s)(Z, V, W).
    let gamma_s = 0.5 * (1.0 - s) * third.contract3(z.as_slice(), v.as_slice(), w.as_slice());
    let gamma_ms = 0.5 * (1.0 + s) * third.contract3(z.as_slice(), w.as_slice(), v.as_slice());
    Ok((z_gamma_vw - gamma_s - gamma_ms).abs())
}

/// Dual coordinates `ξ_β = ∂_β F(x)`.
pub fn to_dual_coordinates(pot: &dyn Potential, x: &DVector<f64>) -> DVector<f64> {
    pot.grad(x)
}

/// Legendre transform starting from the origin; see [`legendre_dual_from`].
pub fn legendre_dual(pot: &dyn Potential, xi: &DVector<f64>) -> Result<DualChart, GeometryError> {
    let origin = DVector::zeros(pot.dim());
    legendre_dual_from(pot, xi, &origin)
}

/// Solves `∂F(x) = ξ` by damped Newton iteration from `x0` and returns the
/// dual chart data `(x, ξ, Φ(ξ) = x·ξ − F(x))`.
///
/// The step is damped by backtracking halving on the strictly convex
/// objective `F(x) − x·ξ`; the iteration stops once
/// `‖∂F(x) − ξ‖ ≤ 1e-10 (1 + ‖ξ‖)`. Failure to meet the tolerance within
/// 100 iterations, or a non-SPD Hessian along the path, reports
/// [`GeometryError::NewtonDiverged`]: `ξ` is outside the gradient image or
/// `x0` was a bad start.
pub fn legendre_dual_from(
    pot: &dyn Potential,
    xi: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<DualChart, GeometryError> {
    check_dim(pot, xi)?;
    check_dim(pot, x0)?;
    let tol = 1e-10 * (1.0 + xi.norm());
    let objective = |x: &DVector<f64>| pot.eval(x) - x.dot(xi);

    let mut x = x0.clone();
    for iteration in 0..NEWTON_MAX_ITERATIONS {
        let gradient = pot.grad(&x) - xi;
        let residual = gradient.norm();
        if residual <= tol {
            // One undamped polish step sharpens the returned point well past
            // the stopping tolerance.
            if let Some(chol) = Cholesky::new(pot.hess(&x)) {
                let polish = &x - chol.solve(&(pot.grad(&x) - xi));
                if (pot.grad(&polish) - xi).norm() <= residual {
                    x = polish;
                }
            }
            let phi = x.dot(xi) - pot.eval(&x);
            return Ok(DualChart { x, xi: xi.clone(), phi });
        }
        let hess = pot.hess(&x);
        let chol = Cholesky::new(hess).ok_or(GeometryError::NewtonDiverged {
            iterations: iteration,
            residual,
        })?;
        let step = chol.solve(&gradient);
        let slope = -gradient.dot(&step);
        let base = objective(&x);
        let mut damping = 1.0;
        loop {
            let candidate = &x - damping * &step;
            let value = objective(&candidate);
            if value.is_finite() && value <= base + 1e-4 * damping * slope {
                x = candidate;
                break;
            }
            damping *= 0.5;
            if damping < NEWTON_MIN_DAMPING {
                return Err(GeometryError::NewtonDiverged {
                    iterations: iteration,
                    residual,
                });
            }
        }
    }
    let residual = (pot.grad(&x) - xi).norm();
    Err(GeometryError::NewtonDiverged {
        iterations: NEWTON_MAX_ITERATIONS,
        residual,
    })
}

/// Inverse metric `γ^{αβ}(x) = (∂²F)⁻¹`, equal to the Hessian `∂²Φ` of the
/// Legendre potential in dual coordinates.
pub fn dual_metric(pot: &dyn Potential, x: &DVector<f64>) -> Result<DMatrix<f64>, GeometryError> {
    let m = metric_from_potential_checked(pot, x)?;
    let min = min_symmetric_eigenvalue(&m);
    m.try_inverse()
        .ok_or(GeometryError::NotPositiveDefinite { min_eigenvalue: min })
}
