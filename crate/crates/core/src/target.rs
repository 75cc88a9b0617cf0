//! Target Riemannian charts for the nonlinear term of the flow: metric,
//! Christoffel symbols, distances in the universal cover, and deck
//! translations for quotient targets.
//!
//! All built-ins have nonpositive sectional curvature. Maps into quotients
//! are represented by lifts, so `distance` never wraps: it is the distance
//! between the given lifts in the cover.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::tensor::Rank3;

/// Positivity floor for the half-plane chart. Queries at or below this
/// height fail loudly instead of being clamped.
pub const HALF_PLANE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("point {point:?} outside the chart domain: {reason}")]
    DomainViolation { point: Vec<f64>, reason: String },
    #[error("plane vectors are linearly dependent")]
    DegeneratePlane,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureSign {
    Flat,
    Nonpositive,
    Negative,
}

/// A target chart: the coordinate patch all map values (lifts) live in.
///
/// `metric_into` and `christoffels_into` write row-major `dim×dim` and
/// `dim×dim×dim` buffers; the convenience wrappers allocate. Charts are
/// immutable and safe to query concurrently.
pub trait TargetChart: Send + Sync {
    fn dim(&self) -> usize;
    /// Catalog name, also used in snapshot headers.
    fn name(&self) -> &'static str;
    fn curvature_sign(&self) -> CurvatureSign;
    /// Whether `y` lies strictly inside the chart domain.
    fn contains(&self, y: &[f64]) -> bool;
    /// Metric `g_ij(y)`, row-major into `out` (length `dim²`).
    fn metric_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), TargetError>;
    /// Christoffel symbols `Γ^i_{jk}(y)`, layout `[i][j][k]` into `out`
    /// (length `dim³`), symmetric in `(j, k)`.
    fn christoffels_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), TargetError>;
    /// Distance between two lifts in the universal cover.
    fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64, TargetError>;
    /// Deck translations of the cover, one per generator. Empty for simply
    /// connected targets.
    fn monodromy(&self) -> &[DVector<f64>];

    fn is_flat(&self) -> bool {
        self.curvature_sign() == CurvatureSign::Flat
    }

    fn metric(&self, y: &[f64]) -> Result<DMatrix<f64>, TargetError> {
        let n = self.dim();
        let mut buf = vec![0.0; n * n];
        self.metric_into(y, &mut buf)?;
        Ok(DMatrix::from_row_slice(n, n, &buf))
    }

    fn christoffels(&self, y: &[f64]) -> Result<Rank3, TargetError> {
        let n = self.dim();
        let mut buf = vec![0.0; n * n * n];
        self.christoffels_into(y, &mut buf)?;
        Ok(Rank3::from_fn(n, |i, j, k| buf[(i * n + j) * n + k]))
    }
}

fn check_point(dim: usize, y: &[f64]) -> Result<(), TargetError> {
    if y.len() != dim {
        return Err(TargetError::DimensionMismatch {
            expected: dim,
            got: y.len(),
        });
    }
    Ok(())
}

/// Flat `ℝⁿ` with the identity metric. The simply connected baseline.
#[derive(Debug, Clone)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self { dim }
    }
}

impl TargetChart for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn curvature_sign(&self) -> CurvatureSign {
        CurvatureSign::Flat
    }

    fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim && y.iter().all(|v| v.is_finite())
    }

    fn metric_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), TargetError> {
        check_point(self.dim, y)?;
        identity_into(self.dim, out);
        Ok(())
    }

    fn christoffels_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), TargetError> {
        check_point(self.dim, y)?;
        out.fill(0.0);
        Ok(())
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64, TargetError> {
        check_point(self.dim, a)?;
        check_point(self.dim, b)?;
        Ok(euclidean_distance(a, b))
    }

    fn monodromy(&self) -> &[DVector<f64>] {
        &[]
    }
}

/// Flat torus `ℝⁿ / (p₁ℤ × … × pₙℤ)`, presented through its cover `ℝⁿ`.
///
/// The chart itself is Euclidean; the quotient only shows up through the
/// monodromy translations `pᵢ eᵢ`. A single period gives the circle.
#[derive(Debug, Clone)]
pub struct FlatTorus {
    periods: Vec<f64>,
    monodromy: Vec<DVector<f64>>,
    name: &'static str,
}

impl FlatTorus {
    pub fn new(periods: Vec<f64>) -> Self {
        assert!(!periods.is_empty(), "at least one period required");
        assert!(periods.iter().all(|p| *p > 0.0), "periods must be positive");
        let dim = periods.len();
        let monodromy = periods
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut v = DVector::zeros(dim);
                v[i] = *p;
                v
            })
            .collect();
        Self {
            periods,
            monodromy,
            name: "flat_torus",
        }
    }

    /// `circle` is the unit-period torus in one dimension.
    pub fn circle() -> Self {
        let mut torus = Self::new(vec![1.0]);
        torus.name = "circle";
        torus
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }
}

impl TargetChart for FlatTorus {
    fn dim(&self) -> usize {
        self.periods.len()
    }

    fn name(&self) -> &'static str {
        self.name
    }

    fn curvature_sign(&self) -> CurvatureSign {
        CurvatureSign::Flat
    }

    fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && y.iter().all(|v| v.is_finite())
    }

    fn metric_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), TargetError> {
        check_point(self.dim(), y)?;
        identity_into(self.dim(), out);
        Ok(())
    }

    fn christoffels_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), TargetError> {
        check_point(self.dim(), y)?;
        out.fill(0.0);
        Ok(())
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64, TargetError> {
        check_point(self.dim(), a)?;
        check_point(self.dim(), b)?;
        Ok(euclidean_distance(a, b))
    }

    fn monodromy(&self) -> &[DVector<f64>] {
        &self.monodromy
    }
}

/// Upper half-plane `{(u, v) : v > 0}` with metric `diag(1/v², 1/v²)`,
/// constant sectional curvature −1.
#[derive(Debug, Clone, Default)]
pub struct HyperbolicHalfPlane;

impl HyperbolicHalfPlane {
    pub fn new() -> Self {
        Self
    }

    fn guard(&self, y: &[f64]) -> Result<(), TargetError> {
        check_point(2, y)?;
        if !(y[1] > HALF_PLANE_FLOOR) {
            return Err(TargetError::DomainViolation {
                point: y.to_vec(),
                reason: format!("height v = {:e} is not above {HALF_PLANE_FLOOR:e}", y[1]),
            });
        }
        Ok(())
    }
}

impl TargetChart for HyperbolicHalfPlane {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &'static str {
        "hyperbolic_half_plane"
    }

    fn curvature_sign(&self) -> CurvatureSign {
        CurvatureSign::Negative
    }

    fn contains(&self, y: &[f64]) -> bool {
        y.len() == 2 && y.iter().all(|v| v.is_finite()) && y[1] > HALF_PLANE_FLOOR
    }

    fn metric_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), TargetError> {
        self.guard(y)?;
        let w = 1.0 / (y[1] * y[1]);
        out.copy_from_slice(&[w, 0.0, 0.0, w]);
        Ok(())
    }

    fn christoffels_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), TargetError> {
        self.guard(y)?;
        let inv_v = 1.0 / y[1];
        out.fill(0.0);
        // Γ^u_{uv} = Γ^u_{vu} = −1/v, Γ^v_{uu} = 1/v, Γ^v_{vv} = −1/v.
        out[0 * 4 + 0 * 2 + 1] = -inv_v;
        out[0 * 4 + 1 * 2 + 0] = -inv_v;
        out[1 * 4 + 0 * 2 + 0] = inv_v;
        out[1 * 4 + 1 * 2 + 1] = -inv_v;
        Ok(())
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64, TargetError> {
        self.guard(a)?;
        self.guard(b)?;
        let du = a[0] - b[0];
        let dv = a[1] - b[1];
        // d = arccosh(1 + |a−b|² / (2 v_a v_b)), written through ln1p so
        // nearby points keep full precision.
        let s = (du * du + dv * dv) / (2.0 * a[1] * b[1]);
        Ok((s + (s * (s + 2.0)).sqrt()).ln_1p())
    }

    fn monodromy(&self) -> &[DVector<f64>] {
        &[]
    }
}

fn identity_into(dim: usize, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..dim {
        out[i * dim + i] = 1.0;
    }
}

fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance in the universal cover between two lifts, without wrapping.
/// With lifts transported consistently from the initial map this realizes
/// the homotopy distance between the maps at a point.
pub fn lift_distance(
    chart: &dyn TargetChart,
    a_lift: &[f64],
    b_lift: &[f64],
) -> Result<f64, TargetError> {
    chart.distance(a_lift, b_lift)
}

/// Sectional curvature at `y` of the plane spanned by `u` and `v`, computed
/// from central finite differences of the Christoffel symbols through the
/// curvature tensor. Test-and-certification utility: accuracy over speed.
pub fn sectional_curvature_fd(
    chart: &dyn TargetChart,
    y: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<f64, TargetError> {
    let n = chart.dim();
    check_point(n, y)?;
    check_point(n, u)?;
    check_point(n, v)?;

    let g = chart.metric(y)?;
    let gu = DVector::from_column_slice(u);
    let gv = DVector::from_column_slice(v);
    let uu = gu.dot(&(&g * &gu));
    let vv = gv.dot(&(&g * &gv));
    let uv = gu.dot(&(&g * &gv));
    let gram = uu * vv - uv * uv;
    if gram <= 1e-12 * uu.max(vv).powi(2) {
        return Err(TargetError::DegeneratePlane);
    }

    let norm: f64 = y.iter().map(|c| c * c).sum::<f64>().sqrt();
    let step = 1e-4 * (1.0 + norm);
    let gamma = chart.christoffels(y)?;
    // ∂_k Γ^i_{lj} by central differences.
    let mut dgamma = Vec::with_capacity(n);
    for k in 0..n {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[k] += step;
        ym[k] -= step;
        let gp = chart.christoffels(&yp)?;
        let gm = chart.christoffels(&ym)?;
        dgamma.push(Rank3::from_fn(n, |i, j, l| {
            (gp.get(i, j, l) - gm.get(i, j, l)) / (2.0 * step)
        }));
    }

    // R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{km} Γ^m_{lj} − Γ^i_{lm} Γ^m_{kj}
    let riemann = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        let mut r = dgamma[k].get(i, l, j) - dgamma[l].get(i, k, j);
        for m in 0..n {
            r += gamma.get(i, k, m) * gamma.get(m, l, j) - gamma.get(i, l, m) * gamma.get(m, k, j);
        }
        r
    };

    // ⟨R(u, v) v, u⟩ = g_{im} u^m R^i_{jkl} v^j u^k v^l
    let mut numerator = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut gi = 0.0;
                    for m in 0..n {
                        gi += g[(i, m)] * u[m];
                    }
                    numerator += gi * riemann(i, j, k, l) * v[j] * u[k] * v[l];
                }
            }
        }
    }
    Ok(numerator / gram)
}

/// Catalog names understood by `chart_from_name`, fixed for config files.
pub fn target_catalog() -> &'static [&'static str] {
    &[
        "euclidean(n)",
        "flat_torus(periods)",
        "circle",
        "hyperbolic_half_plane",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_line_distance() {
        let chart = Euclidean::new(1);
        assert_eq!(chart.distance(&[0.0], &[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn euclidean_plane_is_flat() {
        let chart = Euclidean::new(2);
        let gamma = chart.christoffels(&[0.4, -2.0]).unwrap();
        assert_eq!(gamma.max_abs(), 0.0);
        assert_eq!(chart.distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn circle_monodromy_is_unit_translation() {
        let chart = FlatTorus::circle();
        assert_eq!(chart.monodromy().len(), 1);
        assert_eq!(chart.monodromy()[0][0], 1.0);
        assert_eq!(chart.name(), "circle");
    }

    #[test]
    fn torus_cover_distance_does_not_wrap() {
        let chart = FlatTorus::new(vec![2.0]);
        assert_eq!(chart.distance(&[0.0], &[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn torus_is_flat() {
        let chart = FlatTorus::new(vec![1.0, 1.0]);
        assert_eq!(chart.christoffels(&[0.3, 0.9]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn half_plane_christoffels_at_height_two() {
        let chart = HyperbolicHalfPlane::new();
        let gamma = chart.christoffels(&[0.0, 2.0]).unwrap();
        assert_eq!(gamma.get(1, 0, 0), 0.5);
        assert_eq!(gamma.get(0, 0, 1), -0.5);
        assert_eq!(gamma.get(0, 1, 0), -0.5);
        assert_eq!(gamma.get(1, 1, 1), -0.5);
        assert_eq!(gamma.get(0, 0, 0), 0.0);
        assert_eq!(gamma.get(1, 0, 1), 0.0);
    }

    #[test]
    fn half_plane_vertical_geodesic_length() {
        let chart = HyperbolicHalfPlane::new();
        let d = chart
            .distance(&[0.0, 1.0], &[0.0, std::f64::consts::E])
            .unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_plane_distance_to_self_is_zero() {
        let chart = HyperbolicHalfPlane::new();
        assert_eq!(chart.distance(&[0.3, 1.7], &[0.3, 1.7]).unwrap(), 0.0);
    }

    #[test]
    fn half_plane_rejects_nonpositive_height() {
        let chart = HyperbolicHalfPlane::new();
        assert!(matches!(
            chart.metric(&[0.0, 0.0]),
            Err(TargetError::DomainViolation { .. })
        ));
        assert!(matches!(
            chart.distance(&[0.0, 1.0], &[0.0, -1.0]),
            Err(TargetError::DomainViolation { .. })
        ));
        assert!(!chart.contains(&[0.0, 1e-13]));
    }

    #[test]
    fn lift_distance_on_circle_cover() {
        let chart = FlatTorus::circle();
        assert!((lift_distance(&chart, &[0.2], &[1.2]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lift_distance_on_half_plane_vertical() {
        let chart = HyperbolicHalfPlane::new();
        let e2 = std::f64::consts::E * std::f64::consts::E;
        assert!((lift_distance(&chart, &[0.0, 1.0], &[0.0, e2]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_curvature_vanishes() {
        let chart = Euclidean::new(2);
        let k = sectional_curvature_fd(&chart, &[0.1, 0.2], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(k.abs() <= 1e-6);
    }

    #[test]
    fn half_plane_curvature_is_minus_one() {
        let chart = HyperbolicHalfPlane::new();
        let k = sectional_curvature_fd(&chart, &[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((k + 1.0).abs() <= 1e-4, "got K = {k}");
    }

    #[test]
    fn degenerate_plane_is_rejected() {
        let chart = Euclidean::new(2);
        assert!(matches!(
            sectional_curvature_fd(&chart, &[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]),
            Err(TargetError::DegeneratePlane)
        ));
    }
}
