//! Discretized affine domains: a rectangular node lattice covering one
//! fundamental domain, together with a sampled inverse-metric field
//! `γ^{αβ}` and the rule for reducing out-of-range lattice indices back
//! into the domain.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::potential::Potential;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid dimension {0} unsupported (1 or 2)")]
    UnsupportedDimension(usize),
    #[error("axis {axis} has {cells} cells; at least 4 required")]
    TooFewCells { axis: usize, cells: usize },
    #[error("axis {axis} spacing {spacing} must be positive")]
    BadSpacing { axis: usize, spacing: f64 },
    #[error("shape and spacing arity differ ({shape} vs {spacing})")]
    ArityMismatch { shape: usize, spacing: usize },
    #[error("sampled inverse metric at node {node} is not positive definite")]
    NotPositiveDefinite { node: usize },
    #[error("sampled inverse metric at node {node} has dimension {got}, expected {expected}")]
    MetricDimension { node: usize, expected: usize, got: usize },
    #[error("shear gluing needs a square grid with an even, equal cell count per axis")]
    ShearShape,
    #[error("shear gluing needs equal spacing on both axes")]
    ShearSpacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// How the periodic fundamental domain is glued to its neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gluing {
    /// Each axis wraps independently: the standard torus.
    Torus,
    /// Crossing the second axis composes with the affine shear
    /// `(x, y) ↦ (x + y + ½L, y + L)` of the two-dimensional plane, so the
    /// top edge glues to the bottom edge offset by half a period. Requires
    /// a square grid with even cell count.
    Shear,
}

/// Node lattice over one fundamental domain with a per-node SPD inverse
/// metric `γ^{αβ}`. Periodic grids place one node per cell; Dirichlet grids
/// carry both endpoints per axis.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    boundary: Boundary,
    gluing: Gluing,
    nodes_per_axis: Vec<usize>,
    /// Packed symmetric entries per node: `[g00]` in 1-d, `[g00, g01, g11]`
    /// in 2-d.
    inverse_metric: Vec<f64>,
    max_eigenvalue: f64,
}

impl DomainGrid {
    /// Builds a grid by sampling `γ^{αβ}` from `inverse_metric_fn` at every
    /// node coordinate. Each sample is validated symmetric positive definite.
    pub fn from_inverse_metric_fn(
        shape: &[usize],
        spacing: &[f64],
        boundary: Boundary,
        gluing: Gluing,
        inverse_metric_fn: impl Fn(&[f64]) -> DMatrix<f64>,
    ) -> Result<Self, GridError> {
        let dim = shape.len();
        if dim == 0 || dim > 2 {
            return Err(GridError::UnsupportedDimension(dim));
        }
        if spacing.len() != dim {
            return Err(GridError::ArityMismatch {
                shape: dim,
                spacing: spacing.len(),
            });
        }
        for (axis, &cells) in shape.iter().enumerate() {
            if cells < 4 {
                return Err(GridError::TooFewCells { axis, cells });
            }
        }
        for (axis, &h) in spacing.iter().enumerate() {
            if !(h > 0.0) {
                return Err(GridError::BadSpacing { axis, spacing: h });
            }
        }
        if gluing == Gluing::Shear {
            if dim != 2 || shape[0] != shape[1] || shape[0] % 2 != 0 {
                return Err(GridError::ShearShape);
            }
            if spacing[0] != spacing[1] {
                return Err(GridError::ShearSpacing);
            }
        }

        let nodes_per_axis: Vec<usize> = match boundary {
            Boundary::Periodic => shape.to_vec(),
            Boundary::Dirichlet => shape.iter().map(|c| c + 1).collect(),
        };
        let node_count: usize = nodes_per_axis.iter().product();
        let stride = packed_stride(dim);
        let mut inverse_metric = vec![0.0; node_count * stride];
        let mut max_eigenvalue = 0.0_f64;

        let mut coords = vec![0.0; dim];
        for node in 0..node_count {
            let multi = unravel(node, &nodes_per_axis);
            for d in 0..dim {
                coords[d] = multi[d] as f64 * spacing[d];
            }
            let m = inverse_metric_fn(&coords);
            if m.nrows() != dim || m.ncols() != dim {
                return Err(GridError::MetricDimension {
                    node,
                    expected: dim,
                    got: m.nrows(),
                });
            }
            let packed = &mut inverse_metric[node * stride..(node + 1) * stride];
            let lambda = pack_spd(&m, packed).ok_or(GridError::NotPositiveDefinite { node })?;
            max_eigenvalue = max_eigenvalue.max(lambda);
        }

        Ok(Self {
            shape: shape.to_vec(),
            spacing: spacing.to_vec(),
            boundary,
            gluing,
            nodes_per_axis,
            inverse_metric,
            max_eigenvalue,
        })
    }

    /// Grid with the same inverse metric at every node.
    pub fn uniform(
        shape: &[usize],
        spacing: &[f64],
        boundary: Boundary,
        gluing: Gluing,
        inverse_metric: &DMatrix<f64>,
    ) -> Result<Self, GridError> {
        Self::from_inverse_metric_fn(shape, spacing, boundary, gluing, |_| inverse_metric.clone())
    }

    /// Samples the metric `∂²F` of a convex potential at the nodes and
    /// stores its inverse.
    pub fn from_potential(
        shape: &[usize],
        spacing: &[f64],
        boundary: Boundary,
        gluing: Gluing,
        pot: &dyn Potential,
    ) -> Result<Self, GridError> {
        Self::from_inverse_metric_fn(shape, spacing, boundary, gluing, |x| {
            let hess = pot.hess(&DVector::from_column_slice(x));
            hess.try_inverse().unwrap_or_else(|| DMatrix::zeros(x.len(), x.len()))
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn gluing(&self) -> Gluing {
        self.gluing
    }

    /// Node count along each axis.
    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.iter().product()
    }

    /// Row-major flattening of a multi-index.
    #[inline]
    pub fn node_index(&self, multi: &[usize]) -> usize {
        match self.dim() {
            1 => multi[0],
            _ => multi[0] * self.nodes_per_axis[1] + multi[1],
        }
    }

    pub fn node_multi_index(&self, node: usize) -> Vec<usize> {
        unravel(node, &self.nodes_per_axis)
    }

    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        self.node_multi_index(node)
            .iter()
            .zip(&self.spacing)
            .map(|(i, h)| *i as f64 * h)
            .collect()
    }

    /// Whether the node is away from the Dirichlet boundary. Every node of a
    /// periodic grid counts as interior.
    pub fn is_interior(&self, multi: &[usize]) -> bool {
        match self.boundary {
            Boundary::Periodic => true,
            Boundary::Dirichlet => multi
                .iter()
                .zip(&self.nodes_per_axis)
                .all(|(i, n)| *i > 0 && *i + 1 < *n),
        }
    }

    /// Sampled inverse metric at a node.
    pub fn inverse_metric_at(&self, node: usize) -> DMatrix<f64> {
        let dim = self.dim();
        let p = self.packed_at(node);
        match dim {
            1 => DMatrix::from_row_slice(1, 1, &[p[0]]),
            _ => DMatrix::from_row_slice(2, 2, &[p[0], p[1], p[1], p[2]]),
        }
    }

    #[inline]
    pub(crate) fn packed_at(&self, node: usize) -> &[f64] {
        let stride = packed_stride(self.dim());
        &self.inverse_metric[node * stride..(node + 1) * stride]
    }

    /// Largest inverse-metric eigenvalue over the grid; enters the CFL bound.
    pub fn max_inverse_metric_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().fold(f64::INFINITY, |a, b| a.min(*b))
    }

    /// Largest stable explicit time step,
    /// `cfl_safety · h_min² / (2 · dim · λ_max)`.
    pub fn cfl_bound(&self, cfl_safety: f64) -> f64 {
        let h = self.min_spacing();
        cfl_safety * h * h / (2.0 * self.dim() as f64 * self.max_eigenvalue)
    }

    /// Reduces a raw (possibly out-of-range) lattice index to an in-domain
    /// node plus the deck-transformation counts applied, one per axis
    /// generator. A map value at the raw index is the stored value plus the
    /// counts times the map's per-axis monodromy shifts.
    ///
    /// Dirichlet grids never reduce; out-of-range indices are a caller bug.
    #[inline]
    pub fn reduce(&self, raw: &[isize]) -> (usize, [i64; 2]) {
        match self.boundary {
            Boundary::Dirichlet => {
                let mut multi = [0usize; 2];
                for d in 0..self.dim() {
                    debug_assert!(
                        raw[d] >= 0 && (raw[d] as usize) < self.nodes_per_axis[d],
                        "dirichlet stencil escaped the grid"
                    );
                    multi[d] = raw[d] as usize;
                }
                (self.node_index(&multi[..self.dim()]), [0, 0])
            }
            Boundary::Periodic => match self.gluing {
                Gluing::Torus => {
                    let mut multi = [0usize; 2];
                    let mut counts = [0i64; 2];
                    for d in 0..self.dim() {
                        let n = self.nodes_per_axis[d] as isize;
                        let k = raw[d].div_euclid(n);
                        multi[d] = (raw[d] - k * n) as usize;
                        counts[d] = k as i64;
                    }
                    (self.node_index(&multi[..self.dim()]), counts)
                }
                Gluing::Shear => {
                    let n = self.nodes_per_axis[0] as isize;
                    let k = raw[1].div_euclid(n);
                    // Pull back by the k-th power of the shear: the plane
                    // point (x, y) goes to (x − k·y + ½k², y − k) in units of
                    // the period, i.e. i ↦ i − k·j + k²·n/2 on the lattice.
                    let i_sheared = raw[0] - k * raw[1] + k * k * n / 2;
                    let m = i_sheared.div_euclid(n);
                    let multi = [(i_sheared - m * n) as usize, (raw[1] - k * n) as usize];
                    (self.node_index(&multi), [m as i64, k as i64])
                }
            },
        }
    }
}

fn packed_stride(dim: usize) -> usize {
    match dim {
        1 => 1,
        _ => 3,
    }
}

/// Packs a symmetric SPD matrix and returns its largest eigenvalue, or
/// `None` if the matrix fails the positivity check.
fn pack_spd(m: &DMatrix<f64>, out: &mut [f64]) -> Option<f64> {
    let dim = m.nrows();
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * (1.0 + m.amax()) {
        return None;
    }
    match dim {
        1 => {
            let a = m[(0, 0)];
            if a > 0.0 {
                out[0] = a;
                Some(a)
            } else {
                None
            }
        }
        _ => {
            let (a, b, c) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
            let mean = 0.5 * (a + c);
            let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let min = mean - radius;
            if min <= 1e-12 * (a + c) {
                return None;
            }
            out[0] = a;
            out[1] = b;
            out[2] = c;
            Some(mean + radius)
        }
    }
}

fn unravel(node: usize, nodes_per_axis: &[usize]) -> Vec<usize> {
    match nodes_per_axis.len() {
        1 => vec![node],
        _ => {
            let n1 = nodes_per_axis[1];
            vec![node / n1, node % n1]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize, boundary: Boundary, gluing: Gluing) -> DomainGrid {
        let h = 1.0 / n as f64;
        DomainGrid::uniform(&[n, n], &[h, h], boundary, gluing, &DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn periodic_grid_has_one_node_per_cell() {
        let g = unit_square(8, Boundary::Periodic, Gluing::Torus);
        assert_eq!(g.node_count(), 64);
        let g = unit_square(8, Boundary::Dirichlet, Gluing::Torus);
        assert_eq!(g.node_count(), 81);
    }

    #[test]
    fn rejects_tiny_grids_and_bad_spacing() {
        let id = DMatrix::identity(1, 1);
        assert!(matches!(
            DomainGrid::uniform(&[3], &[0.25], Boundary::Periodic, Gluing::Torus, &id),
            Err(GridError::TooFewCells { .. })
        ));
        assert!(matches!(
            DomainGrid::uniform(&[8], &[0.0], Boundary::Periodic, Gluing::Torus, &id),
            Err(GridError::BadSpacing { .. })
        ));
    }

    #[test]
    fn rejects_indefinite_metric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            DomainGrid::uniform(&[4, 4], &[0.25, 0.25], Boundary::Periodic, Gluing::Torus, &m),
            Err(GridError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn torus_reduction_wraps_each_axis() {
        let g = unit_square(8, Boundary::Periodic, Gluing::Torus);
        let (node, counts) = g.reduce(&[9, -1]);
        assert_eq!(node, g.node_index(&[1, 7]));
        assert_eq!(counts, [1, -1]);
    }

    #[test]
    fn shear_reduction_offsets_half_a_period() {
        let g = unit_square(8, Boundary::Periodic, Gluing::Shear);
        // One row above the seam: (i, n) lands at (i − n/2 mod n, 0).
        let (node, counts) = g.reduce(&[6, 8]);
        assert_eq!(node, g.node_index(&[2, 0]));
        assert_eq!(counts, [0, 1]);
        // Wrapping through the x-period accumulates an x-count.
        let (node, counts) = g.reduce(&[1, 8]);
        assert_eq!(node, g.node_index(&[5, 0]));
        assert_eq!(counts, [-1, 1]);
        // One row below: (i, −1) lands at (i − 1 + n/2 mod n, n − 1).
        let (node, counts) = g.reduce(&[0, -1]);
        assert_eq!(node, g.node_index(&[3, 7]));
        assert_eq!(counts, [0, -1]);
    }

    #[test]
    fn shear_requires_even_square() {
        let id = DMatrix::identity(2, 2);
        assert!(matches!(
            DomainGrid::uniform(&[6, 4], &[0.1, 0.1], Boundary::Periodic, Gluing::Shear, &id),
            Err(GridError::ShearShape)
        ));
        assert!(matches!(
            DomainGrid::uniform(&[5, 5], &[0.2, 0.2], Boundary::Periodic, Gluing::Shear, &id),
            Err(GridError::ShearShape)
        ));
    }

    #[test]
    fn cfl_bound_scales_with_spacing_and_eigenvalue() {
        let g = DomainGrid::uniform(
            &[8, 8],
            &[0.125, 0.125],
            Boundary::Periodic,
            Gluing::Torus,
            &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let expected = 0.5 * 0.125 * 0.125 / (2.0 * 2.0 * 2.0);
        assert!((g.cfl_bound(0.5) - expected).abs() < 1e-15);
    }

    #[test]
    fn interiority_depends_on_boundary() {
        let g = unit_square(4, Boundary::Dirichlet, Gluing::Torus);
        assert!(g.is_interior(&[1, 1]));
        assert!(!g.is_interior(&[0, 2]));
        assert!(!g.is_interior(&[4, 1]));
        let g = unit_square(4, Boundary::Periodic, Gluing::Torus);
        assert!(g.is_interior(&[0, 0]));
    }
}
