//! Discretized maps from the domain grid into a target chart.
//!
//! A map into a quotient target is stored as a lift: one value per node of
//! the fundamental domain, in the target's cover chart, plus a fixed integer
//! combination of the chart's deck translations per domain period. Values at
//! out-of-range lattice indices are reconstructed from the stored copy and
//! those shifts, so equivariance holds structurally and never drifts during
//! a flow.

use std::sync::Arc;

use crate::flow::FlowError;
use crate::grid::{Boundary, DomainGrid};
use crate::target::TargetChart;

#[derive(Clone)]
pub struct MapField {
    chart: Arc<dyn TargetChart>,
    target_dim: usize,
    /// Node-major values, `target_dim` entries per node.
    values: Vec<f64>,
    /// One integer per chart generator per domain axis; fixed at
    /// construction.
    monodromy_counts: Vec<Vec<i64>>,
    /// Resolved translation per domain axis (counts contracted with the
    /// chart's monodromy generators).
    shifts: Vec<Vec<f64>>,
}

impl std::fmt::Debug for MapField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapField")
            .field("chart", &self.chart.name())
            .field("target_dim", &self.target_dim)
            .field("nodes", &(self.values.len() / self.target_dim.max(1)))
            .field("monodromy_counts", &self.monodromy_counts)
            .finish()
    }
}

impl MapField {
    /// Samples `lift` at every node coordinate. `monodromy_counts` gives,
    /// per domain axis, the integer multiple of each chart generator the
    /// lift picks up across that period; pass one empty row per axis for
    /// simply connected targets, or leave it empty for Dirichlet grids.
    pub fn from_fn(
        grid: &DomainGrid,
        chart: Arc<dyn TargetChart>,
        monodromy_counts: Vec<Vec<i64>>,
        mut lift: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Self, FlowError> {
        let target_dim = chart.dim();
        let generators = chart.monodromy();
        let mut counts = monodromy_counts;
        if counts.is_empty() {
            counts = vec![vec![0; generators.len()]; grid.dim()];
        }
        if counts.len() != grid.dim() {
            return Err(FlowError::ShapeMismatch {
                expected: grid.dim(),
                got: counts.len(),
            });
        }
        for row in &counts {
            if row.len() != generators.len() {
                return Err(FlowError::ShapeMismatch {
                    expected: generators.len(),
                    got: row.len(),
                });
            }
        }
        let shifts = counts
            .iter()
            .map(|row| {
                let mut shift = vec![0.0; target_dim];
                for (count, generator) in row.iter().zip(generators) {
                    for c in 0..target_dim {
                        shift[c] += *count as f64 * generator[c];
                    }
                }
                shift
            })
            .collect();

        let mut values = vec![0.0; grid.node_count() * target_dim];
        let mut buf = vec![0.0; target_dim];
        for node in 0..grid.node_count() {
            let coords = grid.node_coords(node);
            lift(&coords, &mut buf);
            if !chart.contains(&buf) {
                return Err(FlowError::DomainViolation {
                    node: grid.node_multi_index(node),
                    value: buf.clone(),
                });
            }
            values[node * target_dim..(node + 1) * target_dim].copy_from_slice(&buf);
        }

        Ok(Self {
            chart,
            target_dim,
            values,
            monodromy_counts: counts,
            shifts,
        })
    }

    /// Map sending every node to the same chart point.
    pub fn constant(
        grid: &DomainGrid,
        chart: Arc<dyn TargetChart>,
        value: &[f64],
    ) -> Result<Self, FlowError> {
        let v = value.to_vec();
        MapField::from_fn(grid, chart, Vec::new(), |_, out| out.copy_from_slice(&v))
    }

    pub fn chart(&self) -> &Arc<dyn TargetChart> {
        &self.chart
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.target_dim..(node + 1) * self.target_dim]
    }

    pub fn monodromy_counts(&self) -> &[Vec<i64>] {
        &self.monodromy_counts
    }

    /// Resolved cover translation per domain axis.
    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    /// Whether `other` lies in the same equivariance class (same chart
    /// dimension and identical monodromy integers).
    pub fn same_monodromy(&self, other: &MapField) -> bool {
        self.target_dim == other.target_dim && self.monodromy_counts == other.monodromy_counts
    }

    /// Component `c` of the lift at a raw lattice index, reconstructed
    /// through the grid's reduction and this map's monodromy shifts.
    #[inline]
    pub fn lifted(&self, grid: &DomainGrid, raw: &[isize], c: usize) -> f64 {
        let (node, counts) = grid.reduce(raw);
        let mut v = self.values[node * self.target_dim + c];
        for d in 0..grid.dim() {
            if counts[d] != 0 {
                v += counts[d] as f64 * self.shifts[d][c];
            }
        }
        v
    }

    /// Full lift at a raw lattice index.
    pub fn lifted_point(&self, grid: &DomainGrid, raw: &[isize], out: &mut [f64]) {
        let (node, counts) = grid.reduce(raw);
        out.copy_from_slice(self.value(node));
        for d in 0..grid.dim() {
            if counts[d] != 0 {
                for c in 0..self.target_dim {
                    out[c] += counts[d] as f64 * self.shifts[d][c];
                }
            }
        }
    }

    /// Largest componentwise difference to another field on the same grid.
    pub fn max_abs_diff(&self, other: &MapField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Checks every stored value still lies in the chart.
    pub fn validate_in_chart(&self, grid: &DomainGrid) -> Result<(), FlowError> {
        for node in 0..grid.node_count() {
            let v = self.value(node);
            if !self.chart.contains(v) {
                return Err(FlowError::DomainViolation {
                    node: grid.node_multi_index(node),
                    value: v.to_vec(),
                });
            }
        }
        Ok(())
    }

    /// True when the grid boundary freezes this map's boundary nodes.
    pub fn has_frozen_boundary(&self, grid: &DomainGrid) -> bool {
        grid.boundary() == Boundary::Dirichlet
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, DomainGrid, Gluing};
    use crate::target::{Euclidean, FlatTorus};
    use nalgebra::DMatrix;

    fn periodic_grid(n: usize, gluing: Gluing) -> DomainGrid {
        let h = 1.0 / n as f64;
        DomainGrid::uniform(&[n, n], &[h, h], Boundary::Periodic, gluing, &DMatrix::identity(2, 2))
            .unwrap()
    }

    #[test]
    fn ghost_values_add_monodromy_shifts() {
        let grid = periodic_grid(8, Gluing::Torus);
        let chart = Arc::new(FlatTorus::circle());
        // Degree-one map in x: crossing the x-period adds one target period.
        let f = MapField::from_fn(&grid, chart, vec![vec![1], vec![0]], |x, out| {
            out[0] = x[0];
        })
        .unwrap();
        assert_eq!(f.lifted(&grid, &[8, 0], 0), 1.0);
        assert_eq!(f.lifted(&grid, &[-1, 3], 0), -0.125);
        assert_eq!(f.lifted(&grid, &[3, 8], 0), f.lifted(&grid, &[3, 0], 0));
    }

    #[test]
    fn shear_ghost_reproduces_the_parabolic_lift() {
        let n = 8;
        let grid = periodic_grid(n, Gluing::Shear);
        let chart = Arc::new(FlatTorus::circle());
        let f = MapField::from_fn(&grid, chart, vec![vec![1], vec![0]], |x, out| {
            out[0] = x[0] - 0.5 * x[1] * x[1];
        })
        .unwrap();
        let h = 1.0 / n as f64;
        let exact = |i: isize, j: isize| {
            let (x, y) = (i as f64 * h, j as f64 * h);
            x - 0.5 * y * y
        };
        // Rows one beyond either seam match the plane values exactly.
        for i in -1..=(n as isize) {
            assert_eq!(f.lifted(&grid, &[i, n as isize], 0), exact(i, n as isize));
            assert_eq!(f.lifted(&grid, &[i, -1], 0), exact(i, -1));
            assert_eq!(f.lifted(&grid, &[-1, i], 0), exact(-1, i));
        }
    }

    #[test]
    fn out_of_chart_values_are_rejected() {
        let grid = periodic_grid(4, Gluing::Torus);
        let chart = Arc::new(crate::target::HyperbolicHalfPlane::new());
        let err = MapField::from_fn(&grid, chart, Vec::new(), |x, out| {
            out[0] = x[0];
            out[1] = x[1] - 0.5; // dips below the chart floor
        })
        .unwrap_err();
        assert!(matches!(err, FlowError::DomainViolation { .. }));
    }

    #[test]
    fn monodromy_class_comparison() {
        let grid = periodic_grid(4, Gluing::Torus);
        let chart = Arc::new(FlatTorus::circle());
        let a = MapField::from_fn(&grid, chart.clone(), vec![vec![1], vec![0]], |x, out| {
            out[0] = x[0];
        })
        .unwrap();
        let b = MapField::from_fn(&grid, chart.clone(), vec![vec![0], vec![0]], |_, out| {
            out[0] = 0.0;
        })
        .unwrap();
        assert!(!a.same_monodromy(&b));
        assert!(a.same_monodromy(&a.clone()));
        let _ = Euclidean::new(1);
    }
}
