//! Convex potentials and their derivatives up to third order.
//!
//! A potential `F` is the single piece of user data the Hessian-metric
//! machinery needs: the metric is `∂²F`, the connection family comes from
//! `∂³F`, and the dual coordinates are `∂F`. Implementations must be C³ and
//! convex on the region they are queried on.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::tensor::Rank3;

/// A convex function together with its first three derivative tensors.
///
/// Contracts: `hess` returns a symmetric matrix, `third` a fully symmetric
/// rank-3 array, and both agree with finite differences of `eval`.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> f64;
    fn grad(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hess(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn third(&self, x: &DVector<f64>) -> Rank3;
}

/// `F(x) = ½ xᵀ A x` for a symmetric positive definite `A`.
///
/// The Hessian is constant and the third derivative vanishes, which makes
/// this the reference case: every connection coefficient is exactly zero.
#[derive(Debug, Clone)]
pub struct Quadratic {
    matrix: DMatrix<f64>,
}

impl Quadratic {
    /// `matrix` must be square and symmetric; it is symmetrized exactly so
    /// later Hessian queries return a bitwise-symmetric matrix.
    pub fn new(matrix: DMatrix<f64>) -> Self {
        assert!(matrix.is_square(), "quadratic coefficient matrix must be square");
        let sym = 0.5 * (&matrix + matrix.transpose());
        Self { matrix: sym }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl Potential for Quadratic {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.matrix * x))
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    fn hess(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.matrix.clone()
    }

    fn third(&self, _x: &DVector<f64>) -> Rank3 {
        Rank3::zeros(self.dim())
    }
}

/// `F(x) = Σ_i exp(x_i)`: strictly convex with diagonal derivatives of every
/// order, so all formulas can be checked by hand.
#[derive(Debug, Clone, Copy)]
pub struct SumExp {
    dim: usize,
}

impl SumExp {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        Self { dim }
    }
}

impl Potential for SumExp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        x.iter().map(|v| v.exp()).sum()
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| v.exp())
    }

    fn hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&x.map(|v| v.exp()))
    }

    fn third(&self, x: &DVector<f64>) -> Rank3 {
        Rank3::symmetric_from_fn(self.dim, |i, j, k| {
            if i == j && j == k {
                x[i].exp()
            } else {
                0.0
            }
        })
    }
}

/// Log-partition function `F(x) = ln(1 + Σ_i exp(x_i))` of the categorical
/// family with an implicit base category.
///
/// The extra `1` keeps the Hessian positive definite; the bare
/// `ln Σ exp(x_i)` is invariant under `x ↦ x + c·1` and therefore only
/// positive semidefinite, which would break the Legendre roundtrip.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    dim: usize,
}

impl LogSumExp {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        Self { dim }
    }

    /// Probabilities `p_i = exp(x_i) / (1 + Σ exp(x_j))`, computed with the
    /// usual max-shift so large coordinates do not overflow.
    fn probabilities(&self, x: &DVector<f64>) -> (Vec<f64>, f64) {
        let m = x.iter().fold(0.0_f64, |m, v| m.max(*v));
        let mut denom = (-m).exp();
        let shifted: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
        for s in &shifted {
            denom += s;
        }
        let p = shifted.iter().map(|s| s / denom).collect();
        let value = m + denom.ln();
        (p, value)
    }
}

impl Potential for LogSumExp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        self.probabilities(x).1
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.probabilities(x).0)
    }

    fn hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (p, _) = self.probabilities(x);
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let diag = if i == j { p[i] } else { 0.0 };
            diag - p[i] * p[j]
        })
    }

    fn third(&self, x: &DVector<f64>) -> Rank3 {
        let (p, _) = self.probabilities(x);
        let d = |a: usize, b: usize| -> f64 {
            if a == b {
                1.0
            } else {
                0.0
            }
        };
        Rank3::symmetric_from_fn(self.dim, |i, j, k| {
            d(i, j) * d(i, k) * p[i] - d(i, j) * p[i] * p[k] - d(i, k) * p[i] * p[j]
                - d(j, k) * p[j] * p[i]
                + 2.0 * p[i] * p[j] * p[k]
        })
    }
}

/// Central-difference adapter for potentials that only provide `eval`.
///
/// Derivatives of order `r` use stencils with the caller-set `step`; pick a
/// step suited to the order being queried (roundoff grows like `ε / stepʳ`).
pub struct FiniteDiff {
    dim: usize,
    step: f64,
    f: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
}

impl FiniteDiff {
    pub fn from_eval(
        dim: usize,
        step: f64,
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert!(step > 0.0, "step must be positive");
        Self {
            dim,
            step,
            f: Box::new(f),
        }
    }

    /// Wraps another potential's `eval`, ignoring its analytic derivatives.
    /// Used as the uniform oracle in derivative-consistency tests.
    pub fn wrap(pot: Arc<dyn Potential>, step: f64) -> Self {
        let dim = pot.dim();
        Self::from_eval(dim, step, move |x| pot.eval(x))
    }

    fn shifted(&self, x: &DVector<f64>, axis: usize, offset: f64) -> DVector<f64> {
        let mut y = x.clone();
        y[axis] += offset;
        y
    }

    fn hess_entry(&self, x: &DVector<f64>, i: usize, j: usize) -> f64 {
        let h = self.step;
        let f = &self.f;
        if i == j {
            let fp = f(&self.shifted(x, i, h));
            let fm = f(&self.shifted(x, i, -h));
            (fp - 2.0 * f(x) + fm) / (h * h)
        } else {
            let pp = f(&self.shifted(&self.shifted(x, i, h), j, h));
            let mm = f(&self.shifted(&self.shifted(x, i, -h), j, -h));
            let pm = f(&self.shifted(&self.shifted(x, i, h), j, -h));
            let mp = f(&self.shifted(&self.shifted(x, i, -h), j, h));
            (pp + mm - pm - mp) / (4.0 * h * h)
        }
    }
}

impl Potential for FiniteDiff {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        (self.f)(x)
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let h = self.step;
        DVector::from_fn(self.dim, |i, _| {
            let fp = (self.f)(&self.shifted(x, i, h));
            let fm = (self.f)(&self.shifted(x, i, -h));
            (fp - fm) / (2.0 * h)
        })
    }

    fn hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            if i <= j {
                self.hess_entry(x, i, j)
            } else {
                self.hess_entry(x, j, i)
            }
        })
    }

    fn third(&self, x: &DVector<f64>) -> Rank3 {
        let h = self.step;
        Rank3::symmetric_from_fn(self.dim, |i, j, k| {
            let hp = self.hess_entry(&self.shifted(x, k, h), i, j);
            let hm = self.hess_entry(&self.shifted(x, k, -h), i, j);
            (hp - hm) / (2.0 * h)
        })
    }
}

/// Names understood by `potential_from_name`, as they appear in config files.
pub fn potential_catalog() -> &'static [&'static str] {
    &["quadratic(A)", "sum_exp", "log_sum_exp"]
}

/// Resolves a catalog name to a potential of the given dimension.
/// `quadratic` requires its coefficient matrix; the other entries take none.
pub fn potential_from_name(
    name: &str,
    dim: usize,
    matrix: Option<&DMatrix<f64>>,
) -> Result<Arc<dyn Potential>, String> {
    match name {
        "quadratic" => {
            let m = matrix.ok_or_else(|| "potential 'quadratic' needs a matrix".to_string())?;
            if m.nrows() != dim || m.ncols() != dim {
                return Err(format!(
                    "quadratic matrix is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    dim,
                    dim
                ));
            }
            Ok(Arc::new(Quadratic::new(m.clone())))
        }
        "sum_exp" => Ok(Arc::new(SumExp::new(dim))),
        "log_sum_exp" => Ok(Arc::new(LogSumExp::new(dim))),
        other => Err(format!("unknown potential '{other}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn quadratic_derivatives() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let q = Quadratic::new(a.clone());
        let x = vec2(1.0, 0.0);
        assert_eq!(q.eval(&x), 1.0);
        assert_eq!(q.grad(&x), vec2(2.0, 1.0));
        assert_eq!(q.hess(&x), a);
        assert_eq!(q.third(&x).max_abs(), 0.0);
    }

    #[test]
    fn sum_exp_matches_finite_differences() {
        let pot = Arc::new(SumExp::new(2));
        let x = vec2(0.3, -0.4);
        let fd_grad = FiniteDiff::wrap(pot.clone(), 1e-6);
        assert!((pot.grad(&x) - fd_grad.grad(&x)).amax() < 1e-8);
        let fd_hess = FiniteDiff::wrap(pot.clone(), 1e-4);
        assert!((pot.hess(&x) - fd_hess.hess(&x)).amax() < 1e-6);
        let fd_third = FiniteDiff::wrap(pot.clone(), 5e-3);
        assert!(pot.third(&x).max_abs_diff(&fd_third.third(&x)) < 1e-4);
    }

    #[test]
    fn log_sum_exp_third_matches_one_dimensional_formula() {
        let pot = LogSumExp::new(1);
        let x = DVector::from_vec(vec![0.7]);
        let p = pot.grad(&x)[0];
        let expected = p - 3.0 * p * p + 2.0 * p * p * p;
        assert!((pot.third(&x).get(0, 0, 0) - expected).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_is_stable_for_large_arguments() {
        let pot = LogSumExp::new(2);
        let x = vec2(800.0, -800.0);
        assert!((pot.eval(&x) - 800.0).abs() < 1e-9);
        let g = pot.grad(&x);
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn catalog_resolves_fixed_names() {
        let a = DMatrix::identity(2, 2);
        assert!(potential_from_name("quadratic", 2, Some(&a)).is_ok());
        assert!(potential_from_name("sum_exp", 3, None).is_ok());
        assert!(potential_from_name("log_sum_exp", 2, None).is_ok());
        assert!(potential_from_name("nope", 2, None).is_err());
    }
}
