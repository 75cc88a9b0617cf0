//! Small dense rank-3 arrays used for third derivatives and Christoffel
//! symbols. Dimensions stay tiny (≤ 4), so everything is a flat `Vec<f64>`
//! with row-major layout `(i, j, k)`.

/// Dense rank-3 array of shape `dim × dim × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank3 {
    dim: usize,
    data: Vec<f64>,
}

impl Rank3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    out.set(i, j, k, f(i, j, k));
                }
            }
        }
        out
    }

    /// Builds a fully symmetric array by calling `f` once per ordered triple
    /// `i ≤ j ≤ k` and mirroring the value to every permutation. The result
    /// is exactly symmetric, bit for bit.
    pub fn symmetric_from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                for k in j..dim {
                    let v = f(i, j, k);
                    for (a, b, c) in [
                        (i, j, k),
                        (i, k, j),
                        (j, i, k),
                        (j, k, i),
                        (k, i, j),
                        (k, j, i),
                    ] {
                        out.set(a, b, c, v);
                    }
                }
            }
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Returns a copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| factor * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest deviation from full index symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    let v = self.get(i, j, k);
                    for w in [self.get(i, k, j), self.get(j, i, k), self.get(k, j, i)] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    /// Full contraction `Σ_{ijk} T_{ijk} a_i b_j c_k`.
    pub fn contract3(&self, a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        let n = self.dim;
        assert!(a.len() == n && b.len() == n && c.len() == n, "length mismatch");
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut inner = 0.0;
                for k in 0..n {
                    inner += self.get(i, j, k) * c[k];
                }
                total += a[i] * b[j] * inner;
            }
        }
        total
    }

    /// Entrywise maximum of `|self - other|`.
    pub fn max_abs_diff(&self, other: &Rank3) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}
