//! Square banded matrices with an in-place LU solve.
//!
//! The Newton matrices of the implicit step are mass-plus-stiffness matrices
//! whose symmetric part is positive definite, so elimination proceeds without
//! pivoting; a vanishing or non-finite pivot is reported as singular.

use crate::error::{Error, Result};

/// Square matrix with `kb` sub- and super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    kb: usize,
    /// Row-major band storage: entry `(i, j)` lives at `i * (2kb+1) + (j + kb - i)`.
    data: Vec<f64>,
}

impl Banded {
    /// Zero matrix of dimension `n` and half-bandwidth `kb`.
    pub fn zeros(n: usize, kb: usize) -> Self {
        Self {
            n,
            kb,
            data: vec![0.0; n * (2 * kb + 1)],
        }
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Half-bandwidth.
    pub fn half_bandwidth(&self) -> usize {
        self.kb
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || i.abs_diff(j) > self.kb {
            return None;
        }
        Some(i * (2 * self.kb + 1) + (j + self.kb - i))
    }

    /// Entry `(i, j)`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)`. Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {} of dim {}", self.kb, self.n));
        self.data[s] += v;
    }

    /// Adds `scale * other` entrywise; both matrices must share dimension and band.
    pub fn add_scaled(&mut self, other: &Banded, scale: f64) {
        assert_eq!((self.n, self.kb), (other.n, other.kb));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kb);
            let hi = (i + self.kb).min(self.n - 1);
            let mut s = 0.0;
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                s += self.data[i * (2 * self.kb + 1) + (j + self.kb - i)] * xj;
            }
            *yi = s;
        }
        y
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in i..(i + self.kb + 1).min(self.n) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Solves `A x = b` by banded Gaussian elimination without pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let kb = self.kb;
        let w = 2 * kb + 1;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let pivot = a[k * w + kb];
            if !pivot.is_finite() || pivot.abs() <= 1e-300 * scale {
                return Err(Error::Singular(k));
            }
            let last = (k + kb).min(n - 1);
            for i in (k + 1)..=last {
                let idx_ik = i * w + (k + kb - i);
                let factor = a[idx_ik] / pivot;
                if factor == 0.0 {
                    continue;
                }
                a[idx_ik] = 0.0;
                for j in (k + 1)..=last {
                    a[i * w + (j + kb - i)] -= factor * a[k * w + (j + kb - k)];
                }
                x[i] -= factor * x[k];
            }
        }
        for k in (0..n).rev() {
            let last = (k + kb).min(n - 1);
            let mut s = x[k];
            for j in (k + 1)..=last {
                s -= a[k * w + (j + kb - k)] * x[j];
            }
            x[k] = s / a[k * w + kb];
        }
        Ok(x)
    }
}

