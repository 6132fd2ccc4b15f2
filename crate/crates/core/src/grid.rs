//! Uniform discretization of the reference interval `[-1, 1]`.
//!
//! Provides the node set, composite trapezoid quadrature, second-order finite
//! difference operators of order one to four, and norms weighted by powers of
//! the reference height.

use crate::equilibrium::EquilibriumProfile;
use crate::error::{Error, Result};

/// Boundary treatment for finite-difference operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Mirror ghost node at each endpoint encoding `θ_ξ(±1) = 0`: the first
    /// derivative is zero at both endpoints. Higher orders use one-sided stencils
    /// near the boundary.
    NeumannThetaXiZero,
    /// One-sided second-order stencils near the boundary, no closure imposed.
    OneSided,
}

/// Powers of the reference height accepted by [`Grid::weighted_norm`].
pub const WEIGHT_POWERS: [f64; 7] = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];

/// Node set, quadrature weights and cached equilibrium samples.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    dx: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    h: Vec<f64>,
    h1: Vec<f64>,
    ms: Vec<f64>,
}

impl Grid {
    /// Builds a grid with `n` intervals (`n + 1` nodes) and caches the normalized
    /// equilibrium samples.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_profile(n, &EquilibriumProfile::normalized())
    }

    /// Builds a grid and caches samples of the given equilibrium profile.
    pub fn with_profile(n: usize, profile: &EquilibriumProfile) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::config("N", format!("must be even and at least 16, got {n}")));
        }
        let dx = 2.0 / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| -1.0 + i as f64 * dx).collect();
        nodes[0] = -1.0;
        nodes[n] = 1.0;
        let mut weights = vec![dx; n + 1];
        weights[0] = 0.5 * dx;
        weights[n] = 0.5 * dx;
        let h = nodes.iter().map(|&x| profile.eval(x, 0)).collect::<Result<Vec<_>>>()?;
        let h1 = nodes.iter().map(|&x| profile.eval(x, 1)).collect::<Result<Vec<_>>>()?;
        let ms = nodes
            .iter()
            .map(|&x| profile.coefficient_ms(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            dx,
            nodes,
            weights,
            h,
            h1,
            ms,
        })
    }

    /// Number of intervals `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes `N + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    /// Always false: a grid has at least 17 nodes.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spacing `Δξ = 2/N`.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Nodes `ξ_0 = -1 < ... < ξ_N = 1`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Composite trapezoid weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cached `h_s(ξ_i)`.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Cached `h_s'(ξ_i)`.
    pub fn h1(&self) -> &[f64] {
        &self.h1
    }

    /// Cached `m_s(ξ_i)`.
    pub fn ms(&self) -> &[f64] {
        &self.ms
    }

    /// Checks that `samples` has one value per node.
    pub fn check_len(&self, samples: &[f64]) -> Result<()> {
        if samples.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: samples.len(),
            });
        }
        Ok(())
    }

    /// Trapezoid quadrature of nodal samples over `[-1, 1]`, evaluated as
    /// `(2/N) Σ' s_i` (endpoint terms halved) with Neumaier compensated
    /// summation, so that the constant one integrates to exactly two for every `N`.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples)?;
        let (mut sum, mut carry) = (0.0_f64, 0.0_f64);
        for (i, &s) in samples.iter().enumerate() {
            let term = if i == 0 || i == self.n { 0.5 * s } else { s };
            let next = sum + term;
            carry += if sum.abs() >= term.abs() {
                (sum - next) + term
            } else {
                (term - next) + sum
            };
            sum = next;
        }
        Ok(2.0 * (sum + carry) / self.n as f64)
    }

    /// Applies the finite-difference operator of the given order.
    pub fn apply_diff(&self, order: usize, samples: &[f64], bc: BoundaryMode) -> Result<Vec<f64>> {
        DiffOp::new(self, order, bc)?.apply(samples)
    }

    /// `‖h_s^p · samples‖` using the cached equilibrium weight.
    pub fn weighted_norm(&self, samples: &[f64], p: f64) -> Result<f64> {
        self.weighted_norm_with(&self.h, samples, p)
    }

    /// `‖w^p · samples‖` for an arbitrary nonnegative nodal weight `w` that
    /// vanishes at the endpoints. For negative `p` the endpoint contributions
    /// are set to zero, which requires the samples to vanish there.
    pub fn weighted_norm_with(&self, weight: &[f64], samples: &[f64], p: f64) -> Result<f64> {
        self.check_len(samples)?;
        self.check_len(weight)?;
        if !WEIGHT_POWERS.contains(&p) {
            return Err(Error::Domain(format!("weight power {p} not in {WEIGHT_POWERS:?}")));
        }
        let n = self.n;
        let mut sum = 0.0;
        if p < 0.0 {
            let scale = samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
            let tol = 1e-10 * scale;
            if samples[0].abs() > tol || samples[n].abs() > tol {
                return Err(Error::Degeneracy {
                    power: p,
                    left: samples[0],
                    right: samples[n],
                });
            }
            for i in 1..n {
                sum += self.weights[i] * weight[i].powf(2.0 * p) * samples[i] * samples[i];
            }
        } else {
            for i in 0..=n {
                let w = if p == 0.0 { 1.0 } else { weight[i].powf(2.0 * p) };
                sum += self.weights[i] * w * samples[i] * samples[i];
            }
        }
        Ok(sum.sqrt())
    }
}

/// A precomputed finite-difference operator on a grid.
#[derive(Debug, Clone)]
pub struct DiffOp {
    order: usize,
    bc: BoundaryMode,
    /// Per-node stencil: first node index and weights.
    stencils: Vec<(usize, Vec<f64>)>,
}

impl DiffOp {
    /// Builds the operator for derivative `order ∈ 1..=4`.
    pub fn new(grid: &Grid, order: usize, bc: BoundaryMode) -> Result<Self> {
        if !(1..=4).contains(&order) {
            return Err(Error::Domain(format!("derivative order {order} outside 1..=4")));
        }
        let n = grid.n();
        let dx = grid.dx();
        let half = if order <= 2 { 1 } else { 2 };
        let centered: Vec<f64> = match order {
            1 => vec![-0.5, 0.0, 0.5],
            2 => vec![1.0, -2.0, 1.0],
            3 => vec![-0.5, 1.0, 0.0, -1.0, 0.5],
            _ => vec![1.0, -4.0, 6.0, -4.0, 1.0],
        };
        let scale = dx.powi(order as i32);
        let width = order + 2;
        let mut stencils = Vec::with_capacity(n + 1);
        for i in 0..=n {
            if i >= half && i + half <= n {
                stencils.push((i - half, centered.iter().map(|c| c / scale).collect()));
            } else {
                let start = if i < half { 0 } else { n + 1 - width };
                let offsets: Vec<f64> = (0..width).map(|k| (start + k) as f64 - i as f64).collect();
                let w = fornberg_weights(&offsets, order);
                stencils.push((start, w.iter().map(|c| c / scale).collect()));
            }
        }
        Ok(Self { order, bc, stencils })
    }

    /// Derivative order.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Boundary treatment.
    pub fn boundary(&self) -> BoundaryMode {
        self.bc
    }

    /// Largest distance between a node and the nodes of its stencil.
    pub fn bandwidth(&self) -> usize {
        self.stencils
            .iter()
            .enumerate()
            .map(|(i, (s, w))| i.abs_diff(*s).max((s + w.len() - 1).abs_diff(i)))
            .max()
            .unwrap_or(0)
    }

    /// Applies the operator to nodal samples.
    pub fn apply(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let len = self.stencils.len();
        if samples.len() != len {
            return Err(Error::Shape {
                expected: len,
                got: samples.len(),
            });
        }
        let mut out: Vec<f64> = self
            .stencils
            .iter()
            .map(|(s, w)| w.iter().zip(&samples[*s..]).map(|(a, b)| a * b).sum())
            .collect();
        if self.bc == BoundaryMode::NeumannThetaXiZero && self.order == 1 {
            out[0] = 0.0;
            out[len - 1] = 0.0;
        }
        Ok(out)
    }
}

/// Finite-difference weights for the derivative of order `m` at offset 0,
/// given integer-spaced node offsets (Fornberg's recursion).
fn fornberg_weights(offsets: &[f64], m: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

