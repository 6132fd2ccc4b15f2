//! Semi-discrete Lagrangian model: discrete Hamiltonian, Rayleigh dissipation
//! and the reduction to active unknowns.
//!
//! With `η_ξ = 1 + θ_ξ` and reference height `h`, the potential energy is
//!
//! ```text
//! V = ∫ (g/2) h²/η_ξ + (γ/2) [ (h'² - 2 h h'')/(3 η_ξ³) + h² η_ξξ²/η_ξ⁵ + α² η_ξ ] dξ
//! ```
//!
//! and the dissipation potential is
//!
//! ```text
//! R = ∫ 2μ h u_ξ²/η_ξ² + (𝔟⁻¹/2) u² η_ξ dξ + (γν/4)(u(-1)² + u(1)²).
//! ```
//!
//! The discrete energy evaluates the first three integrands at half nodes with
//! `η_ξ = 1 + (θ_{i+1} - θ_i)/Δξ` and the curvature term at interior nodes with
//! centered differences. The momentum equation at every node with positive
//! mass is `M θ_tt = -∂V/∂θ - ∂R/∂u`, so the discrete energy obeys
//! `dℋ/dt = -2R` and, because `V` and the viscous part of `R` only depend on
//! differences of nodal values, the discrete momentum `Σ M u` changes only
//! through slip and contact-line friction.
//!
//! Energies are reported relative to the rest state `θ = 0`. Each half-node
//! term is written with its value and slope at rest removed, for example
//! `1/η_ξ - 1 + s = s²/η_ξ` with `s = θ_ξ`, so every term is quadratic in the
//! perturbation and keeps full relative precision however small it is.
//!
//! Under the static contact angle the endpoint values are slaved to the
//! interior through the one-sided closure `(-3θ_0 + 4θ_1 - θ_2) = 0`
//! (and its mirror image), which keeps the endpoint slope of the flow map at
//! exactly one. Under the dynamic law the endpoints are unknowns without mass
//! whose equation is the contact-line force balance.

use crate::banded::Banded;
use crate::equilibrium::PhysicalParams;
use crate::error::{Error, Result};
use crate::grid::Grid;

use super::config::Variant;
use super::reference::ReferenceProfile;

/// Half-bandwidth of the full-grid Hessian (five-point curvature stencil).
pub const HALF_BANDWIDTH: usize = 2;

/// Dissipation rates split by mechanism.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DissipationParts {
    /// `∫ 4μ h |∂_x u|² dx`.
    pub viscous: f64,
    /// `∫ 𝔟⁻¹ u² dx`.
    pub slip: f64,
    /// `(γν/2)(ȧ² + ḃ²)`, which is `ν(ȧ² + ḃ²)` for `γ = 2`.
    pub contact: f64,
}

impl DissipationParts {
    /// Sum of all mechanisms.
    pub fn total(&self) -> f64 {
        self.viscous + self.slip + self.contact
    }
}

/// Linear operators used by the linearized model.
#[derive(Debug, Clone)]
struct LinearPart {
    k: Banded,
    c: Banded,
}

/// Map between the full node vector and the active unknowns.
#[derive(Debug, Clone)]
pub struct Reduction {
    n_full: usize,
    n_active: usize,
    /// For every full index: contributing active indices and coefficients.
    map: Vec<Vec<(usize, f64)>>,
    /// Full index of every active unknown.
    active: Vec<usize>,
}

impl Reduction {
    fn slaved(n: usize) -> Self {
        let n_full = n + 1;
        let n_active = n - 1;
        let mut map = vec![Vec::new(); n_full];
        map[0] = vec![(0, 4.0 / 3.0), (1, -1.0 / 3.0)];
        for (i, slot) in map.iter_mut().enumerate().take(n).skip(1) {
            *slot = vec![(i - 1, 1.0)];
        }
        map[n] = vec![(n - 2, 4.0 / 3.0), (n - 3, -1.0 / 3.0)];
        Self {
            n_full,
            n_active,
            map,
            active: (1..n).collect(),
        }
    }

    fn identity(n: usize) -> Self {
        let n_full = n + 1;
        Self {
            n_full,
            n_active: n_full,
            map: (0..n_full).map(|i| vec![(i, 1.0)]).collect(),
            active: (0..n_full).collect(),
        }
    }

    /// Number of active unknowns.
    pub fn n_active(&self) -> usize {
        self.n_active
    }

    /// Full index of each active unknown.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Full nodal vector from active values.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|row| row.iter().map(|&(a, s)| s * x[a]).sum())
            .collect()
    }

    /// Active values of a full vector (restriction, no folding).
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.active.iter().map(|&i| full[i]).collect()
    }

    /// Transpose of `expand`: folds a full covector onto active unknowns.
    pub fn fold(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_active];
        for (row, v) in self.map.iter().zip(full) {
            for &(a, s) in row {
                out[a] += s * v;
            }
        }
        out
    }

    /// `Sᵀ A S` for a full banded matrix `A`.
    pub fn fold_matrix(&self, a: &Banded) -> Banded {
        let kb = a.half_bandwidth();
        let mut out = Banded::zeros(self.n_active, kb);
        for i in 0..self.n_full {
            let lo = i.saturating_sub(kb);
            let hi = (i + kb).min(self.n_full - 1);
            for j in lo..=hi {
                let v = a.get(i, j);
                if v == 0.0 {
                    continue;
                }
                for &(p, sp) in &self.map[i] {
                    for &(q, sq) in &self.map[j] {
                        out.add(p, q, sp * sq * v);
                    }
                }
            }
        }
        out
    }

    /// Replaces the slaved entries of a full vector by their closure values.
    pub fn conform(&self, full: &mut [f64]) {
        let x = self.restrict(full);
        let e = self.expand(&x);
        full.copy_from_slice(&e);
    }
}

/// Semi-discrete model on a fixed grid and reference profile.
#[derive(Debug, Clone)]
pub struct LagModel {
    grid: Grid,
    reference: ReferenceProfile,
    params: PhysicalParams,
    variant: Variant,
    mass: Vec<f64>,
    a_half: Vec<f64>,
    b_half: Vec<f64>,
    h_half: Vec<f64>,
    c_node: Vec<f64>,
    /// `∂V/∂θ` at `θ = 0`. For an equilibrium reference the edge values
    /// `g h² + γ(h'² - 2hh'')` are constant, because their derivative is
    /// `2h(g h' - γ h''') = 0`, so this vector is zero and is stored as such.
    gradient0: Vec<f64>,
    reduction: Reduction,
    linear: Option<LinearPart>,
}

impl LagModel {
    /// Nonlinear model.
    pub fn new(grid: &Grid, reference: &ReferenceProfile, variant: Variant) -> Result<Self> {
        variant.validate()?;
        grid.check_len(reference.h())?;
        let n = grid.n();
        let dx = grid.dx();
        let p = reference.params();
        let h = reference.h();
        let h1 = reference.d(1);
        let h2 = reference.d(2);
        let node_a: Vec<f64> = h.iter().map(|v| v * v).collect();
        let node_b: Vec<f64> = (0..=n).map(|i| h1[i] * h1[i] - 2.0 * h[i] * h2[i]).collect();
        let avg = |v: &[f64]| (0..n).map(|i| 0.5 * (v[i] + v[i + 1])).collect::<Vec<_>>();
        let mass: Vec<f64> = grid.weights().iter().zip(h).map(|(w, v)| w * v).collect();
        let c_node: Vec<f64> = h.iter().map(|v| dx * 0.5 * p.gamma * v * v).collect();
        let reduction = if variant.is_static() {
            Reduction::slaved(n)
        } else {
            Reduction::identity(n)
        };
        let a_half = avg(&node_a);
        let b_half = avg(&node_b);
        let mut gradient0 = vec![0.0; n + 1];
        for i in (0..n).filter(|_| !reference.is_equilibrium()) {
            let wp = -0.5 * p.g * a_half[i] + 0.5 * p.gamma * (p.alpha * p.alpha - b_half[i]);
            gradient0[i + 1] += wp;
            gradient0[i] -= wp;
        }
        Ok(Self {
            grid: grid.clone(),
            reference: reference.clone(),
            params: p,
            variant,
            mass,
            a_half,
            b_half,
            h_half: avg(h),
            c_node,
            gradient0,
            reduction,
            linear: None,
        })
    }

    /// Model whose potential and dissipation are the quadratic expansions of
    /// the nonlinear ones about `θ = 0`.
    pub fn linearized(grid: &Grid, reference: &ReferenceProfile, variant: Variant) -> Result<Self> {
        let mut m = Self::new(grid, reference, variant)?;
        let zero = vec![0.0; grid.len()];
        let k = m.hessian(&zero);
        let c = m.dissipation_jacobian_u(&zero);
        m.linear = Some(LinearPart { k, c });
        Ok(m)
    }

    /// True for the linearized model.
    pub fn is_linear(&self) -> bool {
        self.linear.is_some()
    }

    /// Grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Reference profile.
    pub fn reference(&self) -> &ReferenceProfile {
        &self.reference
    }

    /// Physical constants.
    pub fn params(&self) -> PhysicalParams {
        self.params
    }

    /// Dissipative mechanisms.
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Nodal masses `w_i h_i`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Active-unknown reduction.
    pub fn reduction(&self) -> &Reduction {
        &self.reduction
    }

    /// Reference height averaged to half nodes.
    pub fn h_half(&self) -> &[f64] {
        &self.h_half
    }

    /// `η_ξ` at half nodes.
    pub fn eta_half(&self, theta: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx();
        theta.windows(2).map(|w| 1.0 + (w[1] - w[0]) / dx).collect()
    }

    /// Smallest and largest discrete `η_ξ` over half nodes and centered interior nodes.
    pub fn eta_range(&self, theta: &[f64]) -> (f64, f64) {
        let dx = self.grid.dx();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in self.eta_half(theta) {
            lo = lo.min(e);
            hi = hi.max(e);
        }
        for w in theta.windows(3) {
            let e = 1.0 + (w[2] - w[0]) / (2.0 * dx);
            lo = lo.min(e);
            hi = hi.max(e);
        }
        (lo, hi)
    }

    /// Kinetic energy `½ Σ M u²`.
    pub fn kinetic(&self, u: &[f64]) -> f64 {
        0.5 * self.mass.iter().zip(u).map(|(m, v)| m * v * v).sum::<f64>()
    }

    /// Discrete momentum `Σ M u`, the quadrature of `∫ h u dx`.
    pub fn momentum(&self, u: &[f64]) -> f64 {
        self.mass.iter().zip(u).map(|(m, v)| m * v).sum()
    }

    /// Discrete potential energy above the rest state, `V(θ) - V(0)`.
    pub fn potential(&self, theta: &[f64]) -> f64 {
        if let Some(lin) = &self.linear {
            let kt = lin.k.mul_vec(theta);
            return 0.5 * dot(theta, &kt);
        }
        let p = self.params;
        let dx = self.grid.dx();
        let n = self.grid.n();
        let mut v = dot(&self.gradient0, theta);
        for i in 0..n {
            let s = (theta[i + 1] - theta[i]) / dx;
            let e = 1.0 + s;
            let s2 = s * s;
            v += dx
                * (0.5 * p.g * self.a_half[i] * s2 / e
                    + p.gamma * self.b_half[i] * s2 * (6.0 + 8.0 * s + 3.0 * s2) / (6.0 * e * e * e));
        }
        for i in 1..n {
            let (r, e) = curvature(theta, i, dx);
            v += self.c_node[i] * r * r / e.powi(5);
        }
        v
    }

    /// Discrete potential energy `V(0)` of the rest state.
    pub fn rest_energy(&self) -> f64 {
        let p = self.params;
        let dx = self.grid.dx();
        (0..self.grid.n())
            .map(|i| {
                dx * (0.5 * p.g * self.a_half[i] + 0.5 * p.gamma * (self.b_half[i] / 3.0 + p.alpha * p.alpha))
            })
            .sum()
    }

    /// Discrete Hamiltonian above the rest state, `½ Σ M u² + V(θ) - V(0)`.
    pub fn hamiltonian(&self, theta: &[f64], u: &[f64]) -> f64 {
        self.kinetic(u) + self.potential(theta)
    }

    /// Gradient `∂V/∂θ` at every node.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        if let Some(lin) = &self.linear {
            return lin.k.mul_vec(theta);
        }
        let p = self.params;
        let dx = self.grid.dx();
        let n = self.grid.n();
        // Edge terms are split into their value at θ = 0 and the increment,
        // written as `e⁻² - 1 = -s(2+s)/e²` and `e⁻⁴ - 1 = -s(2+s)(2+2s+s²)/e⁴`
        // with `s = θ_ξ`, so that small perturbations keep full relative precision.
        let mut g = vec![0.0; n + 1];
        for i in 0..n {
            let s = (theta[i + 1] - theta[i]) / dx;
            let e = 1.0 + s;
            let e2 = e * e;
            let q = s * (2.0 + s);
            let inv2m1 = -q / e2;
            let inv4m1 = -q * (2.0 + 2.0 * s + s * s) / (e2 * e2);
            let dwp = -0.5 * p.g * self.a_half[i] * inv2m1 - 0.5 * p.gamma * self.b_half[i] * inv4m1;
            g[i + 1] += dwp;
            g[i] -= dwp;
        }
        let dx2 = dx * dx;
        for i in 1..n {
            let c = self.c_node[i];
            if c == 0.0 {
                continue;
            }
            let (r, e) = curvature(theta, i, dx);
            let fr = 2.0 * c * r / e.powi(5);
            let fe = -5.0 * c * r * r / e.powi(6);
            g[i - 1] += fr / dx2 - fe / (2.0 * dx);
            g[i] -= 2.0 * fr / dx2;
            g[i + 1] += fr / dx2 + fe / (2.0 * dx);
        }
        for (gi, g0) in g.iter_mut().zip(&self.gradient0) {
            *gi += g0;
        }
        g
    }

    /// Hessian `∂²V/∂θ²` as a banded matrix on the full grid.
    pub fn hessian(&self, theta: &[f64]) -> Banded {
        if let Some(lin) = &self.linear {
            return lin.k.clone();
        }
        let p = self.params;
        let dx = self.grid.dx();
        let n = self.grid.n();
        let mut h = Banded::zeros(n + 1, HALF_BANDWIDTH);
        for i in 0..n {
            let e = 1.0 + (theta[i + 1] - theta[i]) / dx;
            let wpp = p.g * self.a_half[i] / e.powi(3) + 2.0 * p.gamma * self.b_half[i] / e.powi(5);
            let k = wpp / dx;
            h.add(i, i, k);
            h.add(i + 1, i + 1, k);
            h.add(i, i + 1, -k);
            h.add(i + 1, i, -k);
        }
        let dx2 = dx * dx;
        let ar = [1.0 / dx2, -2.0 / dx2, 1.0 / dx2];
        let ae = [-0.5 / dx, 0.0, 0.5 / dx];
        for i in 1..n {
            let c = self.c_node[i];
            if c == 0.0 {
                continue;
            }
            let (r, e) = curvature(theta, i, dx);
            let frr = 2.0 * c / e.powi(5);
            let fre = -10.0 * c * r / e.powi(6);
            let fee = 30.0 * c * r * r / e.powi(7);
            for a in 0..3 {
                for b in 0..3 {
                    let v = frr * ar[a] * ar[b] + fre * (ar[a] * ae[b] + ae[a] * ar[b]) + fee * ae[a] * ae[b];
                    h.add(i + a - 1, i + b - 1, v);
                }
            }
        }
        h
    }

    /// Dissipative force `∂R/∂u` at every node.
    pub fn dissipation_force(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        if let Some(lin) = &self.linear {
            return lin.c.mul_vec(u);
        }
        let p = self.params;
        let dx = self.grid.dx();
        let n = self.grid.n();
        let mu = self.variant.mu;
        let sinv = self.variant.slip_inv;
        let mut f = vec![0.0; n + 1];
        for i in 0..n {
            let e = 1.0 + (theta[i + 1] - theta[i]) / dx;
            let kappa = 4.0 * mu * self.h_half[i] / dx;
            let rho = kappa * (u[i + 1] - u[i]) / (e * e);
            f[i + 1] += rho;
            f[i] -= rho;
            if sinv > 0.0 {
                let s = 0.5 * sinv * dx * e;
                f[i] += s * u[i];
                f[i + 1] += s * u[i + 1];
            }
        }
        let cf = 0.5 * p.gamma * self.variant.nu();
        f[0] += cf * u[0];
        f[n] += cf * u[n];
        f
    }

    /// Jacobian of `∂R/∂u` with respect to `u`.
    pub fn dissipation_jacobian_u(&self, theta: &[f64]) -> Banded {
        if let Some(lin) = &self.linear {
            return lin.c.clone();
        }
        let p = self.params;
        let dx = self.grid.dx();
        let n = self.grid.n();
        let mu = self.variant.mu;
        let sinv = self.variant.slip_inv;
        let mut j = Banded::zeros(n + 1, HALF_BANDWIDTH);
        for i in 0..n {
            let e = 1.0 + (theta[i + 1] - theta[i]) / dx;
            let k = 4.0 * mu * self.h_half[i] / (dx * e * e);
            j.add(i, i, k);
            j.add(i + 1, i + 1, k);
            j.add(i, i + 1, -k);
            j.add(i + 1, i, -k);
            if sinv > 0.0 {
                let s = 0.5 * sinv * dx * e;
                j.add(i, i, s);
                j.add(i + 1, i + 1, s);
            }
        }
        let cf = 0.5 * p.gamma * self.variant.nu();
        j.add(0, 0, cf);
        j.add(n, n, cf);
        j
    }

    /// Jacobian of `∂R/∂u` with respect to `θ`.
    pub fn dissipation_jacobian_theta(&self, theta: &[f64], u: &[f64]) -> Banded {
        let dx = self.grid.dx();
        let n = self.grid.n();
        let mut j = Banded::zeros(n + 1, HALF_BANDWIDTH);
        if self.linear.is_some() {
            return j;
        }
        let mu = self.variant.mu;
        let sinv = self.variant.slip_inv;
        for i in 0..n {
            let e = 1.0 + (theta[i + 1] - theta[i]) / dx;
            let kappa = 4.0 * mu * self.h_half[i] / dx;
            let d = -2.0 * kappa * (u[i + 1] - u[i]) / (e * e * e * dx);
            j.add(i + 1, i + 1, d);
            j.add(i + 1, i, -d);
            j.add(i, i + 1, -d);
            j.add(i, i, d);
            if sinv > 0.0 {
                let ds = 0.5 * sinv;
                j.add(i, i + 1, ds * u[i]);
                j.add(i, i, -ds * u[i]);
                j.add(i + 1, i + 1, ds * u[i + 1]);
                j.add(i + 1, i, -ds * u[i + 1]);
            }
        }
        j
    }

    /// Dissipation rate `2R(θ, u)` split by mechanism.
    pub fn dissipation(&self, theta: &[f64], u: &[f64]) -> DissipationParts {
        if let Some(lin) = &self.linear {
            let cu = lin.c.mul_vec(u);
            return DissipationParts {
                viscous: dot(u, &cu),
                ..Default::default()
            };
        }
        let p = self.params;
        let dx = self.grid.dx();
        let n = self.grid.n();
        let mu = self.variant.mu;
        let sinv = self.variant.slip_inv;
        let mut out = DissipationParts::default();
        for i in 0..n {
            let e = 1.0 + (theta[i + 1] - theta[i]) / dx;
            let du = u[i + 1] - u[i];
            out.viscous += 4.0 * mu * self.h_half[i] * du * du / (dx * e * e);
            out.slip += 0.5 * sinv * dx * e * (u[i] * u[i] + u[i + 1] * u[i + 1]);
        }
        out.contact = 0.5 * p.gamma * self.variant.nu() * (u[0] * u[0] + u[n] * u[n]);
        out
    }

    /// Total slip force `Σ ∂R_slip/∂u`, the quadrature of `∫ 𝔟⁻¹ u dx`.
    pub fn slip_force_total(&self, theta: &[f64], u: &[f64]) -> f64 {
        if self.linear.is_some() || self.variant.slip_inv == 0.0 {
            return 0.0;
        }
        let dx = self.grid.dx();
        let sinv = self.variant.slip_inv;
        (0..self.grid.n())
            .map(|i| {
                let e = 1.0 + (theta[i + 1] - theta[i]) / dx;
                0.5 * sinv * dx * e * (u[i] + u[i + 1])
            })
            .sum()
    }

    /// Force `F = -∂V/∂θ - ∂R/∂u` at every node.
    pub fn force(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        let g = self.gradient(theta);
        let d = self.dissipation_force(theta, u);
        g.iter().zip(&d).map(|(a, b)| -a - b).collect()
    }

    /// Acceleration `θ_tt` from the semi-discrete system. Nodes without mass are
    /// filled by the closure (static law) or by cubic extrapolation (dynamic law).
    pub fn acceleration(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        let f = self.reduction.fold(&self.force(theta, u));
        let mut a_full = vec![0.0; self.grid.len()];
        for (k, &i) in self.reduction.active().iter().enumerate() {
            if self.mass[i] > 0.0 {
                a_full[i] = f[k] / self.mass[i];
            }
        }
        let n = self.grid.n();
        if self.variant.is_static() {
            self.reduction.conform(&mut a_full);
        } else {
            a_full[0] = 3.0 * a_full[1] - 3.0 * a_full[2] + a_full[3];
            a_full[n] = 3.0 * a_full[n - 1] - 3.0 * a_full[n - 2] + a_full[n - 3];
        }
        a_full
    }

    /// Endpoint velocities that satisfy the massless contact-line equations for
    /// the given positions and interior velocities (dynamic law only).
    pub fn relax_endpoint_velocities(&self, theta: &[f64], u: &mut [f64]) {
        if self.variant.is_static() {
            self.reduction.conform(u);
            return;
        }
        let n = self.grid.n();
        let ju = self.dissipation_jacobian_u(theta);
        for &i in &[0, n] {
            let f = self.force(theta, u)[i];
            let d = ju.get(i, i);
            u[i] += f / d;
        }
    }

    /// Contact-line force balance residuals `α² - (∂_x h)² - ν·speed` at both
    /// ends in the scheme's own discrete form: `-∂V/∂θ_0 - ∂R_visc/∂u_0` over `γ/2`.
    pub fn boundary_forces(&self, theta: &[f64], u: &[f64]) -> (f64, f64) {
        let n = self.grid.n();
        let f = self.force(theta, u);
        let s = 2.0 / self.params.gamma;
        (s * f[0], s * f[n])
    }

    /// Checks the flow-map floor and, in general-data mode, the window `[1/2, 3/2]`.
    pub fn check_flow_map(&self, t: f64, theta: &[f64], floor: f64) -> Result<()> {
        let (lo, hi) = self.eta_range(theta);
        if !(lo > floor) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::FlowMapDegeneracy {
                t,
                min_eta_xi: lo,
                floor,
            });
        }
        if !self.reference.is_equilibrium() && (lo < 0.5 || hi > 1.5) {
            return Err(Error::FlowMapWindow {
                t,
                min_eta_xi: lo,
                max_eta_xi: hi,
                lower: 0.5,
                upper: 1.5,
            });
        }
        Ok(())
    }
}

/// Second difference and centered `η_ξ` at interior node `i`.
fn curvature(theta: &[f64], i: usize, dx: f64) -> (f64, f64) {
    let r = (theta[i + 1] - 2.0 * theta[i] + theta[i - 1]) / (dx * dx);
    let e = 1.0 + (theta[i + 1] - theta[i - 1]) / (2.0 * dx);
    (r, e)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
