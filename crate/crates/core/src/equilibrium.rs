//! Closed-form equilibrium droplet profile and the coefficient fields derived from it.
//!
//! The stationary droplet of the viscous shallow-water system with surface
//! tension solves `g h h_x = γ h h_xxx` on `(-R, R)` with `h(±R) = 0` and
//! contact slope `|h_x(±R)| = α`. Its closed form is
//!
//! ```text
//! h_s(x) = αλ (e^{2R/λ} + 1 - e^{(x+R)/λ} - e^{(R-x)/λ}) / (e^{2R/λ} - 1),   λ = sqrt(γ/g).
//! ```
//!
//! Every evaluator works in the reference coordinate `ξ = x / R ∈ [-1, 1]`, and
//! derivatives are taken with respect to `ξ`. With the normalized parameters
//! `(g, γ, α, R) = (2, 2, 1, 1)` the two coordinates coincide and the profile
//! reduces to `((e²+1) - e^{ξ+1} - e^{1-ξ}) / (e² - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Physical constants of the droplet problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Gravity constant.
    pub g: f64,
    /// Surface tension coefficient.
    pub gamma: f64,
    /// Tangent of the equilibrium contact angle.
    pub alpha: f64,
    /// Half-width of the wetted region.
    pub r: f64,
    /// Capillary length `sqrt(gamma / g)`.
    pub lambda: f64,
}

impl PhysicalParams {
    /// Builds a validated parameter set; `lambda` is derived from `g` and `gamma`.
    pub fn new(g: f64, gamma: f64, alpha: f64, r: f64) -> Result<Self> {
        for (name, v) in [("g", g), ("gamma", gamma), ("alpha", alpha), ("R", r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be finite and positive, got {v}")));
            }
        }
        Ok(Self {
            g,
            gamma,
            alpha,
            r,
            lambda: (gamma / g).sqrt(),
        })
    }

    /// The normalized constants `(g, γ, α, R) = (2, 2, 1, 1)`, so `λ = 1`.
    pub fn normalized() -> Self {
        Self {
            g: 2.0,
            gamma: 2.0,
            alpha: 1.0,
            r: 1.0,
            lambda: 1.0,
        }
    }

    /// Parameters with capillary length `lambda` (via `g = γ/λ²`, `γ = 2`)
    /// and half-width `r`, used for the parabola and pancake families.
    pub fn with_ratio(alpha: f64, r: f64, lambda: f64) -> Result<Self> {
        let gamma = 2.0;
        Self::new(gamma / (lambda * lambda), gamma, alpha, r)
    }

    /// Checks the stored invariants, including `lambda = sqrt(gamma/g)`.
    pub fn validate(&self) -> Result<()> {
        let fresh = Self::new(self.g, self.gamma, self.alpha, self.r)?;
        if (fresh.lambda - self.lambda).abs() > 4.0 * f64::EPSILON * fresh.lambda {
            return Err(Error::config(
                "lambda",
                format!("must equal sqrt(gamma/g) = {}, got {}", fresh.lambda, self.lambda),
            ));
        }
        Ok(())
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::normalized()
    }
}

/// A height profile on the reference interval with derivatives up to order four.
pub trait HeightProfile {
    /// Value of `∂_ξ^order h` at `xi`.
    fn derivative(&self, xi: f64, order: usize) -> Result<f64>;

    /// Physical constants associated with the profile.
    fn params(&self) -> PhysicalParams;
}

/// The closed-form equilibrium droplet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProfile {
    pub params: PhysicalParams,
}

impl Default for EquilibriumProfile {
    fn default() -> Self {
        Self::normalized()
    }
}

impl EquilibriumProfile {
    /// Profile for validated parameters.
    pub fn new(params: PhysicalParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Profile with the normalized constants.
    pub fn normalized() -> Self {
        Self {
            params: PhysicalParams::normalized(),
        }
    }

    /// Ratio `R/λ` that controls the shape of the droplet.
    fn shape_ratio(&self) -> f64 {
        self.params.r / self.params.lambda
    }

    /// Closed-form value without domain checks.
    fn eval_unchecked(&self, xi: f64, order: usize) -> f64 {
        let rho = self.shape_ratio();
        let scale = self.params.alpha * self.params.lambda;
        let damp = (-2.0 * rho).exp();
        let denom = 1.0 - damp;
        let right = (rho * (xi - 1.0)).exp();
        let left = (-rho * (1.0 + xi)).exp();
        if order == 0 {
            scale * (1.0 + damp - right - left) / denom
        } else {
            let rk = rho.powi(order as i32);
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            -scale * rk * (right + sign * left) / denom
        }
    }

    /// Value of `∂_ξ^order h_s` at `xi`.
    pub fn eval(&self, xi: f64, order: usize) -> Result<f64> {
        if !(-1.0..=1.0).contains(&xi) {
            return Err(Error::Domain(format!("xi = {xi} outside [-1, 1]")));
        }
        if order > 4 {
            return Err(Error::Domain(format!("derivative order {order} outside 0..=4")));
        }
        if order == 0 && (xi == -1.0 || xi == 1.0) {
            return Ok(0.0);
        }
        Ok(self.eval_unchecked(xi, order))
    }

    /// Height as a function of the physical coordinate `x ∈ [-R, R]`.
    pub fn eval_x(&self, x: f64) -> Result<f64> {
        self.eval(x / self.params.r, 0)
    }

    /// Coefficient `m_s = 2|h_s'|² - 4 h_s h_s'' + h_s²` in the normalized scaling.
    pub fn coefficient_ms(&self, xi: f64) -> Result<f64> {
        let h = self.eval(xi, 0)?;
        let h1 = self.eval(xi, 1)?;
        let h2 = self.eval(xi, 2)?;
        Ok(2.0 * h1 * h1 - 4.0 * h * h2 + h * h)
    }

    /// Exact value of `∫_{-1}^{1} h_s dξ`.
    pub fn mass_integral(&self) -> f64 {
        let rho = self.shape_ratio();
        let damp = (-2.0 * rho).exp();
        let scale = self.params.alpha * self.params.lambda;
        scale * (2.0 * (1.0 + damp) / (1.0 - damp) - 2.0 / rho)
    }

    /// Height of the central plateau for wide droplets, `αλ`.
    pub fn plateau_height(&self) -> f64 {
        self.params.alpha * self.params.lambda
    }

    /// Small-droplet parabola `(αR/2)(1 - (x/R)²)` at the physical coordinate `x`.
    pub fn parabola(&self, x: f64) -> f64 {
        let s = x / self.params.r;
        0.5 * self.params.alpha * self.params.r * (1.0 - s * s)
    }

    /// Constants `c1, c2` with `c1 (1-ξ²) <= h_s(ξ) <= c2 (1-ξ²)` fitted over interior nodes.
    pub fn comparability_constants(&self, grid: &Grid) -> (f64, f64) {
        comparability_constants(grid, |xi| self.eval_unchecked(xi, 0))
    }
}

impl HeightProfile for EquilibriumProfile {
    fn derivative(&self, xi: f64, order: usize) -> Result<f64> {
        self.eval(xi, order)
    }

    fn params(&self) -> PhysicalParams {
        self.params
    }
}

/// Min and max of `h(ξ)/(1-ξ²)` over interior grid nodes.
pub fn comparability_constants(grid: &Grid, h: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &xi in &grid.nodes()[1..grid.n()] {
        let ratio = h(xi) / (1.0 - xi * xi);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    (lo, hi)
}

/// Maximum over grid nodes of the residual of the steady equation
/// `|∂_x(g/2 h²) - γ h h_xxx|`, evaluated with the profile's analytic derivatives.
pub fn ode_residual<P: HeightProfile + ?Sized>(profile: &P, grid: &Grid) -> Result<f64> {
    let p = profile.params();
    let mut worst = 0.0_f64;
    for &xi in grid.nodes() {
        let h = profile.derivative(xi, 0)?;
        let hx = profile.derivative(xi, 1)? / p.r;
        let hxxx = profile.derivative(xi, 3)? / p.r.powi(3);
        let res = (p.g * h * hx - p.gamma * h * hxxx).abs();
        worst = worst.max(res);
    }
    Ok(worst)
}

/// Maximum over grid nodes of `|h''' - h'/λ²|` in the physical coordinate,
/// which reduces to `|h_s''' - h_s'|` for the normalized constants.
pub fn third_derivative_identity<P: HeightProfile + ?Sized>(profile: &P, grid: &Grid) -> Result<f64> {
    let p = profile.params();
    let mut worst = 0.0_f64;
    for &xi in grid.nodes() {
        let hx = profile.derivative(xi, 1)? / p.r;
        let hxxx = profile.derivative(xi, 3)? / p.r.powi(3);
        worst = worst.max((hxxx - hx / (p.lambda * p.lambda)).abs());
    }
    Ok(worst)
}
