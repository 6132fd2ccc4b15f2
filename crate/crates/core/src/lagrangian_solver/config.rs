//! Time-stepping configuration and model variants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Implicit time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Second-order implicit midpoint rule.
    ImplicitMidpoint,
    /// First-order backward Euler.
    Bdf1,
}

/// Numerical controls of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Time step.
    pub dt: f64,
    /// Final time.
    pub t_end: f64,
    /// Time integrator.
    pub scheme: Scheme,
    /// Newton tolerance on the `h^{1/2}`-weighted norm of the acceleration residual.
    pub newton_tol: f64,
    /// Maximum number of Newton iterations per step.
    pub newton_max_iter: usize,
    /// Steps are rejected once `min(1 + θ_ξ)` drops to this value.
    pub eta_xi_floor: f64,
    /// Number of steps between stored states and energy reports.
    pub output_stride: usize,
    /// Retry a failed implicit-midpoint step with backward Euler.
    pub bdf1_fallback: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::ImplicitMidpoint,
            newton_tol: 1e-10,
            newton_max_iter: 20,
            eta_xi_floor: 0.25,
            output_stride: 100,
            bdf1_fallback: true,
        }
    }
}

impl SolverConfig {
    /// Checks ranges of every field.
    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        positive("newton_tol", self.newton_tol)?;
        if self.newton_max_iter == 0 {
            return Err(Error::config("newton_max_iter", "must be at least 1"));
        }
        if !(self.eta_xi_floor > 0.0 && self.eta_xi_floor < 1.0) {
            return Err(Error::config("eta_xi_floor", format!("must lie in (0, 1), got {}", self.eta_xi_floor)));
        }
        if self.output_stride == 0 {
            return Err(Error::config("output_stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Contact-line law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactLaw {
    /// Fixed contact angle: `θ_ξ(±1) = 0`.
    Static,
    /// Speed law `ν ȧ = α² - (∂_x h(a))²`, `ν ḃ = -(α² - (∂_x h(b))²)`.
    Dynamic { nu: f64 },
}

/// Dissipative mechanisms of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Variant {
    /// Viscosity `μ`.
    pub mu: f64,
    /// Contact-line law.
    pub contact: ContactLaw,
    /// Navier-slip friction coefficient `𝔟⁻¹` (zero disables slip).
    pub slip_inv: f64,
}

impl Default for Variant {
    fn default() -> Self {
        Self {
            mu: 0.5,
            contact: ContactLaw::Static,
            slip_inv: 0.0,
        }
    }
}

impl Variant {
    /// Static contact angle, no slip, viscosity `1/2`.
    pub fn static_angle() -> Self {
        Self::default()
    }

    /// Dynamic contact angle with friction `nu` and slip coefficient `slip_inv`.
    pub fn dynamic(nu: f64, slip_inv: f64) -> Self {
        Self {
            contact: ContactLaw::Dynamic { nu },
            slip_inv,
            ..Self::default()
        }
    }

    /// Checks ranges.
    pub fn validate(&self) -> Result<()> {
        positive("mu", self.mu)?;
        if let ContactLaw::Dynamic { nu } = self.contact {
            positive("nu", nu)?;
        }
        if !(self.slip_inv.is_finite() && self.slip_inv >= 0.0) {
            return Err(Error::config("slip_inv", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Contact-line friction `ν`, zero for the static law.
    pub fn nu(&self) -> f64 {
        match self.contact {
            ContactLaw::Static => 0.0,
            ContactLaw::Dynamic { nu } => nu,
        }
    }

    /// True for the static contact angle.
    pub fn is_static(&self) -> bool {
        matches!(self.contact, ContactLaw::Static)
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and positive, got {v}")))
    }
}
