//! Reference height profiles sampled on the grid.
//!
//! The Lagrangian solver only needs nodal samples of the reference height and
//! its first derivatives, so the equilibrium droplet and general initial
//! heights share one representation.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::equilibrium::{EquilibriumProfile, PhysicalParams};
use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, Grid};

/// Origin of a reference profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceKind {
    /// Closed-form equilibrium droplet: near-equilibrium mode.
    Equilibrium(EquilibriumProfile),
    /// Arbitrary initial height: general-data mode.
    General { label: String },
}

/// Reference height `h_ref` with derivative samples up to order four.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    kind: ReferenceKind,
    params: PhysicalParams,
    derivs: [Vec<f64>; 5],
}

impl ReferenceProfile {
    /// Samples the closed-form equilibrium on the grid.
    pub fn equilibrium(grid: &Grid, profile: &EquilibriumProfile) -> Result<Self> {
        if (profile.params.r - 1.0).abs() > 1e-14 {
            return Err(Error::config(
                "R",
                "the Lagrangian solver works on the reference interval and needs R = 1",
            ));
        }
        let derivs = sample_all(grid, |xi, k| profile.eval(xi, k))?;
        Ok(Self {
            kind: ReferenceKind::Equilibrium(*profile),
            params: profile.params,
            derivs,
        })
    }

    /// Normalized equilibrium droplet on the grid.
    pub fn normalized(grid: &Grid) -> Self {
        Self::equilibrium(grid, &EquilibriumProfile::normalized())
            .expect("normalized equilibrium is always valid")
    }

    /// General reference height from an analytic function `f(ξ, order)`.
    pub fn from_fn(
        grid: &Grid,
        params: PhysicalParams,
        label: impl Into<String>,
        f: impl Fn(f64, usize) -> f64,
    ) -> Result<Self> {
        let derivs = sample_all(grid, |xi, k| Ok(f(xi, k)))?;
        let out = Self {
            kind: ReferenceKind::General { label: label.into() },
            params,
            derivs,
        };
        out.validate_general(grid)?;
        Ok(out)
    }

    /// General reference height from nodal samples; derivatives are obtained
    /// with second-order one-sided finite differences.
    pub fn from_samples(grid: &Grid, params: PhysicalParams, label: impl Into<String>, h: Vec<f64>) -> Result<Self> {
        grid.check_len(&h)?;
        let mut derivs: [Vec<f64>; 5] = Default::default();
        for k in 1..=4 {
            derivs[k] = grid.apply_diff(k, &h, BoundaryMode::OneSided)?;
        }
        derivs[0] = h;
        let out = Self {
            kind: ReferenceKind::General { label: label.into() },
            params,
            derivs,
        };
        out.validate_general(grid)?;
        Ok(out)
    }

    /// Checks positivity, vanishing endpoints, concavity and comparability to `1 - ξ²`.
    pub fn validate_general(&self, grid: &Grid) -> Result<()> {
        let h = &self.derivs[0];
        let n = grid.n();
        let scale = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if h[0].abs() > 1e-12 * scale || h[n].abs() > 1e-12 * scale {
            return Err(Error::InvalidHeight("reference height must vanish at both endpoints".into()));
        }
        if h[1..n].iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidHeight("reference height must be positive in the interior".into()));
        }
        let h2 = &self.derivs[2];
        let tol = 1e-8 * h2.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if h2.iter().any(|&v| v > tol) {
            return Err(Error::InvalidHeight("reference height must be concave (h'' <= 0)".into()));
        }
        let (c1, c2) = self.comparability(grid);
        if !(c1 > 0.0 && c2.is_finite()) {
            return Err(Error::InvalidHeight(format!(
                "reference height is not comparable to 1 - xi^2 (c1 = {c1}, c2 = {c2})"
            )));
        }
        Ok(())
    }

    /// Fitted constants `C1, C2` with `C1 (1-ξ²) <= h_ref <= C2 (1-ξ²)` at interior nodes.
    pub fn comparability(&self, grid: &Grid) -> (f64, f64) {
        let h = &self.derivs[0];
        let nodes = grid.nodes();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 1..grid.n() {
            let ratio = h[i] / (1.0 - nodes[i] * nodes[i]);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        (lo, hi)
    }

    /// Origin of the profile.
    pub fn kind(&self) -> &ReferenceKind {
        &self.kind
    }

    /// True for the closed-form equilibrium (near-equilibrium mode).
    pub fn is_equilibrium(&self) -> bool {
        matches!(self.kind, ReferenceKind::Equilibrium(_))
    }

    /// Physical constants.
    pub fn params(&self) -> PhysicalParams {
        self.params
    }

    /// Nodal samples of `∂_ξ^order h_ref`.
    pub fn d(&self, order: usize) -> &[f64] {
        &self.derivs[order]
    }

    /// Nodal samples of `h_ref`.
    pub fn h(&self) -> &[f64] {
        &self.derivs[0]
    }

    /// Trapezoid mass `∫ h_ref dξ`.
    pub fn mass(&self, grid: &Grid) -> f64 {
        grid.integrate(self.h()).expect("reference samples match the grid")
    }

    /// JSON descriptor used in checkpoints and manifests.
    pub fn descriptor(&self) -> serde_json::Value {
        match &self.kind {
            ReferenceKind::Equilibrium(p) => json!({"kind": "equilibrium", "params": p.params}),
            ReferenceKind::General { label } => json!({"kind": "general", "label": label, "params": self.params}),
        }
    }
}

fn sample_all(grid: &Grid, f: impl Fn(f64, usize) -> Result<f64>) -> Result<[Vec<f64>; 5]> {
    let mut out: [Vec<f64>; 5] = Default::default();
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = grid.nodes().iter().map(|&xi| f(xi, k)).collect::<Result<Vec<_>>>()?;
    }
    Ok(out)
}

/// Concave quartic droplet `α(1-ξ²)/2 + β(1-ξ²)²` with contact slopes `±α`
/// and prescribed mass `∫ h dξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticBump {
    pub alpha: f64,
    pub beta: f64,
}

impl QuarticBump {
    /// Bump with the given contact slope and mass; errors if the result is not concave.
    pub fn with_mass(alpha: f64, mass: f64) -> Result<Self> {
        let beta = (mass - 2.0 * alpha / 3.0) * 15.0 / 16.0;
        if beta < -alpha / 4.0 || beta > alpha / 8.0 {
            return Err(Error::InvalidHeight(format!(
                "no concave quartic bump with slope {alpha} and mass {mass}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `∂_ξ^order` of the bump at `xi`.
    pub fn eval(&self, xi: f64, order: usize) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        let x2 = xi * xi;
        match order {
            0 => 0.5 * a * (1.0 - x2) + b * (1.0 - x2) * (1.0 - x2),
            1 => -a * xi + b * (4.0 * xi * x2 - 4.0 * xi),
            2 => -a + b * (12.0 * x2 - 4.0),
            3 => 24.0 * b * xi,
            4 => 24.0 * b,
            _ => 0.0,
        }
    }
}
