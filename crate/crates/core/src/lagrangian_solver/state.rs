//! Lagrangian state: perturbation `θ` and velocity `θ_t` on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

use super::config::Variant;
use super::model::LagModel;

/// Which reference the perturbation is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Reference is the closed-form equilibrium droplet.
    NearEquilibrium,
    /// Reference is an arbitrary initial height.
    General,
}

/// Perturbation `θ = η - ξ` and velocity `u = θ_t` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagState {
    pub t: f64,
    pub theta: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub mode: Mode,
    pub variant: Variant,
}

impl LagState {
    /// State from explicit nodal arrays. Under the static contact angle the
    /// one-sided closure `θ_ξ(±1) = 0` must already hold to `1e-8`.
    pub fn new(model: &LagModel, t: f64, theta: Vec<f64>, theta_t: Vec<f64>) -> Result<Self> {
        let grid = model.grid();
        grid.check_len(&theta)?;
        grid.check_len(&theta_t)?;
        if model.variant().is_static() {
            let (left, right) = endpoint_slopes(grid, &theta);
            if left.abs() > 1e-8 || right.abs() > 1e-8 {
                return Err(Error::InvalidHeight(format!(
                    "static contact angle needs theta_xi(+-1) = 0, found {left:e} and {right:e}"
                )));
            }
        }
        Ok(Self {
            t,
            theta,
            theta_t,
            mode: mode_of(model),
            variant: model.variant(),
        })
    }

    /// State sampled from functions of `ξ`; slaved endpoint values are replaced
    /// by their closure values and massless endpoint velocities are relaxed.
    pub fn from_fn(model: &LagModel, theta: impl Fn(f64) -> f64, theta_t: impl Fn(f64) -> f64) -> Self {
        let nodes = model.grid().nodes();
        let mut th: Vec<f64> = nodes.iter().map(|&x| theta(x)).collect();
        let mut u: Vec<f64> = nodes.iter().map(|&x| theta_t(x)).collect();
        model.reduction().conform(&mut th);
        model.reduction().conform(&mut u);
        model.relax_endpoint_velocities(&th, &mut u);
        Self {
            t: 0.0,
            theta: th,
            theta_t: u,
            mode: mode_of(model),
            variant: model.variant(),
        }
    }

    /// State from nodal samples; slaved endpoint values are replaced by their
    /// closure values and massless endpoint velocities are relaxed.
    pub fn from_samples(model: &LagModel, mut theta: Vec<f64>, mut theta_t: Vec<f64>) -> Result<Self> {
        let grid = model.grid();
        grid.check_len(&theta)?;
        grid.check_len(&theta_t)?;
        model.reduction().conform(&mut theta);
        model.reduction().conform(&mut theta_t);
        model.relax_endpoint_velocities(&theta, &mut theta_t);
        Ok(Self {
            t: 0.0,
            theta,
            theta_t,
            mode: mode_of(model),
            variant: model.variant(),
        })
    }

    /// The reference configuration at rest.
    pub fn rest(model: &LagModel) -> Self {
        Self::from_fn(model, |_| 0.0, |_| 0.0)
    }

    /// Flow map `η = ξ + θ` at the nodes.
    pub fn eta(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().iter().zip(&self.theta).map(|(x, t)| x + t).collect()
    }
}

/// One-sided second-order `θ_ξ` at both endpoints.
pub fn endpoint_slopes(grid: &Grid, theta: &[f64]) -> (f64, f64) {
    let n = grid.n();
    let dx = grid.dx();
    let left = (-3.0 * theta[0] + 4.0 * theta[1] - theta[2]) / (2.0 * dx);
    let right = (3.0 * theta[n] - 4.0 * theta[n - 1] + theta[n - 2]) / (2.0 * dx);
    (left, right)
}

fn mode_of(model: &LagModel) -> Mode {
    if model.reference().is_equilibrium() {
        Mode::NearEquilibrium
    } else {
        Mode::General
    }
}
