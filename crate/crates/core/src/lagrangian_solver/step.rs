//! One implicit time step solved by Newton's method with a banded Jacobian.

use crate::error::{Error, Result};

use super::config::{Scheme, SolverConfig};
use super::model::{DissipationParts, LagModel};
use super::state::LagState;

/// Record of an accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Integrator actually used (differs from the configured one after a fallback).
    pub scheme: Scheme,
    /// Newton iterations performed.
    pub iterations: usize,
    /// Weighted residual norm before each iteration and after the last one.
    pub residuals: Vec<f64>,
    /// Dissipation rate at the evaluation point of the scheme.
    pub dissipation: DissipationParts,
    /// Discrete Hamiltonian before and after the step.
    pub hamiltonian: (f64, f64),
    /// Discrete momentum before and after the step.
    pub momentum: (f64, f64),
    /// Rate of momentum loss to slip and contact-line friction at the evaluation point.
    pub momentum_sink: f64,
    /// Velocity at the evaluation point (`(θ^{n+1} - θ^n)/Δt`).
    pub u_eval: Vec<f64>,
}

impl StepInfo {
    /// `(ℋ^{n+1} - ℋ^n)/Δt + 𝒟`.
    pub fn energy_balance_residual(&self, dt: f64) -> f64 {
        (self.hamiltonian.1 - self.hamiltonian.0) / dt + self.dissipation.total()
    }

    /// `(P^{n+1} - P^n)/Δt + (slip and contact-line momentum sinks)`.
    pub fn momentum_balance_residual(&self, dt: f64) -> f64 {
        (self.momentum.1 - self.momentum.0) / dt + self.momentum_sink
    }
}

struct Newton<'a> {
    model: &'a LagModel,
    theta0: &'a [f64],
    u0: &'a [f64],
    dt: f64,
    c: f64,
    scale: Vec<f64>,
}

impl<'a> Newton<'a> {
    fn new(model: &'a LagModel, state: &'a LagState, dt: f64, scheme: Scheme) -> Self {
        let c = match scheme {
            Scheme::ImplicitMidpoint => 0.5,
            Scheme::Bdf1 => 1.0,
        };
        let h = model.reference().h();
        let dx = model.grid().dx();
        let h_min = h[1..h.len() - 1].iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let scale = model
            .reduction()
            .active()
            .iter()
            .map(|&i| dx * h[i].max(h_min))
            .collect();
        Self {
            model,
            theta0: &state.theta,
            u0: &state.theta_t,
            dt,
            c,
            scale,
        }
    }

    fn eval_point(&self, delta_full: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let theta: Vec<f64> = self.theta0.iter().zip(delta_full).map(|(t, d)| t + self.c * d).collect();
        let u: Vec<f64> = delta_full.iter().map(|d| d / self.dt).collect();
        (theta, u)
    }

    fn residual(&self, delta: &[f64]) -> (Vec<f64>, f64) {
        let red = self.model.reduction();
        let d_full = red.expand(delta);
        let (theta, u) = self.eval_point(&d_full);
        let f = self.model.force(&theta, &u);
        let m = self.model.mass();
        let g_full: Vec<f64> = (0..f.len())
            .map(|i| m[i] * (d_full[i] / self.dt - self.u0[i]) / (self.c * self.dt) - f[i])
            .collect();
        let g = red.fold(&g_full);
        let norm = g.iter().zip(&self.scale).map(|(v, s)| v * v / s).sum::<f64>().sqrt();
        (g, norm)
    }

    fn jacobian(&self, delta: &[f64]) -> crate::banded::Banded {
        let red = self.model.reduction();
        let d_full = red.expand(delta);
        let (theta, u) = self.eval_point(&d_full);
        let mut j = self.model.hessian(&theta);
        j.scale(self.c);
        j.add_scaled(&self.model.dissipation_jacobian_u(&theta), 1.0 / self.dt);
        j.add_scaled(&self.model.dissipation_jacobian_theta(&theta, &u), self.c);
        let m = self.model.mass();
        for (i, mi) in m.iter().enumerate() {
            j.add(i, i, mi / (self.c * self.dt * self.dt));
        }
        red.fold_matrix(&j)
    }
}

/// Advances `state` by one step of `config.dt` with the configured scheme,
/// retrying with backward Euler when the midpoint Newton solve fails and the
/// fallback is enabled.
pub fn step(state: &LagState, config: &SolverConfig, model: &LagModel) -> Result<(LagState, StepInfo)> {
    model.check_flow_map(state.t, &state.theta, config.eta_xi_floor)?;
    match step_with(state, config, model, config.scheme) {
        Err(Error::NewtonDivergence { .. }) | Err(Error::Singular(_))
            if config.bdf1_fallback && config.scheme == Scheme::ImplicitMidpoint =>
        {
            step_with(state, config, model, Scheme::Bdf1)
        }
        other => other,
    }
}

/// Advances `state` by one step with an explicitly chosen scheme.
///
/// At least one Newton iteration is taken. Iteration stops once the weighted
/// residual is at most `newton_tol` or the Newton correction falls below
/// `1e-13` of the solution scale, where the residual is at rounding level.
pub fn step_with(
    state: &LagState,
    config: &SolverConfig,
    model: &LagModel,
    scheme: Scheme,
) -> Result<(LagState, StepInfo)> {
    let dt = config.dt;
    let red = model.reduction();
    let newton = Newton::new(model, state, dt, scheme);
    let mut delta: Vec<f64> = red.restrict(&state.theta_t).iter().map(|u| u * dt).collect();
    let (mut g, mut r) = newton.residual(&delta);
    let mut residuals = vec![r];
    let mut iterations = 0;
    let mut converged = false;
    while !converged && iterations < config.newton_max_iter.max(1) {
        iterations += 1;
        let j = newton.jacobian(&delta);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let dir = j.solve(&rhs)?;
        let step_size = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let size = delta
            .iter()
            .chain(state.theta.iter())
            .fold(1.0_f64, |m, v| m.max(v.abs()));
        let negligible = step_size <= 1e-13 * size;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = delta.iter().zip(&dir).map(|(d, s)| d + lambda * s).collect();
            let (g_t, r_t) = newton.residual(&trial);
            if r_t.is_finite() && r_t <= (1.0 - 1e-4 * lambda) * r {
                delta = trial;
                g = g_t;
                r = r_t;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            if negligible {
                converged = true;
                break;
            }
            return Err(Error::NewtonDivergence {
                t: state.t,
                residual: r,
                iterations,
            });
        }
        residuals.push(r);
        converged = r <= config.newton_tol || negligible;
    }
    if !converged {
        return Err(Error::NewtonDivergence {
            t: state.t,
            residual: r,
            iterations,
        });
    }

    let c = match scheme {
        Scheme::ImplicitMidpoint => 0.5,
        Scheme::Bdf1 => 1.0,
    };
    let d_full = red.expand(&delta);
    let mut theta_new: Vec<f64> = state.theta.iter().zip(&d_full).map(|(t, d)| t + d).collect();
    // Re-impose the endpoint closure so that rounding in the update does not
    // accumulate in the slaved values.
    red.conform(&mut theta_new);
    let mut u_new: Vec<f64> = d_full
        .iter()
        .zip(&state.theta_t)
        .map(|(d, u)| (d / dt - (1.0 - c) * u) / c)
        .collect();
    model.relax_endpoint_velocities(&theta_new, &mut u_new);
    let t_new = state.t + dt;
    model.check_flow_map(t_new, &theta_new, config.eta_xi_floor)?;

    let theta_eval: Vec<f64> = state.theta.iter().zip(&d_full).map(|(t, d)| t + c * d).collect();
    let u_eval: Vec<f64> = d_full.iter().map(|d| d / dt).collect();
    let dissipation = model.dissipation(&theta_eval, &u_eval);
    let nu_term = 0.5 * model.params().gamma * model.variant().nu();
    let n = model.grid().n();
    let momentum_sink = model.slip_force_total(&theta_eval, &u_eval) + nu_term * (u_eval[0] + u_eval[n]);
    let info = StepInfo {
        scheme,
        iterations,
        residuals,
        dissipation,
        hamiltonian: (
            model.hamiltonian(&state.theta, &state.theta_t),
            model.hamiltonian(&theta_new, &u_new),
        ),
        momentum: (model.momentum(&state.theta_t), model.momentum(&u_new)),
        momentum_sink,
        u_eval,
    };
    let next = LagState {
        t: t_new,
        theta: theta_new,
        theta_t: u_new,
        mode: state.mode,
        variant: state.variant,
    };
    Ok((next, info))
}
