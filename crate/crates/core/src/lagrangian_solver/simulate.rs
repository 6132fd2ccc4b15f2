//! Time integration over a horizon with stride-sampled states and reports.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{report, EnergyReport, ReportContext, TimeDerivatives};
use crate::error::{Error, Result};

use super::config::{Scheme, SolverConfig};
use super::model::LagModel;
use super::state::LagState;
use super::step::step;

/// Per-step monitor values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Time at the end of the step.
    pub t: f64,
    pub scheme: Scheme,
    pub iterations: usize,
    /// Discrete Hamiltonian at the end of the step.
    pub hamiltonian: f64,
    /// `ℋ^{n+1} - ℋ^n`.
    pub hamiltonian_change: f64,
    /// `(ℋ^{n+1} - ℋ^n)/Δt + 𝒟`.
    pub energy_residual: f64,
    /// `(P^{n+1} - P^n)/Δt + (momentum sinks)`.
    pub momentum_residual: f64,
    /// Discrete momentum at the end of the step.
    pub momentum: f64,
    pub min_eta_xi: f64,
    pub max_eta_xi: f64,
}

/// Result of a run: stride-sampled states and reports, per-step records and
/// the error that stopped the run early, if any.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<LagState>,
    pub reports: Vec<EnergyReport>,
    pub steps: Vec<StepRecord>,
    pub final_state: LagState,
    pub halted: Option<Error>,
}

impl Trajectory {
    /// Largest `|energy_residual|` over all steps.
    pub fn max_energy_residual(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.energy_residual.abs()))
    }

    /// Largest `|momentum_residual|` over all steps.
    pub fn max_momentum_residual(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.momentum_residual.abs()))
    }

    /// Largest increase of the Hamiltonian over one step (zero if it never increases).
    pub fn max_hamiltonian_increase(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.hamiltonian_change))
    }

    /// Time series of one report field.
    pub fn series(&self, field: impl Fn(&EnergyReport) -> Option<f64>) -> Vec<(f64, f64)> {
        self.reports
            .iter()
            .filter_map(|r| field(r).map(|v| (r.t, v)))
            .collect()
    }
}

/// Subtracts the `h_ref`-weighted means of `θ` and `θ_t`, enforcing
/// `∫ h_ref θ = ∫ h_ref θ_t = 0`.
pub fn remove_mean(model: &LagModel, state: &mut LagState) {
    let m = model.mass();
    let total: f64 = m.iter().sum();
    for field in [&mut state.theta, &mut state.theta_t] {
        let mean = m.iter().zip(field.iter()).map(|(a, b)| a * b).sum::<f64>() / total;
        field.iter_mut().for_each(|v| *v -= mean);
    }
}

struct Entry {
    index: usize,
    state: LagState,
    accel: Vec<f64>,
}

/// Buffers the last accelerations so that `θ_ttt` at a report step can be
/// formed by second-order differences: centered in the interior, one-sided at
/// the first and the last stored step.
struct Ladder<'a> {
    ctx: &'a ReportContext,
    dt: f64,
    window: VecDeque<Entry>,
    pending: VecDeque<usize>,
    reports: Vec<EnergyReport>,
}

impl<'a> Ladder<'a> {
    fn push(&mut self, index: usize, state: &LagState, is_report: bool) -> Result<()> {
        let accel = self.ctx.model().acceleration(&state.theta, &state.theta_t);
        self.window.push_back(Entry {
            index,
            state: state.clone(),
            accel,
        });
        if self.window.len() > 3 {
            self.window.pop_front();
        }
        if is_report {
            self.pending.push_back(index);
        }
        while let Some(&k) = self.pending.front() {
            let ready = if k == 0 { index >= 2 } else { index > k };
            if !ready {
                break;
            }
            self.pending.pop_front();
            let ttt = self.difference(k, false);
            self.emit(k, ttt)?;
        }
        Ok(())
    }

    fn entry(&self, k: usize) -> Option<&Entry> {
        self.window.iter().find(|e| e.index == k)
    }

    fn difference(&self, k: usize, last: bool) -> Option<Vec<f64>> {
        let s = 0.5 / self.dt;
        let combine = |c: [(f64, usize); 3]| -> Option<Vec<f64>> {
            let e = [self.entry(c[0].1)?, self.entry(c[1].1)?, self.entry(c[2].1)?];
            Some(
                (0..e[0].accel.len())
                    .map(|i| s * (c[0].0 * e[0].accel[i] + c[1].0 * e[1].accel[i] + c[2].0 * e[2].accel[i]))
                    .collect(),
            )
        };
        if k == 0 {
            combine([(-3.0, 0), (4.0, 1), (-1.0, 2)])
        } else if last {
            if k < 2 {
                return None;
            }
            combine([(3.0, k), (-4.0, k - 1), (1.0, k - 2)])
        } else {
            combine([(-1.0, k - 1), (0.0, k), (1.0, k + 1)])
        }
    }

    fn emit(&mut self, k: usize, ttt: Option<Vec<f64>>) -> Result<()> {
        let e = self.entry(k).expect("report entry is buffered until emitted");
        let ladder = TimeDerivatives {
            t: e.state.t,
            theta: e.state.theta.clone(),
            theta_t: e.state.theta_t.clone(),
            theta_tt: e.accel.clone(),
            theta_ttt: ttt,
        };
        self.reports.push(report(self.ctx, &ladder)?);
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<EnergyReport>> {
        while let Some(k) = self.pending.pop_front() {
            let ttt = self.difference(k, true);
            self.emit(k, ttt)?;
        }
        Ok(self.reports)
    }
}

/// Integrates from `init` to `config.t_end`. States and reports are kept every
/// `config.output_stride` steps and at the final step. A failing step stops
/// the run; the error is stored in [`Trajectory::halted`] and everything
/// accepted before it is kept.
pub fn simulate(init: &LagState, config: &SolverConfig, ctx: &ReportContext) -> Result<Trajectory> {
    config.validate()?;
    let model = ctx.model();
    model.grid().check_len(&init.theta)?;
    model.grid().check_len(&init.theta_t)?;
    let n_steps = config.n_steps();
    let stride = config.output_stride.max(1);
    let mut ladder = Ladder {
        ctx,
        dt: config.dt,
        window: VecDeque::with_capacity(4),
        pending: VecDeque::new(),
        reports: Vec::new(),
    };
    let mut states = vec![init.clone()];
    ladder.push(0, init, true)?;
    let mut steps = Vec::with_capacity(n_steps);
    let mut current = init.clone();
    let mut halted = None;
    for n in 1..=n_steps {
        match step(&current, config, model) {
            Ok((next, info)) => {
                let (lo, hi) = model.eta_range(&next.theta);
                steps.push(StepRecord {
                    t: next.t,
                    scheme: info.scheme,
                    iterations: info.iterations,
                    hamiltonian: info.hamiltonian.1,
                    hamiltonian_change: info.hamiltonian.1 - info.hamiltonian.0,
                    energy_residual: info.energy_balance_residual(config.dt),
                    momentum_residual: info.momentum_balance_residual(config.dt),
                    momentum: info.momentum.1,
                    min_eta_xi: lo,
                    max_eta_xi: hi,
                });
                let is_report = n % stride == 0 || n == n_steps;
                if is_report {
                    states.push(next.clone());
                }
                ladder.push(n, &next, is_report)?;
                current = next;
            }
            Err(e) => {
                if states.last().map(|s| s.t) != Some(current.t) {
                    states.push(current.clone());
                    ladder.pending.push_back(n - 1);
                }
                halted = Some(e);
                break;
            }
        }
    }
    let reports = ladder.finish()?;
    Ok(Trajectory {
        states,
        reports,
        steps,
        final_state: current,
        halted,
    })
}
