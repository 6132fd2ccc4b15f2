//! Energy functionals, conservation monitors and inequality estimators.
//!
//! Reports are evaluated from the time-derivative ladder of a state: `θ`,
//! `θ_t`, `θ_tt` obtained from the semi-discrete equations, and `θ_ttt`
//! obtained by differencing `θ_tt` across stored steps. Spatial derivatives use
//! the grid operators with the `θ_ξ(±1) = 0` closure under the static contact
//! angle and one-sided stencils under the dynamic law.

pub mod inequalities;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eulerian::reconstruct;
use crate::grid::{BoundaryMode, DiffOp, Grid};
use crate::lagrangian_solver::{LagModel, LagState};
use crate::linear_stability::{assemble, choose_c1, energy_pair, LinearOperators};

pub use inequalities::{hardy_check, poincare_check, InequalityEstimate, TestFamily};

/// Time derivatives `∂_t^k θ` of one state, `k = 0..3`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDerivatives {
    pub t: f64,
    pub theta: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub theta_tt: Vec<f64>,
    /// Absent when the stored history is too short for a difference quotient.
    pub theta_ttt: Option<Vec<f64>>,
}

impl TimeDerivatives {
    /// Ladder of `state` with `θ_tt` from the semi-discrete equations and the given `θ_ttt`.
    pub fn of(model: &LagModel, state: &LagState, theta_ttt: Option<Vec<f64>>) -> Self {
        Self {
            t: state.t,
            theta: state.theta.clone(),
            theta_t: state.theta_t.clone(),
            theta_tt: model.acceleration(&state.theta, &state.theta_t),
            theta_ttt,
        }
    }

    fn level(&self, k: usize) -> Option<&[f64]> {
        match k {
            0 => Some(&self.theta),
            1 => Some(&self.theta_t),
            2 => Some(&self.theta_tt),
            _ => self.theta_ttt.as_deref(),
        }
    }
}

/// Values reported at one time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    /// Discrete Hamiltonian: kinetic plus gravitational plus surface energy.
    pub hamiltonian: f64,
    /// `∫ h dx` on the image grid.
    pub mass: f64,
    /// `∫ h u dx` on the image grid.
    pub momentum: f64,
    /// `∫ 4μ h |∂_x u|² dx`.
    pub viscous_dissipation: f64,
    /// `ν(ȧ² + ḃ²)` (scaled by `γ/2`), zero under the static law.
    pub contact_dissipation: f64,
    /// `∫ 𝔟⁻¹ u² dx`, zero without slip.
    pub slip_dissipation: f64,
    /// `∫ h_ref θ dξ`.
    pub mean_theta: f64,
    /// Linear energy `ℰ₀` (near-equilibrium static runs).
    pub e0: Option<f64>,
    /// Linear dissipation `𝒟₀` (near-equilibrium static runs).
    pub d0: Option<f64>,
    pub e_nl1: Option<f64>,
    pub e_nl2: Option<f64>,
    /// `E_NL,2 / E_NL,1` when both are available and `E_NL,1 > 0`.
    pub elliptic_ratio: Option<f64>,
    /// `Σ_{k≤2} ℰ_k` (near-equilibrium static runs with `θ_ttt` available).
    pub energy_sum: Option<f64>,
    /// Nonlinear correction `ℰ_δ` (near-equilibrium runs).
    pub energy_delta: Option<f64>,
    /// Local energy `Φ` (general-data runs with `θ_ttt` available).
    pub phi: Option<f64>,
    pub min_eta_xi: f64,
    pub max_eta_xi: f64,
    /// Contact-line positions.
    pub a: f64,
    pub b: f64,
}

impl EnergyReport {
    /// Column names of [`EnergyReport::row`].
    pub const COLUMNS: [&'static str; 21] = [
        "t",
        "hamiltonian",
        "mass",
        "momentum",
        "viscous_dissipation",
        "contact_dissipation",
        "slip_dissipation",
        "mean_theta",
        "e0",
        "d0",
        "e_nl1",
        "e_nl2",
        "elliptic_ratio",
        "energy_sum",
        "energy_delta",
        "phi",
        "min_eta_xi",
        "max_eta_xi",
        "a",
        "b",
        "dissipation",
    ];

    /// Total dissipation rate.
    pub fn dissipation(&self) -> f64 {
        self.viscous_dissipation + self.contact_dissipation + self.slip_dissipation
    }

    /// Values in the order of [`EnergyReport::COLUMNS`]; absent values are `None`.
    pub fn row(&self) -> Vec<Option<f64>> {
        vec![
            Some(self.t),
            Some(self.hamiltonian),
            Some(self.mass),
            Some(self.momentum),
            Some(self.viscous_dissipation),
            Some(self.contact_dissipation),
            Some(self.slip_dissipation),
            Some(self.mean_theta),
            self.e0,
            self.d0,
            self.e_nl1,
            self.e_nl2,
            self.elliptic_ratio,
            self.energy_sum,
            self.energy_delta,
            self.phi,
            Some(self.min_eta_xi),
            Some(self.max_eta_xi),
            Some(self.a),
            Some(self.b),
            Some(self.dissipation()),
        ]
    }
}

/// Per-run data shared by all reports: the model, the linear operators and the
/// coupling constant of the linear energy pair.
#[derive(Debug, Clone)]
pub struct ReportContext {
    model: LagModel,
    linear: Option<(LinearOperators, f64)>,
    ops: Vec<DiffOp>,
}

impl ReportContext {
    /// Context for `model`; near-equilibrium static runs also get the linear
    /// operators and the coupling constant chosen by [`choose_c1`].
    pub fn new(model: &LagModel) -> Result<Self> {
        let linear = if model.reference().is_equilibrium() && model.variant().is_static() {
            let ops = assemble(model.grid(), model.reference(), model.variant().mu)?;
            let c1 = choose_c1(&ops)?.c1;
            Some((ops, c1))
        } else {
            None
        };
        Self::build(model, linear)
    }

    /// Context with a prescribed coupling constant (skips the sweep).
    pub fn with_c1(model: &LagModel, c1: f64) -> Result<Self> {
        let linear = if model.reference().is_equilibrium() && model.variant().is_static() {
            Some((assemble(model.grid(), model.reference(), model.variant().mu)?, c1))
        } else {
            None
        };
        Self::build(model, linear)
    }

    fn build(model: &LagModel, linear: Option<(LinearOperators, f64)>) -> Result<Self> {
        let bc = if model.variant().is_static() {
            BoundaryMode::NeumannThetaXiZero
        } else {
            BoundaryMode::OneSided
        };
        let ops = (1..=4)
            .map(|k| DiffOp::new(model.grid(), k, bc))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model: model.clone(),
            linear,
            ops,
        })
    }

    /// Model the reports refer to.
    pub fn model(&self) -> &LagModel {
        &self.model
    }

    /// Coupling constant of the linear energy pair, if any.
    pub fn c1(&self) -> Option<f64> {
        self.linear.as_ref().map(|l| l.1)
    }

    /// `∂_ξ^order` of nodal samples.
    pub fn d(&self, order: usize, samples: &[f64]) -> Result<Vec<f64>> {
        self.ops[order - 1].apply(samples)
    }

    fn grid(&self) -> &Grid {
        self.model.grid()
    }

    /// `‖h_ref^p f‖²`.
    fn norm2(&self, f: &[f64], p: f64) -> Result<f64> {
        Ok(self.grid().weighted_norm_with(self.model.reference().h(), f, p)?.powi(2))
    }

    /// `E_NL,1 = Σ_{k≤2} ‖h^{1/2}∂_t^{k+1}θ‖² + ‖h ∂_t^kθ_ξξ‖² + ‖∂_t^kθ_ξ‖²`.
    pub fn e_nl1(&self, ladder: &TimeDerivatives) -> Result<Option<f64>> {
        let mut sum = 0.0;
        for k in 0..=2 {
            let Some(next) = ladder.level(k + 1) else {
                return Ok(None);
            };
            let cur = ladder.level(k).expect("levels 0..=2 always exist");
            sum += self.norm2(next, 0.5)?;
            sum += self.norm2(&self.d(2, cur)?, 1.0)?;
            sum += self.norm2(&self.d(1, cur)?, 0.0)?;
        }
        Ok(Some(sum))
    }

    /// `E_NL,2 = ‖h^{3/2}θ_ξξξξ‖² + ‖h^{1/2}θ_ξξξ‖²
    ///   + Σ_{k≤1} ‖h ∂_t^kθ_ξξξ‖² + ‖∂_t^kθ_ξξ‖² + ‖∂_t^kθ_ξ/h^{1/2}‖²`.
    /// Absent when `∂_t^kθ_ξ` does not vanish at the endpoints.
    pub fn e_nl2(&self, ladder: &TimeDerivatives) -> Result<Option<f64>> {
        let th = &ladder.theta;
        let mut sum = self.norm2(&self.d(4, th)?, 1.5)? + self.norm2(&self.d(3, th)?, 0.5)?;
        for k in 0..=1 {
            let cur = ladder.level(k).expect("levels 0..=1 always exist");
            sum += self.norm2(&self.d(3, cur)?, 1.0)?;
            sum += self.norm2(&self.d(2, cur)?, 0.0)?;
            match self.norm2(&self.d(1, cur)?, -0.5) {
                Ok(v) => sum += v,
                Err(Error::Degeneracy { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(Some(sum))
    }

    /// `ℰ_δ = -¼∫h² g₄'(θ_ξ)|θ_ξξtt|² - ∫M₃ θ_ξξtt` with
    /// `g₄(s) = (1+s)⁻⁴ - 1 + 4s` and
    /// `M₃ = (h²/2)(g₄''θ_ξt θ_ξξt + g₄''θ_ξtt θ_ξξ + g₄'''θ_ξt² θ_ξξ)`.
    pub fn energy_delta(&self, ladder: &TimeDerivatives) -> Result<f64> {
        let t1 = self.d(1, &ladder.theta)?;
        let t2 = self.d(2, &ladder.theta)?;
        let u1 = self.d(1, &ladder.theta_t)?;
        let u2 = self.d(2, &ladder.theta_t)?;
        let a1 = self.d(1, &ladder.theta_tt)?;
        let a2 = self.d(2, &ladder.theta_tt)?;
        let h = self.model.reference().h();
        let integrand: Vec<f64> = (0..h.len())
            .map(|i| {
                let s = 1.0 + t1[i];
                let g4p = 4.0 - 4.0 / s.powi(5);
                let g4pp = 20.0 / s.powi(6);
                let g4ppp = -120.0 / s.powi(7);
                let h2 = h[i] * h[i];
                let m3 = 0.5 * h2 * (g4pp * u1[i] * u2[i] + g4pp * a1[i] * t2[i] + g4ppp * u1[i] * u1[i] * t2[i]);
                -0.25 * h2 * g4p * a2[i] * a2[i] - m3 * a2[i]
            })
            .collect();
        self.grid().integrate(&integrand)
    }

    /// `Φ` of the general-data mode with `η = ξ + θ`, `u = θ_t` and
    /// `B = h₀'² - 2h₀h₀''`:
    /// `Σ_{k≤2} ‖h₀^{1/2}∂_t^k u‖² + ‖h₀∂_t^kη_ξξ‖² + ‖h₀∂_t^kη_ξ‖² + ‖B^{1/2}∂_t^kη_ξ‖²
    ///   + Σ_{k≤1} ‖h₀∂_t^kη_ξξξ‖² + ‖h₀^{3/2}η_ξξξξ‖²`.
    pub fn phi(&self, ladder: &TimeDerivatives) -> Result<Option<f64>> {
        let reference = self.model.reference();
        let (h, h1, h2) = (reference.h(), reference.d(1), reference.d(2));
        let b: Vec<f64> = (0..h.len()).map(|i| (h1[i] * h1[i] - 2.0 * h[i] * h2[i]).max(0.0)).collect();
        let mut sum = 0.0;
        for k in 0..=2 {
            let Some(u_k) = ladder.level(k + 1) else {
                return Ok(None);
            };
            let cur = ladder.level(k).expect("levels 0..=2 always exist");
            let mut eta_x = self.d(1, cur)?;
            if k == 0 {
                // Use the one-sided derivative at the endpoints so η_ξ keeps its true value there.
                let raw = self.grid().apply_diff(1, cur, BoundaryMode::OneSided)?;
                eta_x[0] = raw[0];
                let n = eta_x.len() - 1;
                eta_x[n] = raw[n];
                eta_x.iter_mut().for_each(|v| *v += 1.0);
            }
            sum += self.norm2(u_k, 0.5)?;
            sum += self.norm2(&self.d(2, cur)?, 1.0)?;
            sum += self.norm2(&eta_x, 1.0)?;
            let weighted: Vec<f64> = eta_x.iter().zip(&b).map(|(e, w)| w * e * e).collect();
            sum += self.grid().integrate(&weighted)?;
            if k <= 1 {
                sum += self.norm2(&self.d(3, cur)?, 1.0)?;
            }
        }
        sum += self.norm2(&self.d(4, &ladder.theta)?, 1.5)?;
        Ok(Some(sum))
    }

    /// `Σ_{k≤2} ℰ_k`, each `ℰ_k` being the linear energy of `(∂_t^kθ, ∂_t^{k+1}θ)`.
    pub fn energy_sum(&self, ladder: &TimeDerivatives) -> Result<Option<f64>> {
        let Some((ops, c1)) = &self.linear else {
            return Ok(None);
        };
        let mut sum = 0.0;
        for k in 0..=2 {
            let Some(next) = ladder.level(k + 1) else {
                return Ok(None);
            };
            let cur = ladder.level(k).expect("levels 0..=2 always exist");
            sum += energy_pair(ops, cur, next, *c1)?.e0;
        }
        Ok(Some(sum))
    }
}

/// Energy report of one ladder.
pub fn report(ctx: &ReportContext, ladder: &TimeDerivatives) -> Result<EnergyReport> {
    let model = &ctx.model;
    let grid = model.grid();
    let state = LagState {
        t: ladder.t,
        theta: ladder.theta.clone(),
        theta_t: ladder.theta_t.clone(),
        mode: crate::lagrangian_solver::Mode::General,
        variant: model.variant(),
    };
    let snap = reconstruct(grid, model.reference(), &state)?;
    let diss = model.dissipation(&ladder.theta, &ladder.theta_t);
    let (min_eta_xi, max_eta_xi) = model.eta_range(&ladder.theta);
    let (e0, d0) = match &ctx.linear {
        Some((ops, c1)) => {
            let pair = energy_pair(ops, &ladder.theta, &ladder.theta_t, *c1)?;
            (Some(pair.e0), Some(pair.d0))
        }
        None => (None, None),
    };
    let e_nl1 = ctx.e_nl1(ladder)?;
    let e_nl2 = ctx.e_nl2(ladder)?;
    let elliptic_ratio = match (e_nl1, e_nl2) {
        (Some(a), Some(b)) if a > 0.0 => Some(b / a),
        _ => None,
    };
    let near_eq = model.reference().is_equilibrium();
    let mean_weights: Vec<f64> = model.mass().to_vec();
    Ok(EnergyReport {
        t: ladder.t,
        hamiltonian: model.hamiltonian(&ladder.theta, &ladder.theta_t),
        mass: snap.mass(),
        momentum: snap.momentum(),
        viscous_dissipation: diss.viscous,
        contact_dissipation: diss.contact,
        slip_dissipation: diss.slip,
        mean_theta: mean_weights.iter().zip(&ladder.theta).map(|(m, t)| m * t).sum(),
        e0,
        d0,
        e_nl1,
        e_nl2,
        elliptic_ratio,
        energy_sum: ctx.energy_sum(ladder)?,
        energy_delta: if near_eq { Some(ctx.energy_delta(ladder)?) } else { None },
        phi: if near_eq { None } else { ctx.phi(ladder)? },
        min_eta_xi,
        max_eta_xi,
        a: snap.a,
        b: snap.b,
    })
}

/// Largest `E_NL,2 / E_NL,1` over reports with `E_NL,2 <= threshold`.
pub fn elliptic_ratio_check(reports: &[EnergyReport], threshold: f64) -> Result<f64> {
    reports
        .iter()
        .filter(|r| r.e_nl2.is_some_and(|v| v <= threshold))
        .filter_map(|r| r.elliptic_ratio)
        .filter(|r| r.is_finite())
        .reduce(f64::max)
        .ok_or_else(|| Error::Empty("no report with finite E_NL,2/E_NL,1 in the small-data regime".into()))
}
