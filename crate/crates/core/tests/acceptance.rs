//! Acceptance suite: one PASS/FAIL line per criterion with the measured values.
//!
//! Runs without the libtest harness; the criteria execute in parallel threads
//! and the process exits with a failure status if any criterion fails.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use capillary_sw::cli::{convergence_study, run, Command, PerturbationFamily, RunConfig};
use capillary_sw::diagnostics::{elliptic_ratio_check, hardy_check, poincare_check, ReportContext, TestFamily};
use capillary_sw::equilibrium::{ode_residual, third_derivative_identity, EquilibriumProfile, PhysicalParams};
use capillary_sw::eulerian::reconstruct;
use capillary_sw::grid::Grid;
use capillary_sw::lagrangian_solver::{
    remove_mean, simulate, LagModel, LagState, QuarticBump, ReferenceProfile, SolverConfig, Trajectory, Variant,
};
use capillary_sw::linear_stability::{assemble, decay_fit, spectrum};
use serde_json::Value;

type Outcome = Result<(bool, String), String>;

/// Generic smooth perturbation with an odd and an even component.
fn shape(xi: f64) -> f64 {
    0.25 * (1.0 - xi * xi).powi(2) + xi - xi.powi(3) / 3.0
}

/// Comma-separated values in scientific (`"e"`) or fixed notation.
fn list(values: &[f64], style: &str) -> String {
    let item = |v: &f64| if style == "e" { format!("{v:.3e}") } else { format!("{v:.1}") };
    values.iter().map(item).collect::<Vec<_>>().join(", ")
}

fn static_setup(n: usize) -> (Grid, ReferenceProfile, LagModel) {
    let grid = Grid::new(n).unwrap();
    let reference = ReferenceProfile::normalized(&grid);
    let model = LagModel::new(&grid, &reference, Variant::static_angle()).unwrap();
    (grid, reference, model)
}

fn perturbed_run(model: &LagModel, eps: f64, config: &SolverConfig) -> Result<Trajectory, String> {
    let mut init = LagState::from_fn(model, |x| eps * shape(x), |_| 0.0);
    remove_mean(model, &mut init);
    let ctx = ReportContext::with_c1(model, 1.0).map_err(|e| e.to_string())?;
    let trajectory = simulate(&init, config, &ctx).map_err(|e| e.to_string())?;
    match &trajectory.halted {
        Some(e) => Err(format!("run halted: {e}")),
        None => Ok(trajectory),
    }
}

fn lambda_num(grid: &Grid, reference: &ReferenceProfile) -> Result<f64, String> {
    let ops = assemble(grid, reference, 0.5).map_err(|e| e.to_string())?;
    Ok(spectrum(&ops).map_err(|e| e.to_string())?.lambda_num)
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("capillary-sw-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn summary(outcome: &capillary_sw::cli::RunOutcome, key: &str) -> Result<f64, String> {
    outcome
        .manifest
        .summary
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("summary lacks {key}"))
}

/// Max-norm distance between the reconstructed height and `h_s` centred on
/// the wetted interval.
fn translate_distance(grid: &Grid, reference: &ReferenceProfile, state: &LagState) -> Result<f64, String> {
    let snap = reconstruct(grid, reference, state).map_err(|e| e.to_string())?;
    let profile = EquilibriumProfile::normalized();
    let center = 0.5 * (snap.a + snap.b);
    let mut worst = 0.0_f64;
    for (x, h) in snap.x.iter().zip(&snap.h) {
        let target = profile.eval((x - center).clamp(-1.0, 1.0), 0).map_err(|e| e.to_string())?;
        worst = worst.max((h - target).abs());
    }
    Ok(worst)
}

fn equilibrium_identities() -> Outcome {
    let profile = EquilibriumProfile::normalized();
    let (mut ode, mut third, mut max_h2, mut min_ms) = (0.0_f64, 0.0_f64, f64::NEG_INFINITY, f64::INFINITY);
    let mut n = 16;
    while n <= 4096 {
        let grid = Grid::with_profile(n, &profile).map_err(|e| e.to_string())?;
        ode = ode.max(ode_residual(&profile, &grid).map_err(|e| e.to_string())?);
        third = third.max(third_derivative_identity(&profile, &grid).map_err(|e| e.to_string())?);
        for &xi in grid.nodes() {
            max_h2 = max_h2.max(profile.eval(xi, 2).map_err(|e| e.to_string())?);
        }
        min_ms = grid.ms().iter().copied().fold(min_ms, f64::min);
        n *= 2;
    }
    let pass = ode <= 1e-12 && third <= 1e-12 && max_h2 < 0.0 && min_ms > 0.0;
    Ok((
        pass,
        format!("ode_residual {ode:.2e}, |h''' - h'| {third:.2e}, max h'' {max_h2:.4}, min m_s {min_ms:.4} (N = 16..4096)"),
    ))
}

fn fixed_point() -> Outcome {
    let config = RunConfig {
        command: Command::Simulate,
        n: 128,
        solver: SolverConfig {
            dt: 1e-3,
            t_end: 10.0,
            output_stride: 1000,
            ..SolverConfig::default()
        },
        initial: capillary_sw::cli::InitialCondition {
            family: PerturbationFamily::Zero,
            ..Default::default()
        },
        output_dir: scratch("fixed-point"),
        ..RunConfig::default()
    };
    let outcome = run(&config).map_err(|e| e.to_string())?;
    let steps = summary(&outcome, "steps")?;
    let theta = summary(&outcome, "max_abs_theta")?;
    let mut worst = 0.0_f64;
    for key in [
        "mass_drift",
        "momentum_drift",
        "max_energy_residual",
        "max_momentum_residual",
        "max_hamiltonian_increase",
    ] {
        worst = worst.max(summary(&outcome, key)?.abs());
    }
    let pass = steps >= 1e4 && theta <= 1e-12 && worst <= 1e-12 && outcome.halted.is_none();
    Ok((pass, format!("{steps} steps, max|theta| {theta:.2e}, max drift metric {worst:.2e}")))
}

fn conservation() -> Outcome {
    let (n, eps, dt) = (256, 1e-3, 1e-3);
    let (grid, _, model) = static_setup(n);
    let config = SolverConfig {
        dt,
        t_end: 10.0,
        output_stride: 100,
        ..SolverConfig::default()
    };
    let trajectory = perturbed_run(&model, eps, &config)?;
    let first = &trajectory.reports[0];
    let mass_drift = trajectory
        .reports
        .iter()
        .fold(0.0_f64, |m, r| m.max((r.mass - first.mass).abs() / first.mass));
    let momentum_scale = first.momentum.abs().max(eps * first.mass);
    let momentum_drift = trajectory
        .reports
        .iter()
        .fold(0.0_f64, |m, r| m.max((r.momentum - first.momentum).abs() / momentum_scale));
    let c = 1e-6;
    let bound = c * (dt * dt + grid.dx() * grid.dx());
    let balance = trajectory.max_energy_residual();
    let increase = trajectory.max_hamiltonian_increase();
    let increases = trajectory.steps.iter().filter(|s| s.hamiltonian_change > 0.0).count();
    let pass = mass_drift <= 1e-8 && momentum_drift <= 1e-6 && balance <= bound && increase <= 0.0;
    Ok((
        pass,
        format!(
            "mass drift {mass_drift:.2e}, momentum drift {momentum_drift:.2e}, balance {balance:.2e} <= {bound:.2e} (C = {c:e}), \
             max H increase {increase:.2e} in {increases} of {} steps",
            trajectory.steps.len()
        ),
    ))
}

fn linearization() -> Outcome {
    let (grid, reference, model) = static_setup(128);
    let ops = assemble(&grid, &reference, 0.5).map_err(|e| e.to_string())?;
    let zero = vec![0.0; grid.len()];
    let errors: Vec<f64> = [1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&eps| {
            let state = LagState::from_fn(&model, |x| eps * (x - x.powi(3) / 3.0), |_| 0.0);
            let f = model.reduction().fold(&model.force(&state.theta, &zero));
            let kt = ops.k().mul_vec(&ops.interior(&state.theta));
            f.iter()
                .zip(&kt)
                .map(|(a, b)| (a + grid.dx() * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| (70.0..=130.0).contains(r));
    Ok((pass, format!("errors [{}], per-decade ratios [{}] (expected ~100)", list(&errors, "e"), list(&ratios, "f"))))
}

fn linear_stability() -> Outcome {
    let mut text = String::new();
    let mut pass = true;
    for n in [64, 128, 256, 512] {
        let grid = Grid::new(n).unwrap();
        let reference = ReferenceProfile::normalized(&grid);
        let ops = assemble(&grid, &reference, 0.5).map_err(|e| e.to_string())?;
        let spec = spectrum(&ops).map_err(|e| e.to_string())?;
        let abscissa = spec.slowest().re;
        pass &= abscissa < 0.0 && spec.kernel_dim == 1;
        let _ = write!(text, "N={n}: abscissa {abscissa:.4}, kernel {}; ", spec.kernel_dim);
    }
    let (grid, reference, _) = static_setup(128);
    let model = LagModel::linearized(&grid, &reference, Variant::static_angle()).map_err(|e| e.to_string())?;
    let config = SolverConfig {
        t_end: 4.0,
        output_stride: 50,
        ..SolverConfig::default()
    };
    let trajectory = perturbed_run(&model, 1e-3, &config)?;
    let rate = decay_fit(&trajectory.series(|r| r.e0), (2.0, 4.0)).map_err(|e| e.to_string())?;
    let predicted = 2.0 * lambda_num(&grid, &reference)?;
    let error = (rate - predicted).abs() / predicted;
    pass &= error <= 0.05;
    let _ = write!(text, "linear decay {rate:.4} vs 2*lambda_num {predicted:.4} ({:.2}%)", 100.0 * error);
    Ok((pass, text))
}

struct DecayRun {
    n: usize,
    eps: f64,
    rate: f64,
    predicted: f64,
    distance: f64,
    elliptic: f64,
}

fn decay_run(n: usize, eps: f64) -> Result<DecayRun, String> {
    let (grid, reference, model) = static_setup(n);
    let config = SolverConfig {
        t_end: 4.0,
        output_stride: 50,
        ..SolverConfig::default()
    };
    let trajectory = perturbed_run(&model, eps, &config)?;
    let series = trajectory.series(|r| Some(r.e_nl1? + r.e_nl2?));
    Ok(DecayRun {
        n,
        eps,
        rate: decay_fit(&series, (2.0, 4.0)).map_err(|e| e.to_string())?,
        predicted: 2.0 * lambda_num(&grid, &reference)?,
        distance: translate_distance(&grid, &reference, &trajectory.final_state)?,
        elliptic: elliptic_ratio_check(&trajectory.reports, 1e-6).map_err(|e| e.to_string())?,
    })
}

fn nonlinear_stability(runs: &[DecayRun]) -> Outcome {
    let mut text = String::new();
    let mut pass = true;
    for r in runs {
        let error = (r.rate - r.predicted).abs() / r.predicted;
        pass &= r.rate > 0.0 && r.distance <= 5e-4;
        if r.eps == 1e-3 {
            pass &= error <= 0.15;
        }
        let _ = write!(
            text,
            "N={} eps={:e}: rate {:.4} vs {:.4} ({:.2}%), profile distance {:.2e}; ",
            r.n,
            r.eps,
            r.rate,
            r.predicted,
            100.0 * error,
            r.distance
        );
    }
    Ok((pass, text.trim_end_matches("; ").to_string()))
}

fn elliptic_ratio(runs: &[DecayRun]) -> Outcome {
    let mut text = String::new();
    let mut pass = true;
    for eps in [1e-3, 1e-2] {
        let pick = |n: usize| runs.iter().find(|r| r.n == n && r.eps == eps).map(|r| r.elliptic);
        let (Some(coarse), Some(fine)) = (pick(128), pick(256)) else {
            return Err(format!("missing runs for eps = {eps:e}"));
        };
        let spread = (coarse - fine).abs() / fine;
        pass &= coarse.is_finite() && fine.is_finite() && spread <= 0.2;
        let _ = write!(text, "eps={eps:e}: N=128 {coarse:.4}, N=256 {fine:.4} ({:.1}%); ", 100.0 * spread);
    }
    Ok((pass, text.trim_end_matches("; ").to_string()))
}

fn dynamic_energy_law() -> Outcome {
    let measure = |dt: f64| -> Result<(f64, f64, f64, f64), String> {
        let grid = Grid::new(128).unwrap();
        let reference = ReferenceProfile::normalized(&grid);
        let model = LagModel::new(&grid, &reference, Variant::dynamic(1.0, 1.0)).map_err(|e| e.to_string())?;
        let config = SolverConfig {
            dt,
            t_end: 1.0,
            output_stride: 100,
            ..SolverConfig::default()
        };
        let trajectory = perturbed_run(&model, 1e-2, &config)?;
        let scale = trajectory.reports[0].hamiltonian.abs();
        Ok((
            trajectory.max_energy_residual(),
            trajectory.max_momentum_residual(),
            trajectory.max_hamiltonian_increase(),
            scale,
        ))
    };
    let (dt, c) = (1e-3, 1e-3);
    let (energy, momentum, increase, _) = measure(dt)?;
    let (energy_coarse, momentum_coarse, _, _) = measure(2.0 * dt)?;
    let bound = c * dt * dt;
    let pass = energy <= bound && momentum <= bound && increase <= 0.0;
    Ok((
        pass,
        format!(
            "balance {energy:.2e}, momentum {momentum:.2e} <= {bound:.1e} (C = {c:e}, dt = {dt:e}); observed orders {:.2} / {:.2}; \
             max H increase {increase:.2e}",
            (energy_coarse / energy).log2(),
            (momentum_coarse / momentum).log2()
        ),
    ))
}

fn general_data() -> Outcome {
    let n = 128;
    let grid = Grid::new(n).unwrap();
    let params = PhysicalParams::normalized();
    let bump = QuarticBump::with_mass(params.alpha, EquilibriumProfile::normalized().mass_integral())
        .map_err(|e| e.to_string())?;
    let reference =
        ReferenceProfile::from_fn(&grid, params, "quartic_bump", |xi, k| bump.eval(xi, k)).map_err(|e| e.to_string())?;
    let model = LagModel::new(&grid, &reference, Variant::static_angle()).map_err(|e| e.to_string())?;
    let init = LagState::rest(&model);
    let ctx = ReportContext::new(&model).map_err(|e| e.to_string())?;
    let config = SolverConfig {
        t_end: 1.0,
        output_stride: 20,
        ..SolverConfig::default()
    };
    let trajectory = simulate(&init, &config, &ctx).map_err(|e| e.to_string())?;
    let (lo, hi) = trajectory
        .steps
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.min_eta_xi), hi.max(s.max_eta_xi)));
    let phi: Vec<f64> = trajectory.reports.iter().filter_map(|r| r.phi).collect();
    let phi0 = *phi.first().ok_or("no flow-map functional")?;
    let phi_max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = trajectory.halted.is_none() && lo >= 0.5 && hi <= 1.5 && phi_max <= 4.0 * phi0 + 1.0;
    Ok((
        pass,
        format!(
            "t = {:.2}, eta_xi in [{lo:.4}, {hi:.4}], Phi(0) {phi0:.3}, max Phi {phi_max:.3} <= {:.3}",
            trajectory.final_state.t,
            4.0 * phi0 + 1.0
        ),
    ))
}

fn inequalities() -> Outcome {
    let mut text = String::new();
    let mut pass = true;
    for (k, p, coefficients, expected) in [
        (1.0, 2.0, vec![1.0], 3.0),
        (1.0, 2.0, vec![0.0, 1.0], 0.625),
        (0.0, 2.0, vec![0.0, 1.0], 1.0),
    ] {
        let family = [TestFamily::Polynomial { coefficients }];
        let c = hardy_check(k, p, &family, &[16, 32]).map_err(|e| e.to_string())?.constant;
        pass &= (c - expected).abs() <= 1e-6;
        let _ = write!(text, "ratio {c:.8} (hand {expected}); ");
    }
    for (k, p) in [(1.0, 2.0), (0.0, 2.0), (0.5, 4.0)] {
        let e = hardy_check(k, p, &TestFamily::standard(), &[16, 32, 64]).map_err(|e| e.to_string())?;
        pass &= e.constant.is_finite() && e.constant > 0.0 && e.refinement_stable;
        let _ = write!(text, "Hardy(k={k}, p={p}) {:.4}; ", e.constant);
    }
    let family = [TestFamily::RandomPolynomials { seed: 11, count: 16, degree: 6 }];
    let (weighted, unweighted) =
        poincare_check(&family, &[256, 512], &EquilibriumProfile::normalized()).map_err(|e| e.to_string())?;
    for e in [&weighted, &unweighted] {
        pass &= e.constant.is_finite() && e.constant > 0.0 && e.refinement_stable;
        let _ = write!(text, "{} {:.4}; ", e.id, e.constant);
    }
    Ok((pass, text.trim_end_matches("; ").to_string()))
}

fn self_convergence() -> Outcome {
    let config = RunConfig {
        command: Command::Convergence,
        grids: vec![64, 128, 256],
        solver: SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            ..SolverConfig::default()
        },
        initial: capillary_sw::cli::InitialCondition {
            amplitude: 1e-2,
            ..Default::default()
        },
        ..RunConfig::default()
    };
    let study = convergence_study(&config).map_err(|e| e.to_string())?;
    let order = study.orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((order >= 1.5, format!("errors [{}], observed order {order:.3}", list(&study.errors, "e"))))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let results: Vec<(usize, &str, Outcome, f64)> = std::thread::scope(|scope| {
        let timed = |f: fn() -> Outcome| {
            move || {
                let t = Instant::now();
                (f(), t.elapsed().as_secs_f64())
            }
        };
        let singles: Vec<(usize, &str, _)> = vec![
            (1, "equilibrium identities", scope.spawn(timed(equilibrium_identities))),
            (2, "fixed point", scope.spawn(timed(fixed_point))),
            (3, "conservation suite", scope.spawn(timed(conservation))),
            (4, "linearization consistency", scope.spawn(timed(linearization))),
            (5, "linear stability", scope.spawn(timed(linear_stability))),
            (8, "dynamic-angle and slip energy law", scope.spawn(timed(dynamic_energy_law))),
            (9, "general-data mode", scope.spawn(timed(general_data))),
            (10, "inequality estimators", scope.spawn(timed(inequalities))),
            (11, "self-convergence", scope.spawn(timed(self_convergence))),
        ];
        let decay: Vec<_> = [(128, 1e-3), (128, 1e-2), (256, 1e-3), (256, 1e-2)]
            .into_iter()
            .map(|(n, eps)| {
                scope.spawn(move || {
                    let t = Instant::now();
                    (decay_run(n, eps), t.elapsed().as_secs_f64())
                })
            })
            .collect();
        let mut results: Vec<(usize, &str, Outcome, f64)> = singles
            .into_iter()
            .map(|(id, name, handle)| match handle.join() {
                Ok((outcome, secs)) => (id, name, outcome, secs),
                Err(_) => (id, name, Err("panicked".to_string()), 0.0),
            })
            .collect();
        let mut runs = Vec::new();
        let mut decay_secs = 0.0_f64;
        let mut decay_error = None;
        for handle in decay {
            match handle.join() {
                Ok((Ok(r), secs)) => {
                    runs.push(r);
                    decay_secs = decay_secs.max(secs);
                }
                Ok((Err(e), _)) => decay_error = Some(e),
                Err(_) => decay_error = Some("panicked".to_string()),
            }
        }
        let (six, seven) = match decay_error {
            Some(e) => (Err(e.clone()), Err(e)),
            None => (nonlinear_stability(&runs), elliptic_ratio(&runs)),
        };
        results.push((6, "nonlinear asymptotic stability", six, decay_secs));
        results.push((7, "elliptic-ratio bound", seven, decay_secs));
        results.sort_by_key(|r| r.0);
        results
    });
    let mut failed = 0;
    for (id, name, outcome, secs) in &results {
        let (status, detail) = match outcome {
            Ok((true, d)) => ("PASS", d.clone()),
            Ok((false, d)) => ("FAIL", d.clone()),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {id:>2} [{status}] {name} ({secs:.1} s): {detail}");
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
