//! Energy reports, balance monitors, elliptic ratios and inequality estimators.

use capillary_sw::diagnostics::{
    elliptic_ratio_check, hardy_check, poincare_check, report, EnergyReport, ReportContext, TestFamily,
    TimeDerivatives,
};
use capillary_sw::equilibrium::{EquilibriumProfile, PhysicalParams};
use capillary_sw::grid::Grid;
use capillary_sw::lagrangian_solver::{
    remove_mean, simulate, LagModel, LagState, QuarticBump, ReferenceProfile, SolverConfig, Trajectory, Variant,
};
use capillary_sw::Error;
use proptest::prelude::*;

const MASS: f64 = 0.626_070_571_0;

fn shape(xi: f64) -> f64 {
    0.25 * (1.0 - xi * xi).powi(2) + xi - xi.powi(3) / 3.0
}

fn model(n: usize, variant: Variant) -> LagModel {
    let grid = Grid::new(n).unwrap();
    let reference = ReferenceProfile::normalized(&grid);
    LagModel::new(&grid, &reference, variant).unwrap()
}

fn run_with(model: &LagModel, init: LagState, config: SolverConfig) -> Trajectory {
    let ctx = ReportContext::new(model).unwrap();
    let trajectory = simulate(&init, &config, &ctx).unwrap();
    assert!(trajectory.halted.is_none(), "{:?}", trajectory.halted);
    trajectory
}

fn decay_run(n: usize, eps: f64, t_end: f64) -> Trajectory {
    let model = model(n, Variant::static_angle());
    let mut init = LagState::from_fn(&model, |x| eps * shape(x), |_| 0.0);
    remove_mean(&model, &mut init);
    let config = SolverConfig {
        t_end,
        output_stride: 50,
        ..SolverConfig::default()
    };
    run_with(&model, init, config)
}

fn rest_report(n: usize) -> EnergyReport {
    let model = model(n, Variant::static_angle());
    let ctx = ReportContext::new(&model).unwrap();
    let zero = vec![0.0; model.grid().len()];
    let ladder = TimeDerivatives::of(&model, &LagState::rest(&model), Some(zero));
    report(&ctx, &ladder).unwrap()
}

#[test]
fn equilibrium_report_has_closed_form_mass_and_no_motion() {
    let mut errors = Vec::new();
    for n in [128, 256, 512] {
        let r = rest_report(n);
        let dx = 2.0 / n as f64;
        let error = (r.mass - MASS).abs();
        assert!(error <= dx * dx, "mass {} at N = {n}", r.mass);
        errors.push(error);
        assert_eq!(r.momentum, 0.0);
        assert_eq!(r.dissipation(), 0.0);
        assert_eq!(r.e_nl1, Some(0.0));
        assert_eq!(r.e_nl2, Some(0.0));
        assert_eq!(r.e0, Some(0.0));
        assert_eq!(r.elliptic_ratio, None);
        assert_eq!((r.a, r.b), (-1.0, 1.0));
        assert_eq!((r.min_eta_xi, r.max_eta_xi), (1.0, 1.0));
    }
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((3.9..=4.1).contains(&ratio), "mass errors {errors:?}");
    }
}

#[test]
fn closed_form_mass_constant_is_consistent() {
    let e2 = std::f64::consts::E.powi(2);
    assert!((4.0 / (e2 - 1.0) - MASS).abs() <= 1e-10);
    assert!((EquilibriumProfile::normalized().mass_integral() - MASS).abs() <= 1e-10);
}

#[test]
fn report_entries_are_finite_and_nonnegative() {
    let trajectory = decay_run(64, 1e-3, 0.5);
    for r in &trajectory.reports {
        let values = [
            Some(r.hamiltonian),
            Some(r.mass),
            Some(r.viscous_dissipation),
            Some(r.contact_dissipation),
            Some(r.slip_dissipation),
            r.e0,
            r.d0,
            r.e_nl1,
            r.e_nl2,
            r.elliptic_ratio,
        ];
        for v in values.into_iter().flatten() {
            assert!(v.is_finite() && v >= 0.0, "report at t = {}: {r:?}", r.t);
        }
        assert!(r.momentum.is_finite());
        assert_eq!(r.row().len(), EnergyReport::COLUMNS.len());
    }
}

#[test]
fn third_time_derivative_absent_flags_dependent_fields() {
    let model = model(64, Variant::static_angle());
    let ctx = ReportContext::new(&model).unwrap();
    let mut state = LagState::from_fn(&model, |x| 1e-3 * shape(x), |_| 0.0);
    remove_mean(&model, &mut state);
    let r = report(&ctx, &TimeDerivatives::of(&model, &state, None)).unwrap();
    assert_eq!(r.e_nl1, None);
    assert_eq!(r.energy_sum, None);
    assert_eq!(r.elliptic_ratio, None);
    assert!(r.e_nl2.is_some() && r.e0.is_some());
}

#[test]
fn hamiltonian_decreases_between_strides() {
    let model = model(128, Variant::static_angle());
    let mut init = LagState::from_fn(&model, |x| 1e-3 * 0.25 * (1.0 - x * x).powi(2), |_| 0.0);
    remove_mean(&model, &mut init);
    let config = SolverConfig {
        t_end: 4.0,
        output_stride: 50,
        ..SolverConfig::default()
    };
    let trajectory = run_with(&model, init, config);
    assert_eq!(trajectory.reports.len(), 81);
    assert!(trajectory.max_hamiltonian_increase() <= 0.0);
    for pair in trajectory.reports.windows(2) {
        assert!(pair[1].hamiltonian < pair[0].hamiltonian, "t = {}", pair[1].t);
    }
}

#[test]
fn static_balance_residual_is_second_order_small() {
    let n = 128;
    let dt = 1e-3;
    let trajectory = decay_run(n, 1e-3, 0.5);
    let dx = 2.0 / n as f64;
    assert!(trajectory.max_energy_residual() <= 1e-6 * (dt * dt + dx * dx));
}

fn dynamic_run(dt: f64) -> Trajectory {
    let model = model(64, Variant::dynamic(1.0, 0.5));
    let mut init = LagState::from_fn(&model, |x| 1e-3 * shape(x), |x| 1e-3 * (1.0 - x * x));
    remove_mean(&model, &mut init);
    let config = SolverConfig {
        dt,
        t_end: 0.5,
        output_stride: 50,
        ..SolverConfig::default()
    };
    run_with(&model, init, config)
}

#[test]
fn dynamic_momentum_balance_accounts_for_friction() {
    let coarse = dynamic_run(2e-3);
    let fine = dynamic_run(1e-3);
    let momentum_change: f64 = fine.steps.last().unwrap().momentum - fine.steps.first().unwrap().momentum;
    assert!(momentum_change.abs() > 1e-8, "friction should change the momentum");
    for (trajectory, dt) in [(&coarse, 2e-3), (&fine, 1e-3)] {
        let scale = trajectory.steps.iter().fold(0.0_f64, |m, s| m.max(s.momentum.abs()));
        assert!(trajectory.max_momentum_residual() <= dt * dt * scale.max(1e-3), "dt {dt}");
        assert!(trajectory.max_hamiltonian_increase() <= 0.0);
    }
    let r = &fine.reports;
    assert!(r.iter().skip(1).any(|x| x.contact_dissipation > 0.0 && x.slip_dissipation > 0.0));
}

#[test]
fn elliptic_ratio_is_empty_at_equilibrium() {
    let model = model(64, Variant::static_angle());
    let config = SolverConfig {
        t_end: 0.2,
        output_stride: 50,
        ..SolverConfig::default()
    };
    let trajectory = run_with(&model, LagState::rest(&model), config);
    assert!(matches!(elliptic_ratio_check(&trajectory.reports, 1e-2), Err(Error::Empty(_))));
}

#[test]
fn elliptic_ratio_is_refinement_and_amplitude_stable() {
    let coarse = elliptic_ratio_check(&decay_run(128, 1e-3, 4.0).reports, 1e-6).unwrap();
    let fine = elliptic_ratio_check(&decay_run(256, 1e-3, 4.0).reports, 1e-6).unwrap();
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((coarse - fine).abs() <= 0.2 * fine, "N=128 {coarse}, N=256 {fine}");
    let large = elliptic_ratio_check(&decay_run(128, 1e-2, 4.0).reports, 1e-6).unwrap();
    assert!((large - coarse).abs() <= 0.2 * coarse, "eps=1e-2 {large}, eps=1e-3 {coarse}");
}

#[test]
fn linear_energy_with_correction_is_nonincreasing() {
    let trajectory = decay_run(128, 1e-3, 2.0);
    let series: Vec<(f64, f64)> = trajectory
        .reports
        .iter()
        .filter_map(|r| Some((r.t, r.energy_sum? + r.energy_delta?)))
        .collect();
    assert!(series.len() > 10);
    for pair in series.windows(2) {
        assert!(pair[1].1 <= pair[0].1, "increase at t = {}", pair[1].0);
    }
}

#[test]
fn general_mode_phi_stays_bounded() {
    let grid = Grid::new(64).unwrap();
    let bump = QuarticBump::with_mass(1.0, MASS).unwrap();
    let reference =
        ReferenceProfile::from_fn(&grid, PhysicalParams::normalized(), "bump", |x, k| bump.eval(x, k)).unwrap();
    let model = LagModel::new(&grid, &reference, Variant::static_angle()).unwrap();
    let config = SolverConfig {
        t_end: 0.5,
        output_stride: 25,
        ..SolverConfig::default()
    };
    let trajectory = run_with(&model, LagState::rest(&model), config);
    let phi: Vec<f64> = trajectory.reports.iter().filter_map(|r| r.phi).collect();
    assert_eq!(phi.len(), trajectory.reports.len());
    assert!(phi.iter().all(|p| p.is_finite() && *p > 0.0));
    let bound = 4.0 * phi[0] + 1.0;
    assert!(phi.iter().all(|p| *p <= bound), "phi {phi:?}");
    assert!(trajectory.reports.iter().all(|r| r.e0.is_none() && r.energy_delta.is_none()));
}

#[test]
fn hardy_polynomial_ratios() {
    let cases = [
        (1.0, 2.0, vec![1.0], 3.0, "hardy_case1"),
        (1.0, 2.0, vec![0.0, 1.0], 0.625, "hardy_case1"),
        (0.0, 2.0, vec![0.0, 1.0], 1.0, "hardy_case2"),
    ];
    for (k, p, coefficients, expected, id) in cases {
        let family = [TestFamily::Polynomial { coefficients }];
        let estimate = hardy_check(k, p, &family, &[16, 32]).unwrap();
        assert_eq!(estimate.id, id);
        assert!((estimate.constant - expected).abs() <= 1e-6, "k={k}, p={p}: {}", estimate.constant);
        assert!(estimate.refinement_stable);
    }
}

#[test]
fn hardy_rejects_borderline_and_bad_exponents() {
    let family = TestFamily::standard();
    assert!(matches!(hardy_check(0.5, 2.0, &family, &[16]), Err(Error::HardyBorderline { .. })));
    assert!(matches!(hardy_check(1.0, 1.0, &family, &[16]), Err(Error::Config { .. })));
    assert!(matches!(hardy_check(1.0, 2.0, &family, &[]), Err(Error::Config { .. })));
}

#[test]
fn hardy_standard_family_is_refinement_stable() {
    for (k, p) in [(1.0, 2.0), (0.0, 2.0), (0.5, 4.0)] {
        let estimate = hardy_check(k, p, &TestFamily::standard(), &[16, 32, 64]).unwrap();
        assert!(estimate.constant.is_finite() && estimate.constant > 0.0);
        assert!(estimate.refinement_stable, "k={k}, p={p}: {:?}", estimate.constants);
    }
}

#[test]
fn poincare_linear_function_matches_fine_oracle() {
    let profile = EquilibriumProfile::normalized();
    let m = 1_000_000;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        let x = -1.0 + (i as f64 + 0.5) * 2.0 / m as f64;
        let h = profile.eval(x, 0).unwrap();
        num += h * x * x;
        den += h;
    }
    let oracle = num / den;
    let family = [TestFamily::Polynomial { coefficients: vec![0.0, 1.0] }];
    let (weighted, unweighted) = poincare_check(&family, &[1024, 2048], &profile).unwrap();
    assert!((weighted.constant - oracle).abs() <= 1e-5, "{} vs {oracle}", weighted.constant);
    assert!(unweighted.constant > weighted.constant);
    assert_eq!(weighted.id, "poincare_weighted");
    assert_eq!(unweighted.id, "poincare_unweighted");
}

#[test]
fn poincare_skips_constants() {
    let profile = EquilibriumProfile::normalized();
    let constant = [TestFamily::Polynomial { coefficients: vec![2.5] }];
    assert!(matches!(poincare_check(&constant, &[64], &profile), Err(Error::Empty(_))));
    let mixed = [
        TestFamily::Polynomial { coefficients: vec![2.5] },
        TestFamily::Polynomial { coefficients: vec![0.0, 1.0] },
    ];
    let only_linear = [TestFamily::Polynomial { coefficients: vec![0.0, 1.0] }];
    let (a, _) = poincare_check(&mixed, &[64], &profile).unwrap();
    let (b, _) = poincare_check(&only_linear, &[64], &profile).unwrap();
    assert_eq!(a.constant, b.constant);
}

#[test]
fn poincare_random_family_is_refinement_stable() {
    let family = [TestFamily::RandomPolynomials { seed: 11, count: 16, degree: 6 }];
    let (weighted, unweighted) = poincare_check(&family, &[256, 512], &EquilibriumProfile::normalized()).unwrap();
    for e in [&weighted, &unweighted] {
        assert!(e.constant.is_finite() && e.constant > 0.0);
        assert!(e.refinement_stable, "{:?}", e.constants);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hardy_constant_bounds_every_member(k in 0.6f64..2.0, p in 1.5f64..4.0, c in proptest::collection::vec(-1.0f64..1.0, 1..5)) {
        prop_assume!((k + 1.0 / p - 1.0).abs() > 0.05);
        let single = [TestFamily::Polynomial { coefficients: c.clone() }];
        let mut both = TestFamily::standard();
        both.push(TestFamily::Polynomial { coefficients: c });
        if let Ok(one) = hardy_check(k, p, &single, &[32]) {
            let all = hardy_check(k, p, &both, &[32]).unwrap();
            prop_assert!(all.constant >= one.constant);
            prop_assert!(one.constant.is_finite() && one.constant >= 0.0);
        }
    }

    #[test]
    fn poincare_is_invariant_under_adding_constants(shift in -5.0f64..5.0, a in 0.1f64..1.0, b in -1.0f64..1.0) {
        let profile = EquilibriumProfile::normalized();
        let base = [TestFamily::Polynomial { coefficients: vec![0.0, a, b] }];
        let shifted = [TestFamily::Polynomial { coefficients: vec![shift, a, b] }];
        let (w0, u0) = poincare_check(&base, &[128], &profile).unwrap();
        let (w1, u1) = poincare_check(&shifted, &[128], &profile).unwrap();
        prop_assert!((w0.constant - w1.constant).abs() <= 1e-9 * w0.constant);
        prop_assert!((u0.constant - u1.constant).abs() <= 1e-9 * u0.constant);
    }
}
