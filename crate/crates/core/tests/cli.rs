//! Workflow runs, manifests, determinism and height-file handling.

use std::fs;
use std::path::{Path, PathBuf};

use capillary_sw::cli::{convergence_study, load_height_file, run, Command, PerturbationFamily, RunConfig};
use capillary_sw::equilibrium::EquilibriumProfile;
use capillary_sw::grid::Grid;
use capillary_sw::lagrangian_solver::{QuarticBump, SolverConfig};
use capillary_sw::Error;
use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("capillary-sw-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn config(command: Command, dir: &Path) -> RunConfig {
    RunConfig {
        command,
        output_dir: dir.to_path_buf(),
        ..RunConfig::default()
    }
}

fn summary_f64(summary: &std::collections::BTreeMap<String, Value>, key: &str) -> f64 {
    summary
        .get(key)
        .and_then(Value::as_f64)
        .unwrap_or_else(|| panic!("summary lacks {key}"))
}

fn write_height_file(path: &Path, x: &[f64], h: &[f64]) {
    let mut text = String::from("x,h\n");
    for (a, b) in x.iter().zip(h) {
        text.push_str(&format!("{a:.17e},{b:.17e}\n"));
    }
    fs::write(path, text).unwrap();
}

fn config_field(result: Result<impl std::fmt::Debug, Error>) -> String {
    match result {
        Err(Error::Config { field, .. }) => field,
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn zero_amplitude_simulation_has_no_drift() {
    let dir = scratch("zero");
    let mut c = config(Command::Simulate, &dir);
    c.n = 64;
    c.initial.family = PerturbationFamily::Zero;
    c.solver.t_end = 0.2;
    let outcome = run(&c).unwrap();
    assert!(outcome.halted.is_none());
    let s = &outcome.manifest.summary;
    for key in [
        "mass_drift",
        "momentum_drift",
        "max_abs_theta",
        "max_energy_residual",
        "max_momentum_residual",
        "max_hamiltonian_increase",
        "hamiltonian_decrease",
    ] {
        assert_eq!(summary_f64(s, key), 0.0, "{key}");
    }
    for name in ["trajectory.csv", "steps.csv", "checkpoint.json"] {
        assert!(outcome.manifest.artifacts.iter().any(|a| a == name), "missing {name}");
    }
    assert!(outcome.manifest.artifacts.iter().all(|a| dir.join(a).exists()));
    assert!(dir.join("manifest.json").exists());
    let trajectory = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert_eq!(trajectory.lines().count(), 1 + 200 / 100 + 1);
}

#[test]
fn identical_configurations_produce_identical_bytes() {
    let dir = scratch("repeat");
    let mut c = config(Command::Simulate, &dir);
    c.n = 32;
    c.initial.family = PerturbationFamily::Random;
    c.initial.amplitude = 1e-2;
    c.solver.t_end = 0.1;
    c.solver.output_stride = 20;
    let read_all = |names: &[String]| -> Vec<Vec<u8>> { names.iter().map(|n| fs::read(dir.join(n)).unwrap()).collect() };
    let first = run(&c).unwrap();
    let mut names = first.manifest.artifacts.clone();
    names.push("manifest.json".into());
    assert!(names.iter().any(|n| n.starts_with("snapshots/")));
    let before = read_all(&names);
    let second = run(&c).unwrap();
    assert_eq!(first.manifest, second.manifest);
    assert_eq!(before, read_all(&names));

    c.seed += 1;
    assert_ne!(run(&c).unwrap().manifest.config_hash, first.manifest.config_hash);
}

#[test]
fn trajectory_csv_uses_full_precision() {
    let dir = scratch("precision");
    let mut c = config(Command::Simulate, &dir);
    c.n = 32;
    c.initial.amplitude = 1e-2;
    c.solver.t_end = 0.05;
    c.solver.output_stride = 10;
    run(&c).unwrap();
    let mut reader = csv::Reader::from_path(dir.join("trajectory.csv")).unwrap();
    let row = reader.records().nth(1).unwrap().unwrap();
    let hamiltonian: f64 = row[1].parse().unwrap();
    assert_eq!(format!("{hamiltonian:.16e}").parse::<f64>().unwrap(), hamiltonian);
    assert!(row[1].len() >= 17);
}

#[test]
fn convergence_order_of_a_smooth_run() {
    let mut c = RunConfig::default();
    c.command = Command::Convergence;
    c.grids = vec![64, 128, 256];
    c.initial.amplitude = 1e-2;
    c.solver = SolverConfig {
        dt: 1e-3,
        t_end: 0.5,
        ..SolverConfig::default()
    };
    let study = convergence_study(&c).unwrap();
    assert_eq!(study.errors.len(), 2);
    assert_eq!(study.orders.len(), 1);
    assert!(study.orders[0] >= 1.5, "orders {:?}, errors {:?}", study.orders, study.errors);
}

#[test]
fn linearized_decay_matches_the_spectrum_command() {
    let dir = scratch("linear");
    let mut spec = config(Command::Spectrum, &dir.join("spectrum"));
    spec.n = 64;
    let spectrum = run(&spec).unwrap();
    let lambda = summary_f64(&spectrum.manifest.summary, "lambda_num");
    assert!(summary_f64(&spectrum.manifest.summary, "spectral_abscissa") < 0.0);

    let mut sim = config(Command::Simulate, &dir.join("simulate"));
    sim.n = 64;
    sim.linearized = true;
    sim.solver.t_end = 4.0;
    sim.solver.output_stride = 50;
    sim.fit_window = Some([2.0, 4.0]);
    sim.fit_field = "e0".into();
    let outcome = run(&sim).unwrap();
    let rate = summary_f64(&outcome.manifest.summary, "decay_rate");
    assert!((rate - 2.0 * lambda).abs() <= 0.05 * 2.0 * lambda, "rate {rate}, lambda {lambda}");

    let mut fit = config(Command::DecayFit, &dir.join("fit"));
    fit.input = Some(dir.join("simulate").join("trajectory.csv"));
    fit.fit_window = Some([2.0, 4.0]);
    fit.fit_field = "e0".into();
    let refit = summary_f64(&run(&fit).unwrap().manifest.summary, "decay_rate");
    assert!((refit - rate).abs() <= 1e-12 * rate);
}

#[test]
fn invalid_parameters_name_their_field() {
    let dir = scratch("invalid");
    let base = config(Command::Simulate, &dir);
    let cases: Vec<(&str, RunConfig)> = vec![
        ("n", RunConfig { n: 15, ..base.clone() }),
        ("n", RunConfig { n: 8, ..base.clone() }),
        ("dt", RunConfig { solver: SolverConfig { dt: -1e-3, ..base.solver.clone() }, ..base.clone() }),
        ("t_end", RunConfig { solver: SolverConfig { t_end: f64::NAN, ..base.solver.clone() }, ..base.clone() }),
        ("mu", RunConfig { mu: 0.0, ..base.clone() }),
        ("slip_inv", RunConfig { slip_inv: -1.0, ..base.clone() }),
        ("grids", RunConfig { command: Command::Convergence, grids: vec![64, 128], ..base.clone() }),
        ("input", RunConfig { command: Command::DecayFit, fit_window: Some([1.0, 2.0]), ..base.clone() }),
        ("fit_window", RunConfig { fit_window: Some([2.0, 1.0]), ..base.clone() }),
        ("hardy", RunConfig { command: Command::Inequalities, hardy: vec![[0.5, 2.0]], ..base.clone() }),
    ];
    for (field, c) in cases {
        assert_eq!(config_field(run(&c)), field);
    }
    assert_eq!(config_field(RunConfig::from_json("{\"bogus\": 1}")), "config");
    assert!(fs::read_dir(&dir).unwrap().next().is_none());
}

#[test]
fn json_configuration_round_trips() {
    let mut c = RunConfig::default();
    c.nu = Some(1.0);
    c.slip_inv = 0.5;
    c.grids = vec![32, 64, 128];
    let text = serde_json::to_string(&c).unwrap();
    let back = RunConfig::from_json(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
    let partial = RunConfig::from_json("{\"n\": 64}").unwrap();
    assert_eq!(partial.n, 64);
    assert_eq!(partial.solver, SolverConfig::default());
}

#[test]
fn equilibrium_height_file_gives_the_identity_map() {
    let dir = scratch("hs-file");
    let n = 128;
    let grid = Grid::new(n).unwrap();
    let profile = EquilibriumProfile::normalized();
    let h: Vec<f64> = grid.nodes().iter().map(|&x| profile.eval(x, 0).unwrap().max(0.0)).collect();
    let file = dir.join("hs.csv");
    write_height_file(&file, grid.nodes(), &h);
    let (x, loaded) = load_height_file(&file).unwrap();
    assert_eq!((x.as_slice(), loaded.as_slice()), (grid.nodes(), h.as_slice()));

    let mut c = config(Command::Simulate, &dir.join("run"));
    c.n = n;
    c.height_file = Some(file);
    c.solver.t_end = 0.01;
    c.solver.output_stride = 10;
    let outcome = run(&c).unwrap();
    assert!(summary_f64(&outcome.manifest.summary, "max_abs_theta") <= 1e-10);
}

#[test]
fn malformed_height_files_are_rejected() {
    let dir = scratch("bad-file");
    let x: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
    let mut h: Vec<f64> = x.iter().map(|v| 1.0 - v * v).collect();
    h[20] = 0.01;
    let file = dir.join("end.csv");
    write_height_file(&file, &x, &h);
    assert!(matches!(load_height_file(&file), Err(Error::InvalidHeight(_))));

    h[20] = 0.0;
    h[5] = -0.1;
    write_height_file(&file, &x, &h);
    assert!(matches!(load_height_file(&file), Err(Error::InvalidHeight(_))));

    h[5] = 1.0 - x[5] * x[5];
    let mut swapped = x.clone();
    swapped.swap(3, 4);
    write_height_file(&file, &swapped, &h);
    assert!(matches!(load_height_file(&file), Err(Error::InvalidHeight(_))));

    fs::write(&file, "x,height\n-1,0\n1,0\n").unwrap();
    assert!(matches!(load_height_file(&file), Err(Error::InvalidHeight(_))));
    fs::write(&file, "x,h\n-1,0\n0,abc\n1,0\n").unwrap();
    assert!(matches!(load_height_file(&file), Err(Error::InvalidHeight(_))));
    assert!(matches!(load_height_file(&dir.join("absent.csv")), Err(Error::Io(_))));
}

#[test]
fn quartic_bump_file_runs_in_general_mode() {
    let dir = scratch("bump");
    let mass = EquilibriumProfile::normalized().mass_integral();
    let bump = QuarticBump::with_mass(1.0, mass).unwrap();
    let x: Vec<f64> = (0..=512).map(|i| 0.5 + i as f64 / 256.0).collect();
    let h: Vec<f64> = x.iter().map(|&v| bump.eval(v - 1.5, 0).max(0.0)).collect();
    let file = dir.join("bump.csv");
    write_height_file(&file, &x, &h);

    let mut c = config(Command::GeneralData, &dir.join("run"));
    c.n = 64;
    c.height_file = Some(file);
    c.solver.t_end = 0.1;
    c.solver.output_stride = 10;
    let outcome = run(&c).unwrap();
    assert!(outcome.halted.is_none());
    let s = &outcome.manifest.summary;
    assert!((summary_f64(s, "reference_mass") - mass).abs() <= 1e-3 * mass);
    assert!(summary_f64(s, "min_eta_xi") >= 0.5 && summary_f64(s, "max_eta_xi") <= 1.5);
    assert_eq!(s.get("phi_bound_holds"), Some(&Value::Bool(true)));
}

#[test]
fn output_root_resolves_relative_directories() {
    let root = scratch("root");
    std::env::set_var("CAPILLARY_SW_OUTPUT_ROOT", &root);
    let c = RunConfig {
        command: Command::Equilibrium,
        n: 32,
        output_dir: PathBuf::from("eq"),
        ..RunConfig::default()
    };
    let outcome = run(&c).unwrap();
    std::env::remove_var("CAPILLARY_SW_OUTPUT_ROOT");
    assert_eq!(outcome.dir, root.join("eq"));
    let text = fs::read_to_string(root.join("eq").join("equilibrium.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "xi,h,h1,h2,h3,h4,ms");
    assert_eq!(text.lines().count(), 34);
    assert!(summary_f64(&outcome.manifest.summary, "ode_residual") <= 1e-12);
}

#[test]
fn inequalities_and_spectrum_write_their_artifacts() {
    let dir = scratch("artifacts");
    let mut c = config(Command::Inequalities, &dir.join("ineq"));
    c.grids = vec![128, 256];
    let outcome = run(&c).unwrap();
    assert!(dir.join("ineq").join("inequalities.json").exists());
    assert_eq!(outcome.manifest.summary.get("all_refinement_stable"), Some(&Value::Bool(true)));

    let mut c = config(Command::Spectrum, &dir.join("spec"));
    c.n = 32;
    run(&c).unwrap();
    let text = fs::read_to_string(dir.join("spec").join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "re,im");
}
