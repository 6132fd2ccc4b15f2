//! Run configuration, experiment orchestration and artifact output.
//!
//! A run is described by one [`RunConfig`] document. [`run`] validates it,
//! performs the requested workflow and writes CSV and JSON artifacts together
//! with a `manifest.json` holding the configuration, its hash, the crate
//! version and the summary scalars. Identical configurations produce
//! byte-identical artifacts.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::diagnostics::{hardy_check, poincare_check, EnergyReport, ReportContext, TestFamily};
use crate::equilibrium::{ode_residual, third_derivative_identity, EquilibriumProfile, PhysicalParams};
use crate::error::{Error, Result};
use crate::eulerian::{contact_report, reconstruct, write_contact_csv, EulerianSnapshot};
use crate::grid::Grid;
use crate::lagrangian_solver::{
    lagrangian_map, remove_mean, simulate, validate_height, Checkpoint, LagModel, LagState, QuarticBump,
    ReferenceProfile, SolverConfig, Trajectory, Variant,
};
use crate::linear_stability::{assemble, choose_c1, decay_fit, spectrum};
use crate::output::{fmt_f64, write_header, write_row};

/// Environment variable naming the directory that relative output paths are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "CAPILLARY_SW_OUTPUT_ROOT";

/// Largest accepted grid size.
pub const MAX_N: usize = 1 << 16;

/// Smallest accepted grid size; sizes must also be even.
pub const MIN_N: usize = 16;

/// Workflow selected by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sample the equilibrium droplet and its identities.
    Equilibrium,
    /// Near-equilibrium simulation with trajectory, snapshots and checkpoint.
    Simulate,
    /// Spectrum and energy-pair coupling of the linearized operator.
    Spectrum,
    /// Exponential decay fit of a column of an existing trajectory.
    DecayFit,
    /// Empirical Hardy and Poincaré constants.
    Inequalities,
    /// Self-convergence study over a sequence of doubling grids.
    Convergence,
    /// Simulation with a non-equilibrium initial height as reference.
    GeneralData,
}

impl Command {
    /// Name used on the command line and in manifests.
    pub fn name(self) -> &'static str {
        match self {
            Command::Equilibrium => "equilibrium",
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::DecayFit => "decay-fit",
            Command::Inequalities => "inequalities",
            Command::Convergence => "convergence",
            Command::GeneralData => "general-data",
        }
    }
}

/// Named shape of the initial perturbation `θ(ξ, 0)`. Every member satisfies
/// `θ_ξ(±1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationFamily {
    /// `θ = 0`.
    Zero,
    /// `(1 - ξ²)²/4`.
    Even,
    /// `ξ - ξ³/3`.
    Odd,
    /// Sum of the even and odd shapes.
    Mixed,
    /// `Σ_{j=1}^{4} c_j cos(jπ(ξ+1)/2)` with seeded coefficients uniform in `[-1, 1]`.
    Random,
}

impl PerturbationFamily {
    /// Shape function of the family; `seed` is used by [`PerturbationFamily::Random`] only.
    pub fn shape(self, seed: u64) -> impl Fn(f64) -> f64 {
        let coefficients: Vec<f64> = if self == PerturbationFamily::Random {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect()
        } else {
            Vec::new()
        };
        move |xi: f64| {
            let even = 0.25 * (1.0 - xi * xi).powi(2);
            let odd = xi - xi.powi(3) / 3.0;
            match self {
                PerturbationFamily::Zero => 0.0,
                PerturbationFamily::Even => even,
                PerturbationFamily::Odd => odd,
                PerturbationFamily::Mixed => even + odd,
                PerturbationFamily::Random => coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::FRAC_PI_2 * (xi + 1.0)).cos())
                    .sum(),
            }
        }
    }
}

/// Initial perturbation: family, amplitude `ε` and mean removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialCondition {
    pub family: PerturbationFamily,
    /// Amplitude `ε` multiplying the family shape.
    pub amplitude: f64,
    /// Subtract the `h_ref`-weighted means of `θ` and `θ_t`, removing the
    /// translation component of the data.
    pub zero_mean: bool,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self {
            family: PerturbationFamily::Mixed,
            amplitude: 1e-3,
            zero_mean: true,
        }
    }
}

/// Configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Number of grid intervals `N`.
    pub n: usize,
    pub solver: SolverConfig,
    /// Viscosity `μ`.
    pub mu: f64,
    /// Contact-line friction `ν`; present selects the dynamic contact angle.
    pub nu: Option<f64>,
    /// Navier-slip coefficient `𝔟⁻¹`.
    pub slip_inv: f64,
    pub initial: InitialCondition,
    /// CSV with columns `x, h`. For `simulate` it is the initial height, mapped
    /// onto the equilibrium by mass matching (it replaces `initial`); for
    /// `general-data` it is the reference height.
    pub height_file: Option<PathBuf>,
    /// Evolve the linearized equation instead of the nonlinear one.
    pub linearized: bool,
    /// Seed for random test families and random perturbations.
    pub seed: u64,
    /// Output directory; relative paths are resolved against [`OUTPUT_ROOT_ENV`] when set.
    pub output_dir: PathBuf,
    /// Time window `[t_lo, t_hi]` of the decay fit.
    pub fit_window: Option<[f64; 2]>,
    /// Trajectory column fitted by the decay fit; `e_nl` stands for `E_NL,1 + E_NL,2`.
    pub fit_field: String,
    /// Trajectory CSV read by `decay-fit`.
    pub input: Option<PathBuf>,
    /// Grid sizes of `convergence` and of the Poincaré estimates; empty selects the command default.
    pub grids: Vec<usize>,
    /// Panel counts of the Hardy quadrature.
    pub hardy_panels: Vec<usize>,
    /// Hardy exponent pairs `[k, p]`.
    pub hardy: Vec<[f64; 2]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Simulate,
            n: 128,
            solver: SolverConfig::default(),
            mu: 0.5,
            nu: None,
            slip_inv: 0.0,
            initial: InitialCondition::default(),
            height_file: None,
            linearized: false,
            seed: 7,
            output_dir: PathBuf::from("out"),
            fit_window: None,
            fit_field: "e_nl".into(),
            input: None,
            grids: Vec::new(),
            hardy_panels: vec![16, 32, 64],
            hardy: vec![[1.0, 2.0], [0.0, 2.0], [0.5, 4.0]],
        }
    }
}

impl RunConfig {
    /// Parses a JSON configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Reads a JSON configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Model variant selected by `mu`, `nu` and `slip_inv`.
    pub fn variant(&self) -> Variant {
        let base = match self.nu {
            Some(nu) => Variant::dynamic(nu, self.slip_inv),
            None => Variant {
                slip_inv: self.slip_inv,
                ..Variant::static_angle()
            },
        };
        Variant { mu: self.mu, ..base }
    }

    /// Grid sizes used by the current command.
    pub fn effective_grids(&self) -> Vec<usize> {
        if !self.grids.is_empty() {
            return self.grids.clone();
        }
        match self.command {
            Command::Inequalities => vec![128, 256, 512],
            _ => vec![64, 128, 256],
        }
    }

    /// Output directory after resolution against [`OUTPUT_ROOT_ENV`].
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("configuration serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every numeric parameter used by the selected command.
    pub fn validate(&self) -> Result<()> {
        if !(MIN_N..=MAX_N).contains(&self.n) || self.n % 2 != 0 {
            return Err(Error::config("n", format!("must be even and lie in {MIN_N}..={MAX_N}, got {}", self.n)));
        }
        self.variant().validate()?;
        if !self.initial.amplitude.is_finite() {
            return Err(Error::config("initial.amplitude", "must be finite"));
        }
        let simulates = matches!(
            self.command,
            Command::Simulate | Command::Convergence | Command::GeneralData
        );
        if simulates {
            self.solver.validate()?;
        }
        if let Some([lo, hi]) = self.fit_window {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                return Err(Error::config("fit_window", format!("needs 0 <= t_lo < t_hi, got [{lo}, {hi}]")));
            }
        }
        for &g in &self.grids {
            if !(MIN_N..=MAX_N).contains(&g) || g % 2 != 0 {
                return Err(Error::config(
                    "grids",
                    format!("each size must be even and lie in {MIN_N}..={MAX_N}, got {g}"),
                ));
            }
        }
        match self.command {
            Command::DecayFit => {
                if self.input.is_none() {
                    return Err(Error::config("input", "decay-fit needs a trajectory CSV"));
                }
                if self.fit_window.is_none() {
                    return Err(Error::config("fit_window", "decay-fit needs a time window"));
                }
            }
            Command::Convergence => {
                let grids = self.effective_grids();
                if grids.len() < 3 {
                    return Err(Error::config("grids", "convergence needs at least three grids"));
                }
                if grids.windows(2).any(|w| w[1] != 2 * w[0]) {
                    return Err(Error::config("grids", "convergence grids must double in size"));
                }
            }
            Command::Inequalities => {
                if self.hardy_panels.is_empty() || self.hardy_panels.contains(&0) {
                    return Err(Error::config("hardy_panels", "needs at least one positive panel count"));
                }
                for &[k, p] in &self.hardy {
                    if !(k.is_finite() && p.is_finite() && p > 1.0) {
                        return Err(Error::config("hardy", format!("needs finite k and p > 1, got [{k}, {p}]")));
                    }
                    if (k + 1.0 / p - 1.0).abs() <= 1e-12 {
                        return Err(Error::config("hardy", format!("k + 1/p = 1 is excluded, got [{k}, {p}]")));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub summary: BTreeMap<String, Value>,
    /// Artifact paths relative to the output directory.
    pub artifacts: Vec<String>,
    /// Structured error that stopped a simulation early.
    pub halted: Option<Value>,
}

/// What a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    /// Resolved output directory.
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Solver error that stopped a simulation early; artifacts up to that
    /// point are written.
    pub halted: Option<Error>,
}

/// Reads a height file with header columns `x` and `h` and validates it.
pub fn load_height_file(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidHeight(format!("{}: missing column '{name}'", path.display())))
    };
    let (ix, ih) = (column("x")?, column("h")?);
    let mut x = Vec::new();
    let mut h = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| -> Result<f64> {
            let field = record.get(i).unwrap_or("").trim();
            field
                .parse()
                .map_err(|_| Error::InvalidHeight(format!("row {row}: cannot parse '{field}' as a number")))
        };
        x.push(parse(ix)?);
        h.push(parse(ih)?);
    }
    validate_height(&x, &h)?;
    Ok((x, h))
}

/// Runs the configured workflow and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let dir = config.resolved_output_dir();
    fs::create_dir_all(&dir)?;
    let mut out = Artifacts {
        dir: dir.clone(),
        names: Vec::new(),
        summary: BTreeMap::new(),
        halted: None,
    };
    match config.command {
        Command::Equilibrium => run_equilibrium(config, &mut out)?,
        Command::Simulate => run_simulate(config, &mut out)?,
        Command::Spectrum => run_spectrum(config, &mut out)?,
        Command::DecayFit => run_decay_fit(config, &mut out)?,
        Command::Inequalities => run_inequalities(config, &mut out)?,
        Command::Convergence => run_convergence(config, &mut out)?,
        Command::GeneralData => run_general(config, &mut out)?,
    }
    let manifest = Manifest {
        command: config.command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        config_hash: config.hash(),
        summary: out.summary,
        artifacts: out.names,
        halted: out.halted.as_ref().map(Error::to_json),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunOutcome {
        dir,
        manifest,
        halted: out.halted,
    })
}

/// Artifacts and summary accumulated by a workflow.
struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
    summary: BTreeMap<String, Value>,
    halted: Option<Error>,
}

impl Artifacts {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.names.push(name.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.names.push(name.to_string());
        write_json(&self.dir.join(name), value)
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).expect("summary value serializes"));
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run_equilibrium(config: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let profile = EquilibriumProfile::normalized();
    let grid = Grid::with_profile(config.n, &profile)?;
    let mut w = out.create("equilibrium.csv")?;
    write_equilibrium_csv(&mut w, &profile, &grid)?;
    w.flush()?;
    let ms = grid.ms();
    let h2: Vec<f64> = (0..grid.len())
        .map(|i| profile.eval(grid.nodes()[i], 2))
        .collect::<Result<_>>()?;
    out.set("n", config.n);
    out.set("mass", profile.mass_integral());
    out.set("ode_residual", ode_residual(&profile, &grid)?);
    out.set("third_derivative_identity", third_derivative_identity(&profile, &grid)?);
    out.set("max_h2", h2.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    out.set("min_ms", ms.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(())
}

/// Writes `xi, h, h1, h2, h3, h4, ms` at the grid nodes.
pub fn write_equilibrium_csv(w: &mut impl Write, profile: &EquilibriumProfile, grid: &Grid) -> Result<()> {
    write_header(w, &["xi", "h", "h1", "h2", "h3", "h4", "ms"])?;
    for &xi in grid.nodes() {
        let mut row = (0..=4).map(|k| profile.eval(xi, k)).collect::<Result<Vec<_>>>()?;
        row.insert(0, xi);
        row.push(profile.coefficient_ms(xi)?);
        write_row(w, &row)?;
    }
    Ok(())
}

fn build_model(config: &RunConfig, grid: &Grid, reference: &ReferenceProfile) -> Result<LagModel> {
    if config.linearized {
        LagModel::linearized(grid, reference, config.variant())
    } else {
        LagModel::new(grid, reference, config.variant())
    }
}

/// Initial state of a near-equilibrium run on `model`.
fn initial_state(config: &RunConfig, model: &LagModel) -> Result<LagState> {
    let grid = model.grid();
    let mut state = match &config.height_file {
        Some(path) => {
            let (x, h) = load_height_file(path)?;
            let eta = lagrangian_map(&x, &h, grid, model.reference())?;
            let theta = eta.iter().zip(grid.nodes()).map(|(e, xi)| e - xi).collect();
            LagState::from_samples(model, theta, vec![0.0; grid.len()])?
        }
        None => {
            let shape = config.initial.family.shape(config.seed);
            let eps = config.initial.amplitude;
            LagState::from_fn(model, |xi| eps * shape(xi), |_| 0.0)
        }
    };
    if config.initial.zero_mean {
        remove_mean(model, &mut state);
    }
    Ok(state)
}

fn run_simulate(config: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let grid = Grid::new(config.n)?;
    let reference = ReferenceProfile::normalized(&grid);
    let model = build_model(config, &grid, &reference)?;
    let init = initial_state(config, &model)?;
    let ctx = ReportContext::new(&model)?;
    let traj = simulate(&init, &config.solver, &ctx)?;
    let snapshots = write_trajectory(config, out, &reference, &traj)?;
    if let Some(last) = snapshots.last() {
        out.set("equilibrium_distance", equilibrium_distance(last)?);
    }
    out.set("max_abs_theta", traj.final_state.theta.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    if let Some(c1) = ctx.c1() {
        out.set("c1", c1);
    }
    if let Some([lo, hi]) = config.fit_window {
        let series = field_series(&traj.reports, &config.fit_field)?;
        let rate = decay_fit(&series, (lo, hi))?;
        out.set("decay_rate", rate);
        if model.variant().is_static() {
            let ops = assemble(&grid, &reference, model.variant().mu)?;
            let predicted = 2.0 * spectrum(&ops)?.lambda_num;
            out.set("predicted_decay_rate", predicted);
            out.set("decay_rate_relative_error", (rate - predicted).abs() / predicted);
        }
    }
    Ok(())
}

fn run_general(config: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let grid = Grid::new(config.n)?;
    let params = PhysicalParams::normalized();
    let reference = match &config.height_file {
        Some(path) => {
            let (x, h) = load_height_file(path)?;
            let samples = resample_on_reference(&x, &h, &grid)?;
            let label = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            ReferenceProfile::from_samples(&grid, params, label, samples)?
        }
        None => {
            let bump = QuarticBump::with_mass(params.alpha, EquilibriumProfile::normalized().mass_integral())?;
            ReferenceProfile::from_fn(&grid, params, "quartic_bump", |xi, k| bump.eval(xi, k))?
        }
    };
    let model = build_model(config, &grid, &reference)?;
    let shape = config.initial.family.shape(config.seed);
    let eps = config.initial.amplitude;
    let mut init = LagState::from_fn(&model, |xi| eps * shape(xi), |_| 0.0);
    if config.initial.zero_mean {
        remove_mean(&model, &mut init);
    }
    let ctx = ReportContext::new(&model)?;
    let traj = simulate(&init, &config.solver, &ctx)?;
    write_trajectory(config, out, &reference, &traj)?;
    out.set("reference_mass", reference.mass(&grid));
    let phi: Vec<f64> = traj.reports.iter().filter_map(|r| r.phi).collect();
    if let Some(&phi0) = phi.first() {
        let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.set("phi_initial", phi0);
        out.set("phi_max", max);
        out.set("phi_bound_holds", max <= 4.0 * phi0 + 1.0);
    }
    Ok(())
}

/// Heights on the grid nodes for a file sampled on an interval of length 2,
/// translated onto `[-1, 1]` and linearly interpolated.
fn resample_on_reference(x: &[f64], h: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let (x0, x1) = (x[0], x[x.len() - 1]);
    if ((x1 - x0) - 2.0).abs() > 1e-9 {
        return Err(Error::config(
            "height_file",
            format!("reference heights must span an interval of length 2, got [{x0}, {x1}]"),
        ));
    }
    let shift = x0 + 1.0;
    let mut j = 0;
    Ok(grid
        .nodes()
        .iter()
        .map(|&xi| {
            let xv = xi + shift;
            while j + 2 < x.len() && x[j + 1] < xv {
                j += 1;
            }
            let s = ((xv - x[j]) / (x[j + 1] - x[j])).clamp(0.0, 1.0);
            h[j] + s * (h[j + 1] - h[j])
        })
        .collect())
}

/// Max-norm distance between a snapshot height and `h_s` translated to the
/// midpoint of the wetted interval.
fn equilibrium_distance(snap: &EulerianSnapshot) -> Result<f64> {
    let profile = EquilibriumProfile::normalized();
    let center = 0.5 * (snap.a + snap.b);
    let mut worst = 0.0_f64;
    for (x, h) in snap.x.iter().zip(&snap.h) {
        let s = (x - center).clamp(-1.0, 1.0);
        worst = worst.max((h - profile.eval(s, 0)?).abs());
    }
    Ok(worst)
}

/// Time series of a trajectory column; `e_nl` is `E_NL,1 + E_NL,2`.
pub fn field_series(reports: &[EnergyReport], field: &str) -> Result<Vec<(f64, f64)>> {
    if field == "e_nl" {
        return Ok(reports
            .iter()
            .filter_map(|r| Some((r.t, r.e_nl1? + r.e_nl2?)))
            .collect());
    }
    let index = EnergyReport::COLUMNS
        .iter()
        .position(|c| *c == field)
        .ok_or_else(|| Error::config("fit_field", format!("unknown trajectory column '{field}'")))?;
    Ok(reports
        .iter()
        .filter_map(|r| r.row()[index].map(|v| (r.t, v)))
        .collect())
}

/// Writes trajectory, steps, snapshots, contact series and checkpoint, and
/// records the conservation summary. Returns the Eulerian snapshots.
fn write_trajectory(
    config: &RunConfig,
    out: &mut Artifacts,
    reference: &ReferenceProfile,
    traj: &Trajectory,
) -> Result<Vec<EulerianSnapshot>> {
    let grid = Grid::new(config.n)?;
    let mut w = out.create("trajectory.csv")?;
    write_header(&mut w, &EnergyReport::COLUMNS)?;
    for r in &traj.reports {
        let fields: Vec<String> = r.row().iter().map(|v| v.map(fmt_f64).unwrap_or_default()).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;

    let mut w = out.create("steps.csv")?;
    write_header(
        &mut w,
        &[
            "t",
            "scheme",
            "iterations",
            "hamiltonian",
            "hamiltonian_change",
            "energy_residual",
            "momentum_residual",
            "momentum",
            "min_eta_xi",
            "max_eta_xi",
        ],
    )?;
    for s in &traj.steps {
        let scheme = serde_json::to_value(s.scheme)?;
        let values = [
            s.hamiltonian,
            s.hamiltonian_change,
            s.energy_residual,
            s.momentum_residual,
            s.momentum,
            s.min_eta_xi,
            s.max_eta_xi,
        ];
        let values: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(s.t),
            scheme.as_str().unwrap_or_default(),
            s.iterations,
            values.join(",")
        )?;
    }
    w.flush()?;

    let mut snapshots = Vec::with_capacity(traj.states.len());
    for (k, state) in traj.states.iter().enumerate() {
        let snap = reconstruct(&grid, reference, state)?;
        let mut w = out.create(&format!("snapshots/snap_{k:06}.csv"))?;
        snap.write_csv(&mut w)?;
        w.flush()?;
        out.json(&format!("snapshots/snap_{k:06}.json"), &snap.sidecar())?;
        snapshots.push(snap);
    }
    if snapshots.len() >= 2 {
        let rows = contact_report(&snapshots, reference.params().alpha, &config.variant())?;
        let mut w = out.create("contact.csv")?;
        write_contact_csv(&mut w, &rows)?;
        w.flush()?;
    }
    let checkpoint = Checkpoint::new(&traj.final_state, &config.solver, reference);
    out.json("checkpoint.json", &checkpoint)?;

    let first = traj.reports.first().ok_or_else(|| Error::Empty("no energy report".into()))?;
    let mass_drift = traj
        .reports
        .iter()
        .fold(0.0_f64, |m, r| m.max((r.mass - first.mass).abs() / first.mass));
    let momentum_drift = traj
        .reports
        .iter()
        .fold(0.0_f64, |m, r| m.max((r.momentum - first.momentum).abs()));
    let last = traj.reports.last().unwrap_or(first);
    let (min_eta, max_eta) = traj.steps.iter().fold((first.min_eta_xi, first.max_eta_xi), |(lo, hi), s| {
        (lo.min(s.min_eta_xi), hi.max(s.max_eta_xi))
    });
    out.set("steps", traj.steps.len());
    out.set("t_final", traj.final_state.t);
    out.set("mass_drift", mass_drift);
    out.set("momentum_drift", momentum_drift);
    out.set("hamiltonian_decrease", first.hamiltonian - last.hamiltonian);
    out.set("max_energy_residual", traj.max_energy_residual());
    out.set("max_momentum_residual", traj.max_momentum_residual());
    out.set("max_hamiltonian_increase", traj.max_hamiltonian_increase());
    out.set("min_eta_xi", min_eta);
    out.set("max_eta_xi", max_eta);
    out.set("max_newton_iterations", traj.steps.iter().map(|s| s.iterations).max().unwrap_or(0));
    out.set(
        "bdf1_steps",
        traj.steps
            .iter()
            .filter(|s| s.scheme == crate::lagrangian_solver::Scheme::Bdf1)
            .count(),
    );
    out.set("contact_a", last.a);
    out.set("contact_b", last.b);
    out.halted = traj.halted.clone();
    Ok(snapshots)
}

fn run_spectrum(config: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let grid = Grid::new(config.n)?;
    let reference = ReferenceProfile::normalized(&grid);
    let ops = assemble(&grid, &reference, config.mu)?;
    let spec = spectrum(&ops)?;
    let coupling = choose_c1(&ops)?;
    let mut w = out.create("spectrum.csv")?;
    write_header(&mut w, &["re", "im"])?;
    for l in &spec.eigenvalues {
        write_row(&mut w, &[l.re, l.im])?;
    }
    w.flush()?;
    let slowest = spec.slowest();
    let doc = json!({
        "lambda_num": spec.lambda_num,
        "kernel_dim": spec.kernel_dim,
        "c1": coupling.c1,
        "kappa_max": coupling.kappa_max,
    });
    out.json("spectrum.json", &doc)?;
    out.set("n", config.n);
    out.set("lambda_num", spec.lambda_num);
    out.set("spectral_abscissa", slowest.re);
    out.set("slowest_im", slowest.im);
    out.set("kernel_dim", spec.kernel_dim);
    out.set("c1", coupling.c1);
    out.set("kappa_max", coupling.kappa_max);
    out.set("predicted_decay_rate", 2.0 * spec.lambda_num);
    Ok(())
}

/// Reads the `t` column and the requested field of a trajectory CSV; empty
/// fields are skipped.
pub fn read_series(path: &Path, field: &str) -> Result<Vec<(f64, f64)>> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(io)?;
    let headers = reader.headers().map_err(io)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::config("fit_field", format!("column '{name}' not in {}", path.display())))
    };
    let it = column("t")?;
    let wanted: Vec<usize> = if field == "e_nl" {
        vec![column("e_nl1")?, column("e_nl2")?]
    } else {
        vec![column(field)?]
    };
    let mut series = Vec::new();
    for record in reader.records() {
        let record = record.map_err(io)?;
        let value = |i: usize| -> Result<Option<f64>> {
            let text = record.get(i).unwrap_or("").trim();
            if text.is_empty() {
                return Ok(None);
            }
            text.parse()
                .map(Some)
                .map_err(|_| Error::Io(format!("{}: cannot parse '{text}'", path.display())))
        };
        let Some(t) = value(it)? else { continue };
        let parts = wanted.iter().map(|&i| value(i)).collect::<Result<Vec<_>>>()?;
        if let Some(parts) = parts.into_iter().collect::<Option<Vec<f64>>>() {
            series.push((t, parts.iter().sum()));
        }
    }
    Ok(series)
}

fn run_decay_fit(config: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let input = config.input.as_ref().expect("validated");
    let [lo, hi] = config.fit_window.expect("validated");
    let series = read_series(input, &config.fit_field)?;
    let used = series.iter().filter(|(t, _)| *t >= lo && *t <= hi).count();
    let rate = decay_fit(&series, (lo, hi))?;
    out.set("decay_rate", rate);
    out.set("samples", used);
    out.set("fit_field", &config.fit_field);
    Ok(())
}

fn run_inequalities(config: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let families = vec![
        TestFamily::Monomials { max_degree: 6 },
        TestFamily::Trigonometric { modes: 4 },
        TestFamily::RandomPolynomials {
            seed: config.seed,
            count: 16,
            degree: 6,
        },
    ];
    let mut estimates = Vec::new();
    for &[k, p] in &config.hardy {
        estimates.push(hardy_check(k, p, &families, &config.hardy_panels)?);
    }
    let (weighted, unweighted) =
        poincare_check(&families, &config.effective_grids(), &EquilibriumProfile::normalized())?;
    estimates.push(weighted);
    estimates.push(unweighted);
    out.json("inequalities.json", &estimates)?;
    for e in &estimates {
        let key = match (e.k, e.p) {
            (Some(k), Some(p)) => format!("{}_k{k}_p{p}", e.id),
            _ => e.id.clone(),
        };
        out.set(&key, e.constant);
    }
    out.set("all_refinement_stable", estimates.iter().all(|e| e.refinement_stable));
    Ok(())
}

/// Differences between successive grids of a self-convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub grids: Vec<usize>,
    /// `‖h_s^{1/2}(θ_N - θ_{2N})‖` on the coarsest nodes, one per consecutive pair.
    pub errors: Vec<f64>,
    /// `log₂(e_k / e_{k+1})`, one per consecutive pair of errors.
    pub orders: Vec<f64>,
}

/// Self-convergence of `θ(T)` over doubling grids, compared on the coarsest
/// nodes in the `h_s^{1/2}`-weighted norm.
pub fn convergence_study(config: &RunConfig) -> Result<ConvergenceStudy> {
    let grids = config.effective_grids();
    let mut finals = Vec::with_capacity(grids.len());
    for &n in &grids {
        let grid = Grid::new(n)?;
        let reference = ReferenceProfile::normalized(&grid);
        let model = build_model(config, &grid, &reference)?;
        let init = initial_state(&RunConfig { n, ..config.clone() }, &model)?;
        let ctx = ReportContext::with_c1(&model, 1.0)?;
        let quiet = SolverConfig {
            output_stride: usize::MAX,
            ..config.solver.clone()
        };
        let traj = simulate(&init, &quiet, &ctx)?;
        if let Some(e) = traj.halted {
            return Err(e);
        }
        finals.push(traj.final_state.theta);
    }
    let coarse = Grid::new(grids[0])?;
    let errors = (0..grids.len() - 1)
        .map(|k| {
            let (s, t) = (grids[k] / grids[0], grids[k + 1] / grids[0]);
            let diff: Vec<f64> = (0..coarse.len())
                .map(|i| finals[k][i * s] - finals[k + 1][i * t])
                .collect();
            coarse.weighted_norm(&diff, 0.5)
        })
        .collect::<Result<Vec<f64>>>()?;
    let orders = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    Ok(ConvergenceStudy { grids, errors, orders })
}

fn run_convergence(config: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let study = convergence_study(config)?;
    let mut w = out.create("convergence.csv")?;
    write_header(&mut w, &["n", "error"])?;
    for (n, e) in study.grids.iter().zip(&study.errors) {
        writeln!(w, "{n},{}", fmt_f64(*e))?;
    }
    w.flush()?;
    out.json("convergence.json", &study)?;
    out.set("errors", &study.errors);
    out.set("orders", &study.orders);
    out.set("order", study.orders.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(())
}
