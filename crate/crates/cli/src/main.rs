//! Command-line driver: reads an optional JSON configuration, applies flag
//! overrides, runs the selected workflow and reports the result.
//!
//! Success prints the command, output directory, configuration hash and
//! summary (or, for `equilibrium`, the sampled profile CSV) on standard output. Failures print a structured error JSON on
//! standard error and exit with status 2 for configuration errors and 1 for
//! runtime errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use capillary_sw::cli::{run, Command, PerturbationFamily, RunConfig};
use capillary_sw::lagrangian_solver::Scheme;
use capillary_sw::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "capillary-sw", version, about = "Viscous capillary droplet simulations in Lagrangian coordinates")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the equilibrium droplet as CSV (xi, h, h1, h2, h3, h4, ms).
    Equilibrium(Overrides),
    /// Near-equilibrium simulation with trajectory, snapshots and checkpoint.
    Simulate(Overrides),
    /// Spectrum of the linearized operator and energy-pair coupling.
    Spectrum(Overrides),
    /// Exponential decay fit of a trajectory column.
    DecayFit(Overrides),
    /// Empirical Hardy and Poincaré constants.
    Inequalities(Overrides),
    /// Self-convergence study over doubling grids.
    Convergence(Overrides),
    /// Simulation from a non-equilibrium initial height.
    GeneralData(Overrides),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    ImplicitMidpoint,
    Bdf1,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Zero,
    Even,
    Odd,
    Mixed,
    Random,
}

/// Flags shared by all subcommands; each one overrides the configuration file.
#[derive(Args)]
struct Overrides {
    /// JSON configuration document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of grid intervals.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, allow_negative_numbers = true)]
    newton_tol: Option<f64>,
    #[arg(long)]
    newton_max_iter: Option<usize>,
    /// Steps between stored states and reports.
    #[arg(long)]
    output_stride: Option<usize>,
    /// Viscosity.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Contact-line friction; selects the dynamic contact angle.
    #[arg(long, allow_negative_numbers = true)]
    nu: Option<f64>,
    /// Navier-slip coefficient.
    #[arg(long, allow_negative_numbers = true)]
    slip_inv: Option<f64>,
    /// Initial perturbation family.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Initial perturbation amplitude.
    #[arg(long, allow_negative_numbers = true)]
    amplitude: Option<f64>,
    /// Keep the mean of the initial perturbation.
    #[arg(long)]
    keep_mean: bool,
    /// CSV height file with columns x, h.
    #[arg(long)]
    height_file: Option<PathBuf>,
    /// Evolve the linearized equation.
    #[arg(long)]
    linearized: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Decay-fit window.
    #[arg(long, num_args = 2, value_names = ["T_LO", "T_HI"], allow_negative_numbers = true)]
    fit_window: Option<Vec<f64>>,
    /// Trajectory column to fit (`e_nl` is E_NL,1 + E_NL,2).
    #[arg(long)]
    fit_field: Option<String>,
    /// Trajectory CSV for decay-fit.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
    /// Hardy quadrature panel counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    hardy_panels: Option<Vec<usize>>,
}

impl Overrides {
    fn apply(self, command: Command) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        c.command = command;
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.dt {
            c.solver.dt = v;
        }
        if let Some(v) = self.t_end {
            c.solver.t_end = v;
        }
        if let Some(v) = self.scheme {
            c.solver.scheme = match v {
                SchemeArg::ImplicitMidpoint => Scheme::ImplicitMidpoint,
                SchemeArg::Bdf1 => Scheme::Bdf1,
            };
        }
        if let Some(v) = self.newton_tol {
            c.solver.newton_tol = v;
        }
        if let Some(v) = self.newton_max_iter {
            c.solver.newton_max_iter = v;
        }
        if let Some(v) = self.output_stride {
            c.solver.output_stride = v;
        }
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if self.nu.is_some() {
            c.nu = self.nu;
        }
        if let Some(v) = self.slip_inv {
            c.slip_inv = v;
        }
        if let Some(v) = self.family {
            c.initial.family = match v {
                FamilyArg::Zero => PerturbationFamily::Zero,
                FamilyArg::Even => PerturbationFamily::Even,
                FamilyArg::Odd => PerturbationFamily::Odd,
                FamilyArg::Mixed => PerturbationFamily::Mixed,
                FamilyArg::Random => PerturbationFamily::Random,
            };
        }
        if let Some(v) = self.amplitude {
            c.initial.amplitude = v;
        }
        if self.keep_mean {
            c.initial.zero_mean = false;
        }
        if self.height_file.is_some() {
            c.height_file = self.height_file;
        }
        if self.linearized {
            c.linearized = true;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.output_dir {
            c.output_dir = v;
        }
        if let Some(v) = self.fit_window {
            c.fit_window = Some([v[0], v[1]]);
        }
        if let Some(v) = self.fit_field {
            c.fit_field = v;
        }
        if self.input.is_some() {
            c.input = self.input;
        }
        if let Some(v) = self.grids {
            c.grids = v;
        }
        if let Some(v) = self.hardy_panels {
            c.hardy_panels = v;
        }
        Ok(c)
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", e.to_json());
    if matches!(e, Error::Config { .. }) {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, overrides) = match cli.command {
        Cmd::Equilibrium(o) => (Command::Equilibrium, o),
        Cmd::Simulate(o) => (Command::Simulate, o),
        Cmd::Spectrum(o) => (Command::Spectrum, o),
        Cmd::DecayFit(o) => (Command::DecayFit, o),
        Cmd::Inequalities(o) => (Command::Inequalities, o),
        Cmd::Convergence(o) => (Command::Convergence, o),
        Cmd::GeneralData(o) => (Command::GeneralData, o),
    };
    let config = match overrides.apply(command) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let outcome = match run(&config) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let text = if command == Command::Equilibrium {
        match std::fs::read_to_string(outcome.dir.join("equilibrium.csv")) {
            Ok(text) => text,
            Err(e) => return fail(&e.into()),
        }
    } else {
        let brief = serde_json::json!({
            "command": outcome.manifest.command,
            "output_dir": outcome.dir,
            "config_hash": outcome.manifest.config_hash,
            "summary": outcome.manifest.summary,
        });
        format!("{brief:#}\n")
    };
    // A closed pipe on standard output is not an error of the run.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    match &outcome.halted {
        Some(e) => fail(e),
        None => ExitCode::SUCCESS,
    }
}
