//! Command-line driver: closed-form detection theory, threshold calibration,
//! ROC sweeps, channel-estimation sweeps, and canned figure reproductions,
//! all emitting the flat CSV result schema.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beamjam::experiments::{
    figure_preset, parse_config, run_experiment, run_theory, run_threshold, write_csv,
    ExperimentSpec, ResultRow, Scenario, PRESET_NAMES,
};
use beamjam::{Error, Result};

#[derive(Parser)]
#[command(
    name = "beamjam-cli",
    version,
    about = "Beamspace beam-training simulator: jamming detection and two-step MMSE channel estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form false-alarm/detection probabilities on a
    /// threshold grid (no Monte Carlo).
    Theory(ConfigArgs),
    /// Calibrate detection thresholds to the configured false-alarm targets
    /// and report the theoretical operating points.
    Threshold(ConfigArgs),
    /// Run a detection scenario: empirical plus theoretical ROC curves or
    /// calibrated-threshold sweeps.
    Roc(ConfigArgs),
    /// Run an estimation scenario: inner-product quality or channel-NMSE
    /// sweeps.
    Estimate(ConfigArgs),
    /// Run a canned figure preset.
    Reproduce {
        /// Preset name: fig2, fig3, fig4, fig5, fig6, fig7, or fig8.
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration document (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Override the Monte Carlo trial count per sweep point.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Write the CSV here (falls back to the config's `output`, then stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Number of worker threads (defaults to all cores).
    #[arg(long, value_name = "W")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Theory(args) => {
            let spec = load_spec(&args, "theory", &DETECTION_SCENARIOS)?;
            emit(&run_theory(&spec)?, &args.overrides, &spec)
        }
        Command::Threshold(args) => {
            let spec = load_spec(&args, "threshold", &DETECTION_SCENARIOS)?;
            emit(&run_threshold(&spec)?, &args.overrides, &spec)
        }
        Command::Roc(args) => {
            let spec = load_spec(&args, "roc", &DETECTION_SCENARIOS)?;
            emit(&run_experiment(&spec)?, &args.overrides, &spec)
        }
        Command::Estimate(args) => {
            let spec = load_spec(&args, "estimate", &ESTIMATION_SCENARIOS)?;
            emit(&run_experiment(&spec)?, &args.overrides, &spec)
        }
        Command::Reproduce { name, overrides } => {
            let mut spec = figure_preset(&name).map_err(|e| {
                Error::Config(format!("{e}; available presets: {}", PRESET_NAMES.join(", ")))
            })?;
            apply_overrides(&mut spec, &overrides)?;
            emit(&run_experiment(&spec)?, &overrides, &spec)
        }
    }
}

const DETECTION_SCENARIOS: [Scenario; 3] = [
    Scenario::RocTheory,
    Scenario::RocCompare,
    Scenario::DetectionSweep,
];

const ESTIMATION_SCENARIOS: [Scenario; 3] = [
    Scenario::InnerProductQuality,
    Scenario::UserNmse,
    Scenario::JammerNmse,
];

fn load_spec(args: &ConfigArgs, subcommand: &str, allowed: &[Scenario]) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut spec = parse_config(&text)?;
    if !allowed.contains(&spec.scenario) {
        return Err(Error::Config(format!(
            "`{subcommand}` needs one of the scenarios {}; the config names `{}`",
            allowed
                .iter()
                .map(|s| s.id())
                .collect::<Vec<_>>()
                .join(", "),
            spec.scenario.id()
        )));
    }
    apply_overrides(&mut spec, &args.overrides)?;
    Ok(spec)
}

fn apply_overrides(spec: &mut ExperimentSpec, overrides: &Overrides) -> Result<()> {
    if let Some(trials) = overrides.trials {
        spec.trials = trials;
    }
    if let Some(seed) = overrides.seed {
        spec.seed = seed;
        spec.cfg.seed = seed;
    }
    if let Some(workers) = overrides.workers {
        if workers == 0 {
            return Err(Error::Config("--workers must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn emit(rows: &[ResultRow], overrides: &Overrides, spec: &ExperimentSpec) -> Result<()> {
    let target = overrides
        .out
        .clone()
        .or_else(|| spec.output.as_ref().map(PathBuf::from));
    match target {
        Some(path) => {
            write_to_file(rows, &path)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv(rows, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn write_to_file(rows: &[ResultRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file = fs::File::create(path)?;
    write_csv(rows, io::BufWriter::new(file))
}
