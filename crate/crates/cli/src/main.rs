//! emlc: desk-scale simulator of an optically cooled LC circuit coupled
//! to a nanomechanical membrane through a wire-grid capacitor.
//!
//! Subcommands map to pipeline stages; `run` executes every stage the
//! scenario describes. Exit codes: 0 success, 1 validation error, 2
//! numerical or io failure.

mod exports;
mod pipeline;
mod scenario;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pipeline::{full_run_stages, CliError, Pipeline, Stage};

#[derive(Parser)]
#[command(
    name = "emlc",
    version,
    about = "Electromechanical LC-circuit simulator: wire-grid capacitance, bias \
             equilibrium, optical cooling and readout SNR"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the capacitance curve c(x_m) and the zeta profile
    Capacitance(RunArgs),
    /// Solve the biased working point on the curve
    Equilibrium(RunArgs),
    /// Normal modes and stability at the working point
    Modes(RunArgs),
    /// Cooling steady state (and transient, when configured)
    Cool(RunArgs),
    /// Readout SNR spectrum vs the rf baseline (Monte-Carlo optional)
    Snr(RunArgs),
    /// Sweep 1-2 parameters through equilibrium/modes/cool/snr
    Sweep(RunArgs),
    /// Every stage the scenario describes, in dependency order
    Run(RunArgs),
    /// Parse and validate the scenario; writes nothing
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; overrides the scenario's [output] directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for curve samples and sweep points; 1 keeps timing
    /// baselines reproducible
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Monte-Carlo seed; overrides mc_seed in [signal]
    #[arg(long)]
    seed: Option<u64>,
    /// FEM refinement; overrides mesh_level in [capacitance]
    #[arg(long)]
    mesh_level: Option<u32>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file
    #[arg(long)]
    scenario: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn load_scenario(path: &PathBuf) -> Result<(Vec<u8>, scenario::Scenario), CliError> {
    let raw = std::fs::read(path)?;
    let text = std::str::from_utf8(&raw)
        .map_err(|_| CliError::Scenario(vec!["scenario file is not UTF-8".into()]))?;
    let parsed = scenario::parse_scenario(text).map_err(|e| CliError::Scenario(e.faults))?;
    Ok((raw, parsed))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (args, fixed_stages): (RunArgs, Option<Vec<Stage>>) = match cli.cmd {
        Cmd::Validate(v) => {
            let (_, parsed) = load_scenario(&v.scenario)?;
            // canonical form on stdout: units normalized, defaults resolved
            print!("{}", scenario::serialize_scenario(&parsed));
            return Ok(());
        }
        Cmd::Capacitance(a) => (a, Some(vec![Stage::Capacitance])),
        Cmd::Equilibrium(a) => (a, Some(vec![Stage::Capacitance, Stage::Equilibrium])),
        Cmd::Modes(a) => (
            a,
            Some(vec![Stage::Capacitance, Stage::Equilibrium, Stage::Modes]),
        ),
        Cmd::Cool(a) => (
            a,
            Some(vec![Stage::Capacitance, Stage::Equilibrium, Stage::Cool]),
        ),
        Cmd::Snr(a) => (
            a,
            Some(vec![Stage::Capacitance, Stage::Equilibrium, Stage::Snr]),
        ),
        Cmd::Sweep(a) => (
            a,
            Some(vec![Stage::Capacitance, Stage::Equilibrium, Stage::Sweep]),
        ),
        Cmd::Run(a) => (a, None),
    };

    if args.jobs == 0 {
        return Err(CliError::Scenario(vec!["--jobs must be >= 1".into()]));
    }
    let (raw, parsed) = load_scenario(&args.scenario)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build_global()
        .map_err(|e| CliError::Scenario(vec![format!("thread pool: {e}")]))?;

    let stages = fixed_stages.unwrap_or_else(|| full_run_stages(&parsed));
    let out_dir = args.out.clone().unwrap_or_else(|| {
        PathBuf::from(
            parsed
                .output
                .as_ref()
                .map(|o| o.directory.clone())
                .unwrap_or_else(|| "emlc-out".into()),
        )
    });

    let mut pipeline = Pipeline::new(&parsed, &raw, out_dir, args.seed, args.mesh_level);
    pipeline.run(&stages)
}
