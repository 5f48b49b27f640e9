use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinseq::config::{parse_config_with, Mode};
use spinseq::parallel::{resolve_threads, RayonMap, THREADS_ENV};
use spinseq::run::{self, RunError};

/// Polarization-transfer sequence simulator.
///
/// Config defaults: units=normalized, errors={delta:0, rabi_rel:0},
/// grid Δ/Ω ∈ [-0.5, 0.5] and Ω_error/Ω ∈ [-0.3, 0.3] at 41×41,
/// halvings=[2,2], n_max=10·ω_I/A⊥, verify={random_sets:5, segments:100}.
/// See schema/config.schema.json for every field.
#[derive(Parser)]
#[command(name = "spinseq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time trace of ⟨Sz⟩ and ⟨Iz⟩ for one error setting.
    Simulate(RunArgs),
    /// Transfer heatmap over resonance offset and Rabi error.
    Scan(RunArgs),
    /// Heatmaps for halved A⊥ and ω_I.
    Multiscan(RunArgs),
    /// Pseudo-spin identities and 8-level/4-level equivalence.
    Verify(RunArgs),
    /// Effective couplings against the closed-form values.
    Astar(RunArgs),
    /// Run the mode named in the config.
    Run(RunArgs),
    /// List the available schemes.
    Schemes,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config. Without it the config is built from --set alone.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one field, e.g. --set scheme.omega_rabi=200 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output prefix; same as --set output=PREFIX.
    #[arg(long, short)]
    output: Option<String>,
    /// Worker threads for scans. Overrides SPINSEQ_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn execute(args: RunArgs, mode: Option<Mode>) -> Result<run::RunOutcome, RunError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => "{}".to_string(),
    };
    let mut sets = args.set;
    if let Some(o) = args.output {
        sets.push(format!("output={}", serde_json::Value::String(o)));
    }
    let cfg = parse_config_with(&text, &sets)?;
    let mode = match mode.or(cfg.mode) {
        Some(m) => m,
        None => return Err(spinseq::ConfigError::MissingField { path: "mode".into() }.into()),
    };
    let env = std::env::var(THREADS_ENV).ok();
    let threads = resolve_threads(args.threads, env.as_deref()).map_err(RunError::Threads)?;
    let mapper = RayonMap::new(threads).map_err(|e| RunError::Threads(e.to_string()))?;
    run::run(&cfg, mode, &mapper)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, mode) = match cli.command {
        Command::Schemes => {
            print!("{}", run::schemes_table());
            return ExitCode::SUCCESS;
        }
        Command::Simulate(a) => (a, Some(Mode::Simulate)),
        Command::Scan(a) => (a, Some(Mode::Scan)),
        Command::Multiscan(a) => (a, Some(Mode::Multiscan)),
        Command::Verify(a) => (a, Some(Mode::Verify)),
        Command::Astar(a) => (a, Some(Mode::Astar)),
        Command::Run(a) => (a, None),
    };
    match execute(args, mode) {
        Ok(out) => {
            for f in out.files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
