use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stirap_cli::{load, run, CliError, Experiment, RunConfig};

/// STIRAP and STIRAP-Ramsey simulations of a three-level Lambda system.
///
/// Parameters come from the experiment's defaults, then `--config`, then
/// each `--set` in order. Exit codes: 2 config, 3 numeric, 4 I/O.
#[derive(Parser, Debug)]
#[command(name = "stirap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file, or a metadata.json sidecar from an earlier run.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one key, e.g. `--set pulse.ordering=PS`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<String>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,

    /// Print the experiment's default config as TOML and exit.
    #[arg(long, global = true)]
    emit_defaults: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Population dynamics under one pulse pair.
    StirapDynamics,
    /// Phase-cycled Ramsey fringes over a delay scan.
    RamseyFringes,
    /// Accumulated phase over a detuning and Rabi-frequency grid.
    RobustnessMap,
    /// Rabi oscillation of an inhomogeneous ensemble and its spectrum.
    RabiSpectrum,
    /// Lab-frame two-tone waveform of a pulse pair.
    Waveform,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::StirapDynamics => Experiment::StirapDynamics,
            Command::RamseyFringes => Experiment::RamseyFringes,
            Command::RobustnessMap => Experiment::RobustnessMap,
            Command::RabiSpectrum => Experiment::RabiSpectrum,
            Command::Waveform => Experiment::Waveform,
        }
    }
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let experiment = Experiment::from(cli.command);
    if cli.emit_defaults {
        print!("{}", RunConfig::defaults(experiment).to_toml_for_experiment());
        return Ok(());
    }
    let mut config = load(experiment, cli.config.as_deref(), &cli.sets)?.config;
    if let Some(dir) = cli.output {
        if dir.is_empty() {
            return Err(CliError::Config(vec!["--output: must name a directory".into()]));
        }
        config.output = dir;
    }
    let threads = cli
        .threads
        .map(|n| n as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    for path in run::run(&config, threads)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
