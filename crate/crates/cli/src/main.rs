//! `optomech` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration error, 3 numerical
//! or solver error.

mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use optomech::{config_to_string, load_config};
use serde::Serialize;

use commands::Output;

#[derive(Debug, Parser)]
#[command(name = "optomech", version, about = "Simulate a multimode optomechanical microwave-to-optical transducer")]
struct Cli {
    /// Device description (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files and the run manifest; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads for grid and sweep parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classical steady state of a pump-driven configuration.
    Steady,
    /// Build a linear model and report its stability.
    Model(commands::ModelArgs),
    /// Polariton frequencies and compositions along a detuning sweep.
    Spectrum(commands::SpectrumArgs),
    /// Spectral density of one bare mode.
    Psd(commands::PsdArgs),
    /// Covariance evolution of the static three-mode model from thermal states.
    Evolve(commands::EvolveArgs),
    /// Receive, ramp and detect sequence from the `[protocol]` section.
    Protocol(commands::ProtocolArgs),
    /// Added noise, conversion frequencies and timing of the detector.
    Budget(commands::BudgetArgs),
    /// Compare the Gaussian engine with a Fock-truncated master equation.
    Oracle(commands::OracleArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Model(_) => "model",
            Command::Spectrum(_) => "spectrum",
            Command::Psd(_) => "psd",
            Command::Evolve(_) => "evolve",
            Command::Protocol(_) => "protocol",
            Command::Budget(_) => "budget",
            Command::Oracle(_) => "oracle",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<optomech::Error> for CliError {
    fn from(e: optomech::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    args: Vec<String>,
    config_path: String,
    /// Resolved configuration, re-serialized.
    config: String,
    format: Format,
    outputs: Vec<String>,
    version: &'static str,
    wall_time_s: f64,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn emit(cli: &Cli, output: &Output, config_text: String, started: Instant) -> Result<(), CliError> {
    let name = cli.command.name();
    let files: Vec<(String, String)> = match cli.format {
        Format::Csv => output
            .tables
            .iter()
            .map(|t| (format!("{}.csv", t.name), t.to_csv()))
            .collect(),
        Format::Json => {
            let text = serde_json::to_string_pretty(&output.json).expect("JSON values serialize");
            vec![(format!("{name}.json"), text + "\n")]
        }
    };
    let Some(dir) = &cli.out else {
        let many = files.len() > 1;
        for (file, text) in &files {
            if many {
                println!("# {file}");
            }
            print!("{text}");
            if many {
                println!();
            }
        }
        return Ok(());
    };
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    for (file, text) in &files {
        write_file(&dir.join(file), text)?;
    }
    let manifest = RunManifest {
        subcommand: name,
        args: std::env::args().skip(1).collect(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        config: config_text,
        format: cli.format,
        outputs: files.iter().map(|(f, _)| f.clone()).collect(),
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join("manifest.json"), &(text + "\n"))?;
    eprintln!("wrote {} file(s) and manifest.json to {}", files.len(), dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<Option<String>, CliError> {
    let started = Instant::now();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("missing --config <path>".into()))?;
    let config = load_config(path)?;

    let output = match &cli.command {
        Command::Steady => commands::steady(&config)?,
        Command::Model(a) => commands::model(&config, a)?,
        Command::Spectrum(a) => commands::spectrum(&config, a)?,
        Command::Psd(a) => commands::power_spectrum(&config, a)?,
        Command::Evolve(a) => commands::evolve(&config, a)?,
        Command::Protocol(a) => commands::protocol(&config, a)?,
        Command::Budget(a) => commands::budget(&config, a)?,
        Command::Oracle(a) => commands::oracle(&config, a)?,
    };
    emit(cli, &output, config_to_string(&config), started)?;
    Ok(output.failure)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => {
            eprintln!("error: {failure}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
