use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use critwave::config::{ExperimentConfig, Stage};
use critwave::error::Error;
use critwave::pipeline::{self, StageStatus};

/// Config-driven experiments for the radial defocusing quintic wave equation with a potential.
#[derive(Parser)]
#[command(name = "critwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find and polish radial steady states.
    SteadyFind { config: PathBuf },
    /// Negative spectrum, tail fits and hyperbolicity of the selected state.
    Spectrum { config: PathBuf },
    /// Nonlinear evolution with diagnostics and snapshots.
    Evolve { config: PathBuf },
    /// Solve the stability condition over a sweep.
    ManifoldShoot { config: PathBuf },
    /// Sample the manifold graph.
    Chart { config: PathBuf },
    /// Mode growth and dominance.
    Growth { config: PathBuf },
    /// Linear and nonlinear exterior-energy channels.
    ChannelScan { config: PathBuf },
    /// Energy expansion around the selected state.
    ExpansionCheck { config: PathBuf },
    /// Off-manifold perturbations and their extra emission.
    Onepass { config: PathBuf },
    /// Lorentz and reversed Strichartz norm checks.
    Norms { config: PathBuf },
    /// Print the stage graph, config fields and what an experiment verifies.
    Describe { name: String },
    /// Run every stage listed in the config.
    Run { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, path) = match cli.command {
        Command::Describe { name } => {
            return match pipeline::describe(&name) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
        Command::Run { config } => (None, config),
        Command::SteadyFind { config } => (Some(Stage::SteadyFind), config),
        Command::Spectrum { config } => (Some(Stage::Spectrum), config),
        Command::Evolve { config } => (Some(Stage::Evolve), config),
        Command::ManifoldShoot { config } => (Some(Stage::ManifoldShoot), config),
        Command::Chart { config } => (Some(Stage::Chart), config),
        Command::Growth { config } => (Some(Stage::Growth), config),
        Command::ChannelScan { config } => (Some(Stage::ChannelScan), config),
        Command::ExpansionCheck { config } => (Some(Stage::ExpansionCheck), config),
        Command::Onepass { config } => (Some(Stage::Onepass), config),
        Command::Norms { config } => (Some(Stage::Norms), config),
    };
    let cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(Error::Config(issues)) => {
            eprintln!("invalid configuration {}:", path.display());
            for issue in issues {
                eprintln!("  {issue}");
            }
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let root = pipeline::output_root_from_env();
    let result = match stage {
        Some(s) => pipeline::run_stages(&cfg, &[s], &root),
        None => pipeline::run(&cfg, &root),
    };
    let manifest = match result {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for s in &manifest.stages {
        let status = match &s.status {
            StageStatus::Completed => "done".to_string(),
            StageStatus::Skipped { reason } => format!("skipped ({reason})"),
            StageStatus::Failed { cause } => format!("FAILED: {cause}"),
        };
        println!("{:<16} {:>8.1}s  {status}", s.name, s.seconds);
        if let Some(v) = &s.verdict {
            println!("{:<16}            {v}", "");
        }
    }
    for note in &manifest.notes {
        println!("note: {note}");
    }
    println!("manifest: {}", pipeline::output_dir(&cfg, &root).join(pipeline::MANIFEST_FILE).display());
    if manifest.success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
