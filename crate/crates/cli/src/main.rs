use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rdse_cli::commands;

/// Resilient distributed state estimation: feasibility analysis and
/// simulation of sensor networks tracking an unstable linear plant under
/// Byzantine attacks.
#[derive(Parser)]
#[command(name = "rdse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a scenario file for feasibility: source sets per unstable
    /// eigen block, robustness of the network, and source counts.
    Check {
        /// scenario file
        scenario: PathBuf,
        /// additionally search for minimal critical sets, pair-cut
        /// witnesses, and the tolerable-f upper bound (exponential; small
        /// networks only)
        #[arg(long)]
        exhaustive: bool,
    },
    /// Run a scenario and write trace.csv, summary.json, and one DAG dump
    /// per consensus eigen block.
    Simulate {
        /// scenario file
        scenario: PathBuf,
        /// output directory (created if missing)
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// run even if the static feasibility check fails
        #[arg(long)]
        force: bool,
        /// override the scenario's random seed
        #[arg(long)]
        seed: Option<u64>,
        /// override the scenario's round count
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Sample a random network from a [generate] spec file and write it as
    /// an edge list.
    Generate {
        /// file holding a [generate] section
        spec: PathBuf,
        /// output network file
        #[arg(long, default_value = "network.txt")]
        out: PathBuf,
        /// override the spec's random seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run threshold-r bootstrap percolation on a network file.
    Percolate {
        /// network file (edge list, as written by `generate`)
        network: PathBuf,
        /// comma-separated 1-based seed nodes; defaults to the file's
        /// `sources` line
        #[arg(long)]
        sources: Option<String>,
        /// activation threshold
        #[arg(short, long)]
        r: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let result = match &cli.command {
        Command::Check {
            scenario,
            exhaustive,
        } => commands::check(scenario, *exhaustive, &mut stdout),
        Command::Simulate {
            scenario,
            out_dir,
            force,
            seed,
            rounds,
        } => commands::simulate(scenario, out_dir, *force, *seed, *rounds, &mut stdout),
        Command::Generate { spec, out, seed } => {
            commands::generate(spec, out, *seed, &mut stdout)
        }
        Command::Percolate {
            network,
            sources,
            r,
        } => commands::percolate(network, sources.as_deref(), *r, &mut stdout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
