//! `recover`: run one experiment and write its CSV and SVG artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use siht_experiments::coherence_report::run_coherence_report;
use siht_experiments::masked::run_masked_2d;
use siht_experiments::offgrid::{run_offgrid_1d, run_offgrid_adaptive};
use siht_experiments::success::run_success_prob;
use siht_experiments::toy::run_toy_bounds;
use siht_experiments::{Artifacts, ExpResult, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "recover", version, about = "Structured IHT experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; defaults reproduce the published setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    ToyBounds,
    SuccessProb,
    #[command(name = "masked-2d")]
    Masked2d,
    #[command(name = "offgrid-1d")]
    Offgrid1d,
    OffgridAdaptive,
    CoherenceReport,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::ToyBounds => ExperimentKind::ToyBounds,
            Command::SuccessProb => ExperimentKind::SuccessProb,
            Command::Masked2d => ExperimentKind::Masked2d,
            Command::Offgrid1d => ExperimentKind::Offgrid1d,
            Command::OffgridAdaptive => ExperimentKind::OffgridAdaptive,
            Command::CoherenceReport => ExperimentKind::CoherenceReport,
        }
    }
}

fn run(cli: &Cli) -> ExpResult<Artifacts> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    let out = cfg.out.clone();
    Ok(match cli.command.kind() {
        ExperimentKind::ToyBounds => run_toy_bounds(&cfg, &out)?.artifacts,
        ExperimentKind::SuccessProb => run_success_prob(&cfg, &out)?.artifacts,
        ExperimentKind::Masked2d => run_masked_2d(&cfg, &out)?.artifacts,
        ExperimentKind::Offgrid1d => run_offgrid_1d(&cfg, &out)?.artifacts,
        ExperimentKind::OffgridAdaptive => run_offgrid_adaptive(&cfg, &out)?.artifacts,
        ExperimentKind::CoherenceReport => run_coherence_report(&cfg, &out)?.artifacts,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(artifacts) => {
            for f in &artifacts.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
