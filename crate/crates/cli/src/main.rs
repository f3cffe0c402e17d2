use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metrohpi_cli::{execute, CliError, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "metrohpi", version, about = "House-price integration, jump and contagion pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse inputs and write returns, metadata and transformed factors
    Ingest(Common),
    /// Rolling factor-model R² and integration summaries
    Integrate(Common),
    /// Lee–Mykland jump statistics and incidence
    Jumps(Common),
    /// Pairwise return and jump correlations
    Correlate(Common),
    /// Satellite-on-primary lead-lag regressions
    Contagion(Common),
    /// Figure data from earlier stage outputs
    Figures(Common),
    /// Every stage in order
    Run(Common),
    /// Synthetic panel with a ground-truth sidecar
    Synth(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this stage
    #[arg(long)]
    stage_only: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (common, stages): (Common, Vec<Stage>) = match command {
        Command::Ingest(c) => (c, vec![Stage::Ingest]),
        Command::Integrate(c) => (c, vec![Stage::Integrate]),
        Command::Jumps(c) => (c, vec![Stage::Jumps]),
        Command::Correlate(c) => (c, vec![Stage::Correlate]),
        Command::Contagion(c) => (c, vec![Stage::Contagion]),
        Command::Figures(c) => (c, vec![Stage::Figures]),
        Command::Run(c) => (c, Stage::PIPELINE.to_vec()),
        Command::Synth(c) => (c, vec![Stage::Synth]),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = common.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.synth.seed = seed;
        cfg.echo.insert("seed".into(), seed.to_string());
    }
    let stages = match common.stage_only {
        Some(name) => vec![Stage::from_name(&name).ok_or_else(|| CliError::Config(format!("unknown stage {name}")))?],
        None => stages,
    };
    execute(&cfg, &stages)
}
