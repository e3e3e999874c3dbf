use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::Parser;
use mstate::pipeline::{exit_code, run_stage, PipelineConfig, Stage};

/// Intraday market state detection pipeline.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Stage to run.
    #[arg(value_parser = PossibleValuesParser::new(Stage::ALL.map(Stage::name)))]
    subcommand: String,
    /// Plain-text `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bar width in minutes: 5, 15, 30 or 60.
    #[arg(long)]
    scale: Option<u32>,
    /// Artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Count transitions between the last period of a day and the first of the next.
    #[arg(long)]
    include_overnight: bool,
    /// Worker threads for parallel stages.
    #[arg(long)]
    workers: Option<usize>,
}

fn run(cli: Cli) -> mstate::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.scale = cli.scale.unwrap_or(cfg.scale);
    cfg.out = cli.out.unwrap_or(cfg.out);
    cfg.include_overnight |= cli.include_overnight;
    cfg.workers = cli.workers.unwrap_or(cfg.workers);
    let stage: Stage = cli.subcommand.parse()?;
    let manifest = run_stage(stage, &cfg)?;
    log::info!("{} finished in {} ms", manifest.stage, manifest.elapsed_ms);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
