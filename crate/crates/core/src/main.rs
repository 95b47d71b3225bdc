use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polyshard::experiment::{run, ExperimentConfig, Scenario};

/// Run a coded-sharding experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config's scenario.
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = ExperimentConfig::load(&cli.config).and_then(|mut cfg| {
        if let Some(seed) = cli.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(s) = cli.scenario {
            cfg.scenario = s;
            cfg.validate()?;
        }
        run(&cfg, &cli.out)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("polyshard: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
