use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fxlab::{CliError, ModelKind, Pipeline, PipelineConfig};

/// Exchange-rate forecasting pipeline over two country panels.
#[derive(Debug, Parser)]
#[command(name = "fxlab", version)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file and FXLAB_SEED.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// ADF, Granger and Durbin-Watson reports.
    Tests,
    /// Fit one model and write it to `<model>.json`.
    Fit {
        #[arg(value_enum)]
        model: ModelKind,
    },
    /// Score fitted models on the hold-out rows.
    Evaluate,
    /// Tests, every selected fit, then evaluation.
    Run,
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag.or(config) {
        return Ok(seed);
    }
    match std::env::var("FXLAB_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("FXLAB_SEED must be an unsigned integer, got {text:?}"))),
        Err(_) => Ok(0),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let mut config = PipelineConfig::load(&path)?;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    let seed = resolve_seed(cli.seed, config.seed)?;
    let pipeline = Pipeline::new(config, seed)?;
    let report = match cli.command {
        Command::Tests => return pipeline.cmd_tests(),
        Command::Fit { model } => return pipeline.cmd_fit(model),
        Command::Evaluate => pipeline.cmd_evaluate()?,
        Command::Run => pipeline.run()?,
    };
    for (model, m) in report {
        println!(
            "{model}: MAPE {:.4}  MPE {:.4}  RMSE {:.4}  accuracy {:.2}%",
            m.mape, m.mpe, m.rmse, m.accuracy_pct
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fxlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
