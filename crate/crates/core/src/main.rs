use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flowcast::cli;

#[derive(Parser)]
#[command(name = "flowcast", version, about = "Next-activity prediction for event logs")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated experiment over every configured feature mode.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Per-iteration validation accuracies.
        #[arg(long)]
        iter_log: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one model on the whole log with the first feature mode.
    Train {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the next activity after every prefix of a log.
    Predict {
        model: PathBuf,
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = std::env::var("FLOWCAST_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size thread pool: {e}");
        }
    }
    let result = match Args::parse().command {
        Command::Run {
            config,
            out,
            iter_log,
            seed,
        } => cli::cmd_run(&config, &out, iter_log.as_deref(), seed).map(|report| {
            log::info!("{} rows written to {}", report.rows.len(), out.display());
        }),
        Command::Train { config, out } => cli::cmd_train(&config, &out).map(|b| {
            log::info!("model ({}) written to {}", b.mode, out.display());
        }),
        Command::Predict { model, log, out } => {
            cli::cmd_predict_to(&model, &log, out.as_deref()).map(|n| {
                log::info!("{n} predictions");
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
