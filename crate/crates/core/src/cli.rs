//! Command implementations behind the `flowcast` binary.

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bundle::{ModelBundle, TrainingMetadata};
use crate::error::Error;
use crate::eventlog::{parse_log, select_attributes, LogFormat};
use crate::harness::{
    self, fit_network, load_log, prepare_fold, ExperimentConfig, ExperimentReport,
};
use crate::neuralnet::predict_batch;
use crate::seed;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BAD_CONFIG: i32 = 2;
pub const EXIT_MISSING_DATASET: i32 = 3;

pub const PREDICTIONS_HEADER: &str = "caseid,prefix_length,predicted,probability";

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure {
            code: EXIT_FAILURE,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Loads and validates a config; any problem with the file itself is a
/// configuration error, a missing dataset has its own exit code.
pub fn load_config(path: &Path, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path).map_err(|e| Failure {
        code: EXIT_BAD_CONFIG,
        message: format!("{}: {e}", path.display()),
    })?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if !config.dataset.is_file() {
        return Err(Failure {
            code: EXIT_MISSING_DATASET,
            message: format!("dataset `{}` not found", config.dataset.display()),
        });
    }
    Ok(config)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure {
        code: EXIT_FAILURE,
        message: format!("cannot create {}: {e}", path.display()),
    })
}

/// Runs the full cross-validated experiment and writes the results CSV.
/// Fails after writing when any fold × mode job failed.
pub fn cmd_run(
    config_path: &Path,
    out: &Path,
    iteration_log: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<ExperimentReport> {
    let config = load_config(config_path, seed)?;
    let report = harness::run_experiment(&config)?;
    harness::write_results_csv(&report, create(out)?)?;
    if let Some(path) = iteration_log {
        harness::write_iteration_log(&report, create(path)?)?;
    }
    let failed: Vec<String> = report
        .failures()
        .map(|r| format!("fold {} {}: {}", r.fold, r.mode, r.error.as_deref().unwrap_or("")))
        .collect();
    if !failed.is_empty() {
        return Err(Failure {
            code: EXIT_FAILURE,
            message: format!("{} job(s) failed:\n  {}", failed.len(), failed.join("\n  ")),
        });
    }
    Ok(report)
}

/// Trains one model on the whole log with the first configured feature mode
/// and writes it to `out`.
pub fn cmd_train(config_path: &Path, out: &Path) -> CliResult<ModelBundle> {
    let config = load_config(config_path, None)?;
    let mode = config.modes()?[0];
    let log = load_log(&config)?;
    let selected = select_attributes(&log, config.usage_threshold);
    let root = seed::derive(config.seed, &[2]);
    let prepared = prepare_fold(&config, &log.cases, &selected, mode, root)?;
    let outcome = fit_network(&config, &prepared, seed::derive(root, &[5]))?;
    log::info!(
        "{mode}: best validation accuracy {:.4} at iteration {}",
        outcome.best_accuracy(),
        outcome.best_iteration
    );
    let bundle = ModelBundle {
        schema: prepared.encoder.schema().clone(),
        mode,
        clusters: prepared.encoder.clusters().cloned(),
        metadata: TrainingMetadata {
            seed: config.seed,
            config_hash: config.hash(),
            created_at: chrono::Utc::now().to_rfc3339(),
            best_iteration: outcome.best_iteration,
            validation_accuracy: outcome.best_accuracy(),
        },
        network: outcome.network,
    };
    bundle.save(out)?;
    Ok(bundle)
}

/// Predicts the next activity after every prefix of every case in the log.
pub fn cmd_predict<W: Write>(model: &Path, log_path: &Path, sink: W) -> CliResult<usize> {
    let bundle = ModelBundle::load(model)?;
    let encoder = bundle.encoder()?;
    let format = LogFormat::from_path(log_path).unwrap_or(LogFormat::Csv);
    let file = File::open(log_path).map_err(|e| Failure {
        code: EXIT_MISSING_DATASET,
        message: format!("cannot open {}: {e}", log_path.display()),
    })?;
    let log = parse_log(BufReader::new(file), format)?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PREDICTIONS_HEADER.split(',')).map_err(Error::from)?;
    let mut rows = 0;
    for case in &log.cases {
        let steps: Vec<Vec<u32>> = case.events.iter().map(|e| encoder.active_positions(e)).collect();
        let sequences: Vec<_> = (1..=case.len())
            .map(|len| crate::encoding::EncodedSequence {
                steps: steps[..len].to_vec(),
                width: encoder.width(),
                target: None,
                caseid: case.id.clone(),
                prefix_len: len,
            })
            .collect();
        let refs: Vec<_> = sequences.iter().collect();
        for (seq, (class, probs)) in sequences.iter().zip(predict_batch(&bundle.network, &refs)?) {
            w.write_record([
                seq.caseid.clone(),
                seq.prefix_len.to_string(),
                encoder.class_label(class).to_string(),
                format!("{:.6}", probs[class]),
            ])
            .map_err(Error::from)?;
            rows += 1;
        }
    }
    w.flush().map_err(Error::from)?;
    Ok(rows)
}

/// Writes predictions to `out`, or to stdout when absent.
pub fn cmd_predict_to(model: &Path, log_path: &Path, out: Option<&Path>) -> CliResult<usize> {
    match out {
        Some(path) => cmd_predict(model, log_path, create(path)?),
        None => cmd_predict(model, log_path, io::stdout().lock()),
    }
}
