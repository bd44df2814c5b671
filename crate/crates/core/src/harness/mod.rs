//! Cross-validated next-activity experiments.
//!
//! Each fold splits its training cases 75/25 into training and validation,
//! fits the schema and clusterings on the training part only, trains a GRU
//! for a fixed number of iterations keeping the best validation snapshot, and
//! scores it on the fold's test cases.

mod config;
mod data;
mod stats;
mod train;

use std::fs::File;
use std::io::{BufReader, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::clustering;
use crate::encoding::{EncodedSequence, Encoder, FeatureMode};
use crate::error::{Error, Result};
use crate::eventlog::{build_schema, filter_long_cases, parse_log, select_attributes, Case, EventLog};
use crate::neuralnet::{Dims, GruNetwork};
use crate::seed;

pub use self::config::ExperimentConfig;
pub use self::data::{
    encode_prefixes, generate_prefixes, make_folds, sample_prefixes, split_train_validation, Fold,
    Prefix, MIN_PREFIX_LEN,
};
pub use self::stats::{mean, sample_stdev, ttest_one_tailed};
pub use self::train::{
    accuracy, examples_per_iteration, train_model, TrainOutcome, TrainParams, CLIP_NORM,
};

/// Header of the results file.
pub const RESULTS_HEADER: &str =
    "dataset,features,fold,success_rate,input_vector_size,cl,training_time_s,prediction_time_s";
/// Header of the iteration log.
pub const ITERATION_HEADER: &str = "fold,mode,iteration,validation_accuracy";

/// Reads the configured log and drops cases longer than `max_case_len`.
pub fn load_log(config: &ExperimentConfig) -> Result<EventLog> {
    let format = config.log_format()?;
    let file = File::open(&config.dataset)?;
    let log = parse_log(BufReader::new(file), format)?;
    Ok(filter_long_cases(&log, config.max_case_len))
}

impl ExperimentConfig {
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            iterations: self.iterations,
            total_epochs: self.total_epochs,
            batch_size: self.batch_size,
            hidden_dim: self.hidden_dim,
            learning_rate: self.learning_rate,
            validation_sample: self.validation_sample,
        }
    }
}

/// Encoder and encoded training/validation prefixes for one fold and mode.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub encoder: Encoder,
    pub training: Vec<EncodedSequence>,
    pub validation: Vec<EncodedSequence>,
}

/// Splits `train_cases`, fits schema and clusterings on the training part,
/// and encodes sampled training and validation prefixes.
pub fn prepare_fold(
    config: &ExperimentConfig,
    train_cases: &[Case],
    selected: &[String],
    mode: FeatureMode,
    fold_seed: u64,
) -> Result<PreparedFold> {
    let (training, validation) =
        split_train_validation(train_cases, config.train_fraction, seed::derive(fold_seed, &[1]));
    let schema = build_schema(&training, selected)?;
    let clusters = match mode.max_clusters() {
        Some(n) => Some(clustering::fit(&training, &schema, n, seed::derive(fold_seed, &[2]))?),
        None => None,
    };
    let encoder = Encoder::new(schema, mode, clusters)?;
    let train_prefixes = sample_prefixes(
        &generate_prefixes(&training),
        config.max_train_prefixes,
        seed::derive(fold_seed, &[3]),
    );
    let validation_prefixes = sample_prefixes(
        &generate_prefixes(&validation),
        config.max_validation_prefixes,
        seed::derive(fold_seed, &[4]),
    );
    Ok(PreparedFold {
        training: encode_prefixes(&encoder, &training, &train_prefixes),
        validation: encode_prefixes(&encoder, &validation, &validation_prefixes),
        encoder,
    })
}

/// Trains a network on a prepared fold.
pub fn fit_network(config: &ExperimentConfig, prepared: &PreparedFold, seed: u64) -> Result<TrainOutcome> {
    let dims = Dims {
        input: prepared.encoder.width(),
        hidden: config.hidden_dim,
        output: prepared.encoder.classes(),
    };
    train_model(
        &config.train_params(),
        dims,
        &prepared.training,
        &prepared.validation,
        seed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub success_rate: f64,
    pub prediction_time: f64,
    pub predictions: usize,
}

/// Predicts every (sampled) prefix of the test cases; success rate is top-1
/// accuracy, timing includes encoding.
pub fn test_model(
    net: &GruNetwork,
    encoder: &Encoder,
    test_cases: &[Case],
    max_test_traces: usize,
    seed: u64,
) -> Result<TestOutcome> {
    let start = Instant::now();
    let prefixes = sample_prefixes(&generate_prefixes(test_cases), max_test_traces, seed);
    if prefixes.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let sequences = encode_prefixes(encoder, test_cases, &prefixes);
    let success_rate = accuracy(net, &sequences)?;
    Ok(TestOutcome {
        success_rate,
        prediction_time: start.elapsed().as_secs_f64(),
        predictions: sequences.len(),
    })
}

/// One fold × mode result.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub mode: FeatureMode,
    /// 1-based fold number.
    pub fold: usize,
    pub success_rate: f64,
    pub input_vector_size: Option<usize>,
    /// Width of the cluster block; 0 for modes without clusters.
    pub cl: Option<usize>,
    pub training_time: f64,
    pub prediction_time: f64,
    pub iteration_log: Vec<f64>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Mean and sample standard deviation of one mode over its successful folds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub dataset: String,
    pub mode: FeatureMode,
    pub folds: usize,
    pub mean: [f64; 5],
    pub stdev: [f64; 5],
}

impl ModeSummary {
    fn from_rows(dataset: &str, mode: FeatureMode, rows: &[&ResultRow]) -> ModeSummary {
        let ok: Vec<&&ResultRow> = rows.iter().filter(|r| r.succeeded()).collect();
        let columns: [Vec<f64>; 5] = [
            ok.iter().map(|r| r.success_rate).collect(),
            ok.iter().map(|r| r.input_vector_size.unwrap_or(0) as f64).collect(),
            ok.iter().map(|r| r.cl.unwrap_or(0) as f64).collect(),
            ok.iter().map(|r| r.training_time).collect(),
            ok.iter().map(|r| r.prediction_time).collect(),
        ];
        ModeSummary {
            dataset: dataset.to_string(),
            mode,
            folds: ok.len(),
            mean: columns.clone().map(|c| if c.is_empty() { f64::NAN } else { mean(&c) }),
            stdev: columns.map(|c| sample_stdev(&c)),
        }
    }

    pub fn success_rate(&self) -> f64 {
        self.mean[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Ordered by configured mode, then fold.
    pub rows: Vec<ResultRow>,
    /// One per mode, in configured order.
    pub summaries: Vec<ModeSummary>,
}

impl ExperimentReport {
    pub fn summary(&self, mode: FeatureMode) -> Option<&ModeSummary> {
        self.summaries.iter().find(|s| s.mode == mode)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| !r.succeeded())
    }
}

/// Loads the configured log and runs every fold × mode.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let log = load_log(config)?;
    run_on_log(config, &log)
}

/// Runs every fold × mode on an already loaded log. Jobs run in parallel;
/// a failing job yields a row carrying its error instead of aborting.
pub fn run_on_log(config: &ExperimentConfig, log: &EventLog) -> Result<ExperimentReport> {
    config.validate()?;
    let modes = config.modes()?;
    let dataset = config.dataset_name();
    let selected = select_attributes(log, config.usage_threshold);
    log::info!(
        "{dataset}: {} cases, {} events, attributes {:?}",
        log.cases.len(),
        log.event_count(),
        selected
    );
    let folds = make_folds(&log.cases, config.folds, seed::derive(config.seed, &[0]))?;
    let jobs: Vec<(usize, usize)> = (0..modes.len())
        .flat_map(|m| (0..folds.len()).map(move |f| (m, f)))
        .collect();
    let rows: Vec<ResultRow> = jobs
        .into_par_iter()
        .map(|(m, f)| {
            let row = run_job(config, &dataset, &folds[f], f, &selected, modes[m]);
            match &row.error {
                Some(e) => log::error!("fold {} {}: {e}", row.fold, row.mode),
                None => log::info!(
                    "fold {} {}: success rate {:.4}",
                    row.fold,
                    row.mode,
                    row.success_rate
                ),
            }
            row
        })
        .collect();
    let summaries = modes
        .iter()
        .map(|&mode| {
            let of_mode: Vec<&ResultRow> = rows.iter().filter(|r| r.mode == mode).collect();
            ModeSummary::from_rows(&dataset, mode, &of_mode)
        })
        .collect();
    Ok(ExperimentReport { rows, summaries })
}

fn run_job(
    config: &ExperimentConfig,
    dataset: &str,
    fold: &Fold,
    fold_index: usize,
    selected: &[String],
    mode: FeatureMode,
) -> ResultRow {
    let mut row = ResultRow {
        dataset: dataset.to_string(),
        mode,
        fold: fold_index + 1,
        success_rate: f64::NAN,
        input_vector_size: None,
        cl: None,
        training_time: f64::NAN,
        prediction_time: f64::NAN,
        iteration_log: Vec::new(),
        error: None,
    };
    let fold_seed = seed::derive(config.seed, &[1, fold_index as u64]);
    let start = Instant::now();
    let result = (|| -> Result<()> {
        let prepared = prepare_fold(config, &fold.train, selected, mode, fold_seed)?;
        row.input_vector_size = Some(prepared.encoder.width());
        row.cl = Some(prepared.encoder.clusters().map_or(0, |c| c.label_count()));
        let outcome = fit_network(config, &prepared, seed::derive(fold_seed, &[5]))?;
        row.training_time = start.elapsed().as_secs_f64();
        row.iteration_log = outcome.validation_log;
        let test = test_model(
            &outcome.network,
            &prepared.encoder,
            &fold.test,
            config.max_test_traces,
            seed::derive(fold_seed, &[6]),
        )?;
        row.success_rate = test.success_rate;
        row.prediction_time = test.prediction_time;
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
        row.success_rate = f64::NAN;
    }
    if !config.record_timings {
        row.training_time = 0.0;
        row.prediction_time = 0.0;
    }
    row
}

fn float(x: f64) -> String {
    format!("{x:.6}")
}

fn count(x: Option<usize>) -> String {
    x.map_or_else(|| "NaN".to_string(), |n| n.to_string())
}

/// Writes the results CSV: every fold row of a mode followed by its mean and
/// stdev rows.
pub fn write_results_csv<W: Write>(report: &ExperimentReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(RESULTS_HEADER.split(','))?;
    for summary in &report.summaries {
        for row in report.rows.iter().filter(|r| r.mode == summary.mode) {
            w.write_record([
                row.dataset.clone(),
                row.mode.to_string(),
                row.fold.to_string(),
                float(row.success_rate),
                count(row.input_vector_size),
                count(row.cl),
                float(row.training_time),
                float(row.prediction_time),
            ])?;
        }
        for (label, values) in [("mean", &summary.mean), ("stdev", &summary.stdev)] {
            let mut record = vec![summary.dataset.clone(), summary.mode.to_string(), label.to_string()];
            record.extend(values.iter().map(|&v| float(v)));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes per-iteration validation accuracies of every fold row.
pub fn write_iteration_log<W: Write>(report: &ExperimentReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(ITERATION_HEADER.split(','))?;
    for row in &report.rows {
        for (i, acc) in row.iteration_log.iter().enumerate() {
            w.write_record([
                row.fold.to_string(),
                row.mode.to_string(),
                (i + 1).to_string(),
                float(*acc),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
