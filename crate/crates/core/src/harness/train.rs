use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::encoding::EncodedSequence;
use crate::error::{Error, Result};
use crate::neuralnet::{
    adam_step, clip_global_norm, loss_and_gradients, predict_batch, AdamConfig, AdamState, Batch,
    Dims, GruNetwork,
};
use crate::seed;

pub const CLIP_NORM: f64 = 5.0;
const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub iterations: usize,
    pub total_epochs: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub validation_sample: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best validation accuracy (earliest on ties).
    pub network: GruNetwork,
    /// Validation accuracy after each iteration.
    pub validation_log: Vec<f64>,
    /// Mean training loss of each iteration.
    pub loss_log: Vec<f64>,
    /// 1-based iteration of the returned snapshot.
    pub best_iteration: usize,
    pub elapsed: Duration,
}

impl TrainOutcome {
    pub fn best_accuracy(&self) -> f64 {
        self.validation_log[self.best_iteration - 1]
    }
}

/// Examples trained per iteration: `ceil(total_epochs * n / iterations)`.
pub fn examples_per_iteration(n: usize, total_epochs: usize, iterations: usize) -> usize {
    (total_epochs * n).div_ceil(iterations).max(1)
}

/// Top-1 accuracy over `sequences`; sequences without a known target count
/// as misses.
pub fn accuracy(net: &GruNetwork, sequences: &[EncodedSequence]) -> Result<f64> {
    if sequences.is_empty() {
        return Ok(0.0);
    }
    let correct: Result<Vec<usize>> = sequences
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let refs: Vec<&EncodedSequence> = chunk.iter().collect();
            let preds = predict_batch(net, &refs)?;
            Ok(chunk
                .iter()
                .zip(preds)
                .filter(|(s, (p, _))| s.target == Some(*p))
                .count())
        })
        .collect();
    Ok(correct?.iter().sum::<usize>() as f64 / sequences.len() as f64)
}

/// Trains a GRU of `input x hidden x classes` with Adam and gradient
/// clipping, checking validation accuracy after every iteration.
pub fn train_model(
    params: &TrainParams,
    dims: Dims,
    training: &[EncodedSequence],
    validation: &[EncodedSequence],
    seed: u64,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    let training: Vec<&EncodedSequence> = training.iter().filter(|s| s.target.is_some()).collect();
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if validation.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let validation = crate::harness::sample_prefixes(
        validation,
        params.validation_sample,
        seed::derive(seed, &[1]),
    );
    let mut net = GruNetwork::new(dims, seed::derive(seed, &[2]));
    let mut adam = AdamState::new(
        net.params().len(),
        AdamConfig {
            lr: params.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut rng = seed::rng(seed::derive(seed, &[3]));
    let per_iteration =
        examples_per_iteration(training.len(), params.total_epochs, params.iterations);
    let mut order: Vec<usize> = (0..training.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut best = net.clone();
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut best_iteration = 0;
    let mut validation_log = Vec::with_capacity(params.iterations);
    let mut loss_log = Vec::with_capacity(params.iterations);
    for iteration in 1..=params.iterations {
        let mut remaining = per_iteration;
        let mut loss_sum = 0.0;
        while remaining > 0 {
            let take = remaining.min(params.batch_size);
            let mut picked = Vec::with_capacity(take);
            while picked.len() < take {
                if cursor == order.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                picked.push(training[order[cursor]]);
                cursor += 1;
            }
            let batch = Batch::from_sequences(&picked);
            let (loss, mut grads) = loss_and_gradients(&net, &batch)?;
            clip_global_norm(grads.values_mut(), CLIP_NORM);
            adam_step(net.params_mut(), grads.values(), &mut adam)?;
            net.check_finite()?;
            loss_sum += loss * take as f64;
            remaining -= take;
        }
        loss_log.push(loss_sum / per_iteration as f64);
        let acc = accuracy(&net, &validation)?;
        validation_log.push(acc);
        log::debug!("iteration {iteration}: loss {:.4}, validation {acc:.4}", loss_log[iteration - 1]);
        if acc > best_accuracy {
            best_accuracy = acc;
            best_iteration = iteration;
            best = net.clone();
        }
    }
    Ok(TrainOutcome {
        network: best,
        validation_log,
        loss_log,
        best_iteration,
        elapsed: start.elapsed(),
    })
}
