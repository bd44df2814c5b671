//! Case-level splitting, prefix generation and sampling.

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;

use crate::encoding::{EncodedSequence, Encoder, NextActivity};
use crate::error::{Error, Result};
use crate::eventlog::{Case, Event};
use crate::seed;

/// Prefixes shorter than this are never emitted; shorter cases are dropped.
pub const MIN_PREFIX_LEN: usize = 4;

#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Vec<Case>,
    pub test: Vec<Case>,
}

/// Randomly partitions the cases into `k` near-equal subsets; fold `i` tests
/// subset `i` and trains on the others. The first `n mod k` subsets hold one
/// extra case.
pub fn make_folds(cases: &[Case], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k == 0 || cases.len() < k {
        return Err(Error::NotEnoughCases {
            needed: k.max(1),
            got: cases.len(),
        });
    }
    let mut order: Vec<usize> = (0..cases.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    let base = cases.len() / k;
    let extra = cases.len() % k;
    let mut subsets = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let mut subset = order[start..start + size].to_vec();
        subset.sort_unstable();
        subsets.push(subset);
        start += size;
    }
    Ok((0..k)
        .map(|i| {
            let test = subsets[i].iter().map(|&c| cases[c].clone()).collect();
            let mut train_idx: Vec<usize> = subsets
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, s)| s.iter().copied())
                .collect();
            train_idx.sort_unstable();
            Fold {
                train: train_idx.iter().map(|&c| cases[c].clone()).collect(),
                test,
            }
        })
        .collect())
}

/// Random case-level split; the validation part gets
/// `floor(n * (1 - train_fraction))` cases.
pub fn split_train_validation(
    cases: &[Case],
    train_fraction: f64,
    seed: u64,
) -> (Vec<Case>, Vec<Case>) {
    let n = cases.len();
    let n_validation = ((n as f64) * (1.0 - train_fraction) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let (validation, training) = order.split_at(n_validation.min(n));
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cases[i].clone()).collect::<Vec<_>>()
    };
    (pick(training), pick(validation))
}

/// The first `len` events of `cases[case]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prefix {
    pub case: usize,
    pub len: usize,
}

impl Prefix {
    pub fn events<'a>(&self, cases: &'a [Case]) -> &'a [Event] {
        &cases[self.case].events[..self.len]
    }

    pub fn target(&self, cases: &[Case]) -> NextActivity {
        let events = &cases[self.case].events;
        match events.get(self.len) {
            Some(next) => NextActivity::Activity(next.activity.clone()),
            None => NextActivity::Finished,
        }
    }
}

/// Prefixes of length `4..=L` for every case of length `L >= 4`. The full
/// case is labelled as finished.
pub fn generate_prefixes(cases: &[Case]) -> Vec<Prefix> {
    cases
        .iter()
        .enumerate()
        .filter(|(_, c)| c.len() >= MIN_PREFIX_LEN)
        .flat_map(|(i, c)| (MIN_PREFIX_LEN..=c.len()).map(move |len| Prefix { case: i, len }))
        .collect()
}

/// Uniform sample of `cap` items without replacement when there are more
/// than `cap`; original order is kept.
pub fn sample_prefixes<T: Clone>(items: &[T], cap: usize, seed: u64) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let mut picked = index::sample(&mut seed::rng(seed), items.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

/// Encodes prefixes, encoding each event once per case.
pub fn encode_prefixes(encoder: &Encoder, cases: &[Case], prefixes: &[Prefix]) -> Vec<EncodedSequence> {
    let mut needed = vec![0usize; cases.len()];
    for p in prefixes {
        needed[p.case] = needed[p.case].max(p.len);
    }
    let encoded: Vec<Vec<Vec<u32>>> = cases
        .par_iter()
        .zip(needed.par_iter())
        .map(|(case, &n)| case.events[..n].iter().map(|e| encoder.active_positions(e)).collect())
        .collect();
    prefixes
        .iter()
        .map(|p| {
            let case = &cases[p.case];
            EncodedSequence {
                steps: encoded[p.case][..p.len].to_vec(),
                width: encoder.width(),
                target: encoder.target_index(&p.target(cases)),
                caseid: case.id.clone(),
                prefix_len: p.len,
            }
        })
        .collect()
}
