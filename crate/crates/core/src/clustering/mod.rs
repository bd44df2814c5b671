//! Per-activity clustering of event attributes.
//!
//! Each activity gets its own clustering, fitted on the one-hot encoded
//! attribute values of the training events carrying that activity. Cluster
//! labels `1..=k` of every activity share one label space whose size is the
//! largest `k` produced by any activity.

mod kmeans;
mod xmeans;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{attr_vector, bucket_events, AttributeVocab};
use crate::error::{Error, Result};
use crate::eventlog::{AttributeSchema, Case, Event};
use crate::seed;

pub use self::kmeans::{kmeans, KMeansResult};
pub use self::xmeans::{xmeans, VARIANCE_FLOOR};

/// The clustering of one activity bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketClustering {
    pub activity: String,
    /// Attribute vocabularies restricted to this bucket, in schema order.
    pub bucket_vocab: Vec<AttributeVocab>,
    pub centroids: Vec<Vec<f64>>,
}

impl BucketClustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dims(&self) -> usize {
        self.bucket_vocab.iter().map(|v| v.values.len()).sum()
    }

    /// Cluster label in `1..=k` of the nearest centroid.
    pub fn nearest(&self, event: &Event) -> usize {
        let point = attr_vector(event, &self.bucket_vocab);
        kmeans::nearest(&point, &self.centroids).0 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    per_activity: BTreeMap<String, BucketClustering>,
    max_cc: usize,
    label_count: usize,
}

impl ClusterModel {
    /// Assembles a model from fitted buckets, checking `1 <= k <= max_cc` and
    /// centroid dimensions.
    pub fn new(buckets: Vec<BucketClustering>, max_cc: usize) -> Result<ClusterModel> {
        if max_cc == 0 {
            return Err(Error::Config("max_clusters must be at least 1".into()));
        }
        let mut per_activity = BTreeMap::new();
        for bucket in buckets {
            if bucket.k() == 0 || bucket.k() > max_cc {
                return Err(Error::Shape(format!(
                    "activity `{}` has {} clusters, allowed 1..={max_cc}",
                    bucket.activity,
                    bucket.k()
                )));
            }
            let dims = bucket.dims();
            if bucket.centroids.iter().any(|c| c.len() != dims) {
                return Err(Error::Shape(format!(
                    "centroid width for activity `{}` differs from {dims}",
                    bucket.activity
                )));
            }
            per_activity.insert(bucket.activity.clone(), bucket);
        }
        let label_count = per_activity.values().map(BucketClustering::k).max().unwrap_or(1);
        Ok(ClusterModel {
            per_activity,
            max_cc,
            label_count,
        })
    }

    /// Width of the shared cluster one-hot block.
    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn max_cc(&self) -> usize {
        self.max_cc
    }

    pub fn bucket(&self, activity: &str) -> Option<&BucketClustering> {
        self.per_activity.get(activity)
    }

    pub fn buckets(&self) -> impl Iterator<Item = &BucketClustering> {
        self.per_activity.values()
    }

    /// Cluster label in `1..=label_count`, or `None` when the event's activity
    /// was never seen in training.
    pub fn assign(&self, event: &Event) -> Option<usize> {
        self.bucket(&event.activity).map(|b| b.nearest(event))
    }
}

/// Values of `attribute` among `events`, sorted.
fn bucket_vocabulary(events: &[&Event], schema: &AttributeSchema) -> Vec<AttributeVocab> {
    schema
        .attributes()
        .iter()
        .map(|name| {
            let mut values: Vec<String> = events
                .iter()
                .filter_map(|e| e.attr(name))
                .map(str::to_string)
                .collect();
            values.sort();
            values.dedup();
            AttributeVocab {
                name: name.clone(),
                values,
            }
        })
        .collect()
}

/// Fits one XMeans clustering per activity bucket of the training cases.
///
/// Buckets are clustered in parallel; each bucket's seed depends only on the
/// root seed and the activity label.
pub fn fit(
    training_cases: &[Case],
    schema: &AttributeSchema,
    max_cc: usize,
    seed: u64,
) -> Result<ClusterModel> {
    if max_cc == 0 {
        return Err(Error::Config("max_clusters must be at least 1".into()));
    }
    let buckets: HashMap<String, Vec<&Event>> = bucket_events(training_cases);
    let mut work: Vec<(&String, &Vec<&Event>)> = buckets.iter().collect();
    work.sort_by(|a, b| a.0.cmp(b.0));
    let fitted: Vec<BucketClustering> = work
        .into_par_iter()
        .map(|(activity, events)| {
            let bucket_vocab = bucket_vocabulary(events, schema);
            let dims: usize = bucket_vocab.iter().map(|v| v.values.len()).sum();
            let centroids = if dims == 0 {
                vec![Vec::new()]
            } else {
                let points: Vec<Vec<f64>> =
                    events.iter().map(|e| attr_vector(e, &bucket_vocab)).collect();
                xmeans(&points, max_cc, seed::derive_str(seed, activity)).centroids
            };
            BucketClustering {
                activity: activity.clone(),
                bucket_vocab,
                centroids,
            }
        })
        .collect();
    ClusterModel::new(fitted, max_cc)
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len() as f64;
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_rows * sum_cols / choose2(n);
    let max = (sum_rows + sum_cols) / 2.0;
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
