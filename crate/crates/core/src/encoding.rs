//! Turning events and prefixes into fixed-width binary input vectors.
//!
//! Every event becomes the concatenation of an activity one-hot block and,
//! depending on the [`FeatureMode`], a raw attribute block (one one-hot per
//! selected attribute over its global vocabulary) and/or a cluster block (the
//! one-hot of the event's per-activity cluster label).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::eventlog::{AttributeSchema, Case, Event};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("value `{0}` is not in the universe")]
pub struct NotInUniverse(pub String);

/// 1-based position of `value` in `universe`.
pub fn codify(value: &str, universe: &[String]) -> std::result::Result<usize, NotInUniverse> {
    universe
        .iter()
        .position(|u| u == value)
        .map(|i| i + 1)
        .ok_or_else(|| NotInUniverse(value.to_string()))
}

pub fn onehot(value: &str, universe: &[String]) -> std::result::Result<Vec<f64>, NotInUniverse> {
    let index = codify(value, universe)?;
    let mut v = vec![0.0; universe.len()];
    v[index - 1] = 1.0;
    Ok(v)
}

pub fn concat<V: AsRef<[f64]>>(vectors: &[V]) -> Vec<f64> {
    vectors.iter().flat_map(|v| v.as_ref().iter().copied()).collect()
}

/// Groups training events by activity label.
pub fn bucket_events(training_cases: &[Case]) -> HashMap<String, Vec<&Event>> {
    let mut buckets: HashMap<String, Vec<&Event>> = HashMap::new();
    for event in training_cases.iter().flat_map(|c| c.events.iter()) {
        buckets.entry(event.activity.clone()).or_default().push(event);
    }
    buckets
}

/// The ordered values one attribute takes within some event set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeVocab {
    pub name: String,
    pub values: Vec<String>,
}

/// One-hot encodes every attribute of `event` against `vocab` and
/// concatenates the pieces. Missing or unknown values give zero blocks.
pub fn attr_vector(event: &Event, vocab: &[AttributeVocab]) -> Vec<f64> {
    let blocks: Vec<Vec<f64>> = vocab
        .iter()
        .map(|v| {
            event
                .attr(&v.name)
                .and_then(|value| onehot(value, &v.values).ok())
                .unwrap_or_else(|| vec![0.0; v.values.len()])
        })
        .collect();
    concat(&blocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Activity only.
    None,
    /// Activity plus cluster label, with at most the given number of clusters
    /// per activity.
    Clust(usize),
    /// Activity plus raw one-hot attribute values.
    Raw,
    /// Raw block followed by cluster block.
    Both(usize),
}

impl FeatureMode {
    pub fn max_clusters(&self) -> Option<usize> {
        match *self {
            FeatureMode::Clust(n) | FeatureMode::Both(n) => Some(n),
            FeatureMode::None | FeatureMode::Raw => None,
        }
    }

    pub fn uses_raw(&self) -> bool {
        matches!(self, FeatureMode::Raw | FeatureMode::Both(_))
    }

    pub fn uses_clusters(&self) -> bool {
        self.max_clusters().is_some()
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureMode::None => write!(f, "None"),
            FeatureMode::Clust(n) => write!(f, "Clust{n}"),
            FeatureMode::Raw => write!(f, "Raw"),
            FeatureMode::Both(n) => write!(f, "Both{n}"),
        }
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<FeatureMode> {
        let lower = s.to_ascii_lowercase();
        let count = |rest: &str| {
            rest.parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::Config(format!("bad cluster count in feature mode `{s}`")))
        };
        match lower.as_str() {
            "none" => Ok(FeatureMode::None),
            "raw" => Ok(FeatureMode::Raw),
            _ if lower.starts_with("clust") => Ok(FeatureMode::Clust(count(&lower[5..])?)),
            _ if lower.starts_with("both") => Ok(FeatureMode::Both(count(&lower[4..])?)),
            _ => Err(Error::Config(format!("unknown feature mode `{s}`"))),
        }
    }
}

/// Expected next activity of a prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextActivity {
    Activity(String),
    Finished,
}

/// A prefix encoded for the network. Steps are stored as the positions of
/// their 1-entries; [`EncodedSequence::dense`] expands them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub steps: Vec<Vec<u32>>,
    pub width: usize,
    /// Class index; `activities.len()` is the finished class. `None` when
    /// the true next activity is unknown to the schema.
    pub target: Option<usize>,
    pub caseid: String,
    pub prefix_len: usize,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `T x D` matrix of the sequence, row-major.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        self.steps
            .iter()
            .map(|active| {
                let mut row = vec![0.0; self.width];
                for &i in active {
                    row[i as usize] = 1.0;
                }
                row
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    schema: AttributeSchema,
    mode: FeatureMode,
    clusters: Option<ClusterModel>,
    width: usize,
    activity_index: HashMap<String, u32>,
    raw_index: Vec<(String, HashMap<String, u32>)>,
    raw_offset: usize,
    cluster_offset: usize,
}

impl Encoder {
    /// Clust and Both modes require a cluster model; other modes ignore it.
    pub fn new(
        schema: AttributeSchema,
        mode: FeatureMode,
        clusters: Option<ClusterModel>,
    ) -> Result<Encoder> {
        let clusters = if mode.uses_clusters() {
            Some(clusters.ok_or_else(|| {
                Error::Config(format!("feature mode {mode} needs a cluster model"))
            })?)
        } else {
            None
        };
        let activity_index = schema
            .activities()
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i as u32))
            .collect();
        let raw_offset = schema.activities().len();
        let mut next = raw_offset;
        let mut raw_index = Vec::new();
        if mode.uses_raw() {
            for name in schema.attributes() {
                let values = schema
                    .vocab(name)
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.clone(), (next + i) as u32))
                    .collect();
                next += schema.vocab(name).len();
                raw_index.push((name.clone(), values));
            }
        }
        let cluster_offset = next;
        let width = cluster_offset + clusters.as_ref().map_or(0, ClusterModel::label_count);
        Ok(Encoder {
            schema,
            mode,
            clusters,
            width,
            activity_index,
            raw_index,
            raw_offset,
            cluster_offset,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn clusters(&self) -> Option<&ClusterModel> {
        self.clusters.as_ref()
    }

    /// Number of output classes: every activity plus the finished class.
    pub fn classes(&self) -> usize {
        self.schema.activities().len() + 1
    }

    pub fn finished_class(&self) -> usize {
        self.schema.activities().len()
    }

    /// Positions of the 1-entries of the event's input vector, ascending.
    pub fn active_positions(&self, event: &Event) -> Vec<u32> {
        let mut active = Vec::with_capacity(2 + self.raw_index.len());
        let activity = self.activity_index.get(&event.activity).copied();
        if let Some(i) = activity {
            active.push(i);
        }
        for (name, values) in &self.raw_index {
            if let Some(&i) = event.attr(name).and_then(|v| values.get(v)) {
                active.push(i);
            }
        }
        if let (Some(model), Some(_)) = (&self.clusters, activity) {
            if let Some(label) = model.assign(event) {
                active.push((self.cluster_offset + label - 1) as u32);
            }
        }
        debug_assert!(self.raw_offset <= self.cluster_offset);
        active
    }

    /// Dense `{0,1}` input vector of length [`Encoder::width`].
    pub fn encode_event(&self, event: &Event) -> Vec<f64> {
        let mut v = vec![0.0; self.width];
        for i in self.active_positions(event) {
            v[i as usize] = 1.0;
        }
        v
    }

    pub fn target_index(&self, next: &NextActivity) -> Option<usize> {
        match next {
            NextActivity::Finished => Some(self.finished_class()),
            NextActivity::Activity(a) => self.activity_index.get(a).map(|&i| i as usize),
        }
    }

    pub fn encode_prefix(&self, prefix: &[Event], next: &NextActivity) -> EncodedSequence {
        assert!(!prefix.is_empty(), "prefix must not be empty");
        EncodedSequence {
            steps: prefix.iter().map(|e| self.active_positions(e)).collect(),
            width: self.width,
            target: self.target_index(next),
            caseid: prefix[0].caseid.clone(),
            prefix_len: prefix.len(),
        }
    }

    /// Label printed for a class index.
    pub fn class_label(&self, class: usize) -> &str {
        self.schema
            .activities()
            .get(class)
            .map(String::as_str)
            .unwrap_or("FINISHED")
    }
}
