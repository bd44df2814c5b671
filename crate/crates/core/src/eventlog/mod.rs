//! Event-log data model, ingestion and attribute selection.
//!
//! An [`EventLog`] is a list of [`Case`]s, each a time-ordered sequence of
//! [`Event`]s. Besides the three standard attributes (`caseid`, `activity`,
//! `time`) every event carries a map of free-form string attributes.

mod csv_io;
mod time;
mod xes;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv_io::{read_csv, write_csv};
pub use self::time::{format_timestamp, parse_timestamp};
pub use self::xes::read_xes;

/// Names reserved for the standard attributes. They never appear as keys in
/// [`Event::attrs`].
pub const STANDARD_ATTRIBUTES: [&str; 3] = ["caseid", "activity", "time"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub caseid: String,
    pub activity: String,
    pub time: DateTime<Utc>,
    pub attrs: BTreeMap<String, String>,
}

impl Event {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub id: String,
    pub events: Vec<Event>,
}

impl Case {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    pub cases: Vec<Case>,
    pub attribute_names: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Xes,
}

impl LogFormat {
    /// Guesses the format from a file extension (`.csv` or `.xes`).
    pub fn from_path(path: &std::path::Path) -> Option<LogFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(LogFormat::Csv),
            "xes" => Some(LogFormat::Xes),
            _ => None,
        }
    }
}

pub fn parse_log<R: Read>(source: R, format: LogFormat) -> Result<EventLog> {
    match format {
        LogFormat::Csv => read_csv(source),
        LogFormat::Xes => read_xes(source),
    }
}

pub fn write_log<W: Write>(log: &EventLog, sink: W) -> Result<()> {
    write_csv(log, sink)
}

impl EventLog {
    /// Groups a flat event stream into cases. Cases appear in order of first
    /// occurrence; events within a case are stably sorted by timestamp, so ties
    /// keep their source order.
    pub fn from_events<I: IntoIterator<Item = Event>>(events: I) -> EventLog {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut cases: Vec<Case> = Vec::new();
        let mut attribute_names = BTreeSet::new();
        for event in events {
            attribute_names.extend(event.attrs.keys().cloned());
            let slot = *index.entry(event.caseid.clone()).or_insert_with(|| {
                cases.push(Case {
                    id: event.caseid.clone(),
                    events: Vec::new(),
                });
                cases.len() - 1
            });
            cases[slot].events.push(event);
        }
        for case in &mut cases {
            case.events.sort_by_key(|e| e.time);
        }
        EventLog {
            cases,
            attribute_names,
        }
    }

    pub fn from_cases(cases: Vec<Case>) -> EventLog {
        let attribute_names = cases
            .iter()
            .flat_map(|c| c.events.iter())
            .flat_map(|e| e.attrs.keys().cloned())
            .collect();
        EventLog {
            cases,
            attribute_names,
        }
    }

    pub fn event_count(&self) -> usize {
        self.cases.iter().map(Case::len).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.cases.iter().flat_map(|c| c.events.iter())
    }
}

/// Keeps the cases with at most `max_len` events.
pub fn filter_long_cases(log: &EventLog, max_len: usize) -> EventLog {
    let cases = log
        .cases
        .iter()
        .filter(|c| c.len() <= max_len)
        .cloned()
        .collect();
    EventLog::from_cases(cases)
}

/// Picks the attributes worth encoding.
///
/// An attribute qualifies when its most frequent value is used by strictly
/// more than `usage_threshold` of all events in the log and it takes at least
/// two distinct values. The result is sorted by name.
pub fn select_attributes(log: &EventLog, usage_threshold: f64) -> Vec<String> {
    let total = log.event_count();
    if total == 0 {
        return Vec::new();
    }
    let mut counts: BTreeMap<&str, HashMap<&str, usize>> = BTreeMap::new();
    for event in log.events() {
        for (name, value) in &event.attrs {
            *counts
                .entry(name.as_str())
                .or_default()
                .entry(value.as_str())
                .or_default() += 1;
        }
    }
    let limit = usage_threshold * total as f64;
    counts
        .into_iter()
        .filter(|(_, values)| {
            let top = values.values().copied().max().unwrap_or(0);
            values.len() >= 2 && top as f64 > limit
        })
        .map(|(name, _)| name.to_string())
        .collect()
}

/// Activity and attribute vocabularies learnt from training cases.
///
/// The positions in `activities` and in each `vocab` list define the one-hot
/// coordinates used by the encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    activities: Vec<String>,
    attributes: Vec<String>,
    vocab: BTreeMap<String, Vec<String>>,
}

impl AttributeSchema {
    /// Builds a schema with explicit orderings. Every attribute must have a
    /// vocabulary and no list may contain duplicates.
    pub fn new(
        activities: Vec<String>,
        attributes: Vec<String>,
        vocab: BTreeMap<String, Vec<String>>,
    ) -> Result<AttributeSchema> {
        fn unique(what: &str, items: &[String]) -> Result<()> {
            let set: BTreeSet<&String> = items.iter().collect();
            if set.len() != items.len() {
                return Err(Error::Schema(format!("duplicate entries in {what}")));
            }
            Ok(())
        }
        unique("activities", &activities)?;
        unique("attributes", &attributes)?;
        for name in &attributes {
            if STANDARD_ATTRIBUTES.contains(&name.as_str()) {
                return Err(Error::Schema(format!("`{name}` is a standard attribute")));
            }
            let values = vocab
                .get(name)
                .ok_or_else(|| Error::Schema(format!("no vocabulary for attribute `{name}`")))?;
            unique(name, values)?;
        }
        if vocab.len() != attributes.len() {
            return Err(Error::Schema(
                "vocabulary keys do not match attribute list".into(),
            ));
        }
        Ok(AttributeSchema {
            activities,
            attributes,
            vocab,
        })
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn vocab(&self, attribute: &str) -> &[String] {
        self.vocab.get(attribute).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sum of the vocabulary sizes over all selected attributes.
    pub fn raw_width(&self) -> usize {
        self.vocab.values().map(Vec::len).sum()
    }
}

/// Builds the schema from training cases only. Activities and attribute
/// values are ordered lexicographically.
pub fn build_schema(training_cases: &[Case], selected: &[String]) -> Result<AttributeSchema> {
    if training_cases.iter().all(Case::is_empty) {
        return Err(Error::EmptyTrainingSet);
    }
    let mut activities = BTreeSet::new();
    let mut vocab: BTreeMap<String, BTreeSet<String>> = selected
        .iter()
        .map(|name| (name.clone(), BTreeSet::new()))
        .collect();
    for event in training_cases.iter().flat_map(|c| c.events.iter()) {
        activities.insert(event.activity.clone());
        for (name, values) in vocab.iter_mut() {
            if let Some(v) = event.attrs.get(name) {
                values.insert(v.clone());
            }
        }
    }
    let mut attributes: Vec<String> = selected.to_vec();
    attributes.sort();
    attributes.dedup();
    AttributeSchema::new(
        activities.into_iter().collect(),
        attributes,
        vocab
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect(),
    )
}
