use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::time::{format_timestamp, parse_timestamp};
use super::{Event, EventLog};
use crate::error::{Error, Result};

/// Reads a log from CSV with a header row containing at least `caseid`,
/// `activity` and `time`. All other columns are event attributes; empty cells
/// are omitted.
pub fn read_csv<R: Read>(source: R) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing mandatory column `{name}`")))
    };
    let case_col = column("caseid")?;
    let activity_col = column("activity")?;
    let time_col = column("time")?;
    let attr_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| ![case_col, activity_col, time_col].contains(i))
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();

    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let activity = record.get(activity_col).unwrap_or("").to_string();
        if activity.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty activity".into(),
            });
        }
        let raw_time = record.get(time_col).unwrap_or("");
        let time = parse_timestamp(raw_time).ok_or_else(|| Error::Parse {
            row,
            message: format!("malformed timestamp `{raw_time}`"),
        })?;
        let attrs: BTreeMap<String, String> = attr_cols
            .iter()
            .filter_map(|(i, name)| {
                let value = record.get(*i)?;
                (!value.is_empty()).then(|| (name.clone(), value.to_string()))
            })
            .collect();
        events.push(Event {
            caseid: record.get(case_col).unwrap_or("").to_string(),
            activity,
            time,
            attrs,
        });
    }
    Ok(EventLog::from_events(events))
}

/// Writes the log as CSV: `caseid,activity,time` followed by the attribute
/// columns in name order.
pub fn write_csv<W: Write>(log: &EventLog, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec!["caseid", "activity", "time"];
    header.extend(log.attribute_names.iter().map(String::as_str));
    writer.write_record(&header)?;
    for event in log.events() {
        let mut row = vec![
            event.caseid.clone(),
            event.activity.clone(),
            format_timestamp(&event.time),
        ];
        row.extend(
            log.attribute_names
                .iter()
                .map(|name| event.attrs.get(name).cloned().unwrap_or_default()),
        );
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
