//! Minimal XES reader.
//!
//! Understands `<trace>` and `<event>` elements with typed attribute children
//! (`string`, `date`, `int`, `float`, `boolean`, `id`). `concept:name` on a
//! trace is the case id, on an event the activity. `time:timestamp` is the
//! event time. Every other event-level attribute is kept as text. Global
//! declarations, extensions, classifiers, trace attributes other than the
//! name, and nested attribute lists are skipped.

use std::collections::BTreeMap;
use std::io::{BufReader, Read};

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::time::parse_timestamp;
use super::{Event, EventLog};
use crate::error::{Error, Result};

const VALUE_TAGS: [&[u8]; 6] = [b"string", b"date", b"int", b"float", b"boolean", b"id"];

#[derive(Default)]
struct PendingEvent {
    activity: Option<String>,
    time: Option<String>,
    attrs: BTreeMap<String, String>,
}

fn key_value(element: &BytesStart<'_>) -> Result<Option<(String, String)>> {
    let mut key = None;
    let mut value = None;
    for attr in element.attributes() {
        let attr = attr.map_err(|e| Error::Xes(e.to_string()))?;
        let text = attr
            .unescape_value()
            .map_err(|e| Error::Xes(e.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(text),
            b"value" => value = Some(text),
            _ => {}
        }
    }
    Ok(key.zip(value))
}

pub fn read_xes<R: Read>(source: R) -> Result<EventLog> {
    let mut reader = Reader::from_reader(BufReader::new(source));
    reader.config_mut().trim_text(true);

    let mut buf = Vec::new();
    let mut events = Vec::new();
    let mut trace_index = 0usize;
    let mut in_trace = false;
    let mut trace_name: Option<String> = None;
    let mut trace_events: Vec<PendingEvent> = Vec::new();
    let mut current: Option<PendingEvent> = None;
    // Depth of open attribute elements; only direct children of a trace or
    // event are read.
    let mut nested = 0usize;

    loop {
        let position = reader.buffer_position();
        let xml = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::Xes(format!("at byte {position}: {e}")))?;
        let (element, is_empty) = match &xml {
            XmlEvent::Start(e) => (Some(e.clone()), false),
            XmlEvent::Empty(e) => (Some(e.clone()), true),
            _ => (None, false),
        };
        if let Some(element) = element {
            let name = element.local_name();
            let name = name.as_ref();
            if name == b"trace" && !is_empty {
                in_trace = true;
                trace_name = None;
                trace_events.clear();
                nested = 0;
            } else if name == b"event" && in_trace && !is_empty && nested == 0 {
                current = Some(PendingEvent::default());
            } else if VALUE_TAGS.contains(&name) || name == b"list" || name == b"container" {
                if nested == 0 && in_trace && VALUE_TAGS.contains(&name) {
                    if let Some((key, value)) = key_value(&element)? {
                        match current.as_mut() {
                            Some(ev) => match key.as_str() {
                                "concept:name" => ev.activity = Some(value),
                                "time:timestamp" => ev.time = Some(value),
                                _ => {
                                    ev.attrs.insert(key, value);
                                }
                            },
                            None if key == "concept:name" => trace_name = Some(value),
                            None => {}
                        }
                    }
                }
                if !is_empty {
                    nested += 1;
                }
            }
        }
        match xml {
            XmlEvent::End(e) => {
                let name = e.local_name();
                let name = name.as_ref();
                if nested > 0 && (VALUE_TAGS.contains(&name) || name == b"list" || name == b"container") {
                    nested -= 1;
                } else if name == b"event" {
                    if let Some(ev) = current.take() {
                        trace_events.push(ev);
                    }
                } else if name == b"trace" {
                    in_trace = false;
                    let caseid = trace_name
                        .take()
                        .unwrap_or_else(|| format!("trace-{trace_index}"));
                    trace_index += 1;
                    for (i, pending) in trace_events.drain(..).enumerate() {
                        let activity = pending.activity.filter(|a| !a.is_empty()).ok_or_else(|| {
                            Error::Parse {
                                row: i as u64 + 1,
                                message: format!("event without concept:name in trace `{caseid}`"),
                            }
                        })?;
                        let raw = pending.time.ok_or_else(|| Error::Parse {
                            row: i as u64 + 1,
                            message: format!("event without time:timestamp in trace `{caseid}`"),
                        })?;
                        let time = parse_timestamp(&raw).ok_or_else(|| Error::Parse {
                            row: i as u64 + 1,
                            message: format!("malformed timestamp `{raw}` in trace `{caseid}`"),
                        })?;
                        let mut attrs = pending.attrs;
                        for reserved in super::STANDARD_ATTRIBUTES {
                            attrs.remove(reserved);
                        }
                        events.push(Event {
                            caseid: caseid.clone(),
                            activity,
                            time,
                            attrs,
                        });
                    }
                }
            }
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(EventLog::from_events(events))
}
