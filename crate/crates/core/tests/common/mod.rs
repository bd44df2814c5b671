#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, TimeZone, Utc};
use flowcast::eventlog::{Event, EventLog};
use rand::Rng;

pub fn at(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_600_000_000 + secs, 0).unwrap()
}

pub fn event(case: &str, activity: &str, secs: i64, attrs: &[(&str, &str)]) -> Event {
    Event {
        caseid: case.to_string(),
        activity: activity.to_string(),
        time: at(secs),
        attrs: attrs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect::<BTreeMap<_, _>>(),
    }
}

pub const SIGNAL_ACTIVITIES: [&str; 3] = ["A", "B", "C"];

/// Next activity after an event carrying value `v{i}`; `v5` ends the case.
pub fn signal_next(value: usize) -> Option<&'static str> {
    match value {
        0 | 3 => Some("A"),
        1 | 4 => Some("B"),
        2 => Some("C"),
        _ => None,
    }
}

/// Cases of 6–10 events over activities A/B/C with one attribute `x`. Every
/// non-final event draws `v0..v4` uniformly and the next activity is
/// determined by it; the final event carries `v5`.
pub fn signal_log(cases: usize, seed: u64) -> EventLog {
    let mut rng = flowcast::seed::rng(seed);
    let mut events = Vec::new();
    for c in 0..cases {
        let id = format!("case{c:04}");
        let len = rng.gen_range(6..=10);
        let mut activity = SIGNAL_ACTIVITIES[rng.gen_range(0..3)];
        for j in 0..len {
            let value = if j + 1 == len { 5 } else { rng.gen_range(0..5) };
            let t = (c * 100 + j) as i64;
            events.push(event(&id, activity, t, &[("x", &format!("v{value}"))]));
            if let Some(next) = signal_next(value) {
                activity = next;
            }
        }
    }
    EventLog::from_events(events)
}

/// Best achievable accuracy without attributes, scored on the log itself.
/// In the signal log the attribute values are drawn independently, so the
/// activity history says nothing about the next activity beyond the prefix
/// length and the current activity; prefixes are grouped by those two and
/// each group predicts its majority target.
pub fn attribute_blind_bayes_rate(log: &EventLog) -> f64 {
    let mut groups: HashMap<(usize, &str), HashMap<&str, usize>> = HashMap::new();
    let mut total = 0usize;
    for case in &log.cases {
        let acts: Vec<&str> = case.events.iter().map(|e| e.activity.as_str()).collect();
        for p in 4..=acts.len() {
            let target = acts.get(p).copied().unwrap_or("FINISHED");
            *groups.entry((p, acts[p - 1])).or_default().entry(target).or_default() += 1;
            total += 1;
        }
    }
    let best: usize = groups.values().map(|g| g.values().copied().max().unwrap()).sum();
    best as f64 / total as f64
}
