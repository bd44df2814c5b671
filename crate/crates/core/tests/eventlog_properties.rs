mod common;

use flowcast::eventlog::{
    filter_long_cases, parse_log, select_attributes, write_log, Event, EventLog, LogFormat,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;

use common::{at, event};

fn arb_event() -> impl Strategy<Value = Event> {
    (
        0..6usize,
        "[A-Za-z][A-Za-z ,\"]{0,8}",
        0i64..50_000,
        0u32..1000,
        proptest::collection::btree_map("(at_)[a-z]{1,3}", "[a-z0-9][a-z0-9 ,\"\n]{0,6}", 0..3),
    )
        .prop_map(|(case, activity, secs, millis, attrs)| Event {
            caseid: format!("case {case}"),
            activity,
            time: at(secs) + chrono::Duration::milliseconds(millis as i64),
            attrs,
        })
}

fn arb_log() -> impl Strategy<Value = EventLog> {
    proptest::collection::vec(arb_event(), 0..40).prop_map(EventLog::from_events)
}

proptest! {
    #[test]
    fn csv_round_trip(log in arb_log()) {
        let mut bytes = Vec::new();
        write_log(&log, &mut bytes).unwrap();
        let back = parse_log(bytes.as_slice(), LogFormat::Csv).unwrap();
        prop_assert_eq!(back, log);
    }

    #[test]
    fn filtering_is_idempotent(log in arb_log(), max in 0usize..12) {
        let once = filter_long_cases(&log, max);
        prop_assert!(once.cases.iter().all(|c| c.len() <= max));
        prop_assert_eq!(filter_long_cases(&once, max), once.clone());
        let kept = log.cases.iter().filter(|c| c.len() <= max).count();
        prop_assert_eq!(once.cases.len(), kept);
    }

    #[test]
    fn attribute_selection_ignores_event_order(log in arb_log(), seed in any::<u64>(), threshold in 0.0f64..0.5) {
        let mut events: Vec<Event> = log.events().cloned().collect();
        events.shuffle(&mut flowcast::seed::rng(seed));
        let shuffled = EventLog::from_events(events);
        prop_assert_eq!(
            select_attributes(&shuffled, threshold),
            select_attributes(&log, threshold)
        );
    }

    #[test]
    fn cases_are_time_ordered(log in arb_log()) {
        for case in &log.cases {
            prop_assert!(case.events.windows(2).all(|w| w[0].time <= w[1].time));
            prop_assert!(case.events.iter().all(|e| e.caseid == case.id));
        }
    }
}

#[test]
fn selection_threshold_is_strict() {
    // `x` has its top value on exactly 1 of 25 events (4%), `y` on 2 of 25.
    let mut events = Vec::new();
    for i in 0..25 {
        let x = format!("x{i}");
        let y = format!("y{}", i / 2);
        events.push(event("c", "a", i, &[("x", &x), ("y", &y)]));
    }
    let log = EventLog::from_events(events);
    assert_eq!(select_attributes(&log, 0.04), vec!["y".to_string()]);
}

#[test]
fn xes_subset() {
    let xes = r#"<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <string key="concept:name" value="demo"/>
  <trace>
    <string key="concept:name" value="t1"/>
    <event>
      <string key="concept:name" value="eat"/>
      <date key="time:timestamp" value="2020-01-01T10:00:00.000+02:00"/>
      <string key="food" value="salad"/>
      <int key="count" value="2"/>
    </event>
    <event>
      <string key="concept:name" value="drink"/>
      <date key="time:timestamp" value="2020-01-01T09:00:00.000+00:00"/>
      <string key="food" value="water"/>
    </event>
  </trace>
  <trace>
    <event>
      <string key="concept:name" value="eat"/>
      <date key="time:timestamp" value="2020-01-02T00:00:00Z"/>
    </event>
  </trace>
</log>"#;
    let log = parse_log(xes.as_bytes(), LogFormat::Xes).unwrap();
    assert_eq!(log.cases.len(), 2);
    assert_eq!(log.cases[0].id, "t1");
    let acts: Vec<&str> = log.cases[0].events.iter().map(|e| e.activity.as_str()).collect();
    // 10:00+02:00 is 08:00 UTC, before the 09:00 drink.
    assert_eq!(acts, vec!["eat", "drink"]);
    assert_eq!(log.cases[0].events[0].attr("food"), Some("salad"));
    assert_eq!(log.cases[0].events[0].attr("count"), Some("2"));
    assert_eq!(log.event_count(), 3);
}
