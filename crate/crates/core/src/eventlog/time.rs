use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};

/// Parses `YYYY-MM-DDTHH:MM:SS(.fff)?(Z|±HH:MM)?`. A missing offset means UTC.
/// A space is accepted in place of the `T`. Sub-millisecond digits are
/// truncated.
pub fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    let text = text.trim();
    if text.len() < 19 {
        return None;
    }
    let normalized;
    let text = if text.as_bytes()[10] == b' ' {
        normalized = format!("{}T{}", &text[..10], &text[11..]);
        normalized.as_str()
    } else {
        text
    };
    let parsed = match DateTime::parse_from_rfc3339(text) {
        Ok(dt) => dt.with_timezone(&Utc),
        Err(_) => NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f")
            .ok()?
            .and_utc(),
    };
    Some(parsed.trunc_subsecs(3))
}

pub fn format_timestamp(time: &DateTime<Utc>) -> String {
    time.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}
