//! Human-friendly duration encoding for configuration files.
//!
//! Accepts a bare number of seconds, a string with a unit suffix
//! (`"500ms"`, `"10s"`, `"5m"`, `"4h"`), or a map of unit counts such as
//! `{"seconds": 60}` or `{"hours": 1, "minutes": 30}`.

use std::time::Duration;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize)]
#[serde(untagged)]
enum Encoded {
    Seconds { seconds: u64 },
    Nanos { nanoseconds: u64 },
}

pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    let enc = if d.subsec_nanos() == 0 {
        Encoded::Seconds { seconds: d.as_secs() }
    } else {
        Encoded::Nanos {
            nanoseconds: crate::time::duration_nanos(*d),
        }
    };
    enc.serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
    let value = serde_json::Value::deserialize(d)?;
    parse_value(&value).map_err(D::Error::custom)
}

/// Parses any accepted duration encoding.
pub fn parse_value(value: &serde_json::Value) -> Result<Duration, String> {
    use serde_json::Value;
    match value {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| "duration must be a number".to_owned())
            .and_then(|secs| from_secs(secs, 1.0)),
        Value::String(s) => parse_str(s),
        Value::Object(map) => {
            if map.is_empty() {
                return Err("duration map is empty".into());
            }
            let mut total = Duration::ZERO;
            for (unit, amount) in map {
                let amount = amount
                    .as_f64()
                    .ok_or_else(|| format!("duration field `{unit}` must be a number"))?;
                let part = from_secs(amount, unit_seconds(unit)?)?;
                total = total.checked_add(part).ok_or("duration overflow")?;
            }
            Ok(total)
        }
        _ => Err("expected a duration: seconds, \"<n><unit>\" or {\"seconds\": n}".into()),
    }
}

fn unit_seconds(unit: &str) -> Result<f64, String> {
    Ok(match unit {
        "nanoseconds" | "ns" => 1e-9,
        "microseconds" | "us" => 1e-6,
        "milliseconds" | "ms" => 1e-3,
        "seconds" | "s" => 1.0,
        "minutes" | "m" => 60.0,
        "hours" | "h" => 3600.0,
        other => return Err(format!("unknown duration unit `{other}`")),
    })
}

fn parse_str(s: &str) -> Result<Duration, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let amount: f64 = num.parse().map_err(|_| format!("invalid duration `{s}`"))?;
    let unit = if unit.is_empty() { "s" } else { unit.trim() };
    from_secs(amount, unit_seconds(unit)?)
}

fn from_secs(amount: f64, scale: f64) -> Result<Duration, String> {
    let secs = amount * scale;
    if !secs.is_finite() || !(0.0..=1e12).contains(&secs) {
        return Err(format!("duration out of range: {amount}"));
    }
    // Round to whole nanoseconds so "0.1s" is exactly 100ms.
    Ok(Duration::from_nanos((secs * 1e9).round() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn accepted_forms() {
        assert_eq!(parse_value(&json!(60)), Ok(Duration::from_secs(60)));
        assert_eq!(parse_value(&json!({"seconds": 60})), Ok(Duration::from_secs(60)));
        assert_eq!(parse_value(&json!({"hours": 1, "minutes": 30})), Ok(Duration::from_secs(5400)));
        assert_eq!(parse_value(&json!("4h")), Ok(Duration::from_secs(14_400)));
        assert_eq!(parse_value(&json!("250ms")), Ok(Duration::from_millis(250)));
        assert_eq!(parse_value(&json!("0.1s")), Ok(Duration::from_millis(100)));
    }

    #[test]
    fn rejected_forms() {
        assert!(parse_value(&json!(-1)).is_err());
        assert!(parse_value(&json!("ten seconds")).is_err());
        assert!(parse_value(&json!({"fortnights": 1})).is_err());
        assert!(parse_value(&json!({})).is_err());
        assert!(parse_value(&json!([1])).is_err());
        assert!(parse_value(&json!("1e400s")).is_err());
    }
}
