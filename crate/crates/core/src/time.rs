//! Second-resolution UTC timestamps and duration plumbing.
//!
//! All timestamps are stored as whole seconds since the Unix epoch. On-chain
//! settlement granularity is a couple of seconds, so sub-second precision is
//! spurious; minute bucketing truncates toward zero.

use std::fmt;
use std::ops::{Add, Sub};

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const SECS_PER_MINUTE: i64 = 60;
pub const SECS_PER_HOUR: i64 = 3_600;
pub const SECS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum TimeError {
    #[error("invalid timestamp {0:?}: expected ISO-8601 UTC, e.g. 2026-01-01T00:00:00Z")]
    BadTimestamp(String),
    #[error("invalid duration {0:?}: expected <n><unit> with unit in s|m|min|h|d")]
    BadDuration(String),
}

/// A UTC timestamp at second resolution.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ts(i64);

impl Ts {
    pub fn from_unix(secs: i64) -> Self {
        Ts(secs)
    }

    pub fn unix(self) -> i64 {
        self.0
    }

    /// Start of the minute containing this timestamp (truncation toward zero).
    pub fn minute_floor(self) -> Ts {
        Ts((self.0 / SECS_PER_MINUTE) * SECS_PER_MINUTE)
    }

    pub fn parse_rfc3339(s: &str) -> Result<Self, TimeError> {
        DateTime::parse_from_rfc3339(s)
            .map(|dt| Ts(dt.timestamp()))
            .map_err(|_| TimeError::BadTimestamp(s.to_string()))
    }

    pub fn to_rfc3339(self) -> String {
        Utc.timestamp_opt(self.0, 0)
            .single()
            .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
            .unwrap_or_else(|| format!("@{}", self.0))
    }

    /// Seconds elapsed since `earlier` (negative if `self` precedes it).
    pub fn seconds_since(self, earlier: Ts) -> i64 {
        self.0 - earlier.0
    }

    /// Fractional days elapsed since `earlier`.
    pub fn days_since(self, earlier: Ts) -> f64 {
        (self.0 - earlier.0) as f64 / SECS_PER_DAY as f64
    }
}

impl fmt::Debug for Ts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ts({})", self.to_rfc3339())
    }
}

impl fmt::Display for Ts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl Add<i64> for Ts {
    type Output = Ts;
    fn add(self, secs: i64) -> Ts {
        Ts(self.0 + secs)
    }
}

impl Sub<i64> for Ts {
    type Output = Ts;
    fn sub(self, secs: i64) -> Ts {
        Ts(self.0 - secs)
    }
}

impl Sub<Ts> for Ts {
    type Output = i64;
    fn sub(self, other: Ts) -> i64 {
        self.0 - other.0
    }
}

impl Serialize for Ts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Ts {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ts::parse_rfc3339(&s).map_err(serde::de::Error::custom)
    }
}

/// Parse a duration like `30m`, `30min`, `2h`, `7d`, `90s` into seconds.
pub fn parse_duration(s: &str) -> Result<i64, TimeError> {
    let s = s.trim();
    let split = s
        .find(|c: char| !c.is_ascii_digit())
        .ok_or_else(|| TimeError::BadDuration(s.to_string()))?;
    let (num, unit) = s.split_at(split);
    let n: i64 = num
        .parse()
        .map_err(|_| TimeError::BadDuration(s.to_string()))?;
    let mult = match unit.trim() {
        "s" => 1,
        "m" | "min" => SECS_PER_MINUTE,
        "h" => SECS_PER_HOUR,
        "d" => SECS_PER_DAY,
        _ => return Err(TimeError::BadDuration(s.to_string())),
    };
    if n <= 0 {
        return Err(TimeError::BadDuration(s.to_string()));
    }
    Ok(n * mult)
}

/// Canonical label for a duration: `30m`, `2h`, `24h`, `7d`.
///
/// Durations under an hour render in minutes, under 48 h in hours (so one day
/// renders as `24h`), and anything longer in days; non-integral leftovers fall
/// back to raw seconds.
pub fn format_duration(secs: i64) -> String {
    if secs % SECS_PER_MINUTE != 0 {
        return format!("{secs}s");
    }
    if secs < SECS_PER_HOUR {
        return format!("{}m", secs / SECS_PER_MINUTE);
    }
    if secs % SECS_PER_HOUR != 0 {
        return format!("{}m", secs / SECS_PER_MINUTE);
    }
    if secs < 48 * SECS_PER_HOUR {
        return format!("{}h", secs / SECS_PER_HOUR);
    }
    if secs % SECS_PER_DAY == 0 {
        return format!("{}d", secs / SECS_PER_DAY);
    }
    format!("{}h", secs / SECS_PER_HOUR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        let t = Ts::parse_rfc3339("2026-01-01T00:00:00Z").unwrap();
        assert_eq!(t.unix(), 1767225600);
        assert_eq!(t.to_rfc3339(), "2026-01-01T00:00:00Z");
        let with_offset = Ts::parse_rfc3339("2026-01-01T02:00:00+02:00").unwrap();
        assert_eq!(with_offset, t);
    }

    #[test]
    fn minute_floor_truncates() {
        let t = Ts::from_unix(1767225659);
        assert_eq!(t.minute_floor().unix(), 1767225600);
        assert_eq!(t.minute_floor().minute_floor(), t.minute_floor());
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration("30m").unwrap(), 1800);
        assert_eq!(parse_duration("30min").unwrap(), 1800);
        assert_eq!(parse_duration("2h").unwrap(), 7200);
        assert_eq!(parse_duration("7d").unwrap(), 604800);
        assert_eq!(parse_duration("90s").unwrap(), 90);
        assert!(parse_duration("h").is_err());
        assert!(parse_duration("0m").is_err());
        assert!(parse_duration("5w").is_err());

        assert_eq!(format_duration(1800), "30m");
        assert_eq!(format_duration(7200), "2h");
        assert_eq!(format_duration(86400), "24h");
        assert_eq!(format_duration(604800), "7d");
    }

    #[test]
    fn rejects_garbage_timestamps() {
        assert!(Ts::parse_rfc3339("yesterday").is_err());
        assert!(Ts::parse_rfc3339("2026-13-01T00:00:00Z").is_err());
    }
}
