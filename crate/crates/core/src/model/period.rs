use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::{EpochMs, ModelError};

pub const MS_PER_MINUTE: i64 = 60_000;
pub const MS_PER_HOUR: i64 = 3_600_000;
pub const MS_PER_DAY: i64 = 86_400_000;

/// Granularity of calendar-aligned (UTC) sub-periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubPeriod {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "1d")]
    D1,
    #[serde(rename = "1h")]
    H1,
    #[serde(rename = "1min")]
    Min1,
}

impl SubPeriod {
    /// Window length in ms; `None` for the whole period.
    pub const fn length_ms(self) -> Option<i64> {
        match self {
            SubPeriod::Full => None,
            SubPeriod::D1 => Some(MS_PER_DAY),
            SubPeriod::H1 => Some(MS_PER_HOUR),
            SubPeriod::Min1 => Some(MS_PER_MINUTE),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SubPeriod::Full => "full",
            SubPeriod::D1 => "1d",
            SubPeriod::H1 => "1h",
            SubPeriod::Min1 => "1min",
        }
    }

    /// Start of the UTC-aligned window containing `ts`.
    pub fn floor(self, ts: EpochMs) -> Option<EpochMs> {
        self.length_ms().map(|len| ts.div_euclid(len) * len)
    }
}

impl fmt::Display for SubPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SubPeriod {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(SubPeriod::Full),
            "1d" | "d1" => Ok(SubPeriod::D1),
            "1h" | "h1" => Ok(SubPeriod::H1),
            "1min" | "1m" | "min1" => Ok(SubPeriod::Min1),
            other => Err(ModelError::Parse(format!("unknown sub-period {other:?}"))),
        }
    }
}

/// A closed millisecond range `[start, end]`, in UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub start: EpochMs,
    pub end: EpochMs,
    pub subperiod: SubPeriod,
}

impl PeriodSpec {
    pub fn new(start: EpochMs, end: EpochMs, subperiod: SubPeriod) -> Result<Self, ModelError> {
        if start >= end {
            return Err(ModelError::InvalidPeriod(format!("start {start} must precede end {end}")));
        }
        Ok(PeriodSpec { start, end, subperiod })
    }

    pub fn contains(&self, ts: EpochMs) -> bool {
        self.start <= ts && ts <= self.end
    }

    /// True when `[from, until]` intersects the period.
    pub fn overlaps(&self, from: EpochMs, until: EpochMs) -> bool {
        from <= self.end && until >= self.start
    }

    pub fn with_subperiod(self, subperiod: SubPeriod) -> Self {
        PeriodSpec { subperiod, ..self }
    }

    /// Splits the period into calendar-aligned windows of `self.subperiod`,
    /// clipped to the period bounds. Each window is tagged with that
    /// granularity. `Full` yields the period itself.
    pub fn windows(&self) -> Vec<PeriodSpec> {
        let Some(len) = self.subperiod.length_ms() else {
            return vec![*self];
        };
        let mut out = Vec::new();
        let mut w = self.start.div_euclid(len) * len;
        while w <= self.end {
            let start = w.max(self.start);
            let end = (w + len - 1).min(self.end);
            out.push(PeriodSpec { start, end, subperiod: self.subperiod });
            w += len;
        }
        out
    }

    /// Index of the window (as produced by [`PeriodSpec::windows`]) holding `ts`.
    pub fn window_index(&self, ts: EpochMs) -> Option<usize> {
        if !self.contains(ts) {
            return None;
        }
        match self.subperiod.length_ms() {
            None => Some(0),
            Some(len) => Some((ts.div_euclid(len) - self.start.div_euclid(len)) as usize),
        }
    }

    /// Parses `start..end`, where each side is epoch milliseconds, an
    /// RFC 3339 timestamp, or a `YYYY-MM-DD` date. A bare date on the right
    /// is inclusive of the whole day.
    pub fn parse_range(s: &str, subperiod: SubPeriod) -> Result<Self, ModelError> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| ModelError::Parse(format!("period {s:?} is not of the form start..end")))?;
        let start = parse_instant(a.trim(), false)?;
        let end = parse_instant(b.trim(), true)?;
        PeriodSpec::new(start, end, subperiod)
    }
}

fn parse_instant(s: &str, end_of_day: bool) -> Result<EpochMs, ModelError> {
    if let Ok(ms) = s.parse::<i64>() {
        return Ok(ms);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc).timestamp_millis());
    }
    let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| ModelError::Parse(format!("cannot parse instant {s:?}")))?;
    let midnight = date.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp_millis();
    Ok(if end_of_day { midnight + MS_PER_DAY - 1 } else { midnight })
}

/// Formats epoch ms as RFC 3339 UTC with millisecond precision.
pub fn format_ts(ts: EpochMs) -> String {
    DateTime::<Utc>::from_timestamp_millis(ts)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string())
        .unwrap_or_else(|| ts.to_string())
}
