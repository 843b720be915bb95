use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::Error;

const FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// UTC instant with one-second resolution, rendered as `YYYY-MM-DDThh:mm:ss`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_unix(secs: i64) -> Self {
        Self(secs)
    }

    pub const fn unix(self) -> i64 {
        self.0
    }

    pub fn now() -> Self {
        Self(Utc::now().timestamp())
    }

    pub fn plus_seconds(self, secs: i64) -> Self {
        Self(self.0 + secs)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::<Utc>::from_timestamp(self.0, 0) {
            Some(dt) => write!(f, "{}", dt.format(FORMAT)),
            None => write!(f, "@{}", self.0),
        }
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    /// Accepts the canonical form, optionally suffixed with `Z`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.strip_suffix('Z').unwrap_or(s);
        // chrono tolerates some non-padded fields; the wire format does not.
        if body.len() != 19 {
            return Err(Error::InvalidTimestamp(s.to_owned()));
        }
        let naive = NaiveDateTime::parse_from_str(body, FORMAT)
            .map_err(|_| Error::InvalidTimestamp(s.to_owned()))?;
        let ts = Self(naive.and_utc().timestamp());
        if ts.to_string() != body {
            return Err(Error::InvalidTimestamp(s.to_owned()));
        }
        Ok(ts)
    }
}

impl serde::Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Source of "now" for mutations; swapped for a manual clock in tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::now()
    }
}

/// Clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        Self(AtomicI64::new(start.unix()))
    }

    pub fn set(&self, ts: Timestamp) {
        self.0.store(ts.unix(), Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) -> Timestamp {
        Timestamp(self.0.fetch_add(secs, Ordering::SeqCst) + secs)
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(Ordering::SeqCst))
    }
}
