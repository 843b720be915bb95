use std::fmt;
use std::str::FromStr;

use crate::error::Error;

const MAX_NAMESPACE_LEN: usize = 32;

/// Persistent identifier of a digital object, rendered as `namespace:serial`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pid {
    namespace: String,
    serial: u64,
}

impl Pid {
    pub fn new(namespace: &str, serial: u64) -> Result<Self, Error> {
        validate_namespace(namespace)?;
        Ok(Self {
            namespace: namespace.to_owned(),
            serial,
        })
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn serial(&self) -> u64 {
        self.serial
    }
}

pub fn validate_namespace(ns: &str) -> Result<(), Error> {
    let mut chars = ns.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {
            ns.len() <= MAX_NAMESPACE_LEN
                && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidPid(format!("bad namespace {ns:?}")))
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.namespace, self.serial)
    }
}

impl FromStr for Pid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ns, serial) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidPid(format!("{s:?} has no ':' separator")))?;
        // Leading zeros or signs would break the render/parse round trip.
        let canonical_digits = !serial.is_empty()
            && serial.bytes().all(|b| b.is_ascii_digit())
            && (serial == "0" || !serial.starts_with('0'));
        if !canonical_digits {
            return Err(Error::InvalidPid(format!("{s:?} has a malformed serial")));
        }
        let serial = serial
            .parse::<u64>()
            .map_err(|_| Error::InvalidPid(format!("{s:?} serial out of range")))?;
        Pid::new(ns, serial)
    }
}

impl serde::Serialize for Pid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Pid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
