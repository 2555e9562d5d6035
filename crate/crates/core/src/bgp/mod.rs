//! BGP UPDATE records and their two interchange encodings: MRT BGP4MP
//! binary dumps ([`mrt`]) and the pipe-separated text line format ([`text`]).

pub mod mrt;
pub mod text;

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mrt::{parse_mrt, serialize_mrt, MrtReader, ParseStats, StreamAbort};
pub use text::{format_update_lines, parse_update_line, parse_update_text, write_update_text, TextParseError};

/// A record failed its structural invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {field}: {reason}")]
pub struct ValidationError {
    pub field: &'static str,
    pub reason: String,
}

impl ValidationError {
    pub(crate) fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

/// Seconds and microseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Timestamp {
    pub seconds: u32,
    pub micros: u32,
}

impl Timestamp {
    pub fn new(seconds: u32, micros: u32) -> Result<Self, ValidationError> {
        if micros >= 1_000_000 {
            return Err(ValidationError::new(
                "timestamp",
                format!("microseconds {micros} out of range"),
            ));
        }
        Ok(Self { seconds, micros })
    }

    pub fn from_seconds(seconds: u32) -> Self {
        Self { seconds, micros: 0 }
    }

    pub fn as_f64(&self) -> f64 {
        self.seconds as f64 + self.micros as f64 * 1e-6
    }
}

/// An IPv4 CIDR prefix with host bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv4Prefix {
    addr: Ipv4Addr,
    len: u8,
}

impl Ipv4Prefix {
    /// Builds a prefix, masking any host bits below `len`.
    pub fn new(addr: Ipv4Addr, len: u8) -> Result<Self, ValidationError> {
        if len > 32 {
            return Err(ValidationError::new("prefix", format!("mask length {len} exceeds 32")));
        }
        let mask = if len == 0 { 0 } else { u32::MAX << (32 - len) };
        Ok(Self {
            addr: Ipv4Addr::from(u32::from(addr) & mask),
            len,
        })
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.addr
    }

    /// Prefix length in bits.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    /// Number of address octets carried on the wire.
    pub(crate) fn wire_octets(&self) -> usize {
        (self.len as usize).div_ceil(8)
    }
}

impl fmt::Display for Ipv4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl FromStr for Ipv4Prefix {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| ValidationError::new("prefix", format!("missing '/' in {s:?}")))?;
        let addr: Ipv4Addr = addr
            .parse()
            .map_err(|_| ValidationError::new("prefix", format!("bad address in {s:?}")))?;
        let len: u8 = len
            .parse()
            .map_err(|_| ValidationError::new("prefix", format!("bad mask length in {s:?}")))?;
        Ipv4Prefix::new(addr, len)
    }
}

impl Serialize for Ipv4Prefix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ipv4Prefix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// BGP ORIGIN attribute values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Origin {
    Igp,
    Egp,
    Incomplete,
}

impl Origin {
    pub fn code(self) -> u8 {
        match self {
            Origin::Igp => 0,
            Origin::Egp => 1,
            Origin::Incomplete => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Origin::Igp),
            1 => Some(Origin::Egp),
            2 => Some(Origin::Incomplete),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Origin::Igp => "IGP",
            Origin::Egp => "EGP",
            Origin::Incomplete => "INCOMPLETE",
        }
    }
}

impl FromStr for Origin {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "IGP" => Ok(Origin::Igp),
            "EGP" => Ok(Origin::Egp),
            "INCOMPLETE" => Ok(Origin::Incomplete),
            other => Err(ValidationError::new(
                "origin",
                format!("unknown origin token {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrefixAnnouncement {
    pub prefix: Ipv4Prefix,
    pub as_path: Vec<u32>,
    pub origin: Origin,
}

impl PrefixAnnouncement {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.as_path.is_empty() {
            return Err(ValidationError::new("as_path", "empty AS path"));
        }
        if self.as_path.contains(&0) {
            return Err(ValidationError::new("as_path", "AS number 0 in path"));
        }
        Ok(())
    }
}

/// One timestamped BGP UPDATE received from a peer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BgpUpdateRecord {
    pub timestamp: Timestamp,
    pub peer_address: Ipv4Addr,
    pub peer_as: u32,
    pub announced: Vec<PrefixAnnouncement>,
    pub withdrawn: Vec<Ipv4Prefix>,
}

impl BgpUpdateRecord {
    pub fn announcement(
        timestamp: Timestamp,
        peer_address: Ipv4Addr,
        peer_as: u32,
        announcement: PrefixAnnouncement,
    ) -> Self {
        Self {
            timestamp,
            peer_address,
            peer_as,
            announced: vec![announcement],
            withdrawn: Vec::new(),
        }
    }

    pub fn withdrawal(timestamp: Timestamp, peer_address: Ipv4Addr, peer_as: u32, prefix: Ipv4Prefix) -> Self {
        Self {
            timestamp,
            peer_address,
            peer_as,
            announced: Vec::new(),
            withdrawn: vec![prefix],
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.announced.is_empty() && self.withdrawn.is_empty() {
            return Err(ValidationError::new(
                "announced",
                "record carries neither announcements nor withdrawals",
            ));
        }
        if self.timestamp.micros >= 1_000_000 {
            return Err(ValidationError::new("timestamp", "microseconds out of range"));
        }
        for ann in &self.announced {
            ann.validate()?;
        }
        Ok(())
    }
}
