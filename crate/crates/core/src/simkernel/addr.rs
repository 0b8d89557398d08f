//! IPv4-style addressing for the simulated network. Dotted-quad semantics
//! only; no real routing.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AddrParseError {
    #[error("expected dotted quad, got `{0}`")]
    BadQuad(String),
    #[error("octet out of range in `{0}`")]
    BadOctet(String),
    #[error("bad port in `{0}`")]
    BadPort(String),
    #[error("bad address range `{0}`")]
    BadRange(String),
}

/// A bare IPv4 address (four octets, canonical dotted-quad text form).
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(try_from = "String", into = "String")]
pub struct Ipv4(pub [u8; 4]);

impl Ipv4 {
    pub const fn new(a: u8, b: u8, c: u8, d: u8) -> Self {
        Ipv4([a, b, c, d])
    }

    pub fn octets(self) -> [u8; 4] {
        self.0
    }

    pub fn to_u32(self) -> u32 {
        u32::from_be_bytes(self.0)
    }

    pub fn from_u32(v: u32) -> Self {
        Ipv4(v.to_be_bytes())
    }

    /// The network address of the `/prefix_bits` block containing `self`.
    pub fn prefix(self, prefix_bits: u32) -> Ipv4 {
        if prefix_bits == 0 {
            return Ipv4::from_u32(0);
        }
        let mask = u32::MAX << (32 - prefix_bits.min(32));
        Ipv4::from_u32(self.to_u32() & mask)
    }

    /// Inclusive range covering the `/prefix_bits` block containing `self`.
    pub fn block(self, prefix_bits: u32) -> AddrRange {
        let base = self.prefix(prefix_bits);
        let span = if prefix_bits >= 32 {
            0
        } else {
            (1u32 << (32 - prefix_bits)) - 1
        };
        AddrRange {
            start: base,
            end: Ipv4::from_u32(base.to_u32() + span),
        }
    }
}

impl fmt::Display for Ipv4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "{a}.{b}.{c}.{d}")
    }
}

impl FromStr for Ipv4 {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('.').collect();
        if parts.len() != 4 {
            return Err(AddrParseError::BadQuad(s.to_string()));
        }
        let mut octets = [0u8; 4];
        for (i, p) in parts.iter().enumerate() {
            // canonical form only: no empty parts, no leading zeros
            if p.is_empty() || (p.len() > 1 && p.starts_with('0')) {
                return Err(AddrParseError::BadOctet(s.to_string()));
            }
            octets[i] = p
                .parse::<u8>()
                .map_err(|_| AddrParseError::BadOctet(s.to_string()))?;
        }
        Ok(Ipv4(octets))
    }
}

impl TryFrom<String> for Ipv4 {
    type Error = AddrParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Ipv4> for String {
    fn from(ip: Ipv4) -> String {
        ip.to_string()
    }
}

/// An endpoint: IPv4 address plus TCP-style port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Address {
    pub ip: Ipv4,
    pub port: u16,
}

impl Address {
    pub const fn new(ip: Ipv4, port: u16) -> Self {
        Address { ip, port }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.ip, self.port)
    }
}

impl FromStr for Address {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ip, port) = s
            .rsplit_once(':')
            .ok_or_else(|| AddrParseError::BadPort(s.to_string()))?;
        Ok(Address {
            ip: ip.parse()?,
            port: port
                .parse()
                .map_err(|_| AddrParseError::BadPort(s.to_string()))?,
        })
    }
}

impl TryFrom<String> for Address {
    type Error = AddrParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Address> for String {
    fn from(a: Address) -> String {
        a.to_string()
    }
}

/// Inclusive IPv4 interval, e.g. a scan target range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AddrRange {
    pub start: Ipv4,
    pub end: Ipv4,
}

impl AddrRange {
    pub fn new(start: Ipv4, end: Ipv4) -> Self {
        AddrRange { start, end }
    }

    pub fn contains(&self, ip: Ipv4) -> bool {
        self.start.to_u32() <= ip.to_u32() && ip.to_u32() <= self.end.to_u32()
    }

    pub fn len(&self) -> u64 {
        (self.end.to_u32() as u64).saturating_sub(self.start.to_u32() as u64) + 1
    }

    pub fn is_empty(&self) -> bool {
        self.end.to_u32() < self.start.to_u32()
    }

    /// The `i`-th address of the range, if any.
    pub fn nth(&self, i: u64) -> Option<Ipv4> {
        if i < self.len() {
            Some(Ipv4::from_u32(self.start.to_u32() + i as u32))
        } else {
            None
        }
    }
}

impl fmt::Display for AddrRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl FromStr for AddrRange {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| AddrParseError::BadRange(s.to_string()))?;
        let range = AddrRange {
            start: a.trim().parse()?,
            end: b.trim().parse()?,
        };
        if range.is_empty() {
            return Err(AddrParseError::BadRange(s.to_string()));
        }
        Ok(range)
    }
}

impl TryFrom<String> for AddrRange {
    type Error = AddrParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AddrRange> for String {
    fn from(r: AddrRange) -> String {
        r.to_string()
    }
}

/// The simulated address universe scanners draw from: `2^bits` consecutive
/// addresses starting at `base`. The default base sits in clean public
/// space so a default universe is fully scannable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Universe {
    pub base: Ipv4,
    pub bits: u32,
}

impl Universe {
    pub fn new(base: Ipv4, bits: u32) -> Self {
        debug_assert!(bits <= 24);
        Universe { base, bits }
    }

    pub fn len(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, ip: Ipv4) -> bool {
        let off = ip.to_u32().wrapping_sub(self.base.to_u32()) as u64;
        off < self.len()
    }

    pub fn range(&self) -> AddrRange {
        AddrRange {
            start: self.base,
            end: Ipv4::from_u32(self.base.to_u32() + (self.len() - 1) as u32),
        }
    }

    /// Draws a uniformly random address from the universe.
    pub fn draw(&self, rng: &mut super::RngStream) -> Ipv4 {
        Ipv4::from_u32(self.base.to_u32() + rng.next_below(self.len()) as u32)
    }
}
