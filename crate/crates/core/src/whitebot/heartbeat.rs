//! Heartbeat protocol and the server-side liveness table.
//!
//! A live expeller reports aliveness once a minute by sending a bare magic
//! number; the heartbeat service keeps a timer per expeller and flags any
//! that stays silent past 70 seconds.

use std::collections::BTreeMap;
use thiserror::Error;

use crate::simkernel::{Ipv4, SimTime};

/// The aliveness magic number.
pub const HEARTBEAT_MAGIC: u32 = 0xE84E_B1C8;
/// Port the heartbeat service listens on.
pub const HEARTBEAT_PORT: u16 = 48103;

/// Encodes a liveness frame: exactly four bytes, the magic in big-endian
/// order, no payload.
pub fn heartbeat_frame() -> [u8; 4] {
    HEARTBEAT_MAGIC.to_be_bytes()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("bad heartbeat magic")]
pub struct BadMagic;

/// Validates a liveness frame; any other length or value is rejected.
pub fn heartbeat_parse(bytes: &[u8]) -> Result<(), BadMagic> {
    let four: [u8; 4] = bytes.try_into().map_err(|_| BadMagic)?;
    if u32::from_be_bytes(four) == HEARTBEAT_MAGIC {
        Ok(())
    } else {
        Err(BadMagic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LivenessStatus {
    Alive,
    Lost,
    Reimplanting,
}

/// Per-expeller timer state on the implanter server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeartbeatRecord {
    pub device_addr: Ipv4,
    pub last_seen: SimTime,
    pub timer_limit_ms: u64,
    pub status: LivenessStatus,
}

impl HeartbeatRecord {
    /// A record is overdue once strictly more than the limit has elapsed.
    pub fn overdue(&self, now: SimTime) -> bool {
        now - self.last_seen > self.timer_limit_ms
    }
}

/// What a received heartbeat meant for the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// First heartbeat ever from this device: a fresh implant.
    NewImplant,
    Refreshed,
    /// The device was lost or being re-implanted and is alive again.
    Recovered {
        lost_since: SimTime,
    },
}

/// The heartbeat service's timer table, keyed by device address.
#[derive(Debug, Default)]
pub struct HeartbeatTable {
    records: BTreeMap<Ipv4, HeartbeatRecord>,
    timer_limit_ms: u64,
    /// When a record transitioned out of Alive, for re-implant latency.
    lost_at: BTreeMap<Ipv4, SimTime>,
}

impl HeartbeatTable {
    pub fn new(timer_limit_ms: u64) -> Self {
        HeartbeatTable {
            records: BTreeMap::new(),
            timer_limit_ms,
            lost_at: BTreeMap::new(),
        }
    }

    pub fn get(&self, addr: Ipv4) -> Option<&HeartbeatRecord> {
        self.records.get(&addr)
    }

    pub fn is_alive(&self, addr: Ipv4) -> bool {
        matches!(
            self.records.get(&addr),
            Some(HeartbeatRecord {
                status: LivenessStatus::Alive,
                ..
            })
        )
    }

    /// Registers a received heartbeat from `addr`.
    pub fn observe(&mut self, addr: Ipv4, now: SimTime) -> Observation {
        match self.records.get_mut(&addr) {
            None => {
                self.records.insert(
                    addr,
                    HeartbeatRecord {
                        device_addr: addr,
                        last_seen: now,
                        timer_limit_ms: self.timer_limit_ms,
                        status: LivenessStatus::Alive,
                    },
                );
                Observation::NewImplant
            }
            Some(rec) => {
                rec.last_seen = now;
                let previous = rec.status;
                rec.status = LivenessStatus::Alive;
                match previous {
                    LivenessStatus::Alive => Observation::Refreshed,
                    _ => Observation::Recovered {
                        lost_since: self.lost_at.remove(&addr).unwrap_or(now),
                    },
                }
            }
        }
    }

    /// Periodic check: transitions every overdue Alive record to Lost and
    /// returns their addresses, in address order.
    pub fn check(&mut self, now: SimTime) -> Vec<Ipv4> {
        let mut lost = Vec::new();
        for (addr, rec) in self.records.iter_mut() {
            if rec.status == LivenessStatus::Alive && rec.overdue(now) {
                rec.status = LivenessStatus::Lost;
                self.lost_at.insert(*addr, now);
                lost.push(*addr);
            }
        }
        lost
    }

    /// Marks a lost record as having a re-implant under way.
    pub fn mark_reimplanting(&mut self, addr: Ipv4) {
        if let Some(rec) = self.records.get_mut(&addr) {
            if rec.status == LivenessStatus::Lost {
                rec.status = LivenessStatus::Reimplanting;
            }
        }
    }
}
