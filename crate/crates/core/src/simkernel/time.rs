//! Virtual time. The unit is the millisecond; every second-scale constant
//! from the modeled protocols is converted once, here.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Sub;

/// Heartbeat cadence of a live virus expeller (one minute).
pub const DEFAULT_HEARTBEAT_INTERVAL_MS: u64 = 60_000;
/// Server-side liveness limit: a timer exceeding 70 seconds marks the
/// expeller as lost.
pub const DEFAULT_HEARTBEAT_TIMEOUT_MS: u64 = 70_000;
/// How often the heartbeat service walks its timer table.
pub const DEFAULT_CHECK_PERIOD_MS: u64 = 10_000;
/// Time for a device to come back after a reboot is initiated.
pub const DEFAULT_BOOT_DELAY_MS: u64 = 5_000;
/// Cost of one shell command executed on a device.
pub const DEFAULT_CMD_DURATION_MS: u64 = 200;
/// Hardware watchdog delay between a system hang and the forced reboot.
pub const DEFAULT_WATCHDOG_PERIOD_MS: u64 = 30_000;

/// Virtual milliseconds since scenario start.
///
/// Monotonically non-decreasing across processed events; only the event loop
/// advances it.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms)
    }

    pub const fn as_ms(self) -> u64 {
        self.0
    }

    /// This time plus `ms` milliseconds.
    pub const fn plus(self, ms: u64) -> Self {
        SimTime(self.0 + ms)
    }

    /// Milliseconds elapsed since `earlier`, saturating at zero.
    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl Sub for SimTime {
    type Output = u64;

    fn sub(self, rhs: SimTime) -> u64 {
        self.since(rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
