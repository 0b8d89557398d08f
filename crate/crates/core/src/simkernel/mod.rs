//! Deterministic event-driven substrate: virtual clock, ordered event queue,
//! seeded randomness and the network primitives shared by every simulated
//! endpoint.
//!
//! Nothing in this module knows about devices, bots or servers. The world
//! model in [`crate::scenario`] composes these pieces into a runnable
//! simulation.

mod addr;
mod net;
mod queue;
mod rng;
mod time;

pub use addr::{AddrParseError, AddrRange, Address, Ipv4, Universe};
pub use net::{SendError, LATENCY_DEFAULT_MS};
pub use queue::{Event, EventHandle, Kernel, RunError, DEFAULT_EVENT_CAP};
pub use rng::RngStream;
pub use time::{
    SimTime, DEFAULT_BOOT_DELAY_MS, DEFAULT_CHECK_PERIOD_MS, DEFAULT_CMD_DURATION_MS,
    DEFAULT_HEARTBEAT_INTERVAL_MS, DEFAULT_HEARTBEAT_TIMEOUT_MS, DEFAULT_WATCHDOG_PERIOD_MS,
};
