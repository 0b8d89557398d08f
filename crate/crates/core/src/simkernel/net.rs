//! Network delivery vocabulary. TCP sessions are abstracted as
//! request/response messages with a fixed per-hop latency; the world model
//! performs the actual routing and port checks at delivery time.

use thiserror::Error;

/// Default one-way message latency. The modeled protocols never state one;
/// this stays a scenario knob.
pub const LATENCY_DEFAULT_MS: u64 = 50;

/// Why a message could not be delivered to its destination endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SendError {
    /// Destination port is closed or blocked.
    #[error("connection refused")]
    Refused,
    /// Destination device is off, rebooting, hung, or not reachable from the
    /// public network.
    #[error("destination unreachable")]
    Unreachable,
}
