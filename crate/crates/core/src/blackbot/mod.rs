//! The malicious Mirai model: hard-coded credential table with
//! deobfuscation, the scan-target IP filter, the bot lifecycle state
//! machine, and the seven-step in-memory load procedure shared (by design)
//! with the defense's implanter.

mod bot;
mod codec;
mod credentials;
mod filter;
mod loader;

pub use bot::{bot_initialize, BotPhase, InitOutcome, ScanAttempt, Scanner, BOT_BLOCKED_PORTS};
pub use codec::{emit, ingest, ParseError, ScanReport};
pub use credentials::{
    credential_table, deobfuscate, obfuscate, try_order, xor_key, CredentialEntry,
};
pub use filter::{ip_is_scannable, DOD_FIRST_OCTETS};
pub use loader::{LoadAction, LoadError, LoadJob, LoadManager};
