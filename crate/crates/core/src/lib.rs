//! expelsim: a deterministic discrete-event simulator of the
//! implant/expel/re-implant defense against Mirai-style IoT botnets.
//!
//! Everything runs in virtual time on a single seeded event loop:
//!
//! - [`simkernel`] — virtual clock, ordered event queue, seeded randomness,
//!   addressing.
//! - [`device`] — the vulnerable DVR model: ports, credentials, volatile
//!   processes, watchdog, and the telnet shell algebra both loaders drive.
//! - [`blackbot`] — the hostile side: credential table, scan filter, bot
//!   lifecycle, ScanListen codec, and the seven-step in-memory loader.
//! - [`whitebot`] — the defense: virus expeller agent and the implanter
//!   server with its scan/ScanListen/load/heartbeat/HTTP services.
//! - [`scenario`] — experiment configuration, the composed world, the
//!   Monte-Carlo runner, and metrics emission.

pub mod blackbot;
pub mod device;
pub mod scenario;
pub mod simkernel;
pub mod whitebot;

pub use scenario::{
    emit_log, emit_metrics, load_config, load_config_str, run_monte_carlo, run_scenario, Aggregate,
    RunMetrics, ScenarioConfig, SimError, World,
};
