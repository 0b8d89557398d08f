//! The defense system: the virus expeller agent (fingerprint check,
//! blocking module, heartbeat client) and the implanter server (scan,
//! ScanListen, load, heartbeat and HTTP-payload services).

mod expeller;
mod heartbeat;
mod server;

pub use expeller::{
    finish_start, ExpellerAgent, ExpellerConfig, ExpellerStage, FingerprintPolicy, StartOutcome,
    FINGERPRINT_PROC_READS,
};
pub use heartbeat::{
    heartbeat_frame, heartbeat_parse, BadMagic, HeartbeatRecord, HeartbeatTable, LivenessStatus,
    Observation, HEARTBEAT_MAGIC, HEARTBEAT_PORT,
};
pub use server::{
    Implanter, ImplanterConfig, JobReason, JobStatus, ProbeState, SweepState, TargetedScanJob,
};
