//! Experiment front door: scenario configuration, the composed world and
//! its three-phase orchestration, the Monte-Carlo runner, and metrics and
//! event-log emission.

pub mod config;
pub mod metrics;
pub mod montecarlo;
pub mod world;

use std::path::Path;
use thiserror::Error;

pub use config::{load_config, load_config_str, MiraiMode, ScenarioConfig};
pub use metrics::{EventLog, EventLogRecord, RunMetrics, Winner};
pub use montecarlo::{run_monte_carlo, Aggregate, McError};
pub use world::{run_scenario, World};

/// Everything that can go wrong loading or running a scenario.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("livelock: event count exceeded the safety cap of {0}")]
    Livelock(u64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Writes the metrics record as one JSON document.
pub fn emit_metrics(metrics: &RunMetrics, path: &Path) -> Result<(), SimError> {
    let mut json = metrics.to_json();
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

/// Writes the event log as ordered text lines.
pub fn emit_log(log: &EventLog, path: &Path) -> Result<(), SimError> {
    std::fs::write(path, log.render())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emitted_metrics_reparse_identically() {
        let cfg = load_config_str(
            r#"
            horizon_ms = 30000
            [[devices]]
            address = "1.1.0.9"
            [implanter]
            [[phases]]
            kind = "deployment"
            start_ms = 0
            range = "1.1.0.0-1.1.0.255"
        "#,
        )
        .unwrap();
        let (metrics, _log) = run_scenario(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        emit_metrics(&metrics, &path).unwrap();
        let back: RunMetrics =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, metrics);
    }
}
