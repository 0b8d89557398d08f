//! Run observables: the ordered event log and the per-run metrics record,
//! plus the collector that builds them while a world runs.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::simkernel::{Ipv4, SimTime};

/// One ordered log record. Rendered as `t=<ms> <entity> <kind> <k=v…>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLogRecord {
    pub time: SimTime,
    pub entity: String,
    pub kind: String,
    pub detail: Vec<(String, String)>,
}

/// Strictly ordered record stream for one run.
#[derive(Debug, Default)]
pub struct EventLog {
    pub records: Vec<EventLogRecord>,
}

impl EventLog {
    pub fn push(
        &mut self,
        time: SimTime,
        entity: impl Into<String>,
        kind: impl Into<String>,
        detail: Vec<(String, String)>,
    ) {
        let record = EventLogRecord {
            time,
            entity: entity.into(),
            kind: kind.into(),
            detail,
        };
        debug_assert!(self
            .records
            .last()
            .is_none_or(|prev| prev.time <= record.time));
        self.records.push(record);
    }

    /// All records of a given kind, in order.
    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a EventLogRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn first_of_kind(&self, kind: &str) -> Option<&EventLogRecord> {
        self.records.iter().find(|r| r.kind == kind)
    }

    /// Renders the whole log as text lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = write!(out, "t={} {} {}", r.time, r.entity, r.kind);
            for (k, v) in &r.detail {
                let _ = write!(out, " {k}={v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Infected,
    Protected,
}

/// A span during which a device was held by one side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub kind: IntervalKind,
    pub start_ms: u64,
    pub end_ms: Option<u64>,
    pub end_cause: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceTimeline {
    pub address: Ipv4,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Expeller,
    Mirai,
    Neither,
}

impl Winner {
    pub fn as_str(&self) -> &'static str {
        match self {
            Winner::Expeller => "expeller",
            Winner::Mirai => "mirai",
            Winner::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceOutcome {
    pub device: Ipv4,
    pub reboot_at_ms: u64,
    pub winner: Winner,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub mirai_infections: u32,
    pub expeller_implants: u32,
    pub blocked_attempts: u32,
}

/// Everything a single run reports. Serializes to one self-describing JSON
/// record; two runs with the same seed and config produce identical records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub horizon_ms: u64,
    /// First scan-job start to first heartbeat received.
    pub time_to_first_implant_ms: Option<u64>,
    pub counts: Counts,
    pub devices: Vec<DeviceTimeline>,
    pub race_winners: Vec<RaceOutcome>,
    pub reimplant_latencies_ms: Vec<u64>,
    /// First victim report received by the wild botnet's collector.
    pub wild_first_report_ms: Option<u64>,
    /// Peak number of concurrently live bot processes on any one device.
    pub max_concurrent_mirai: u32,
    pub boot_count: u32,
    pub pristine_boots: u32,
    pub events_processed: u64,
}

impl RunMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed:                 {}", self.seed);
        let _ = writeln!(s, "horizon:              {} ms", self.horizon_ms);
        let _ = writeln!(
            s,
            "time to first implant: {}",
            self.time_to_first_implant_ms
                .map(|t| format!("{t} ms"))
                .unwrap_or_else(|| "-".into())
        );
        let _ = writeln!(
            s,
            "counts:               mirai_infections={} expeller_implants={} blocked_attempts={}",
            self.counts.mirai_infections,
            self.counts.expeller_implants,
            self.counts.blocked_attempts
        );
        for race in &self.race_winners {
            let _ = writeln!(
                s,
                "race:                 device={} reboot_at={}ms winner={}",
                race.device,
                race.reboot_at_ms,
                race.winner.as_str()
            );
        }
        if !self.reimplant_latencies_ms.is_empty() {
            let _ = writeln!(
                s,
                "reimplant latencies:  {:?} ms",
                self.reimplant_latencies_ms
            );
        }
        let _ = writeln!(s, "events processed:     {}", self.events_processed);
        s
    }
}

/// Builds metrics incrementally while the world runs.
#[derive(Debug, Default)]
pub struct MetricsCollector {
    pub seed: u64,
    pub horizon_ms: u64,
    pub first_scan_start: Option<SimTime>,
    pub time_to_first_implant_ms: Option<u64>,
    pub counts: Counts,
    timelines: Vec<TimelineState>,
    pub race_winners: Vec<RaceOutcome>,
    pub reimplant_latencies_ms: Vec<u64>,
    pub wild_first_report_ms: Option<u64>,
    pub max_concurrent_mirai: u32,
    pub boot_count: u32,
    pub pristine_boots: u32,
}

#[derive(Debug)]
struct TimelineState {
    address: Ipv4,
    intervals: Vec<Interval>,
    open_infection: Option<usize>,
    open_protection: Option<usize>,
}

impl MetricsCollector {
    pub fn new(seed: u64, horizon_ms: u64, device_addrs: &[Ipv4]) -> Self {
        MetricsCollector {
            seed,
            horizon_ms,
            timelines: device_addrs
                .iter()
                .map(|&address| TimelineState {
                    address,
                    intervals: Vec::new(),
                    open_infection: None,
                    open_protection: None,
                })
                .collect(),
            ..Default::default()
        }
    }

    pub fn open(&mut self, device: usize, kind: IntervalKind, now: SimTime) {
        let t = &mut self.timelines[device];
        let slot = match kind {
            IntervalKind::Infected => &mut t.open_infection,
            IntervalKind::Protected => &mut t.open_protection,
        };
        if slot.is_some() {
            return;
        }
        t.intervals.push(Interval {
            kind,
            start_ms: now.as_ms(),
            end_ms: None,
            end_cause: None,
        });
        let idx = t.intervals.len() - 1;
        match kind {
            IntervalKind::Infected => t.open_infection = Some(idx),
            IntervalKind::Protected => t.open_protection = Some(idx),
        }
    }

    pub fn close(&mut self, device: usize, kind: IntervalKind, now: SimTime, cause: &str) {
        let t = &mut self.timelines[device];
        let slot = match kind {
            IntervalKind::Infected => t.open_infection.take(),
            IntervalKind::Protected => t.open_protection.take(),
        };
        if let Some(idx) = slot {
            t.intervals[idx].end_ms = Some(now.as_ms());
            t.intervals[idx].end_cause = Some(cause.to_string());
        }
    }

    pub fn is_open(&self, device: usize, kind: IntervalKind) -> bool {
        let t = &self.timelines[device];
        match kind {
            IntervalKind::Infected => t.open_infection.is_some(),
            IntervalKind::Protected => t.open_protection.is_some(),
        }
    }

    pub fn note_boot(&mut self, pristine: bool) {
        self.boot_count += 1;
        if pristine {
            self.pristine_boots += 1;
        }
    }

    pub fn finalize(mut self, horizon: SimTime, events_processed: u64) -> RunMetrics {
        let device_count = self.timelines.len();
        for d in 0..device_count {
            self.close(d, IntervalKind::Infected, horizon, "horizon");
            self.close(d, IntervalKind::Protected, horizon, "horizon");
        }
        RunMetrics {
            seed: self.seed,
            horizon_ms: self.horizon_ms,
            time_to_first_implant_ms: self.time_to_first_implant_ms,
            counts: self.counts,
            devices: self
                .timelines
                .into_iter()
                .map(|t| DeviceTimeline {
                    address: t.address,
                    intervals: t.intervals,
                })
                .collect(),
            race_winners: self.race_winners,
            reimplant_latencies_ms: self.reimplant_latencies_ms,
            wild_first_report_ms: self.wild_first_report_ms,
            max_concurrent_mirai: self.max_concurrent_mirai,
            boot_count: self.boot_count,
            pristine_boots: self.pristine_boots,
            events_processed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_renders_in_the_documented_format() {
        let mut log = EventLog::default();
        log.push(
            SimTime::from_ms(1500),
            "implanter",
            "heartbeat_lost",
            vec![kv("device", "1.1.0.9")],
        );
        log.push(SimTime::from_ms(1500), "implanter", "scan_started", vec![]);
        assert_eq!(
            log.render(),
            "t=1500 implanter heartbeat_lost device=1.1.0.9\nt=1500 implanter scan_started\n"
        );
    }

    #[test]
    fn metrics_json_round_trips() {
        let mut c = MetricsCollector::new(7, 1000, &[Ipv4::new(1, 1, 0, 9)]);
        c.open(0, IntervalKind::Infected, SimTime::from_ms(10));
        c.close(0, IntervalKind::Infected, SimTime::from_ms(20), "reboot");
        c.open(0, IntervalKind::Protected, SimTime::from_ms(30));
        c.counts.mirai_infections = 1;
        c.counts.expeller_implants = 1;
        c.race_winners.push(RaceOutcome {
            device: Ipv4::new(1, 1, 0, 9),
            reboot_at_ms: 5,
            winner: Winner::Expeller,
        });
        let m = c.finalize(SimTime::from_ms(1000), 42);
        let json = m.to_json();
        let back: RunMetrics = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        // open interval got closed at horizon
        assert_eq!(back.devices[0].intervals[1].end_ms, Some(1000));
        assert_eq!(
            back.devices[0].intervals[1].end_cause.as_deref(),
            Some("horizon")
        );
    }

    #[test]
    fn intervals_of_one_kind_never_overlap() {
        let mut c = MetricsCollector::new(1, 100, &[Ipv4::new(1, 1, 0, 9)]);
        c.open(0, IntervalKind::Infected, SimTime::from_ms(5));
        // double open is ignored
        c.open(0, IntervalKind::Infected, SimTime::from_ms(6));
        c.close(0, IntervalKind::Infected, SimTime::from_ms(9), "expelled");
        // double close is ignored
        c.close(0, IntervalKind::Infected, SimTime::from_ms(10), "expelled");
        let m = c.finalize(SimTime::from_ms(100), 1);
        assert_eq!(m.devices[0].intervals.len(), 1);
    }
}
