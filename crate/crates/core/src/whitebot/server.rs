//! Implanter server state: the manufacturer-operated host running the scan,
//! ScanListen, load, heartbeat and HTTP-payload services. The world loop
//! drives it; this module owns the data model and the job/probe bookkeeping.

use std::collections::BTreeMap;

use crate::blackbot::LoadManager;
use crate::simkernel::{AddrRange, Ipv4, SimTime};

use super::expeller::FingerprintPolicy;
use super::heartbeat::HeartbeatTable;

/// Why a scan job exists. Deployment sweeps once; the re-implant and
/// negotiation variants re-sweep until their device is protected again.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobReason {
    Deployment,
    Reimplant,
    Negotiation,
}

impl JobReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            JobReason::Deployment => "deployment",
            JobReason::Reimplant => "reimplant",
            JobReason::Negotiation => "negotiation",
        }
    }
}

/// A queued range scan: probe every address in `range` sequentially with
/// the manufacturer's credential pairs. Addresses outside the range are
/// never probed by this job.
#[derive(Debug, Clone)]
pub struct TargetedScanJob {
    pub id: u64,
    pub range: AddrRange,
    pub reason: JobReason,
    /// The device this job exists to recover, when there is one.
    pub for_device: Option<Ipv4>,
    pub deadline: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobStatus {
    Sweeping,
    /// Range exhausted; waiting for the re-sweep delay (retrying jobs only).
    BetweenSweeps,
    Done,
}

#[derive(Debug, Clone)]
pub struct SweepState {
    pub job: TargetedScanJob,
    pub cursor: u64,
    pub sweep_no: u32,
    pub status: JobStatus,
}

/// One in-flight probe: a credential chain against a single address.
#[derive(Debug, Clone)]
pub struct ProbeState {
    pub job: u64,
    pub target: Ipv4,
    pub cred_idx: usize,
}

/// Server-side knobs, resolved from scenario configuration.
#[derive(Debug, Clone)]
pub struct ImplanterConfig {
    /// Interval between probe launches (1000 / scan rate).
    pub probe_interval_ms: u64,
    pub check_period_ms: u64,
    pub blocked_ports: Vec<u16>,
    pub block_http: bool,
    /// Manufacturer-specific credential pairs used by the targeted scan.
    pub credentials: Vec<(String, String)>,
    pub fingerprint: FingerprintPolicy,
    pub payload_bytes: u64,
    pub helper_bytes: u64,
    pub resweep_delay_ms: u64,
    /// Width of the block re-scanned around a lost device.
    pub reimplant_prefix_bits: u32,
    pub heartbeat_interval_ms: u64,
    pub heartbeat_timeout_ms: u64,
    /// Local HTTP-payload fetch throughput.
    pub http_bytes_per_ms: u64,
}

/// The implanter server. Lives at a fixed public address; always reachable.
#[derive(Debug)]
pub struct Implanter {
    pub addr: Ipv4,
    pub cfg: ImplanterConfig,
    pub table: HeartbeatTable,
    pub jobs: Vec<SweepState>,
    pub probes: BTreeMap<u64, ProbeState>,
    pub loads: LoadManager,
    /// Start of the first scan job, the anchor for time-to-first-implant.
    pub first_scan_start: Option<SimTime>,
    next_job: u64,
}

impl Implanter {
    pub fn new(addr: Ipv4, cfg: ImplanterConfig) -> Self {
        let table = HeartbeatTable::new(cfg.heartbeat_timeout_ms);
        Implanter {
            addr,
            cfg,
            table,
            jobs: Vec::new(),
            probes: BTreeMap::new(),
            loads: LoadManager::new(),
            first_scan_start: None,
            next_job: 0,
        }
    }

    /// Enqueues a new scan job unless an active one already covers the same
    /// device for the same purpose.
    pub fn enqueue_job(
        &mut self,
        range: AddrRange,
        reason: JobReason,
        for_device: Option<Ipv4>,
        deadline: Option<SimTime>,
        now: SimTime,
    ) -> Option<u64> {
        if let Some(dev) = for_device {
            let duplicate = self
                .jobs
                .iter()
                .any(|s| s.status != JobStatus::Done && s.job.for_device == Some(dev));
            if duplicate {
                return None;
            }
        }
        let id = self.next_job;
        self.next_job += 1;
        self.jobs.push(SweepState {
            job: TargetedScanJob {
                id,
                range,
                reason,
                for_device,
                deadline,
            },
            cursor: 0,
            sweep_no: 0,
            status: JobStatus::Sweeping,
        });
        self.first_scan_start.get_or_insert(now);
        Some(id)
    }

    pub fn sweep_mut(&mut self, job: u64) -> Option<&mut SweepState> {
        self.jobs.iter_mut().find(|s| s.job.id == job)
    }

    pub fn sweep(&self, job: u64) -> Option<&SweepState> {
        self.jobs.iter().find(|s| s.job.id == job)
    }

    /// Marks every non-done job watching `device` as finished (the device
    /// is protected again).
    pub fn retire_jobs_for(&mut self, device: Ipv4) {
        for s in self.jobs.iter_mut() {
            if s.job.for_device == Some(device) && s.status != JobStatus::Done {
                s.status = JobStatus::Done;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkernel::DEFAULT_HEARTBEAT_TIMEOUT_MS;

    fn cfg() -> ImplanterConfig {
        ImplanterConfig {
            probe_interval_ms: 10,
            check_period_ms: 10_000,
            blocked_ports: vec![23, 22],
            block_http: false,
            credentials: vec![("root".into(), String::new())],
            fingerprint: FingerprintPolicy::for_manufacturer("Dahua"),
            payload_bytes: 53_000,
            helper_bytes: 1024,
            resweep_delay_ms: 1000,
            reimplant_prefix_bits: 24,
            heartbeat_interval_ms: 60_000,
            heartbeat_timeout_ms: DEFAULT_HEARTBEAT_TIMEOUT_MS,
            http_bytes_per_ms: 1000,
        }
    }

    #[test]
    fn duplicate_jobs_for_one_device_are_suppressed() {
        let mut srv = Implanter::new(Ipv4::new(203, 0, 113, 10), cfg());
        let dev = Ipv4::new(1, 1, 0, 9);
        let range = dev.block(24);
        let now = SimTime::from_ms(5);
        assert!(srv
            .enqueue_job(range, JobReason::Reimplant, Some(dev), None, now)
            .is_some());
        assert!(srv
            .enqueue_job(range, JobReason::Reimplant, Some(dev), None, now)
            .is_none());
        srv.retire_jobs_for(dev);
        assert!(srv
            .enqueue_job(range, JobReason::Reimplant, Some(dev), None, now)
            .is_some());
        assert_eq!(srv.first_scan_start, Some(now));
    }
}
