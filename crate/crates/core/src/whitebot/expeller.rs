//! The virus expeller: the defense payload resident on a protected device.
//! Its reachable behavior is exactly {fingerprint read, rival kill, port
//! close, heartbeat}; it has no scanning and no attack capability of any
//! kind.

use std::collections::BTreeMap;

use crate::device::{Device, Pid, ProcessFamily, SessionId, SessionOwner, EXPELLER_CONTROL_PORT};
use crate::simkernel::{Address, DEFAULT_HEARTBEAT_INTERVAL_MS};

/// Number of proc pseudo-files read while fingerprinting (cpuinfo and
/// hiversion), each costing one command duration.
pub const FINGERPRINT_PROC_READS: u32 = 2;

/// Evidence required before implanting: proc-file path -> substring that
/// must appear in it. Implant aborts with cleanup on any mismatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerprintPolicy {
    pub required: BTreeMap<String, String>,
}

impl FingerprintPolicy {
    /// Default policy: /proc/hiversion must identify the manufacturer.
    pub fn for_manufacturer(name: &str) -> Self {
        FingerprintPolicy {
            required: [("/proc/hiversion".to_string(), name.to_string())]
                .into_iter()
                .collect(),
        }
    }

    /// True when every required proc file exists and contains its expected
    /// substring.
    pub fn matches(&self, dev: &Device) -> bool {
        self.required.iter().all(|(path, marker)| {
            dev.profile
                .proc_files
                .get(path)
                .is_some_and(|content| content.contains(marker))
        })
    }
}

/// Static expeller configuration carried inside the payload.
#[derive(Debug, Clone)]
pub struct ExpellerConfig {
    /// Remote-access ports closed right after the rival sweep. Port 80 is
    /// appended only when `block_http` is set, because it may carry the
    /// device's own web interface.
    pub blocked_ports: Vec<u16>,
    pub block_http: bool,
    pub heartbeat_interval_ms: u64,
    /// Heartbeat service endpoint on the implanter server.
    pub server: Address,
    pub fingerprint: FingerprintPolicy,
}

impl ExpellerConfig {
    pub fn ports_to_close(&self) -> Vec<u16> {
        let mut ports = self.blocked_ports.clone();
        if self.block_http && !ports.contains(&80) {
            ports.push(80);
        }
        ports
    }
}

impl Default for ExpellerConfig {
    fn default() -> Self {
        ExpellerConfig {
            blocked_ports: vec![23, 22],
            block_http: false,
            heartbeat_interval_ms: DEFAULT_HEARTBEAT_INTERVAL_MS,
            server: Address::new(
                crate::simkernel::Ipv4::new(203, 0, 113, 10),
                super::HEARTBEAT_PORT,
            ),
            fingerprint: FingerprintPolicy::for_manufacturer("Dahua"),
        }
    }
}

/// Where a starting expeller is in its boot sequence. Fingerprint reads
/// consume virtual time; the protective actions land atomically afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpellerStage {
    Fingerprint { reads_done: u32 },
    Running,
}

/// Resident expeller agent state.
#[derive(Debug, Clone)]
pub struct ExpellerAgent {
    pub stage: ExpellerStage,
    pub cfg: ExpellerConfig,
}

impl ExpellerAgent {
    pub fn new(cfg: ExpellerConfig) -> Self {
        ExpellerAgent {
            stage: ExpellerStage::Fingerprint { reads_done: 0 },
            cfg,
        }
    }
}

/// Result of the final start step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StartOutcome {
    /// Device is protected: rivals killed, ports closed, control port
    /// bound. In-flight sessions were severed; their owners are returned
    /// so they can be notified.
    Protected {
        killed: Vec<Pid>,
        severed: Vec<(SessionId, SessionOwner)>,
    },
    /// Wrong manufacturer: the expeller deleted itself and exited leaving
    /// the device untouched.
    ForeignDevice,
    /// Another expeller already holds the control port; this one exited.
    SecondInstance,
}

/// Completes expeller startup on the device, in order: fingerprint verdict,
/// rival kill, port blocking (severing any live remote session), control
/// port bind. The caller schedules the first heartbeat on success.
pub fn finish_start(dev: &mut Device, pid: Pid, cfg: &ExpellerConfig) -> StartOutcome {
    if !cfg.fingerprint.matches(dev) {
        dev.kill_pid(pid);
        return StartOutcome::ForeignDevice;
    }
    let killed = dev.kill_families(&[ProcessFamily::Mirai]);
    if dev.bind_port(pid, EXPELLER_CONTROL_PORT).is_err() {
        dev.kill_pid(pid);
        return StartOutcome::SecondInstance;
    }
    for port in cfg.ports_to_close() {
        dev.close_port(port);
    }
    let severed = dev.sever_all_sessions();
    StartOutcome::Protected { killed, severed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{DeviceCosts, DeviceProfile, PortState};
    use crate::simkernel::{Ipv4, RngStream};

    fn device_with(profile: DeviceProfile) -> Device {
        Device::new(
            profile,
            Ipv4::new(1, 1, 0, 9),
            true,
            DeviceCosts::default(),
            RngStream::derive(11, "expeller-test"),
        )
    }

    fn foreign_profile() -> DeviceProfile {
        let mut p = DeviceProfile::dh3004();
        p.manufacturer = "XiongMai".into();
        p.proc_files.insert(
            "/proc/hiversion".into(),
            "HiLinux 2.6.24 XiongMai XM-530\n".into(),
        );
        p
    }

    #[test]
    fn protects_a_matching_device() {
        let mut dev = device_with(DeviceProfile::dh3004());
        let pid = dev.spawn_process(ProcessFamily::Expeller);
        let out = finish_start(&mut dev, pid, &ExpellerConfig::default());
        assert!(matches!(out, StartOutcome::Protected { .. }));
        assert_eq!(dev.port_state(23), PortState::Closed);
        assert_eq!(dev.port_state(22), PortState::Closed);
        // port 80 stays open unless block_http is set
        assert_eq!(dev.port_state(80), PortState::Open);
        assert_eq!(dev.port_state(EXPELLER_CONTROL_PORT), PortState::Bound(pid));
        // functional ports untouched
        assert_eq!(dev.port_state(554), PortState::Open);
    }

    #[test]
    fn block_http_closes_port_80() {
        let mut dev = device_with(DeviceProfile::dh3004());
        let pid = dev.spawn_process(ProcessFamily::Expeller);
        let cfg = ExpellerConfig {
            block_http: true,
            ..ExpellerConfig::default()
        };
        finish_start(&mut dev, pid, &cfg);
        assert_eq!(dev.port_state(80), PortState::Closed);
    }

    #[test]
    fn foreign_device_is_left_untouched() {
        let mut dev = device_with(foreign_profile());
        let before = dev.observable_state();
        let pid = dev.spawn_process(ProcessFamily::Expeller);
        let out = finish_start(&mut dev, pid, &ExpellerConfig::default());
        assert_eq!(out, StartOutcome::ForeignDevice);
        assert_eq!(dev.observable_state(), before);
    }

    #[test]
    fn kills_resident_mirai_then_closes_ports() {
        let mut dev = device_with(DeviceProfile::dh3004());
        let bot = dev.spawn_process(ProcessFamily::Mirai);
        let pid = dev.spawn_process(ProcessFamily::Expeller);
        let out = finish_start(&mut dev, pid, &ExpellerConfig::default());
        match out {
            StartOutcome::Protected { killed, .. } => assert_eq!(killed, vec![bot]),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(dev.live_family_count(ProcessFamily::Mirai), 0);
        assert_eq!(dev.port_state(23), PortState::Closed);
    }

    #[test]
    fn second_expeller_exits() {
        let mut dev = device_with(DeviceProfile::dh3004());
        let first = dev.spawn_process(ProcessFamily::Expeller);
        finish_start(&mut dev, first, &ExpellerConfig::default());
        let second = dev.spawn_process(ProcessFamily::Expeller);
        let out = finish_start(&mut dev, second, &ExpellerConfig::default());
        assert_eq!(out, StartOutcome::SecondInstance);
        assert_eq!(dev.live_family_count(ProcessFamily::Expeller), 1);
    }

    #[test]
    fn fingerprint_policy_requires_file_presence() {
        let mut p = DeviceProfile::dh3004();
        p.proc_files.remove("/proc/hiversion");
        let dev = device_with(p);
        assert!(!FingerprintPolicy::for_manufacturer("Dahua").matches(&dev));
    }
}
