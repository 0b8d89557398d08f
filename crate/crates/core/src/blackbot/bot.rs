//! Bot lifecycle: the in-memory initialization sequence a freshly executed
//! bot runs, and the scanner state used by both external (wild) bots and
//! bots resident on infected devices.

use std::collections::BTreeMap;

use crate::device::{Device, Pid, ProcessFamily, SINGLE_INSTANCE_PORT, WATCHDOG_DISABLE_CODE};
use crate::simkernel::{Address, Ipv4, RngStream};

/// Ports the bot blocks right after start to lock rivals out. 22 is listed
/// even on devices that never open it; blocking it is then a no-op.
pub const BOT_BLOCKED_PORTS: [u16; 3] = [23, 22, 80];

/// Lifecycle phase. `Armed` is inert: the bot idles against its C&C and
/// keeps scanning; no attack behavior exists in this codebase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BotPhase {
    Initializing,
    Scanning,
    Armed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitOutcome {
    /// Steps 1-5 completed: watchdog off, renamed, 48101 bound, remote
    /// ports blocked, rivals killed.
    Initialized { killed: Vec<Pid> },
    /// Another bot already holds the single-instance port; the newcomer
    /// exited cleanly leaving the incumbent.
    SecondInstance { incumbent: Pid },
}

/// Runs the bot's initialization on the hosting device, atomically at exec
/// time. Rival selection keys on the family tag, never on display names.
pub fn bot_initialize(dev: &mut Device, pid: Pid) -> InitOutcome {
    dev.set_watchdog(WATCHDOG_DISABLE_CODE);
    dev.rename_process(pid);
    if let Err(conflict) = dev.bind_port(pid, SINGLE_INSTANCE_PORT) {
        dev.kill_pid(pid);
        return InitOutcome::SecondInstance {
            incumbent: conflict.holder,
        };
    }
    for port in BOT_BLOCKED_PORTS {
        dev.close_port(port);
    }
    let killed = dev.kill_families(&[ProcessFamily::OtherMalware, ProcessFamily::Expeller]);
    InitOutcome::Initialized { killed }
}

/// One outstanding brute-force attempt against a drawn address.
#[derive(Debug, Clone)]
pub struct ScanAttempt {
    pub target: Ipv4,
    pub cred_idx: usize,
}

/// Scanner state: phase, report sink, pacing, own RNG stream, and the
/// in-flight attempts keyed by connection id.
#[derive(Debug, Clone)]
pub struct Scanner {
    pub phase: BotPhase,
    pub scanlisten: Address,
    pub scan_interval_ms: u64,
    pub rng: RngStream,
    pub pending: BTreeMap<u64, ScanAttempt>,
}

impl Scanner {
    pub fn new(scanlisten: Address, scan_rate_per_s: f64, rng: RngStream) -> Self {
        let scan_interval_ms = (1000.0 / scan_rate_per_s.max(0.001)).round().max(1.0) as u64;
        Scanner {
            phase: BotPhase::Scanning,
            scanlisten,
            scan_interval_ms,
            rng,
            pending: BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{DeviceCosts, DeviceProfile, PortState};

    fn infected_device() -> (Device, Pid) {
        let mut dev = Device::new(
            DeviceProfile::dh3004(),
            Ipv4::new(1, 1, 0, 9),
            true,
            DeviceCosts::default(),
            RngStream::derive(7, "bot-test"),
        );
        let pid = dev.spawn_process(ProcessFamily::Mirai);
        (dev, pid)
    }

    #[test]
    fn init_on_clean_device() {
        let (mut dev, pid) = infected_device();
        let outcome = bot_initialize(&mut dev, pid);
        assert!(matches!(outcome, InitOutcome::Initialized { .. }));
        assert_eq!(dev.port_state(23), PortState::Closed);
        assert_eq!(dev.port_state(80), PortState::Closed);
        assert_eq!(dev.port_state(SINGLE_INSTANCE_PORT), PortState::Bound(pid));
        assert!(!dev.watchdog_enabled);
        // 22 was never open; blocking it is a harmless no-op
        assert_eq!(dev.port_state(22), PortState::Closed);
    }

    #[test]
    fn second_instance_exits_leaving_incumbent() {
        let (mut dev, first) = infected_device();
        bot_initialize(&mut dev, first);
        let second = dev.spawn_process(ProcessFamily::Mirai);
        let outcome = bot_initialize(&mut dev, second);
        assert_eq!(outcome, InitOutcome::SecondInstance { incumbent: first });
        assert_eq!(dev.live_family_count(ProcessFamily::Mirai), 1);
        assert!(dev.processes().iter().any(|p| p.pid == first));
    }

    #[test]
    fn init_kills_rivals_by_family_only() {
        // 1000 seeds: random display names never shield a rival.
        for seed in 0..1000u64 {
            let mut dev = Device::new(
                DeviceProfile::dh3004(),
                Ipv4::new(1, 1, 0, 9),
                true,
                DeviceCosts::default(),
                RngStream::derive(seed, "stealth"),
            );
            let expeller = dev.spawn_process(ProcessFamily::Expeller);
            let other = dev.spawn_process(ProcessFamily::OtherMalware);
            let bot = dev.spawn_process(ProcessFamily::Mirai);
            let outcome = bot_initialize(&mut dev, bot);
            assert!(
                matches!(outcome, InitOutcome::Initialized { ref killed } if killed.contains(&expeller) && killed.contains(&other))
            );
            assert_eq!(dev.live_family_count(ProcessFamily::Expeller), 0);
            assert_eq!(dev.live_family_count(ProcessFamily::OtherMalware), 0);
            assert_eq!(dev.live_family_count(ProcessFamily::Mirai), 1);
        }
    }

    #[test]
    fn scanner_interval_from_rate() {
        let s = Scanner::new(
            Address::new(Ipv4::new(9, 9, 9, 9), 48101),
            10.0,
            RngStream::new(1),
        );
        assert_eq!(s.scan_interval_ms, 100);
    }
}
