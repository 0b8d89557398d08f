//! Virtual Mirai-vulnerable IoT device: port table, credential store,
//! volatile process table, minimal filesystem overlay, watchdog, and the
//! telnet-style command algebra both loaders drive.
//!
//! A device is a passive state machine; all mutation happens from the single
//! event loop. Everything outside the read-only profile is wiped by a reboot.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::simkernel::{Ipv4, RngStream, DEFAULT_CMD_DURATION_MS};

/// Watchdog ioctl request code that disables reboot-on-hang.
pub const WATCHDOG_DISABLE_CODE: u32 = 0x8004_5704;
/// Telnet port.
pub const TELNET_PORT: u16 = 23;
/// Port a bot binds to guarantee a single running instance per device.
pub const SINGLE_INSTANCE_PORT: u16 = 48101;
/// Port the virus expeller binds for its own single-instance guarantee.
pub const EXPELLER_CONTROL_PORT: u16 = 48102;

/// Static, read-only description of a device model. The flash image never
/// changes; everything mutable lives in the runtime state and dies on reboot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub manufacturer: String,
    pub model: String,
    pub open_ports: BTreeSet<u16>,
    /// Back-door (username, password) pairs accepted over telnet.
    pub credentials: Vec<(String, String)>,
    pub ram_mb: u32,
    pub busybox: bool,
    pub writable_dirs: Vec<String>,
    /// Pseudo-files exposed for fingerprinting, e.g. /proc/hiversion.
    pub proc_files: BTreeMap<String, String>,
}

impl DeviceProfile {
    /// The Dahua DH-3004 DVR: six open TCP ports, root account with no
    /// password, BusyBox toolset, 43 MB of RAM, read-only flash.
    pub fn dh3004() -> Self {
        DeviceProfile {
            manufacturer: "Dahua".to_string(),
            model: "DH-3004".to_string(),
            open_ports: [23, 80, 101, 102, 554, 6623].into_iter().collect(),
            credentials: vec![("root".to_string(), String::new())],
            ram_mb: 43,
            busybox: true,
            writable_dirs: vec!["/tmp".to_string(), "/var/run".to_string()],
            proc_files: [
                (
                    "/proc/cpuinfo".to_string(),
                    "Processor\t: ARM926EJ-S rev 5 (v5l)\nHardware\t: hi3511\n".to_string(),
                ),
                (
                    "/proc/hiversion".to_string(),
                    "HiLinux 2.6.24 Dahua DH-3004 V1.0.7\n".to_string(),
                ),
            ]
            .into_iter()
            .collect(),
        }
    }

    pub fn accepts(&self, username: &str, password: &str) -> bool {
        self.credentials
            .iter()
            .any(|(u, p)| u == username && p == password)
    }
}

/// Power state. `Hung` means frozen: no command processing, no network
/// response, resident processes stalled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Power {
    On,
    Off,
    Rebooting,
    Hung,
}

/// What kind of code a resident process is. Rival detection keys on this,
/// never on the randomized display name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessFamily {
    None,
    Mirai,
    Expeller,
    OtherMalware,
}

pub type Pid = u32;

/// One entry in the volatile process table.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessEntry {
    pub pid: Pid,
    pub display_name: String,
    pub family: ProcessFamily,
    pub bound_ports: BTreeSet<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortState {
    Open,
    Closed,
    Bound(Pid),
}

pub type SessionId = u64;

/// Opaque tag identifying who opened a session, echoed back on replies and
/// severance notices. The world maps it to an entity.
pub type SessionOwner = u64;

#[derive(Debug, Clone, PartialEq)]
pub enum SessionState {
    /// Credentials submitted, auth check still consuming virtual time.
    Pending {
        username: String,
        password: String,
    },
    Authenticated {
        username: String,
    },
}

/// A telnet-style shell session. Commands are rejected until authentication
/// succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: SessionId,
    pub owner: SessionOwner,
    pub state: SessionState,
}

/// Commands understood by the shell, sufficient for the full in-memory
/// implant sequence. `WriteFile` stands for the echo/wget/tftp transports as
/// one logical transfer with a size-proportional duration.
#[derive(Debug, Clone, PartialEq)]
pub enum ShellCommand {
    CheckBusybox,
    FindWritableDir,
    WriteFile { path: String, bytes: u64 },
    ExecBinary { path: String, family: ProcessFamily },
    DeleteFile { path: String },
    ReadProc { path: String },
    Kill { pid: Pid },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CmdOutput {
    Busybox(bool),
    WritableDir(String),
    Written,
    Spawned(Pid),
    Deleted,
    ProcContent(String),
    Killed(Vec<Pid>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("no read-writable directory")]
    NoWritableDir,
    #[error("no such file")]
    NoSuchFile,
    #[error("permission denied")]
    Permission,
    #[error("no such session")]
    NoSession,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LoginError {
    #[error("authentication failed")]
    AuthFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("port already bound by pid {holder}")]
pub struct AlreadyBound {
    pub holder: Pid,
}

/// Per-command virtual-time costs.
#[derive(Debug, Clone, Copy)]
pub struct DeviceCosts {
    pub cmd_ms: u64,
    /// Transfer throughput for `WriteFile` payload bytes.
    pub transfer_bytes_per_ms: u64,
    pub boot_delay_ms: u64,
    pub watchdog_period_ms: u64,
}

impl Default for DeviceCosts {
    fn default() -> Self {
        DeviceCosts {
            cmd_ms: DEFAULT_CMD_DURATION_MS,
            transfer_bytes_per_ms: 8,
            boot_delay_ms: crate::simkernel::DEFAULT_BOOT_DELAY_MS,
            watchdog_period_ms: crate::simkernel::DEFAULT_WATCHDOG_PERIOD_MS,
        }
    }
}

/// Snapshot of everything observable about a device's volatile state, used
/// by tests asserting pristine boots and residue-free aborts. Allocator
/// counters and RNG cursors are deliberately excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableState {
    pub power: Power,
    pub ports: BTreeMap<u16, PortState>,
    pub processes: Vec<ProcessEntry>,
    pub fs_overlay: BTreeMap<String, u64>,
    pub watchdog_enabled: bool,
    pub session_count: usize,
}

/// Full runtime state of one simulated IoT endpoint.
#[derive(Debug, Clone)]
pub struct Device {
    pub profile: DeviceProfile,
    pub addr: Ipv4,
    /// Public-IP/UPnP flag; unreachable devices never see traffic.
    pub reachable: bool,
    pub power: Power,
    /// Incremented at every reboot/power-off so stale timers can be dropped.
    pub boot_epoch: u64,
    pub watchdog_enabled: bool,
    costs: DeviceCosts,
    port_overrides: BTreeMap<u16, PortState>,
    processes: Vec<ProcessEntry>,
    fs_overlay: BTreeMap<String, u64>,
    sessions: BTreeMap<SessionId, Session>,
    next_pid: Pid,
    next_session: SessionId,
    name_rng: RngStream,
}

impl Device {
    pub fn new(
        profile: DeviceProfile,
        addr: Ipv4,
        reachable: bool,
        costs: DeviceCosts,
        name_rng: RngStream,
    ) -> Self {
        Device {
            profile,
            addr,
            reachable,
            power: Power::On,
            boot_epoch: 0,
            watchdog_enabled: true,
            costs,
            port_overrides: BTreeMap::new(),
            processes: Vec::new(),
            fs_overlay: BTreeMap::new(),
            sessions: BTreeMap::new(),
            next_pid: 100,
            next_session: 1,
            name_rng,
        }
    }

    pub fn costs(&self) -> DeviceCosts {
        self.costs
    }

    pub fn port_state(&self, port: u16) -> PortState {
        if let Some(&s) = self.port_overrides.get(&port) {
            return s;
        }
        if self.profile.open_ports.contains(&port) {
            PortState::Open
        } else {
            PortState::Closed
        }
    }

    /// True when the port accepts new inbound connections.
    pub fn port_accepts(&self, port: u16) -> bool {
        matches!(self.port_state(port), PortState::Open | PortState::Bound(_))
    }

    pub fn processes(&self) -> &[ProcessEntry] {
        &self.processes
    }

    pub fn live_family_count(&self, family: ProcessFamily) -> usize {
        self.processes.iter().filter(|p| p.family == family).count()
    }

    pub fn fs_contains(&self, path: &str) -> bool {
        self.fs_overlay.contains_key(path)
    }

    pub fn observable_state(&self) -> ObservableState {
        let mut ports = BTreeMap::new();
        for &p in self
            .profile
            .open_ports
            .iter()
            .chain(self.port_overrides.keys())
        {
            ports.insert(p, self.port_state(p));
        }
        ObservableState {
            power: self.power,
            ports,
            processes: self.processes.clone(),
            fs_overlay: self.fs_overlay.clone(),
            watchdog_enabled: self.watchdog_enabled,
            session_count: self.sessions.len(),
        }
    }

    /// True when the volatile state equals a freshly booted image.
    pub fn is_pristine(&self) -> bool {
        self.power == Power::On
            && self.processes.is_empty()
            && self.fs_overlay.is_empty()
            && self.sessions.is_empty()
            && self.watchdog_enabled
            && self
                .profile
                .open_ports
                .iter()
                .all(|&p| self.port_state(p) == PortState::Open)
            && self.port_overrides.iter().all(|(p, _)| {
                self.port_state(*p)
                    == if self.profile.open_ports.contains(p) {
                        PortState::Open
                    } else {
                        PortState::Closed
                    }
            })
    }

    // ---- power ---------------------------------------------------------

    /// Starts a reboot: device goes dark immediately, volatile state is
    /// dropped, every in-flight session is severed. Returns the owners of
    /// severed sessions so the world can notify them.
    pub fn begin_reboot(&mut self) -> Vec<(SessionId, SessionOwner)> {
        let severed = self.sever_sessions();
        self.power = Power::Rebooting;
        self.boot_epoch += 1;
        self.wipe_volatile();
        severed
    }

    /// Cuts power without scheduling a boot.
    pub fn power_off(&mut self) -> Vec<(SessionId, SessionOwner)> {
        let severed = self.sever_sessions();
        self.power = Power::Off;
        self.boot_epoch += 1;
        self.wipe_volatile();
        severed
    }

    /// Completes a reboot: pristine state, profile ports open, watchdog on.
    pub fn complete_boot(&mut self) {
        self.wipe_volatile();
        self.watchdog_enabled = true;
        self.power = Power::On;
    }

    /// Freezes the device. With the watchdog enabled the caller is expected
    /// to schedule the forced reboot.
    pub fn hang(&mut self) -> Vec<(SessionId, SessionOwner)> {
        let severed = self.sever_sessions();
        self.power = Power::Hung;
        severed
    }

    fn wipe_volatile(&mut self) {
        self.port_overrides.clear();
        self.processes.clear();
        self.fs_overlay.clear();
        self.sessions.clear();
    }

    fn sever_sessions(&mut self) -> Vec<(SessionId, SessionOwner)> {
        let severed = self.sessions.values().map(|s| (s.id, s.owner)).collect();
        self.sessions.clear();
        severed
    }

    /// Severs every live session without touching the rest of the state;
    /// models the defense killing the remote-access daemons it blocks.
    pub fn sever_all_sessions(&mut self) -> Vec<(SessionId, SessionOwner)> {
        self.sever_sessions()
    }

    // ---- telnet --------------------------------------------------------

    /// Handles an inbound connection on the telnet port: records a pending
    /// session whose credential check completes after one command duration.
    /// The caller must already have verified power/reachability/port.
    pub fn connect_telnet(
        &mut self,
        owner: SessionOwner,
        username: String,
        password: String,
    ) -> SessionId {
        let id = self.next_session;
        self.next_session += 1;
        self.sessions.insert(
            id,
            Session {
                id,
                owner,
                state: SessionState::Pending { username, password },
            },
        );
        id
    }

    /// Resolves a pending credential check. `None` when the session vanished
    /// (severed in the meantime).
    pub fn finish_auth(&mut self, session: SessionId) -> Option<Result<SessionId, LoginError>> {
        let entry = self.sessions.get_mut(&session)?;
        let SessionState::Pending { username, password } = entry.state.clone() else {
            return None;
        };
        if self.profile.accepts(&username, &password) {
            entry.state = SessionState::Authenticated { username };
            Some(Ok(session))
        } else {
            self.sessions.remove(&session);
            Some(Err(LoginError::AuthFailed))
        }
    }

    pub fn session_owner(&self, session: SessionId) -> Option<SessionOwner> {
        self.sessions.get(&session).map(|s| s.owner)
    }

    pub fn close_session(&mut self, session: SessionId) {
        self.sessions.remove(&session);
    }

    fn authed_session(&self, session: SessionId) -> Result<&Session, ExecError> {
        match self.sessions.get(&session) {
            Some(s) if matches!(s.state, SessionState::Authenticated { .. }) => Ok(s),
            _ => Err(ExecError::NoSession),
        }
    }

    // ---- shell algebra -------------------------------------------------

    /// Virtual duration one command occupies the device.
    pub fn command_cost_ms(&self, cmd: &ShellCommand) -> u64 {
        match cmd {
            ShellCommand::WriteFile { bytes, .. } => {
                self.costs.cmd_ms + bytes / self.costs.transfer_bytes_per_ms.max(1)
            }
            _ => self.costs.cmd_ms,
        }
    }

    /// Validates that a command may start on `session`. No result is ever
    /// produced for an unauthenticated session.
    pub fn begin_command(&self, session: SessionId) -> Result<(), ExecError> {
        self.authed_session(session).map(|_| ())
    }

    /// Applies a command's effect at its completion time. `None` when the
    /// session no longer exists.
    pub fn finish_command(
        &mut self,
        session: SessionId,
        cmd: &ShellCommand,
    ) -> Option<Result<CmdOutput, ExecError>> {
        if self.authed_session(session).is_err() {
            return None;
        }
        Some(self.apply_command(cmd))
    }

    fn apply_command(&mut self, cmd: &ShellCommand) -> Result<CmdOutput, ExecError> {
        match cmd {
            ShellCommand::CheckBusybox => Ok(CmdOutput::Busybox(self.profile.busybox)),
            ShellCommand::FindWritableDir => self
                .profile
                .writable_dirs
                .first()
                .cloned()
                .map(CmdOutput::WritableDir)
                .ok_or(ExecError::NoWritableDir),
            ShellCommand::WriteFile { path, bytes } => {
                if !self
                    .profile
                    .writable_dirs
                    .iter()
                    .any(|d| path.starts_with(d.as_str()))
                {
                    return Err(ExecError::Permission);
                }
                self.fs_overlay.insert(path.clone(), *bytes);
                Ok(CmdOutput::Written)
            }
            ShellCommand::ExecBinary { path, family } => {
                if !self.fs_overlay.contains_key(path) {
                    return Err(ExecError::NoSuchFile);
                }
                let pid = self.spawn_process(*family);
                Ok(CmdOutput::Spawned(pid))
            }
            ShellCommand::DeleteFile { path } => {
                if self.fs_overlay.remove(path).is_none() {
                    return Err(ExecError::NoSuchFile);
                }
                Ok(CmdOutput::Deleted)
            }
            ShellCommand::ReadProc { path } => self
                .profile
                .proc_files
                .get(path)
                .cloned()
                .map(CmdOutput::ProcContent)
                .ok_or(ExecError::NoSuchFile),
            ShellCommand::Kill { pid } => Ok(CmdOutput::Killed(self.kill_pid(*pid))),
        }
    }

    // ---- processes and ports -------------------------------------------

    /// Spawns a process running from memory, hidden behind a random
    /// 8-character display name.
    pub fn spawn_process(&mut self, family: ProcessFamily) -> Pid {
        let pid = self.next_pid;
        self.next_pid += 1;
        let display_name = self.name_rng.alnum_string(8);
        self.processes.push(ProcessEntry {
            pid,
            display_name,
            family,
            bound_ports: BTreeSet::new(),
        });
        pid
    }

    /// Binds `port` to `pid`. A port held by a live process conflicts; ports
    /// held by dead pids were already released.
    pub fn bind_port(&mut self, pid: Pid, port: u16) -> Result<(), AlreadyBound> {
        if let PortState::Bound(holder) = self.port_state(port) {
            if holder != pid {
                return Err(AlreadyBound { holder });
            }
            return Ok(());
        }
        self.port_overrides.insert(port, PortState::Bound(pid));
        if let Some(p) = self.processes.iter_mut().find(|p| p.pid == pid) {
            p.bound_ports.insert(port);
        }
        Ok(())
    }

    /// Closes a port to new connections. Closing a port that was never open
    /// is a no-op in effect but recorded the same way.
    pub fn close_port(&mut self, port: u16) {
        self.port_overrides.insert(port, PortState::Closed);
    }

    /// Watchdog ioctl: the disable code turns reboot-on-hang off, anything
    /// else is acknowledged without effect.
    pub fn set_watchdog(&mut self, request: u32) {
        if request == WATCHDOG_DISABLE_CODE {
            self.watchdog_enabled = false;
        }
    }

    pub fn rename_process(&mut self, pid: Pid) {
        let name = self.name_rng.alnum_string(8);
        if let Some(p) = self.processes.iter_mut().find(|p| p.pid == pid) {
            p.display_name = name;
        }
    }

    /// Kills one process, releasing its port bindings. Returns the pids
    /// actually removed (empty when none matched).
    pub fn kill_pid(&mut self, pid: Pid) -> Vec<Pid> {
        let Some(idx) = self.processes.iter().position(|p| p.pid == pid) else {
            return Vec::new();
        };
        let entry = self.processes.remove(idx);
        for port in &entry.bound_ports {
            self.port_overrides.remove(port);
        }
        vec![pid]
    }

    /// Kills every live process whose family is in `families`. Selection is
    /// by family tag only; display names are camouflage.
    pub fn kill_families(&mut self, families: &[ProcessFamily]) -> Vec<Pid> {
        let victims: Vec<Pid> = self
            .processes
            .iter()
            .filter(|p| families.contains(&p.family))
            .map(|p| p.pid)
            .collect();
        for pid in &victims {
            self.kill_pid(*pid);
        }
        victims
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_device() -> Device {
        Device::new(
            DeviceProfile::dh3004(),
            Ipv4::new(1, 1, 0, 9),
            true,
            DeviceCosts::default(),
            RngStream::derive(1, "device-test"),
        )
    }

    fn login(dev: &mut Device, user: &str, pass: &str) -> Result<SessionId, LoginError> {
        let sid = dev.connect_telnet(0, user.to_string(), pass.to_string());
        dev.finish_auth(sid).expect("session present")
    }

    #[test]
    fn dh3004_profile_matches_hardware() {
        let p = DeviceProfile::dh3004();
        assert_eq!(
            p.open_ports,
            [23, 80, 101, 102, 554, 6623].into_iter().collect()
        );
        assert!(p.accepts("root", ""));
        assert_eq!(p.ram_mb, 43);
        assert!(p.busybox);
    }

    #[test]
    fn root_no_password_authenticates() {
        let mut dev = test_device();
        assert!(login(&mut dev, "root", "").is_ok());
        assert_eq!(
            login(&mut dev, "root", "wrong"),
            Err(LoginError::AuthFailed)
        );
    }

    #[test]
    fn unauthenticated_session_gets_no_command_result() {
        let mut dev = test_device();
        let sid = dev.connect_telnet(0, "root".into(), "".into());
        // auth has not finished yet
        assert_eq!(dev.begin_command(sid), Err(ExecError::NoSession));
        assert!(dev
            .finish_command(sid, &ShellCommand::CheckBusybox)
            .is_none());
        // unknown session
        assert_eq!(dev.begin_command(999), Err(ExecError::NoSession));
    }

    #[test]
    fn seven_step_load_sequence_is_expressible() {
        // Golden script: the whole in-memory implant runs on the exec
        // algebra alone and leaves one live process and no file behind.
        let mut dev = test_device();
        let sid = login(&mut dev, "root", "").unwrap();

        let busybox = dev
            .finish_command(sid, &ShellCommand::CheckBusybox)
            .unwrap();
        assert_eq!(busybox, Ok(CmdOutput::Busybox(true)));

        let dir = match dev
            .finish_command(sid, &ShellCommand::FindWritableDir)
            .unwrap()
        {
            Ok(CmdOutput::WritableDir(d)) => d,
            other => panic!("unexpected {other:?}"),
        };

        let helper = format!("{dir}/.echo");
        let payload = format!("{dir}/dvrHelper");
        dev.finish_command(
            sid,
            &ShellCommand::WriteFile {
                path: helper.clone(),
                bytes: 1024,
            },
        )
        .unwrap()
        .unwrap();
        dev.finish_command(
            sid,
            &ShellCommand::WriteFile {
                path: payload.clone(),
                bytes: 56_000,
            },
        )
        .unwrap()
        .unwrap();

        let pid = match dev
            .finish_command(
                sid,
                &ShellCommand::ExecBinary {
                    path: payload.clone(),
                    family: ProcessFamily::Mirai,
                },
            )
            .unwrap()
        {
            Ok(CmdOutput::Spawned(pid)) => pid,
            other => panic!("unexpected {other:?}"),
        };

        dev.finish_command(
            sid,
            &ShellCommand::DeleteFile {
                path: payload.clone(),
            },
        )
        .unwrap()
        .unwrap();
        dev.finish_command(sid, &ShellCommand::DeleteFile { path: helper })
            .unwrap()
            .unwrap();

        // process still running, file absent
        assert!(dev.processes().iter().any(|p| p.pid == pid));
        assert!(!dev.fs_contains(&payload));
    }

    #[test]
    fn reboot_wipes_infection() {
        let mut dev = test_device();
        let sid = login(&mut dev, "root", "").unwrap();
        dev.finish_command(
            sid,
            &ShellCommand::WriteFile {
                path: "/tmp/x".into(),
                bytes: 10,
            },
        )
        .unwrap()
        .unwrap();
        let pid = dev.spawn_process(ProcessFamily::Mirai);
        dev.bind_port(pid, SINGLE_INSTANCE_PORT).unwrap();
        dev.close_port(23);
        dev.set_watchdog(WATCHDOG_DISABLE_CODE);
        assert!(!dev.is_pristine());

        dev.begin_reboot();
        dev.complete_boot();
        assert!(dev.is_pristine());
        assert_eq!(dev.port_state(23), PortState::Open);
        assert!(dev.processes().is_empty());
        assert!(dev.watchdog_enabled);
    }

    #[test]
    fn reboot_of_clean_device_is_idempotent() {
        let mut dev = test_device();
        let before = dev.observable_state();
        dev.begin_reboot();
        dev.complete_boot();
        assert_eq!(dev.observable_state(), before);
    }

    #[test]
    fn reboot_severs_sessions() {
        let mut dev = test_device();
        let sid = login(&mut dev, "root", "").unwrap();
        let severed = dev.begin_reboot();
        assert_eq!(severed.len(), 1);
        assert_eq!(severed[0].0, sid);
        dev.complete_boot();
        assert_eq!(dev.begin_command(sid), Err(ExecError::NoSession));
    }

    #[test]
    fn port_binding_conflicts_and_cleanup() {
        let mut dev = test_device();
        let first = dev.spawn_process(ProcessFamily::Mirai);
        let second = dev.spawn_process(ProcessFamily::Mirai);

        assert!(dev.bind_port(first, SINGLE_INSTANCE_PORT).is_ok());
        let err = dev.bind_port(second, SINGLE_INSTANCE_PORT).unwrap_err();
        assert_eq!(err.holder, first);

        // bindings are released on process death
        dev.kill_pid(first);
        assert!(dev.bind_port(second, SINGLE_INSTANCE_PORT).is_ok());
    }

    #[test]
    fn watchdog_codes() {
        let mut dev = test_device();
        dev.set_watchdog(0x0000_0000);
        assert!(dev.watchdog_enabled);
        dev.set_watchdog(WATCHDOG_DISABLE_CODE);
        assert!(!dev.watchdog_enabled);
    }

    #[test]
    fn write_outside_writable_dirs_is_denied() {
        let mut dev = test_device();
        let sid = login(&mut dev, "root", "").unwrap();
        let res = dev
            .finish_command(
                sid,
                &ShellCommand::WriteFile {
                    path: "/etc/passwd".into(),
                    bytes: 1,
                },
            )
            .unwrap();
        assert_eq!(res, Err(ExecError::Permission));
    }

    #[test]
    fn read_proc_returns_profile_content() {
        let mut dev = test_device();
        let sid = login(&mut dev, "root", "").unwrap();
        let res = dev
            .finish_command(
                sid,
                &ShellCommand::ReadProc {
                    path: "/proc/hiversion".into(),
                },
            )
            .unwrap()
            .unwrap();
        match res {
            CmdOutput::ProcContent(c) => assert!(c.contains("Dahua")),
            other => panic!("unexpected {other:?}"),
        }
        let missing = dev
            .finish_command(
                sid,
                &ShellCommand::ReadProc {
                    path: "/proc/nope".into(),
                },
            )
            .unwrap();
        assert_eq!(missing, Err(ExecError::NoSuchFile));
    }

    #[test]
    fn exec_binary_requires_file() {
        let mut dev = test_device();
        let sid = login(&mut dev, "root", "").unwrap();
        let res = dev
            .finish_command(
                sid,
                &ShellCommand::ExecBinary {
                    path: "/tmp/ghost".into(),
                    family: ProcessFamily::Mirai,
                },
            )
            .unwrap();
        assert_eq!(res, Err(ExecError::NoSuchFile));
    }

    #[test]
    fn no_writable_dir_error() {
        let mut profile = DeviceProfile::dh3004();
        profile.writable_dirs.clear();
        let mut dev = Device::new(
            profile,
            Ipv4::new(1, 1, 0, 9),
            true,
            DeviceCosts::default(),
            RngStream::derive(1, "nw"),
        );
        let sid = login(&mut dev, "root", "").unwrap();
        let res = dev
            .finish_command(sid, &ShellCommand::FindWritableDir)
            .unwrap();
        assert_eq!(res, Err(ExecError::NoWritableDir));
    }

    #[test]
    fn kill_by_family_ignores_display_name() {
        let mut dev = test_device();
        let rival = dev.spawn_process(ProcessFamily::Expeller);
        let own = dev.spawn_process(ProcessFamily::Mirai);
        let other = dev.spawn_process(ProcessFamily::OtherMalware);
        let killed = dev.kill_families(&[ProcessFamily::Expeller, ProcessFamily::OtherMalware]);
        assert_eq!(killed, vec![rival, other]);
        assert!(dev.processes().iter().any(|p| p.pid == own));
    }

    #[test]
    fn write_file_cost_scales_with_size() {
        let dev = test_device();
        let small = dev.command_cost_ms(&ShellCommand::CheckBusybox);
        let big = dev.command_cost_ms(&ShellCommand::WriteFile {
            path: "/tmp/b".into(),
            bytes: 56_000,
        });
        assert_eq!(small, 200);
        assert_eq!(big, 200 + 56_000 / 8);
    }

    #[test]
    fn pids_are_unique_and_ports_exclusive() {
        let mut dev = test_device();
        let mut pids = std::collections::BTreeSet::new();
        for _ in 0..50 {
            assert!(pids.insert(dev.spawn_process(ProcessFamily::None)));
        }
        let a = *pids.iter().next().unwrap();
        dev.bind_port(a, 50_000).unwrap();
        for &p in pids.iter().skip(1) {
            assert!(dev.bind_port(p, 50_000).is_err());
        }
    }
}
