//! The composed simulation world: devices, the implanter server, the wild
//! botnet, and the event dispatch that drives them all on one deterministic
//! loop.
//!
//! Network semantics: a message is delivered after the configured latency
//! iff the destination port accepts and the device is powered and reachable;
//! otherwise a refusal reaches the sender at that same instant. Established
//! shell sessions survive a bot blocking ports (connection-tracking
//! behavior) but not a reboot; the expeller's blocking module severs live
//! sessions, and a statistical takeover (which compresses a whole hostile
//! pipeline into one instant) severs them as well.

use std::collections::BTreeMap;

use crate::blackbot::{
    bot_initialize, emit, ingest, ip_is_scannable, try_order, InitOutcome, LoadAction, LoadError,
    LoadManager, ScanAttempt, ScanReport, Scanner,
};
use crate::device::{
    CmdOutput, Device, DeviceCosts, LoginError, Pid, Power, ProcessFamily, SessionId, ShellCommand,
    TELNET_PORT,
};
use crate::simkernel::{Address, Event, Ipv4, Kernel, RngStream, SendError, SimTime, Universe};
use crate::whitebot::{
    finish_start, heartbeat_parse, ExpellerAgent, ExpellerConfig, ExpellerStage, FingerprintPolicy,
    Implanter, ImplanterConfig, JobReason, JobStatus, Observation, ProbeState, StartOutcome,
    FINGERPRINT_PROC_READS, HEARTBEAT_PORT,
};

use super::config::{DeviceAction, MiraiMode, PhaseDecl, ScenarioConfig};
use super::metrics::{
    kv, EventLog, IntervalKind, MetricsCollector, RaceOutcome, RunMetrics, Winner,
};
use super::SimError;

pub type ConnId = u64;

/// Anything that can be the target of an event or the initiator of a
/// connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityRef {
    World,
    Device(usize),
    Agent(usize),
    Implanter,
    WildHost,
    WildBot(usize),
}

/// Application messages carried over the simulated network.
#[derive(Debug, Clone)]
pub enum NetMsg {
    Connect {
        conn: ConnId,
        username: String,
        password: String,
        initiator: EntityRef,
    },
    Command {
        conn: ConnId,
        session: SessionId,
        cmd: ShellCommand,
        initiator: EntityRef,
    },
    Logout {
        conn: ConnId,
        session: SessionId,
    },
    ReportLine(Vec<u8>),
    HeartbeatFrame(Vec<u8>),
}

/// Responses and notices routed straight to an initiating entity.
#[derive(Debug, Clone)]
pub enum Reply {
    LoginResult {
        conn: ConnId,
        result: Result<SessionId, LoginError>,
    },
    CmdResult {
        conn: ConnId,
        result: Result<CmdOutput, crate::device::ExecError>,
    },
    ConnectFailed {
        conn: ConnId,
        error: SendError,
    },
    Severed {
        conn: ConnId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoaderHost {
    Implanter,
    Wild,
}

#[derive(Debug, Clone)]
enum Timer {
    BootDone {
        device: usize,
        epoch: u64,
    },
    WatchdogFire {
        device: usize,
        epoch: u64,
    },
    AuthDone {
        device: usize,
        session: SessionId,
        conn: ConnId,
        initiator: EntityRef,
    },
    CmdDone {
        device: usize,
        session: SessionId,
        cmd: ShellCommand,
        conn: ConnId,
        initiator: EntityRef,
    },
    ProbeLaunch {
        job: u64,
    },
    SweepResume {
        job: u64,
    },
    HeartbeatCheck,
    ScanTick {
        scanner: EntityRef,
    },
    ExpellerStep {
        agent: usize,
    },
    HeartbeatBeat {
        agent: usize,
    },
    PhaseStart {
        idx: usize,
    },
    Injected {
        idx: usize,
    },
    StatArrival {
        device: usize,
        epoch: u64,
    },
    DirectedAttempt {
        n: u32,
    },
    PayloadFetched {
        host: LoaderHost,
        job: u64,
    },
}

#[derive(Debug)]
enum Payload {
    Deliver {
        from: Address,
        to: Address,
        msg: NetMsg,
    },
    Reply(Reply),
    Timer(Timer),
}

#[derive(Debug)]
struct Envelope {
    target: EntityRef,
    payload: Payload,
}

#[derive(Debug)]
enum AgentKind {
    Bot(Scanner),
    Expeller(ExpellerAgent),
}

#[derive(Debug)]
struct AgentSlot {
    alive: bool,
    device: usize,
    pid: Pid,
    device_epoch: u64,
    kind: AgentKind,
}

#[derive(Debug)]
struct WildHost {
    addr: Ipv4,
    loads: LoadManager,
    probes: BTreeMap<ConnId, ScanAttempt>,
    payload_bytes: u64,
}

#[derive(Debug)]
struct RaceState {
    device: usize,
    reboot_at: SimTime,
    winner: Option<Winner>,
}

/// Network accounting for the conservation property: every sent message is
/// delivered, refused, or unreachable; nothing is silently dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetCounters {
    pub sent: u64,
    pub delivered: u64,
    pub refused: u64,
    pub unreachable: u64,
}

/// The whole simulated world for one run. Owns every entity; nothing inside
/// is shared across runs.
pub struct World {
    kernel: Kernel<Envelope>,
    cfg: ScenarioConfig,
    universe: Universe,
    latency_ms: u64,
    devices: Vec<Device>,
    device_by_addr: BTreeMap<Ipv4, usize>,
    agents: Vec<AgentSlot>,
    implanter: Option<Implanter>,
    wild: Option<WildHost>,
    wildbots: Vec<Scanner>,
    wildbot_addrs: Vec<Ipv4>,
    wild_creds: Vec<(String, String)>,
    arrival_rngs: Vec<RngStream>,
    conn_initiators: BTreeMap<ConnId, EntityRef>,
    next_conn: ConnId,
    races: Vec<RaceState>,
    log: EventLog,
    metrics: MetricsCollector,
    pub net: NetCounters,
}

impl World {
    /// Builds a world from a validated configuration.
    pub fn new(cfg: &ScenarioConfig) -> Result<World, SimError> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let seed = cfg.seed;
        let costs = DeviceCosts {
            cmd_ms: cfg.timing.cmd_duration_ms,
            transfer_bytes_per_ms: cfg.timing.transfer_bytes_per_ms,
            boot_delay_ms: cfg.timing.boot_delay_ms,
            watchdog_period_ms: cfg.timing.watchdog_period_ms,
        };

        let mut devices = Vec::new();
        let mut device_by_addr = BTreeMap::new();
        let mut arrival_rngs = Vec::new();
        for decl in &cfg.devices {
            let profile = decl.profile.resolve()?;
            let idx = devices.len();
            device_by_addr.insert(decl.address, idx);
            devices.push(Device::new(
                profile,
                decl.address,
                decl.reachable,
                costs,
                RngStream::derive(seed, &format!("device/{}", decl.address)),
            ));
            arrival_rngs.push(RngStream::derive(
                seed,
                &format!("arrival/{}", decl.address),
            ));
        }

        let implanter = cfg.implanter.as_ref().map(|decl| {
            let icfg = ImplanterConfig {
                probe_interval_ms: ((1000.0 / decl.scan_rate).round() as u64).max(1),
                check_period_ms: decl.check_period_ms,
                blocked_ports: decl.blocked_ports.clone(),
                block_http: decl.block_http,
                credentials: decl.credentials.clone(),
                fingerprint: FingerprintPolicy {
                    required: decl.fingerprint.clone(),
                },
                payload_bytes: decl.payload_bytes,
                helper_bytes: cfg.timing.helper_bytes,
                resweep_delay_ms: decl.resweep_delay_ms,
                reimplant_prefix_bits: decl.reimplant_prefix_bits,
                heartbeat_interval_ms: decl.heartbeat_interval_ms,
                heartbeat_timeout_ms: decl.heartbeat_timeout_ms,
                http_bytes_per_ms: cfg.timing.http_bytes_per_ms,
            };
            Implanter::new(decl.addr, icfg)
        });

        let metrics = MetricsCollector::new(
            seed,
            cfg.horizon_ms,
            &cfg.devices.iter().map(|d| d.address).collect::<Vec<_>>(),
        );

        let mut world = World {
            kernel: Kernel::new(),
            universe: cfg.universe(),
            latency_ms: cfg.latency_ms,
            devices,
            device_by_addr,
            agents: Vec::new(),
            implanter,
            wild: None,
            wildbots: Vec::new(),
            wildbot_addrs: Vec::new(),
            wild_creds: try_order(&crate::blackbot::credential_table()),
            arrival_rngs,
            conn_initiators: BTreeMap::new(),
            next_conn: 0,
            races: Vec::new(),
            log: EventLog::default(),
            metrics,
            net: NetCounters::default(),
            cfg,
        };
        world.bootstrap()?;
        Ok(world)
    }

    fn bootstrap(&mut self) -> Result<(), SimError> {
        // wild side
        if let Some(m) = self.cfg.mirai.clone() {
            match m.mode {
                MiraiMode::Mechanistic | MiraiMode::Directed => {
                    let scanlisten = m.scanlisten_addr.expect("validated");
                    self.wild = Some(WildHost {
                        addr: scanlisten.ip,
                        loads: LoadManager::new(),
                        probes: BTreeMap::new(),
                        payload_bytes: m.payload_bytes,
                    });
                    if m.mode == MiraiMode::Mechanistic {
                        let base = Ipv4::new(198, 51, 100, 100).to_u32();
                        for i in 0..m.bot_count {
                            let rng = RngStream::derive(self.cfg.seed, &format!("wildbot/{i}"));
                            let scanner = Scanner::new(scanlisten, m.scan_rate, rng);
                            let interval = scanner.scan_interval_ms;
                            self.wildbots.push(scanner);
                            self.wildbot_addrs.push(Ipv4::from_u32(base + i));
                            self.schedule_timer(
                                interval,
                                EntityRef::WildBot(i as usize),
                                Timer::ScanTick {
                                    scanner: EntityRef::WildBot(i as usize),
                                },
                            );
                        }
                    } else {
                        self.schedule_timer(0, EntityRef::World, Timer::DirectedAttempt { n: 0 });
                    }
                }
                MiraiMode::Statistical => {
                    for device in 0..self.devices.len() {
                        self.arm_arrival(device);
                    }
                }
            }
        }

        // implanter services
        if self.implanter.is_some() {
            self.schedule_timer(0, EntityRef::Implanter, Timer::HeartbeatCheck);
        }

        // pre-installed expellers
        for idx in 0..self.cfg.devices.len() {
            if self.cfg.devices[idx].expeller_preinstalled {
                self.preinstall_expeller(idx)?;
            }
        }

        // phases and injected faults
        for (idx, phase) in self.cfg.phases.clone().iter().enumerate() {
            let at = match phase {
                PhaseDecl::Deployment { start_ms, .. } => *start_ms,
                PhaseDecl::Negotiation { reboot_at_ms, .. } => *reboot_at_ms,
            };
            self.schedule_timer_at(at, EntityRef::World, Timer::PhaseStart { idx });
        }
        for (idx, ev) in self.cfg.injected_events.clone().iter().enumerate() {
            self.schedule_timer_at(ev.at_ms, EntityRef::World, Timer::Injected { idx });
        }
        Ok(())
    }

    fn preinstall_expeller(&mut self, device: usize) -> Result<(), SimError> {
        let ecfg = self.expeller_config();
        let pid = self.devices[device].spawn_process(ProcessFamily::Expeller);
        match finish_start(&mut self.devices[device], pid, &ecfg) {
            StartOutcome::Protected { .. } => {}
            other => {
                return Err(SimError::Validation(format!(
                    "expeller_preinstalled failed on {}: {:?}",
                    self.devices[device].addr, other
                )))
            }
        }
        let epoch = self.devices[device].boot_epoch;
        let agent = self.push_agent(
            device,
            pid,
            epoch,
            AgentKind::Expeller(ExpellerAgent {
                stage: ExpellerStage::Running,
                cfg: ecfg,
            }),
        );
        let addr = self.devices[device].addr;
        self.log(
            addr.to_string(),
            "expeller_started",
            vec![kv("preinstalled", "true")],
        );
        self.metrics
            .open(device, IntervalKind::Protected, self.now());
        self.metrics.counts.expeller_implants += 1;
        self.schedule_timer(0, EntityRef::Agent(agent), Timer::HeartbeatBeat { agent });
        Ok(())
    }

    fn expeller_config(&self) -> ExpellerConfig {
        let imp = self
            .implanter
            .as_ref()
            .expect("validated: implanter present");
        ExpellerConfig {
            blocked_ports: imp.cfg.blocked_ports.clone(),
            block_http: imp.cfg.block_http,
            heartbeat_interval_ms: imp.cfg.heartbeat_interval_ms,
            server: Address::new(imp.addr, HEARTBEAT_PORT),
            fingerprint: imp.cfg.fingerprint.clone(),
        }
    }

    // ---- public run API --------------------------------------------------

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    /// Runs until the given virtual time (capped at the configured horizon).
    pub fn run_to(&mut self, limit_ms: u64) -> Result<(), SimError> {
        let limit = SimTime::from_ms(limit_ms.min(self.cfg.horizon_ms));
        while let Some(ev) = self.kernel.pop_within(limit) {
            self.dispatch(ev);
            if self.kernel.processed() > self.kernel.event_cap {
                return Err(SimError::Livelock(self.kernel.event_cap));
            }
            self.track_mirai_peak();
        }
        Ok(())
    }

    pub fn horizon_ms(&self) -> u64 {
        self.cfg.horizon_ms
    }

    pub fn wild_first_report_ms(&self) -> Option<u64> {
        self.metrics.wild_first_report_ms
    }

    pub fn device_by_addr(&self, addr: Ipv4) -> Option<&Device> {
        self.device_by_addr.get(&addr).map(|&i| &self.devices[i])
    }

    pub fn log_ref(&self) -> &EventLog {
        &self.log
    }

    /// Finalizes the run and yields its observables.
    pub fn finish(mut self) -> (RunMetrics, EventLog) {
        let horizon = SimTime::from_ms(self.cfg.horizon_ms);
        for race in &self.races {
            let outcome = RaceOutcome {
                device: self.devices[race.device].addr,
                reboot_at_ms: race.reboot_at.as_ms(),
                winner: race.winner.unwrap_or(Winner::Neither),
            };
            self.metrics.race_winners.push(outcome);
        }
        let metrics = self.metrics.finalize(horizon, self.kernel.processed());
        (metrics, self.log)
    }

    // ---- plumbing ---------------------------------------------------------

    fn log(&mut self, entity: impl Into<String>, kind: &str, detail: Vec<(String, String)>) {
        self.log.push(self.kernel.now(), entity, kind, detail);
    }

    fn schedule_timer(&mut self, delay: u64, target: EntityRef, timer: Timer) {
        self.kernel.schedule(
            delay,
            Envelope {
                target,
                payload: Payload::Timer(timer),
            },
        );
    }

    fn schedule_timer_at(&mut self, at_ms: u64, target: EntityRef, timer: Timer) {
        self.kernel.schedule_at(
            SimTime::from_ms(at_ms),
            Envelope {
                target,
                payload: Payload::Timer(timer),
            },
        );
    }

    fn alloc_conn(&mut self) -> ConnId {
        let c = self.next_conn;
        self.next_conn += 1;
        c
    }

    fn send_net(&mut self, from: Address, to: Address, msg: NetMsg) {
        self.net.sent += 1;
        self.kernel.schedule(
            self.latency_ms,
            Envelope {
                target: EntityRef::World,
                payload: Payload::Deliver { from, to, msg },
            },
        );
    }

    fn send_reply(&mut self, target: EntityRef, reply: Reply) {
        self.kernel.schedule(
            self.latency_ms,
            Envelope {
                target,
                payload: Payload::Reply(reply),
            },
        );
    }

    fn push_agent(&mut self, device: usize, pid: Pid, device_epoch: u64, kind: AgentKind) -> usize {
        self.agents.push(AgentSlot {
            alive: true,
            device,
            pid,
            device_epoch,
            kind,
        });
        self.agents.len() - 1
    }

    fn agent_usable(&self, agent: usize) -> bool {
        let slot = &self.agents[agent];
        slot.alive && self.devices[slot.device].boot_epoch == slot.device_epoch
    }

    fn track_mirai_peak(&mut self) {
        for dev in &self.devices {
            let live = dev.live_family_count(ProcessFamily::Mirai) as u32;
            if live > self.metrics.max_concurrent_mirai {
                self.metrics.max_concurrent_mirai = live;
            }
        }
    }

    fn note_race(&mut self, device: usize, winner: Winner) {
        let now = self.kernel.now();
        let mut decided = None;
        for race in self.races.iter_mut() {
            if race.device == device && race.winner.is_none() && now >= race.reboot_at {
                race.winner = Some(winner);
                decided = Some(race.reboot_at);
                break;
            }
        }
        if decided.is_some() {
            let addr = self.devices[device].addr;
            self.log(
                "world",
                "race_winner",
                vec![kv("device", addr), kv("winner", winner.as_str())],
            );
        }
    }

    // ---- dispatch ----------------------------------------------------------

    fn dispatch(&mut self, ev: Event<Envelope>) {
        let Envelope { target, payload } = ev.payload;
        match payload {
            Payload::Deliver { from, to, msg } => self.dispatch_deliver(from, to, msg),
            Payload::Reply(reply) => self.dispatch_reply(target, reply),
            Payload::Timer(timer) => self.dispatch_timer(timer),
        }
    }

    // ---- network delivery --------------------------------------------------

    fn dispatch_deliver(&mut self, from: Address, to: Address, msg: NetMsg) {
        if self.implanter.as_ref().is_some_and(|imp| imp.addr == to.ip) {
            self.net.delivered += 1;
            self.deliver_to_implanter(from, to, msg);
            return;
        }
        if self.wild.as_ref().is_some_and(|w| w.addr == to.ip) {
            self.net.delivered += 1;
            self.deliver_to_wild(from, to, msg);
            return;
        }
        if let Some(&device) = self.device_by_addr.get(&to.ip) {
            self.deliver_to_device(device, to, msg);
            return;
        }
        // no such endpoint
        self.net.unreachable += 1;
        self.refuse(&msg, SendError::Unreachable);
    }

    fn refuse(&mut self, msg: &NetMsg, error: SendError) {
        // the refusal reaches the sender at the delivery instant
        match msg {
            NetMsg::Connect {
                conn, initiator, ..
            } => {
                let (conn, initiator) = (*conn, *initiator);
                self.dispatch_reply(initiator, Reply::ConnectFailed { conn, error });
            }
            NetMsg::Command {
                conn, initiator, ..
            } => {
                let (conn, initiator) = (*conn, *initiator);
                self.dispatch_reply(initiator, Reply::Severed { conn });
            }
            _ => {}
        }
    }

    fn deliver_to_device(&mut self, device: usize, to: Address, msg: NetMsg) {
        let dev = &self.devices[device];
        if !dev.reachable || dev.power != Power::On {
            self.net.unreachable += 1;
            self.refuse(&msg, SendError::Unreachable);
            return;
        }
        match msg {
            NetMsg::Connect {
                conn,
                username,
                password,
                initiator,
            } => {
                if !self.devices[device].port_accepts(to.port) {
                    self.net.refused += 1;
                    self.dispatch_reply(
                        initiator,
                        Reply::ConnectFailed {
                            conn,
                            error: SendError::Refused,
                        },
                    );
                    return;
                }
                self.net.delivered += 1;
                let session = self.devices[device].connect_telnet(conn, username, password);
                self.conn_initiators.insert(conn, initiator);
                let auth_ms = self.devices[device].costs().cmd_ms;
                self.schedule_timer(
                    auth_ms,
                    EntityRef::Device(device),
                    Timer::AuthDone {
                        device,
                        session,
                        conn,
                        initiator,
                    },
                );
            }
            NetMsg::Command {
                conn,
                session,
                cmd,
                initiator,
            } => {
                self.net.delivered += 1;
                // established sessions pass even through blocked ports
                if self.devices[device].begin_command(session).is_ok() {
                    let cost = self.devices[device].command_cost_ms(&cmd);
                    self.schedule_timer(
                        cost,
                        EntityRef::Device(device),
                        Timer::CmdDone {
                            device,
                            session,
                            cmd,
                            conn,
                            initiator,
                        },
                    );
                }
                // a command for a vanished session is swallowed; the owner
                // was notified when the session was severed
            }
            NetMsg::Logout { conn, session } => {
                self.net.delivered += 1;
                self.devices[device].close_session(session);
                self.conn_initiators.remove(&conn);
            }
            NetMsg::ReportLine(_) | NetMsg::HeartbeatFrame(_) => {
                // devices run no collector services
                self.net.refused += 1;
            }
        }
    }

    fn deliver_to_implanter(&mut self, from: Address, to: Address, msg: NetMsg) {
        match (to.port, msg) {
            (HEARTBEAT_PORT, NetMsg::HeartbeatFrame(bytes)) => {
                if heartbeat_parse(&bytes).is_err() {
                    self.log(
                        "implanter",
                        "heartbeat_bad_frame",
                        vec![kv("from", from.ip)],
                    );
                    return;
                }
                self.on_heartbeat(from.ip);
            }
            (port, NetMsg::ReportLine(line)) if port == crate::device::SINGLE_INSTANCE_PORT => {
                match ingest(&line, self.kernel.now()) {
                    Ok(report) => self.implanter_consider_load(report),
                    Err(e) => {
                        self.log("implanter", "report_parse_error", vec![kv("error", e)]);
                    }
                }
            }
            _ => {}
        }
    }

    fn deliver_to_wild(&mut self, _from: Address, to: Address, msg: NetMsg) {
        if let (port, NetMsg::ReportLine(line)) = (to.port, msg) {
            if port == crate::device::SINGLE_INSTANCE_PORT {
                match ingest(&line, self.kernel.now()) {
                    Ok(report) => self.wild_start_load(report),
                    Err(e) => {
                        self.log("mirai", "report_parse_error", vec![kv("error", e)]);
                    }
                }
            }
        }
    }

    // ---- replies -----------------------------------------------------------

    fn dispatch_reply(&mut self, target: EntityRef, reply: Reply) {
        match target {
            EntityRef::Implanter => self.implanter_reply(reply),
            EntityRef::WildHost => self.wild_reply(reply),
            EntityRef::WildBot(_) | EntityRef::Agent(_) => self.scanner_reply(target, reply),
            _ => {}
        }
    }

    // ---- device timers -----------------------------------------------------

    fn on_auth_done(
        &mut self,
        device: usize,
        session: SessionId,
        conn: ConnId,
        initiator: EntityRef,
    ) {
        if self.devices[device].power != Power::On {
            return;
        }
        match self.devices[device].finish_auth(session) {
            Some(Ok(sid)) => {
                self.send_reply(
                    initiator,
                    Reply::LoginResult {
                        conn,
                        result: Ok(sid),
                    },
                );
            }
            Some(Err(e)) => {
                self.conn_initiators.remove(&conn);
                self.send_reply(
                    initiator,
                    Reply::LoginResult {
                        conn,
                        result: Err(e),
                    },
                );
            }
            None => {} // session severed while authenticating
        }
    }

    fn on_cmd_done(
        &mut self,
        device: usize,
        session: SessionId,
        cmd: ShellCommand,
        conn: ConnId,
        initiator: EntityRef,
    ) {
        if self.devices[device].power != Power::On {
            return;
        }
        let Some(result) = self.devices[device].finish_command(session, &cmd) else {
            return;
        };
        if let (Ok(CmdOutput::Spawned(pid)), ShellCommand::ExecBinary { family, .. }) =
            (&result, &cmd)
        {
            self.on_spawned(device, *pid, *family);
        }
        if let Ok(CmdOutput::Killed(pids)) = &result {
            let pids = pids.clone();
            self.sync_killed_agents(device, &pids, "killed");
        }
        self.send_reply(initiator, Reply::CmdResult { conn, result });
    }

    /// A binary started running from memory: bot initialization happens
    /// atomically at exec; an expeller begins its fingerprint reads.
    fn on_spawned(&mut self, device: usize, pid: Pid, family: ProcessFamily) {
        let addr = self.devices[device].addr;
        match family {
            ProcessFamily::Mirai => match bot_initialize(&mut self.devices[device], pid) {
                InitOutcome::SecondInstance { incumbent } => {
                    self.log(
                        addr.to_string(),
                        "bot_exited_second_instance",
                        vec![kv("incumbent_pid", incumbent)],
                    );
                }
                InitOutcome::Initialized { killed } => {
                    self.sync_killed_agents(device, &killed, "killed_by_rival");
                    self.log(addr.to_string(), "bot_started", vec![kv("pid", pid)]);
                    self.metrics
                        .open(device, IntervalKind::Infected, self.kernel.now());
                    self.metrics.counts.mirai_infections += 1;
                    self.note_race(device, Winner::Mirai);
                    // resident bots join the scanning pool in mechanistic runs
                    if let Some(m) = self.cfg.mirai.clone() {
                        if m.mode != MiraiMode::Statistical {
                            let scanlisten = m.scanlisten_addr.expect("validated");
                            let epoch = self.devices[device].boot_epoch;
                            let rng =
                                RngStream::derive(self.cfg.seed, &format!("devbot/{addr}/{epoch}"));
                            let mut scanner = Scanner::new(scanlisten, m.scan_rate, rng);
                            // init is done and the C&C link is up: armed,
                            // which stays inert beyond continued scanning
                            scanner.phase = crate::blackbot::BotPhase::Armed;
                            let interval = scanner.scan_interval_ms;
                            let agent =
                                self.push_agent(device, pid, epoch, AgentKind::Bot(scanner));
                            self.schedule_timer(
                                interval,
                                EntityRef::Agent(agent),
                                Timer::ScanTick {
                                    scanner: EntityRef::Agent(agent),
                                },
                            );
                        }
                    }
                }
            },
            ProcessFamily::Expeller => {
                let ecfg = self.expeller_config();
                let epoch = self.devices[device].boot_epoch;
                let step_ms = self.devices[device].costs().cmd_ms;
                let agent = self.push_agent(
                    device,
                    pid,
                    epoch,
                    AgentKind::Expeller(ExpellerAgent::new(ecfg)),
                );
                self.schedule_timer(
                    step_ms,
                    EntityRef::Agent(agent),
                    Timer::ExpellerStep { agent },
                );
            }
            _ => {}
        }
    }

    fn sync_killed_agents(&mut self, device: usize, pids: &[Pid], cause: &str) {
        if pids.is_empty() {
            return;
        }
        let now = self.kernel.now();
        let addr = self.devices[device].addr.to_string();
        for i in 0..self.agents.len() {
            let slot = &self.agents[i];
            if slot.alive && slot.device == device && pids.contains(&slot.pid) {
                let is_bot = matches!(self.agents[i].kind, AgentKind::Bot(_));
                self.agents[i].alive = false;
                if is_bot {
                    self.metrics
                        .close(device, IntervalKind::Infected, now, cause);
                    self.log(addr.clone(), "bot_killed", vec![kv("cause", cause)]);
                } else {
                    self.metrics
                        .close(device, IntervalKind::Protected, now, cause);
                    self.log(addr.clone(), "expeller_killed", vec![kv("cause", cause)]);
                }
            }
        }
        // processes with no agent (e.g. statistical takeover residents)
        if self.metrics.is_open(device, IntervalKind::Infected)
            && self.devices[device].live_family_count(ProcessFamily::Mirai) == 0
        {
            self.metrics
                .close(device, IntervalKind::Infected, now, cause);
        }
    }

    fn notify_severed(&mut self, severed: Vec<(SessionId, u64)>) {
        for (_session, conn) in severed {
            if let Some(initiator) = self.conn_initiators.remove(&conn) {
                self.send_reply(initiator, Reply::Severed { conn });
            }
        }
    }

    // ---- power events --------------------------------------------------------

    fn reboot_device(&mut self, device: usize, reason: &str) {
        let addr = self.devices[device].addr;
        self.close_intervals(device, "reboot");
        let severed = self.devices[device].begin_reboot();
        self.kill_device_agents(device);
        self.notify_severed(severed);
        self.log(addr.to_string(), "reboot", vec![kv("reason", reason)]);
        let epoch = self.devices[device].boot_epoch;
        let delay = self.devices[device].costs().boot_delay_ms;
        self.schedule_timer(
            delay,
            EntityRef::Device(device),
            Timer::BootDone { device, epoch },
        );
    }

    fn close_intervals(&mut self, device: usize, cause: &str) {
        let now = self.kernel.now();
        self.metrics
            .close(device, IntervalKind::Infected, now, cause);
        self.metrics
            .close(device, IntervalKind::Protected, now, cause);
    }

    fn kill_device_agents(&mut self, device: usize) {
        for slot in self.agents.iter_mut() {
            if slot.device == device {
                slot.alive = false;
            }
        }
    }

    fn on_boot_done(&mut self, device: usize, epoch: u64) {
        if self.devices[device].boot_epoch != epoch
            || self.devices[device].power != Power::Rebooting
        {
            return;
        }
        self.devices[device].complete_boot();
        let pristine = self.devices[device].is_pristine();
        debug_assert!(pristine, "boot must restore the pristine image");
        let addr = self.devices[device].addr;
        self.log(
            addr.to_string(),
            "boot_done",
            vec![kv("pristine", pristine)],
        );
        self.metrics.note_boot(pristine);
        self.arm_arrival(device);
    }

    fn on_injected(&mut self, idx: usize) {
        let ev = self.cfg.injected_events[idx];
        let Some(&device) = self.device_by_addr.get(&ev.device) else {
            return;
        };
        let addr = ev.device;
        match ev.action {
            DeviceAction::Reboot => self.reboot_device(device, "injected"),
            DeviceAction::Hang => {
                let severed = self.devices[device].hang();
                self.notify_severed(severed);
                self.log(addr.to_string(), "hang", vec![]);
                if self.devices[device].watchdog_enabled {
                    let period = self.devices[device].costs().watchdog_period_ms;
                    let epoch = self.devices[device].boot_epoch;
                    self.schedule_timer(
                        period,
                        EntityRef::Device(device),
                        Timer::WatchdogFire { device, epoch },
                    );
                }
            }
            DeviceAction::PowerOff => {
                self.close_intervals(device, "power_off");
                let severed = self.devices[device].power_off();
                self.kill_device_agents(device);
                self.notify_severed(severed);
                self.log(addr.to_string(), "power_off", vec![]);
            }
        }
    }

    fn on_watchdog_fire(&mut self, device: usize, epoch: u64) {
        if self.devices[device].boot_epoch == epoch && self.devices[device].power == Power::Hung {
            let addr = self.devices[device].addr;
            self.log(addr.to_string(), "watchdog_reboot", vec![]);
            self.reboot_device(device, "watchdog");
        }
    }

    // ---- statistical wild Mirai ----------------------------------------------

    fn arm_arrival(&mut self, device: usize) {
        let Some(m) = &self.cfg.mirai else { return };
        if m.mode != MiraiMode::Statistical {
            return;
        }
        let mean_ms = m.statistical_mean_s * 1000.0;
        let delay = self.arrival_rngs[device].exp_ms(mean_ms).max(1);
        let epoch = self.devices[device].boot_epoch;
        self.schedule_timer(
            delay,
            EntityRef::World,
            Timer::StatArrival { device, epoch },
        );
    }

    fn on_stat_arrival(&mut self, device: usize, epoch: u64) {
        let dev = &self.devices[device];
        if dev.boot_epoch != epoch || dev.power != Power::On || !dev.reachable {
            return;
        }
        let addr = dev.addr;
        if !dev.port_accepts(TELNET_PORT) {
            // protection held: the wild botnet cannot get in
            self.metrics.counts.blocked_attempts += 1;
            self.log(addr.to_string(), "arrival_blocked", vec![]);
            return;
        }
        // the device falls: a full hostile takeover compressed into one
        // instant, including the killer sweep and the loss of live sessions
        let pid = self.devices[device].spawn_process(ProcessFamily::Mirai);
        let outcome = bot_initialize(&mut self.devices[device], pid);
        debug_assert!(matches!(outcome, InitOutcome::Initialized { .. }));
        if let InitOutcome::Initialized { killed } = outcome {
            self.sync_killed_agents(device, &killed, "killed_by_rival");
        }
        let severed = self.devices[device].sever_all_sessions();
        self.notify_severed(severed);
        self.log(addr.to_string(), "mirai_takeover", vec![]);
        self.metrics
            .open(device, IntervalKind::Infected, self.kernel.now());
        self.metrics.counts.mirai_infections += 1;
        self.note_race(device, Winner::Mirai);
    }

    // ---- phases ------------------------------------------------------------

    fn on_phase_start(&mut self, idx: usize) {
        match self.cfg.phases[idx].clone() {
            PhaseDecl::Deployment { range, .. } => {
                let range = range.unwrap_or_else(|| self.universe.range());
                let now = self.kernel.now();
                let imp = self.implanter.as_mut().expect("validated");
                if let Some(job) = imp.enqueue_job(range, JobReason::Deployment, None, None, now) {
                    self.metrics.first_scan_start.get_or_insert(now);
                    self.log(
                        "implanter",
                        "scan_started",
                        vec![
                            kv("reason", "deployment"),
                            kv("range", range),
                            kv("job", job),
                        ],
                    );
                    self.schedule_timer(0, EntityRef::Implanter, Timer::ProbeLaunch { job });
                }
            }
            PhaseDecl::Negotiation {
                device,
                reboot_at_ms,
                hint_range,
            } => {
                let Some(&dev_idx) = self.device_by_addr.get(&device) else {
                    return;
                };
                self.races.push(RaceState {
                    device: dev_idx,
                    reboot_at: SimTime::from_ms(reboot_at_ms),
                    winner: None,
                });
                self.reboot_device(dev_idx, "negotiation");
                let now = self.kernel.now();
                let imp = self.implanter.as_mut().expect("validated");
                if let Some(job) =
                    imp.enqueue_job(hint_range, JobReason::Negotiation, Some(device), None, now)
                {
                    self.metrics.first_scan_start.get_or_insert(now);
                    self.log(
                        "implanter",
                        "scan_started",
                        vec![
                            kv("reason", "negotiation"),
                            kv("range", hint_range),
                            kv("job", job),
                        ],
                    );
                    self.schedule_timer(0, EntityRef::Implanter, Timer::ProbeLaunch { job });
                }
            }
        }
    }

    // ---- implanter scan service ---------------------------------------------

    fn on_probe_launch(&mut self, job: u64) {
        let now = self.kernel.now();
        let Some(imp) = self.implanter.as_mut() else {
            return;
        };
        let probe_interval = imp.cfg.probe_interval_ms;
        let resweep = imp.cfg.resweep_delay_ms;
        let Some(sweep) = imp.sweep_mut(job) else {
            return;
        };
        if sweep.status != JobStatus::Sweeping {
            return;
        }
        if let Some(deadline) = sweep.job.deadline {
            if now > deadline {
                sweep.status = JobStatus::Done;
                return;
            }
        }
        if sweep.cursor >= sweep.job.range.len() {
            if sweep.job.reason == JobReason::Deployment {
                sweep.status = JobStatus::Done;
            } else {
                sweep.status = JobStatus::BetweenSweeps;
                self.schedule_timer(resweep, EntityRef::Implanter, Timer::SweepResume { job });
            }
            return;
        }
        let target = sweep.job.range.nth(sweep.cursor).expect("cursor in range");
        sweep.cursor += 1;
        self.schedule_timer(
            probe_interval,
            EntityRef::Implanter,
            Timer::ProbeLaunch { job },
        );
        self.launch_probe(job, target);
    }

    fn on_sweep_resume(&mut self, job: u64) {
        let Some(imp) = self.implanter.as_mut() else {
            return;
        };
        let Some(sweep) = imp.sweep_mut(job) else {
            return;
        };
        if sweep.status == JobStatus::BetweenSweeps {
            sweep.status = JobStatus::Sweeping;
            sweep.cursor = 0;
            sweep.sweep_no += 1;
            self.schedule_timer(0, EntityRef::Implanter, Timer::ProbeLaunch { job });
        }
    }

    fn launch_probe(&mut self, job: u64, target: Ipv4) {
        if !ip_is_scannable(target) {
            return;
        }
        let imp = self.implanter.as_ref().expect("probe without implanter");
        if imp.table.is_alive(target) || imp.loads.targeting(target) {
            return;
        }
        if !self.device_by_addr.contains_key(&target) {
            return; // nothing listens there
        }
        let (username, password) = imp.cfg.credentials[0].clone();
        let from = Address::new(imp.addr, 0);
        let conn = self.alloc_conn();
        self.implanter.as_mut().unwrap().probes.insert(
            conn,
            ProbeState {
                job,
                target,
                cred_idx: 0,
            },
        );
        self.send_net(
            from,
            Address::new(target, TELNET_PORT),
            NetMsg::Connect {
                conn,
                username,
                password,
                initiator: EntityRef::Implanter,
            },
        );
    }

    fn implanter_reply(&mut self, reply: Reply) {
        match reply {
            Reply::LoginResult { conn, result } => {
                if let Some(probe) = self.implanter.as_mut().unwrap().probes.remove(&conn) {
                    self.probe_login_result(conn, probe, result);
                } else if let Some(job) = self.implanter.as_ref().unwrap().loads.job_for_conn(conn)
                {
                    let actions = self
                        .implanter
                        .as_mut()
                        .unwrap()
                        .loads
                        .on_login_result(job, result);
                    self.run_load_actions(LoaderHost::Implanter, actions);
                }
            }
            Reply::CmdResult { conn, result } => {
                if let Some(job) = self.implanter.as_ref().unwrap().loads.job_for_conn(conn) {
                    let actions = self
                        .implanter
                        .as_mut()
                        .unwrap()
                        .loads
                        .on_cmd_result(job, result);
                    self.run_load_actions(LoaderHost::Implanter, actions);
                }
            }
            Reply::ConnectFailed { conn, error } => {
                if self
                    .implanter
                    .as_mut()
                    .unwrap()
                    .probes
                    .remove(&conn)
                    .is_some()
                {
                    // silent scan miss; retrying is the sweep's business
                } else if let Some(job) = self.implanter.as_ref().unwrap().loads.job_for_conn(conn)
                {
                    let actions = self
                        .implanter
                        .as_mut()
                        .unwrap()
                        .loads
                        .on_connect_failed(job, error);
                    self.run_load_actions(LoaderHost::Implanter, actions);
                }
            }
            Reply::Severed { conn } => {
                if self
                    .implanter
                    .as_mut()
                    .unwrap()
                    .probes
                    .remove(&conn)
                    .is_some()
                {
                    return;
                }
                if let Some(job) = self.implanter.as_ref().unwrap().loads.job_for_conn(conn) {
                    let actions = self.implanter.as_mut().unwrap().loads.on_severed(job);
                    self.run_load_actions(LoaderHost::Implanter, actions);
                }
            }
        }
    }

    fn probe_login_result(
        &mut self,
        conn: ConnId,
        probe: ProbeState,
        result: Result<SessionId, LoginError>,
    ) {
        let imp_addr = self.implanter.as_ref().unwrap().addr;
        match result {
            Ok(session) => {
                // verified pair: disconnect and report through ScanListen
                self.send_net(
                    Address::new(imp_addr, 0),
                    Address::new(probe.target, TELNET_PORT),
                    NetMsg::Logout { conn, session },
                );
                let creds =
                    self.implanter.as_ref().unwrap().cfg.credentials[probe.cred_idx].clone();
                self.log(
                    "implanter",
                    "device_found",
                    vec![kv("device", probe.target), kv("job", probe.job)],
                );
                let report = ScanReport {
                    victim: Address::new(probe.target, TELNET_PORT),
                    username: creds.0,
                    password: creds.1,
                    discovered_at: self.kernel.now(),
                };
                // scan -> scanlisten on the same host: through the codec
                let line = emit(&report);
                match ingest(&line, self.kernel.now()) {
                    Ok(report) => self.implanter_consider_load(report),
                    Err(e) => self.log("implanter", "report_parse_error", vec![kv("error", e)]),
                }
            }
            Err(LoginError::AuthFailed) => {
                let next = probe.cred_idx + 1;
                let creds = &self.implanter.as_ref().unwrap().cfg.credentials;
                if next < creds.len() {
                    let (username, password) = creds[next].clone();
                    let new_conn = self.alloc_conn();
                    self.implanter.as_mut().unwrap().probes.insert(
                        new_conn,
                        ProbeState {
                            job: probe.job,
                            target: probe.target,
                            cred_idx: next,
                        },
                    );
                    self.send_net(
                        Address::new(imp_addr, 0),
                        Address::new(probe.target, TELNET_PORT),
                        NetMsg::Connect {
                            conn: new_conn,
                            username,
                            password,
                            initiator: EntityRef::Implanter,
                        },
                    );
                }
            }
        }
    }

    fn implanter_consider_load(&mut self, report: ScanReport) {
        let imp = self.implanter.as_ref().unwrap();
        if imp.table.is_alive(report.victim.ip) || imp.loads.targeting(report.victim.ip) {
            return;
        }
        let payload = imp.cfg.payload_bytes;
        let helper = imp.cfg.helper_bytes;
        let victim = report.victim;
        let tag = self.alloc_conn();
        let (job, action) = self.implanter.as_mut().unwrap().loads.start(
            report,
            ProcessFamily::Expeller,
            payload,
            helper,
            "expel",
            tag,
        );
        self.log(
            "implanter",
            "load_started",
            vec![kv("device", victim.ip), kv("job", job)],
        );
        self.run_load_actions(LoaderHost::Implanter, vec![action]);
    }

    fn on_heartbeat(&mut self, from: Ipv4) {
        let now = self.kernel.now();
        let observation = self.implanter.as_mut().unwrap().table.observe(from, now);
        self.log("implanter", "heartbeat_rx", vec![kv("device", from)]);
        match observation {
            Observation::NewImplant => {
                self.implanter.as_mut().unwrap().retire_jobs_for(from);
                if self.metrics.time_to_first_implant_ms.is_none() {
                    if let Some(start) = self.metrics.first_scan_start {
                        self.metrics.time_to_first_implant_ms = Some(now - start);
                    }
                }
                self.log("implanter", "implant_ok", vec![kv("device", from)]);
            }
            Observation::Recovered { lost_since } => {
                self.implanter.as_mut().unwrap().retire_jobs_for(from);
                self.metrics.reimplant_latencies_ms.push(now - lost_since);
                self.log(
                    "implanter",
                    "implant_ok",
                    vec![kv("device", from), kv("recovered", "true")],
                );
            }
            Observation::Refreshed => {}
        }
    }

    fn on_heartbeat_check(&mut self) {
        let now = self.kernel.now();
        let imp = self.implanter.as_mut().expect("check without implanter");
        let period = imp.cfg.check_period_ms;
        let prefix = imp.cfg.reimplant_prefix_bits;
        let lost = imp.table.check(now);
        for addr in lost {
            self.log("implanter", "heartbeat_lost", vec![kv("device", addr)]);
            let range = addr.block(prefix);
            let imp = self.implanter.as_mut().unwrap();
            if let Some(job) = imp.enqueue_job(range, JobReason::Reimplant, Some(addr), None, now) {
                imp.table.mark_reimplanting(addr);
                self.metrics.first_scan_start.get_or_insert(now);
                self.log(
                    "implanter",
                    "scan_started",
                    vec![
                        kv("reason", "reimplant"),
                        kv("range", range),
                        kv("job", job),
                    ],
                );
                self.schedule_timer(0, EntityRef::Implanter, Timer::ProbeLaunch { job });
            }
        }
        self.schedule_timer(period, EntityRef::Implanter, Timer::HeartbeatCheck);
    }

    // ---- load execution (both hosts) -----------------------------------------

    fn loads_mut(&mut self, host: LoaderHost) -> &mut LoadManager {
        match host {
            LoaderHost::Implanter => &mut self.implanter.as_mut().unwrap().loads,
            LoaderHost::Wild => &mut self.wild.as_mut().unwrap().loads,
        }
    }

    fn host_entity(host: LoaderHost) -> EntityRef {
        match host {
            LoaderHost::Implanter => EntityRef::Implanter,
            LoaderHost::Wild => EntityRef::WildHost,
        }
    }

    fn host_addr(&self, host: LoaderHost) -> Ipv4 {
        match host {
            LoaderHost::Implanter => self.implanter.as_ref().unwrap().addr,
            LoaderHost::Wild => self.wild.as_ref().unwrap().addr,
        }
    }

    fn host_label(host: LoaderHost) -> &'static str {
        match host {
            LoaderHost::Implanter => "implanter",
            LoaderHost::Wild => "mirai",
        }
    }

    fn http_rate(&self, host: LoaderHost) -> u64 {
        match host {
            LoaderHost::Implanter => self.implanter.as_ref().unwrap().cfg.http_bytes_per_ms,
            LoaderHost::Wild => self.cfg.timing.http_bytes_per_ms,
        }
    }

    fn run_load_actions(&mut self, host: LoaderHost, actions: Vec<LoadAction>) {
        let from = Address::new(self.host_addr(host), 0);
        for action in actions {
            match action {
                LoadAction::Connect { job } => {
                    let Some(j) = self.loads_mut(host).job(job) else {
                        continue;
                    };
                    let victim = j.report.victim;
                    let username = j.report.username.clone();
                    let password = j.report.password.clone();
                    let conn = self.alloc_conn();
                    self.loads_mut(host).register_conn(job, conn);
                    self.send_net(
                        from,
                        victim,
                        NetMsg::Connect {
                            conn,
                            username,
                            password,
                            initiator: Self::host_entity(host),
                        },
                    );
                }
                LoadAction::Command { job, session, cmd } => {
                    let Some(j) = self.loads_mut(host).job(job) else {
                        continue;
                    };
                    let victim = j.report.victim;
                    let conn = j.conn.expect("command on connected job");
                    self.send_net(
                        from,
                        victim,
                        NetMsg::Command {
                            conn,
                            session,
                            cmd,
                            initiator: Self::host_entity(host),
                        },
                    );
                }
                LoadAction::FetchPayload { job, bytes } => {
                    let delay = (bytes / self.http_rate(host).max(1)).max(1);
                    self.schedule_timer(
                        delay,
                        Self::host_entity(host),
                        Timer::PayloadFetched { host, job },
                    );
                }
                LoadAction::CloseSession { job, session } => {
                    let Some(j) = self.loads_mut(host).job(job) else {
                        continue;
                    };
                    let victim = j.report.victim;
                    let conn = j.conn.expect("close on connected job");
                    self.send_net(from, victim, NetMsg::Logout { conn, session });
                }
                LoadAction::Complete { job } => {
                    if let Some(j) = self.loads_mut(host).finish(job) {
                        let elapsed = self.kernel.now() - j.report.discovered_at;
                        self.log(
                            Self::host_label(host),
                            "load_ok",
                            vec![
                                kv("device", j.report.victim.ip),
                                kv("family", format!("{:?}", j.family).to_lowercase()),
                                kv("took_ms", elapsed),
                            ],
                        );
                    }
                }
                LoadAction::Fail { job, error } => {
                    if let Some(j) = self.loads_mut(host).finish(job) {
                        self.log(
                            Self::host_label(host),
                            "load_failed",
                            vec![kv("device", j.report.victim.ip), kv("error", error)],
                        );
                        if host == LoaderHost::Wild
                            && matches!(
                                error,
                                LoadError::Refused | LoadError::LoginFailed | LoadError::Severed
                            )
                        {
                            self.metrics.counts.blocked_attempts += 1;
                            self.log(
                                "mirai",
                                "blocked_attempt",
                                vec![
                                    kv("device", j.report.victim.ip),
                                    kv("outcome", error),
                                    kv("source", "load"),
                                ],
                            );
                        }
                    }
                }
            }
        }
    }

    fn on_payload_fetched(&mut self, host: LoaderHost, job: u64) {
        let actions = self.loads_mut(host).on_payload_fetched(job);
        self.run_load_actions(host, actions);
    }

    // ---- wild side -----------------------------------------------------------

    fn wild_start_load(&mut self, report: ScanReport) {
        let wild = self.wild.as_mut().expect("wild report without host");
        let payload = wild.payload_bytes;
        let helper = self.cfg.timing.helper_bytes;
        let victim = report.victim;
        let tag = self.alloc_conn();
        let wild = self.wild.as_mut().expect("wild report without host");
        let (job, action) = wild.loads.start(
            report,
            ProcessFamily::Mirai,
            payload,
            helper,
            "dvrHelper",
            tag,
        );
        self.log(
            "mirai",
            "load_started",
            vec![kv("device", victim.ip), kv("job", job)],
        );
        self.run_load_actions(LoaderHost::Wild, vec![action]);
    }

    fn wild_reply(&mut self, reply: Reply) {
        match reply {
            Reply::LoginResult { conn, result } => {
                if let Some(attempt) = self.wild.as_mut().unwrap().probes.remove(&conn) {
                    self.wild_probe_result(conn, attempt, result);
                } else if let Some(job) = self.wild.as_ref().unwrap().loads.job_for_conn(conn) {
                    let actions = self
                        .wild
                        .as_mut()
                        .unwrap()
                        .loads
                        .on_login_result(job, result);
                    self.run_load_actions(LoaderHost::Wild, actions);
                }
            }
            Reply::CmdResult { conn, result } => {
                if let Some(job) = self.wild.as_ref().unwrap().loads.job_for_conn(conn) {
                    let actions = self.wild.as_mut().unwrap().loads.on_cmd_result(job, result);
                    self.run_load_actions(LoaderHost::Wild, actions);
                }
            }
            Reply::ConnectFailed { conn, error } => {
                if let Some(attempt) = self.wild.as_mut().unwrap().probes.remove(&conn) {
                    if error == SendError::Refused {
                        self.count_blocked(attempt.target, "refused", "scan");
                    }
                } else if let Some(job) = self.wild.as_ref().unwrap().loads.job_for_conn(conn) {
                    let actions = self
                        .wild
                        .as_mut()
                        .unwrap()
                        .loads
                        .on_connect_failed(job, error);
                    self.run_load_actions(LoaderHost::Wild, actions);
                }
            }
            Reply::Severed { conn } => {
                if self.wild.as_mut().unwrap().probes.remove(&conn).is_some() {
                    return;
                }
                if let Some(job) = self.wild.as_ref().unwrap().loads.job_for_conn(conn) {
                    let actions = self.wild.as_mut().unwrap().loads.on_severed(job);
                    self.run_load_actions(LoaderHost::Wild, actions);
                }
            }
        }
    }

    fn count_blocked(&mut self, target: Ipv4, outcome: &str, source: &str) {
        self.metrics.counts.blocked_attempts += 1;
        self.log(
            "mirai",
            "blocked_attempt",
            vec![
                kv("device", target),
                kv("outcome", outcome),
                kv("source", source),
            ],
        );
    }

    /// Directed attack: the wild loader probes one address on a fixed
    /// cadence, exactly like its scanner would on a hit.
    fn on_directed_attempt(&mut self, n: u32) {
        let Some(m) = self.cfg.mirai.clone() else {
            return;
        };
        if n >= m.directed_attempts {
            return;
        }
        self.schedule_timer(
            m.directed_interval_ms,
            EntityRef::World,
            Timer::DirectedAttempt { n: n + 1 },
        );
        let target = m.directed_target.expect("validated");
        let wild_addr = self.wild.as_ref().unwrap().addr;
        let (username, password) = self.wild_creds[0].clone();
        let conn = self.alloc_conn();
        self.wild.as_mut().unwrap().probes.insert(
            conn,
            ScanAttempt {
                target,
                cred_idx: 0,
            },
        );
        self.send_net(
            Address::new(wild_addr, 0),
            Address::new(target, TELNET_PORT),
            NetMsg::Connect {
                conn,
                username,
                password,
                initiator: EntityRef::WildHost,
            },
        );
    }

    fn wild_probe_result(
        &mut self,
        conn: ConnId,
        attempt: ScanAttempt,
        result: Result<SessionId, LoginError>,
    ) {
        let wild_addr = self.wild.as_ref().unwrap().addr;
        match result {
            Ok(session) => {
                self.send_net(
                    Address::new(wild_addr, 0),
                    Address::new(attempt.target, TELNET_PORT),
                    NetMsg::Logout { conn, session },
                );
                let creds = self.wild_creds[attempt.cred_idx].clone();
                self.emit_wild_report(attempt.target, creds);
            }
            Err(LoginError::AuthFailed) => {
                let next = attempt.cred_idx + 1;
                if next >= self.wild_creds.len() {
                    self.count_blocked(attempt.target, "login_failed", "scan");
                    return;
                }
                let (username, password) = self.wild_creds[next].clone();
                let new_conn = self.alloc_conn();
                self.wild.as_mut().unwrap().probes.insert(
                    new_conn,
                    ScanAttempt {
                        target: attempt.target,
                        cred_idx: next,
                    },
                );
                self.send_net(
                    Address::new(wild_addr, 0),
                    Address::new(attempt.target, TELNET_PORT),
                    NetMsg::Connect {
                        conn: new_conn,
                        username,
                        password,
                        initiator: EntityRef::WildHost,
                    },
                );
            }
        }
    }

    /// A scanner running on the loader host itself found a victim: the
    /// report still passes through the wire codec, just without a hop.
    fn emit_wild_report(&mut self, target: Ipv4, creds: (String, String)) {
        let now = self.kernel.now();
        self.metrics.wild_first_report_ms.get_or_insert(now.as_ms());
        let report = ScanReport {
            victim: Address::new(target, TELNET_PORT),
            username: creds.0,
            password: creds.1,
            discovered_at: now,
        };
        self.log(
            "mirai",
            "mirai_report",
            vec![
                kv("device", target),
                kv("user", &report.username),
                kv("pass", &report.password),
            ],
        );
        let line = emit(&report);
        match ingest(&line, now) {
            Ok(report) => self.wild_start_load(report),
            Err(e) => self.log("mirai", "report_parse_error", vec![kv("error", e)]),
        }
    }

    // ---- bot scanners ----------------------------------------------------------

    fn scanner_parts(&mut self, entity: EntityRef) -> Option<(&mut Scanner, Ipv4, bool)> {
        match entity {
            EntityRef::WildBot(i) => {
                let addr = self.wildbot_addrs[i];
                Some((&mut self.wildbots[i], addr, true))
            }
            EntityRef::Agent(i) => {
                let slot = &self.agents[i];
                if !slot.alive || self.devices[slot.device].boot_epoch != slot.device_epoch {
                    return None;
                }
                let usable = self.devices[slot.device].power == Power::On;
                let addr = self.devices[slot.device].addr;
                match &mut self.agents[i].kind {
                    AgentKind::Bot(scanner) => Some((scanner, addr, usable)),
                    AgentKind::Expeller(_) => None,
                }
            }
            _ => None,
        }
    }

    fn on_scan_tick(&mut self, entity: EntityRef) {
        let universe = self.universe;
        let Some((scanner, _src, usable)) = self.scanner_parts(entity) else {
            return; // scanner is gone; do not reschedule
        };
        let interval = scanner.scan_interval_ms;
        let target = if usable {
            Some(universe.draw(&mut scanner.rng))
        } else {
            None // frozen host: keep the clock, skip the draw
        };
        self.schedule_timer(interval, entity, Timer::ScanTick { scanner: entity });
        let Some(target) = target else { return };
        if !ip_is_scannable(target) {
            return; // excluded address space: no login attempt
        }
        if !self.device_by_addr.contains_key(&target) {
            return; // empty address
        }
        let (username, password) = self.wild_creds[0].clone();
        let conn = self.alloc_conn();
        let (scanner, src, _) = self.scanner_parts(entity).expect("checked above");
        scanner.pending.insert(
            conn,
            ScanAttempt {
                target,
                cred_idx: 0,
            },
        );
        self.send_net(
            Address::new(src, 0),
            Address::new(target, TELNET_PORT),
            NetMsg::Connect {
                conn,
                username,
                password,
                initiator: entity,
            },
        );
    }

    fn scanner_reply(&mut self, entity: EntityRef, reply: Reply) {
        let Some((scanner, src, _)) = self.scanner_parts(entity) else {
            return;
        };
        match reply {
            Reply::LoginResult { conn, result } => {
                let Some(attempt) = scanner.pending.remove(&conn) else {
                    return;
                };
                match result {
                    Ok(session) => {
                        let scanlisten = scanner.scanlisten;
                        let creds = self.wild_creds[attempt.cred_idx].clone();
                        self.send_net(
                            Address::new(src, 0),
                            Address::new(attempt.target, TELNET_PORT),
                            NetMsg::Logout { conn, session },
                        );
                        let now = self.kernel.now();
                        self.metrics.wild_first_report_ms.get_or_insert(now.as_ms());
                        let report = ScanReport {
                            victim: Address::new(attempt.target, TELNET_PORT),
                            username: creds.0,
                            password: creds.1,
                            discovered_at: now,
                        };
                        self.log(
                            "mirai",
                            "mirai_report",
                            vec![
                                kv("device", attempt.target),
                                kv("user", &report.username),
                                kv("pass", &report.password),
                            ],
                        );
                        let line = emit(&report);
                        self.send_net(Address::new(src, 0), scanlisten, NetMsg::ReportLine(line));
                    }
                    Err(LoginError::AuthFailed) => {
                        let next = attempt.cred_idx + 1;
                        if next >= self.wild_creds.len() {
                            return;
                        }
                        let (username, password) = self.wild_creds[next].clone();
                        let new_conn = self.alloc_conn();
                        let (scanner, src, _) = self.scanner_parts(entity).expect("still present");
                        scanner.pending.insert(
                            new_conn,
                            ScanAttempt {
                                target: attempt.target,
                                cred_idx: next,
                            },
                        );
                        self.send_net(
                            Address::new(src, 0),
                            Address::new(attempt.target, TELNET_PORT),
                            NetMsg::Connect {
                                conn: new_conn,
                                username,
                                password,
                                initiator: entity,
                            },
                        );
                    }
                }
            }
            Reply::ConnectFailed { conn, error } => {
                if let Some(attempt) = scanner.pending.remove(&conn) {
                    if error == SendError::Refused {
                        self.count_blocked(attempt.target, "refused", "scan");
                    }
                }
            }
            Reply::Severed { conn } => {
                scanner.pending.remove(&conn);
            }
            Reply::CmdResult { .. } => {}
        }
    }

    // ---- expeller agent ---------------------------------------------------------

    fn on_expeller_step(&mut self, agent: usize) {
        if !self.agent_usable(agent) {
            self.agents[agent].alive = false;
            return;
        }
        let device = self.agents[agent].device;
        if self.devices[device].power != Power::On {
            return; // frozen
        }
        let step_ms = self.devices[device].costs().cmd_ms;
        let AgentKind::Expeller(exp) = &mut self.agents[agent].kind else {
            return;
        };
        match exp.stage {
            ExpellerStage::Fingerprint { reads_done } => {
                let done = reads_done + 1;
                if done < FINGERPRINT_PROC_READS {
                    exp.stage = ExpellerStage::Fingerprint { reads_done: done };
                    self.schedule_timer(
                        step_ms,
                        EntityRef::Agent(agent),
                        Timer::ExpellerStep { agent },
                    );
                    return;
                }
                let cfg = exp.cfg.clone();
                let pid = self.agents[agent].pid;
                let addr = self.devices[device].addr;
                match finish_start(&mut self.devices[device], pid, &cfg) {
                    StartOutcome::ForeignDevice => {
                        self.agents[agent].alive = false;
                        self.log(
                            addr.to_string(),
                            "foreign_abort",
                            vec![kv(
                                "manufacturer",
                                &self.devices[device].profile.manufacturer,
                            )],
                        );
                    }
                    StartOutcome::SecondInstance => {
                        self.agents[agent].alive = false;
                        self.log(addr.to_string(), "expeller_second_instance", vec![]);
                    }
                    StartOutcome::Protected { killed, severed } => {
                        if let AgentKind::Expeller(exp) = &mut self.agents[agent].kind {
                            exp.stage = ExpellerStage::Running;
                        }
                        self.sync_killed_agents(device, &killed, "expelled");
                        self.notify_severed(severed);
                        self.log(
                            addr.to_string(),
                            "expeller_started",
                            vec![kv("killed_rivals", killed.len())],
                        );
                        self.metrics
                            .open(device, IntervalKind::Protected, self.kernel.now());
                        self.metrics.counts.expeller_implants += 1;
                        self.note_race(device, Winner::Expeller);
                        self.schedule_timer(
                            0,
                            EntityRef::Agent(agent),
                            Timer::HeartbeatBeat { agent },
                        );
                    }
                }
            }
            ExpellerStage::Running => {}
        }
    }

    fn on_heartbeat_beat(&mut self, agent: usize) {
        if !self.agent_usable(agent) {
            self.agents[agent].alive = false;
            return;
        }
        let device = self.agents[agent].device;
        let AgentKind::Expeller(exp) = &self.agents[agent].kind else {
            return;
        };
        let interval = exp.cfg.heartbeat_interval_ms;
        let server = exp.cfg.server;
        self.schedule_timer(
            interval,
            EntityRef::Agent(agent),
            Timer::HeartbeatBeat { agent },
        );
        if self.devices[device].power != Power::On {
            return; // hung devices fall silent
        }
        let from = Address::new(self.devices[device].addr, 0);
        self.send_net(
            from,
            server,
            NetMsg::HeartbeatFrame(crate::whitebot::heartbeat_frame().to_vec()),
        );
    }

    // ---- timer fan-out --------------------------------------------------------

    fn dispatch_timer(&mut self, timer: Timer) {
        match timer {
            Timer::BootDone { device, epoch } => self.on_boot_done(device, epoch),
            Timer::WatchdogFire { device, epoch } => self.on_watchdog_fire(device, epoch),
            Timer::AuthDone {
                device,
                session,
                conn,
                initiator,
            } => self.on_auth_done(device, session, conn, initiator),
            Timer::CmdDone {
                device,
                session,
                cmd,
                conn,
                initiator,
            } => self.on_cmd_done(device, session, cmd, conn, initiator),
            Timer::ProbeLaunch { job } => self.on_probe_launch(job),
            Timer::SweepResume { job } => self.on_sweep_resume(job),
            Timer::HeartbeatCheck => self.on_heartbeat_check(),
            Timer::ScanTick { scanner } => self.on_scan_tick(scanner),
            Timer::ExpellerStep { agent } => self.on_expeller_step(agent),
            Timer::HeartbeatBeat { agent } => self.on_heartbeat_beat(agent),
            Timer::PhaseStart { idx } => self.on_phase_start(idx),
            Timer::Injected { idx } => self.on_injected(idx),
            Timer::StatArrival { device, epoch } => self.on_stat_arrival(device, epoch),
            Timer::DirectedAttempt { n } => self.on_directed_attempt(n),
            Timer::PayloadFetched { host, job } => self.on_payload_fetched(host, job),
        }
    }
}

/// Runs one scenario to its horizon and returns its observables.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(RunMetrics, EventLog), SimError> {
    let mut world = World::new(cfg)?;
    world.run_to(cfg.horizon_ms)?;
    Ok(world.finish())
}
