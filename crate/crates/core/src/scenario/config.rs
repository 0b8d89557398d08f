//! Scenario configuration: TOML schema, defaults, and validation. Unknown
//! keys are hard errors so experiment definitions cannot silently carry
//! typos.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::device::DeviceProfile;
use crate::simkernel::{
    AddrRange, Address, Ipv4, Universe, DEFAULT_BOOT_DELAY_MS, DEFAULT_CHECK_PERIOD_MS,
    DEFAULT_CMD_DURATION_MS, DEFAULT_HEARTBEAT_INTERVAL_MS, DEFAULT_HEARTBEAT_TIMEOUT_MS,
    DEFAULT_WATCHDOG_PERIOD_MS, LATENCY_DEFAULT_MS,
};

use super::SimError;

/// Default wild-Mirai time-to-infection for statistical race scenarios,
/// in seconds.
pub const DEFAULT_WILD_INFECTION_MEAN_S: f64 = 98.0;
/// Default payload size for both bot and expeller binaries.
pub const DEFAULT_PAYLOAD_BYTES: u64 = 53_000;
/// Default size of the copied echo helper.
pub const DEFAULT_HELPER_BYTES: u64 = 1_024;

/// Experiment description. Field names are the configuration surface; see
/// the scenarios/ directory for worked examples.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_universe_bits")]
    pub universe_bits: u32,
    #[serde(default = "default_universe_base")]
    pub universe_base: Ipv4,
    #[serde(default = "default_latency")]
    pub latency_ms: u64,
    pub horizon_ms: u64,
    #[serde(default)]
    pub timing: TimingConfig,
    pub devices: Vec<DeviceDecl>,
    #[serde(default)]
    pub mirai: Option<MiraiConfig>,
    #[serde(default)]
    pub implanter: Option<ImplanterDecl>,
    #[serde(default)]
    pub phases: Vec<PhaseDecl>,
    #[serde(default)]
    pub injected_events: Vec<InjectedEvent>,
}

fn default_universe_bits() -> u32 {
    16
}
fn default_universe_base() -> Ipv4 {
    Ipv4::new(1, 1, 0, 0)
}
fn default_latency() -> u64 {
    LATENCY_DEFAULT_MS
}

/// Device- and transfer-level timing knobs, all defaulted.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    #[serde(default = "d_boot")]
    pub boot_delay_ms: u64,
    #[serde(default = "d_cmd")]
    pub cmd_duration_ms: u64,
    #[serde(default = "d_transfer")]
    pub transfer_bytes_per_ms: u64,
    #[serde(default = "d_http")]
    pub http_bytes_per_ms: u64,
    #[serde(default = "d_watchdog")]
    pub watchdog_period_ms: u64,
    #[serde(default = "d_helper")]
    pub helper_bytes: u64,
}

fn d_boot() -> u64 {
    DEFAULT_BOOT_DELAY_MS
}
fn d_cmd() -> u64 {
    DEFAULT_CMD_DURATION_MS
}
fn d_transfer() -> u64 {
    8
}
fn d_http() -> u64 {
    1_000
}
fn d_watchdog() -> u64 {
    DEFAULT_WATCHDOG_PERIOD_MS
}
fn d_helper() -> u64 {
    DEFAULT_HELPER_BYTES
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            boot_delay_ms: d_boot(),
            cmd_duration_ms: d_cmd(),
            transfer_bytes_per_ms: d_transfer(),
            http_bytes_per_ms: d_http(),
            watchdog_period_ms: d_watchdog(),
            helper_bytes: d_helper(),
        }
    }
}

/// One simulated device instance.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDecl {
    pub address: Ipv4,
    #[serde(default)]
    pub profile: ProfileDecl,
    #[serde(default = "default_true")]
    pub reachable: bool,
    /// Start the run with a live expeller on this device (its fingerprint
    /// and implant already done).
    #[serde(default)]
    pub expeller_preinstalled: bool,
}

fn default_true() -> bool {
    true
}

/// Either the name of a built-in profile or a full inline definition.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProfileDecl {
    Named(String),
    Inline(DeviceProfile),
}

impl Default for ProfileDecl {
    fn default() -> Self {
        ProfileDecl::Named("dh3004".to_string())
    }
}

impl ProfileDecl {
    pub fn resolve(&self) -> Result<DeviceProfile, SimError> {
        match self {
            ProfileDecl::Named(name) => match name.as_str() {
                "dh3004" => Ok(DeviceProfile::dh3004()),
                other => Err(SimError::Validation(format!(
                    "unknown device profile `{other}`"
                ))),
            },
            ProfileDecl::Inline(profile) => Ok(profile.clone()),
        }
    }
}

/// How the hostile side shows up in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiraiMode {
    /// Actual bots scanning the simulated universe and spreading.
    Mechanistic,
    /// No bots: each exposed device is taken over after an exponentially
    /// distributed delay, modeling the wild botnet's empirical
    /// time-to-infection.
    Statistical,
    /// A loader hammering one address on a fixed cadence.
    Directed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiraiConfig {
    pub mode: MiraiMode,
    #[serde(default)]
    pub bot_count: u32,
    #[serde(default = "d_scan_rate")]
    pub scan_rate: f64,
    #[serde(default)]
    pub scanlisten_addr: Option<Address>,
    #[serde(default = "d_mean_s")]
    pub statistical_mean_s: f64,
    #[serde(default = "d_payload")]
    pub payload_bytes: u64,
    #[serde(default)]
    pub directed_target: Option<Ipv4>,
    #[serde(default = "d_directed_interval")]
    pub directed_interval_ms: u64,
    #[serde(default = "d_directed_attempts")]
    pub directed_attempts: u32,
}

fn d_scan_rate() -> f64 {
    10.0
}
fn d_mean_s() -> f64 {
    DEFAULT_WILD_INFECTION_MEAN_S
}
fn d_payload() -> u64 {
    DEFAULT_PAYLOAD_BYTES
}
fn d_directed_interval() -> u64 {
    500
}
fn d_directed_attempts() -> u32 {
    1_000
}

/// Implanter server declaration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplanterDecl {
    #[serde(default = "d_implanter_addr")]
    pub addr: Ipv4,
    #[serde(default = "d_server_scan_rate")]
    pub scan_rate: f64,
    #[serde(default = "d_check_period")]
    pub check_period_ms: u64,
    #[serde(default = "d_hb_interval")]
    pub heartbeat_interval_ms: u64,
    #[serde(default = "d_hb_timeout")]
    pub heartbeat_timeout_ms: u64,
    #[serde(default = "d_blocked_ports")]
    pub blocked_ports: Vec<u16>,
    #[serde(default)]
    pub block_http: bool,
    #[serde(default = "d_credentials")]
    pub credentials: Vec<(String, String)>,
    /// Fingerprint policy: proc path -> required substring.
    #[serde(default = "d_fingerprint")]
    pub fingerprint: BTreeMap<String, String>,
    #[serde(default = "d_payload")]
    pub payload_bytes: u64,
    #[serde(default = "d_resweep")]
    pub resweep_delay_ms: u64,
    #[serde(default = "d_prefix")]
    pub reimplant_prefix_bits: u32,
}

fn d_implanter_addr() -> Ipv4 {
    Ipv4::new(203, 0, 113, 10)
}
fn d_server_scan_rate() -> f64 {
    100.0
}
fn d_check_period() -> u64 {
    DEFAULT_CHECK_PERIOD_MS
}
fn d_hb_interval() -> u64 {
    DEFAULT_HEARTBEAT_INTERVAL_MS
}
fn d_hb_timeout() -> u64 {
    DEFAULT_HEARTBEAT_TIMEOUT_MS
}
fn d_blocked_ports() -> Vec<u16> {
    vec![23, 22]
}
fn d_credentials() -> Vec<(String, String)> {
    vec![("root".to_string(), String::new())]
}
fn d_fingerprint() -> BTreeMap<String, String> {
    [("/proc/hiversion".to_string(), "Dahua".to_string())]
        .into_iter()
        .collect()
}
fn d_resweep() -> u64 {
    1_000
}
fn d_prefix() -> u32 {
    24
}

/// Workflow phase directives.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseDecl {
    /// Initial mass scan-and-implant over a range (default: the universe).
    Deployment {
        start_ms: u64,
        #[serde(default)]
        range: Option<AddrRange>,
    },
    /// A customer reboots the named device at the negotiated slot while the
    /// server races a targeted scan over the hinted range.
    Negotiation {
        device: Ipv4,
        reboot_at_ms: u64,
        hint_range: AddrRange,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceAction {
    Reboot,
    Hang,
    PowerOff,
}

impl DeviceAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeviceAction::Reboot => "reboot",
            DeviceAction::Hang => "hang",
            DeviceAction::PowerOff => "power_off",
        }
    }
}

/// A fault injected into the run at a fixed time.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedEvent {
    pub at_ms: u64,
    pub device: Ipv4,
    pub action: DeviceAction,
}

impl ScenarioConfig {
    pub fn universe(&self) -> Universe {
        Universe::new(self.universe_base, self.universe_bits)
    }

    /// Checks every cross-field invariant. Called by the runner before a
    /// world is built.
    pub fn validate(&self) -> Result<(), SimError> {
        let v = |msg: String| Err(SimError::Validation(msg));

        if self.horizon_ms == 0 {
            return v("horizon_ms must be positive".into());
        }
        if self.universe_bits > 24 {
            return v("universe_bits must be at most 24".into());
        }
        if self.devices.is_empty() {
            return v("at least one device is required".into());
        }

        let mut seen = std::collections::BTreeSet::new();
        for d in &self.devices {
            if !seen.insert(d.address) {
                return v(format!("duplicate device address {}", d.address));
            }
            d.profile.resolve()?;
            if d.expeller_preinstalled && self.implanter.is_none() {
                return v(format!(
                    "device {} has expeller_preinstalled but no implanter is declared",
                    d.address
                ));
            }
        }

        if let Some(imp) = &self.implanter {
            if seen.contains(&imp.addr) {
                return v(format!(
                    "implanter address {} collides with a device",
                    imp.addr
                ));
            }
            if imp.scan_rate <= 0.0 {
                return v("implanter scan_rate must be positive".into());
            }
            if imp.reimplant_prefix_bits > 32 {
                return v("reimplant_prefix_bits must be at most 32".into());
            }
        }

        if let Some(m) = &self.mirai {
            match m.mode {
                MiraiMode::Mechanistic => {
                    if m.bot_count == 0 {
                        return v("mechanistic mode requires bot_count >= 1".into());
                    }
                    if m.scanlisten_addr.is_none() {
                        return v("mechanistic mode requires scanlisten_addr".into());
                    }
                    if m.scan_rate <= 0.0 {
                        return v("mirai scan_rate must be positive".into());
                    }
                }
                MiraiMode::Statistical => {
                    if m.statistical_mean_s <= 0.0 {
                        return v("statistical_mean_s must be positive".into());
                    }
                }
                MiraiMode::Directed => {
                    let Some(target) = m.directed_target else {
                        return v("directed mode requires directed_target".into());
                    };
                    if !seen.contains(&target) {
                        return v(format!("directed_target {target} is not a declared device"));
                    }
                    if m.scanlisten_addr.is_none() {
                        return v("directed mode requires scanlisten_addr".into());
                    }
                    if m.directed_interval_ms == 0 {
                        return v("directed_interval_ms must be positive".into());
                    }
                }
            }
            if let Some(sl) = m.scanlisten_addr {
                if seen.contains(&sl.ip) {
                    return v(format!(
                        "mirai scanlisten address {} collides with a device",
                        sl.ip
                    ));
                }
            }
        }

        for p in &self.phases {
            if self.implanter.is_none() {
                return v("phases require an implanter".into());
            }
            if let PhaseDecl::Negotiation { device, .. } = p {
                if !seen.contains(device) {
                    return v(format!("negotiation device {device} is not declared"));
                }
            }
        }

        for e in &self.injected_events {
            if !seen.contains(&e.device) {
                return v(format!(
                    "injected event at t={} references undeclared device {}",
                    e.at_ms, e.device
                ));
            }
        }

        Ok(())
    }
}

/// Parses a scenario from TOML text.
pub fn load_config_str(text: &str) -> Result<ScenarioConfig, SimError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, SimError> {
    let text = std::fs::read_to_string(path)?;
    load_config_str(&text)
}
