//! End-to-end behavior of the composed world: delivery semantics, the
//! infection/expulsion race window, fingerprint aborts, watchdog handling,
//! and message conservation.

use expelsim::device::{PortState, ProcessFamily};
use expelsim::scenario::load_config_str;
use expelsim::scenario::metrics::Winner;
use expelsim::simkernel::Ipv4;
use expelsim::{run_scenario, World};

#[test]
fn refusal_reaches_the_sender_after_one_latency() {
    // a directed attempt against a protected device: connect sent at t=0,
    // refusal logged at t=latency
    let cfg = load_config_str(
        r#"
        horizon_ms = 10000
        latency_ms = 50
        [[devices]]
        address = "1.1.0.9"
        expeller_preinstalled = true
        [implanter]
        [mirai]
        mode = "directed"
        scanlisten_addr = "198.51.100.10:48101"
        directed_target = "1.1.0.9"
        directed_interval_ms = 60000
        directed_attempts = 1
    "#,
    )
    .unwrap();
    let (_, log) = run_scenario(&cfg).unwrap();
    let blocked = log
        .first_of_kind("blocked_attempt")
        .expect("attempt blocked");
    assert_eq!(blocked.time.as_ms(), 50);
}

#[test]
fn rebooting_device_is_unreachable_until_boot_completes() {
    // negotiation: the sweep probes the device while it reboots and only
    // succeeds after boot_done
    let cfg = load_config_str(
        r#"
        horizon_ms = 40000
        [[devices]]
        address = "1.1.0.38"
        [implanter]
        resweep_delay_ms = 2500
        [[phases]]
        kind = "negotiation"
        device = "1.1.0.38"
        reboot_at_ms = 2000
        hint_range = "1.1.0.0-1.1.0.255"
    "#,
    )
    .unwrap();
    let (metrics, log) = run_scenario(&cfg).unwrap();
    let boot_done = log.first_of_kind("boot_done").unwrap().time.as_ms();
    let found = log.first_of_kind("device_found").unwrap().time.as_ms();
    assert_eq!(boot_done, 7_000);
    assert!(found > boot_done, "found at {found} while still rebooting");
    // no wild mirai declared: the expeller always wins the negotiated slot
    assert_eq!(metrics.race_winners[0].winner, Winner::Expeller);
}

#[test]
fn mirai_held_device_refuses_the_implanter() {
    // the bot gets in first and blocks remote access; the later deployment
    // sweep can never log in, so the infection stands
    let cfg = load_config_str(
        r#"
        horizon_ms = 120000
        universe_bits = 4
        [[devices]]
        address = "1.1.0.9"
        [implanter]
        [mirai]
        mode = "mechanistic"
        bot_count = 1
        scan_rate = 10.0
        scanlisten_addr = "198.51.100.10:48101"
        [[phases]]
        kind = "deployment"
        start_ms = 60000
        range = "1.1.0.0-1.1.0.255"
    "#,
    )
    .unwrap();
    let mut world = World::new(&cfg).unwrap();
    world.run_to(cfg.horizon_ms).unwrap();
    let dev = world.device_by_addr(Ipv4::new(1, 1, 0, 9)).unwrap();
    assert_eq!(dev.live_family_count(ProcessFamily::Mirai), 1);
    assert_eq!(dev.live_family_count(ProcessFamily::Expeller), 0);
    assert_eq!(dev.port_state(23), PortState::Closed);
    let (metrics, log) = world.finish();
    assert!(metrics.counts.mirai_infections >= 1);
    assert_eq!(metrics.counts.expeller_implants, 0);
    assert!(log.first_of_kind("implant_ok").is_none());
}

#[test]
fn expeller_expels_a_bot_that_landed_in_the_race_window() {
    // the wild loader starts first and its bot turns up mid-way through the
    // expeller's own load; the established session survives the bot's port
    // blocking, so the expeller still executes and then kills the bot
    let cfg = load_config_str(
        r#"
        horizon_ms = 60000
        [[devices]]
        address = "1.1.0.9"
        [implanter]
        [mirai]
        mode = "directed"
        scanlisten_addr = "198.51.100.10:48101"
        directed_target = "1.1.0.9"
        directed_interval_ms = 60000
        directed_attempts = 1
        [[phases]]
        kind = "deployment"
        start_ms = 4000
        range = "1.1.0.0-1.1.0.255"
    "#,
    )
    .unwrap();
    let mut world = World::new(&cfg).unwrap();
    world.run_to(cfg.horizon_ms).unwrap();
    let dev = world.device_by_addr(Ipv4::new(1, 1, 0, 9)).unwrap();
    assert_eq!(dev.live_family_count(ProcessFamily::Mirai), 0);
    assert_eq!(dev.live_family_count(ProcessFamily::Expeller), 1);
    assert_eq!(dev.port_state(23), PortState::Closed);

    let (metrics, log) = world.finish();
    assert_eq!(metrics.counts.mirai_infections, 1);
    assert_eq!(metrics.counts.expeller_implants, 1);
    let bot_started = log.first_of_kind("bot_started").unwrap().time.as_ms();
    let protected = log.first_of_kind("expeller_started").unwrap().time.as_ms();
    assert!(
        bot_started < protected,
        "bot at {bot_started} should pre-date protection at {protected}"
    );
    let killed = log.first_of_kind("bot_killed").unwrap();
    assert_eq!(
        killed.detail.iter().find(|(k, _)| k == "cause").unwrap().1,
        "expelled"
    );
    // heartbeats flow afterwards
    assert!(log.first_of_kind("implant_ok").is_some());
}

#[test]
fn hint_range_excluding_the_device_finds_nothing() {
    let cfg = load_config_str(
        r#"
        horizon_ms = 30000
        [[devices]]
        address = "1.1.0.38"
        [implanter]
        [mirai]
        mode = "statistical"
        statistical_mean_s = 10000.0
        [[phases]]
        kind = "negotiation"
        device = "1.1.0.38"
        reboot_at_ms = 2000
        hint_range = "1.1.1.0-1.1.1.255"
    "#,
    )
    .unwrap();
    let (metrics, log) = run_scenario(&cfg).unwrap();
    assert!(log.first_of_kind("device_found").is_none());
    assert!(log.first_of_kind("implant_ok").is_none());
    assert_eq!(metrics.race_winners[0].winner, Winner::Neither);
}

#[test]
fn watchdog_reboots_a_hung_protected_device_and_reimplant_follows() {
    // the expeller leaves the watchdog armed, so a hang turns into a reboot
    // and the regular phase recovers the device
    let cfg = load_config_str(
        r#"
        horizon_ms = 150000
        [[devices]]
        address = "1.1.0.9"
        expeller_preinstalled = true
        [implanter]
        [[injected_events]]
        at_ms = 10000
        device = "1.1.0.9"
        action = "hang"
    "#,
    )
    .unwrap();
    let (metrics, log) = run_scenario(&cfg).unwrap();
    let hang = log.first_of_kind("hang").unwrap().time.as_ms();
    let wd = log.first_of_kind("watchdog_reboot").unwrap().time.as_ms();
    let boot = log.first_of_kind("boot_done").unwrap().time.as_ms();
    assert_eq!(wd, hang + 30_000);
    assert_eq!(boot, wd + 5_000);
    let lost = log.first_of_kind("heartbeat_lost").unwrap().time.as_ms();
    let recovered = log
        .records
        .iter()
        .find(|r| r.kind == "implant_ok" && r.time.as_ms() > lost)
        .unwrap()
        .time
        .as_ms();
    assert!(recovered > lost);
    assert_eq!(metrics.reimplant_latencies_ms.len(), 1);
}

#[test]
fn disabled_watchdog_leaves_a_hung_bot_device_down_forever() {
    // a bot disables the watchdog at init; a later hang then never reboots
    let cfg = load_config_str(
        r#"
        horizon_ms = 120000
        universe_bits = 4
        [[devices]]
        address = "1.1.0.9"
        [mirai]
        mode = "mechanistic"
        bot_count = 1
        scan_rate = 10.0
        scanlisten_addr = "198.51.100.10:48101"
        [[injected_events]]
        at_ms = 60000
        device = "1.1.0.9"
        action = "hang"
    "#,
    )
    .unwrap();
    let (metrics, log) = run_scenario(&cfg).unwrap();
    assert!(metrics.counts.mirai_infections >= 1, "bot never landed");
    let hang = log.first_of_kind("hang").unwrap().time.as_ms();
    assert!(log.first_of_kind("watchdog_reboot").is_none());
    assert!(!log
        .records
        .iter()
        .any(|r| r.kind == "boot_done" && r.time.as_ms() > hang));
}

#[test]
fn foreign_device_aborts_clean_while_own_device_is_implanted() {
    // a mixed /24: the fingerprint gate implants the manufacturer's device
    // and leaves the foreign one bit-identical to its pre-contact state
    let cfg = load_config_str(
        r#"
        horizon_ms = 60000
        [[devices]]
        address = "1.1.0.9"
        [[devices]]
        address = "1.1.0.20"
        [devices.profile]
        manufacturer = "XiongMai"
        model = "XM-530"
        open_ports = [23, 80]
        credentials = [["root", ""]]
        ram_mb = 32
        busybox = true
        writable_dirs = ["/tmp"]
        [devices.profile.proc_files]
        "/proc/hiversion" = "HiLinux XM-530 XiongMai"
        [implanter]
        [[phases]]
        kind = "deployment"
        start_ms = 0
        range = "1.1.0.0-1.1.0.255"
    "#,
    )
    .unwrap();
    let mut world = World::new(&cfg).unwrap();

    let foreign_before = world
        .device_by_addr(Ipv4::new(1, 1, 0, 20))
        .unwrap()
        .observable_state();
    world.run_to(cfg.horizon_ms).unwrap();

    let own = world.device_by_addr(Ipv4::new(1, 1, 0, 9)).unwrap();
    assert_eq!(own.live_family_count(ProcessFamily::Expeller), 1);
    let foreign = world.device_by_addr(Ipv4::new(1, 1, 0, 20)).unwrap();
    assert_eq!(foreign.observable_state(), foreign_before);
    assert!(foreign.is_pristine());

    let (metrics, log) = world.finish();
    assert_eq!(metrics.counts.expeller_implants, 1);
    let abort = log.first_of_kind("foreign_abort").unwrap();
    assert_eq!(abort.entity, "1.1.0.20");
}

#[test]
fn infected_devices_join_the_scanning_pool() {
    // propagation: one wild bot seeds the first infection, and resident
    // bots help discover the rest of the fleet
    let cfg = load_config_str(
        r#"
        horizon_ms = 600000
        universe_bits = 6
        [[devices]]
        address = "1.1.0.9"
        [[devices]]
        address = "1.1.0.23"
        [[devices]]
        address = "1.1.0.47"
        [mirai]
        mode = "mechanistic"
        bot_count = 1
        scan_rate = 10.0
        scanlisten_addr = "198.51.100.10:48101"
    "#,
    )
    .unwrap();
    let mut world = World::new(&cfg).unwrap();
    world.run_to(cfg.horizon_ms).unwrap();
    for addr in ["1.1.0.9", "1.1.0.23", "1.1.0.47"] {
        let dev = world.device_by_addr(addr.parse().unwrap()).unwrap();
        assert_eq!(
            dev.live_family_count(ProcessFamily::Mirai),
            1,
            "{addr} not infected"
        );
    }
    let (metrics, log) = world.finish();
    assert_eq!(metrics.counts.mirai_infections, 3);
    assert!(metrics.max_concurrent_mirai <= 1);
    // at least one report was filed by a resident bot, not the seeder
    let resident_report = log.of_kind("mirai_report").nth(1).map(|r| r.time.as_ms());
    assert!(resident_report.is_some());
}

#[test]
fn no_implanter_action_before_its_phase_starts() {
    let cfg = load_config_str(
        r#"
        horizon_ms = 80000
        [[devices]]
        address = "1.1.0.9"
        [implanter]
        [[phases]]
        kind = "deployment"
        start_ms = 50328
        range = "1.1.0.0-1.1.0.255"
    "#,
    )
    .unwrap();
    let (_, log) = run_scenario(&cfg).unwrap();
    let first_implanter_action = log
        .records
        .iter()
        .find(|r| r.entity == "implanter")
        .unwrap();
    assert_eq!(first_implanter_action.kind, "scan_started");
    assert_eq!(first_implanter_action.time.as_ms(), 50_328);
}

#[test]
fn intervals_are_closed_and_covered_by_counts() {
    // every protection/infection interval that opens is closed by reboot,
    // expulsion, power-off or horizon, and the event counters bound them
    for seed in 0..20u64 {
        let cfg = load_config_str(&format!(
            r#"
            seed = {seed}
            horizon_ms = 120000
            universe_bits = 8
            [[devices]]
            address = "1.1.0.9"
            [implanter]
            [mirai]
            mode = "mechanistic"
            bot_count = 2
            scan_rate = 10.0
            scanlisten_addr = "198.51.100.10:48101"
            [[phases]]
            kind = "deployment"
            start_ms = 15000
            range = "1.1.0.0-1.1.0.255"
            [[injected_events]]
            at_ms = 60000
            device = "1.1.0.9"
            action = "reboot"
        "#
        ))
        .unwrap();
        let (metrics, _) = run_scenario(&cfg).unwrap();
        let opened: u32 = metrics
            .devices
            .iter()
            .map(|d| d.intervals.len() as u32)
            .sum();
        assert!(
            metrics.counts.mirai_infections + metrics.counts.expeller_implants >= opened,
            "seed {seed}: {opened} intervals > counts {:?}",
            metrics.counts
        );
        for d in &metrics.devices {
            for iv in &d.intervals {
                let end = iv.end_ms.expect("interval left open");
                assert!(end >= iv.start_ms);
                let cause = iv.end_cause.as_deref().unwrap();
                assert!(
                    [
                        "reboot",
                        "power_off",
                        "expelled",
                        "killed_by_rival",
                        "horizon"
                    ]
                    .contains(&cause),
                    "seed {seed}: unexpected end cause {cause}"
                );
            }
        }
    }
}

#[test]
fn every_sent_message_is_accounted_for() {
    let cfg = load_config_str(
        r#"
        horizon_ms = 250000
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
    let mut world = World::new(&cfg).unwrap();
    world.run_to(cfg.horizon_ms).unwrap();
    let net = world.net;
    assert!(net.sent > 0);
    assert_eq!(
        net.sent,
        net.delivered + net.refused + net.unreachable,
        "messages vanished: {net:?}"
    );
}

#[test]
fn power_off_silences_the_device_for_good() {
    let cfg = load_config_str(
        r#"
        horizon_ms = 200000
        [[devices]]
        address = "1.1.0.9"
        expeller_preinstalled = true
        [implanter]
        [[injected_events]]
        at_ms = 20000
        device = "1.1.0.9"
        action = "power_off"
    "#,
    )
    .unwrap();
    let (metrics, log) = run_scenario(&cfg).unwrap();
    // loss is detected but every re-implant probe dies unreachable
    assert!(log.first_of_kind("heartbeat_lost").is_some());
    assert!(log.first_of_kind("scan_started").is_some());
    assert!(!log
        .records
        .iter()
        .any(|r| r.kind == "device_found" && r.time.as_ms() > 20_000));
    assert_eq!(metrics.reimplant_latencies_ms.len(), 0);
    // the protection interval closed at the power cut
    let intervals = &metrics.devices[0].intervals;
    assert_eq!(
        intervals.last().unwrap().end_cause.as_deref(),
        Some("power_off")
    );
}

#[test]
fn failed_loads_leave_no_residue() {
    // each enumerated load failure aborts before any write, so the target
    // is left exactly as found
    let profiles = [
        // no busybox: fails at step 2
        (
            r#"
            [devices.profile]
            manufacturer = "X"
            model = "X1"
            open_ports = [23]
            credentials = [["root", ""]]
            ram_mb = 16
            busybox = false
            writable_dirs = ["/tmp"]
            [devices.profile.proc_files]
            "#,
            "no busybox",
        ),
        // nowhere to write: fails at step 3
        (
            r#"
            [devices.profile]
            manufacturer = "X"
            model = "X2"
            open_ports = [23]
            credentials = [["root", ""]]
            ram_mb = 16
            busybox = true
            writable_dirs = []
            [devices.profile.proc_files]
            "#,
            "no writable directory",
        ),
        // no back-door pair matches: fails at step 1
        (
            r#"
            [devices.profile]
            manufacturer = "X"
            model = "X3"
            open_ports = [23]
            credentials = [["operator", "s3cret-unguessable"]]
            ram_mb = 16
            busybox = true
            writable_dirs = ["/tmp"]
            [devices.profile.proc_files]
            "#,
            "login failed",
        ),
    ];
    for (profile, expect) in profiles {
        let text = format!(
            r#"
            horizon_ms = 120000
            [[devices]]
            address = "1.1.0.9"
            {profile}
            [mirai]
            mode = "directed"
            scanlisten_addr = "198.51.100.10:48101"
            directed_target = "1.1.0.9"
            directed_interval_ms = 120000
            directed_attempts = 1
        "#
        );
        let cfg = load_config_str(&text).unwrap();
        let mut world = World::new(&cfg).unwrap();
        let before = world
            .device_by_addr(Ipv4::new(1, 1, 0, 9))
            .unwrap()
            .observable_state();
        world.run_to(cfg.horizon_ms).unwrap();
        let after = world
            .device_by_addr(Ipv4::new(1, 1, 0, 9))
            .unwrap()
            .observable_state();
        assert_eq!(before, after, "case `{expect}` changed device state");
        let (metrics, log) = world.finish();
        assert_eq!(metrics.counts.mirai_infections, 0, "case `{expect}`");
        // the failure is visible either as a failed load or a dead scan
        let failed_load = log.of_kind("load_failed").any(|r| {
            r.detail
                .iter()
                .any(|(k, v)| k == "error" && v.contains(expect))
        });
        let blocked_scan = log.of_kind("blocked_attempt").next().is_some();
        assert!(failed_load || blocked_scan, "case `{expect}` left no trace");
    }
}

#[test]
fn scan_report_carries_the_matched_pair() {
    // the first weight-ordered pair that opens the shell is what gets
    // reported upstream
    let cfg = load_config_str(
        r#"
        horizon_ms = 600000
        universe_bits = 4
        [[devices]]
        address = "1.1.0.9"
        [devices.profile]
        manufacturer = "X"
        model = "cam"
        open_ports = [23]
        credentials = [["root", "xc3511"]]
        ram_mb = 16
        busybox = true
        writable_dirs = ["/tmp"]
        [devices.profile.proc_files]
        [mirai]
        mode = "mechanistic"
        bot_count = 1
        scan_rate = 10.0
        scanlisten_addr = "198.51.100.10:48101"
    "#,
    )
    .unwrap();
    let (_, log) = run_scenario(&cfg).unwrap();
    let report = log.first_of_kind("mirai_report").expect("device found");
    let get = |k: &str| {
        report
            .detail
            .iter()
            .find(|(key, _)| key == k)
            .map(|(_, v)| v.as_str())
            .unwrap()
    };
    assert_eq!(get("user"), "root");
    assert_eq!(get("pass"), "xc3511");
}

#[test]
fn unreachable_device_is_never_discovered() {
    // reachable=false models a device behind NAT without UPnP
    let cfg = load_config_str(
        r#"
        horizon_ms = 60000
        [[devices]]
        address = "1.1.0.9"
        reachable = false
        [implanter]
        [[phases]]
        kind = "deployment"
        start_ms = 0
        range = "1.1.0.0-1.1.0.255"
    "#,
    )
    .unwrap();
    let (metrics, log) = run_scenario(&cfg).unwrap();
    assert!(log.first_of_kind("device_found").is_none());
    assert_eq!(metrics.counts.expeller_implants, 0);
}
