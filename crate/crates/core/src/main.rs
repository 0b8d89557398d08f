use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use expelsim::blackbot::{deobfuscate, ip_is_scannable};
use expelsim::simkernel::Ipv4;
use expelsim::{emit_log, emit_metrics, load_config, run_monte_carlo, run_scenario};

#[derive(Parser)]
#[command(
    name = "expelsim",
    version,
    about = "Deterministic implant/expel simulator for Mirai-class IoT defenses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print a summary.
    Run {
        /// Scenario file (TOML).
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the ordered event log to this file.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the metrics record (JSON) to this file.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run a scenario many times under sequential seeds and aggregate.
    Race {
        #[arg(long)]
        scenario: PathBuf,
        /// Number of independent runs.
        #[arg(long)]
        runs: u32,
        /// First seed; run i uses seed_base + i.
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        /// Write one JSON metrics record per run to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Decode an obfuscated credential string (hex bytes).
    Decode {
        /// Hex bytes, e.g. "504D4D56" or "50 4D 4D 56".
        #[arg(long)]
        hex: String,
    },
    /// Check an address against the bot's scan-target filter.
    CheckIp {
        /// Dotted-quad IPv4 address.
        address: String,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            log,
            metrics,
        } => {
            let mut cfg = load_config(&scenario).map_err(|e| e.to_string())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let (run_metrics, event_log) = run_scenario(&cfg).map_err(|e| e.to_string())?;
            print!("{}", run_metrics.summary());
            if let Some(path) = metrics {
                emit_metrics(&run_metrics, &path).map_err(|e| e.to_string())?;
            }
            if let Some(path) = log {
                emit_log(&event_log, &path).map_err(|e| e.to_string())?;
            }
            Ok(())
        }
        Command::Race {
            scenario,
            runs,
            seed_base,
            out,
        } => {
            if runs == 0 {
                return Err("--runs must be at least 1".into());
            }
            let cfg = load_config(&scenario).map_err(|e| e.to_string())?;
            let agg = run_monte_carlo(&cfg, runs, seed_base).map_err(|e| e.to_string())?;
            print!("{}", agg.summary());
            if let Some(path) = out {
                let mut lines = String::new();
                for m in &agg.per_run {
                    lines.push_str(&m.to_json());
                    lines.push('\n');
                }
                std::fs::write(&path, lines).map_err(|e| e.to_string())?;
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            load_config(&scenario).map_err(|e| e.to_string())?;
            println!("ok");
            Ok(())
        }
        Command::Decode { hex } => {
            let bytes = parse_hex(&hex)?;
            println!("{}", deobfuscate(&bytes));
            Ok(())
        }
        Command::CheckIp { address } => {
            let ip: Ipv4 = address
                .parse()
                .map_err(|e| format!("bad address `{address}`: {e}"))?;
            if ip_is_scannable(ip) {
                println!("{ip}: scannable");
            } else {
                println!("{ip}: excluded");
            }
            Ok(())
        }
    }
}

fn parse_hex(input: &str) -> Result<Vec<u8>, String> {
    let cleaned: String = input
        .trim()
        .trim_start_matches("0x")
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    if !cleaned.len().is_multiple_of(2) {
        return Err(format!("odd-length hex string `{input}`"));
    }
    (0..cleaned.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&cleaned[i..i + 2], 16)
                .map_err(|_| format!("bad hex byte in `{input}`"))
        })
        .collect()
}
