//! Monte-Carlo driver: many independent runs of one scenario under
//! sequential seeds, with order-independent aggregation. Any single run can
//! be reproduced in isolation from its seed.

use thiserror::Error;

use super::config::ScenarioConfig;
use super::metrics::{RunMetrics, Winner};
use super::world::run_scenario;
use super::SimError;

#[derive(Debug, Error)]
#[error("run {run} (seed {seed}) failed: {source}")]
pub struct McError {
    pub run: u32,
    pub seed: u64,
    #[source]
    pub source: SimError,
}

/// Aggregate statistics over a batch of seeded runs.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub runs: u32,
    pub seed_base: u64,
    pub per_run: Vec<RunMetrics>,
    pub races_total: u32,
    pub expeller_wins: u32,
    pub mirai_wins: u32,
    pub neither: u32,
    /// Expeller win-rate over all races, when any were run.
    pub win_rate: Option<f64>,
    /// 95% normal-approximation confidence interval for the win-rate.
    pub win_rate_ci95: Option<(f64, f64)>,
    pub reimplant_mean_ms: Option<f64>,
    pub reimplant_p50_ms: Option<u64>,
    pub reimplant_p95_ms: Option<u64>,
    pub mean_wild_first_report_ms: Option<f64>,
}

/// Executes `runs` independent scenarios seeded `seed_base..seed_base+runs`.
pub fn run_monte_carlo(
    cfg: &ScenarioConfig,
    runs: u32,
    seed_base: u64,
) -> Result<Aggregate, McError> {
    assert!(runs >= 1, "runs must be at least 1");
    let mut per_run = Vec::with_capacity(runs as usize);
    for i in 0..runs {
        let seed = seed_base + i as u64;
        let mut run_cfg = cfg.clone();
        run_cfg.seed = seed;
        let (metrics, _log) = run_scenario(&run_cfg).map_err(|source| McError {
            run: i,
            seed,
            source,
        })?;
        per_run.push(metrics);
    }
    Ok(aggregate(per_run, runs, seed_base))
}

fn aggregate(per_run: Vec<RunMetrics>, runs: u32, seed_base: u64) -> Aggregate {
    let mut expeller_wins = 0u32;
    let mut mirai_wins = 0u32;
    let mut neither = 0u32;
    let mut reimplants: Vec<u64> = Vec::new();
    let mut first_reports: Vec<u64> = Vec::new();

    for m in &per_run {
        for race in &m.race_winners {
            match race.winner {
                Winner::Expeller => expeller_wins += 1,
                Winner::Mirai => mirai_wins += 1,
                Winner::Neither => neither += 1,
            }
        }
        reimplants.extend(&m.reimplant_latencies_ms);
        if let Some(t) = m.wild_first_report_ms {
            first_reports.push(t);
        }
    }

    let races_total = expeller_wins + mirai_wins + neither;
    let (win_rate, win_rate_ci95) = if races_total > 0 {
        let p = expeller_wins as f64 / races_total as f64;
        let half = 1.96 * (p * (1.0 - p) / races_total as f64).sqrt();
        (Some(p), Some(((p - half).max(0.0), (p + half).min(1.0))))
    } else {
        (None, None)
    };

    reimplants.sort_unstable();
    let reimplant_mean_ms = if reimplants.is_empty() {
        None
    } else {
        Some(reimplants.iter().sum::<u64>() as f64 / reimplants.len() as f64)
    };
    let percentile = |sorted: &[u64], p: f64| -> Option<u64> {
        if sorted.is_empty() {
            return None;
        }
        let idx = ((sorted.len() as f64 - 1.0) * p).round() as usize;
        Some(sorted[idx])
    };
    let reimplant_p50_ms = percentile(&reimplants, 0.50);
    let reimplant_p95_ms = percentile(&reimplants, 0.95);

    let mean_wild_first_report_ms = if first_reports.is_empty() {
        None
    } else {
        Some(first_reports.iter().sum::<u64>() as f64 / first_reports.len() as f64)
    };

    Aggregate {
        runs,
        seed_base,
        per_run,
        races_total,
        expeller_wins,
        mirai_wins,
        neither,
        win_rate,
        win_rate_ci95,
        reimplant_mean_ms,
        reimplant_p50_ms,
        reimplant_p95_ms,
        mean_wild_first_report_ms,
    }
}

impl Aggregate {
    pub fn summary(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "runs: {} (seeds {}..{})",
            self.runs,
            self.seed_base,
            self.seed_base + self.runs as u64 - 1
        );
        if let (Some(rate), Some((lo, hi))) = (self.win_rate, self.win_rate_ci95) {
            let _ = writeln!(
                s,
                "races: {} | expeller {} / mirai {} / neither {}",
                self.races_total, self.expeller_wins, self.mirai_wins, self.neither
            );
            let _ = writeln!(s, "expeller win-rate: {rate:.4} (95% CI {lo:.4}..{hi:.4})");
        }
        if let Some(mean) = self.reimplant_mean_ms {
            let _ = writeln!(
                s,
                "reimplant latency: mean {:.0} ms, p50 {} ms, p95 {} ms",
                mean,
                self.reimplant_p50_ms.unwrap_or(0),
                self.reimplant_p95_ms.unwrap_or(0)
            );
        }
        if let Some(mean) = self.mean_wild_first_report_ms {
            let _ = writeln!(s, "mean wild discovery: {mean:.0} ms");
        }
        s
    }
}
