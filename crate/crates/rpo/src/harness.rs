//! Seeded multi-trial experiments and their CSV outputs.
//!
//! Trial `i` draws its optimizer randomness from stream `2i` and its revenue
//! evaluation from stream `2i + 1` of the master seed, so results do not
//! depend on how trials are scheduled across threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rpo_core::market::Market;
use rpo_core::optimizer::{optimize_with_rng, Domain, Trajectory};
use rpo_core::oracles::{argmax_revenue, revenue, ReserveGrid, RevenueEstimate};
use rpo_core::stats::SampleStats;
use rpo_core::derive_stream;

use crate::config::ExperimentConfig;
use crate::error::{io_err, Result};

/// Stream used for the normalization grid search.
pub const NORMALIZATION_STREAM: u64 = u64::MAX;

pub const TRAJECTORY_HEADER: &str =
    "trial,round,reserve,r_plus,r_minus,gradient,gradient_excess,gradient_demand,gradient_mapping";
pub const SUMMARY_HEADER: &str = "variant,round,mean_rev,ci_half,norm_rev";
pub const PLOT_HEADER: &str = "variant,round,mean,ci_lo,ci_hi";

/// Runs `f` on a pool of `jobs` threads, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(k) => Ok(rayon::ThreadPoolBuilder::new().num_threads(k).build()?.install(f)),
        None => Ok(f()),
    }
}

/// Revenue at every grid point in parallel, each point replaying the same
/// stream (common random numbers).
pub fn parallel_revenue_curve(
    market: &Market,
    grid: &[f64],
    samples: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<(f64, RevenueEstimate)>> {
    if grid.is_empty() {
        return Err(rpo_core::Error::EmptyGrid.into());
    }
    grid.par_iter()
        .map(|&r| {
            let mut rng = derive_stream(seed, stream);
            Ok((r, revenue(market, r, samples, &mut rng)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub r_star: f64,
    pub mu_star: f64,
}

/// Grid-searched optimum over the part of the search domain where bids can
/// clear, `[r_min, min(r_max, 1)]`.
pub fn normalization(market: &Market, domain: &Domain, step: f64, samples: usize, seed: u64) -> Result<Normalization> {
    let hi = domain.max.min(1.0).max(domain.min);
    let grid = ReserveGrid { lo: domain.min, hi, step }.points()?;
    let curve = parallel_revenue_curve(market, &grid, samples, seed, NORMALIZATION_STREAM)?;
    let (r_star, best) = argmax_revenue(&curve)?;
    Ok(Normalization { r_star, mu_star: best.mean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub trajectory: Trajectory,
    /// Estimated revenue at the reserve played in each round.
    pub revenue: Vec<f64>,
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutcome> {
    let mut opt = cfg.optimizer.clone();
    opt.seed = cfg.master_seed;
    opt.demand_fit.seed = cfg.master_seed.wrapping_add(trial as u64);
    let market = &cfg.env.market;
    let mut rng = derive_stream(cfg.master_seed, 2 * trial as u64);
    let trajectory = optimize_with_rng(&opt, market, &mut rng)?;
    let mut eval = derive_stream(cfg.master_seed, 2 * trial as u64 + 1);
    let revenue = trajectory
        .records
        .iter()
        .map(|rec| Ok(revenue(market, rec.reserve, cfg.revenue_eval_samples, &mut eval)?.mean))
        .collect::<Result<Vec<f64>>>()?;
    Ok(TrialOutcome { trial, trajectory, revenue })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSummary {
    pub round: usize,
    pub mean_rev: f64,
    pub ci_half: f64,
    pub norm_rev: f64,
}

/// Across-trial mean of a per-trial statistic with its 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStat {
    pub mean: f64,
    pub ci_half: f64,
}

impl WindowStat {
    fn of(per_trial: &[f64]) -> Self {
        let s = SampleStats::from_slice(per_trial);
        WindowStat { mean: s.mean, ci_half: s.ci95_half_width() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub variant: String,
    pub rounds: Vec<RoundSummary>,
    pub normalization: Normalization,
    pub avg_norm_rev_20: WindowStat,
    pub avg_norm_rev_50: WindowStat,
    pub final_norm_rev_50: WindowStat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialOutcome>,
    pub summary: TrialSummary,
}

impl ExperimentResult {
    /// Per-trial mean normalized revenue over the first `k` rounds.
    pub fn first_rounds(&self, k: usize) -> Vec<f64> {
        window(&self.trials, self.summary.normalization.mu_star, 0, k)
    }

    /// Per-trial mean normalized revenue over the last `k` rounds.
    pub fn last_rounds(&self, k: usize) -> Vec<f64> {
        let t = self.config.optimizer.rounds;
        window(&self.trials, self.summary.normalization.mu_star, t.saturating_sub(k), t)
    }
}

fn window(trials: &[TrialOutcome], mu_star: f64, start: usize, end: usize) -> Vec<f64> {
    trials
        .iter()
        .map(|t| {
            let w = &t.revenue[start.min(t.revenue.len())..end.min(t.revenue.len())];
            if w.is_empty() {
                0.0
            } else {
                w.iter().sum::<f64>() / (w.len() as f64 * mu_star)
            }
        })
        .collect()
}

/// Runs every trial (in parallel on the current pool) and summarizes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let normalization = normalization(
        &cfg.env.market,
        &cfg.optimizer.domain,
        cfg.norm_grid_step,
        cfg.norm_samples,
        cfg.master_seed,
    )?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let mu = normalization.mu_star;
    let rounds = (0..cfg.optimizer.rounds)
        .map(|t| {
            let values: Vec<f64> = trials.iter().map(|tr| tr.revenue[t]).collect();
            let s = SampleStats::from_slice(&values);
            RoundSummary { round: t + 1, mean_rev: s.mean, ci_half: s.ci95_half_width(), norm_rev: s.mean / mu }
        })
        .collect();
    let t = cfg.optimizer.rounds;
    let summary = TrialSummary {
        variant: cfg.optimizer.method.roman().to_string(),
        rounds,
        normalization,
        avg_norm_rev_20: WindowStat::of(&window(&trials, mu, 0, 20)),
        avg_norm_rev_50: WindowStat::of(&window(&trials, mu, 0, 50)),
        final_norm_rev_50: WindowStat::of(&window(&trials, mu, t.saturating_sub(50), t)),
    };
    Ok(ExperimentResult { config: cfg.clone(), trials, summary })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn trajectory_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for t in &result.trials {
        for r in &t.trajectory.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                t.trial,
                r.round,
                r.reserve,
                r.r_plus,
                r.r_minus,
                r.gradient.value,
                opt(r.gradient.excess_part),
                opt(r.gradient.demand_part),
                r.gradient_mapping
            );
        }
    }
    out
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let s = &result.summary;
    let cfg = &result.config;
    let mut out = String::new();
    let meta: [(&str, String); 13] = [
        ("env", cfg.env.spec.clone()),
        ("variant", s.variant.clone()),
        ("trials", cfg.trials.to_string()),
        ("rounds", cfg.optimizer.rounds.to_string()),
        ("master_seed", cfg.master_seed.to_string()),
        ("mu_star", s.normalization.mu_star.to_string()),
        ("r_star", s.normalization.r_star.to_string()),
        ("avg_norm_rev_20", s.avg_norm_rev_20.mean.to_string()),
        ("avg_norm_rev_20_ci_half", s.avg_norm_rev_20.ci_half.to_string()),
        ("avg_norm_rev_50", s.avg_norm_rev_50.mean.to_string()),
        ("avg_norm_rev_50_ci_half", s.avg_norm_rev_50.ci_half.to_string()),
        ("final_norm_rev_50", s.final_norm_rev_50.mean.to_string()),
        ("final_norm_rev_50_ci_half", s.final_norm_rev_50.ci_half.to_string()),
    ];
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    for note in &cfg.notes {
        let _ = writeln!(out, "# note={note}");
    }
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in &s.rounds {
        let _ = writeln!(out, "{},{},{},{},{}", s.variant, r.round, r.mean_rev, r.ci_half, r.norm_rev);
    }
    out
}

/// Plot rows in normalized units: `(variant, round, mean, ci_lo, ci_hi)`.
pub fn plot_rows(variant: &str, mu_star: f64, rounds: &[RoundSummary]) -> Vec<(String, usize, f64, f64, f64)> {
    rounds
        .iter()
        .map(|r| {
            let half = r.ci_half / mu_star;
            (variant.to_string(), r.round, r.norm_rev, r.norm_rev - half, r.norm_rev + half)
        })
        .collect()
}

pub fn plot_csv(rows: &[(String, usize, f64, f64, f64)]) -> String {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    for (v, round, mean, lo, hi) in rows {
        let _ = writeln!(out, "{v},{round},{mean},{lo},{hi}");
    }
    out
}

/// Writes a set of files; if any write fails, the ones already written are
/// removed again.
pub fn write_all(files: &[(PathBuf, String)]) -> Result<()> {
    let mut written: Vec<&Path> = Vec::new();
    for (path, contents) in files {
        if let Err(e) = fs::write(path, contents).map_err(io_err(path)) {
            for p in written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(())
}

/// Writes `trajectory.csv`, `summary.csv` and `plot.csv` into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let s = &result.summary;
    let files = vec![
        (dir.join("trajectory.csv"), trajectory_csv(result)),
        (dir.join("summary.csv"), summary_csv(result)),
        (dir.join("plot.csv"), plot_csv(&plot_rows(&s.variant, s.normalization.mu_star, &s.rounds))),
    ];
    write_all(&files)?;
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
