use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use rpo::diag::{diag_csv, diagnose, parse_estimator};
use rpo::harness::{parallel_revenue_curve, run_experiment, with_jobs, write_all, write_outputs};
use rpo::plot::{load_summaries, merged_rows, render_svg};
use rpo::{Environment, ExperimentConfig};
use rpo_core::oracles::{MeasureConfig, ReserveGrid, MIN_REPLICATIONS};

#[derive(Parser)]
#[command(name = "rpo", version, about = "Reserve-price optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-trial experiment from a key=value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo revenue curve over a reserve grid.
    Curve {
        #[arg(long)]
        env: String,
        /// LO:HI:STEP
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Bias and variance of one estimator against its bound.
    Diag {
        /// naive | naive-demand | bid-trunc | quantile-trunc[:Q] | composite-bid | composite-quantile[:Q]
        #[arg(long)]
        estimator: String,
        #[arg(long)]
        env: String,
        #[arg(long)]
        reserve: f64,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        /// Samples per arm.
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 10_000_000)]
        oracle_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Merge summary.csv files under a directory into long-format plot data.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also render an SVG line chart.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn parse_grid(s: &str) -> anyhow::Result<ReserveGrid> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid grid {s:?}"))?;
    let [lo, hi, step] = parts.as_slice() else {
        bail!("grid must be LO:HI:STEP, got {s:?}");
    };
    Ok(ReserveGrid { lo: *lo, hi: *hi, step: *step })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, out, jobs, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            for note in &cfg.notes {
                eprintln!("note: {note}");
            }
            let result = with_jobs(jobs, || run_experiment(&cfg))??;
            write_outputs(&result, &out)?;
            let s = &result.summary;
            println!(
                "variant {}: mu*={:.4} at r*={:.2}; avg normalized revenue, first 50 rounds {:.2}% +/- {:.2}",
                s.variant,
                s.normalization.mu_star,
                s.normalization.r_star,
                100.0 * s.avg_norm_rev_50.mean,
                100.0 * s.avg_norm_rev_50.ci_half
            );
        }
        Command::Curve { env, grid, samples, out, seed } => {
            let env = Environment::parse(&env)?;
            let points = parse_grid(&grid)?.points()?;
            let curve = parallel_revenue_curve(&env.market, &points, samples, seed, 0)?;
            let mut text = String::from("r,revenue,std_error\n");
            for (r, e) in curve {
                text.push_str(&format!("{r},{},{}\n", e.mean, e.std_error));
            }
            write_all(&[(out, text)])?;
        }
        Command::Diag { estimator, env, reserve, reps, out, beta, n, oracle_samples, seed } => {
            if reps < MIN_REPLICATIONS {
                bail!("replications below {MIN_REPLICATIONS}");
            }
            let est = parse_estimator(&estimator)?;
            let environment = Environment::parse(&env)?;
            let cfg = MeasureConfig { oracle_samples, ..MeasureConfig::new(reserve, beta, n, reps) };
            let mut rng = rpo_core::derive_stream(seed, 0);
            let d = diagnose(est, &environment.market, &cfg, &mut rng)?;
            write_all(&[(out, diag_csv(&estimator, &env, &cfg, &d))])?;
            println!("{} {}", d.verdict.label(), d.note);
        }
        Command::Plot { input, out, svg } => {
            let summaries = load_summaries(&input)?;
            let rows = merged_rows(&summaries);
            let mut files = vec![(out, rpo::harness::plot_csv(&rows))];
            if let Some(path) = svg {
                files.push((path, render_svg(&rows)));
            }
            write_all(&files)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
