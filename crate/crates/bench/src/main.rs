use std::path::PathBuf;
use std::process::ExitCode;

use bimanual_bench::suite::{read_episodes, summary_csv, write_summary, EPISODES_FILE};
use bimanual_bench::{run_suite, summarize, BenchError, Result, ScenarioConfig, SuiteOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bimanual-bench",
    version,
    about = "Run and summarize bimanual planning benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every episode of a scenario and write episodes.csv and summary.csv.
    Run {
        config: PathBuf,
        outdir: PathBuf,
        /// Comma-separated batch sizes replacing the configured sweep.
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
        /// Runs per batch size.
        #[arg(long)]
        runs: Option<usize>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for episodes.
        #[arg(long)]
        threads: Option<usize>,
        /// Suppress per-episode progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Recompute summary rows from an episode CSV.
    Metrics {
        episodes: PathBuf,
        /// Directory for summary.csv; printed to stdout when absent.
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
    /// Check a scenario config and print its normalized form.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            outdir,
            batch_sizes,
            runs,
            seed,
            threads,
            quiet,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(b) = batch_sizes {
                cfg.batch_sizes = b;
            }
            if let Some(n) = runs {
                cfg.n_runs = n;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let progress = |r: &bimanual_bench::EpisodeRow| {
                if !quiet {
                    eprintln!(
                        "batch {:>5} run {:>3}: {} ({}) t_task {:.1} s, {} steps",
                        r.batch_size,
                        r.run,
                        if r.success { "success" } else { "failure" },
                        r.failure_reason.as_str(),
                        r.t_task_s,
                        r.n_steps
                    );
                }
            };
            let report = run_suite(&cfg, &outdir, SuiteOptions { threads }, &progress)?;
            for s in &report.summaries {
                println!(
                    "{} N={:<5} success {:>5.1}%  t_task {:.2} ± {:.2} s  t_comp {:.4} ± {:.4} s",
                    s.task,
                    s.batch_size,
                    s.success_rate_pct,
                    s.t_task_mean_s,
                    s.t_task_std_s,
                    s.t_comp_mean_s,
                    s.t_comp_std_s
                );
            }
        }
        Command::Metrics { episodes, outdir } => {
            let path = if episodes.is_dir() {
                episodes.join(EPISODES_FILE)
            } else {
                episodes
            };
            let rows = read_episodes(&std::fs::read(&path)?)?;
            let summaries = summarize(&rows)?;
            match outdir {
                Some(dir) => write_summary(&dir, &summaries)?,
                None => print!("{}", String::from_utf8_lossy(&summary_csv(&summaries)?)),
            }
        }
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ScenarioConfig::from_json(&text)?;
            println!("{}", cfg.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = BenchError::Config(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
