//! Batch execution of a scenario and the episode and summary CSV files.

use std::io::Write;
use std::path::Path;

use bimanual_mppi::planner::{run_episode, EpisodeRecord, FailureReason};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{child_seed, goal_seed, ScenarioConfig};
use crate::error::{BenchError, Result};
use crate::metrics::{summarize_runs, MetricsSummary, RunMoments};

pub const EPISODES_FILE: &str = "episodes.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

const EPISODES_HEADER: &str = "# one row per episode; t_comp_mean_s and t_comp_std_s are the mean and population \
standard deviation of the optimizer wall time over the planning steps of that run\n";
const SUMMARY_HEADER: &str = "# one row per batch size; t_comp statistics pool every planning step of every run; \
t_task statistics cover every run including failures; standard deviations are population deviations\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub task: String,
    pub batch_size: usize,
    pub run: usize,
    pub seed: u64,
    pub success: bool,
    pub failure_reason: FailureReason,
    pub t_task_s: f64,
    pub n_steps: usize,
    pub t_comp_mean_s: f64,
    pub t_comp_std_s: f64,
}

impl EpisodeRow {
    pub fn new(task: &str, batch_size: usize, run: usize, record: &EpisodeRecord) -> Self {
        let m = RunMoments::from_record(record);
        Self {
            task: task.to_string(),
            batch_size,
            run,
            seed: record.seed,
            success: record.success,
            failure_reason: record.failure_reason,
            t_task_s: m.t_task,
            n_steps: m.n_steps,
            t_comp_mean_s: m.t_comp_mean,
            t_comp_std_s: m.t_comp_std,
        }
    }

    pub fn moments(&self) -> RunMoments {
        RunMoments {
            success: self.success,
            t_task: self.t_task_s,
            n_steps: self.n_steps,
            t_comp_mean: self.t_comp_mean_s,
            t_comp_std: self.t_comp_std_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub batch_size: usize,
    pub n_runs: usize,
    pub n_success: usize,
    pub success_rate_pct: f64,
    pub t_task_mean_s: f64,
    pub t_task_std_s: f64,
    pub n_steps: usize,
    pub t_comp_mean_s: f64,
    pub t_comp_std_s: f64,
}

impl SummaryRow {
    pub fn new(task: &str, batch_size: usize, m: &MetricsSummary) -> Self {
        Self {
            task: task.to_string(),
            batch_size,
            n_runs: m.n_total,
            n_success: m.n_success,
            success_rate_pct: m.success_rate,
            t_task_mean_s: m.t_task_mean,
            t_task_std_s: m.t_task_std,
            n_steps: m.n_steps,
            t_comp_mean_s: m.t_comp_mean,
            t_comp_std_s: m.t_comp_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    /// Sorted by `(batch_size, run)`.
    pub episodes: Vec<EpisodeRow>,
    /// One per batch size, ascending.
    pub summaries: Vec<SummaryRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuiteOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

/// Runs every `(batch size, run)` episode of `config`.
pub fn run_episodes(
    config: &ScenarioConfig,
    options: SuiteOptions,
    progress: &(dyn Fn(&EpisodeRow) + Sync),
) -> Result<Vec<EpisodeRow>> {
    config.validate()?;
    let scene = config.scene()?;
    let task_name = config.task.kind.name();
    let jobs: Vec<(usize, usize)> = config
        .batch_sizes
        .iter()
        .flat_map(|&b| (0..config.n_runs).map(move |r| (b, r)))
        .collect();
    let run_job = |&(batch, run): &(usize, usize)| -> Result<EpisodeRow> {
        let goal = config.sample_goal(goal_seed(config.master_seed, run));
        let task = config.task_for(&scene, &goal)?;
        let mut planner = config.planner;
        planner.mppi.samples = batch;
        let seed = child_seed(config.master_seed, batch, run);
        let record = run_episode(&scene, &task, &planner, config.timeout_s, seed, config.timing)?;
        let row = EpisodeRow::new(task_name, batch, run, &record);
        progress(&row);
        Ok(row)
    };
    let results: Vec<Result<EpisodeRow>> = match options.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| BenchError::Config(e.to_string()))?;
            pool.install(|| jobs.par_iter().map(run_job).collect())
        }
        None => jobs.par_iter().map(run_job).collect(),
    };
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.batch_size, r.run));
    Ok(rows)
}

/// Summary rows computed from episode rows only, one per batch size.
pub fn summarize(rows: &[EpisodeRow]) -> Result<Vec<SummaryRow>> {
    let mut sizes: Vec<(String, usize)> = rows.iter().map(|r| (r.task.clone(), r.batch_size)).collect();
    sizes.sort();
    sizes.dedup();
    sizes
        .iter()
        .map(|(task, b)| {
            let runs: Vec<RunMoments> = rows
                .iter()
                .filter(|r| &r.task == task && r.batch_size == *b)
                .map(EpisodeRow::moments)
                .collect();
            Ok(SummaryRow::new(task, *b, &summarize_runs(&runs)?))
        })
        .collect()
}

fn to_csv<T: Serialize>(header: &str, rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = header.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn episodes_csv(rows: &[EpisodeRow]) -> Result<Vec<u8>> {
    to_csv(EPISODES_HEADER, rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    to_csv(SUMMARY_HEADER, rows)
}

pub fn read_episodes(bytes: &[u8]) -> Result<Vec<EpisodeRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
    let rows = r.deserialize().collect::<std::result::Result<Vec<EpisodeRow>, _>>()?;
    if rows.is_empty() {
        return Err(BenchError::Metrics("episode file has no rows".into()));
    }
    Ok(rows)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn write_summary(dir: &Path, summaries: &[SummaryRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_file(&dir.join(SUMMARY_FILE), &summary_csv(summaries)?)
}

/// Runs the suite and writes `episodes.csv` and `summary.csv` into `outdir`.
pub fn run_suite(
    config: &ScenarioConfig,
    outdir: &Path,
    options: SuiteOptions,
    progress: &(dyn Fn(&EpisodeRow) + Sync),
) -> Result<SuiteReport> {
    let episodes = run_episodes(config, options, progress)?;
    let summaries = summarize(&episodes)?;
    std::fs::create_dir_all(outdir)?;
    write_file(&outdir.join(EPISODES_FILE), &episodes_csv(&episodes)?)?;
    write_summary(outdir, &summaries)?;
    Ok(SuiteReport { episodes, summaries })
}
