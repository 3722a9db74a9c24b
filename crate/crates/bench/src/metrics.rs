//! Success rate and mean / population standard deviation of task and
//! computation time.
//!
//! Computation-time statistics pool every planning step of every run. Task
//! time statistics cover every run, failed runs included.

use bimanual_mppi::planner::EpisodeRecord;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n_total: usize,
    pub n_success: usize,
    /// Percent in `[0, 100]`.
    pub success_rate: f64,
    pub t_task_mean: f64,
    pub t_task_std: f64,
    /// Number of pooled planning steps.
    pub n_steps: usize,
    pub t_comp_mean: f64,
    pub t_comp_std: f64,
}

/// Per-run moments of an episode, the content of one episode CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMoments {
    pub success: bool,
    pub t_task: f64,
    pub n_steps: usize,
    pub t_comp_mean: f64,
    pub t_comp_std: f64,
}

impl RunMoments {
    pub fn from_record(record: &EpisodeRecord) -> Self {
        let (mean, std) = mean_std(&record.t_comp);
        Self {
            success: record.success,
            t_task: record.t_task,
            n_steps: record.n_steps(),
            t_comp_mean: mean,
            t_comp_std: std,
        }
    }
}

/// Mean and population standard deviation; `(0, 0)` for an empty slice.
/// Values are summed in sorted order so the result does not depend on the
/// order of the input.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn success_rate(n_success: usize, n_total: usize) -> f64 {
    n_success as f64 / n_total as f64 * 100.0
}

/// Metrics of a batch of episode records.
pub fn compute_metrics(records: &[EpisodeRecord]) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(BenchError::Metrics("no episode records".into()));
    }
    let n_success = records.iter().filter(|r| r.success).count();
    let t_task: Vec<f64> = records.iter().map(|r| r.t_task).collect();
    let t_comp: Vec<f64> = records.iter().flat_map(|r| r.t_comp.iter().copied()).collect();
    let (t_task_mean, t_task_std) = mean_std(&t_task);
    let (t_comp_mean, t_comp_std) = mean_std(&t_comp);
    Ok(MetricsSummary {
        n_total: records.len(),
        n_success,
        success_rate: success_rate(n_success, records.len()),
        t_task_mean,
        t_task_std,
        n_steps: t_comp.len(),
        t_comp_mean,
        t_comp_std,
    })
}

/// Metrics from per-run moments alone. The pooled computation-time
/// statistics combine the per-run means and deviations weighted by step
/// count, which equals pooling the raw steps up to rounding.
pub fn summarize_runs(runs: &[RunMoments]) -> Result<MetricsSummary> {
    if runs.is_empty() {
        return Err(BenchError::Metrics("no episode rows".into()));
    }
    let mut runs = runs.to_vec();
    runs.sort_by(|a, b| {
        (a.t_comp_mean, a.t_comp_std, a.n_steps, a.t_task)
            .partial_cmp(&(b.t_comp_mean, b.t_comp_std, b.n_steps, b.t_task))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n_success = runs.iter().filter(|r| r.success).count();
    let t_task: Vec<f64> = runs.iter().map(|r| r.t_task).collect();
    let (t_task_mean, t_task_std) = mean_std(&t_task);
    let n_steps: usize = runs.iter().map(|r| r.n_steps).sum();
    let (t_comp_mean, t_comp_std) = if n_steps == 0 {
        (0.0, 0.0)
    } else {
        let n = n_steps as f64;
        let mean = runs.iter().map(|r| r.n_steps as f64 * r.t_comp_mean).sum::<f64>() / n;
        let var = runs
            .iter()
            .map(|r| {
                let d = r.t_comp_mean - mean;
                r.n_steps as f64 * (r.t_comp_std * r.t_comp_std + d * d)
            })
            .sum::<f64>()
            / n;
        (mean, var.max(0.0).sqrt())
    };
    Ok(MetricsSummary {
        n_total: runs.len(),
        n_success,
        success_rate: success_rate(n_success, runs.len()),
        t_task_mean,
        t_task_std,
        n_steps,
        t_comp_mean,
        t_comp_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_moments_match_raw_pooling() {
        let a = [0.1, 0.3, 0.2];
        let b = [0.5, 0.4];
        let all = [0.1, 0.3, 0.2, 0.5, 0.4];
        let run = |v: &[f64]| {
            let (m, s) = mean_std(v);
            RunMoments {
                success: true,
                t_task: 1.0,
                n_steps: v.len(),
                t_comp_mean: m,
                t_comp_std: s,
            }
        };
        let s = summarize_runs(&[run(&a), run(&b)]).unwrap();
        let (m, sd) = mean_std(&all);
        assert!((s.t_comp_mean - m).abs() < 1e-15);
        assert!((s.t_comp_std - sd).abs() < 1e-15);
    }
}
