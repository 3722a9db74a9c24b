//! Diagonal Gaussian sampling distribution over velocity sequences, elite
//! selection, and the exponentially weighted refit of mean and variance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::parallel::par_map_range;
use crate::trajectory::{JointTrajectory, VelocitySequence};

/// Default lower bound on the per-coordinate standard deviation (rad/s).
pub const DEFAULT_SIGMA_FLOOR: f64 = 0.02;

/// Mean and per-coordinate variance of the sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean: VelocitySequence,
    pub variance: JointTrajectory,
    pub sigma_floor: f64,
}

impl GaussianPolicy {
    pub fn new(mean: VelocitySequence, variance: JointTrajectory, sigma_floor: f64) -> Result<Self> {
        if !(sigma_floor > 0.0) || !sigma_floor.is_finite() {
            return Err(invalid("sigma_floor must be positive and finite"));
        }
        if mean.rows() != variance.rows() || mean.dof() != variance.dof() {
            return Err(Error::DimensionMismatch {
                expected: mean.rows() * mean.dof(),
                got: variance.rows() * variance.dof(),
            });
        }
        let mut p = Self {
            mean,
            variance,
            sigma_floor,
        };
        p.apply_floor();
        Ok(p)
    }

    /// Zero mean with a constant standard deviation `sigma`.
    pub fn isotropic(horizon: usize, dof: usize, sigma: f64, sigma_floor: f64) -> Result<Self> {
        Self::new(
            JointTrajectory::zeros(horizon, dof),
            JointTrajectory::filled(horizon, dof, sigma * sigma),
            sigma_floor,
        )
    }

    pub fn horizon(&self) -> usize {
        self.mean.rows()
    }

    pub fn dof(&self) -> usize {
        self.mean.dof()
    }

    fn apply_floor(&mut self) {
        let floor = self.sigma_floor * self.sigma_floor;
        for v in self.variance.as_mut_slice() {
            if !(*v >= floor) {
                *v = floor;
            }
        }
    }
}

/// Hyper-parameters of the sampling optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MppiConfig {
    /// Batch size.
    pub samples: usize,
    /// Elite-set size.
    pub elites: usize,
    /// Refinement iterations per planning call.
    pub iterations: usize,
    /// Learning rate in (0, 1].
    pub learning_rate: f64,
    /// Temperature of the exponential weights.
    pub temperature: f64,
    pub seed: u64,
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.elites == 0 || self.elites > self.samples {
            return Err(invalid("need 1 <= elites <= samples"));
        }
        if self.iterations == 0 {
            return Err(invalid("need at least one iteration"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(invalid("learning rate must lie in (0, 1]"));
        }
        if !(self.temperature > 0.0) {
            return Err(invalid("temperature must be positive"));
        }
        Ok(())
    }
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            samples: 1024,
            elites: 32,
            iterations: 3,
            learning_rate: 0.8,
            temperature: 1.0,
            seed: 0,
        }
    }
}

/// Mixes a key into a well-distributed 64-bit value (splitmix64 finalizer;
/// a bijection on `u64`).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_stream(seed: u64, iteration: u64, index: u64) -> ChaCha8Rng {
    let key = mix64(mix64(seed ^ mix64(iteration)) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    ChaCha8Rng::seed_from_u64(key)
}

/// Draws `n` sequences, coordinate-wise from `Normal(mean, variance)`.
///
/// Sample `j` is drawn from its own stream keyed by `(seed, iteration, j)`,
/// coordinates in row-major order, so the batch does not depend on how the
/// work is scheduled.
pub fn sample(policy: &GaussianPolicy, n: usize, seed: u64, iteration: u64) -> Vec<VelocitySequence> {
    let (h, d) = (policy.horizon(), policy.dof());
    let std: Vec<f64> = policy.variance.as_slice().iter().map(|v| v.sqrt()).collect();
    let mean = policy.mean.as_slice();
    par_map_range(n, |j| {
        let mut rng = sample_stream(seed, iteration, j as u64);
        let data = mean
            .iter()
            .zip(&std)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + s * z
            })
            .collect();
        JointTrajectory::from_flat(h, d, data).expect("finite samples")
    })
}

/// Indices of the `n_e` smallest costs in ascending cost order, ties broken by
/// lower index. NaN costs count as `+inf`.
pub fn select_elite(costs: &[f64], n_e: usize) -> Result<Vec<usize>> {
    if n_e == 0 || n_e > costs.len() {
        return Err(invalid(format!("elite count {n_e} must lie in 1..={}", costs.len())));
    }
    let key = |c: f64| if c.is_nan() { f64::INFINITY } else { c };
    if costs.iter().all(|c| key(*c) == f64::INFINITY) {
        return Err(Error::DegenerateBatch { count: costs.len() });
    }
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    let cmp = |a: &usize, b: &usize| key(costs[*a]).total_cmp(&key(costs[*b])).then(a.cmp(b));
    if n_e < idx.len() {
        idx.select_nth_unstable_by(n_e - 1, cmp);
        idx.truncate(n_e);
    }
    idx.sort_by(cmp);
    Ok(idx)
}

/// Exponentially weighted refit of the policy on the elite set.
///
/// Weights are `exp(-(c_j - min c) / beta)`; the shift by the elite minimum
/// leaves every weight ratio unchanged and keeps the best weight at 1. The
/// variance update is the diagonal of the weighted elite covariance around
/// the new mean, blended with the old variance and floored at
/// `sigma_floor^2`.
pub fn update(
    policy: &GaussianPolicy,
    elite_samples: &[&VelocitySequence],
    elite_costs: &[f64],
    eta: f64,
    beta: f64,
) -> Result<GaussianPolicy> {
    if elite_samples.is_empty() || elite_samples.len() != elite_costs.len() {
        return Err(invalid("elite set must be non-empty and match its costs"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("learning rate must lie in (0, 1]"));
    }
    if !(beta > 0.0) {
        return Err(invalid("temperature must be positive"));
    }
    let n = policy.mean.as_slice().len();
    for s in elite_samples {
        if s.rows() != policy.horizon() || s.dof() != policy.dof() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.as_slice().len(),
            });
        }
    }
    let c_min = elite_costs
        .iter()
        .copied()
        .filter(|c| !c.is_nan())
        .fold(f64::INFINITY, f64::min);
    if !c_min.is_finite() {
        return Err(Error::DegenerateBatch {
            count: elite_costs.len(),
        });
    }
    let weights: Vec<f64> = elite_costs
        .iter()
        .map(|c| if c.is_nan() { 0.0 } else { (-(c - c_min) / beta).exp() })
        .collect();
    let total: f64 = weights.iter().sum();

    let mut weighted_mean = vec![0.0; n];
    for (s, w) in elite_samples.iter().zip(&weights) {
        for (acc, x) in weighted_mean.iter_mut().zip(s.as_slice()) {
            *acc += w * x;
        }
    }
    let old_mean = policy.mean.as_slice();
    let new_mean: Vec<f64> = weighted_mean
        .iter()
        .zip(old_mean)
        .map(|(wm, m)| (1.0 - eta) * m + eta * (wm / total))
        .collect();

    let mut spread = vec![0.0; n];
    for (s, w) in elite_samples.iter().zip(&weights) {
        for ((acc, x), m) in spread.iter_mut().zip(s.as_slice()).zip(&new_mean) {
            *acc += w * (x - m) * (x - m);
        }
    }
    let new_var: Vec<f64> = spread
        .iter()
        .zip(policy.variance.as_slice())
        .map(|(sp, v)| (1.0 - eta) * v + eta * (sp / total))
        .collect();

    let (h, d) = (policy.horizon(), policy.dof());
    GaussianPolicy::new(
        JointTrajectory::from_flat(h, d, new_mean)?,
        JointTrajectory::from_flat(h, d, new_var)?,
        policy.sigma_floor,
    )
}
