//! Scenario configuration: a versioned JSON document naming the scene, the
//! task, the planner settings, the goal randomization and the sweep.

use std::f64::consts::PI;
use std::path::Path;

use bimanual_mppi::costs::{CostWeights, PhaseThresholds, TaskKind, TaskSpec};
use bimanual_mppi::planner::{PlannerConfig, Timing};
use bimanual_mppi::sampler::mix64;
use bimanual_mppi::trajectory::{DerivativeBounds, Quat};
use bimanual_mppi::world::SceneDescription;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn default_timeout() -> f64 {
    120.0
}

fn default_gamma() -> f64 {
    bimanual_mppi::costs::DEFAULT_GAMMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub scene: SceneRef,
    pub task: TaskConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub goals: GoalRanges,
    pub n_runs: usize,
    pub batch_sizes: Vec<usize>,
    pub master_seed: u64,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default)]
    pub timing: Timing,
}

/// A built-in scene by name, or a full inline description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneRef {
    Builtin { builtin: String },
    Inline(Box<SceneDescription>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Replaces the built-in weights of the task when present.
    #[serde(default)]
    pub weights: Option<CostWeights>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Replaces the task's vertical offset when present.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub thresholds: PhaseThresholds,
    pub bounds: BoundsConfig,
}

/// Bounds shared by every joint: a position interval and symmetric limits
/// on velocity, acceleration and jerk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub position: [f64; 2],
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
}

impl BoundsConfig {
    pub fn build(&self, dof: usize) -> Result<DerivativeBounds> {
        Ok(DerivativeBounds::uniform(
            dof,
            (self.position[0], self.position[1]),
            self.velocity,
            self.acceleration,
            self.jerk,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Rotations about `axis` by an angle drawn from `[-half_angle, half_angle]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientationCone {
    pub axis: [f64; 3],
    pub half_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalRanges {
    /// Object target (tray, ball) or receiving end-effector target (hand-over).
    pub position: PositionBox,
    /// Tray target orientation; identity when absent.
    #[serde(default)]
    pub orientation: Option<OrientationCone>,
    /// Hand-over meeting point along `x` of the first gripper.
    #[serde(default)]
    pub pass_x: Option<[f64; 2]>,
}

/// One sampled goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Goal {
    pub position: Vector3<f64>,
    pub orientation: Quat,
    pub pass_x: f64,
}

/// Seed of the episode at `(batch_size, run)`. For a fixed master seed the
/// map is injective over batch sizes and run indices below `2^32`.
pub fn child_seed(master: u64, batch_size: usize, run: usize) -> u64 {
    let key = ((batch_size as u64) << 32) | (run as u64 & 0xFFFF_FFFF);
    mix64(master.wrapping_add(mix64(key)))
}

/// Seed of the goal of run `run`; shared by every batch size so a sweep
/// compares batch sizes on identical goals.
pub fn goal_seed(master: u64, run: usize) -> u64 {
    mix64(mix64(master) ^ (run as u64).wrapping_mul(0xA076_1D64_78BD_642F))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn scene(&self) -> Result<SceneDescription> {
        let scene = match &self.scene {
            SceneRef::Builtin { builtin } => SceneDescription::builtin(builtin)?,
            SceneRef::Inline(s) => (**s).clone(),
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Checks everything that can be checked without running an episode,
    /// including building the task for the center of the goal ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(BenchError::Config(msg.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return Err(BenchError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1");
        }
        if self.batch_sizes.is_empty() {
            return bad("batch_sizes must not be empty");
        }
        if self.batch_sizes.iter().any(|&n| n < self.planner.mppi.elites) {
            return bad("every batch size must be at least the elite count");
        }
        if !(self.timeout_s > 0.0) {
            return bad("timeout_s must be positive");
        }
        self.planner.validate()?;
        let g = &self.goals;
        if (0..3).any(|i| !(g.position.min[i] <= g.position.max[i])) {
            return bad("goal position box is empty");
        }
        if let Some(c) = &g.orientation {
            if !(c.half_angle >= 0.0 && c.half_angle <= PI) || Vector3::from(c.axis).norm() < 1e-12 {
                return bad("orientation cone needs a non-zero axis and half_angle in [0, pi]");
            }
        }
        match (self.task.kind, g.pass_x) {
            (TaskKind::Handover, None) => return bad("hand-over goals need pass_x"),
            (_, Some(r)) if !(r[0] <= r[1]) => return bad("pass_x range is empty"),
            _ => {}
        }
        let scene = self.scene()?;
        let center = Goal {
            position: (Vector3::from(g.position.min) + Vector3::from(g.position.max)) * 0.5,
            orientation: Quat::IDENTITY,
            pass_x: g.pass_x.map_or(0.0, |r| 0.5 * (r[0] + r[1])),
        };
        self.task_for(&scene, &center)?;
        Ok(())
    }

    pub fn sample_goal(&self, seed: u64) -> Goal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = &self.goals;
        let mut uniform = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let position = Vector3::new(
            uniform(g.position.min[0], g.position.max[0]),
            uniform(g.position.min[1], g.position.max[1]),
            uniform(g.position.min[2], g.position.max[2]),
        );
        let orientation = match &g.orientation {
            Some(c) => Quat::from_axis_angle(Vector3::from(c.axis), uniform(-c.half_angle, c.half_angle)),
            None => Quat::IDENTITY,
        };
        let pass_x = g.pass_x.map_or(0.0, |r| uniform(r[0], r[1]));
        Goal {
            position,
            orientation,
            pass_x,
        }
    }

    pub fn task_for(&self, scene: &SceneDescription, goal: &Goal) -> Result<TaskSpec> {
        let bounds = self.task.bounds.build(scene.dof())?;
        let mut spec = match self.task.kind {
            TaskKind::Tray => TaskSpec::tray(scene, goal.position, goal.orientation, bounds)?,
            TaskKind::Ball => TaskSpec::ball(scene, goal.position, bounds)?,
            TaskKind::Handover => TaskSpec::handover(scene, goal.pass_x, goal.position, bounds)?,
        };
        if let Some(w) = self.task.weights {
            spec.weights = w;
        }
        if let Some(eps) = self.task.epsilon {
            spec.epsilon = eps;
        }
        spec.gamma = self.task.gamma;
        spec.thresholds = self.task.thresholds;
        spec.validate()?;
        Ok(spec)
    }
}
