//! WebAssembly bindings behind `www/index.html`: a QP projection explorer for
//! one joint, an episode stepper on the planar scenes, and the barrier cost
//! over a pair of consecutive distances.
//!
//! Each operation is a plain Rust function returning a serializable view;
//! the `#[wasm_bindgen]` wrappers only convert to and from JSON strings.

use std::f64::consts::PI;

use bimanual_mppi::costs::{collision_cost, planar_bounds, TaskSpec, TaskTargets};
use bimanual_mppi::planner::{CycleOutcome, EpisodeRunner, PlannerConfig, Timing};
use bimanual_mppi::qp::{BandedConstraintOperator, SolverConfig};
use bimanual_mppi::sampler::MppiConfig;
use bimanual_mppi::trajectory::{finite_difference, DerivativeBounds, JointVector, Quat, VelocitySequence};
use bimanual_mppi::world::{Obstacle, SceneDescription, WorldState};
use nalgebra::Vector3;
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const EPISODE_TIMEOUT: f64 = 30.0;

type Point = [f64; 2];

fn xz(p: &Vector3<f64>) -> Point {
    [p.x, p.z]
}

/// A raw single-joint velocity sequence next to its projection.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionView {
    pub raw: Vec<f64>,
    pub projected: Vec<f64>,
    pub raw_acceleration: Vec<f64>,
    pub acceleration: Vec<f64>,
    pub raw_jerk: Vec<f64>,
    pub jerk: Vec<f64>,
    /// Constraint rows with a non-zero multiplier.
    pub active: usize,
    pub correction: f64,
}

/// Projects `raw` (one joint, starting at rest at angle zero) onto the set
/// bounded by `v_max`, `a_max` and `j_max`.
pub fn projection_view(raw: &[f64], dt: f64, v_max: f64, a_max: f64, j_max: f64) -> Result<ProjectionView, String> {
    let h = raw.len();
    let seq = VelocitySequence::from_flat(h, 1, raw.to_vec()).map_err(|e| e.to_string())?;
    let bounds = DerivativeBounds::uniform(1, (-4.0 * PI, 4.0 * PI), v_max, a_max, j_max).map_err(|e| e.to_string())?;
    let op = BandedConstraintOperator::new(h, 1, &JointVector::zeros(1), &bounds, dt).map_err(|e| e.to_string())?;
    let p = op.project(&seq, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let diff = |s: &VelocitySequence, order| {
        finite_difference(s, order, dt)
            .map(|d| d.column(0))
            .map_err(|e| e.to_string())
    };
    Ok(ProjectionView {
        raw: raw.to_vec(),
        projected: p.sequence.column(0),
        raw_acceleration: diff(&seq, 1)?,
        acceleration: diff(&p.sequence, 1)?,
        raw_jerk: diff(&seq, 2)?,
        jerk: diff(&p.sequence, 2)?,
        active: p.multipliers.iter().filter(|m| **m != 0.0).count(),
        correction: p.sequence.distance(&seq),
    })
}

/// Barrier plus penetration cost of the two-step distance sequence
/// `(d_k, d_k+1)` on an `n x n` grid over `[lo, hi]^2`, row-major with `d_k`
/// along rows.
pub fn barrier_grid(gamma: f64, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>, String> {
    if n < 2 || !(hi > lo) {
        return Err("need n >= 2 and hi > lo".into());
    }
    let at = |i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(collision_cost(&[[at(i)], [at(j)]], gamma).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum ShapeView {
    Circle { center: Point, radius: f64 },
    Rect { center: Point, half: Point },
    Segment { a: Point, b: Point, radius: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectView {
    pub shape: ShapeView,
    pub held: bool,
}

/// Everything the page draws for one instant of an episode, projected onto
/// the `xz` plane of the planar scenes.
#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub task: &'static str,
    pub time: f64,
    pub phase: &'static str,
    pub finished: bool,
    pub success: bool,
    pub failure: &'static str,
    pub cycles: usize,
    pub last_cost: Option<f64>,
    /// Joint positions of each arm from base to gripper tip.
    pub arms: [Vec<Point>; 2],
    pub link_radii: [Vec<f64>; 2],
    pub objects: Vec<ObjectView>,
    pub obstacles: Vec<ShapeView>,
    pub target: Point,
    /// Gripper paths predicted by the latest plan.
    pub plan: [Vec<Point>; 2],
}

/// The planar scene and a task with fixed goals for `kind`.
pub fn demo_task(kind: &str) -> Result<(SceneDescription, TaskSpec), String> {
    let bounds = planar_bounds(6);
    let built = match kind {
        "tray" => {
            let s = SceneDescription::planar_tray();
            let q = Quat::from_axis_angle(Vector3::y(), 0.1);
            TaskSpec::tray(&s, Vector3::new(0.0, 0.0, 0.48), q, bounds).map(|t| (s, t))
        }
        "ball" => {
            let s = SceneDescription::planar_ball();
            TaskSpec::ball(&s, Vector3::new(0.17, 0.0, 0.34), bounds).map(|t| (s, t))
        }
        "handover" => {
            let s = SceneDescription::planar_handover();
            TaskSpec::handover(&s, -0.03, Vector3::new(0.25, 0.0, 0.35), bounds).map(|t| (s, t))
        }
        other => return Err(format!("unknown task {other:?}")),
    };
    built.map_err(|e| e.to_string())
}

pub fn demo_config(samples: usize) -> PlannerConfig {
    PlannerConfig {
        mppi: MppiConfig {
            samples,
            elites: samples.min(32),
            iterations: 2,
            learning_rate: 0.8,
            temperature: 1.0,
            ..MppiConfig::default()
        },
        horizon: 12,
        ..PlannerConfig::default()
    }
}

/// An episode advanced one planning cycle at a time.
pub struct EpisodeView {
    runner: EpisodeRunner,
    scene: SceneDescription,
    task: TaskSpec,
}

impl EpisodeView {
    pub fn new(kind: &str, samples: usize, seed: u64) -> Result<Self, String> {
        let (scene, task) = demo_task(kind)?;
        let runner = EpisodeRunner::new(
            &scene,
            &task,
            &demo_config(samples),
            EPISODE_TIMEOUT,
            seed,
            Timing::Wall,
        )
        .map_err(|e| e.to_string())?;
        Ok(Self { runner, scene, task })
    }

    pub fn step(&mut self) -> Result<Frame, String> {
        self.runner.cycle().map_err(|e| e.to_string())?;
        Ok(self.frame())
    }

    /// Runs cycles until the episode ends or `max_cycles` have run.
    pub fn run(&mut self, max_cycles: usize) -> Result<Frame, String> {
        for _ in 0..max_cycles {
            if self.runner.cycle().map_err(|e| e.to_string())? == CycleOutcome::Finished {
                break;
            }
        }
        Ok(self.frame())
    }

    pub fn is_finished(&self) -> bool {
        self.runner.is_finished()
    }

    pub fn frame(&self) -> Frame {
        let state = self.runner.state();
        let record = self.runner.record();
        let target = match &self.task.targets {
            TaskTargets::Tray { p_target, .. } => p_target,
            TaskTargets::Ball { p_target, .. } => p_target,
            TaskTargets::Handover { p_target, .. } => p_target,
        };
        let plan = match self.runner.last_plan() {
            Some(seq) => match self.runner.world().try_rollout(state, seq) {
                Ok(r) => [0, 1].map(|i| r.states.iter().map(|s| xz(&s.ee[i].position)).collect()),
                Err(_) => [Vec::new(), Vec::new()],
            },
            None => [Vec::new(), Vec::new()],
        };
        Frame {
            task: self.task.kind().name(),
            time: self.runner.time(),
            phase: self.runner.phase().phase.name(),
            finished: self.runner.is_finished(),
            success: record.success,
            failure: record.failure_reason.as_str(),
            cycles: record.n_steps(),
            last_cost: record.cost_trace.last().copied(),
            arms: self.arm_points(state),
            link_radii: [0, 1].map(|i| self.scene.arms[i].joints.iter().map(|j| j.radius).collect()),
            objects: self.objects(state),
            obstacles: self.scene.obstacles.iter().map(obstacle_view).collect(),
            target: xz(target),
            plan,
        }
    }

    fn arm_points(&self, state: &WorldState) -> [Vec<Point>; 2] {
        let q = state.joints.as_slice();
        let split = self.scene.arms[0].dof();
        let parts = [&q[..split], &q[split..]];
        [0, 1].map(|i| self.scene.arms[i].forward(parts[i]).points.iter().map(xz).collect())
    }

    fn objects(&self, state: &WorldState) -> Vec<ObjectView> {
        let mut out = Vec::new();
        if let (Some(spec), Some(tray)) = (&self.scene.tray, &state.tray) {
            let (a, b, radius) = spec.capsule_local();
            let iso = tray.pose.to_isometry();
            out.push(ObjectView {
                shape: ShapeView::Segment {
                    a: xz(&iso.transform_point(&a.into()).coords),
                    b: xz(&iso.transform_point(&b.into()).coords),
                    radius,
                },
                held: tray.grasped,
            });
        }
        if let (Some(spec), Some(ball)) = (&self.scene.ball, &state.ball) {
            out.push(ObjectView {
                shape: ShapeView::Circle {
                    center: xz(&ball.center),
                    radius: spec.radius,
                },
                held: ball.held,
            });
        }
        if let (Some(spec), Some(cube)) = (&self.scene.cube, &state.cube) {
            out.push(ObjectView {
                shape: ShapeView::Rect {
                    center: xz(&cube.center),
                    half: [spec.half_extent; 2],
                },
                held: cube.held_by.is_some(),
            });
        }
        out
    }
}

fn obstacle_view(o: &Obstacle) -> ShapeView {
    match o {
        Obstacle::Sphere { center, radius } => ShapeView::Circle {
            center: xz(center),
            radius: *radius,
        },
        Obstacle::Box { center, half_extents } => ShapeView::Rect {
            center: xz(center),
            half: [half_extents.x, half_extents.z],
        },
    }
}

fn js_err(e: String) -> JsValue {
    JsValue::from_str(&e)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("views serialize")
}

/// JSON [`ProjectionView`] of a single-joint raw sequence.
#[wasm_bindgen(js_name = projectSequence)]
pub fn project_sequence(raw: Vec<f64>, dt: f64, v_max: f64, a_max: f64, j_max: f64) -> Result<String, JsValue> {
    projection_view(&raw, dt, v_max, a_max, j_max)
        .map(|v| to_json(&v))
        .map_err(js_err)
}

/// Row-major barrier cost grid, see [`barrier_grid`].
#[wasm_bindgen(js_name = barrierGrid)]
pub fn barrier_grid_js(gamma: f64, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>, JsValue> {
    barrier_grid(gamma, n, lo, hi).map_err(js_err)
}

#[wasm_bindgen]
pub struct Episode(EpisodeView);

#[wasm_bindgen]
impl Episode {
    #[wasm_bindgen(constructor)]
    pub fn new(task: &str, samples: usize, seed: u64) -> Result<Episode, JsValue> {
        EpisodeView::new(task, samples, seed).map(Episode).map_err(js_err)
    }

    /// Plans and executes one cycle; returns the JSON [`Frame`] after it.
    pub fn step(&mut self) -> Result<String, JsValue> {
        self.0.step().map(|f| to_json(&f)).map_err(js_err)
    }

    pub fn frame(&self) -> String {
        to_json(&self.0.frame())
    }

    #[wasm_bindgen(js_name = isFinished)]
    pub fn is_finished(&self) -> bool {
        self.0.is_finished()
    }
}
