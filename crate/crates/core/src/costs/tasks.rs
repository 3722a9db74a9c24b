//! Task definitions and the phase-gated total costs of the tray, ball and
//! hand-over tasks.
//!
//! Collision terms run over every state of a rollout, including the current
//! one, so the first predicted step is covered by the barrier. All other
//! terms run over the `H` predicted states.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::costs::phase::{Phase, PhaseState, PhaseThresholds};
use crate::costs::terms::{check_gamma, collision_cost_masked, orientation_sum, position_target_cost, Axes, NormMode};
use crate::error::{invalid, Error, Result};
use crate::trajectory::{DerivativeBounds, JointVector, Pose, Quat};
use crate::world::scene::gripper_pointing;
use crate::world::{CollisionMask, CollisionPair, ObjectKind, RolloutResult, SceneDescription, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Tray,
    Ball,
    Handover,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Tray => "tray",
            TaskKind::Ball => "ball",
            TaskKind::Handover => "handover",
        }
    }
}

/// Per-arm weights of the hand-over position and orientation terms, one
/// pair per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HandoverWeights {
    pub pick: [f64; 2],
    pub pass: [f64; 2],
    pub place: [f64; 2],
}

/// Term weights. Unused weights of a task are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub w_c: f64,
    pub w_theta: f64,
    pub w_z: f64,
    pub w_v: f64,
    pub w_p_pick: f64,
    pub w_r_pick: f64,
    pub w_l: f64,
    pub w_p_tray: f64,
    pub w_r_tray: f64,
    pub w_r_move: f64,
    pub w_yz: f64,
    pub w_r: f64,
    pub w_eef_obj: f64,
    pub w_obj_targ: f64,
    pub w_p: f64,
    pub handover: HandoverWeights,
}

impl CostWeights {
    fn all(&self) -> Vec<f64> {
        let h = &self.handover;
        let mut v = vec![
            self.w_c,
            self.w_theta,
            self.w_z,
            self.w_v,
            self.w_p_pick,
            self.w_r_pick,
            self.w_l,
            self.w_p_tray,
            self.w_r_tray,
            self.w_r_move,
            self.w_yz,
            self.w_r,
            self.w_eef_obj,
            self.w_obj_targ,
            self.w_p,
        ];
        v.extend(h.pick.iter().chain(&h.pass).chain(&h.place));
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.all().iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(invalid("cost weights must be finite and non-negative"))
        }
    }

    pub fn tray_default() -> Self {
        Self {
            w_c: 2.0,
            w_theta: 0.02,
            w_z: 1.0,
            w_v: 1.0,
            w_p_pick: 3.0,
            w_r_pick: 0.3,
            w_l: 200.0,
            w_p_tray: 1.0,
            w_r_tray: 0.3,
            w_r_move: 3.0,
            ..Self::default()
        }
    }

    pub fn ball_default() -> Self {
        Self {
            w_c: 2.0,
            w_theta: 0.02,
            w_v: 1.0,
            w_yz: 1.0,
            w_r: 0.3,
            w_l: 200.0,
            w_eef_obj: 3.0,
            w_obj_targ: 3.0,
            ..Self::default()
        }
    }

    pub fn handover_default() -> Self {
        Self {
            w_c: 2.0,
            w_theta: 0.02,
            w_yz: 1.0,
            w_p: 3.0,
            w_r: 0.3,
            handover: HandoverWeights {
                pick: [1.0, 0.0],
                pass: [1.0, 1.0],
                place: [0.0, 1.0],
            },
            ..Self::default()
        }
    }
}

/// Phase gates multiplying the phase-specific parts of a total cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub pick: f64,
    pub moving: f64,
    pub pass: f64,
    pub place: f64,
}

impl Gates {
    pub fn for_phase(phase: Phase) -> Self {
        let mut g = Gates::default();
        match phase {
            Phase::Pick => g.pick = 1.0,
            Phase::Move => g.moving = 1.0,
            Phase::Pass => g.pass = 1.0,
            Phase::Place => g.place = 1.0,
        }
        g
    }

    pub fn all_open() -> Self {
        Gates {
            pick: 1.0,
            moving: 1.0,
            pass: 1.0,
            place: 1.0,
        }
    }
}

/// Task-specific targets. Positions in meters, quaternions scalar-first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskTargets {
    Tray {
        /// End-effector grasp poses on the tray at rest.
        grasp: [Pose; 2],
        p_target: Vector3<f64>,
        q_target: Quat,
        q_move: [Quat; 2],
        l_tray: f64,
    },
    Ball {
        /// Ball position before pick-up.
        p_ball: Vector3<f64>,
        p_target: Vector3<f64>,
        q_star: [Quat; 2],
        l_ball: f64,
    },
    Handover {
        p_obj: Vector3<f64>,
        p_pass: [Vector3<f64>; 2],
        /// Place target of the receiving end-effector.
        p_target: Vector3<f64>,
        q_pick: [Quat; 2],
        q_pass: [Quat; 2],
        q_place: [Quat; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub targets: TaskTargets,
    pub gamma: f64,
    pub epsilon: f64,
    pub theta_home: JointVector,
    pub weights: CostWeights,
    pub bounds: DerivativeBounds,
    #[serde(default)]
    pub thresholds: PhaseThresholds,
}

pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 0.05;

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self.targets {
            TaskTargets::Tray { .. } => TaskKind::Tray,
            TaskTargets::Ball { .. } => TaskKind::Ball,
            TaskTargets::Handover { .. } => TaskKind::Handover,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon must be positive"));
        }
        self.weights.validate()?;
        self.bounds.validate()?;
        if self.bounds.dof() != self.theta_home.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_home.dof(),
                got: self.bounds.dof(),
            });
        }
        let th = &self.thresholds;
        if !(th.position > 0.0) || !(th.orientation > 0.0) {
            return Err(invalid("phase thresholds must be positive"));
        }
        let mut quats: Vec<Quat> = Vec::new();
        let mut vectors: Vec<Vector3<f64>> = Vec::new();
        match &self.targets {
            TaskTargets::Tray {
                grasp,
                p_target,
                q_target,
                q_move,
                l_tray,
            } => {
                if !(*l_tray > 0.0) {
                    return Err(invalid("l_tray must be positive"));
                }
                quats.extend([
                    grasp[0].orientation,
                    grasp[1].orientation,
                    *q_target,
                    q_move[0],
                    q_move[1],
                ]);
                vectors.extend([grasp[0].position, grasp[1].position, *p_target]);
            }
            TaskTargets::Ball {
                p_ball,
                p_target,
                q_star,
                l_ball,
            } => {
                if !(*l_ball > 0.0) {
                    return Err(invalid("l_ball must be positive"));
                }
                quats.extend(q_star);
                vectors.extend([*p_ball, *p_target]);
            }
            TaskTargets::Handover {
                p_obj,
                p_pass,
                p_target,
                q_pick,
                q_pass,
                q_place,
            } => {
                quats.extend(q_pick.iter().chain(q_pass).chain(q_place));
                vectors.extend([*p_obj, p_pass[0], p_pass[1], *p_target]);
            }
        }
        for q in &quats {
            q.check_unit()?;
        }
        if vectors.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("task target"));
        }
        Ok(())
    }

    /// Pairs left out of the move-phase collision term: the ball task drops
    /// the ball-manipulator pairs so the grippers can press on the ball.
    pub fn move_mask(&self) -> CollisionMask {
        match self.kind() {
            TaskKind::Ball => CollisionMask::ignoring(ObjectKind::Ball),
            _ => CollisionMask::none(),
        }
    }

    /// Collision mask in force during `phase`.
    pub fn phase_mask(&self, phase: Phase) -> CollisionMask {
        match phase {
            Phase::Move => self.move_mask(),
            _ => CollisionMask::none(),
        }
    }
}

/// End-effector and object trajectories over the predicted states of a
/// rollout.
#[derive(Debug, Clone, Default)]
pub struct RolloutView {
    pub p1: Vec<Vector3<f64>>,
    pub p2: Vec<Vector3<f64>>,
    pub q1: Vec<Quat>,
    pub q2: Vec<Quat>,
    pub v1: Vec<Vector3<f64>>,
    pub v2: Vec<Vector3<f64>>,
    pub tray: Vec<Pose>,
}

impl RolloutView {
    pub fn new(predicted: &[WorldState]) -> Self {
        let mut v = Self::default();
        for s in predicted {
            v.p1.push(s.ee[0].position);
            v.p2.push(s.ee[1].position);
            v.q1.push(s.ee[0].orientation);
            v.q2.push(s.ee[1].orientation);
            v.v1.push(s.ee_velocity[0]);
            v.v2.push(s.ee_velocity[1]);
            if let Some(t) = &s.tray {
                v.tray.push(t.pose);
            }
        }
        v
    }
}

fn joint_deviation(states: &[WorldState], home: &[f64]) -> f64 {
    states
        .iter()
        .map(|s| {
            s.joints
                .as_slice()
                .iter()
                .zip(home)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

fn axis_alignment(p1: &[Vector3<f64>], p2: &[Vector3<f64>], axes: Axes) -> f64 {
    crate::costs::terms::axis_alignment_cost(p1, p2, axes).expect("non-empty axes, equal lengths")
}

fn rel_velocity(v: &RolloutView) -> f64 {
    crate::costs::terms::relative_velocity_cost(&v.p1, &v.p2, &v.v1, &v.v2).expect("equal lengths")
}

fn ee_distance(v: &RolloutView, l: f64) -> f64 {
    v.p1.iter()
        .zip(&v.p2)
        .map(|(a, b)| {
            let e = (a - b).norm() - l;
            e * e
        })
        .sum()
}

fn midpoint_target(v: &RolloutView, target: &Vector3<f64>) -> f64 {
    v.p1.iter()
        .zip(&v.p2)
        .map(|(a, b)| ((a + b) * 0.5 - target).norm())
        .sum()
}

/// A task bound to a pair registry, ready to score rollouts.
#[derive(Debug, Clone)]
pub struct TaskCost {
    spec: TaskSpec,
    keep_move: Option<Vec<bool>>,
}

impl TaskCost {
    pub fn new(spec: TaskSpec, pairs: &[CollisionPair]) -> Result<Self> {
        spec.validate()?;
        let mask = spec.move_mask();
        let keep: Vec<bool> = pairs.iter().map(|p| mask.keeps(p)).collect();
        let keep_move = keep.iter().any(|k| !k).then_some(keep);
        Ok(Self { spec, keep_move })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    /// Total cost of `states` (rollout states `0..=H`) in `phase`.
    pub fn evaluate(&self, phase: Phase, states: &[WorldState]) -> Result<f64> {
        phase.check(self.spec.kind())?;
        Ok(self.evaluate_gated(&Gates::for_phase(phase), states))
    }

    /// Total cost with explicit gate values.
    pub fn evaluate_gated(&self, g: &Gates, states: &[WorldState]) -> f64 {
        let spec = &self.spec;
        let w = &spec.weights;
        let predicted = &states[1.min(states.len())..];
        let view = RolloutView::new(predicted);
        let rows: Vec<&[f64]> = states.iter().map(|s| s.distances.as_slice()).collect();
        let home = spec.theta_home.as_slice();
        let theta = joint_deviation(predicted, home);
        match &spec.targets {
            TaskTargets::Tray {
                grasp,
                p_target,
                q_target,
                q_move,
                l_tray,
            } => {
                let c_c = collision_cost_masked(&rows, spec.gamma, None);
                let mut total = w.w_c * c_c
                    + w.w_theta * theta
                    + w.w_z * axis_alignment(&view.p1, &view.p2, Axes::Z)
                    + w.w_v * rel_velocity(&view);
                if g.pick != 0.0 {
                    let p_pick = 0.5
                        * (position_target_cost(&view.p1, &grasp[0].position, NormMode::Full)
                            + position_target_cost(&view.p2, &grasp[1].position, NormMode::Full));
                    let r_pick = 0.5
                        * (orientation_sum(&view.q1, &grasp[0].orientation)
                            + orientation_sum(&view.q2, &grasp[1].orientation));
                    total += g.pick * (w.w_p_pick * p_pick + w.w_r_pick * r_pick);
                }
                if g.moving != 0.0 {
                    let tray_pos: Vec<Vector3<f64>> = view.tray.iter().map(|p| p.position).collect();
                    let tray_rot: Vec<Quat> = view.tray.iter().map(|p| p.orientation).collect();
                    let r_move = 0.5 * (orientation_sum(&view.q1, &q_move[0]) + orientation_sum(&view.q2, &q_move[1]));
                    total += g.moving
                        * (w.w_l * ee_distance(&view, *l_tray)
                            + w.w_p_tray * position_target_cost(&tray_pos, p_target, NormMode::Full)
                            + w.w_r_tray * orientation_sum(&tray_rot, q_target)
                            + w.w_r_move * r_move);
                }
                total
            }
            TaskTargets::Ball {
                p_ball,
                p_target,
                q_star,
                l_ball,
            } => {
                let eps = Vector3::new(0.0, 0.0, spec.epsilon);
                let r = 0.5 * (orientation_sum(&view.q1, &q_star[0]) + orientation_sum(&view.q2, &q_star[1]));
                let mut total = w.w_theta * theta
                    + w.w_yz * axis_alignment(&view.p1, &view.p2, Axes::YZ)
                    + w.w_v * rel_velocity(&view)
                    + w.w_r * r
                    + w.w_l * ee_distance(&view, *l_ball);
                if g.pick != 0.0 {
                    let c_pick = collision_cost_masked(&rows, spec.gamma, None);
                    total += g.pick * (w.w_c * c_pick + w.w_eef_obj * midpoint_target(&view, &(p_ball - eps)));
                }
                if g.moving != 0.0 {
                    let c_move = collision_cost_masked(&rows, spec.gamma, self.keep_move.as_deref());
                    total += g.moving * (w.w_c * c_move + w.w_obj_targ * midpoint_target(&view, &(p_target - eps)));
                }
                total
            }
            TaskTargets::Handover {
                p_obj,
                p_pass,
                p_target,
                q_pick,
                q_pass,
                q_place,
            } => {
                let c_c = collision_cost_masked(&rows, spec.gamma, None);
                let hw = &w.handover;
                let pick_point = p_obj + Vector3::new(0.0, 0.0, spec.epsilon);
                let arms = [(&view.p1, &view.q1), (&view.p2, &view.q2)];
                let (mut c_p, mut c_r) = (0.0, 0.0);
                for (i, (p, q)) in arms.iter().enumerate() {
                    let phases = [
                        (g.pick * hw.pick[i], &pick_point, NormMode::Full, &q_pick[i]),
                        (g.pass * hw.pass[i], &p_pass[i], NormMode::XOnly, &q_pass[i]),
                        (g.place * hw.place[i], p_target, NormMode::Full, &q_place[i]),
                    ];
                    for (weight, target, mode, q_target) in phases {
                        if weight != 0.0 {
                            c_p += weight * position_target_cost(p, target, mode);
                            c_r += weight * orientation_sum(q, q_target);
                        }
                    }
                }
                w.w_c * c_c
                    + w.w_theta * theta
                    + g.pass * w.w_yz * axis_alignment(&view.p1, &view.p2, Axes::YZ)
                    + w.w_p * c_p
                    + w.w_r * c_r
            }
        }
    }
}

/// Total cost of a rollout for `task` in `phase`, using the rollout's pair
/// registry for the phase's collision mask.
pub fn assemble_task_cost(task: &TaskSpec, phase: &PhaseState, rollout: &RolloutResult) -> Result<f64> {
    if rollout.states.iter().any(|s| s.distances.len() != rollout.pairs.len()) {
        return Err(invalid("rollout distances do not match its pair registry"));
    }
    TaskCost::new(task.clone(), &rollout.pairs)?.evaluate(phase.phase, &rollout.states)
}

/// Default derivative bounds of the planar scenes: joint range `[-pi, pi]`,
/// 1 rad/s, 4 rad/s^2, 40 rad/s^3.
pub fn planar_bounds(dof: usize) -> DerivativeBounds {
    DerivativeBounds::uniform(dof, (-std::f64::consts::PI, std::f64::consts::PI), 1.0, 4.0, 40.0)
        .expect("valid constant bounds")
}

impl TaskSpec {
    /// Tray task for `scene`: grasp the tray at rest and carry it to
    /// `(p_target, q_target)`.
    pub fn tray(
        scene: &SceneDescription,
        p_target: Vector3<f64>,
        q_target: Quat,
        bounds: DerivativeBounds,
    ) -> Result<Self> {
        let tray = scene.tray.as_ref().ok_or_else(|| invalid("scene has no tray"))?;
        let grasp = tray.grasp_world(&tray.pose);
        let to_target = q_target.mul(&conjugate(&tray.pose.orientation));
        let q_move = [
            to_target.mul(&grasp[0].orientation),
            to_target.mul(&grasp[1].orientation),
        ];
        let spec = Self {
            targets: TaskTargets::Tray {
                grasp,
                p_target,
                q_target,
                q_move,
                l_tray: tray.length,
            },
            gamma: DEFAULT_GAMMA,
            epsilon: DEFAULT_EPSILON,
            theta_home: scene.home.clone(),
            weights: CostWeights::tray_default(),
            bounds,
            thresholds: PhaseThresholds::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Ball task for `scene`: press both grippers horizontally against the
    /// ball and carry it to `p_target`.
    pub fn ball(scene: &SceneDescription, p_target: Vector3<f64>, bounds: DerivativeBounds) -> Result<Self> {
        let ball = scene.ball.as_ref().ok_or_else(|| invalid("scene has no ball"))?;
        let spec = Self {
            targets: TaskTargets::Ball {
                p_ball: ball.center,
                p_target,
                q_star: [gripper_pointing(0, Vector3::x()), gripper_pointing(1, -Vector3::x())],
                l_ball: ball.contact_span,
            },
            gamma: DEFAULT_GAMMA,
            epsilon: ball.contact_drop,
            theta_home: scene.home.clone(),
            weights: CostWeights::ball_default(),
            bounds,
            thresholds: PhaseThresholds::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Hand-over task for `scene`: the first gripper picks the cube from
    /// above, both meet at `x_pass`, and the second gripper takes the cube to
    /// `p_target`.
    pub fn handover(
        scene: &SceneDescription,
        x_pass: f64,
        p_target: Vector3<f64>,
        bounds: DerivativeBounds,
    ) -> Result<Self> {
        let cube = scene.cube.as_ref().ok_or_else(|| invalid("scene has no cube"))?;
        let gap = cube.handles[1].x - cube.handles[0].x;
        let down = [gripper_pointing(0, -Vector3::z()), gripper_pointing(1, -Vector3::z())];
        let spec = Self {
            targets: TaskTargets::Handover {
                p_obj: cube.center,
                p_pass: [Vector3::new(x_pass, 0.0, 0.0), Vector3::new(x_pass + gap, 0.0, 0.0)],
                p_target,
                q_pick: down,
                q_pass: down,
                q_place: down,
            },
            gamma: DEFAULT_GAMMA,
            epsilon: cube.handles[0].z,
            theta_home: scene.home.clone(),
            weights: CostWeights::handover_default(),
            bounds,
            thresholds: PhaseThresholds::default(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn conjugate(q: &Quat) -> Quat {
    Quat::new(q.w, -q.x, -q.y, -q.z)
}
