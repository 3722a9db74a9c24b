//! Deterministic kinematic surrogate of the dual-arm scene.
//!
//! Joints are integrated by explicit Euler. Objects are small state machines:
//! free objects stay put, held objects follow the grippers, and the attach
//! rules latch and release the holds from pose tolerances.

use nalgebra::{Isometry3, Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trajectory::{geodesic_unchecked, JointVector, Pose, VelocitySequence};
use crate::world::geometry::{box_box, capsule_box, capsule_capsule, Aabb, Capsule};
use crate::world::scene::{ArmKinematics, Body, CollisionMask, CollisionPair, ObjectKind, Obstacle, SceneDescription};
use crate::world::WorldModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrayState {
    pub pose: Pose,
    pub grasped: bool,
    /// Tray pose in the end-effector midpoint frame, fixed while grasped.
    pub attachment: Option<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    pub center: Vector3<f64>,
    pub held: bool,
    /// Set when a hold is released; the ball then stays where it was let go.
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeState {
    pub center: Vector3<f64>,
    /// Index of the arm holding the cube.
    pub held_by: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub joints: JointVector,
    pub ee: [Pose; 2],
    /// Backward-difference end-effector velocities (m/s).
    pub ee_velocity: [Vector3<f64>; 2],
    pub tray: Option<TrayState>,
    pub ball: Option<BallState>,
    pub cube: Option<CubeState>,
    /// One signed distance per unmasked collision pair, in registry order.
    pub distances: Vec<f64>,
}

impl WorldState {
    pub fn ee_midpoint(&self) -> Vector3<f64> {
        (self.ee[0].position + self.ee[1].position) * 0.5
    }

    pub fn min_distance(&self) -> f64 {
        self.distances.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// States `0..=H` of one rollout; the first is the input state.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub states: Vec<WorldState>,
    /// Pair registry behind each state's distance vector.
    pub pairs: Vec<CollisionPair>,
}

impl RolloutResult {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }
}

/// Both end-effector poses for a joint vector.
pub fn forward_kinematics(scene: &SceneDescription, joints: &JointVector) -> Result<(Pose, Pose)> {
    check_dof(scene, joints)?;
    let [k1, k2] = arm_kinematics(scene, joints);
    Ok((
        Pose::from_isometry(&k1.end_effector),
        Pose::from_isometry(&k2.end_effector),
    ))
}

fn check_dof(scene: &SceneDescription, joints: &JointVector) -> Result<()> {
    if joints.dof() != scene.dof() {
        return Err(Error::DimensionMismatch {
            expected: scene.dof(),
            got: joints.dof(),
        });
    }
    Ok(())
}

fn arm_kinematics(scene: &SceneDescription, joints: &JointVector) -> [ArmKinematics; 2] {
    let split = scene.arms[0].dof();
    let q = joints.as_slice();
    [scene.arms[0].forward(&q[..split]), scene.arms[1].forward(&q[split..])]
}

/// Frame at the end-effector midpoint with `x` along `p2 - p1` and `y` as
/// close to the world `y` axis as possible.
pub fn midpoint_frame(p1: &Vector3<f64>, p2: &Vector3<f64>) -> Isometry3<f64> {
    let origin = (p1 + p2) * 0.5;
    let mut x = p2 - p1;
    if x.norm() < 1e-12 {
        x = Vector3::x();
    }
    x.normalize_mut();
    let mut y = Vector3::y() - x * x.y;
    if y.norm() < 1e-9 {
        y = Vector3::z() - x * x.z;
    }
    y.normalize_mut();
    let z = x.cross(&y);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Isometry3::from_parts(origin.into(), UnitQuaternion::from_rotation_matrix(&rot))
}

/// Pose errors (position, orientation) of each end-effector from its tray
/// grasp pose.
pub fn tray_grasp_errors(scene: &SceneDescription, ee: &[Pose; 2], tray: &Pose) -> Option<[(f64, f64); 2]> {
    let spec = scene.tray.as_ref()?;
    let g = spec.grasp_world(tray);
    Some([0, 1].map(|i| {
        (
            (ee[i].position - g[i].position).norm(),
            geodesic_unchecked(&ee[i].orientation, &g[i].orientation),
        )
    }))
}

/// Separation error and midpoint error of the ball contact.
pub fn ball_contact_errors(scene: &SceneDescription, ee: &[Pose; 2], center: &Vector3<f64>) -> Option<(f64, f64)> {
    let spec = scene.ball.as_ref()?;
    let sep = (ee[0].position - ee[1].position).norm();
    let mid = (ee[0].position + ee[1].position) * 0.5;
    let target = center - Vector3::new(0.0, 0.0, spec.contact_drop);
    Some(((sep - spec.contact_span).abs(), (mid - target).norm()))
}

/// Re-evaluates the grasp flags of every object against the current
/// end-effector poses. Holds latch on entering the attach tolerance and
/// release beyond `release_factor` times it. The cube passes from the first
/// gripper to the second as soon as the second reaches its handle, never
/// back.
pub fn attach_rules(scene: &SceneDescription, state: &mut WorldState) {
    let tol = scene.tolerances;
    let release = tol.release_factor;
    if let Some(tray) = state.tray.as_mut() {
        let errors = tray_grasp_errors(scene, &state.ee, &tray.pose).expect("tray state implies tray spec");
        let within = |f: f64| {
            errors
                .iter()
                .all(|(p, r)| *p <= f * tol.tray_position && *r <= f * tol.tray_orientation)
        };
        if tray.grasped {
            if !within(release) {
                tray.grasped = false;
                tray.attachment = None;
            }
        } else if within(1.0) {
            tray.grasped = true;
            let frame = midpoint_frame(&state.ee[0].position, &state.ee[1].position);
            tray.attachment = Some(Pose::from_isometry(&(frame.inverse() * tray.pose.to_isometry())));
        }
    }
    if let Some(ball) = state.ball.as_mut() {
        let (sep, mid) = ball_contact_errors(scene, &state.ee, &ball.center).expect("ball state implies ball spec");
        let within = |f: f64| sep <= f * tol.ball_separation && mid <= f * tol.ball_midpoint;
        if ball.held {
            if !within(release) {
                ball.held = false;
                ball.dropped = true;
            }
        } else if !ball.dropped && within(1.0) {
            ball.held = true;
        }
    }
    if let Some(cube) = state.cube.as_mut() {
        let spec = scene.cube.as_ref().expect("cube state implies cube spec");
        let err = |i: usize| (state.ee[i].position - (cube.center + spec.handles[i])).norm();
        match cube.held_by {
            None => cube.held_by = (0..2).find(|&i| err(i) <= tol.cube_position),
            Some(0) if err(1) <= tol.cube_position => cube.held_by = Some(1),
            Some(i) => {
                if err(i) > release * tol.cube_position {
                    cube.held_by = None;
                }
            }
        }
    }
}

/// Moves held objects with the grippers.
fn carry_objects(scene: &SceneDescription, state: &mut WorldState) {
    if let Some(tray) = state.tray.as_mut() {
        if let (true, Some(att)) = (tray.grasped, tray.attachment) {
            let frame = midpoint_frame(&state.ee[0].position, &state.ee[1].position);
            tray.pose = Pose::from_isometry(&(frame * att.to_isometry()));
        }
    }
    let midpoint = state.ee_midpoint();
    if let Some(ball) = state.ball.as_mut() {
        if ball.held {
            let drop = scene.ball.as_ref().expect("ball spec").contact_drop;
            ball.center = midpoint + Vector3::new(0.0, 0.0, drop);
        }
    }
    if let Some(cube) = state.cube.as_mut() {
        if let Some(i) = cube.held_by {
            let handle = scene.cube.as_ref().expect("cube spec").handles[i];
            cube.center = state.ee[i].position - handle;
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Capsule(Capsule),
    Box(Aabb),
}

fn shape_distance(a: &Shape, b: &Shape) -> f64 {
    match (a, b) {
        (Shape::Capsule(c1), Shape::Capsule(c2)) => capsule_capsule(c1, c2),
        (Shape::Capsule(c), Shape::Box(bx)) | (Shape::Box(bx), Shape::Capsule(c)) => capsule_box(c, bx),
        (Shape::Box(b1), Shape::Box(b2)) => box_box(b1, b2),
    }
}

fn body_shape(scene: &SceneDescription, kin: &[ArmKinematics; 2], state: &WorldState, body: Body) -> Shape {
    match body {
        Body::Link { arm, link } => Shape::Capsule(Capsule::new(
            kin[arm].points[link],
            kin[arm].points[link + 1],
            scene.arms[arm].joints[link].radius,
        )),
        Body::Obstacle(i) => match &scene.obstacles[i] {
            Obstacle::Sphere { center, radius } => Shape::Capsule(Capsule::sphere(*center, *radius)),
            Obstacle::Box { center, half_extents } => Shape::Box(Aabb {
                center: *center,
                half_extents: *half_extents,
            }),
        },
        Body::Object(ObjectKind::Tray) => {
            let spec = scene.tray.as_ref().expect("tray spec");
            let pose = state.tray.as_ref().expect("tray state").pose.to_isometry();
            let (a, b, r) = spec.capsule_local();
            Shape::Capsule(Capsule::new(
                pose.transform_point(&a.into()).coords,
                pose.transform_point(&b.into()).coords,
                r,
            ))
        }
        Body::Object(ObjectKind::Ball) => {
            let spec = scene.ball.as_ref().expect("ball spec");
            Shape::Capsule(Capsule::sphere(
                state.ball.as_ref().expect("ball state").center,
                spec.radius,
            ))
        }
        Body::Object(ObjectKind::Cube) => {
            let spec = scene.cube.as_ref().expect("cube spec");
            Shape::Box(Aabb {
                center: state.cube.as_ref().expect("cube state").center,
                half_extents: Vector3::repeat(spec.half_extent),
            })
        }
    }
}

fn distances_for(
    scene: &SceneDescription,
    kin: &[ArmKinematics; 2],
    state: &WorldState,
    pairs: &[CollisionPair],
) -> Vec<f64> {
    pairs
        .iter()
        .map(|p| shape_distance(&body_shape(scene, kin, state, p.a), &body_shape(scene, kin, state, p.b)))
        .collect()
}

fn active_pairs(scene: &SceneDescription, mask: &CollisionMask) -> Vec<CollisionPair> {
    scene.collision_pairs().into_iter().filter(|p| mask.keeps(p)).collect()
}

/// Signed distances of every collision pair kept by `mask`, for the joint
/// and object configuration in `state`.
pub fn signed_distances(scene: &SceneDescription, state: &WorldState, mask: &CollisionMask) -> Result<Vec<f64>> {
    check_dof(scene, &state.joints)?;
    let kin = arm_kinematics(scene, &state.joints);
    Ok(distances_for(scene, &kin, state, &active_pairs(scene, mask)))
}

/// State with objects at their scene poses, zero end-effector velocity, and
/// grasp flags evaluated once.
pub fn initial_state(scene: &SceneDescription, joints: &JointVector, mask: &CollisionMask) -> Result<WorldState> {
    scene.validate()?;
    check_dof(scene, joints)?;
    let kin = arm_kinematics(scene, joints);
    let mut state = WorldState {
        joints: joints.clone(),
        ee: [
            Pose::from_isometry(&kin[0].end_effector),
            Pose::from_isometry(&kin[1].end_effector),
        ],
        ee_velocity: [Vector3::zeros(); 2],
        tray: scene.tray.as_ref().map(|t| TrayState {
            pose: t.pose,
            grasped: false,
            attachment: None,
        }),
        ball: scene.ball.as_ref().map(|b| BallState {
            center: b.center,
            held: false,
            dropped: false,
        }),
        cube: scene.cube.as_ref().map(|c| CubeState {
            center: c.center,
            held_by: None,
        }),
        distances: Vec::new(),
    };
    attach_rules(scene, &mut state);
    state.distances = distances_for(scene, &kin, &state, &active_pairs(scene, mask));
    Ok(state)
}

fn advance(
    scene: &SceneDescription,
    pairs: &[CollisionPair],
    state: &WorldState,
    velocity: &[f64],
    dt: f64,
) -> WorldState {
    let mut next = state.clone();
    for (q, v) in next.joints.as_mut_slice().iter_mut().zip(velocity) {
        *q += dt * v;
    }
    let kin = arm_kinematics(scene, &next.joints);
    for i in 0..2 {
        let pose = Pose::from_isometry(&kin[i].end_effector);
        next.ee_velocity[i] = (pose.position - state.ee[i].position) / dt;
        next.ee[i] = pose;
    }
    carry_objects(scene, &mut next);
    attach_rules(scene, &mut next);
    next.distances = distances_for(scene, &kin, &next, pairs);
    next
}

fn check_rollout_inputs(scene: &SceneDescription, state0: &WorldState, seq: &VelocitySequence, dt: f64) -> Result<()> {
    check_dof(scene, &state0.joints)?;
    if seq.dof() != scene.dof() {
        return Err(Error::DimensionMismatch {
            expected: scene.dof(),
            got: seq.dof(),
        });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt must be positive"));
    }
    Ok(())
}

/// Rolls `seq` out from `state0`: Euler joint update, forward kinematics,
/// object carry, attach rules and distances under `mask`, per step.
pub fn rollout(
    scene: &SceneDescription,
    state0: &WorldState,
    seq: &VelocitySequence,
    dt: f64,
    mask: &CollisionMask,
) -> Result<RolloutResult> {
    check_rollout_inputs(scene, state0, seq, dt)?;
    let pairs = active_pairs(scene, mask);
    Ok(RolloutResult {
        states: rollout_with(scene, &pairs, state0, seq, dt),
        pairs,
    })
}

fn rollout_with(
    scene: &SceneDescription,
    pairs: &[CollisionPair],
    state0: &WorldState,
    seq: &VelocitySequence,
    dt: f64,
) -> Vec<WorldState> {
    let mut states = Vec::with_capacity(seq.rows() + 1);
    states.push(state0.clone());
    for row in seq.row_iter() {
        let next = advance(scene, pairs, states.last().expect("non-empty"), row, dt);
        states.push(next);
    }
    states
}

/// The surrogate as a [`WorldModel`] with a fixed step and collision mask.
#[derive(Debug, Clone)]
pub struct SurrogateWorld {
    scene: SceneDescription,
    dt: f64,
    mask: CollisionMask,
    pairs: Vec<CollisionPair>,
}

impl SurrogateWorld {
    pub fn new(scene: SceneDescription, dt: f64, mask: CollisionMask) -> Result<Self> {
        scene.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt must be positive"));
        }
        let pairs = active_pairs(&scene, &mask);
        Ok(Self { scene, dt, mask, pairs })
    }

    pub fn scene(&self) -> &SceneDescription {
        &self.scene
    }

    pub fn mask(&self) -> &CollisionMask {
        &self.mask
    }

    /// Registered pairs in distance-vector order.
    pub fn pairs(&self) -> &[CollisionPair] {
        &self.pairs
    }

    pub fn initial_state(&self, joints: &JointVector) -> Result<WorldState> {
        initial_state(&self.scene, joints, &self.mask)
    }

    pub fn try_rollout(&self, state0: &WorldState, seq: &VelocitySequence) -> Result<RolloutResult> {
        check_rollout_inputs(&self.scene, state0, seq, self.dt)?;
        Ok(RolloutResult {
            states: rollout_with(&self.scene, &self.pairs, state0, seq, self.dt),
            pairs: self.pairs.clone(),
        })
    }
}

impl WorldModel for SurrogateWorld {
    type State = WorldState;

    fn joints<'a>(&self, state: &'a WorldState) -> &'a JointVector {
        &state.joints
    }

    fn rollout(&self, state: &WorldState, seq: &VelocitySequence) -> Vec<WorldState> {
        rollout_with(&self.scene, &self.pairs, state, seq, self.dt)
    }

    fn step(&self, state: &WorldState, velocity: &[f64]) -> WorldState {
        advance(&self.scene, &self.pairs, state, velocity, self.dt)
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}
