//! World models: the rollout contract used by the planner, a single-integrator
//! model for analytic checks, and the kinematic dual-arm surrogate.

pub mod geometry;
pub mod scene;
pub mod surrogate;

pub use scene::{
    ArmModel, AttachTolerances, BallSpec, Body, CollisionMask, CollisionPair, CubeSpec, JointSpec, ObjectKind,
    Obstacle, SceneDescription, TraySpec,
};
pub use surrogate::{
    attach_rules, forward_kinematics, initial_state, rollout, signed_distances, BallState, CubeState, RolloutResult,
    SurrogateWorld, TrayState, WorldState,
};

use crate::trajectory::{JointVector, VelocitySequence};

/// State evolution under a joint-velocity sequence.
///
/// `rollout` returns `H + 1` states, the first equal to the input. It must be
/// pure: the planner calls it concurrently on every sample of a batch.
pub trait WorldModel: Sync {
    type State: Clone + Send + Sync;

    fn joints<'a>(&self, state: &'a Self::State) -> &'a JointVector;

    fn rollout(&self, state: &Self::State, seq: &VelocitySequence) -> Vec<Self::State>;

    /// Advances the state by one step of constant joint velocity.
    fn step(&self, state: &Self::State, velocity: &[f64]) -> Self::State {
        let seq = VelocitySequence::repeat_row(1, velocity);
        self.rollout(state, &seq).pop().expect("rollout returns H + 1 states")
    }

    fn dt(&self) -> f64;
}

/// Joint positions integrated by explicit Euler; the state is the joint
/// vector itself.
#[derive(Debug, Clone, Copy)]
pub struct SingleIntegrator {
    pub dt: f64,
}

impl WorldModel for SingleIntegrator {
    type State = JointVector;

    fn joints<'a>(&self, state: &'a JointVector) -> &'a JointVector {
        state
    }

    fn rollout(&self, state: &JointVector, seq: &VelocitySequence) -> Vec<JointVector> {
        let mut out = Vec::with_capacity(seq.rows() + 1);
        out.push(state.clone());
        let mut q = state.clone();
        for row in seq.row_iter() {
            for (qj, vj) in q.as_mut_slice().iter_mut().zip(row) {
                *qj += self.dt * vj;
            }
            out.push(q.clone());
        }
        out
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}
