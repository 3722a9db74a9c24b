//! Cost terms and task assemblies.
//!
//! [`terms`] holds the individual formulas over plain position, orientation
//! and distance sequences. [`tasks`] combines them into the phase-gated totals
//! of the tray, ball and hand-over tasks, and [`phase`] advances the phases
//! from the measured world state.

pub mod phase;
pub mod tasks;
pub mod terms;

pub use phase::{advance_phase, task_succeeded, Phase, PhaseState, PhaseThresholds};
pub use tasks::{
    assemble_task_cost, planar_bounds, CostWeights, Gates, HandoverWeights, RolloutView, TaskCost, TaskKind, TaskSpec,
    TaskTargets, DEFAULT_EPSILON, DEFAULT_GAMMA,
};
pub use terms::{
    axis_alignment_cost, collision_cost, collision_cost_masked, dual_orientation_cost, dual_position_cost,
    ee_distance_cost, eef_obj_alignment_cost, joint_deviation_cost, obj_target_cost, orientation_target_cost,
    position_target_cost, relative_velocity_cost, Axes, NormMode,
};
