//! Task phases and the latch rules that advance them.

use serde::{Deserialize, Serialize};

use crate::costs::tasks::{TaskKind, TaskSpec, TaskTargets};
use crate::error::{Error, Result};
use crate::trajectory::geodesic_unchecked;
use crate::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pick,
    Move,
    Pass,
    Place,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pick => "pick",
            Phase::Move => "move",
            Phase::Pass => "pass",
            Phase::Place => "place",
        }
    }

    /// Phases of a task, in order.
    pub fn sequence(kind: TaskKind) -> &'static [Phase] {
        match kind {
            TaskKind::Tray | TaskKind::Ball => &[Phase::Pick, Phase::Move],
            TaskKind::Handover => &[Phase::Pick, Phase::Pass, Phase::Place],
        }
    }

    pub fn check(self, kind: TaskKind) -> Result<()> {
        if Phase::sequence(kind).contains(&self) {
            Ok(())
        } else {
            Err(Error::PhaseMismatch {
                phase: self.name().into(),
                task: kind.name().into(),
            })
        }
    }
}

/// Position and orientation tolerances for phase transitions and task
/// success, plus the number of consecutive evaluations a pick must hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseThresholds {
    pub position: f64,
    pub orientation: f64,
    pub dwell: usize,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        Self {
            position: 0.02,
            orientation: 0.15,
            dwell: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub phase: Phase,
    /// Time at which the phase was entered (seconds).
    pub entered_at: f64,
    /// Consecutive evaluations with the transition condition met.
    pub dwell: usize,
}

impl PhaseState {
    pub fn start() -> Self {
        Self {
            phase: Phase::Pick,
            entered_at: 0.0,
            dwell: 0,
        }
    }
}

/// Whether the pick of a tray or ball task is complete in `state`.
fn pick_settled(task: &TaskSpec, state: &WorldState) -> bool {
    let th = &task.thresholds;
    match &task.targets {
        TaskTargets::Tray { grasp, .. } => {
            let grasped = state.tray.as_ref().is_some_and(|t| t.grasped);
            grasped
                && (0..2).all(|i| {
                    (state.ee[i].position - grasp[i].position).norm() < th.position
                        && geodesic_unchecked(&state.ee[i].orientation, &grasp[i].orientation) < th.orientation
                })
        }
        TaskTargets::Ball { p_ball, .. } => {
            let held = state.ball.as_ref().is_some_and(|b| b.held);
            let target = p_ball - nalgebra::Vector3::new(0.0, 0.0, task.epsilon);
            held && (state.ee_midpoint() - target).norm() < th.position
        }
        TaskTargets::Handover { .. } => false,
    }
}

/// Advances the phase by at most one step. Tray and ball tasks leave pick
/// once the object is held and the pick pose has been kept for `dwell`
/// consecutive evaluations. The hand-over enters pass when the first gripper
/// holds the cube and place once the second gripper has taken it.
pub fn advance_phase(task: &TaskSpec, phase: &PhaseState, state: &WorldState, now: f64) -> Result<PhaseState> {
    let kind = task.kind();
    phase.phase.check(kind)?;
    let enter = |p| PhaseState {
        phase: p,
        entered_at: now,
        dwell: 0,
    };
    let next = match (kind, phase.phase) {
        (TaskKind::Tray | TaskKind::Ball, Phase::Pick) => {
            if pick_settled(task, state) {
                let dwell = phase.dwell + 1;
                if dwell >= task.thresholds.dwell {
                    enter(Phase::Move)
                } else {
                    PhaseState { dwell, ..*phase }
                }
            } else {
                PhaseState { dwell: 0, ..*phase }
            }
        }
        (TaskKind::Handover, Phase::Pick) => match state.cube.as_ref().and_then(|c| c.held_by) {
            Some(0) => enter(Phase::Pass),
            _ => *phase,
        },
        (TaskKind::Handover, Phase::Pass) => match state.cube.as_ref().and_then(|c| c.held_by) {
            Some(1) => enter(Phase::Place),
            _ => *phase,
        },
        _ => *phase,
    };
    Ok(next)
}

/// Task success in `state`: the object is held in the final phase and sits
/// at its target within the position (and, for the tray, orientation)
/// threshold.
pub fn task_succeeded(task: &TaskSpec, phase: Phase, state: &WorldState) -> bool {
    let th = &task.thresholds;
    match &task.targets {
        TaskTargets::Tray { p_target, q_target, .. } => {
            phase == Phase::Move
                && state.tray.as_ref().is_some_and(|t| {
                    t.grasped
                        && (t.pose.position - p_target).norm() < th.position
                        && geodesic_unchecked(&t.pose.orientation, q_target) < th.orientation
                })
        }
        TaskTargets::Ball { p_target, .. } => {
            phase == Phase::Move
                && state
                    .ball
                    .as_ref()
                    .is_some_and(|b| b.held && !b.dropped && (b.center - p_target).norm() < th.position)
        }
        TaskTargets::Handover { p_target, .. } => {
            phase == Phase::Place
                && state.cube.as_ref().is_some_and(|c| c.held_by == Some(1))
                && (state.ee[1].position - p_target).norm() < th.position
        }
    }
}
