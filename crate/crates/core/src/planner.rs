//! The per-cycle sampling optimizer and the receding-horizon episode loop.

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::costs::{advance_phase, task_succeeded, Gates, Phase, PhaseState, TaskCost, TaskSpec};
use crate::error::{invalid, Error, Result};
use crate::parallel::par_map;
use crate::qp::{BandedConstraintOperator, SolverConfig};
use crate::sampler::{mix64, sample, select_elite, update, GaussianPolicy, MppiConfig, DEFAULT_SIGMA_FLOOR};
use crate::trajectory::{JointTrajectory, JointVector, VelocitySequence};
use crate::world::{CollisionMask, SceneDescription, SurrogateWorld, WorldModel, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub mppi: MppiConfig,
    /// Horizon `H` in steps.
    pub horizon: usize,
    /// Step length in seconds.
    pub dt: f64,
    /// Leading rows `E` averaged into the executed command.
    pub execute_steps: usize,
    /// Rows dropped from the front of the policy at warm start.
    pub shift: usize,
    /// Standard deviation of a fresh policy and of re-inflated tail rows.
    pub initial_sigma: f64,
    pub sigma_floor: f64,
    /// Optional wall-clock budget per planning cycle (seconds). Iterations
    /// stop once it is exhausted; at least one always runs.
    pub time_budget: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            mppi: MppiConfig::default(),
            horizon: 20,
            dt: 0.1,
            execute_steps: 2,
            shift: 2,
            initial_sigma: 0.5,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            time_budget: None,
            solver: SolverConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.mppi.validate()?;
        if self.horizon < 3 {
            return Err(invalid("horizon must be at least 3"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt must be positive"));
        }
        if self.execute_steps == 0 || self.execute_steps >= self.horizon {
            return Err(invalid("need 1 <= execute_steps < horizon"));
        }
        if self.shift >= self.horizon {
            return Err(invalid("shift must be less than the horizon"));
        }
        if !(self.initial_sigma > 0.0) || !(self.sigma_floor > 0.0) {
            return Err(invalid("sampling deviations must be positive"));
        }
        if let Some(b) = self.time_budget {
            if !(b > 0.0) {
                return Err(invalid("time budget must be positive"));
            }
        }
        Ok(())
    }

    pub fn initial_policy(&self, dof: usize) -> Result<GaussianPolicy> {
        GaussianPolicy::isotropic(self.horizon, dof, self.initial_sigma, self.sigma_floor)
    }
}

/// Cost statistics of one optimizer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub elite_min: f64,
    pub elite_mean: f64,
    pub best_so_far: f64,
    /// Projections that hit the solver cap and were scored as infinite.
    pub degraded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// Lowest-cost member of the final elite set (projected).
    pub best: VelocitySequence,
    pub best_cost: f64,
    pub policy: GaussianPolicy,
    pub iterations: Vec<IterationStats>,
    pub wall_time: f64,
}

/// Runs the sample, project, roll out, score, select, refit loop.
///
/// Iteration `m` draws its batch from `(seed, m)`. Projections that hit the
/// solver's iteration cap are scored as infinite.
pub fn optimize_with<W, F>(
    world: &W,
    state0: &W::State,
    cost: F,
    operator: &BandedConstraintOperator,
    policy: &GaussianPolicy,
    config: &PlannerConfig,
    seed: u64,
) -> Result<PlanResult>
where
    W: WorldModel,
    F: Fn(&[W::State]) -> f64 + Sync + Send,
{
    config.mppi.validate()?;
    if policy.horizon() != operator.horizon() || policy.dof() != operator.dof() {
        return Err(Error::DimensionMismatch {
            expected: operator.horizon() * operator.dof(),
            got: policy.horizon() * policy.dof(),
        });
    }
    let clock = Stopwatch::start();
    let cfg = &config.mppi;
    let mut policy = policy.clone();
    let mut stats = Vec::with_capacity(cfg.iterations);
    let mut best_so_far = f64::INFINITY;
    let mut last: Option<(VelocitySequence, f64)> = None;
    for m in 0..cfg.iterations {
        if m > 0 {
            if let Some(budget) = config.time_budget {
                if clock.elapsed() >= budget {
                    break;
                }
            }
        }
        let raws = sample(&policy, cfg.samples, seed, m as u64);
        let projected = operator.project_batch(&raws, &config.solver);
        let mut sequences = Vec::with_capacity(projected.len());
        let mut feasible = Vec::with_capacity(projected.len());
        for p in projected {
            let p = p?;
            feasible.push(!p.degraded);
            sequences.push(p.sequence);
        }
        let costs: Vec<f64> = par_map(&sequences, |seq| {
            let states = world.rollout(state0, seq);
            cost(&states)
        })
        .into_iter()
        .zip(&feasible)
        .map(|(c, ok)| if *ok { c } else { f64::INFINITY })
        .collect();
        let elite = select_elite(&costs, cfg.elites)?;
        let elite_costs: Vec<f64> = elite.iter().map(|&i| costs[i]).collect();
        let elite_samples: Vec<&VelocitySequence> = elite.iter().map(|&i| &sequences[i]).collect();
        let elite_min = elite_costs[0];
        best_so_far = best_so_far.min(elite_min);
        let finite: Vec<f64> = elite_costs.iter().copied().filter(|c| c.is_finite()).collect();
        stats.push(IterationStats {
            elite_min,
            elite_mean: finite.iter().sum::<f64>() / finite.len() as f64,
            best_so_far,
            degraded: feasible.iter().filter(|ok| !**ok).count(),
        });
        let finite_elite: Vec<usize> = (0..elite.len()).filter(|&i| elite_costs[i].is_finite()).collect();
        let samples: Vec<&VelocitySequence> = finite_elite.iter().map(|&i| elite_samples[i]).collect();
        let weights: Vec<f64> = finite_elite.iter().map(|&i| elite_costs[i]).collect();
        policy = update(&policy, &samples, &weights, cfg.learning_rate, cfg.temperature)?;
        last = Some((sequences[elite[0]].clone(), elite_min));
    }
    let (best, best_cost) = last.expect("at least one iteration");
    Ok(PlanResult {
        best,
        best_cost,
        policy,
        iterations: stats,
        wall_time: clock.elapsed(),
    })
}

/// One planning cycle on the surrogate for `task` in `phase`.
pub fn optimize(
    world: &SurrogateWorld,
    state0: &WorldState,
    task: &TaskCost,
    phase: Phase,
    operator: &BandedConstraintOperator,
    policy: &GaussianPolicy,
    config: &PlannerConfig,
) -> Result<PlanResult> {
    phase.check(task.spec().kind())?;
    let gates = Gates::for_phase(phase);
    optimize_with(
        world,
        state0,
        |states: &[WorldState]| task.evaluate_gated(&gates, states),
        operator,
        policy,
        config,
        config.mppi.seed,
    )
}

/// Per-joint mean of the first `e` rows of the best sequence.
pub fn step_execution(result: &PlanResult, e: usize) -> Result<JointVector> {
    let seq = &result.best;
    if e == 0 || e >= seq.rows() {
        return Err(invalid("need 1 <= E < H"));
    }
    let mut cmd = vec![0.0; seq.dof()];
    for k in 0..e {
        for (c, v) in cmd.iter_mut().zip(seq.row(k)) {
            *c += v;
        }
    }
    for c in &mut cmd {
        *c /= e as f64;
    }
    JointVector::new(cmd)
}

/// Shifts mean and variance forward by `shift` rows; the vacated tail
/// repeats the last mean row with `initial_variance`.
pub fn warm_start(policy: &GaussianPolicy, shift: usize, initial_variance: f64) -> Result<GaussianPolicy> {
    let (h, d) = (policy.horizon(), policy.dof());
    if shift >= h {
        return Err(invalid("shift must be less than the horizon"));
    }
    if shift == 0 {
        return Ok(policy.clone());
    }
    let mut mean = JointTrajectory::zeros(h, d);
    let mut var = JointTrajectory::zeros(h, d);
    for k in 0..h {
        if k + shift < h {
            mean.row_mut(k).copy_from_slice(policy.mean.row(k + shift));
            var.row_mut(k).copy_from_slice(policy.variance.row(k + shift));
        } else {
            mean.row_mut(k).copy_from_slice(policy.mean.row(h - 1));
            var.row_mut(k).fill(initial_variance);
        }
    }
    GaussianPolicy::new(mean, var, policy.sigma_floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureReason {
    None,
    Collision,
    Timeout,
    Drop,
    /// The derivative bounds admitted no sequence from the measured state.
    Infeasible,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::None => "none",
            FailureReason::Collision => "collision",
            FailureReason::Timeout => "timeout",
            FailureReason::Drop => "drop",
            FailureReason::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    /// Measure the wall time of every optimizer call.
    #[default]
    Wall,
    /// Record zero computation time, keeping episode records reproducible.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub success: bool,
    pub failure_reason: FailureReason,
    /// Simulated task time (seconds).
    pub t_task: f64,
    /// Optimizer wall time of each planning cycle (seconds).
    pub t_comp: Vec<f64>,
    pub seed: u64,
    /// Time at which each phase was entered.
    pub phase_trace: Vec<(f64, Phase)>,
    /// Best plan cost of each cycle.
    pub cost_trace: Vec<f64>,
}

impl EpisodeRecord {
    pub fn n_steps(&self) -> usize {
        self.t_comp.len()
    }
}

/// What one call of [`EpisodeRunner::cycle`] led to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleOutcome {
    Running,
    Finished,
}

/// Receding-horizon loop on the surrogate, one planning cycle at a time.
#[derive(Debug, Clone)]
pub struct EpisodeRunner {
    world: SurrogateWorld,
    task: TaskCost,
    config: PlannerConfig,
    timeout: f64,
    timing: Timing,
    state: WorldState,
    phase: PhaseState,
    policy: GaussianPolicy,
    command: Vec<f64>,
    time: f64,
    cycle: u64,
    record: EpisodeRecord,
    finished: bool,
    active: Vec<bool>,
    last_plan: Option<VelocitySequence>,
}

impl EpisodeRunner {
    pub fn new(
        scene: &SceneDescription,
        task: &TaskSpec,
        config: &PlannerConfig,
        timeout: f64,
        seed: u64,
        timing: Timing,
    ) -> Result<Self> {
        config.validate()?;
        if !(timeout > 0.0) {
            return Err(invalid("timeout must be positive"));
        }
        let world = SurrogateWorld::new(scene.clone(), config.dt, CollisionMask::none())?;
        if task.theta_home.dof() != scene.dof() {
            return Err(Error::DimensionMismatch {
                expected: scene.dof(),
                got: task.theta_home.dof(),
            });
        }
        let cost = TaskCost::new(task.clone(), world.pairs())?;
        let state = world.initial_state(&scene.home)?;
        let phase = PhaseState::start();
        let mut runner = Self {
            policy: config.initial_policy(scene.dof())?,
            command: vec![0.0; scene.dof()],
            active: Vec::new(),
            world,
            task: cost,
            config: *config,
            timeout,
            timing,
            state,
            phase,
            time: 0.0,
            cycle: 0,
            record: EpisodeRecord {
                success: false,
                failure_reason: FailureReason::None,
                t_task: 0.0,
                t_comp: Vec::new(),
                seed,
                phase_trace: vec![(0.0, Phase::Pick)],
                cost_trace: Vec::new(),
            },
            finished: false,
            last_plan: None,
        };
        runner.refresh_mask();
        if task_succeeded(runner.task.spec(), runner.phase.phase, &runner.state) {
            runner.finish(FailureReason::None);
        }
        Ok(runner)
    }

    fn refresh_mask(&mut self) {
        let mask = self.task.spec().phase_mask(self.phase.phase);
        self.active = self.world.pairs().iter().map(|p| mask.keeps(p)).collect();
    }

    fn finish(&mut self, reason: FailureReason) {
        self.finished = true;
        self.record.success = reason == FailureReason::None;
        self.record.failure_reason = reason;
        self.record.t_task = self.time;
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn phase(&self) -> &PhaseState {
        &self.phase
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn world(&self) -> &SurrogateWorld {
        &self.world
    }

    pub fn record(&self) -> &EpisodeRecord {
        &self.record
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Best sequence of the latest planning cycle.
    pub fn last_plan(&self) -> Option<&VelocitySequence> {
        self.last_plan.as_ref()
    }

    pub fn into_record(self) -> EpisodeRecord {
        self.record
    }

    /// Plans once, executes the averaged command for `E` steps, updates the
    /// phase and warm-starts the policy.
    pub fn cycle(&mut self) -> Result<CycleOutcome> {
        if self.finished {
            return Ok(CycleOutcome::Finished);
        }
        if self.time >= self.timeout - 1e-9 {
            self.finish(FailureReason::Timeout);
            return Ok(CycleOutcome::Finished);
        }
        let cfg = &self.config;
        let spec = self.task.spec();
        let mut operator = BandedConstraintOperator::new(
            cfg.horizon,
            self.state.joints.dof(),
            &self.state.joints,
            &spec.bounds,
            cfg.dt,
        )?;
        let feasible = operator
            .anchor_initial_velocity(&self.command, &spec.bounds)
            .and_then(|_| operator.check_feasible(&cfg.solver));
        if let Err(e) = feasible {
            return match e {
                Error::Infeasible { .. } => {
                    self.finish(FailureReason::Infeasible);
                    Ok(CycleOutcome::Finished)
                }
                other => Err(other),
            };
        }
        let mut planner_cfg = *cfg;
        planner_cfg.mppi.seed = mix64(self.record.seed ^ mix64(self.cycle));
        let clock = Stopwatch::start();
        let plan = optimize(
            &self.world,
            &self.state,
            &self.task,
            self.phase.phase,
            &operator,
            &self.policy,
            &planner_cfg,
        );
        let elapsed = clock.elapsed();
        let plan = match plan {
            Ok(p) => p,
            Err(Error::Infeasible { .. }) => {
                self.finish(FailureReason::Infeasible);
                return Ok(CycleOutcome::Finished);
            }
            Err(e) => return Err(e),
        };
        self.record.t_comp.push(match self.timing {
            Timing::Wall => elapsed,
            Timing::Off => 0.0,
        });
        self.record.cost_trace.push(plan.best_cost);
        let command = step_execution(&plan, cfg.execute_steps)?;
        let initial_variance = cfg.initial_sigma * cfg.initial_sigma;
        let shift = cfg.shift;
        let steps = cfg.execute_steps;
        self.cycle += 1;
        for _ in 0..steps {
            self.state = self.world.step(&self.state, command.as_slice());
            self.time += cfg.dt;
            let hit = self
                .state
                .distances
                .iter()
                .zip(&self.active)
                .any(|(d, keep)| *keep && *d < 0.0);
            if hit {
                self.finish(FailureReason::Collision);
                return Ok(CycleOutcome::Finished);
            }
            if self.state.ball.as_ref().is_some_and(|b| b.dropped) {
                self.finish(FailureReason::Drop);
                return Ok(CycleOutcome::Finished);
            }
            if task_succeeded(self.task.spec(), self.phase.phase, &self.state) {
                self.finish(FailureReason::None);
                return Ok(CycleOutcome::Finished);
            }
        }
        let next = advance_phase(self.task.spec(), &self.phase, &self.state, self.time)?;
        if next.phase != self.phase.phase {
            self.record.phase_trace.push((self.time, next.phase));
        }
        self.phase = next;
        self.refresh_mask();
        if task_succeeded(self.task.spec(), self.phase.phase, &self.state) {
            self.finish(FailureReason::None);
            return Ok(CycleOutcome::Finished);
        }
        self.policy = warm_start(&plan.policy, shift, initial_variance)?;
        self.command = command.as_slice().to_vec();
        self.last_plan = Some(plan.best);
        Ok(CycleOutcome::Running)
    }
}

/// Runs one episode to success, collision, drop, infeasibility or timeout.
pub fn run_episode(
    scene: &SceneDescription,
    task: &TaskSpec,
    config: &PlannerConfig,
    timeout: f64,
    seed: u64,
    timing: Timing,
) -> Result<EpisodeRecord> {
    let mut runner = EpisodeRunner::new(scene, task, config, timeout, seed, timing)?;
    while runner.cycle()? == CycleOutcome::Running {}
    Ok(runner.into_record())
}
