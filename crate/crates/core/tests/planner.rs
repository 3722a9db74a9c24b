use bimanual_mppi::costs::{planar_bounds, TaskSpec};
use bimanual_mppi::planner::{
    optimize_with, run_episode, CycleOutcome, EpisodeRunner, FailureReason, PlanResult, PlannerConfig, Timing,
};
use bimanual_mppi::qp::BandedConstraintOperator;
use bimanual_mppi::sampler::{update, GaussianPolicy, MppiConfig};
use bimanual_mppi::trajectory::{DerivativeBounds, JointTrajectory, JointVector, Quat, VelocitySequence};
use bimanual_mppi::world::{SceneDescription, SingleIntegrator};
use nalgebra::Vector3;
use proptest::prelude::*;

const FLOOR: f64 = 0.02;

fn policy_and_elites(
    h: usize,
    d: usize,
    n: usize,
) -> impl Strategy<Value = (GaussianPolicy, Vec<VelocitySequence>, Vec<f64>)> {
    let seq = move || {
        prop::collection::vec(-2.0..2.0f64, h * d).prop_map(move |v| VelocitySequence::from_flat(h, d, v).unwrap())
    };
    let var = prop::collection::vec(FLOOR * FLOOR..1.0, h * d)
        .prop_map(move |v| JointTrajectory::from_flat(h, d, v).unwrap());
    (
        seq(),
        var,
        prop::collection::vec(seq(), n),
        prop::collection::vec(0.0..50.0f64, n),
    )
        .prop_map(|(mean, var, elites, costs)| (GaussianPolicy::new(mean, var, FLOOR).unwrap(), elites, costs))
}

fn same_policy(a: &GaussianPolicy, b: &GaussianPolicy, tol: f64) -> bool {
    a.mean.max_abs_diff(&b.mean) <= tol && a.variance.max_abs_diff(&b.variance) <= tol
}

fn small_config(samples: usize, elites: usize, iterations: usize, horizon: usize) -> PlannerConfig {
    PlannerConfig {
        mppi: MppiConfig {
            samples,
            elites,
            iterations,
            ..MppiConfig::default()
        },
        horizon,
        ..PlannerConfig::default()
    }
}

fn toy_plan(seed: u64, goal: [f64; 2]) -> PlanResult {
    let config = small_config(64, 8, 8, 8);
    let world = SingleIntegrator { dt: config.dt };
    let theta0 = JointVector::zeros(2);
    let bounds = DerivativeBounds::uniform(2, (-5.0, 5.0), 2.0, 20.0, 400.0).unwrap();
    let op = BandedConstraintOperator::new(config.horizon, 2, &theta0, &bounds, config.dt).unwrap();
    let policy = config.initial_policy(2).unwrap();
    let cost = |states: &[JointVector]| {
        let last = states.last().unwrap().as_slice();
        (last[0] - goal[0]).powi(2) + (last[1] - goal[1]).powi(2)
    };
    optimize_with(&world, &theta0, cost, &op, &policy, &config, seed).unwrap()
}

fn tray_setup(bounds: DerivativeBounds) -> (SceneDescription, TaskSpec, PlannerConfig) {
    let scene = SceneDescription::planar_tray();
    let task = TaskSpec::tray(&scene, Vector3::new(0.05, 0.0, 0.5), Quat::IDENTITY, bounds).unwrap();
    (scene, task, small_config(48, 6, 1, 8))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn update_ignores_a_common_cost_offset(
        (policy, elites, costs) in policy_and_elites(4, 2, 5),
        offset in -100.0..100.0f64,
        eta in 0.05..1.0f64,
        beta in 0.1..10.0f64,
    ) {
        let refs: Vec<&VelocitySequence> = elites.iter().collect();
        let shifted: Vec<f64> = costs.iter().map(|c| c + offset).collect();
        let a = update(&policy, &refs, &costs, eta, beta).unwrap();
        let b = update(&policy, &refs, &shifted, eta, beta).unwrap();
        prop_assert!(same_policy(&a, &b, 1e-9));
    }

    #[test]
    fn updated_mean_stays_in_the_hull_and_variance_above_the_floor(
        (policy, elites, costs) in policy_and_elites(5, 3, 6),
        eta in 0.05..1.0f64,
        beta in 1e-3..10.0f64,
    ) {
        let refs: Vec<&VelocitySequence> = elites.iter().collect();
        let next = update(&policy, &refs, &costs, eta, beta).unwrap();
        for i in 0..next.mean.as_slice().len() {
            let values: Vec<f64> = elites.iter().map(|e| e.as_slice()[i]).chain([policy.mean.as_slice()[i]]).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let m = next.mean.as_slice()[i];
            prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
            prop_assert!(next.variance.as_slice()[i] >= FLOOR * FLOOR);
        }
    }

    #[test]
    fn full_rate_infinite_temperature_averages_the_elites((policy, elites, costs) in policy_and_elites(3, 2, 4)) {
        let refs: Vec<&VelocitySequence> = elites.iter().collect();
        let next = update(&policy, &refs, &costs, 1.0, 1e12).unwrap();
        for i in 0..next.mean.as_slice().len() {
            let avg = elites.iter().map(|e| e.as_slice()[i]).sum::<f64>() / elites.len() as f64;
            prop_assert!((next.mean.as_slice()[i] - avg).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn best_so_far_never_increases(seed in any::<u64>(), goal in prop::array::uniform2(-1.0..1.0f64)) {
        let plan = toy_plan(seed, goal);
        prop_assert_eq!(plan.iterations.len(), 8);
        for w in plan.iterations.windows(2) {
            prop_assert!(w[1].best_so_far <= w[0].best_so_far);
        }
        for it in &plan.iterations {
            prop_assert!(it.elite_min >= it.best_so_far);
            prop_assert!(it.elite_mean >= it.elite_min);
        }
        prop_assert_eq!(plan.best_cost, plan.iterations.last().unwrap().elite_min);
    }
}

#[test]
fn planning_is_reproducible_from_its_seed() {
    let a = toy_plan(99, [0.4, -0.7]);
    let b = toy_plan(99, [0.4, -0.7]);
    assert_eq!(a.best, b.best);
    assert_eq!(a.best_cost, b.best_cost);
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.iterations, b.iterations);
    let c = toy_plan(100, [0.4, -0.7]);
    assert_ne!(a.best, c.best);
}

#[test]
fn episodes_are_reproducible_from_their_seed() {
    let (scene, task, config) = tray_setup(planar_bounds(6));
    let run = |seed| run_episode(&scene, &task, &config, 1.6, seed, Timing::Off).unwrap();
    let a = run(5);
    assert_eq!(a, run(5));
    assert_ne!(a.cost_trace, run(6).cost_trace);
}

#[test]
fn executed_commands_respect_velocity_and_acceleration_bounds() {
    let bounds = planar_bounds(6);
    let (scene, task, config) = tray_setup(bounds);
    let mut runner = EpisodeRunner::new(&scene, &task, &config, 3.0, 11, Timing::Off).unwrap();
    let span = config.execute_steps as f64 * config.dt;
    let (v_max, a_max) = (1.0, 4.0);
    let mut previous = vec![0.0; 6];
    let mut cycles = 0;
    loop {
        let before = runner.state().joints.clone();
        let outcome = runner.cycle().unwrap();
        if runner.record().n_steps() == cycles {
            break;
        }
        cycles += 1;
        let command: Vec<f64> = runner
            .state()
            .joints
            .as_slice()
            .iter()
            .zip(before.as_slice())
            .map(|(after, b)| (after - b) / span)
            .collect();
        for (c, p) in command.iter().zip(&previous) {
            assert!(c.abs() <= v_max + 1e-8, "velocity {c}");
            assert!(
                (c - p).abs() / config.dt <= 2.0 * a_max + 1e-6,
                "acceleration {}",
                (c - p) / config.dt
            );
        }
        previous = command;
        if outcome == CycleOutcome::Finished {
            break;
        }
    }
    assert!(cycles >= 10);
}

#[test]
fn frozen_arms_time_out() {
    let bounds = DerivativeBounds::uniform(6, (-std::f64::consts::PI, std::f64::consts::PI), 0.0, 4.0, 40.0).unwrap();
    let (scene, task, config) = tray_setup(bounds);
    let record = run_episode(&scene, &task, &config, 1.0, 3, Timing::Off).unwrap();
    assert!(!record.success);
    assert_eq!(record.failure_reason, FailureReason::Timeout);
    assert!((record.t_task - 1.0).abs() < 1e-9);
    assert_eq!(record.n_steps(), 5);
    assert!(record.t_comp.iter().all(|t| *t == 0.0));
}
