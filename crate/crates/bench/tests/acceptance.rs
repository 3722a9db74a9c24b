//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! nonzero when any criterion fails. Pass substrings as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- qp metric`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use bimanual_bench::suite::{episodes_csv, summary_csv};
use bimanual_bench::{compute_metrics, run_episodes, summarize, EpisodeRow, ScenarioConfig, SuiteOptions};
use bimanual_mppi::costs::*;
use bimanual_mppi::planner::*;
use bimanual_mppi::qp::{BandedConstraintOperator, SolverConfig};
use bimanual_mppi::sampler::{update, GaussianPolicy};
use bimanual_mppi::trajectory::*;
use bimanual_mppi::world::*;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || {
        format!("{name}: got {got}, expected {want} (tol {tol:e})")
    })
}

// ---------------------------------------------------------------------------
// QP instances and brute-force oracle

struct QpInstance {
    h: usize,
    d: usize,
    dt: f64,
    theta0: JointVector,
    bounds: DerivativeBounds,
    raw: VelocitySequence,
}

fn random_instance(rng: &mut ChaCha8Rng, max_h: usize, max_d: usize) -> QpInstance {
    let h = rng.random_range(3..=max_h);
    let d = rng.random_range(1..=max_d);
    let dt = rng.random_range(0.05..0.2);
    let mut lower: [Vec<f64>; 4] = Default::default();
    let mut upper: [Vec<f64>; 4] = Default::default();
    let mut theta0 = Vec::new();
    let mut vmax: f64 = 0.0;
    for _ in 0..d {
        let (plo, phi) = (-rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
        lower[0].push(plo);
        upper[0].push(phi);
        theta0.push(rng.random_range(0.9 * plo..0.9 * phi));
        for (order, range) in [(1, 0.3..2.0), (2, 1.0..10.0), (3, 10.0..200.0)] {
            let lo = -rng.random_range(range.clone());
            let hi = rng.random_range(range);
            lower[order].push(lo);
            upper[order].push(hi);
            if order == 1 {
                vmax = vmax.max(hi.max(-lo));
            }
        }
    }
    let jv = |v: &Vec<f64>| JointVector::new(v.clone()).unwrap();
    let bounds = DerivativeBounds::new(
        [jv(&lower[0]), jv(&lower[1]), jv(&lower[2]), jv(&lower[3])],
        [jv(&upper[0]), jv(&upper[1]), jv(&upper[2]), jv(&upper[3])],
    )
    .unwrap();
    let amp = rng.random_range(0.2..2.5) * vmax;
    let data: Vec<f64> = (0..h * d).map(|_| rng.random_range(-amp..amp)).collect();
    QpInstance {
        h,
        d,
        dt,
        theta0: JointVector::new(theta0).unwrap(),
        bounds,
        raw: VelocitySequence::from_flat(h, d, data).unwrap(),
    }
}

impl QpInstance {
    fn operator(&self) -> BandedConstraintOperator {
        BandedConstraintOperator::new(self.h, self.d, &self.theta0, &self.bounds, self.dt).unwrap()
    }

    /// Physical constraint rows of joint `j`: `lo <= a . x + c <= hi`.
    fn joint_rows(&self, j: usize) -> Vec<(Vec<f64>, f64, f64, f64)> {
        let (h, dt) = (self.h, self.dt);
        let b = &self.bounds;
        let mut rows = Vec::new();
        for k in 1..=h {
            let a: Vec<f64> = (0..h).map(|i| if i < k { dt } else { 0.0 }).collect();
            rows.push((a, self.theta0[j], b.lower[0][j], b.upper[0][j]));
        }
        for k in 0..h {
            let a: Vec<f64> = (0..h).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
            rows.push((a, 0.0, b.lower[1][j], b.upper[1][j]));
        }
        for k in 0..h - 1 {
            let mut a = vec![0.0; h];
            a[k] = -1.0 / dt;
            a[k + 1] = 1.0 / dt;
            rows.push((a, 0.0, b.lower[2][j], b.upper[2][j]));
        }
        for k in 0..h - 2 {
            let mut a = vec![0.0; h];
            let s = 1.0 / (dt * dt);
            a[k] = s;
            a[k + 1] = -2.0 * s;
            a[k + 2] = s;
            rows.push((a, 0.0, b.lower[3][j], b.upper[3][j]));
        }
        rows
    }

    fn max_violation(&self, seq: &VelocitySequence) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.d {
            let x = seq.column(j);
            for (a, c, lo, hi) in self.joint_rows(j) {
                let v: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum::<f64>() + c;
                worst = worst.max(lo - v).max(v - hi);
            }
        }
        worst
    }
}

/// Solves `G y = rhs` for a small symmetric positive definite `G`; `None`
/// when `G` is numerically singular.
fn solve_spd(g: &mut [[f64; 5]; 5], rhs: &mut [f64; 5], n: usize) -> Option<()> {
    let scale = (0..n).map(|i| g[i][i]).fold(0.0, f64::max);
    for i in 0..n {
        let mut s = g[i][i];
        for k in 0..i {
            s -= g[i][k] * g[i][k];
        }
        if s <= 1e-10 * scale {
            return None;
        }
        let lii = s.sqrt();
        g[i][i] = lii;
        for r in i + 1..n {
            let mut t = g[r][i];
            for k in 0..i {
                t -= g[r][k] * g[i][k];
            }
            g[r][i] = t / lii;
        }
    }
    for i in 0..n {
        let mut t = rhs[i];
        for k in 0..i {
            t -= g[i][k] * rhs[k];
        }
        rhs[i] = t / g[i][i];
    }
    for i in (0..n).rev() {
        let mut t = rhs[i];
        for k in i + 1..n {
            t -= g[k][i] * rhs[k];
        }
        rhs[i] = t / g[i][i];
    }
    Some(())
}

/// Advances `idx` to the next increasing `idx.len()`-subset of `0..m`.
fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let size = idx.len();
    for i in (0..size).rev() {
        if idx[i] < m - size + i {
            idx[i] += 1;
            for k in i + 1..size {
                idx[k] = idx[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact minimizer of `1/2 |x - r|^2` over one joint's rows, by enumerating
/// signed active sets in order of increasing size and returning the first
/// that satisfies the KKT conditions.
fn oracle_joint(rows: &[(Vec<f64>, f64, f64, f64)], r: &[f64]) -> Option<Vec<f64>> {
    let h = r.len();
    let m = rows.len();
    let feasible = |x: &[f64]| {
        rows.iter().all(|(a, c, lo, hi)| {
            let v: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() + c;
            let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
            v >= lo - tol && v <= hi + tol
        })
    };
    if feasible(r) {
        return Some(r.to_vec());
    }
    let mut idx = [0usize; 5];
    for size in 1..=h.min(5) {
        for (i, slot) in idx.iter_mut().enumerate().take(size) {
            *slot = i;
        }
        loop {
            for signs in 0..(1u32 << size) {
                let mut g = [[0.0; 5]; 5];
                let mut rhs = [0.0; 5];
                for p in 0..size {
                    let (ap, cp, lo, hi) = &rows[idx[p]];
                    let upper = signs >> p & 1 == 1;
                    let bound = if upper { *hi } else { *lo };
                    let ar: f64 = ap.iter().zip(r).map(|(a, x)| a * x).sum();
                    rhs[p] = bound - cp - ar;
                    for q in 0..=p {
                        let aq = &rows[idx[q]].0;
                        let v: f64 = ap.iter().zip(aq).map(|(a, b)| a * b).sum();
                        g[p][q] = v;
                        g[q][p] = v;
                    }
                }
                if solve_spd(&mut g, &mut rhs, size).is_none() {
                    continue;
                }
                let dual_ok = (0..size).all(|p| {
                    let upper = signs >> p & 1 == 1;
                    if upper {
                        rhs[p] <= 1e-9
                    } else {
                        rhs[p] >= -1e-9
                    }
                });
                if !dual_ok {
                    continue;
                }
                let mut x = r.to_vec();
                for p in 0..size {
                    for (xi, ai) in x.iter_mut().zip(&rows[idx[p]].0) {
                        *xi += rhs[p] * ai;
                    }
                }
                if feasible(&x) {
                    return Some(x);
                }
            }
            if !next_combination(&mut idx[..size], m) {
                break;
            }
        }
    }
    None
}

fn qp_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = SolverConfig::default();
    let (mut worst_dx, mut worst_viol, mut active) = (0.0f64, 0.0f64, 0usize);
    for n in 0..1000 {
        let inst = random_instance(&mut rng, 5, 2);
        let got = inst
            .operator()
            .project(&inst.raw, &cfg)
            .map_err(|e| format!("instance {n}: {e}"))?;
        ensure(!got.degraded, || format!("instance {n}: solver hit its iteration cap"))?;
        let mut dx2 = 0.0;
        for j in 0..inst.d {
            let rows = inst.joint_rows(j);
            let x = oracle_joint(&rows, &inst.raw.column(j))
                .ok_or_else(|| format!("instance {n}: oracle found no KKT point"))?;
            let col = got.sequence.column(j);
            dx2 += x.iter().zip(&col).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        if got.sequence != inst.raw {
            active += 1;
        }
        let dx = dx2.sqrt();
        let viol = inst.max_violation(&got.sequence).max(0.0);
        worst_dx = worst_dx.max(dx);
        worst_viol = worst_viol.max(viol);
        ensure(dx <= 1e-6, || format!("instance {n}: |x - x_oracle| = {dx:e}"))?;
        ensure(viol <= 1e-8, || format!("instance {n}: constraint violation {viol:e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("runtime {secs:.1} s exceeds 60 s"))?;
    Ok(format!(
        "1000 instances ({active} with active bounds), max |dx| {worst_dx:.1e}, max violation {worst_viol:.1e}, {secs:.1} s"
    ))
}

fn qp_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = SolverConfig::default();
    let (mut worst_idem, mut worst_exp, mut passthrough) = (0.0f64, f64::NEG_INFINITY, 0usize);
    for n in 0..10_000 {
        let inst = random_instance(&mut rng, 12, 4);
        let op = inst.operator();
        let p = op.project(&inst.raw, &cfg).map_err(|e| e.to_string())?.sequence;
        let pp = op.project(&p, &cfg).map_err(|e| e.to_string())?.sequence;
        let idem = p.max_abs_diff(&pp);
        worst_idem = worst_idem.max(idem);
        ensure(idem <= 1e-8, || format!("instance {n}: idempotence gap {idem:e}"))?;

        let other_data: Vec<f64> = inst
            .raw
            .as_slice()
            .iter()
            .map(|v| v + rng.random_range(-0.5..0.5))
            .collect();
        let other = VelocitySequence::from_flat(inst.h, inst.d, other_data).unwrap();
        let q = op.project(&other, &cfg).map_err(|e| e.to_string())?.sequence;
        let excess = p.distance(&q) - inst.raw.distance(&other);
        worst_exp = worst_exp.max(excess);
        ensure(excess <= 1e-8, || {
            format!("instance {n}: projection expands distances by {excess:e}")
        })?;

        // A strictly feasible input: a scaled-down copy of the projection.
        let shrink: Vec<f64> = p.as_slice().iter().map(|v| 0.5 * v).collect();
        let inner = VelocitySequence::from_flat(inst.h, inst.d, shrink).unwrap();
        if inst.max_violation(&inner) <= 0.0 {
            passthrough += 1;
            let out = op.project(&inner, &cfg).map_err(|e| e.to_string())?.sequence;
            let gap = out.max_abs_diff(&inner);
            ensure(gap <= 1e-8, || format!("instance {n}: feasible input moved by {gap:e}"))?;
        }
    }
    ensure(passthrough >= 5000, || {
        format!("only {passthrough} feasible passthrough inputs generated")
    })?;
    Ok(format!(
        "10000 instances, max idempotence gap {worst_idem:.1e}, max expansion {worst_exp:.1e}, {passthrough} passthrough checks"
    ))
}

// ---------------------------------------------------------------------------
// MPPI on the single integrator

fn mppi_convergence() -> Outcome {
    let start = Instant::now();
    let (h, d, dt) = (10, 2, 0.1);
    let world = SingleIntegrator { dt };
    let theta0 = JointVector::zeros(d);
    let bounds = DerivativeBounds::uniform(d, (-100.0, 100.0), 10.0, 1e3, 1e5).unwrap();
    let op = BandedConstraintOperator::new(h, d, &theta0, &bounds, dt).unwrap();
    let mut config = PlannerConfig {
        horizon: h,
        dt,
        ..PlannerConfig::default()
    };
    config.mppi.samples = 256;
    config.mppi.elites = 32;
    config.mppi.iterations = 50;
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let goal: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cost = |states: &[JointVector]| {
            let last = states.last().unwrap();
            last.as_slice()
                .iter()
                .zip(&goal)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let policy = config.initial_policy(d).unwrap();
        let plan = optimize_with(&world, &theta0, cost, &op, &policy, &config, seed).map_err(|e| e.to_string())?;
        let end = integrate_velocities(&theta0, &plan.best, dt).unwrap();
        let err = end
            .row(h)
            .iter()
            .zip(&goal)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(err);
        if err <= 1e-2 {
            hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(hits >= 95, || {
        format!("{hits}/100 seeds within 1e-2 (worst error {worst:.2e})")
    })?;
    ensure(secs < 120.0, || format!("runtime {secs:.1} s exceeds 120 s"))?;
    Ok(format!(
        "{hits}/100 seeds within 1e-2, worst terminal error {worst:.1e}, {secs:.1} s"
    ))
}

// ---------------------------------------------------------------------------
// Update rule

fn seq(rows: &[&[f64]]) -> VelocitySequence {
    VelocitySequence::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn update_rules() -> Outcome {
    let floor = 0.02;
    let mean = seq(&[&[0.5, -0.5], &[1.0, 0.0]]);
    let var = JointTrajectory::filled(2, 2, 0.3);
    let policy = GaussianPolicy::new(mean.clone(), var, floor).unwrap();

    let x = seq(&[&[0.1, 0.2], &[0.3, 0.4]]);
    let single = update(&policy, &[&x], &[3.7], 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure(single.mean == x, || {
        "single elite with eta=1: mean differs from the sample".into()
    })?;
    ensure(single.variance.as_slice().iter().all(|v| *v == floor * floor), || {
        format!(
            "single elite with eta=1: variance {:?} is not the floor",
            single.variance.as_slice()
        )
    })?;

    let a = seq(&[&[0.2, 0.4], &[-0.6, 1.0]]);
    let b = seq(&[&[0.6, -0.4], &[0.2, 0.0]]);
    let uniform = update(&policy, &[&a, &b], &[2.0, 2.0], 1.0, 0.7).map_err(|e| e.to_string())?;
    for (i, m) in uniform.mean.as_slice().iter().enumerate() {
        close(
            "uniform weights mean",
            *m,
            0.5 * (a.as_slice()[i] + b.as_slice()[i]),
            1e-15,
        )?;
    }

    let eta = 0.6;
    let sharp = update(&policy, &[&a, &b], &[1.0, 1.5], eta, 1e-6).map_err(|e| e.to_string())?;
    for (i, m) in sharp.mean.as_slice().iter().enumerate() {
        let want = (1.0 - eta) * mean.as_slice()[i] + eta * a.as_slice()[i];
        close("beta -> 0 mean", *m, want, 1e-15)?;
    }
    Ok("single elite, uniform weights and best-sample limit reproduce the closed forms".into())
}

// ---------------------------------------------------------------------------
// Cost formulas

fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

fn cost_hand_checks() -> Outcome {
    let tol = 1e-12;
    let e = |r: bimanual_mppi::Result<f64>| r.map_err(|e| e.to_string());
    let mut checks = 0;
    let mut check = |name: &str, got: f64, want: f64| -> Result<(), String> {
        checks += 1;
        close(name, got, want, tol)
    };
    check("collision barrier", e(collision_cost(&[[1.0], [0.85]], 0.1))?, 0.05)?;
    check(
        "collision penetration",
        e(collision_cost(&[[-0.01], [-0.01]], 0.1))?,
        2.001,
    )?;
    check(
        "joint deviation 3-4-5",
        e(joint_deviation_cost(&[[0.3, 0.4], [0.3, 0.4]], &[0.0, 0.0]))?,
        1.0,
    )?;
    let zero = vec![v(0.0, 0.0, 0.0); 5];
    let up = vec![v(0.0, 0.0, 0.1); 5];
    check("z alignment", e(axis_alignment_cost(&zero, &up, Axes::Z))?, 0.5)?;
    check(
        "relative velocity",
        e(relative_velocity_cost(
            &[v(1.0, 0.0, 0.0)],
            &[v(0.0, 0.0, 0.0)],
            &[v(0.2, 0.0, 0.0)],
            &[v(0.0, 0.0, 0.0)],
        ))?,
        0.2,
    )?;
    let off = vec![v(0.2, 0.0, 0.0); 3];
    check(
        "position target",
        position_target_cost(&off, &v(0.0, 0.0, 0.0), NormMode::Full),
        0.6,
    )?;
    let q90 = Quat::from_axis_angle(Vector3::z(), FRAC_PI_2);
    check(
        "orientation target",
        e(orientation_target_cost(&[q90; 4], &Quat::IDENTITY))?,
        2.0 * PI,
    )?;
    check(
        "ee distance",
        e(ee_distance_cost(&[v(0.0, 0.0, 0.0)], &[v(0.5, 0.0, 0.0)], 0.4))?,
        0.01,
    )?;
    let (p_ball, eps) = (v(0.1, 0.0, 0.3), 0.05);
    let mid_high = vec![v(0.1, 0.0, 0.30); 2];
    check(
        "eef-object alignment",
        e(eef_obj_alignment_cost(&mid_high, &mid_high, &p_ball, eps))?,
        0.10,
    )?;
    let target = v(0.3, 0.0, 0.4);
    let carried = vec![v(0.1, 0.0, 0.35); 3];
    check(
        "object target",
        e(obj_target_cost(&carried, &carried, &target, eps))?,
        0.6,
    )?;

    let zero_sets = [
        (
            "collision, receding safely",
            e(collision_cost(&[[0.5, 1.0], [0.6, 1.0], [0.7, 1.2]], 0.1))?,
        ),
        (
            "joint deviation at home",
            e(joint_deviation_cost(&[[0.1, -0.2]; 3], &[0.1, -0.2]))?,
        ),
        (
            "alignment of identical paths",
            e(axis_alignment_cost(&up, &up, Axes::Z))?,
        ),
        (
            "alignment ignores x",
            e(axis_alignment_cost(&[v(0.0, 0.0, 0.0)], &[v(0.3, 0.0, 0.0)], Axes::YZ))?,
        ),
        (
            "relative velocity, same velocity",
            e(relative_velocity_cost(
                &[v(1.0, 0.0, 0.0)],
                &[v(0.0, 0.0, 0.0)],
                &[v(0.1, 0.2, 0.3)],
                &[v(0.1, 0.2, 0.3)],
            ))?,
        ),
        (
            "relative velocity, orthogonal",
            e(relative_velocity_cost(
                &[v(1.0, 0.0, 0.0)],
                &[v(0.0, 0.0, 0.0)],
                &[v(0.0, 0.3, 0.0)],
                &[v(0.0, 0.0, 0.0)],
            ))?,
        ),
        (
            "position at target",
            position_target_cost(&off, &v(0.2, 0.0, 0.0), NormMode::Full),
        ),
        (
            "x-only ignores y",
            position_target_cost(&[v(0.2, 0.5, 0.0)], &v(0.2, 0.0, 0.0), NormMode::XOnly),
        ),
        ("orientation aligned", e(orientation_target_cost(&[q90; 3], &q90))?),
        (
            "orientation double cover",
            e(orientation_target_cost(&[-q90; 3], &q90))?,
        ),
        (
            "ee distance exact",
            e(ee_distance_cost(&[v(0.0, 0.0, 0.0)], &[v(0.0, 0.0, 0.4)], 0.4))?,
        ),
        (
            "eef-object at offset",
            e(eef_obj_alignment_cost(
                &[v(0.0, 0.0, 0.25)],
                &[v(0.5, 0.0, 0.25)],
                &v(0.25, 0.0, 0.375),
                0.125,
            ))?,
        ),
        (
            "object at target",
            e(obj_target_cost(
                &[v(0.0, 0.0, 0.25)],
                &[v(0.5, 0.0, 0.25)],
                &v(0.25, 0.0, 0.375),
                0.125,
            ))?,
        ),
    ];
    for (name, value) in zero_sets {
        ensure(value == 0.0, || format!("{name}: expected exactly 0, got {value:e}"))?;
    }

    let assembled = assembled_cross_check()?;
    Ok(format!(
        "{checks} hand values at 1e-12, {} exact zero sets, assembled tray cost matches its terms ({assembled:.6})",
        zero_sets.len()
    ))
}

/// Two-step tray rollout with unit weights: the assembled pick-phase cost
/// equals the sum of the individually evaluated terms.
fn assembled_cross_check() -> Result<f64, String> {
    let scene = SceneDescription::planar_tray();
    let err = |e: bimanual_mppi::Error| e.to_string();
    let mut task = TaskSpec::tray(&scene, v(0.0, 0.0, 0.5), Quat::IDENTITY, planar_bounds(6)).map_err(err)?;
    task.weights = CostWeights {
        w_c: 1.0,
        w_theta: 1.0,
        w_z: 1.0,
        w_v: 1.0,
        w_p_pick: 1.0,
        w_r_pick: 1.0,
        w_l: 1.0,
        w_p_tray: 1.0,
        w_r_tray: 1.0,
        w_r_move: 1.0,
        ..CostWeights::default()
    };
    let world = SurrogateWorld::new(scene.clone(), 0.1, CollisionMask::none()).map_err(err)?;
    let s0 = world.initial_state(&scene.home).map_err(err)?;
    let vel = seq(&[&[0.3, -0.2, 0.1, -0.1, 0.4, 0.0], &[0.2, -0.1, 0.3, 0.0, 0.2, -0.3]]);
    let rollout = world.try_rollout(&s0, &vel).map_err(err)?;
    let got = assemble_task_cost(&task, &PhaseState::start(), &rollout).map_err(err)?;

    let TaskTargets::Tray { grasp, .. } = &task.targets else {
        unreachable!()
    };
    let states = &rollout.states;
    let pred = &states[1..];
    let p1: Vec<_> = pred.iter().map(|s| s.ee[0].position).collect();
    let p2: Vec<_> = pred.iter().map(|s| s.ee[1].position).collect();
    let q1: Vec<_> = pred.iter().map(|s| s.ee[0].orientation).collect();
    let q2: Vec<_> = pred.iter().map(|s| s.ee[1].orientation).collect();
    let v1: Vec<_> = pred.iter().map(|s| s.ee_velocity[0]).collect();
    let v2: Vec<_> = pred.iter().map(|s| s.ee_velocity[1]).collect();
    let thetas: Vec<Vec<f64>> = pred.iter().map(|s| s.joints.as_slice().to_vec()).collect();
    let rows: Vec<Vec<f64>> = states.iter().map(|s| s.distances.clone()).collect();
    let want = collision_cost(&rows, task.gamma).map_err(err)?
        + joint_deviation_cost(&thetas, task.theta_home.as_slice()).map_err(err)?
        + axis_alignment_cost(&p1, &p2, Axes::Z).map_err(err)?
        + relative_velocity_cost(&p1, &p2, &v1, &v2).map_err(err)?
        + dual_position_cost(&p1, &p2, &grasp[0].position, &grasp[1].position).map_err(err)?
        + dual_orientation_cost(&q1, &q2, &grasp[0].orientation, &grasp[1].orientation).map_err(err)?;
    close("assembled pick cost", got, want, 1e-12)?;
    Ok(got)
}

// ---------------------------------------------------------------------------
// Barrier semantics

fn barrier_iff() -> Outcome {
    let grid: Vec<f64> = (-4..=20).map(|i| i as f64 * 0.05).collect();
    let gammas = [0.1, 0.25, 0.5, 0.75, 0.9];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut zero, mut total) = (0usize, 0usize);
    let mut check = |rows: &[Vec<f64>], gamma: f64| -> Result<(), String> {
        let c = collision_cost(rows, gamma).map_err(|e| e.to_string())?;
        let no_hit = rows.iter().flatten().all(|d| *d >= 0.0);
        let decay_ok = rows
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(d0, d1)| *d1 >= (1.0 - gamma) * d0));
        total += 1;
        if c == 0.0 {
            zero += 1;
        }
        ensure((c == 0.0) == (no_hit && decay_ok), || {
            format!(
                "cost {c} for rows {rows:?} gamma {gamma}, predicate {}",
                no_hit && decay_ok
            )
        })
    };
    // Exhaustive over one pair and two steps on the grid.
    for &gamma in &gammas {
        for &a in &grid {
            for &b in &grid {
                check(&[vec![a], vec![b]], gamma)?;
            }
        }
    }
    // Random longer sequences drawn from the grid and from a continuum.
    for n in 0..200_000 {
        let steps = rng.random_range(2..=5);
        let pairs = rng.random_range(1..=3);
        let gamma = if n % 2 == 0 {
            gammas[rng.random_range(0..gammas.len())]
        } else {
            rng.random_range(0.01..0.99)
        };
        let rows: Vec<Vec<f64>> = (0..steps)
            .map(|_| {
                (0..pairs)
                    .map(|_| {
                        if n % 3 == 0 {
                            rng.random_range(-0.2..1.0)
                        } else {
                            grid[rng.random_range(0..grid.len())]
                        }
                    })
                    .collect()
            })
            .collect();
        check(&rows, gamma)?;
    }
    ensure(zero > 1000 && zero < total, || {
        format!("degenerate sample: {zero} of {total} zero")
    })?;
    Ok(format!(
        "{total} sequences, {zero} with zero cost, equivalence holds everywhere"
    ))
}

// ---------------------------------------------------------------------------
// End-to-end, sweep, cycle time

fn scenario(name: &str) -> ScenarioConfig {
    let text = match name {
        "tray" => include_str!("../scenarios/tray.json"),
        "ball" => include_str!("../scenarios/ball.json"),
        "handover" => include_str!("../scenarios/handover.json"),
        _ => unreachable!(),
    };
    ScenarioConfig::from_json(text).expect("bundled scenario is valid")
}

fn quiet(_: &EpisodeRow) {}

fn successes(rows: &[EpisodeRow], batch: usize) -> usize {
    rows.iter().filter(|r| r.batch_size == batch && r.success).count()
}

fn failure_list(rows: &[EpisodeRow], batch: usize) -> String {
    let f: Vec<String> = rows
        .iter()
        .filter(|r| r.batch_size == batch && !r.success)
        .map(|r| format!("run {} {}", r.run, r.failure_reason.as_str()))
        .collect();
    if f.is_empty() {
        "none".into()
    } else {
        f.join(", ")
    }
}

struct Suites {
    tray: Option<Vec<EpisodeRow>>,
}

fn tray_rows(cache: &mut Suites) -> Result<Vec<EpisodeRow>, String> {
    if cache.tray.is_none() {
        let mut cfg = scenario("tray");
        cfg.batch_sizes = vec![256, 512, 1024];
        cfg.timing = Timing::Off;
        cache.tray = Some(run_episodes(&cfg, SuiteOptions::default(), &quiet).map_err(|e| e.to_string())?);
    }
    Ok(cache.tray.clone().unwrap())
}

fn end_to_end(cache: &mut Suites) -> Outcome {
    let start = Instant::now();
    let tray = tray_rows(cache)?;
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for (name, need) in [("tray", 18), ("handover", 18), ("ball", 16)] {
        let rows = if name == "tray" {
            tray.clone()
        } else {
            let mut cfg = scenario(name);
            cfg.batch_sizes = vec![1024];
            cfg.timing = Timing::Off;
            run_episodes(&cfg, SuiteOptions::default(), &quiet).map_err(|e| e.to_string())?
        };
        let ok = successes(&rows, 1024);
        lines.push(format!(
            "{name} {ok}/20 (need {need}, failures: {})",
            failure_list(&rows, 1024)
        ));
        if ok < need {
            failed.push(name);
        }
    }
    let detail = format!("{}; {:.0} s", lines.join("; "), start.elapsed().as_secs_f64());
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn batch_trend(cache: &mut Suites) -> Outcome {
    let rows = tray_rows(cache)?;
    let summaries = summarize(&rows).map_err(|e| e.to_string())?;
    let table: Vec<String> = summaries
        .iter()
        .map(|s| {
            format!(
                "N={} success {:.0}% t_task {:.2} s",
                s.batch_size, s.success_rate_pct, s.t_task_mean_s
            )
        })
        .collect();
    let detail = table.join("; ");
    let rate_ok = summaries
        .windows(2)
        .all(|w| w[1].success_rate_pct >= w[0].success_rate_pct);
    let time_ok = summaries.windows(2).all(|w| w[1].t_task_mean_s <= w[0].t_task_mean_s);
    ensure(rate_ok, || format!("success rate decreases: {detail}"))?;
    ensure(time_ok, || format!("mean task time increases: {detail}"))?;
    Ok(detail)
}

fn cycle_time() -> Outcome {
    let cfg = scenario("tray");
    let scene = cfg.scene().map_err(|e| e.to_string())?;
    let goal = cfg.sample_goal(0);
    let task = cfg.task_for(&scene, &goal).map_err(|e| e.to_string())?;
    let threads = rayon::current_num_threads();
    let mut table = Vec::new();
    let mut at_1024 = f64::NAN;
    for n in [256, 512, 1024, 2048] {
        let mut planner = cfg.planner;
        planner.horizon = 20;
        planner.mppi.iterations = 2;
        planner.mppi.samples = n;
        let mut runner =
            EpisodeRunner::new(&scene, &task, &planner, 60.0, 5, Timing::Wall).map_err(|e| e.to_string())?;
        for _ in 0..6 {
            if runner.cycle().map_err(|e| e.to_string())? == CycleOutcome::Finished {
                break;
            }
        }
        let t = &runner.record().t_comp;
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        if n == 1024 {
            at_1024 = mean;
        }
        table.push(format!("n={n}: {:.1} ms", mean * 1e3));
    }
    let detail = format!("H=20, M=2, {threads} worker thread(s): {}", table.join(", "));
    ensure(at_1024 < 1.0, || {
        format!("cycle at n=1024 takes {at_1024:.3} s; {detail}")
    })?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// Metrics and determinism

fn record(success: bool, t_task: f64, t_comp: &[f64]) -> EpisodeRecord {
    EpisodeRecord {
        success,
        failure_reason: if success {
            FailureReason::None
        } else {
            FailureReason::Timeout
        },
        t_task,
        t_comp: t_comp.to_vec(),
        seed: 0,
        phase_trace: Vec::new(),
        cost_trace: Vec::new(),
    }
}

fn metric_formulas() -> Outcome {
    let tol = 1e-12;
    let err = |e: bimanual_bench::BenchError| e.to_string();
    let pair = compute_metrics(&[record(true, 3.0, &[0.05, 0.07])]).map_err(err)?;
    close("mean t_comp", pair.t_comp_mean, 0.06, tol)?;
    close("std t_comp", pair.t_comp_std, 0.01, tol)?;

    let mut records: Vec<EpisodeRecord> = (0..20).map(|i| record(i >= 2, 10.0, &[0.1])).collect();
    let m = compute_metrics(&records).map_err(err)?;
    close("success rate", m.success_rate, 90.0, tol)?;
    close("std of equal task times", m.t_task_std, 0.0, tol)?;

    // Task times 2,4,4,4,5,5,7,9: mean 5, population deviation 2.
    // Steps pooled across runs: {0.1, 0.3} and {0.2}: mean 0.2, deviation sqrt(2/3)/10.
    let times = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
    records = times
        .iter()
        .enumerate()
        .map(|(i, t)| record(i % 4 != 0, *t, &[]))
        .collect();
    records[0].t_comp = vec![0.1, 0.3];
    records[1].t_comp = vec![0.2];
    let m = compute_metrics(&records).map_err(err)?;
    close("success rate 6/8", m.success_rate, 75.0, tol)?;
    close("mean t_task", m.t_task_mean, 5.0, tol)?;
    close("std t_task", m.t_task_std, 2.0, tol)?;
    close("pooled mean t_comp", m.t_comp_mean, 0.2, tol)?;
    close("pooled std t_comp", m.t_comp_std, (2.0f64 / 3.0).sqrt() / 10.0, tol)?;
    ensure(m.n_steps == 3, || format!("pooled {} steps, expected 3", m.n_steps))?;

    records.reverse();
    let r = compute_metrics(&records).map_err(err)?;
    ensure(r == m, || "metrics depend on record order".into())?;
    ensure(compute_metrics(&[]).is_err(), || "empty input accepted".into())?;
    Ok("fixtures reproduce rate, means and population deviations at 1e-12".into())
}

fn determinism() -> Outcome {
    let mut cfg = scenario("tray");
    cfg.n_runs = 3;
    cfg.batch_sizes = vec![64, 128];
    cfg.timeout_s = 2.0;
    cfg.timing = Timing::Off;
    let mut outputs = Vec::new();
    for threads in [1, 4, 1] {
        let rows = run_episodes(&cfg, SuiteOptions { threads: Some(threads) }, &quiet).map_err(|e| e.to_string())?;
        let summary = summarize(&rows).map_err(|e| e.to_string())?;
        outputs.push((
            episodes_csv(&rows).map_err(|e| e.to_string())?,
            summary_csv(&summary).map_err(|e| e.to_string())?,
        ));
    }
    ensure(outputs.windows(2).all(|w| w[0] == w[1]), || {
        "CSV bytes differ between runs".into()
    })?;
    Ok(format!(
        "3 suite runs (1, 4, 1 threads) give identical episode ({} B) and summary ({} B) files",
        outputs[0].0.len(),
        outputs[0].1.len()
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut cache = Suites { tray: None };
    type Criterion<'a> = (&'a str, Box<dyn FnMut(&mut Suites) -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("qp oracle equivalence", Box::new(|_| qp_oracle())),
        ("qp projection properties", Box::new(|_| qp_properties())),
        ("mppi analytic convergence", Box::new(|_| mppi_convergence())),
        ("update rule examples", Box::new(|_| update_rules())),
        ("cost formula hand checks", Box::new(|_| cost_hand_checks())),
        ("barrier semantics", Box::new(|_| barrier_iff())),
        ("end-to-end toy tasks", Box::new(end_to_end)),
        ("batch-size trend", Box::new(batch_trend)),
        ("planning cycle time", Box::new(|_| cycle_time())),
        ("metric formulas", Box::new(|_| metric_formulas())),
        ("csv determinism", Box::new(|_| determinism())),
    ];
    let mut failures = 0;
    for (name, mut run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run(&mut cache) {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
