//! Individual cost terms. Each is a sum over time steps and is non-negative.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trajectory::{geodesic_unchecked, Quat};

/// Discrete-time barrier plus penetration count over a distance sequence.
///
/// `rows[k][b]` is the signed distance of pair `b` at step `k`. The barrier
/// term charges `max(-d[k+1] + (1 - gamma) d[k], 0)` for every consecutive
/// pair of steps; the indicator term adds one for every negative entry.
pub fn collision_cost<R: AsRef<[f64]>>(rows: &[R], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let width = rows.first().map_or(0, |r| r.as_ref().len());
    if rows.iter().any(|r| r.as_ref().len() != width) {
        return Err(invalid("distance rows must have equal length"));
    }
    Ok(collision_cost_masked(rows, gamma, None))
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")))
    }
}

/// [`collision_cost`] restricted to the columns where `keep` is true.
pub fn collision_cost_masked<R: AsRef<[f64]>>(rows: &[R], gamma: f64, keep: Option<&[bool]>) -> f64 {
    let kept = |b: usize| keep.is_none_or(|k| k[b]);
    let mut barrier = 0.0;
    for pair in rows.windows(2) {
        let (now, next) = (pair[0].as_ref(), pair[1].as_ref());
        for (b, (d0, d1)) in now.iter().zip(next).enumerate() {
            if kept(b) {
                barrier += (-d1 + (1.0 - gamma) * d0).max(0.0);
            }
        }
    }
    let mut hits = 0usize;
    for row in rows {
        hits += row
            .as_ref()
            .iter()
            .enumerate()
            .filter(|(b, d)| kept(*b) && **d < 0.0)
            .count();
    }
    barrier + hits as f64
}

/// `sum_k |theta_k - home|`.
pub fn joint_deviation_cost<R: AsRef<[f64]>>(thetas: &[R], home: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for row in thetas {
        let row = row.as_ref();
        if row.len() != home.len() {
            return Err(Error::DimensionMismatch {
                expected: home.len(),
                got: row.len(),
            });
        }
        total += row.iter().zip(home).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    }
    Ok(total)
}

/// Subset of the world axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axes {
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl Axes {
    pub const Z: Axes = Axes {
        x: false,
        y: false,
        z: true,
    };
    pub const YZ: Axes = Axes {
        x: false,
        y: true,
        z: true,
    };

    pub fn is_empty(&self) -> bool {
        !(self.x || self.y || self.z)
    }

    fn restrict(&self, v: &Vector3<f64>) -> f64 {
        let pick = |on: bool, c: f64| if on { c * c } else { 0.0 };
        (pick(self.x, v.x) + pick(self.y, v.y) + pick(self.z, v.z)).sqrt()
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: a, got: b })
    }
}

/// `sum_k |(p1_k - p2_k) restricted to axes|`.
pub fn axis_alignment_cost(p1: &[Vector3<f64>], p2: &[Vector3<f64>], axes: Axes) -> Result<f64> {
    if axes.is_empty() {
        return Err(invalid("axis set must not be empty"));
    }
    check_lengths(p1.len(), p2.len())?;
    Ok(p1.iter().zip(p2).map(|(a, b)| axes.restrict(&(a - b))).sum())
}

/// `sqrt(sum_k ((p1_k - p2_k) . (v1_k - v2_k))^2)`.
pub fn relative_velocity_cost(
    p1: &[Vector3<f64>],
    p2: &[Vector3<f64>],
    v1: &[Vector3<f64>],
    v2: &[Vector3<f64>],
) -> Result<f64> {
    check_lengths(p1.len(), p2.len())?;
    check_lengths(p1.len(), v1.len())?;
    check_lengths(p1.len(), v2.len())?;
    let sum: f64 = (0..p1.len())
        .map(|k| {
            let dot = (p1[k] - p2[k]).dot(&(v1[k] - v2[k]));
            dot * dot
        })
        .sum();
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    Full,
    XOnly,
}

/// `sum_k |p_k - target|`, or `sum_k |x_k - x_target|` in x-only mode.
pub fn position_target_cost(p: &[Vector3<f64>], target: &Vector3<f64>, mode: NormMode) -> f64 {
    match mode {
        NormMode::Full => p.iter().map(|pk| (pk - target).norm()).sum(),
        NormMode::XOnly => p.iter().map(|pk| (pk.x - target.x).abs()).sum(),
    }
}

/// `sum_k 2 acos |<q_k, target>|`.
pub fn orientation_target_cost(q: &[Quat], target: &Quat) -> Result<f64> {
    target.check_unit()?;
    for qk in q {
        qk.check_unit()?;
    }
    Ok(orientation_sum(q, target))
}

pub(crate) fn orientation_sum(q: &[Quat], target: &Quat) -> f64 {
    q.iter().map(|qk| geodesic_unchecked(qk, target)).sum()
}

/// Half the sum of both arms' orientation costs.
pub fn dual_orientation_cost(q1: &[Quat], q2: &[Quat], t1: &Quat, t2: &Quat) -> Result<f64> {
    check_lengths(q1.len(), q2.len())?;
    Ok(0.5 * (orientation_target_cost(q1, t1)? + orientation_target_cost(q2, t2)?))
}

/// Half the sum of both arms' position costs.
pub fn dual_position_cost(
    p1: &[Vector3<f64>],
    p2: &[Vector3<f64>],
    t1: &Vector3<f64>,
    t2: &Vector3<f64>,
) -> Result<f64> {
    check_lengths(p1.len(), p2.len())?;
    Ok(0.5 * (position_target_cost(p1, t1, NormMode::Full) + position_target_cost(p2, t2, NormMode::Full)))
}

/// `sum_k (|p1_k - p2_k| - l)^2`.
pub fn ee_distance_cost(p1: &[Vector3<f64>], p2: &[Vector3<f64>], l: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(invalid("end-effector distance must be positive"));
    }
    check_lengths(p1.len(), p2.len())?;
    Ok(p1
        .iter()
        .zip(p2)
        .map(|(a, b)| {
            let e = (a - b).norm() - l;
            e * e
        })
        .sum())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(invalid("epsilon must be positive"))
    }
}

/// `sum_k |c_k - (p_ball - (0, 0, eps))|` with `c_k` the end-effector midpoint.
pub fn eef_obj_alignment_cost(
    p1: &[Vector3<f64>],
    p2: &[Vector3<f64>],
    p_ball: &Vector3<f64>,
    epsilon: f64,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_lengths(p1.len(), p2.len())?;
    let target = p_ball - Vector3::new(0.0, 0.0, epsilon);
    Ok(p1.iter().zip(p2).map(|(a, b)| ((a + b) * 0.5 - target).norm()).sum())
}

/// `sum_k |c_k + (0, 0, eps) - p_target|`.
pub fn obj_target_cost(p1: &[Vector3<f64>], p2: &[Vector3<f64>], p_target: &Vector3<f64>, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_lengths(p1.len(), p2.len())?;
    let lift = Vector3::new(0.0, 0.0, epsilon);
    Ok(p1
        .iter()
        .zip(p2)
        .map(|(a, b)| ((a + b) * 0.5 + lift - p_target).norm())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn collision_examples() {
        assert!((collision_cost(&[[1.0], [0.85]], 0.1).unwrap() - 0.05).abs() < 1e-12);
        assert!((collision_cost(&[[-0.01], [-0.01]], 0.1).unwrap() - 2.001).abs() < 1e-12);
        assert_eq!(collision_cost(&[[1.0, 2.0], [1.5, 2.0], [3.0, 2.5]], 0.1).unwrap(), 0.0);
        assert!(collision_cost(&[[1.0]], 1.0).is_err());
        assert!(collision_cost(&[vec![1.0], vec![1.0, 2.0]], 0.5).is_err());
    }

    #[test]
    fn masked_columns_are_ignored() {
        let rows = [[1.0, -0.5], [0.5, -0.5]];
        let all = collision_cost_masked(&rows, 0.1, None);
        let first = collision_cost_masked(&rows, 0.1, Some(&[true, false]));
        assert!((first - 0.4).abs() < 1e-12);
        assert!(all > first);
    }

    #[test]
    fn alignment_and_velocity_examples() {
        let p1 = vec![v(0.0, 0.0, 0.1); 5];
        let p2 = vec![v(0.0, 0.0, 0.0); 5];
        assert!((axis_alignment_cost(&p1, &p2, Axes::Z).unwrap() - 0.5).abs() < 1e-12);
        let px = vec![v(0.3, 0.0, 0.0); 2];
        assert_eq!(axis_alignment_cost(&px, &p2[..2], Axes::YZ).unwrap(), 0.0);
        let none = Axes {
            x: false,
            y: false,
            z: false,
        };
        assert!(axis_alignment_cost(&p1, &p2, none).is_err());
        let c = relative_velocity_cost(
            &[v(1.0, 0.0, 0.0)],
            &[v(0.0, 0.0, 0.0)],
            &[v(0.2, 0.0, 0.0)],
            &[v(0.0, 0.0, 0.0)],
        )
        .unwrap();
        assert!((c - 0.2).abs() < 1e-12);
    }

    #[test]
    fn target_examples() {
        let p = vec![v(0.2, 0.0, 0.0); 3];
        assert!((position_target_cost(&p, &Vector3::zeros(), NormMode::Full) - 0.6).abs() < 1e-12);
        let py = vec![v(0.0, 0.4, 0.0); 3];
        assert_eq!(position_target_cost(&py, &Vector3::zeros(), NormMode::XOnly), 0.0);
        let q90 = Quat::from_axis_angle(Vector3::z(), std::f64::consts::FRAC_PI_2);
        let c = orientation_target_cost(&[q90; 4], &Quat::IDENTITY).unwrap();
        assert!((c - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(orientation_target_cost(&[-q90; 3], &q90).unwrap(), 0.0);
        assert!(orientation_target_cost(&[Quat::new(2.0, 0.0, 0.0, 0.0)], &Quat::IDENTITY).is_err());
    }

    #[test]
    fn distance_and_midpoint_examples() {
        let c = ee_distance_cost(&[v(0.0, 0.0, 0.0)], &[v(0.46, 0.0, 0.0)], 0.36).unwrap();
        assert!((c - 0.01).abs() < 1e-12);
        let p1 = vec![v(-0.1, 0.0, 0.05), v(-0.1, 0.0, 0.05)];
        let p2 = vec![v(0.1, 0.0, 0.05), v(0.1, 0.0, 0.05)];
        let c = eef_obj_alignment_cost(&p1, &p2, &v(0.0, 0.0, 0.05), 0.05).unwrap();
        assert!((c - 0.10).abs() < 1e-12);
        assert_eq!(eef_obj_alignment_cost(&p2, &p1, &v(0.0, 0.0, 0.05), 0.05).unwrap(), c);
        assert!(obj_target_cost(&p1, &p2, &Vector3::zeros(), 0.0).is_err());
    }
}
