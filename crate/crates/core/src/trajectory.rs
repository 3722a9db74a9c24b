//! Joint-space sequences and the small numeric toolkit shared by every other
//! module: forward finite differences, explicit Euler integration of velocity
//! sequences, and the sign-insensitive quaternion geodesic.
//!
//! Sequences are stored row-major, one row per time step and one column per
//! joint. The two arms are concatenated along the column axis, arm 1 first.
//!
//! Quaternions are scalar-first `(w, x, y, z)` everywhere in this crate.

use std::ops::{Index, IndexMut};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on `| |q| - 1 |` accepted for unit quaternions.
pub const UNIT_QUAT_TOLERANCE: f64 = 1e-9;

/// Combined joint vector of both arms (positions or one of their derivatives).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct JointVector(Vec<f64>);

impl JointVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("joint vector must have at least one entry"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dof: usize) -> Self {
        Self(vec![0.0; dof.max(1)])
    }

    pub fn filled(dof: usize, value: f64) -> Self {
        Self(vec![value; dof.max(1)])
    }

    pub fn dof(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Splits the combined vector into the per-arm halves. Requires an even
    /// dimension.
    pub fn split_arms(&self) -> Result<(&[f64], &[f64])> {
        if !self.0.len().is_multiple_of(2) {
            return Err(invalid(format!(
                "bimanual joint vector needs an even dimension, got {}",
                self.0.len()
            )));
        }
        Ok(self.0.split_at(self.0.len() / 2))
    }
}

impl TryFrom<Vec<f64>> for JointVector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<JointVector> for Vec<f64> {
    fn from(v: JointVector) -> Self {
        v.0
    }
}

impl Index<usize> for JointVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Row-major `rows x dof` matrix of joint values, one row per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    rows: usize,
    dof: usize,
    data: Vec<f64>,
}

/// The decision variable of the planner: one velocity row per horizon step.
pub type VelocitySequence = JointTrajectory;

impl JointTrajectory {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dof = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dof) {
            return Err(invalid("ragged rows"));
        }
        Self::from_flat(rows.len(), dof, rows.concat())
    }

    pub fn from_flat(rows: usize, dof: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || dof == 0 {
            return Err(invalid("trajectory needs at least one row and one column"));
        }
        if data.len() != rows * dof {
            return Err(Error::DimensionMismatch {
                expected: rows * dof,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory"));
        }
        Ok(Self { rows, dof, data })
    }

    pub fn zeros(rows: usize, dof: usize) -> Self {
        Self::filled(rows, dof, 0.0)
    }

    pub fn filled(rows: usize, dof: usize, value: f64) -> Self {
        assert!(rows > 0 && dof > 0, "empty trajectory");
        Self {
            rows,
            dof,
            data: vec![value; rows * dof],
        }
    }

    /// Builds a trajectory by repeating one row.
    pub fn repeat_row(rows: usize, row: &[f64]) -> Self {
        assert!(rows > 0 && !row.is_empty(), "empty trajectory");
        Self {
            rows,
            dof: row.len(),
            data: row.repeat(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Horizon length when the trajectory is a velocity sequence.
    pub fn horizon(&self) -> usize {
        self.rows
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dof..(k + 1) * self.dof]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dof..(k + 1) * self.dof]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dof)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.row_iter().map(|r| r[j]).collect()
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[k * self.dof + j]
    }

    pub fn set(&mut self, k: usize, j: usize, value: f64) {
        self.data[k * self.dof + j] = value;
    }

    /// Largest absolute entry-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean norm of the flattened difference to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Lower/upper bounds for joint position (order 0) and its first three
/// derivatives (velocity, acceleration, jerk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub lower: [JointVector; 4],
    pub upper: [JointVector; 4],
}

impl DerivativeBounds {
    pub fn new(lower: [JointVector; 4], upper: [JointVector; 4]) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// Symmetric bounds `[-limit, limit]` for orders 1..=3 and the given
    /// position limits, identical for every joint.
    pub fn uniform(dof: usize, position: (f64, f64), velocity: f64, accel: f64, jerk: f64) -> Result<Self> {
        let lo = |v: f64| JointVector::filled(dof, v);
        Self::new(
            [lo(position.0), lo(-velocity), lo(-accel), lo(-jerk)],
            [lo(position.1), lo(velocity), lo(accel), lo(jerk)],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let dof = self.lower[0].dof();
        for r in 0..4 {
            for v in [&self.lower[r], &self.upper[r]] {
                if v.dof() != dof {
                    return Err(Error::DimensionMismatch {
                        expected: dof,
                        got: v.dof(),
                    });
                }
            }
            for j in 0..dof {
                if self.lower[r][j] > self.upper[r][j] {
                    return Err(Error::Infeasible {
                        joint: j,
                        reason: format!("order {r} lower bound exceeds upper bound"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.lower[0].dof()
    }
}

/// Forward finite difference of order 1 or 2, divided by `dt^order`.
///
/// Row `k` of the result is `(s[k+1] - s[k]) / dt` (order 1) or
/// `(s[k+2] - 2 s[k+1] + s[k]) / dt^2` (order 2).
pub fn finite_difference(seq: &JointTrajectory, order: usize, dt: f64) -> Result<JointTrajectory> {
    if !(dt > 0.0) {
        return Err(invalid("dt must be positive"));
    }
    if !(1..=2).contains(&order) {
        return Err(invalid("finite difference order must be 1 or 2"));
    }
    let h = seq.rows();
    if h <= order {
        return Err(invalid(format!("sequence of {h} rows too short for order {order}")));
    }
    let d = seq.dof();
    let mut out = Vec::with_capacity((h - order) * d);
    for k in 0..h - order {
        for j in 0..d {
            let v = match order {
                1 => (seq.get(k + 1, j) - seq.get(k, j)) / dt,
                _ => (seq.get(k + 2, j) - 2.0 * seq.get(k + 1, j) + seq.get(k, j)) / (dt * dt),
            };
            out.push(v);
        }
    }
    JointTrajectory::from_flat(h - order, d, out)
}

/// Explicit Euler integration: row 0 is `theta0`, row `k+1` is
/// `row k + dt * seq[k]`.
pub fn integrate_velocities(theta0: &JointVector, seq: &VelocitySequence, dt: f64) -> Result<JointTrajectory> {
    if !(dt > 0.0) {
        return Err(invalid("dt must be positive"));
    }
    if theta0.dof() != seq.dof() {
        return Err(Error::DimensionMismatch {
            expected: seq.dof(),
            got: theta0.dof(),
        });
    }
    let d = seq.dof();
    let mut data = Vec::with_capacity((seq.rows() + 1) * d);
    data.extend_from_slice(theta0.as_slice());
    for k in 0..seq.rows() {
        for j in 0..d {
            let prev = data[k * d + j];
            data.push(prev + dt * seq.get(k, j));
        }
    }
    JointTrajectory::from_flat(seq.rows() + 1, d, data)
}

/// Scalar-first quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let u = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self::from_unit(&u)
    }

    pub fn from_unit(q: &UnitQuaternion<f64>) -> Self {
        Self::new(q.w, q.i, q.j, q.k)
    }

    pub fn to_unit(self) -> UnitQuaternion<f64> {
        UnitQuaternion::new_unchecked(Quaternion::new(self.w, self.x, self.y, self.z))
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, r: &Quat) -> Quat {
        Quat::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_QUAT_TOLERANCE
    }

    pub fn check_unit(&self) -> Result<()> {
        if self.is_unit() {
            Ok(())
        } else {
            Err(Error::NonUnitQuaternion { norm: self.norm() })
        }
    }
}

impl std::ops::Neg for Quat {
    type Output = Quat;

    fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Rotation angle between two unit quaternions, `2 acos |<q1, q2>|`, in
/// `[0, pi]`. Both inputs must be unit norm. Evaluated as the `atan2` of the
/// vector and scalar parts of `q1* q2`, which stays accurate near 0 and pi.
pub fn quat_geodesic(q1: &Quat, q2: &Quat) -> Result<f64> {
    q1.check_unit()?;
    q2.check_unit()?;
    Ok(geodesic_unchecked(q1, q2))
}

/// [`quat_geodesic`] without the unit-norm check, for hot loops over poses
/// produced by forward kinematics.
#[inline]
pub fn geodesic_unchecked(q1: &Quat, q2: &Quat) -> f64 {
    let v1 = Vector3::new(q1.x, q1.y, q1.z);
    let v2 = Vector3::new(q2.x, q2.y, q2.z);
    let vector = q1.w * v2 - q2.w * v1 - v1.cross(&v2);
    2.0 * vector.norm().atan2(q1.dot(q2).abs())
}

/// Position (meters) and orientation of a rigid frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Quat) -> Result<Self> {
        orientation.check_unit()?;
        Ok(Self { position, orientation })
    }

    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: Quat::IDENTITY,
        }
    }

    pub fn from_isometry(iso: &nalgebra::Isometry3<f64>) -> Self {
        Self {
            position: iso.translation.vector,
            orientation: Quat::from_unit(&iso.rotation),
        }
    }

    pub fn to_isometry(&self) -> nalgebra::Isometry3<f64> {
        nalgebra::Isometry3::from_parts(self.position.into(), self.orientation.to_unit())
    }
}
