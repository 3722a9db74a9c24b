//! Static scene description: two serial arms, manipulable objects, static
//! obstacles, and the registry of collision pairs derived from them.
//!
//! Global frame: `x` points from arm 1 towards arm 2, `z` is up. Both built-in
//! layouts place the arm bases on the `x` axis facing each other.

use std::f64::consts::PI;

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trajectory::{JointVector, Pose, Quat};
use crate::world::geometry::Aabb;

/// One revolute joint followed by a rigid link.
///
/// The joint rotates about `axis` (expressed in the parent frame); the child
/// frame is then translated by `offset`. The link's collision capsule spans
/// the two frame origins with `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub axis: Vector3<f64>,
    pub offset: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub base: Pose,
    pub joints: Vec<JointSpec>,
}

/// Result of forward kinematics for one arm.
#[derive(Debug, Clone)]
pub struct ArmKinematics {
    pub end_effector: Isometry3<f64>,
    /// Frame origins: base, then one per joint (the last is the end-effector).
    pub points: Vec<Vector3<f64>>,
}

impl ArmModel {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn forward(&self, q: &[f64]) -> ArmKinematics {
        debug_assert_eq!(q.len(), self.joints.len());
        let mut iso = self.base.to_isometry();
        let mut points = Vec::with_capacity(self.joints.len() + 1);
        points.push(iso.translation.vector);
        for (joint, &angle) in self.joints.iter().zip(q) {
            let rot = UnitQuaternion::from_axis_angle(&Unit::new_normalize(joint.axis), angle);
            iso.rotation *= rot;
            iso.translation.vector += iso.rotation * joint.offset;
            points.push(iso.translation.vector);
        }
        ArmKinematics {
            end_effector: iso,
            points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Tray,
    Ball,
    Cube,
}

/// Flat tray carried by both arms at two grasp poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraySpec {
    pub pose: Pose,
    pub half_extents: Vector3<f64>,
    /// Grasp poses in the tray frame, one per arm.
    pub grasp: [Pose; 2],
    /// Distance between the grasp points along the carrying axis.
    pub length: f64,
}

impl TraySpec {
    /// World grasp poses for a given tray pose.
    pub fn grasp_world(&self, tray: &Pose) -> [Pose; 2] {
        let t = tray.to_isometry();
        [
            Pose::from_isometry(&(t * self.grasp[0].to_isometry())),
            Pose::from_isometry(&(t * self.grasp[1].to_isometry())),
        ]
    }

    /// Collision capsule endpoints (tray frame) and radius: a segment along
    /// the carrying axis, swept by the half-thickness.
    pub fn capsule_local(&self) -> (Vector3<f64>, Vector3<f64>, f64) {
        let r = self.half_extents.z;
        let half = (self.half_extents.x - r).max(0.0);
        (Vector3::new(-half, 0.0, 0.0), Vector3::new(half, 0.0, 0.0), r)
    }
}

/// Ball lifted by pressing both end-effectors against it slightly below its
/// center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Vertical drop of the contact midpoint below the ball center.
    pub contact_drop: f64,
    /// Distance between the two contact points.
    pub contact_span: f64,
}

impl BallSpec {
    /// Contact span for contacts `drop` below the center of a sphere.
    pub fn span_for(radius: f64, drop: f64) -> f64 {
        2.0 * (radius * radius - drop * drop).max(0.0).sqrt()
    }
}

/// Cube picked by one gripper and handed to the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub center: Vector3<f64>,
    pub half_extent: f64,
    /// Handle point of each gripper, relative to the cube center.
    pub handles: [Vector3<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Obstacle {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    Box {
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
    },
}

impl Obstacle {
    pub fn aabb(&self) -> Option<Aabb> {
        match self {
            Obstacle::Box { center, half_extents } => Some(Aabb {
                center: *center,
                half_extents: *half_extents,
            }),
            Obstacle::Sphere { .. } => None,
        }
    }
}

/// Distances and angles at which the surrogate attaches objects to grippers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttachTolerances {
    pub tray_position: f64,
    pub tray_orientation: f64,
    pub ball_separation: f64,
    pub ball_midpoint: f64,
    pub cube_position: f64,
    /// Latched flags release once an error exceeds this multiple of the
    /// attach tolerance.
    pub release_factor: f64,
}

impl Default for AttachTolerances {
    fn default() -> Self {
        Self {
            tray_position: 0.015,
            tray_orientation: 0.15,
            ball_separation: 0.01,
            ball_midpoint: 0.02,
            cube_position: 0.015,
            release_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub name: String,
    pub arms: [ArmModel; 2],
    pub home: JointVector,
    #[serde(default)]
    pub tray: Option<TraySpec>,
    #[serde(default)]
    pub ball: Option<BallSpec>,
    #[serde(default)]
    pub cube: Option<CubeSpec>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub tolerances: AttachTolerances,
}

/// A collision body of the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Body {
    Link { arm: usize, link: usize },
    Obstacle(usize),
    Object(ObjectKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CollisionPair {
    pub a: Body,
    pub b: Body,
}

/// Pairs excluded from the distance vector.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionMask {
    /// Link-object pairs involving these objects are dropped.
    pub ignore_link_contacts: Vec<ObjectKind>,
}

impl CollisionMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn ignoring(kind: ObjectKind) -> Self {
        Self {
            ignore_link_contacts: vec![kind],
        }
    }

    pub fn keeps(&self, pair: &CollisionPair) -> bool {
        let object = match (pair.a, pair.b) {
            (Body::Link { .. }, Body::Object(k)) | (Body::Object(k), Body::Link { .. }) => Some(k),
            _ => None,
        };
        !matches!(object, Some(k) if self.ignore_link_contacts.contains(&k))
    }
}

impl SceneDescription {
    pub fn dof(&self) -> usize {
        self.arms[0].dof() + self.arms[1].dof()
    }

    pub fn validate(&self) -> Result<()> {
        if self.home.dof() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: self.home.dof(),
            });
        }
        if self.arms[0].dof() == 0 || self.arms[1].dof() == 0 {
            return Err(invalid("both arms need at least one joint"));
        }
        for arm in &self.arms {
            arm.base.orientation.check_unit()?;
            for j in &arm.joints {
                if !(j.radius > 0.0) {
                    return Err(invalid("link radii must be positive"));
                }
                if j.axis.norm() < 1e-12 {
                    return Err(invalid("joint axis must be non-zero"));
                }
            }
        }
        for o in &self.obstacles {
            let ok = match o {
                Obstacle::Sphere { radius, .. } => *radius > 0.0,
                Obstacle::Box { half_extents, .. } => half_extents.iter().all(|h| *h > 0.0),
            };
            if !ok {
                return Err(invalid("obstacle sizes must be positive"));
            }
        }
        if let Some(t) = &self.tray {
            t.pose.orientation.check_unit()?;
            if !(t.length > 0.0) || t.half_extents.iter().any(|h| !(*h > 0.0)) {
                return Err(invalid("tray dimensions must be positive"));
            }
            for g in &t.grasp {
                g.orientation.check_unit()?;
                let inside = (0..3).all(|i| g.position[i].abs() <= t.half_extents[i] + 1e-9);
                if !inside {
                    return Err(invalid("tray grasp points must lie on the tray body"));
                }
            }
        }
        if let Some(b) = &self.ball {
            if !(b.radius > 0.0) || !(b.contact_span > 0.0) || b.contact_drop < 0.0 {
                return Err(invalid("ball radius and contact span must be positive"));
            }
        }
        if let Some(c) = &self.cube {
            if !(c.half_extent > 0.0) {
                return Err(invalid("cube size must be positive"));
            }
        }
        Ok(())
    }

    pub fn objects(&self) -> Vec<ObjectKind> {
        let mut v = Vec::new();
        if self.tray.is_some() {
            v.push(ObjectKind::Tray);
        }
        if self.ball.is_some() {
            v.push(ObjectKind::Ball);
        }
        if self.cube.is_some() {
            v.push(ObjectKind::Cube);
        }
        v
    }

    /// All collision pairs in a fixed order: cross-arm link pairs,
    /// link-obstacle, link-object (the terminal gripper link is allowed to
    /// touch objects), object-obstacle.
    pub fn collision_pairs(&self) -> Vec<CollisionPair> {
        let link = |arm, link| Body::Link { arm, link };
        let mut pairs = Vec::new();
        for i in 0..self.arms[0].dof() {
            for j in 0..self.arms[1].dof() {
                pairs.push(CollisionPair {
                    a: link(0, i),
                    b: link(1, j),
                });
            }
        }
        for arm in 0..2 {
            for l in 0..self.arms[arm].dof() {
                for o in 0..self.obstacles.len() {
                    pairs.push(CollisionPair {
                        a: link(arm, l),
                        b: Body::Obstacle(o),
                    });
                }
            }
        }
        let objects = self.objects();
        for arm in 0..2 {
            for l in 0..self.arms[arm].dof().saturating_sub(1) {
                for &k in &objects {
                    pairs.push(CollisionPair {
                        a: link(arm, l),
                        b: Body::Object(k),
                    });
                }
            }
        }
        for &k in &objects {
            for o in 0..self.obstacles.len() {
                pairs.push(CollisionPair {
                    a: Body::Object(k),
                    b: Body::Obstacle(o),
                });
            }
        }
        pairs
    }

    /// Looks up a built-in scene by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "planar" => Ok(Self::planar()),
            "planar-tray" => Ok(Self::planar_tray()),
            "planar-ball" => Ok(Self::planar_ball()),
            "planar-handover" => Ok(Self::planar_handover()),
            "dual-6dof" => Ok(Self::dual_6dof()),
            other => Err(invalid(format!("unknown built-in scene '{other}'"))),
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 5] =
        ["planar", "planar-tray", "planar-ball", "planar-handover", "dual-6dof"];

    /// Two 3-joint planar arms moving in the `xz` plane, bases 1.2 m apart.
    ///
    /// Every joint rotates about the arm's local `y` axis; at zero angles each
    /// arm points straight up, so the reference end-effector poses are
    /// `(-0.6, 0, 1.02)` and `(0.6, 0, 1.02)` with the gripper axis along `+z`.
    pub fn planar() -> Self {
        let arm = |x: f64, yaw: f64| ArmModel {
            base: Pose {
                position: Vector3::new(x, 0.0, PLANAR_BASE_HEIGHT),
                orientation: Quat::from_axis_angle(Vector3::z(), yaw),
            },
            joints: PLANAR_LINKS
                .iter()
                .zip(PLANAR_RADII)
                .map(|(&l, r)| JointSpec {
                    axis: Vector3::y(),
                    offset: Vector3::new(0.0, 0.0, l),
                    radius: r,
                })
                .collect(),
        };
        let home = [-0.2, 1.4, 1.0, -0.2, 1.4, 1.0];
        Self {
            name: "planar".into(),
            arms: [arm(-0.6, 0.0), arm(0.6, PI)],
            home: JointVector::new(home.to_vec()).expect("finite"),
            tray: None,
            ball: None,
            cube: None,
            obstacles: vec![floor()],
            tolerances: AttachTolerances::default(),
        }
    }

    pub fn planar_tray() -> Self {
        let mut s = Self::planar();
        s.name = "planar-tray".into();
        s.tray = Some(TraySpec {
            pose: Pose {
                position: Vector3::new(0.0, 0.0, 0.30),
                orientation: Quat::IDENTITY,
            },
            half_extents: Vector3::new(0.18, 0.12, 0.01),
            grasp: [
                Pose {
                    position: Vector3::new(-0.18, 0.0, 0.0),
                    orientation: gripper_pointing(0, Vector3::x()),
                },
                Pose {
                    position: Vector3::new(0.18, 0.0, 0.0),
                    orientation: gripper_pointing(1, -Vector3::x()),
                },
            ],
            length: 0.36,
        });
        s.obstacles.push(Obstacle::Sphere {
            center: Vector3::new(0.0, 0.0, 0.95),
            radius: 0.08,
        });
        s
    }

    pub fn planar_ball() -> Self {
        let mut s = Self::planar();
        s.name = "planar-ball".into();
        let (radius, drop) = (0.06, 0.03);
        s.ball = Some(BallSpec {
            center: Vector3::new(-0.12, 0.0, 0.28),
            radius,
            contact_drop: drop,
            contact_span: BallSpec::span_for(radius, drop),
        });
        s.obstacles.push(Obstacle::Box {
            center: Vector3::new(0.04, 0.0, 0.08),
            half_extents: Vector3::new(0.03, 0.2, 0.08),
        });
        s
    }

    pub fn planar_handover() -> Self {
        let mut s = Self::planar();
        s.name = "planar-handover".into();
        s.cube = Some(CubeSpec {
            center: Vector3::new(-0.25, 0.0, 0.25),
            half_extent: 0.025,
            handles: [Vector3::new(0.0, 0.0, 0.05), Vector3::new(0.07, 0.0, 0.05)],
        });
        s.obstacles.push(Obstacle::Sphere {
            center: Vector3::new(0.0, 0.0, 0.85),
            radius: 0.07,
        });
        s.obstacles.push(Obstacle::Sphere {
            center: Vector3::new(0.45, 0.0, 0.12),
            radius: 0.05,
        });
        s
    }

    /// Two 6-joint arms 1.2 m apart facing each other, 4 cm link capsules,
    /// above a table.
    pub fn dual_6dof() -> Self {
        let spec = |axis: Vector3<f64>, z: f64| JointSpec {
            axis,
            offset: Vector3::new(0.0, 0.0, z),
            radius: 0.04,
        };
        let arm = |x: f64, yaw: f64| ArmModel {
            base: Pose {
                position: Vector3::new(x, 0.0, 0.05),
                orientation: Quat::from_axis_angle(Vector3::z(), yaw),
            },
            joints: vec![
                spec(Vector3::z(), 0.163),
                spec(Vector3::y(), 0.425),
                spec(Vector3::y(), 0.392),
                spec(Vector3::y(), 0.100),
                spec(Vector3::z(), 0.100),
                spec(Vector3::y(), 0.100),
            ],
        };
        let home = [0.0, -0.6, 1.6, 0.6, 0.0, 0.0];
        let mut both = home.to_vec();
        both.extend_from_slice(&home);
        Self {
            name: "dual-6dof".into(),
            arms: [arm(-0.6, 0.0), arm(0.6, PI)],
            home: JointVector::new(both).expect("finite"),
            tray: None,
            ball: None,
            cube: None,
            obstacles: vec![
                floor(),
                Obstacle::Sphere {
                    center: Vector3::new(0.0, 0.8, 0.5),
                    radius: 0.1,
                },
            ],
            tolerances: AttachTolerances::default(),
        }
    }
}

/// Link lengths of the planar arms (shoulder-elbow, elbow-wrist, gripper).
pub const PLANAR_LINKS: [f64; 3] = [0.45, 0.40, 0.12];
const PLANAR_RADII: [f64; 3] = [0.03, 0.025, 0.015];
pub const PLANAR_BASE_HEIGHT: f64 = 0.05;

fn floor() -> Obstacle {
    Obstacle::Box {
        center: Vector3::new(0.0, 0.0, -0.05),
        half_extents: Vector3::new(1.5, 0.6, 0.05),
    }
}

/// Orientation of a planar arm's end-effector whose gripper axis (local `z`)
/// points along `dir` in the `xz` plane.
pub fn gripper_pointing(arm: usize, dir: Vector3<f64>) -> Quat {
    let yaw = if arm == 0 { 0.0 } else { PI };
    let local = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -yaw) * dir;
    let pitch = local.x.atan2(local.z);
    let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch);
    Quat::from_unit(&q)
}

/// Isometry of a pose shifted by a world translation.
pub fn translated(pose: &Pose, delta: Vector3<f64>) -> Pose {
    Pose::from_isometry(&(Translation3::from(delta) * pose.to_isometry()))
}
