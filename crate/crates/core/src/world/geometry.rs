//! Closest-point distances between capsules, spheres and axis-aligned boxes.
//! Signed: positive when separated, negative when penetrating.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Segment `a -> b` swept by a ball of `radius`. A sphere is a capsule with
/// `a == b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Self { a, b, radius }
    }

    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        Self::new(center, center, radius)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
}

/// Distance from `p` to the segment `a -> b`.
pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

/// Distance between segments `p1 -> q1` and `p2 -> q2`.
pub fn segment_segment_distance(p1: &Vector3<f64>, q1: &Vector3<f64>, p2: &Vector3<f64>, q2: &Vector3<f64>) -> f64 {
    const EPS: f64 = 1e-14;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

/// Signed distance from a point to a box (negative inside).
pub fn point_box_signed_distance(p: &Vector3<f64>, b: &Aabb) -> f64 {
    let q = (p - b.center).abs() - b.half_extents;
    let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

pub fn capsule_capsule(c1: &Capsule, c2: &Capsule) -> f64 {
    segment_segment_distance(&c1.a, &c1.b, &c2.a, &c2.b) - c1.radius - c2.radius
}

pub fn capsule_sphere(c: &Capsule, center: &Vector3<f64>, radius: f64) -> f64 {
    point_segment_distance(center, &c.a, &c.b) - c.radius - radius
}

/// Signed distance between a capsule and a box.
///
/// The box signed distance is convex, so its minimum along the segment is
/// found by golden-section search.
pub fn capsule_box(c: &Capsule, b: &Aabb) -> f64 {
    let f = |t: f64| point_box_signed_distance(&(c.a + (c.b - c.a) * t), b);
    if c.a == c.b {
        return f(0.0) - c.radius;
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..48 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let best = f1.min(f2).min(f(0.0)).min(f(1.0));
    best - c.radius
}

/// Signed distance between two boxes: the largest per-axis gap when they
/// overlap on some axis, Euclidean gap otherwise.
pub fn box_box(a: &Aabb, b: &Aabb) -> f64 {
    let gap = (a.center - b.center).abs() - a.half_extents - b.half_extents;
    let outside = Vector3::new(gap.x.max(0.0), gap.y.max(0.0), gap.z.max(0.0)).norm();
    outside + gap.x.max(gap.y).max(gap.z).min(0.0)
}

pub fn box_sphere(b: &Aabb, center: &Vector3<f64>, radius: f64) -> f64 {
    point_box_signed_distance(center, b) - radius
}
