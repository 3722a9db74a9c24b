//! Projection of sampled velocity sequences onto the derivative-bounded set.
//!
//! Given a raw sample `r` (H x D velocities), the smoother solves
//!
//! ```text
//! min_x  1/2 |x - r|^2
//! s.t.   lower <= A x (+ offset) <= upper
//! ```
//!
//! where the rows of `A` stack, for every joint, the integrated positions
//! (Euler cumulative sums from `theta0`), the velocities themselves, their
//! first forward difference (acceleration) and second forward difference
//! (jerk). Every row touches a single joint, so the problem splits into `D`
//! independent `H`-variable problems. Each is solved exactly with a dual
//! active-set method (Goldfarb-Idnani with an identity Hessian): the
//! unconstrained minimizer is `r` itself, and violated constraints are added
//! one at a time while the active-set factorization is updated with Givens
//! rotations. Raw samples that already satisfy every bound are returned
//! untouched.
//!
//! Inside a solve the rows are rescaled to unit-order stencils (positions by
//! `1/dt`, accelerations by `dt`, jerks by `dt^2`); all public quantities are
//! in physical units.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::parallel::par_map;
use crate::trajectory::{DerivativeBounds, JointVector, VelocitySequence};

/// Solver limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Cap on active-set changes per joint.
    pub max_iterations: usize,
    /// Accepted bound violation in physical units.
    pub feasibility_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            feasibility_tol: 1e-10,
        }
    }
}

/// A raw sample together with everything needed to project it.
#[derive(Debug, Clone)]
pub struct ProjectionProblem {
    pub raw: VelocitySequence,
    pub theta0: JointVector,
    pub bounds: DerivativeBounds,
    pub dt: f64,
}

/// Output of a projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub sequence: VelocitySequence,
    /// Physical-unit multipliers, one per stacked operator row, such that
    /// `sequence - raw = A^T lambda`. Positive entries sit on lower bounds,
    /// negative entries on upper bounds.
    pub multipliers: Vec<f64>,
    /// Total active-set changes over all joints.
    pub iterations: usize,
    /// Set when the iteration cap was hit; the sequence is then the last
    /// iterate and may violate bounds.
    pub degraded: bool,
}

/// The constraint block a stacked row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Position,
    Velocity,
    Acceleration,
    Jerk,
}

/// Sparse stencil of a scaled per-joint row: `(time index, coefficient)`.
#[derive(Debug, Clone)]
enum Stencil {
    /// sum of x[0..k]
    Prefix(usize),
    /// x[k]
    Unit(usize),
    /// x[k+1] - x[k]
    Diff1(usize),
    /// x[k] - 2 x[k+1] + x[k+2]
    Diff2(usize),
}

impl Stencil {
    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Stencil::Prefix(k) => x[..k].iter().sum(),
            Stencil::Unit(k) => x[k],
            Stencil::Diff1(k) => x[k + 1] - x[k],
            Stencil::Diff2(k) => x[k] - 2.0 * x[k + 1] + x[k + 2],
        }
    }

    /// Accumulates `coef * stencil` into `out`.
    #[inline]
    fn axpy(&self, coef: f64, out: &mut [f64]) {
        match *self {
            Stencil::Prefix(k) => out[..k].iter_mut().for_each(|o| *o += coef),
            Stencil::Unit(k) => out[k] += coef,
            Stencil::Diff1(k) => {
                out[k] -= coef;
                out[k + 1] += coef;
            }
            Stencil::Diff2(k) => {
                out[k] += coef;
                out[k + 1] -= 2.0 * coef;
                out[k + 2] += coef;
            }
        }
    }

    /// Dot product of the stencil with a dense column.
    #[inline]
    fn dot(&self, col: &[f64]) -> f64 {
        self.eval(col)
    }

    fn norm_sq(&self) -> f64 {
        match *self {
            Stencil::Prefix(k) => k as f64,
            Stencil::Unit(_) => 1.0,
            Stencil::Diff1(_) => 2.0,
            Stencil::Diff2(_) => 6.0,
        }
    }
}

/// Linear map from the `H*D` velocity unknowns to all stacked constraint rows,
/// with the matching lower/upper bound vectors.
///
/// Row layout, each block ordered step-major (`k * D + joint`):
/// positions `k = 0..=H`, velocities `k = 0..H`, accelerations `k = 0..H-1`,
/// jerks `k = 0..H-2`. The position rows are Euler cumulative sums and so are
/// lower triangular; the derivative rows have bandwidth at most `3 D`.
#[derive(Debug, Clone)]
pub struct BandedConstraintOperator {
    horizon: usize,
    dof: usize,
    dt: f64,
    theta0: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Per-joint scaled stencils, excluding the constant position row k = 0.
    stencils: Vec<Stencil>,
    /// Physical-to-scaled factor and operator-row offset for each stencil.
    stencil_meta: Vec<(f64, usize)>,
}

impl BandedConstraintOperator {
    /// Builds the operator for horizon `h`, `d` joints, start position
    /// `theta0` and uniform-in-time derivative bounds.
    pub fn new(h: usize, d: usize, theta0: &JointVector, bounds: &DerivativeBounds, dt: f64) -> Result<Self> {
        if h < 3 {
            return Err(invalid("horizon must be at least 3 for jerk rows to exist"));
        }
        if d == 0 {
            return Err(invalid("at least one joint is required"));
        }
        if !(dt > 0.0) {
            return Err(invalid("dt must be positive"));
        }
        if theta0.dof() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: theta0.dof(),
            });
        }
        if bounds.dof() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bounds.dof(),
            });
        }
        bounds.validate()?;

        let counts = [h + 1, h, h - 1, h - 2];
        let rows: usize = counts.iter().map(|c| c * d).sum();
        let mut lower = Vec::with_capacity(rows);
        let mut upper = Vec::with_capacity(rows);
        for (order, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                lower.extend_from_slice(bounds.lower[order].as_slice());
                upper.extend_from_slice(bounds.upper[order].as_slice());
            }
        }

        let mut stencils = Vec::new();
        let mut stencil_meta = Vec::new();
        let offsets = block_offsets(h, d);
        for k in 1..=h {
            stencils.push(Stencil::Prefix(k));
            stencil_meta.push((1.0 / dt, offsets[0] + k * d));
        }
        for k in 0..h {
            stencils.push(Stencil::Unit(k));
            stencil_meta.push((1.0, offsets[1] + k * d));
        }
        for k in 0..h - 1 {
            stencils.push(Stencil::Diff1(k));
            stencil_meta.push((dt, offsets[2] + k * d));
        }
        for k in 0..h - 2 {
            stencils.push(Stencil::Diff2(k));
            stencil_meta.push((dt * dt, offsets[3] + k * d));
        }

        Ok(Self {
            horizon: h,
            dof: d,
            dt,
            theta0: theta0.as_slice().to_vec(),
            lower,
            upper,
            stencils,
            stencil_meta,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn row_count(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Block and time index of a stacked row.
    pub fn row_kind(&self, row: usize) -> (RowKind, usize, usize) {
        let offsets = block_offsets(self.horizon, self.dof);
        let kinds = [
            RowKind::Position,
            RowKind::Velocity,
            RowKind::Acceleration,
            RowKind::Jerk,
        ];
        let block = (0..4).rev().find(|&b| row >= offsets[b]).unwrap_or(0);
        let local = row - offsets[block];
        (kinds[block], local / self.dof, local % self.dof)
    }

    /// Narrows the first velocity row so that the first command stays within
    /// one acceleration step of `previous`.
    pub fn anchor_initial_velocity(&mut self, previous: &[f64], bounds: &DerivativeBounds) -> Result<()> {
        if previous.len() != self.dof {
            return Err(Error::DimensionMismatch {
                expected: self.dof,
                got: previous.len(),
            });
        }
        let base = block_offsets(self.horizon, self.dof)[1];
        for (j, &prev) in previous.iter().enumerate() {
            let lo = self.lower[base + j].max(prev + bounds.lower[2][j] * self.dt);
            let hi = self.upper[base + j].min(prev + bounds.upper[2][j] * self.dt);
            if lo > hi {
                return Err(Error::Infeasible {
                    joint: j,
                    reason: format!("previous velocity {prev} cannot be continued within the acceleration bounds"),
                });
            }
            self.lower[base + j] = lo;
            self.upper[base + j] = hi;
        }
        Ok(())
    }

    /// Stacked physical values `A s (+ theta0 on position rows)`.
    pub fn apply(&self, seq: &VelocitySequence) -> Vec<f64> {
        assert_eq!(seq.rows(), self.horizon);
        assert_eq!(seq.dof(), self.dof);
        let (h, d, dt) = (self.horizon, self.dof, self.dt);
        let mut out = Vec::with_capacity(self.row_count());
        let mut pos = self.theta0.clone();
        out.extend_from_slice(&pos);
        for k in 0..h {
            for j in 0..d {
                pos[j] += dt * seq.get(k, j);
            }
            out.extend_from_slice(&pos);
        }
        out.extend_from_slice(seq.as_slice());
        for k in 0..h - 1 {
            for j in 0..d {
                out.push((seq.get(k + 1, j) - seq.get(k, j)) / dt);
            }
        }
        for k in 0..h - 2 {
            for j in 0..d {
                out.push((seq.get(k + 2, j) - 2.0 * seq.get(k + 1, j) + seq.get(k, j)) / (dt * dt));
            }
        }
        out
    }

    /// `A^T lambda` over the velocity unknowns (position offsets excluded).
    pub fn apply_transpose(&self, lambda: &[f64]) -> VelocitySequence {
        assert_eq!(lambda.len(), self.row_count());
        let (h, d) = (self.horizon, self.dof);
        let mut out = vec![0.0; h * d];
        let mut col = vec![0.0; h];
        for j in 0..d {
            col.iter_mut().for_each(|c| *c = 0.0);
            for (stencil, &(scale, row)) in self.stencils.iter().zip(&self.stencil_meta) {
                let l = lambda[row + j];
                if l != 0.0 {
                    stencil.axpy(l / scale, &mut col);
                }
            }
            for k in 0..h {
                out[k * d + j] = col[k];
            }
        }
        VelocitySequence::from_flat(h, d, out).expect("finite multipliers")
    }

    /// Largest bound violation of `seq` over all stacked rows.
    pub fn max_violation(&self, seq: &VelocitySequence) -> f64 {
        self.apply(seq)
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Decides whether any sequence satisfies the bounds, joint by joint.
    pub fn check_feasible(&self, cfg: &SolverConfig) -> Result<()> {
        let vel = block_offsets(self.horizon, self.dof)[1];
        for j in 0..self.dof {
            let mid = 0.5 * (self.lower[vel + j] + self.upper[vel + j]);
            let raw = vec![mid; self.horizon];
            let out = self.solve_joint(j, &raw, cfg)?;
            if out.degraded {
                return Err(Error::Infeasible {
                    joint: j,
                    reason: "feasibility probe did not converge".into(),
                });
            }
        }
        Ok(())
    }

    /// Projects one raw sample.
    pub fn project(&self, raw: &VelocitySequence, cfg: &SolverConfig) -> Result<Projection> {
        if raw.rows() != self.horizon || raw.dof() != self.dof {
            return Err(Error::DimensionMismatch {
                expected: self.horizon * self.dof,
                got: raw.rows() * raw.dof(),
            });
        }
        let (h, d) = (self.horizon, self.dof);
        let mut out = raw.clone();
        let mut multipliers = vec![0.0; self.row_count()];
        let mut iterations = 0;
        let mut degraded = false;
        let mut column = vec![0.0; h];
        for j in 0..d {
            for (k, c) in column.iter_mut().enumerate() {
                *c = raw.get(k, j);
            }
            let sol = self.solve_joint(j, &column, cfg)?;
            iterations += sol.iterations;
            degraded |= sol.degraded;
            if sol.changed {
                for k in 0..h {
                    out.set(k, j, sol.x[k]);
                }
            }
            for (c, u) in sol.active.iter().zip(&sol.u) {
                let (scale, row) = self.stencil_meta[c / 2];
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                multipliers[row + j] += sign * u * scale;
            }
        }
        Ok(Projection {
            sequence: out,
            multipliers,
            iterations,
            degraded,
        })
    }

    /// Projects a batch of raw samples sharing this operator. The result at
    /// index `i` only depends on `raws[i]`.
    pub fn project_batch(&self, raws: &[VelocitySequence], cfg: &SolverConfig) -> Vec<Result<Projection>> {
        par_map(raws, |raw| self.project(raw, cfg))
    }

    /// Scaled bounds `(lo, hi, tol)` of stencil `i` for joint `j`.
    #[inline]
    fn scaled_bounds(&self, i: usize, j: usize, tol: f64) -> (f64, f64, f64) {
        let (scale, row) = self.stencil_meta[i];
        let (mut lo, mut hi) = (self.lower[row + j], self.upper[row + j]);
        if let Stencil::Prefix(_) = self.stencils[i] {
            lo -= self.theta0[j];
            hi -= self.theta0[j];
        }
        (lo * scale, hi * scale, (tol * scale).max(1e-13))
    }

    fn solve_joint(&self, j: usize, raw: &[f64], cfg: &SolverConfig) -> Result<JointSolution> {
        let p0 = self.theta0[j];
        let (plo, phi) = (self.lower[j], self.upper[j]);
        if p0 < plo - cfg.feasibility_tol || p0 > phi + cfg.feasibility_tol {
            return Err(Error::Infeasible {
                joint: j,
                reason: format!("start position {p0} outside [{plo}, {phi}]"),
            });
        }
        let m = self.stencils.len();
        let bounds: Vec<(f64, f64, f64)> = (0..m).map(|i| self.scaled_bounds(i, j, cfg.feasibility_tol)).collect();
        let mut solver = DualActiveSet::new(raw);
        solver.run(&self.stencils, &bounds, cfg.max_iterations, j)
    }
}

fn block_offsets(h: usize, d: usize) -> [usize; 4] {
    let pos = 0;
    let vel = pos + (h + 1) * d;
    let acc = vel + h * d;
    let jerk = acc + (h - 1) * d;
    [pos, vel, acc, jerk]
}

struct JointSolution {
    x: Vec<f64>,
    /// Constraint ids `2 * stencil + side` (side 0 = lower, 1 = upper).
    active: Vec<usize>,
    u: Vec<f64>,
    iterations: usize,
    degraded: bool,
    changed: bool,
}

/// Goldfarb-Idnani dual active-set method specialised to `G = I`.
///
/// `J` (column-major, n x n) is orthogonal and `R` (upper triangular, q x q)
/// satisfies `N = J[:, ..q] R` for the active normals `N`.
struct DualActiveSet {
    n: usize,
    x: Vec<f64>,
    j: Vec<f64>,
    r: Vec<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
    d: Vec<f64>,
    rvec: Vec<f64>,
    z: Vec<f64>,
}

impl DualActiveSet {
    fn new(raw: &[f64]) -> Self {
        let n = raw.len();
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            j[i * n + i] = 1.0;
        }
        Self {
            n,
            x: raw.to_vec(),
            j,
            r: vec![0.0; n * n],
            active: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            d: vec![0.0; n],
            rvec: vec![0.0; n],
            z: vec![0.0; n],
        }
    }

    fn col(&self, k: usize) -> &[f64] {
        &self.j[k * self.n..(k + 1) * self.n]
    }

    /// Slack `n_c . x - b_c` of constraint id `c`.
    #[inline]
    fn slack(&self, stencils: &[Stencil], bounds: &[(f64, f64, f64)], c: usize) -> f64 {
        let v = stencils[c / 2].eval(&self.x);
        let (lo, hi, _) = bounds[c / 2];
        if c.is_multiple_of(2) {
            v - lo
        } else {
            hi - v
        }
    }

    fn most_violated(&self, stencils: &[Stencil], bounds: &[(f64, f64, f64)]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut running = 0.0;
        for (i, st) in stencils.iter().enumerate() {
            let v = match *st {
                // prefix sums are evaluated incrementally; stencils are
                // ordered Prefix(1), Prefix(2), ...
                Stencil::Prefix(k) => {
                    running += self.x[k - 1];
                    running
                }
                _ => st.eval(&self.x),
            };
            let (lo, hi, tol) = bounds[i];
            let norm = st.norm_sq().sqrt();
            for (side, s) in [(0usize, v - lo), (1usize, hi - v)] {
                if s >= -tol {
                    continue;
                }
                let c = 2 * i + side;
                if self.active.contains(&c) {
                    continue;
                }
                let score = s / norm;
                if best.is_none_or(|(_, b)| score < b) {
                    best = Some((c, score));
                }
            }
        }
        best
    }

    fn run(
        &mut self,
        stencils: &[Stencil],
        bounds: &[(f64, f64, f64)],
        cap: usize,
        joint: usize,
    ) -> Result<JointSolution> {
        let n = self.n;
        let mut iterations = 0;
        let mut changed = false;
        let mut degraded = false;

        'outer: while let Some((p, _)) = self.most_violated(stencils, bounds) {
            changed = true;
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let stencil = &stencils[p / 2];
            let mut s_p = self.slack(stencils, bounds, p);
            let mut u_p = 0.0;
            loop {
                if iterations >= cap {
                    degraded = true;
                    break 'outer;
                }
                let q = self.active.len();
                // d = J^T n_p
                for k in 0..n {
                    self.d[k] = sign * stencil.dot(self.col(k));
                }
                // z = J2 J2^T n_p, and its curvature along n_p
                self.z.iter_mut().for_each(|v| *v = 0.0);
                let mut zn = 0.0;
                for k in q..n {
                    let dk = self.d[k];
                    zn += dk * dk;
                    let col = &self.j[k * n..(k + 1) * n];
                    for (zi, ci) in self.z.iter_mut().zip(col) {
                        *zi += dk * ci;
                    }
                }
                // r = R^{-1} d[..q]
                for i in (0..q).rev() {
                    let mut acc = self.d[i];
                    for c in i + 1..q {
                        acc -= self.r[c * n + i] * self.rvec[c];
                    }
                    self.rvec[i] = acc / self.r[i * n + i];
                }
                let mut t1 = f64::INFINITY;
                let mut drop_at = None;
                for i in 0..q {
                    if self.rvec[i] > 1e-14 {
                        let ratio = self.u[i] / self.rvec[i];
                        if ratio < t1 {
                            t1 = ratio;
                            drop_at = Some(i);
                        }
                    }
                }
                let full = zn > 1e-14 * stencil.norm_sq();
                let t2 = if full { -s_p / zn } else { f64::INFINITY };
                let t = t1.min(t2);
                if !t.is_finite() {
                    return Err(Error::Infeasible {
                        joint,
                        reason: "active bounds admit no sequence".into(),
                    });
                }
                iterations += 1;
                if !full {
                    for i in 0..q {
                        self.u[i] -= t * self.rvec[i];
                    }
                    u_p += t;
                    self.drop(drop_at.expect("finite partial step"));
                    continue;
                }
                for (xi, zi) in self.x.iter_mut().zip(&self.z) {
                    *xi += t * zi;
                }
                for i in 0..q {
                    self.u[i] -= t * self.rvec[i];
                }
                u_p += t;
                if t2 <= t1 {
                    self.add(p, u_p);
                    break;
                }
                self.drop(drop_at.expect("finite partial step"));
                s_p = self.slack(stencils, bounds, p);
            }
        }

        Ok(JointSolution {
            x: std::mem::take(&mut self.x),
            active: std::mem::take(&mut self.active),
            u: std::mem::take(&mut self.u),
            iterations,
            degraded,
            changed,
        })
    }

    /// Appends constraint `p`, using the `d = J^T n_p` of the current step.
    fn add(&mut self, p: usize, u_p: f64) {
        let n = self.n;
        let q = self.active.len();
        for k in (q + 1..n).rev() {
            let (a, b) = (self.d[k - 1], self.d[k]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            self.d[k - 1] = h;
            self.d[k] = 0.0;
            rotate_columns(&mut self.j, n, k - 1, k, c, s);
        }
        for i in 0..=q {
            self.r[q * n + i] = self.d[i];
        }
        self.active.push(p);
        self.u.push(u_p);
    }

    /// Removes the active constraint at position `l`.
    fn drop(&mut self, l: usize) {
        let n = self.n;
        let q = self.active.len();
        for c in l..q - 1 {
            for i in 0..=c + 1 {
                self.r[c * n + i] = self.r[(c + 1) * n + i];
            }
        }
        for i in 0..n {
            self.r[(q - 1) * n + i] = 0.0;
        }
        for k in l..q - 1 {
            let (a, b) = (self.r[k * n + k], self.r[k * n + k + 1]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for col in k..q - 1 {
                let (rk, rk1) = (self.r[col * n + k], self.r[col * n + k + 1]);
                self.r[col * n + k] = c * rk + s * rk1;
                self.r[col * n + k + 1] = -s * rk + c * rk1;
            }
            self.r[k * n + k + 1] = 0.0;
            rotate_columns(&mut self.j, n, k, k + 1, c, s);
        }
        self.active.remove(l);
        self.u.remove(l);
    }
}

/// `(J_a, J_b) <- (c J_a + s J_b, -s J_a + c J_b)`.
#[inline]
fn rotate_columns(j: &mut [f64], n: usize, a: usize, b: usize, c: f64, s: f64) {
    debug_assert!(a < b);
    let (left, right) = j.split_at_mut(b * n);
    let ca = &mut left[a * n..(a + 1) * n];
    let cb = &mut right[..n];
    for (x, y) in ca.iter_mut().zip(cb.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa + s * yb;
        *y = -s * xa + c * yb;
    }
}

/// Projects a single problem, building its operator on the fly.
pub fn project(problem: &ProjectionProblem, cfg: &SolverConfig) -> Result<Projection> {
    let op = BandedConstraintOperator::new(
        problem.raw.rows(),
        problem.raw.dof(),
        &problem.theta0,
        &problem.bounds,
        problem.dt,
    )?;
    op.project(&problem.raw, cfg)
}

/// Projects problems that share horizon, start, bounds and step. Per-problem
/// errors are returned in place without aborting the batch.
pub fn project_batch(problems: &[ProjectionProblem], cfg: &SolverConfig) -> Result<Vec<Result<Projection>>> {
    let Some(first) = problems.first() else {
        return Ok(Vec::new());
    };
    for p in &problems[1..] {
        if p.raw.rows() != first.raw.rows()
            || p.raw.dof() != first.raw.dof()
            || p.theta0 != first.theta0
            || p.bounds != first.bounds
            || p.dt != first.dt
        {
            return Err(invalid("batched problems must share horizon, start, bounds and dt"));
        }
    }
    let op = BandedConstraintOperator::new(
        first.raw.rows(),
        first.raw.dof(),
        &first.theta0,
        &first.bounds,
        first.dt,
    )?;
    let raws: Vec<_> = problems.iter().map(|p| p.raw.clone()).collect();
    Ok(op.project_batch(&raws, cfg))
}
