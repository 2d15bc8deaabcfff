//! Differential-drive kinematics in the (w, v) velocity space.
//!
//! Motion is modelled as constant-(v, w) circular arcs. The admissible set is
//! the kinematic triangle `v/v_max + |w|/w_max <= 1` with `v >= 0`, and the
//! dynamic window is the rhombus reachable from the current velocity within
//! one control period.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{wrap_angle, Scalar};

/// Below this angular rate, arcs are integrated as straight lines.
pub const STRAIGHT_W_EPS: f64 = 1e-6;
/// Below this lateral offset, the goal is treated as dead ahead.
pub const STRAIGHT_GOAL_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("goal coincides with the robot position")]
    ZeroDistance,
    #[error("invalid kinodynamic limits: {0}")]
    InvalidLimits(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    /// Heading, always wrapped to (-pi, pi].
    pub theta: T,
}

impl<T: Scalar> Pose<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> (T, T) {
        (self.x, self.y)
    }

    /// Express a world-frame point in this pose's frame.
    pub fn to_local(&self, px: T, py: T) -> (T, T) {
        let (s, c) = self.theta.sin_cos();
        let dx = px - self.x;
        let dy = py - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Express a point given in this pose's frame in the world frame.
    pub fn to_world(&self, lx: T, ly: T) -> (T, T) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * lx - s * ly, self.y + s * lx + c * ly)
    }

    pub fn distance_to(&self, px: T, py: T) -> T {
        (px - self.x).hypot(py - self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity<T> {
    /// Linear velocity, m/s.
    pub v: T,
    /// Angular velocity, rad/s.
    pub w: T,
}

impl<T: Scalar> Velocity<T> {
    pub fn new(v: T, w: T) -> Self {
        Self { v, w }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }
}

/// Velocity and acceleration bounds of the robot plus its control period.
/// The minimum linear velocity is always zero (no reverse motion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinodynamicLimits<T> {
    pub v_max: T,
    pub w_max: T,
    pub a_v_max: T,
    pub a_w_max: T,
    pub dt: T,
}

impl<T: Scalar> Default for KinodynamicLimits<T> {
    fn default() -> Self {
        Self {
            v_max: T::lit(0.7),
            w_max: T::lit(1.5),
            a_v_max: T::lit(0.7),
            a_w_max: T::lit(2.0),
            dt: T::lit(0.2),
        }
    }
}

impl<T: Scalar> KinodynamicLimits<T> {
    pub fn v_min(&self) -> T {
        T::zero()
    }

    /// Largest change of linear velocity in one control period.
    pub fn dv(&self) -> T {
        self.a_v_max * self.dt
    }

    /// Largest change of angular velocity in one control period.
    pub fn dw(&self) -> T {
        self.a_w_max * self.dt
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let positive = |x: T| x > T::zero() && x.is_finite();
        if !positive(self.v_max) {
            return Err(KinematicsError::InvalidLimits("v_max must be positive"));
        }
        if !positive(self.w_max) {
            return Err(KinematicsError::InvalidLimits("w_max must be positive"));
        }
        if !positive(self.a_v_max) || !positive(self.a_w_max) {
            return Err(KinematicsError::InvalidLimits("accelerations must be positive"));
        }
        if !positive(self.dt) {
            return Err(KinematicsError::InvalidLimits("dt must be positive"));
        }
        Ok(())
    }

    /// Whether `cmd` is reachable from `cur` in one control period, with
    /// `tol` slack on each component.
    pub fn within_envelope(&self, cur: Velocity<T>, cmd: Velocity<T>, tol: T) -> bool {
        (cmd.v - cur.v).abs() <= self.dv() + tol && (cmd.w - cur.w).abs() <= self.dw() + tol
    }
}

/// Exact integration of a constant-(v, w) command over `dt`.
pub fn propagate_unicycle<T: Scalar>(pose: Pose<T>, cmd: Velocity<T>, dt: T) -> Pose<T> {
    debug_assert!(dt > T::zero());
    let Velocity { v, w } = cmd;
    if w.abs() >= T::lit(STRAIGHT_W_EPS) {
        // Same as r*(sin th1 - sin th0), -r*(cos th1 - cos th0), written
        // with half angles so that small rates do not cancel.
        let half = w * dt / T::lit(2.0);
        let chord = T::lit(2.0) * v / w * half.sin();
        let mid = pose.theta + half;
        Pose {
            x: pose.x + chord * mid.cos(),
            y: pose.y + chord * mid.sin(),
            theta: wrap_angle(pose.theta + w * dt),
        }
    } else {
        let (s, c) = pose.theta.sin_cos();
        Pose {
            x: pose.x + v * c * dt,
            y: pose.y + v * s * dt,
            theta: wrap_angle(pose.theta + w * dt),
        }
    }
}

/// Kinematic triangle membership.
pub fn admissible<T: Scalar>(vel: Velocity<T>, lim: &KinodynamicLimits<T>) -> bool {
    vel.v >= T::zero()
        && vel.v <= lim.v_max
        && vel.w.abs() <= lim.w_max
        && vel.v / lim.v_max + vel.w.abs() / lim.w_max <= T::one()
}

/// Move `target` toward `center` until it is admissible: clamp each axis,
/// then scale the offset from `center` radially. `center` must be admissible.
pub fn project_admissible<T: Scalar>(
    center: Velocity<T>,
    target: Velocity<T>,
    lim: &KinodynamicLimits<T>,
) -> Velocity<T> {
    let clamped = Velocity::new(
        target.v.max(T::zero()).min(lim.v_max),
        target.w.max(-lim.w_max).min(lim.w_max),
    );
    if admissible(clamped, lim) {
        return clamped;
    }
    let dv = clamped.v - center.v;
    let dw = clamped.w - center.w;
    // Triangle as the intersection of v/vm + w/wm <= 1 and v/vm - w/wm <= 1.
    let mut s = T::one();
    for sign in [T::one(), -T::one()] {
        let g0 = center.v / lim.v_max + sign * center.w / lim.w_max;
        let g1 = dv / lim.v_max + sign * dw / lim.w_max;
        if g1 > T::zero() {
            s = s.min(((T::one() - g0) / g1).max(T::zero()));
        }
    }
    let mut out = Velocity::new(center.v + s * dv, center.w + s * dw);
    // Rounding can leave the point a few ulps outside the edge.
    let mut shrink = T::epsilon() * T::lit(4.0);
    while !admissible(out, lim) && s > T::zero() {
        s = (s * (T::one() - shrink)).max(T::zero());
        shrink = shrink + shrink;
        out = Velocity::new(center.v + s * dv, center.w + s * dw);
    }
    if !admissible(out, lim) {
        out = center;
    }
    out
}

/// Velocities reachable in one control period, as a clipped rhombus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicWindow<T> {
    pub center: Velocity<T>,
    /// Clipped vertices in action-slot order: +v, -v, +w, -w.
    pub vertices: [Velocity<T>; 4],
}

impl<T: Scalar> DynamicWindow<T> {
    pub fn plus_v(&self) -> Velocity<T> {
        self.vertices[0]
    }
    pub fn minus_v(&self) -> Velocity<T> {
        self.vertices[1]
    }
    pub fn plus_w(&self) -> Velocity<T> {
        self.vertices[2]
    }
    pub fn minus_w(&self) -> Velocity<T> {
        self.vertices[3]
    }

    /// Vertices in boundary order (counter-clockwise in the (w, v) plane
    /// starting at the top): +v, -w, -v, +w.
    pub fn boundary(&self) -> [Velocity<T>; 4] {
        [self.plus_v(), self.minus_w(), self.minus_v(), self.plus_w()]
    }
}

pub fn dynamic_window<T: Scalar>(cur: Velocity<T>, lim: &KinodynamicLimits<T>) -> DynamicWindow<T> {
    debug_assert!(admissible(cur, lim), "current velocity must be admissible");
    let dv = lim.dv();
    let dw = lim.dw();
    let raw = [
        Velocity::new(cur.v + dv, cur.w),
        Velocity::new(cur.v - dv, cur.w),
        Velocity::new(cur.v, cur.w + dw),
        Velocity::new(cur.v, cur.w - dw),
    ];
    DynamicWindow {
        center: cur,
        vertices: raw.map(|p| project_admissible(cur, p, lim)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurvatureKind {
    Straight,
    ArcLeft,
    ArcRight,
}

/// The circle through the goal that is tangent to the robot heading at the
/// robot position. In velocity space it is the line `v = radius * w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GoalArc<T> {
    Straight,
    /// Signed radius, positive when the goal is to the left.
    Arc { radius: T },
}

impl<T: Scalar> GoalArc<T> {
    pub fn kind(&self) -> CurvatureKind {
        match *self {
            GoalArc::Straight => CurvatureKind::Straight,
            GoalArc::Arc { radius } if radius > T::zero() => CurvatureKind::ArcLeft,
            GoalArc::Arc { .. } => CurvatureKind::ArcRight,
        }
    }

    pub fn radius(&self) -> T {
        match *self {
            GoalArc::Straight => T::infinity(),
            GoalArc::Arc { radius } => radius,
        }
    }

    /// Signed residual of the goal line; zero on the line.
    pub fn residual(&self, vel: Velocity<T>) -> T {
        match *self {
            GoalArc::Straight => vel.w,
            GoalArc::Arc { radius } => vel.v - radius * vel.w,
        }
    }

    /// Point of the goal line with linear velocity `v`.
    pub fn at_linear(&self, v: T) -> Velocity<T> {
        match *self {
            GoalArc::Straight => Velocity::new(v, T::zero()),
            GoalArc::Arc { radius } => Velocity::new(v, v / radius),
        }
    }
}

pub fn goal_arc<T: Scalar>(goal_x: T, goal_y: T) -> Result<GoalArc<T>, KinematicsError> {
    if goal_x.hypot(goal_y) <= T::lit(1e-9) {
        return Err(KinematicsError::ZeroDistance);
    }
    if goal_y.abs() < T::lit(STRAIGHT_GOAL_EPS) {
        return Ok(GoalArc::Straight);
    }
    let radius = (goal_x * goal_x + goal_y * goal_y) / (T::lit(2.0) * goal_y);
    Ok(GoalArc::Arc { radius })
}

/// Where the goal line crosses the window boundary, as (min-v, max-v) points.
pub fn goal_line_window_intersection<T: Scalar>(
    dw: &DynamicWindow<T>,
    arc: &GoalArc<T>,
) -> Option<(Velocity<T>, Velocity<T>)> {
    let poly = dw.boundary();
    let mut hits: Vec<Velocity<T>> = Vec::with_capacity(4);
    for k in 0..4 {
        let p = poly[k];
        let q = poly[(k + 1) % 4];
        let fp = arc.residual(p);
        let fq = arc.residual(q);
        if fp == T::zero() {
            hits.push(p);
        }
        if fq == T::zero() {
            hits.push(q);
        }
        if (fp < T::zero() && fq > T::zero()) || (fp > T::zero() && fq < T::zero()) {
            let t = fp / (fp - fq);
            let mut hit = Velocity::new(p.v + t * (q.v - p.v), p.w + t * (q.w - p.w));
            if let GoalArc::Straight = arc {
                hit.w = T::zero();
            }
            hits.push(hit);
        }
    }
    let lo = hits
        .iter()
        .copied()
        .min_by(|a, b| a.v.partial_cmp(&b.v).unwrap().then(a.w.partial_cmp(&b.w).unwrap()))?;
    let hi = hits
        .iter()
        .copied()
        .max_by(|a, b| a.v.partial_cmp(&b.v).unwrap().then(a.w.partial_cmp(&b.w).unwrap()))?;
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lim() -> KinodynamicLimits<f64> {
        KinodynamicLimits::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn propagate_straight_and_rest() {
        let p = propagate_unicycle(Pose::new(0.0, 0.0, 0.0), Velocity::new(0.5, 0.0), 0.2);
        assert!(close(p.x, 0.1, 1e-15) && p.y == 0.0 && p.theta == 0.0);
        let start = Pose::new(1.2, -3.4, 2.5);
        assert_eq!(propagate_unicycle(start, Velocity::zero(), 0.2), start);
    }

    #[test]
    fn propagate_arc_matches_closed_form() {
        let p = propagate_unicycle(Pose::new(0.0, 0.0, 0.0), Velocity::new(0.5, 1.0), 0.2);
        assert!(close(p.x, 0.099_334_665, 1e-8), "{p:?}");
        assert!(close(p.y, 0.009_966_711, 1e-8), "{p:?}");
        assert!(close(p.theta, 0.2, 1e-15));
    }

    #[test]
    fn arc_converges_to_line_for_tiny_rate() {
        let start = Pose::new(0.3, -0.7, 0.9);
        // True lateral deviation is v*dt^2*w/2 = 8e-9 m here.
        let arc = propagate_unicycle(start, Velocity::new(0.4, 1e-6), 0.2);
        let line = propagate_unicycle(start, Velocity::new(0.4, 0.0), 0.2);
        assert!(arc.distance_to(line.x, line.y) < 1e-8);
    }

    #[test]
    fn half_steps_compose() {
        let start: Pose<f64> = Pose::new(-1.0, 2.0, 3.0);
        for cmd in [Velocity::new(0.5, 1.3), Velocity::new(0.7, 0.0), Velocity::new(0.2, -1.5)] {
            let once = propagate_unicycle(start, cmd, 0.2);
            let twice = propagate_unicycle(propagate_unicycle(start, cmd, 0.1), cmd, 0.1);
            assert!((once.x - twice.x).abs() < 1e-12);
            assert!((once.y - twice.y).abs() < 1e-12);
            assert!(crate::scalar::wrap_angle(once.theta - twice.theta).abs() < 1e-12);
        }
    }

    #[test]
    fn propagate_works_in_single_precision() {
        let p = propagate_unicycle(Pose::<f32>::new(0.0, 0.0, 0.0), Velocity::new(0.5, 1.0), 0.2);
        assert!((p.x - 0.099_334_67).abs() < 1e-6);
    }

    #[test]
    fn triangle_membership() {
        let l = lim();
        assert!(admissible(Velocity::new(l.v_max, 0.0), &l));
        assert!(!admissible(Velocity::new(l.v_max, l.w_max), &l));
        assert!(admissible(Velocity::new(l.v_max / 2.0, l.w_max / 2.0), &l));
        assert!(!admissible(Velocity::new(-0.01, 0.0), &l));
        assert!(!admissible(Velocity::new(0.0, 1.6), &l));
    }

    #[test]
    fn window_vertices_from_acceleration_bounds() {
        let dw = dynamic_window(Velocity::new(0.3, 0.0), &lim());
        let want = [(0.44, 0.0), (0.16, 0.0), (0.3, 0.4), (0.3, -0.4)];
        for (got, (v, w)) in dw.vertices.iter().zip(want) {
            assert!(close(got.v, v, 1e-12) && close(got.w, w, 1e-12), "{got:?}");
        }
    }

    #[test]
    fn window_at_rest_clamps_lower_vertex() {
        let dw = dynamic_window(Velocity::new(0.0, 0.0), &lim());
        assert_eq!(dw.minus_v(), Velocity::new(0.0, 0.0));
    }

    #[test]
    fn window_on_triangle_edge_is_projected_back() {
        let l = lim();
        // (0.35, 0.75) lies on v/0.7 + w/1.5 = 1.
        let dw = dynamic_window(Velocity::new(0.35, 0.75), &l);
        for p in dw.vertices {
            assert!(admissible(p, &l), "{p:?}");
        }
        let edge = dw.plus_v().v / l.v_max + dw.plus_v().w.abs() / l.w_max;
        assert!(close(edge, 1.0, 1e-12));
    }

    #[test]
    fn window_vertices_admissible_for_random_centers() {
        let l = lim();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut n = 0;
        while n < 1000 {
            let c = Velocity::new(rng.random_range(0.0..=l.v_max), rng.random_range(-l.w_max..=l.w_max));
            if !admissible(c, &l) {
                continue;
            }
            n += 1;
            let dw = dynamic_window(c, &l);
            for p in dw.vertices {
                assert!(admissible(p, &l), "{c:?} -> {p:?}");
                assert!((p.v - c.v).abs() <= l.dv() + 1e-12);
                assert!((p.w - c.w).abs() <= l.dw() + 1e-12);
            }
        }
    }

    #[test]
    fn goal_arc_cases() {
        assert_eq!(goal_arc(2.0, 0.0).unwrap(), GoalArc::Straight);
        assert_eq!(goal_arc(1.0, 1.0).unwrap(), GoalArc::Arc { radius: 1.0 });
        assert_eq!(goal_arc(0.0, 1.0).unwrap(), GoalArc::Arc { radius: 0.5 });
        assert_eq!(goal_arc(1.0, -1.0).unwrap().kind(), CurvatureKind::ArcRight);
        assert_eq!(goal_arc(0.0, 0.0), Err(KinematicsError::ZeroDistance));
    }

    /// Closest approach of the arc to the goal: coarse scan, then ternary
    /// refinement around the best sample.
    fn closest_approach(cmd: Velocity<f64>, gx: f64, gy: f64, period: f64) -> f64 {
        let origin = Pose::new(0.0, 0.0, 0.0);
        let dist = |t: f64| propagate_unicycle(origin, cmd, t).distance_to(gx, gy);
        let steps = 20_000;
        let h = period / steps as f64;
        let best = (1..=steps)
            .map(|k| k as f64 * h)
            .min_by(|a, b| dist(*a).partial_cmp(&dist(*b)).unwrap())
            .unwrap();
        let (mut lo, mut hi) = ((best - h).max(1e-9), best + h);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if dist(m1) < dist(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        dist(0.5 * (lo + hi))
    }

    #[test]
    fn goal_arc_passes_through_goal() {
        for (gx, gy) in [(1.0, 1.0), (0.0, 1.0), (2.0, -0.5), (-1.0, 0.4), (3.0, 0.01)] {
            let r: f64 = goal_arc(gx, gy).unwrap().radius();
            let cmd = Velocity::new(0.5, 0.5 / r);
            let period = 2.0 * std::f64::consts::PI * r.abs() / 0.5;
            let miss = closest_approach(cmd, gx, gy, period);
            assert!(miss < 1e-6, "goal ({gx},{gy}) missed by {miss}");
        }
    }

    #[test]
    fn straight_goal_line_crosses_window() {
        let dw = dynamic_window(Velocity::new(0.3, 0.0), &lim());
        let (lo, hi) = goal_line_window_intersection(&dw, &GoalArc::Straight).unwrap();
        assert!(close(lo.v, 0.16, 1e-12) && lo.w == 0.0);
        assert!(close(hi.v, 0.44, 1e-12) && hi.w == 0.0);
    }

    #[test]
    fn distant_goal_line_misses_window() {
        let dw = dynamic_window(Velocity::new(0.6, 0.0), &lim());
        // v = 0.29 w needs |w| >= 1.5 for v >= 0.46.
        let arc = goal_arc(-0.2, 0.5).unwrap();
        assert!(goal_line_window_intersection(&dw, &arc).is_none());
    }

    #[test]
    fn tangent_goal_line_returns_vertex_twice() {
        // Window centred at w = 0.4 only touches w = 0 at its -w vertex.
        let dw = dynamic_window(Velocity::new(0.3, 0.4), &lim());
        let (lo, hi) = goal_line_window_intersection(&dw, &GoalArc::Straight).unwrap();
        assert_eq!(lo, hi);
        assert_eq!(lo, dw.minus_w());
        assert_eq!(lo, Velocity::new(0.3, 0.0));
    }

    #[test]
    fn intersections_lie_on_boundary_and_line() {
        let l = lim();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let c = Velocity::new(rng.random_range(0.0..=l.v_max), rng.random_range(-l.w_max..=l.w_max));
            if !admissible(c, &l) {
                continue;
            }
            let dw = dynamic_window(c, &l);
            let Ok(arc) = goal_arc(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)) else {
                continue;
            };
            let Some((lo, hi)) = goal_line_window_intersection(&dw, &arc) else {
                continue;
            };
            for p in [lo, hi] {
                assert!(arc.residual(p).abs() < 1e-9, "{p:?} off line {arc:?}");
                let poly = dw.boundary();
                let on_edge = (0..4).any(|k| {
                    let a = poly[k];
                    let b = poly[(k + 1) % 4];
                    let cross = (b.v - a.v) * (p.w - a.w) - (b.w - a.w) * (p.v - a.v);
                    let len = (b.v - a.v).hypot(b.w - a.w).max(1e-300);
                    let within = (p.v - a.v) * (b.v - p.v) + (p.w - a.w) * (b.w - p.w) >= -1e-18;
                    (cross / len).abs() < 1e-9 && within
                });
                assert!(on_edge, "{p:?} not on boundary of {dw:?}");
            }
            assert!(lo.v <= hi.v);
        }
    }
}
