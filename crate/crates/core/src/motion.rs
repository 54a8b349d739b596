//! Reciprocal velocity obstacles and discrete-time robot simulation.
//!
//! Robots are discs following their planned paths. Each step every moving
//! robot computes a preferred velocity toward its next waypoint, then picks
//! the sampled velocity closest to it that lies outside the reciprocal
//! velocity obstacle of every nearby robot. All decisions within a step read
//! the same pre-step snapshot, so the outcome does not depend on robot order.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smoothing::Path;
use crate::workspace::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Timestep in seconds.
    pub dt: f64,
    /// Collision lookahead in seconds.
    pub horizon: f64,
    /// Sampled candidate velocities per decision.
    pub candidates: usize,
    pub waypoint_tol: f64,
    pub arrival_tol: f64,
    pub radius: f64,
    pub pref_speed: f64,
    pub max_speed: f64,
    /// Clearance added to the combined radius when choosing velocities.
    pub safety_margin: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.1,
            horizon: 4.0,
            candidates: 128,
            waypoint_tol: 1.0,
            arrival_tol: 0.5,
            radius: 1.0,
            pref_speed: 5.0,
            max_speed: 5.0,
            safety_margin: 0.25,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("waypoint_tol", self.waypoint_tol),
            ("arrival_tol", self.arrival_tol),
            ("radius", self.radius),
            ("pref_speed", self.pref_speed),
            ("max_speed", self.max_speed),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.safety_margin.is_finite() && self.safety_margin >= 0.0) {
            return Err("safety_margin must be non-negative".into());
        }
        if self.candidates == 0 {
            return Err("candidates must be positive".into());
        }
        if self.pref_speed > self.max_speed {
            return Err("pref_speed must not exceed max_speed".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub position: Point,
    pub velocity: Point,
    pub radius: f64,
    pub pref_speed: f64,
    pub max_speed: f64,
    pub waypoint_index: usize,
    pub arrived: bool,
    /// Robots without a path stand still and do not take part in avoidance.
    pub has_path: bool,
}

impl RobotState {
    pub fn new(id: usize, position: Point, cfg: &SimConfig) -> Self {
        RobotState {
            id,
            position,
            velocity: Point::ZERO,
            radius: cfg.radius,
            pref_speed: cfg.pref_speed,
            max_speed: cfg.max_speed,
            waypoint_index: 0,
            arrived: false,
            has_path: false,
        }
    }

    /// Moving robots share avoidance effort; the rest are static discs.
    pub fn is_responsive(&self) -> bool {
        self.has_path && !self.arrived
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum MotionError {
    #[error("robots {0} and {1} already overlap")]
    AlreadyOverlapping(usize, usize),
}

/// Earliest `t >= 0` with `|velocity * t - offset| <= radius`, if any.
pub fn time_to_collision(offset: Point, velocity: Point, radius: f64) -> Option<f64> {
    let c = offset.norm_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let a = velocity.norm_sq();
    let b = velocity.dot(offset);
    if a == 0.0 || b <= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    Some((b - disc.sqrt()) / a)
}

/// Truncated velocity-obstacle cone of one neighbour, in the velocity space
/// of the deciding robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityObstacle {
    pub apex: Point,
    pub left_ray: Point,
    pub right_ray: Point,
    /// Neighbour centre relative to the deciding robot.
    pub offset: Point,
    pub combined_radius: f64,
    pub horizon: f64,
    /// 2 for reciprocal cones (half the avoidance effort), 1 for a static
    /// or unresponsive neighbour.
    pub scale: f64,
}

impl VelocityObstacle {
    /// Relative velocity implied by choosing `v`.
    fn relative(&self, v: Point) -> Point {
        (v - self.apex) * self.scale
    }

    pub fn half_angle(&self) -> f64 {
        (self.combined_radius / self.offset.norm()).asin()
    }

    /// Whether `v` leads to contact within the horizon.
    pub fn contains(&self, v: Point) -> bool {
        self.time_to_collision(v).is_some_and(|t| t <= self.horizon)
    }

    pub fn time_to_collision(&self, v: Point) -> Option<f64> {
        time_to_collision(self.offset, self.relative(v), self.combined_radius)
    }

    /// Untruncated cone membership: `v - apex` between the two rays.
    pub fn in_cone(&self, v: Point) -> bool {
        let d = v - self.apex;
        self.left_ray.cross(d) <= 0.0 && self.right_ray.cross(d) >= 0.0
    }
}

/// Reciprocal velocity obstacle that `b` induces on `a`: apex at the mean
/// of both velocities, half-angle `asin((r_a + r_b) / |p_b - p_a|)` around
/// the direction to `b`, truncated at `horizon`.
pub fn rvo_cone(a: &RobotState, b: &RobotState, horizon: f64) -> Result<VelocityObstacle, MotionError> {
    cone(a, b, horizon, true, 0.0)
}

/// Cone with the combined radius grown by `margin`, capped at half the
/// current gap so that it stays well defined.
fn cone(
    a: &RobotState,
    b: &RobotState,
    horizon: f64,
    reciprocal: bool,
    margin: f64,
) -> Result<VelocityObstacle, MotionError> {
    let offset = b.position - a.position;
    let dist = offset.norm();
    let contact = a.radius + b.radius;
    if dist <= contact {
        return Err(MotionError::AlreadyOverlapping(a.id, b.id));
    }
    let r = contact + margin.min((dist - contact) / 2.0);
    let half = (r / dist).asin();
    let axis = offset.angle();
    let (apex, scale) = if reciprocal {
        ((a.velocity + b.velocity) * 0.5, 2.0)
    } else {
        (b.velocity, 1.0)
    };
    Ok(VelocityObstacle {
        apex,
        left_ray: Point::from_angle(axis + half),
        right_ray: Point::from_angle(axis - half),
        offset,
        combined_radius: r,
        horizon,
        scale,
    })
}

/// Desired velocity toward the current waypoint. Advances the waypoint index
/// when within `waypoint_tol`, marks arrival within `arrival_tol` of the last
/// waypoint, and never overshoots the goal in one step.
pub fn preferred_velocity(robot: &mut RobotState, path: &Path, cfg: &SimConfig) -> Point {
    if robot.arrived {
        return Point::ZERO;
    }
    let last = path.waypoints.len() - 1;
    loop {
        let idx = robot.waypoint_index.min(last);
        let target = path.waypoints[idx];
        let delta = target - robot.position;
        let d = delta.norm();
        if idx == last {
            if d <= cfg.arrival_tol {
                robot.arrived = true;
                robot.velocity = Point::ZERO;
                return Point::ZERO;
            }
            let speed = robot.pref_speed.min(d / cfg.dt);
            return delta * (speed / d);
        }
        if d <= cfg.waypoint_tol {
            robot.waypoint_index = idx + 1;
            continue;
        }
        return delta * (robot.pref_speed / d);
    }
}

/// Moves past intermediate waypoints that a standing robot makes
/// unreachable, i.e. waypoints within `waypoint_tol` of its disc.
pub fn skip_blocked_waypoints(robot: &mut RobotState, path: &Path, others: &[RobotState], cfg: &SimConfig) {
    let last = path.waypoints.len() - 1;
    while robot.waypoint_index < last {
        let w = path.waypoints[robot.waypoint_index];
        let blocked = others.iter().any(|o| {
            o.id != robot.id && !o.is_responsive() && o.position.dist(w) < o.radius + robot.radius + cfg.waypoint_tol
        });
        if !blocked {
            break;
        }
        robot.waypoint_index += 1;
    }
}

/// Candidate velocities: `v_pref` first, then samples uniform on the disc of
/// radius `max_speed`, with angles measured from the preferred heading so that
/// rotated situations sample rotated candidate sets.
fn candidates<R: Rng + ?Sized>(robot: &RobotState, v_pref: Point, n: usize, rng: &mut R) -> Vec<Point> {
    let heading = if v_pref.norm_sq() > 0.0 { v_pref.angle() } else { 0.0 };
    let mut out = Vec::with_capacity(n + 1);
    out.push(v_pref);
    for _ in 0..n {
        let r = robot.max_speed * rng.gen::<f64>().sqrt();
        let phi = heading + rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        out.push(Point::from_angle(phi) * r);
    }
    out
}

/// Picks the admissible candidate closest to `v_pref`, or, if every
/// candidate lies inside some cone, the one minimising
/// `2 * max_speed / ttc + |v - v_pref|`.
pub fn choose_velocity<R: Rng + ?Sized>(
    robot: &RobotState,
    others: &[RobotState],
    v_pref: Point,
    cfg: &SimConfig,
    rng: &mut R,
) -> Point {
    let range = robot.max_speed * cfg.horizon * 2.0;
    let mut cones = Vec::new();
    let mut intruder: Option<(f64, Point)> = None;
    for other in others {
        if other.id == robot.id {
            continue;
        }
        let d = other.position.dist(robot.position);
        if d > range + robot.radius + other.radius {
            continue;
        }
        match cone(robot, other, cfg.horizon, other.is_responsive(), cfg.safety_margin) {
            Ok(vo) => cones.push(vo),
            Err(MotionError::AlreadyOverlapping(..)) => {
                if intruder.is_none_or(|(bd, _)| d < bd) {
                    intruder = Some((d, other.position));
                }
            }
        }
    }
    if let Some((_, from)) = intruder {
        let away = robot.position - from;
        let dir = if away.norm() > 0.0 {
            away * (1.0 / away.norm())
        } else {
            Point::new(1.0, 0.0)
        };
        return dir * robot.max_speed;
    }
    let set = candidates(robot, v_pref, cfg.candidates, rng);
    if cones.is_empty() {
        return v_pref;
    }
    select_velocity(&set, &cones, v_pref, robot.max_speed)
}

/// Exhaustive scan of a candidate set against a set of cones.
pub fn select_velocity(set: &[Point], cones: &[VelocityObstacle], v_pref: Point, max_speed: f64) -> Point {
    let admissible = set
        .iter()
        .filter(|&&v| cones.iter().all(|c| !c.contains(v)))
        .min_by(|a, b| (**a - v_pref).norm().total_cmp(&(**b - v_pref).norm()));
    if let Some(&v) = admissible {
        return v;
    }
    let weight = 2.0 * max_speed;
    let penalty = |v: Point| {
        let ttc = cones
            .iter()
            .filter_map(|c| c.time_to_collision(v))
            .fold(f64::INFINITY, f64::min);
        let urgency = if ttc <= 0.0 { f64::INFINITY } else { weight / ttc };
        urgency + (v - v_pref).norm()
    };
    *set.iter()
        .min_by(|a, b| penalty(**a).total_cmp(&penalty(**b)))
        .expect("candidate set contains v_pref")
}

/// Robots and their (optional) paths.
#[derive(Debug, Clone)]
pub struct World {
    pub robots: Vec<RobotState>,
    pub paths: Vec<Option<Path>>,
    pub step: usize,
}

impl World {
    /// Places one robot at the start of each path; robots without a path are
    /// placed at the matching entry of `fallback`.
    pub fn new(paths: Vec<Option<Path>>, fallback: &[Point], cfg: &SimConfig) -> Self {
        let robots = paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let at = p.as_ref().map_or_else(|| fallback[i], Path::start);
                let mut r = RobotState::new(i, at, cfg);
                r.has_path = p.is_some();
                r
            })
            .collect();
        World { robots, paths, step: 0 }
    }

    pub fn all_arrived(&self) -> bool {
        self.robots.iter().all(|r| r.arrived)
    }

    /// Pairs of robots whose discs overlap.
    pub fn overlaps(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, a) in self.robots.iter().enumerate() {
            for b in &self.robots[i + 1..] {
                if a.position.dist(b.position) < a.radius + b.radius {
                    out.push((a.id, b.id));
                }
            }
        }
        out
    }
}

fn substream(seed: u64, robot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(robot as u64 + 1);
    rng
}

/// Zeroes the velocity of any robot whose straight motion over the next
/// `dt` would bring it into contact with another, repeating until the step
/// is conflict-free. Pairs that already overlap are left to the separation
/// fallback. Returns the number of robots stopped.
pub fn stop_conflicting(robots: &mut [RobotState], dt: f64) -> usize {
    let mut stopped = 0;
    loop {
        let mut changed = false;
        for i in 0..robots.len() {
            for j in i + 1..robots.len() {
                let (a, b) = (&robots[i], &robots[j]);
                let offset = b.position - a.position;
                let contact = a.radius + b.radius;
                if offset.norm() <= contact {
                    continue;
                }
                let hit = time_to_collision(offset, a.velocity - b.velocity, contact).is_some_and(|t| t <= dt);
                if hit {
                    for k in [i, j] {
                        if robots[k].velocity != Point::ZERO {
                            robots[k].velocity = Point::ZERO;
                            stopped += 1;
                        }
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            return stopped;
        }
    }
}

/// Advances the world by one timestep. Every decision reads the pre-step
/// snapshot and draws from a per-robot random stream.
pub fn step_simulation<R: Rng + ?Sized>(world: &mut World, cfg: &SimConfig, rng: &mut R) {
    let seed: u64 = rng.gen();
    let snapshot = world.robots.clone();
    for (slot, robot) in world.robots.iter_mut().enumerate() {
        let Some(path) = &world.paths[robot.id] else {
            robot.velocity = Point::ZERO;
            continue;
        };
        if robot.arrived {
            robot.velocity = Point::ZERO;
            continue;
        }
        skip_blocked_waypoints(robot, path, &snapshot, cfg);
        let v_pref = preferred_velocity(robot, path, cfg);
        if robot.arrived {
            continue;
        }
        let mut stream = substream(seed, robot.id);
        let v = choose_velocity(&snapshot[slot], &snapshot, v_pref, cfg, &mut stream);
        robot.velocity = v.clamp_norm(robot.max_speed);
    }
    stop_conflicting(&mut world.robots, cfg.dt);
    for robot in &mut world.robots {
        robot.position = robot.position + robot.velocity * cfg.dt;
    }
    world.step += 1;
}

/// Result of running a world until arrival or the step budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub steps: usize,
    /// Robot pairs found overlapping, summed over steps.
    pub collisions: usize,
    pub arrived: bool,
}

/// Steps until every robot with a path has arrived (robots without one are
/// ignored) or `max_steps` is reached, auditing overlaps after every step.
/// When `log` is given, appends one `step id x y vx vy` line per robot and step.
pub fn simulate<R: Rng + ?Sized>(
    world: &mut World,
    cfg: &SimConfig,
    max_steps: usize,
    rng: &mut R,
    mut log: Option<&mut String>,
) -> SimOutcome {
    let mut collisions = 0;
    let done = |w: &World| w.robots.iter().all(|r| r.arrived || !r.has_path);
    while !done(world) && world.step < max_steps {
        step_simulation(world, cfg, rng);
        collisions += world.overlaps().len();
        if let Some(out) = log.as_deref_mut() {
            for r in &world.robots {
                let _ = writeln!(
                    out,
                    "{} {} {:.6} {:.6} {:.6} {:.6}",
                    world.step, r.id, r.position.x, r.position.y, r.velocity.x, r.velocity.y
                );
            }
        }
    }
    SimOutcome {
        steps: world.step,
        collisions,
        arrived: done(world),
    }
}
