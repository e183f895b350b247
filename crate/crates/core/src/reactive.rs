//! Continuous-time grounding: the sensor model, the collision-free
//! convergent velocity law, differential-drive and grasp-contact kinematics,
//! and the per-action execution loop.
//!
//! The velocity law steers toward the Euclidean projection of the goal onto
//! a local convex freespace: the sensing disk cut by one separating
//! half-plane per nearby obstacle surface, each placed at half the current
//! clearance. Pursuit of the projected goal strictly shrinks the distance to
//! the goal for convex, well-separated obstacles.

use crate::geometry::{self, Polygon, Shape};
use crate::interface::{self, Action, NavCommand};
use crate::scene::WorldState;
use crate::topology::{self, TopologyError, TopologyResult};
use crate::vec2::{wrap_angle, Vec2};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReactiveError {
    #[error("grasp contact Jacobian is singular: zero contact offset")]
    SingularJacobian,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Interface(#[from] interface::InterfaceError),
}

/// Robot rigid placement plus gripper state.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotPose {
    pub position: Vec2,
    /// heading, wrapped to (-pi, pi]
    pub theta: f64,
    pub gripper: bool,
    pub carried: Option<String>,
}

/// One sensed boundary fragment of an unknown obstacle.
#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    /// index into the scenario's unknown obstacle list
    pub source: usize,
    /// boundary sample points within sensor range
    pub points: Vec<Vec2>,
}

/// Output of the range sensor: familiar obstacles localize whole and
/// permanently, unknown obstacles contribute boundary fragments only.
#[derive(Clone, Debug)]
pub struct SensorReading {
    pub localized_familiar: std::collections::BTreeSet<usize>,
    pub unknown_fragments: Vec<Fragment>,
    pub range: f64,
}

/// Boundary samples per full circle or ring when fragmenting unknown
/// obstacles.
const FRAGMENT_SAMPLES: usize = 64;

/// Sense from the given pose: familiar obstacles whose boundary comes within
/// range join the (monotone) localized set; unknown obstacles yield the
/// boundary points inside the sensing disk.
pub fn sense(world: &WorldState, pose: &RobotPose) -> SensorReading {
    let x = pose.position;
    let range = world.scenario.robot.sensor_range;
    let mut localized = world.discovered.clone();
    for (i, p) in world.scenario.familiar_obstacles.iter().enumerate() {
        if localized.contains(&i) {
            continue;
        }
        if geometry::signed_distance(p, x) <= range {
            localized.insert(i);
        }
    }
    let mut fragments = Vec::new();
    for (i, s) in world.scenario.unknown_obstacles.iter().enumerate() {
        let points: Vec<Vec2> = match s {
            Shape::Disk(d) => (0..FRAGMENT_SAMPLES)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / FRAGMENT_SAMPLES as f64;
                    d.center + Vec2::from_angle(t) * d.radius
                })
                .filter(|p| p.dist(x) <= range)
                .collect(),
            Shape::Poly(p) => p
                .rings()
                .flat_map(|ring| sample_ring(ring, FRAGMENT_SAMPLES))
                .filter(|p| p.dist(x) <= range)
                .collect(),
        };
        if !points.is_empty() {
            fragments.push(Fragment { source: i, points });
        }
    }
    SensorReading {
        localized_familiar: localized,
        unknown_fragments: fragments,
        range,
    }
}

fn sample_ring(ring: &[Vec2], samples: usize) -> Vec<Vec2> {
    let n = ring.len();
    let mut seg_len = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        let l = ring[i].dist(ring[(i + 1) % n]);
        seg_len.push(l);
        total += l;
    }
    if total <= 0.0 {
        return ring.to_vec();
    }
    let mut out = Vec::with_capacity(samples);
    let step = total / samples as f64;
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..samples {
        let s = k as f64 * step;
        while s > seg_start + seg_len[seg] && seg + 1 < n {
            seg_start += seg_len[seg];
            seg += 1;
        }
        let t = ((s - seg_start) / seg_len[seg]).clamp(0.0, 1.0);
        out.push(ring[seg].lerp(ring[(seg + 1) % n], t));
    }
    out
}

/// The grasp-contact Jacobian: maps unicycle inputs (v, w) to the velocity
/// of the pair center offset `d_c` ahead of the wheel axis.
#[derive(Clone, Copy, Debug)]
pub struct GraspJacobian {
    pub matrix: [[f64; 2]; 2],
    d_c: f64,
}

pub fn grasp_jacobian(theta: f64, d_c: f64) -> Result<GraspJacobian, ReactiveError> {
    if d_c == 0.0 {
        return Err(ReactiveError::SingularJacobian);
    }
    let (s, c) = theta.sin_cos();
    Ok(GraspJacobian {
        matrix: [[c, -d_c * s], [s, d_c * c]],
        d_c,
    })
}

impl GraspJacobian {
    pub fn det(&self) -> f64 {
        self.d_c
    }

    /// Pair-center velocity under the unicycle input (v, w).
    pub fn apply(&self, v: f64, w: f64) -> Vec2 {
        let m = &self.matrix;
        Vec2::new(m[0][0] * v + m[0][1] * w, m[1][0] * v + m[1][1] * w)
    }

    /// Unicycle input (v, w) reproducing the desired pair-center velocity.
    pub fn inverse_apply(&self, vhat: Vec2) -> (f64, f64) {
        let m = &self.matrix;
        let det = self.d_c;
        let v = (m[1][1] * vhat.x - m[0][1] * vhat.y) / det;
        let w = (-m[1][0] * vhat.x + m[0][0] * vhat.y) / det;
        (v, w)
    }
}

/// One separating half-plane: points p with n . (p - c) <= offset are free.
#[derive(Clone, Copy, Debug)]
struct HalfPlane {
    normal: Vec2,
    offset: f64,
}

/// Build the local convex freespace constraints around the plan center:
/// one half-plane per nearby obstacle surface at half the current clearance.
fn local_constraints(world: &WorldState, reading: &SensorReading, c: Vec2) -> Vec<HalfPlane> {
    let r_eff = world.effective_radius();
    let horizon = reading.range;
    let mut out = Vec::new();
    let mut push = |surface_point: Vec2, extra_radius: f64| {
        let delta = surface_point - c;
        let d = delta.norm();
        if d - extra_radius - r_eff > horizon {
            return;
        }
        if d <= 1e-12 {
            return;
        }
        let clearance = d - extra_radius - r_eff;
        out.push(HalfPlane {
            normal: delta / d,
            offset: clearance / 2.0,
        });
    };
    // workspace boundary
    push(
        geometry::closest_boundary_point(&world.scenario.workspace, c),
        0.0,
    );
    // localized familiar obstacles
    for &i in &reading.localized_familiar {
        let p = &world.scenario.familiar_obstacles[i];
        push(geometry::closest_boundary_point(p, c), 0.0);
    }
    // unknown obstacle fragments: closest sample per fragment
    for frag in &reading.unknown_fragments {
        if let Some(best) = frag
            .points
            .iter()
            .min_by(|a, b| a.dist(c).total_cmp(&b.dist(c)))
        {
            push(*best, 0.0);
        }
    }
    // movable objects (known positions), except the carried one
    for (id, &center) in &world.movable_centers {
        if world.robot.carried.as_deref() == Some(id.as_str()) {
            continue;
        }
        push(center, world.movable_radius(id));
    }
    out
}

/// Euclidean projection of `g` onto the intersection of the half-planes
/// around `c` and the sensing disk, by cyclic projection.
fn project_goal(c: Vec2, g: Vec2, constraints: &[HalfPlane], horizon: f64) -> Vec2 {
    let mut p = g;
    for _ in 0..60 {
        let mut moved = 0.0;
        // sensing disk
        let d = p - c;
        if d.norm() > horizon {
            let q = c + d.normalized() * horizon;
            moved += q.dist(p);
            p = q;
        }
        for h in constraints {
            let excess = h.normal.dot(p - c) - h.offset;
            if excess > 0.0 {
                let q = p - h.normal * excess;
                moved += excess;
                p = q;
            }
        }
        if moved < 1e-9 {
            break;
        }
    }
    p
}

/// Compute the bounded velocity command pursuing the projection of the goal
/// onto the local convex freespace. Fully actuated pair dynamics are mapped
/// through the contact Jacobian while carrying; otherwise unicycle pursuit
/// with proportional heading control.
pub fn control_step(
    world: &WorldState,
    goal: Vec2,
    reading: &SensorReading,
    _enclosing: &Polygon,
) -> (f64, f64) {
    let params = &world.scenario.params;
    let c = world.plan_center();
    let constraints = local_constraints(world, reading, c);
    let target = project_goal(c, goal, &constraints, reading.range);
    let error = target - c;
    if error.norm() < 1e-9 {
        return (0.0, 0.0);
    }
    let (v, w) = if let Some(id) = &world.robot.carried {
        let d_c = world.scenario.robot.radius + world.movable_radius(id);
        let jac = grasp_jacobian(world.robot.theta, d_c).expect("positive contact offset");
        let mut vhat = error * params.k_v;
        if vhat.norm() > params.v_max {
            vhat = vhat.normalized() * params.v_max;
        }
        jac.inverse_apply(vhat)
    } else {
        let alpha = wrap_angle(error.angle() - world.robot.theta);
        let v = params.k_v * error.norm() * alpha.cos();
        let w = params.k_theta * alpha;
        (v, w)
    };
    (
        v.clamp(-params.v_max, params.v_max),
        w.clamp(-params.omega_max, params.omega_max),
    )
}

/// Outcome of executing one grounded action.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionOutcome {
    Achieved,
    Infeasible(String),
    FixRequired(Vec<String>),
}

/// What kind of termination an action has.
#[derive(Clone, Debug)]
pub enum ActionClass {
    /// drive the robot (or pair) to the goal point
    Goto,
    /// approach the object boundary, align the gripper, engage
    Grasp { object: String },
    /// carry the object to the goal, then disengage
    Deliver { object: String },
    /// carry the object toward the goal; stop early once the separation
    /// condition becomes satisfied during the push
    Disassemble { object: String, min_sep: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    ApproachGrasp,
    Align,
    Navigate,
}

/// Per-tick output of the executor: the velocity command to integrate and
/// an outcome once the action finishes or fails.
#[derive(Clone, Debug)]
pub struct TickResult {
    pub command: (f64, f64),
    pub outcome: Option<ActionOutcome>,
}

/// Ticks between full topology re-checks while nothing changes.
const TOPOLOGY_PERIOD: usize = 50;
/// Stuck detection window, seconds.
const STUCK_WINDOW: f64 = 5.0;

/// Resumable execution of one grounded action: the simulator calls `tick`
/// once per control period and integrates the returned command.
pub struct ActionExecutor {
    pub command: NavCommand,
    pub class: ActionClass,
    enclosing: Polygon,
    intrusions: Vec<Polygon>,
    grasp_goal: Option<Vec2>,
    phase: Phase,
    history: VecDeque<(f64, Vec2)>,
    ticks_since_topology: usize,
    sep_was_unsatisfied: bool,
    pub last_topology: Option<TopologyResult>,
}

impl ActionExecutor {
    /// Ground an action into an executor. Runs one topology check to locate
    /// the robot's freespace component (needed for grasp points) and to
    /// initialize the enclosing freespace.
    pub fn start(action: &Action, world: &WorldState) -> Result<ActionExecutor, ReactiveError> {
        let r_eff = world.effective_radius();
        let (enclosing0, intrusions) = enclosing_and_intrusions(&world.scenario.workspace, r_eff);
        let movables = world.dilated_movables(r_eff);
        let mut localized = world.dilated_localized(r_eff);
        localized.extend(intrusions.iter().cloned());
        // a provisional check against the full eroded workspace locates the
        // robot's component for grounding
        let probe = topology::topology_check(
            world.plan_center(),
            world.plan_center(),
            &enclosing0,
            &movables,
            &localized,
        )?;
        let command = interface::action_to_command(action, world, &probe.freespace_group)?;
        let class = match action {
            Action::Move { .. } => ActionClass::Goto,
            Action::Grasp { object } => ActionClass::Grasp {
                object: object.clone(),
            },
            Action::Release { object, .. } => ActionClass::Deliver {
                object: object.clone(),
            },
            Action::Disassemble { object, .. } => ActionClass::Disassemble {
                object: object.clone(),
                min_sep: interface::disassembly_separation(world, &[], object),
            },
        };
        let mut ex = ActionExecutor::with_command(command, class, world, enclosing0, intrusions);
        // ground the approach point for grasping phases against the probed
        // freespace component, not the bare hull
        if ex.phase == Phase::ApproachGrasp {
            let obj = ex.target_object().unwrap().to_string();
            ex.grasp_goal = Some(interface::grasp_point(world, &obj, &probe.freespace_group)?);
        }
        Ok(ex)
    }

    pub fn with_command(
        command: NavCommand,
        class: ActionClass,
        world: &WorldState,
        enclosing: Polygon,
        intrusions: Vec<Polygon>,
    ) -> ActionExecutor {
        let needs_grasp = match &class {
            ActionClass::Grasp { object }
            | ActionClass::Deliver { object }
            | ActionClass::Disassemble { object, .. } => {
                world.robot.carried.as_deref() != Some(object.as_str())
            }
            ActionClass::Goto => false,
        };
        ActionExecutor {
            command,
            class,
            enclosing,
            intrusions,
            grasp_goal: None,
            phase: if needs_grasp {
                Phase::ApproachGrasp
            } else {
                Phase::Navigate
            },
            history: VecDeque::new(),
            ticks_since_topology: 0,
            sep_was_unsatisfied: false,
            last_topology: None,
        }
    }

    pub fn set_min_sep(&mut self, min_sep: f64) {
        if let ActionClass::Disassemble { min_sep: m, .. } = &mut self.class {
            *m = min_sep;
        }
    }

    fn target_object(&self) -> Option<&str> {
        match &self.class {
            ActionClass::Grasp { object }
            | ActionClass::Deliver { object }
            | ActionClass::Disassemble { object, .. } => Some(object),
            ActionClass::Goto => None,
        }
    }

    /// The navigation goal for the current phase.
    fn phase_goal(&mut self, world: &WorldState) -> Result<Vec2, ReactiveError> {
        match self.phase {
            Phase::Navigate => Ok(self.command.goal),
            Phase::ApproachGrasp | Phase::Align => {
                if let Some(g) = self.grasp_goal {
                    return Ok(g);
                }
                let obj = self.target_object().expect("grasp phases have an object");
                let group = self
                    .last_topology
                    .as_ref()
                    .map(|t| t.freespace_group.clone())
                    .unwrap_or_else(|| vec![self.enclosing.clone()]);
                let g = interface::grasp_point(world, obj, &group)?;
                self.grasp_goal = Some(g);
                Ok(g)
            }
        }
    }

    /// Advance one control period: sense, check topology, detect phase
    /// transitions and produce the next velocity command. The executor
    /// mutates the world only to localize obstacles and to engage or
    /// disengage the gripper.
    pub fn tick(&mut self, world: &mut WorldState, t: f64, dt: f64) -> TickResult {
        let params = world.scenario.params.clone();
        // approaching a grasp while holding something else: drop it in place
        if self.phase == Phase::ApproachGrasp {
            if let Some(held) = world.robot.carried.clone() {
                if self.target_object() != Some(held.as_str()) {
                    disengage(world);
                }
            }
        }
        let reading = sense(world, &world.robot.clone());
        let discovered_grew = reading.localized_familiar.len() > world.discovered.len();
        world.discovered = reading.localized_familiar.clone();

        // early disassembly stop: the separation condition became satisfied
        // while pushing
        if let ActionClass::Disassemble { object, min_sep } = &self.class {
            if self.phase == Phase::Navigate
                && world.robot.carried.as_deref() == Some(object.as_str())
            {
                let ok = interface::disassembly_done(world, object, *min_sep);
                if !ok {
                    self.sep_was_unsatisfied = true;
                } else if self.sep_was_unsatisfied {
                    disengage(world);
                    return TickResult {
                        command: (0.0, 0.0),
                        outcome: Some(ActionOutcome::Achieved),
                    };
                }
            }
        }

        // topology cadence: at start, upon discovery, then periodically
        let goal = match self.phase_goal(world) {
            Ok(g) => g,
            Err(e) => {
                return TickResult {
                    command: (0.0, 0.0),
                    outcome: Some(ActionOutcome::Infeasible(e.to_string())),
                }
            }
        };
        if self.last_topology.is_none() || discovered_grew || self.ticks_since_topology >= TOPOLOGY_PERIOD
        {
            self.ticks_since_topology = 0;
            let r_eff = world.effective_radius();
            let movables = world.dilated_movables(r_eff);
            let mut localized = world.dilated_localized(r_eff);
            localized.extend(self.intrusions.iter().cloned());
            match topology::topology_check(
                world.plan_center(),
                goal,
                &self.enclosing,
                &movables,
                &localized,
            ) {
                Err(e) => {
                    return TickResult {
                        command: (0.0, 0.0),
                        outcome: Some(ActionOutcome::Infeasible(e.to_string())),
                    }
                }
                Ok(res) => {
                    if !res.is_feasible {
                        self.last_topology = Some(res);
                        return TickResult {
                            command: (0.0, 0.0),
                            outcome: Some(ActionOutcome::Infeasible(
                                "goal blocked by fixed obstacles".to_string(),
                            )),
                        };
                    }
                    if !res.blocking.is_empty() {
                        // a grasp approach "blocked" only by its own target
                        // means the approach point is stale: re-ground it
                        let self_blocked = self.phase == Phase::ApproachGrasp
                            && res.blocking.len() == 1
                            && self.target_object() == Some(res.blocking[0].as_str());
                        if self_blocked {
                            self.grasp_goal = None;
                            self.last_topology = Some(res);
                            return TickResult {
                                command: (0.0, 0.0),
                                outcome: None,
                            };
                        }
                        let blocking = res.blocking.clone();
                        self.last_topology = Some(res);
                        return TickResult {
                            command: (0.0, 0.0),
                            outcome: Some(ActionOutcome::FixRequired(blocking)),
                        };
                    }
                    self.enclosing = res.enclosing_freespace.clone();
                    self.last_topology = Some(res);
                }
            }
        } else {
            self.ticks_since_topology += 1;
        }

        // phase transitions on arrival
        let c = world.plan_center();
        match self.phase {
            Phase::ApproachGrasp => {
                if c.dist(goal) <= params.delta_goal {
                    self.phase = Phase::Align;
                }
            }
            Phase::Align => {
                let obj = self.target_object().unwrap().to_string();
                let obj_center = world.movable_centers[&obj];
                let bearing = (obj_center - world.robot.position).angle();
                let err = wrap_angle(bearing - world.robot.theta);
                if err.abs() <= params.grasp_align_tol {
                    engage(world, &obj);
                    // grasp-only actions are complete; carrying actions
                    // proceed to the navigation phase with the pair
                    if matches!(self.class, ActionClass::Grasp { .. }) {
                        return TickResult {
                            command: (0.0, 0.0),
                            outcome: Some(ActionOutcome::Achieved),
                        };
                    }
                    self.phase = Phase::Navigate;
                    // the effective radius changed: rebuild the enclosing
                    // freespace for the pair and force a topology refresh
                    let (enc, intr) = enclosing_and_intrusions(
                        &world.scenario.workspace,
                        world.effective_radius(),
                    );
                    self.enclosing = enc;
                    self.intrusions = intr;
                    self.last_topology = None;
                    self.history.clear();
                    return TickResult {
                        command: (0.0, 0.0),
                        outcome: None,
                    };
                }
                let w = (params.k_theta * err).clamp(-params.omega_max, params.omega_max);
                return TickResult {
                    command: (0.0, w),
                    outcome: None,
                };
            }
            Phase::Navigate => {
                if c.dist(goal) <= params.delta_goal {
                    match &self.class {
                        ActionClass::Goto => {
                            return TickResult {
                                command: (0.0, 0.0),
                                outcome: Some(ActionOutcome::Achieved),
                            }
                        }
                        ActionClass::Grasp { .. } => unreachable!("grasp ends in Align"),
                        ActionClass::Deliver { .. } | ActionClass::Disassemble { .. } => {
                            disengage(world);
                            return TickResult {
                                command: (0.0, 0.0),
                                outcome: Some(ActionOutcome::Achieved),
                            };
                        }
                    }
                }
            }
        }

        // stuck detection over a trailing window of plan-center positions
        self.history.push_back((t, c));
        while let Some(&(t0, _)) = self.history.front() {
            if t - t0 > STUCK_WINDOW + dt {
                self.history.pop_front();
            } else {
                break;
            }
        }
        if let (Some(&(t0, p0)), Some(&(_, pn))) = (self.history.front(), self.history.back()) {
            if t - t0 >= STUCK_WINDOW && p0.dist(pn) < params.eps_stuck {
                return TickResult {
                    command: (0.0, 0.0),
                    outcome: Some(ActionOutcome::Infeasible(
                        "no progress within the stuck window".to_string(),
                    )),
                };
            }
        }

        let command = control_step(world, goal, &reading, &self.enclosing);
        TickResult {
            command,
            outcome: None,
        }
    }
}

/// Engage the gripper on an object: the object snaps to the contact pose
/// and follows the gripper frame rigidly from now on.
fn engage(world: &mut WorldState, object: &str) {
    world.robot.gripper = true;
    world.robot.carried = Some(object.to_string());
    let d = world.scenario.robot.radius + world.movable_radius(object);
    let c = world.robot.position + Vec2::from_angle(world.robot.theta) * d;
    world.movable_centers.insert(object.to_string(), c);
}

fn disengage(world: &mut WorldState) {
    world.robot.gripper = false;
    world.robot.carried = None;
}

/// The initially assumed enclosing freespace (convex hull of the eroded
/// workspace) plus the boundary intrusions that the hull re-included,
/// treated as permanently localized obstacles.
pub fn enclosing_and_intrusions(workspace: &Polygon, r_eff: f64) -> (Polygon, Vec<Polygon>) {
    let eroded = geometry::erode(workspace, r_eff);
    let hull = geometry::convex_hull(&eroded).unwrap_or_else(|_| workspace.clone());
    let intrusions = geometry::boolean(
        geometry::BoolOp::Difference,
        std::slice::from_ref(&hull),
        &eroded,
    )
    .unwrap_or_default();
    (hull, intrusions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scenario;

    fn empty_world() -> WorldState {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "robot": {"start": {"x": 2.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        WorldState::new(parse_scenario(&text).unwrap())
    }

    #[test]
    fn jacobian_matches_spec_form() {
        let j = grasp_jacobian(0.0, 1.0).unwrap();
        let v = j.apply(1.0, 0.0);
        assert!((v - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        let (vv, ww) = j.inverse_apply(Vec2::new(1.0, 0.0));
        assert!((vv - 1.0).abs() < 1e-12 && ww.abs() < 1e-12);
        assert!(matches!(
            grasp_jacobian(0.3, 0.0),
            Err(ReactiveError::SingularJacobian)
        ));
    }

    #[test]
    fn jacobian_inverse_roundtrip() {
        for i in 0..100 {
            let theta = (i as f64) * 0.063 - 3.0;
            let j = grasp_jacobian(theta, 0.55).unwrap();
            let (v, w) = (0.7, -0.9);
            let vhat = j.apply(v, w);
            let (v2, w2) = j.inverse_apply(vhat);
            assert!((v - v2).abs() < 1e-9 && (w - w2).abs() < 1e-9);
            assert!((j.det() - 0.55).abs() < 1e-12);
        }
    }

    #[test]
    fn unobstructed_pursuit_moves_forward() {
        let world = empty_world();
        let reading = sense(&world, &world.robot);
        let (v, w) = control_step(&world, Vec2::new(8.0, 3.0), &reading, &world.scenario.workspace);
        assert!(v > 0.5, "v = {v}");
        assert!(w.abs() < 1e-9, "w = {w}");
    }

    #[test]
    fn caps_respected_even_for_far_goals() {
        let mut world = empty_world();
        world.robot.theta = 2.5; // badly misaligned
        let reading = sense(&world, &world.robot);
        let (v, w) = control_step(&world, Vec2::new(9.0, 3.0), &reading, &world.scenario.workspace);
        assert!(v.abs() <= 1.0 + 1e-12);
        assert!(w.abs() <= 2.0 + 1e-12);
    }

    #[test]
    fn goal_within_tolerance_stops() {
        let world = empty_world();
        let reading = sense(&world, &world.robot);
        let (v, w) = control_step(&world, world.robot.position, &reading, &world.scenario.workspace);
        assert_eq!((v, w), (0.0, 0.0));
    }

    #[test]
    fn familiar_obstacle_localizes_whole_within_range() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[20.0,0.0],[20.0,6.0],[0.0,6.0]],
            "familiar_obstacles": [
                [[3.5,2.5],[4.5,2.5],[4.5,3.5],[3.5,3.5]],
                [[15.0,2.5],[16.0,2.5],[16.0,3.5],[15.0,3.5]]
            ],
            "robot": {"start": {"x": 2.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        let world = WorldState::new(parse_scenario(&text).unwrap());
        let reading = sense(&world, &world.robot);
        // the nearby obstacle has a vertex at 0.9 range: localized whole
        assert!(reading.localized_familiar.contains(&0));
        // the distant one (2R away) is absent
        assert!(!reading.localized_familiar.contains(&1));
    }

    #[test]
    fn unknown_disk_contributes_visible_arc_only() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "unknown_obstacles": [{"disk": {"center": {"x": 3.0, "y": 3.0}, "radius": 0.4}}],
            "robot": {"start": {"x": 2.0, "y": 3.0}, "radius": 0.25, "sensor_range": 1.0}
        })
        .to_string();
        let world = WorldState::new(parse_scenario(&text).unwrap());
        let reading = sense(&world, &world.robot);
        assert_eq!(reading.unknown_fragments.len(), 1);
        let pts = &reading.unknown_fragments[0].points;
        // every sample within range and on the circle
        for p in pts {
            assert!(p.dist(world.robot.position) <= 1.0 + 1e-9);
            assert!((p.dist(Vec2::new(3.0, 3.0)) - 0.4).abs() < 1e-9);
        }
        // the visible arc is the near side: its fraction of the circle
        // matches the circle-circle intersection half-angle
        let d = 1.0_f64;
        let rho = 0.4_f64;
        let range = 1.0_f64;
        let cos_half = (d * d + rho * rho - range * range) / (2.0 * d * rho);
        let expected_fraction = cos_half.acos() / std::f64::consts::PI;
        let got_fraction = pts.len() as f64 / FRAGMENT_SAMPLES as f64;
        assert!(
            (got_fraction - expected_fraction).abs() < 0.06,
            "expected {expected_fraction}, got {got_fraction}"
        );
    }

    #[test]
    fn obstacle_2r_away_absent() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "unknown_obstacles": [{"disk": {"center": {"x": 8.0, "y": 3.0}, "radius": 0.4}}],
            "robot": {"start": {"x": 2.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        let world = WorldState::new(parse_scenario(&text).unwrap());
        let reading = sense(&world, &world.robot);
        assert!(reading.unknown_fragments.is_empty());
    }
}
