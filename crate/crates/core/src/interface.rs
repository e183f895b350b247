//! Interface layer between the symbolic controller and the reactive
//! executor: grounds symbolic actions into navigation goals and gripper
//! commands, and manages the LTL/Fix mode switch with the blocking-object
//! stack.

use crate::automaton::Symbol;
use crate::geometry::{self, Polygon};
use crate::ltl::{ActionKind, Predicate};
use crate::scene::WorldState;
use crate::vec2::Vec2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterfaceError {
    #[error("unknown region {0}")]
    UnknownRegion(String),
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("object {0} has no collision-free boundary point in the robot's freespace")]
    NoFreeBoundary(String),
}

/// A symbolic manipulation action. Disassemble is interface-internal and
/// never reported to the symbolic controller.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Move { region: String },
    Grasp { object: String },
    Release { object: String, region: String },
    Disassemble { object: String, goal: Vec2 },
}

impl Action {
    pub fn describe(&self) -> String {
        match self {
            Action::Move { region } => format!("Move({region})"),
            Action::Grasp { object } => format!("Grasp({object})"),
            Action::Release { object, region } => format!("Release({object},{region})"),
            Action::Disassemble { object, goal } => {
                format!("Disassemble({object},({:.2},{:.2}))", goal.x, goal.y)
            }
        }
    }
}

/// A grounded navigation command: target point and gripper bit.
#[derive(Clone, Debug, PartialEq)]
pub struct NavCommand {
    pub goal: Vec2,
    pub gripper: bool,
    pub carried_object: Option<String>,
}

/// Map a single-predicate symbol to its manipulation action; the empty
/// symbol requires no action.
pub fn symbol_to_action(symbol: &Symbol) -> Option<Action> {
    let p: &Predicate = symbol.the_predicate()?;
    Some(match p.kind {
        ActionKind::Move => Action::Move {
            region: p.region.clone().unwrap(),
        },
        ActionKind::Grasp => Action::Grasp {
            object: p.object.clone().unwrap(),
        },
        ActionKind::Release => Action::Release {
            object: p.object.clone().unwrap(),
            region: p.region.clone().unwrap(),
        },
    })
}

/// Ground an action: Move and Release target the region centroid, Grasp a
/// collision-free point on the object boundary inside `freespace_group`
/// (the robot's current freespace component).
pub fn action_to_command(
    action: &Action,
    world: &WorldState,
    freespace_group: &[Polygon],
) -> Result<NavCommand, InterfaceError> {
    match action {
        Action::Move { region } => {
            let goal = world
                .region_centroid(region)
                .ok_or_else(|| InterfaceError::UnknownRegion(region.clone()))?;
            Ok(NavCommand {
                goal,
                gripper: false,
                carried_object: None,
            })
        }
        Action::Release { object, region } => {
            if !world.scenario.movables.contains_key(object) {
                return Err(InterfaceError::UnknownObject(object.clone()));
            }
            let goal = world
                .region_centroid(region)
                .ok_or_else(|| InterfaceError::UnknownRegion(region.clone()))?;
            Ok(NavCommand {
                goal,
                gripper: true,
                carried_object: Some(object.clone()),
            })
        }
        Action::Grasp { object } => {
            let goal = grasp_point(world, object, freespace_group)?;
            Ok(NavCommand {
                goal,
                gripper: false,
                carried_object: None,
            })
        }
        Action::Disassemble { object, goal } => Ok(NavCommand {
            goal: *goal,
            gripper: true,
            carried_object: Some(object.clone()),
        }),
    }
}

/// A collision-free grasp location: the nearest of 32 evenly spaced points
/// on the dilated object boundary that lies in the robot's freespace
/// component.
pub fn grasp_point(
    world: &WorldState,
    object: &str,
    freespace_group: &[Polygon],
) -> Result<Vec2, InterfaceError> {
    if !world.scenario.movables.contains_key(object) {
        return Err(InterfaceError::UnknownObject(object.to_string()));
    }
    let disk = world.movable_disk(object);
    let ring_radius = disk.radius + world.scenario.robot.radius;
    let robot = world.robot.position;
    let mut best: Option<(f64, Vec2)> = None;
    for i in 0..32 {
        let t = 2.0 * std::f64::consts::PI * i as f64 / 32.0;
        let p = disk.center + Vec2::from_angle(t) * ring_radius;
        if !freespace_group.iter().any(|fp| geometry::contains(fp, p)) {
            continue;
        }
        let d = robot.dist(p);
        if best.map(|(bd, _)| d < bd).unwrap_or(true) {
            best = Some((d, p));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| InterfaceError::NoFreeBoundary(object.to_string()))
}

/// The midpoint of the freespace boundary edge that maximizes the smallest
/// distance to every movable object except `skip` and to every region.
pub fn disassemble_target(world: &WorldState, skip: &str, freespace_group: &[Polygon]) -> Vec2 {
    let mut best: Option<(f64, Vec2)> = None;
    for poly in freespace_group {
        for ring in poly.rings() {
            let n = ring.len();
            for i in 0..n {
                let mid = ring[i].lerp(ring[(i + 1) % n], 0.5);
                let mut score = f64::INFINITY;
                for (id, &c) in &world.movable_centers {
                    if id == skip {
                        continue;
                    }
                    score = score.min(mid.dist(c) - world.movable_radius(id));
                }
                for region in world.scenario.regions.values() {
                    score = score.min(geometry::signed_distance(region, mid));
                }
                let better = match best {
                    None => true,
                    Some((bs, bp)) => {
                        score > bs + 1e-12
                            || ((score - bs).abs() <= 1e-12
                                && (mid.x, mid.y) < (bp.x, bp.y))
                    }
                };
                if better {
                    best = Some((score, mid));
                }
            }
        }
    }
    best.map(|(_, p)| p)
        .expect("freespace has at least one boundary edge")
}

/// Minimum separation radius for completing a disassembly: twice the robot
/// radius plus the largest radius among the objects being fixed, the
/// carried object included.
pub fn disassembly_separation(world: &WorldState, stack: &[String], object: &str) -> f64 {
    let r = world.scenario.robot.radius;
    let mut rho_max = world.movable_radius(object);
    for id in stack {
        rho_max = rho_max.max(world.movable_radius(id));
    }
    2.0 * (r + rho_max)
}

/// The disassembly stop condition: the circumscribed robot-object pair no
/// longer intersects any region and keeps the separation distance from all
/// other objects.
pub fn disassembly_done(world: &WorldState, object: &str, min_sep: f64) -> bool {
    let pair_center = world.plan_center();
    let pair_radius = world.effective_radius();
    for region in world.scenario.regions.values() {
        if geometry::signed_distance(region, pair_center) < pair_radius {
            return false;
        }
    }
    for (id, &c) in &world.movable_centers {
        if id == object {
            continue;
        }
        if pair_center.dist(c) < min_sep {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Ltl,
    Fix,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Ltl => write!(f, "ltl"),
            Mode::Fix => write!(f, "fix"),
        }
    }
}

/// Which step of fixing a single blocking object is active.
#[derive(Clone, Debug, PartialEq)]
pub enum FixPhase {
    Grasping(String),
    Pushing(String),
    /// re-grasping the object carried before the fix started
    Regrasping(String),
}

/// Mode bookkeeping: the blocking-object stack, the active fix step, the
/// object to re-grasp afterwards and the suspended symbolic action.
#[derive(Clone, Debug)]
pub struct ModeState {
    pub mode: Mode,
    pub stack: Vec<String>,
    pub active: Option<FixPhase>,
    pub regrasp: Option<String>,
    pub suspended: Option<Action>,
}

/// What the mode machine asks the simulator to do next.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeDirective {
    /// execute this fix-internal action
    Fix(Action),
    /// fix finished: back to LTL mode, resume the suspended action
    Resume(Action),
}

impl Default for ModeState {
    fn default() -> Self {
        ModeState {
            mode: Mode::Ltl,
            stack: Vec::new(),
            active: None,
            regrasp: None,
            suspended: None,
        }
    }
}

impl ModeState {
    /// Enter Fix mode: remember the suspended action, stack the blocking
    /// objects (nearest-to-goal first, so the robot clears nearest-to-root
    /// first), and schedule the carried object for disassembly first with a
    /// re-grasp afterwards.
    pub fn enter_fix(&mut self, blocking: &[String], suspended: Action, carried: Option<String>) {
        self.mode = Mode::Fix;
        for id in blocking {
            if !self.stack.contains(id) {
                self.stack.push(id.clone());
            }
        }
        if let Some(c) = carried {
            self.stack.retain(|id| id != &c);
            self.stack.push(c.clone());
            self.regrasp = Some(c);
        }
        self.suspended = Some(suspended);
        self.active = None;
    }

    /// Additional blockers discovered mid-fix join the stack.
    pub fn extend_stack(&mut self, blocking: &[String]) {
        for id in blocking {
            if !self.stack.contains(id) && self.active_object() != Some(id.as_str()) {
                self.stack.push(id.clone());
            }
        }
    }

    pub fn active_object(&self) -> Option<&str> {
        match &self.active {
            Some(FixPhase::Grasping(o))
            | Some(FixPhase::Pushing(o))
            | Some(FixPhase::Regrasping(o)) => Some(o),
            None => None,
        }
    }

    /// Next directive: pop the stack emitting Grasp then Disassemble per
    /// object, re-grasp the suspended carry if any, then resume LTL.
    ///
    /// `disassemble_goal` grounds the push target for a given object at the
    /// moment the Disassemble step starts (the robot is carrying it then).
    pub fn next_directive(
        &mut self,
        world: &WorldState,
        mut disassemble_goal: impl FnMut(&WorldState, &str) -> Vec2,
    ) -> ModeDirective {
        debug_assert_eq!(self.mode, Mode::Fix);
        match self.active.take() {
            Some(FixPhase::Grasping(obj)) => {
                let goal = disassemble_goal(world, &obj);
                self.active = Some(FixPhase::Pushing(obj.clone()));
                ModeDirective::Fix(Action::Disassemble { object: obj, goal })
            }
            Some(FixPhase::Pushing(_)) | Some(FixPhase::Regrasping(_)) | None => {
                if let Some(obj) = self.stack.pop() {
                    if world.robot.carried.as_deref() == Some(obj.as_str()) {
                        // already holding it: push directly
                        let goal = disassemble_goal(world, &obj);
                        self.active = Some(FixPhase::Pushing(obj.clone()));
                        return ModeDirective::Fix(Action::Disassemble { object: obj, goal });
                    }
                    self.active = Some(FixPhase::Grasping(obj.clone()));
                    return ModeDirective::Fix(Action::Grasp { object: obj });
                }
                if let Some(obj) = self.regrasp.take() {
                    self.active = Some(FixPhase::Regrasping(obj.clone()));
                    return ModeDirective::Fix(Action::Grasp { object: obj });
                }
                // done: back to the suspended symbolic action
                self.mode = Mode::Ltl;
                self.active = None;
                let resumed = self.suspended.take().expect("fix mode had a suspended action");
                ModeDirective::Resume(resumed)
            }
        }
    }

    /// The active fix step was interrupted (new blockers surfaced before it
    /// finished): re-queue its object below the incoming blockers so it is
    /// retried once they are cleared.
    pub fn step_interrupted(&mut self) {
        if let Some(phase) = self.active.take() {
            match phase {
                FixPhase::Grasping(o) | FixPhase::Pushing(o) => {
                    if !self.stack.contains(&o) {
                        self.stack.push(o);
                    }
                }
                FixPhase::Regrasping(o) => self.regrasp = Some(o),
            }
        }
    }

    /// A fix step completed. Returns the id of the object whose disassembly
    /// just finished, if any.
    pub fn step_done(&mut self) -> Option<String> {
        match &self.active {
            Some(FixPhase::Pushing(obj)) => {
                let done = obj.clone();
                // re-grasp steps keep Grasping active until next_directive
                self.active = None;
                Some(done)
            }
            _ => None,
        }
    }

    /// Abort the fix (a fix step is physically infeasible); the suspended
    /// action is reported infeasible upstream.
    pub fn abort_fix(&mut self) -> Option<Action> {
        self.mode = Mode::Ltl;
        self.stack.clear();
        self.active = None;
        self.regrasp = None;
        self.suspended.take()
    }

    /// Mode invariant: Fix mode iff there is pending fix work.
    pub fn invariant_holds(&self) -> bool {
        let busy = !self.stack.is_empty() || self.active.is_some() || self.regrasp.is_some();
        match self.mode {
            Mode::Fix => busy || self.suspended.is_some(),
            Mode::Ltl => self.stack.is_empty() && self.active.is_none(),
        }
    }
}

/// One mode-machine transition, as a pure function: given the fresh
/// topology blocking stack and the pending symbolic action, produce the
/// updated mode state and the next action to execute.
pub fn mode_step(
    state: &ModeState,
    world: &WorldState,
    blocking: &[String],
    pending: &Action,
    disassemble_goal: impl FnMut(&WorldState, &str) -> Vec2,
) -> (ModeState, Action) {
    let mut next = state.clone();
    match state.mode {
        Mode::Ltl => {
            if blocking.is_empty() {
                return (next, pending.clone());
            }
            next.enter_fix(blocking, pending.clone(), world.robot.carried.clone());
            match next.next_directive(world, disassemble_goal) {
                ModeDirective::Fix(a) => (next, a),
                ModeDirective::Resume(a) => (next, a),
            }
        }
        Mode::Fix => {
            next.extend_stack(blocking);
            match next.next_directive(world, disassemble_goal) {
                ModeDirective::Fix(a) => (next, a),
                ModeDirective::Resume(a) => (next, a),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scenario;

    fn world_two_objects() -> WorldState {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "regions": {
                "l1": [[1.5,2.5],[2.5,2.5],[2.5,3.5],[1.5,3.5]],
                "l2": [[7.5,2.5],[8.5,2.5],[8.5,3.5],[7.5,3.5]]
            },
            "movables": {
                "o1": {"center": {"x": 2.0, "y": 3.0}, "radius": 0.3},
                "o2": {"center": {"x": 8.0, "y": 3.0}, "radius": 0.3}
            },
            "robot": {"start": {"x": 5.0, "y": 1.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        WorldState::new(parse_scenario(&text).unwrap())
    }

    fn open_freespace(world: &WorldState) -> Vec<Polygon> {
        vec![world.scenario.workspace.clone()]
    }

    #[test]
    fn move_targets_region_centroid() {
        let world = world_two_objects();
        let cmd = action_to_command(
            &Action::Move {
                region: "l1".into(),
            },
            &world,
            &open_freespace(&world),
        )
        .unwrap();
        assert!((cmd.goal - Vec2::new(2.0, 3.0)).norm() < 1e-9);
        assert!(!cmd.gripper);
    }

    #[test]
    fn release_carries_gripper_bit() {
        let world = world_two_objects();
        let cmd = action_to_command(
            &Action::Release {
                object: "o1".into(),
                region: "l2".into(),
            },
            &world,
            &open_freespace(&world),
        )
        .unwrap();
        assert!((cmd.goal - Vec2::new(8.0, 3.0)).norm() < 1e-9);
        assert!(cmd.gripper);
        assert_eq!(cmd.carried_object.as_deref(), Some("o1"));
    }

    #[test]
    fn unknown_names_are_errors() {
        let world = world_two_objects();
        assert!(matches!(
            action_to_command(
                &Action::Move {
                    region: "nope".into()
                },
                &world,
                &open_freespace(&world)
            ),
            Err(InterfaceError::UnknownRegion(_))
        ));
        assert!(matches!(
            grasp_point(&world, "nope", &open_freespace(&world)),
            Err(InterfaceError::UnknownObject(_))
        ));
    }

    #[test]
    fn grasp_point_is_on_the_contact_circle_nearest_the_robot() {
        let mut world = world_two_objects();
        world.robot.position = Vec2::new(0.5, 3.0); // west of o1
        let p = grasp_point(&world, "o1", &open_freespace(&world)).unwrap();
        let d = p.dist(Vec2::new(2.0, 3.0));
        assert!((d - 0.55).abs() < 1e-9, "distance {d}");
        // westmost point is nearest
        assert!((p - Vec2::new(1.45, 3.0)).norm() < 1e-9);
    }

    #[test]
    fn grasp_point_respects_freespace() {
        let mut world = world_two_objects();
        world.robot.position = Vec2::new(0.5, 3.0);
        // freespace covers only the region east of the object
        let east = Polygon::rectangle(Vec2::new(2.3, 0.0), Vec2::new(10.0, 6.0));
        let p = grasp_point(&world, "o1", &[east.clone()]).unwrap();
        assert!(geometry::contains(&east, p));
        assert!((p.dist(Vec2::new(2.0, 3.0)) - 0.55).abs() < 1e-9);
        // fully enclosed object: no candidate at all
        let nowhere = Polygon::rectangle(Vec2::new(9.0, 0.0), Vec2::new(10.0, 6.0));
        assert!(matches!(
            grasp_point(&world, "o1", &[nowhere]),
            Err(InterfaceError::NoFreeBoundary(_))
        ));
    }

    #[test]
    fn disassemble_target_prefers_far_wall() {
        // one other object in the east, region in the north-west: the far
        // edge midpoint maximizing the joint clearance is along the south
        let world = world_two_objects();
        let free = Polygon::rectangle(Vec2::new(0.0, 0.0), Vec2::new(10.0, 6.0));
        let target = disassemble_target(&world, "o2", &[free]);
        // skip o2: scores against o1 (west) and both regions
        let d_o1 = target.dist(Vec2::new(2.0, 3.0)) - 0.3;
        assert!(d_o1 > 3.0, "target {target:?} too close to o1");
    }

    #[test]
    fn mode_passthrough_when_unblocked() {
        let world = world_two_objects();
        let ms = ModeState::default();
        let pending = Action::Move {
            region: "l1".into(),
        };
        let (next, action) = mode_step(&ms, &world, &[], &pending, |_, _| Vec2::ZERO);
        assert_eq!(next.mode, Mode::Ltl);
        assert_eq!(action, pending);
    }

    #[test]
    fn blocking_enters_fix_with_grasp() {
        let world = world_two_objects();
        let ms = ModeState::default();
        let pending = Action::Move {
            region: "l1".into(),
        };
        let blocking = vec!["o2".to_string()];
        let (next, action) = mode_step(&ms, &world, &blocking, &pending, |_, _| Vec2::ZERO);
        assert_eq!(next.mode, Mode::Fix);
        assert_eq!(
            action,
            Action::Grasp {
                object: "o2".into()
            }
        );
        assert!(next.invariant_holds());
    }

    #[test]
    fn carried_object_is_disassembled_first_and_regrasped() {
        let mut world = world_two_objects();
        world.robot.gripper = true;
        world.robot.carried = Some("o1".to_string());
        let ms = ModeState::default();
        let pending = Action::Release {
            object: "o1".into(),
            region: "l2".into(),
        };
        let blocking = vec!["o2".to_string()];
        let (mut ms, action) =
            mode_step(&ms, &world, &blocking, &pending, |_, _| Vec2::new(9.0, 1.0));
        // carrying for a Release: push the carried object away first
        assert_eq!(
            action,
            Action::Disassemble {
                object: "o1".into(),
                goal: Vec2::new(9.0, 1.0)
            }
        );
        assert_eq!(ms.regrasp.as_deref(), Some("o1"));
        // carried push finished; o1 is now free
        world.robot.gripper = false;
        world.robot.carried = None;
        assert_eq!(ms.step_done().as_deref(), Some("o1"));
        // next: grasp the blocker
        let d = ms.next_directive(&world, |_, _| Vec2::new(9.0, 1.0));
        assert_eq!(
            d,
            ModeDirective::Fix(Action::Grasp {
                object: "o2".into()
            })
        );
        // grasping done; now push it
        let d = ms.next_directive(&world, |_, _| Vec2::new(9.0, 5.0));
        assert_eq!(
            d,
            ModeDirective::Fix(Action::Disassemble {
                object: "o2".into(),
                goal: Vec2::new(9.0, 5.0)
            })
        );
        assert_eq!(ms.step_done().as_deref(), Some("o2"));
        // stack empty: re-grasp the suspended carry
        let d = ms.next_directive(&world, |_, _| Vec2::ZERO);
        assert_eq!(
            d,
            ModeDirective::Fix(Action::Grasp {
                object: "o1".into()
            })
        );
        // and finally resume the suspended Release in LTL mode
        let d = ms.next_directive(&world, |_, _| Vec2::ZERO);
        assert_eq!(d, ModeDirective::Resume(pending));
        assert_eq!(ms.mode, Mode::Ltl);
    }

    #[test]
    fn separation_uses_largest_stacked_radius() {
        let world = world_two_objects();
        let sep = disassembly_separation(&world, &["o2".to_string()], "o1");
        assert!((sep - 2.0 * (0.25 + 0.3)).abs() < 1e-12);
    }
}
