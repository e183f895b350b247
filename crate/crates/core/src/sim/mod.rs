//! The closed-loop simulator: scenario loading, fixed-step integration of
//! the unicycle, the select/execute/fix/advance mission loop, logging and
//! rendering.

pub mod log;
pub mod oracle;
pub mod render;

pub use self::log::{Event, TickRecord, TrajectoryLog, Verdict};

use crate::automaton::{self, Symbol, TaskGraph};
use crate::interface::{self, Action, Mode, ModeDirective, ModeState};
use crate::ltl::{self, LtlFormula, Nba};
use crate::reactive::{self, ActionExecutor, ActionOutcome, RobotPose};
use crate::scene::{Scenario, WorldState};
use crate::symbolic::{self, ControllerState, RecoverOutcome};
use crate::vec2::{wrap_angle, Vec2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Ltl(#[from] ltl::LtlError),
    #[error(transparent)]
    Automaton(#[from] automaton::AutomatonError),
    #[error(transparent)]
    Symbolic(#[from] crate::symbolic::SymbolicError),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error("time step {0} out of range (0, 0.1]")]
    BadTimeStep(f64),
}

/// Run-level limits and knobs.
#[derive(Clone, Debug)]
pub struct RunLimits {
    pub dt: f64,
    pub t_max: f64,
    /// accepting-edge traversals required for a Satisfied verdict
    pub accept_target: usize,
    pub seed: u64,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            dt: 0.01,
            t_max: 600.0,
            accept_target: 1,
            seed: 0,
        }
    }
}

/// Fourth-order explicit integration of the unicycle over one step with the
/// input held constant.
pub fn step_pose(pose: &RobotPose, v: f64, omega: f64, dt: f64) -> RobotPose {
    let f = |theta: f64| -> (f64, f64, f64) { (v * theta.cos(), v * theta.sin(), omega) };
    let (x, y, th) = (pose.position.x, pose.position.y, pose.theta);
    let k1 = f(th);
    let k2 = f(th + 0.5 * dt * k1.2);
    let k3 = f(th + 0.5 * dt * k2.2);
    let k4 = f(th + dt * k3.2);
    let nx = x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    let ny = y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    let nth = wrap_angle(th + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2));
    RobotPose {
        position: Vec2::new(nx, ny),
        theta: nth,
        gripper: pose.gripper,
        carried: pose.carried.clone(),
    }
}

/// Integrate one control period: the pose advances and a carried object
/// follows the gripper frame rigidly.
pub fn step(world: &mut WorldState, v: f64, omega: f64, dt: f64) {
    let next = step_pose(&world.robot, v, omega, dt);
    world.robot = next;
    if let Some(id) = world.robot.carried.clone() {
        let d = world.scenario.robot.radius + world.movable_radius(&id);
        let c = world.robot.position + Vec2::from_angle(world.robot.theta) * d;
        world.movable_centers.insert(id, c);
    }
}

/// Compile a mission formula (or an imported automaton) into the task graph
/// for the given initial symbol.
pub fn compile_mission(
    formula: &LtlFormula,
    imported: Option<Nba>,
    pi0: &Symbol,
) -> Result<(TaskGraph, bool), SimError> {
    let nba = match imported {
        Some(n) => n,
        None => ltl::translate_to_nba(formula),
    };
    let pruned = automaton::prune_nba(&nba);
    let (with_aux, aux) = automaton::add_aux_state(&pruned, pi0);
    let graph = automaton::build_task_graph(&with_aux, aux)?;
    Ok((graph, formula.is_recurrence()))
}

struct EventSink {
    events: Vec<Event>,
    seq: usize,
}

impl EventSink {
    fn push(&mut self, t: f64, line: String) {
        self.events.push(Event {
            t,
            seq: self.seq,
            line,
        });
        self.seq += 1;
    }
}

/// Execute a mission to its verdict. Deterministic for identical inputs.
pub fn run(
    scenario: &Scenario,
    formula_text: &str,
    imported: Option<Nba>,
    limits: &RunLimits,
) -> Result<(TrajectoryLog, WorldState), SimError> {
    if !(limits.dt > 0.0 && limits.dt <= 0.1) {
        return Err(SimError::BadTimeStep(limits.dt));
    }
    let formula = ltl::parse_ltl(formula_text)?;
    let pi0 = scenario.initial_symbol();
    let (graph, recurrence) = compile_mission(&formula, imported, &pi0)?;
    let accept_target = if recurrence {
        limits.accept_target.max(1)
    } else {
        limits.accept_target.clamp(1, 1)
    };

    let mut world = WorldState::new(scenario.clone());
    let mut events = EventSink {
        events: Vec::new(),
        seq: 0,
    };
    let mut ticks: Vec<TickRecord> = Vec::new();
    let mut advances: Vec<(Symbol, Vec<usize>)> = Vec::new();
    let mut mode = ModeState::default();
    let mut executor: Option<ActionExecutor> = None;
    let mut current_ltl_action: Option<Action> = None;
    let mut pi0_available = true;
    let mut t = 0.0;
    let dt = limits.dt;

    let cost_of = |world: &WorldState, s: &Symbol| -> f64 {
        match s.the_predicate() {
            None => 0.0,
            Some(p) => {
                let pos = world.robot.position;
                match (&p.region, &p.object) {
                    (Some(r), _) => world
                        .region_centroid(r)
                        .map(|c| pos.dist(c))
                        .unwrap_or(f64::INFINITY),
                    (None, Some(o)) => world
                        .movable_centers
                        .get(o)
                        .map(|c| pos.dist(*c))
                        .unwrap_or(f64::INFINITY),
                    _ => f64::INFINITY,
                }
            }
        }
    };

    let mut cs: ControllerState = {
        let w = &world;
        let cost = |s: &Symbol| cost_of(w, s);
        symbolic::init(&graph, Some(&cost))?
    };
    events.push(t, cs.status_line(&graph));

    let verdict: Verdict = 'mission: loop {
        if t > limits.t_max {
            break Verdict::Failed {
                reason: format!("time limit {}s exceeded", limits.t_max),
            };
        }

        // pick the next action when idle
        if executor.is_none() {
            let next_action: Action = if mode.mode == Mode::Fix {
                let directive = {
                    let snapshot = world.clone();
                    mode.next_directive(&snapshot, |w, obj| disassemble_goal(w, obj))
                };
                match directive {
                    ModeDirective::Fix(a) => a,
                    ModeDirective::Resume(a) => {
                        events.push(t, format!("MODE {}", Mode::Ltl));
                        current_ltl_action = Some(a.clone());
                        a
                    }
                }
            } else {
                // consume instantly satisfied symbols, then ground one action
                loop {
                    let sym = cs.pending_symbol().clone();
                    let instant = sym.0.is_empty()
                        || (pi0_available && cs.current == graph.aux && sym == pi0);
                    if instant {
                        if cs.current == graph.aux {
                            pi0_available = false;
                        }
                        let accepted_before = cs.accept_count;
                        advances.push((sym.clone(), cs.pending.run.clone()));
                        let w = world.clone();
                        let cost = |s: &Symbol| cost_of(&w, s);
                        cs = symbolic::advance(&graph, &cs, &sym, Some(&cost))?;
                        if cs.accept_count > accepted_before {
                            events.push(t, format!("SYMBOLIC accept #{}", cs.accept_count));
                        }
                        events.push(t, cs.status_line(&graph));
                        if cs.accept_count >= accept_target {
                            break 'mission Verdict::Satisfied {
                                accepts: cs.accept_count,
                            };
                        }
                        continue;
                    }
                    match interface::symbol_to_action(&sym) {
                        Some(a) => {
                            current_ltl_action = Some(a.clone());
                            break a;
                        }
                        None => {
                            // multi-predicate symbols are pruned away earlier
                            break 'mission Verdict::Failed {
                                reason: format!("symbol {sym} has no grounding"),
                            };
                        }
                    }
                }
            };
            match ActionExecutor::start(&next_action, &world) {
                Ok(mut ex) => {
                    if let Action::Disassemble { object, .. } = &next_action {
                        ex.set_min_sep(interface::disassembly_separation(
                            &world, &mode.stack, object,
                        ));
                    }
                    executor = Some(ex);
                }
                Err(e) => {
                    // grounding failed: treat like an infeasible action
                    match handle_infeasible(
                        &graph, &mut cs, &mut mode, &world, &mut events, t, &e.to_string(),
                        &cost_of,
                    ) {
                        Some(v) => break 'mission v,
                        None => continue,
                    }
                }
            }
        }

        // one control period
        let result = executor.as_mut().unwrap().tick(&mut world, t, dt);
        step(&mut world, result.command.0, result.command.1, dt);
        t += dt;
        ticks.push(TickRecord {
            t,
            x: world.robot.position.x,
            y: world.robot.position.y,
            theta: world.robot.theta,
            v: result.command.0,
            omega: result.command.1,
            mode: mode.mode.to_string(),
            gripper: u8::from(world.robot.gripper),
            carried: world
                .robot
                .carried
                .clone()
                .unwrap_or_else(|| "-".to_string()),
            min_clearance: world.min_clearance(),
            nba_state: graph.state_name(cs.current),
        });

        match result.outcome {
            None => {}
            Some(ActionOutcome::Achieved) => {
                executor = None;
                if mode.mode == Mode::Fix {
                    if let Some(obj) = mode.step_done() {
                        events.push(t, format!("FIX done obj={obj}"));
                    }
                } else {
                    let achieved = cs.pending_symbol().clone();
                    let accepted_before = cs.accept_count;
                    advances.push((achieved.clone(), cs.pending.run.clone()));
                    let w = world.clone();
                    let cost = |s: &Symbol| cost_of(&w, s);
                    cs = symbolic::advance(&graph, &cs, &achieved, Some(&cost))?;
                    current_ltl_action = None;
                    if cs.accept_count > accepted_before {
                        events.push(t, format!("SYMBOLIC accept #{}", cs.accept_count));
                    }
                    events.push(t, cs.status_line(&graph));
                    if cs.accept_count >= accept_target {
                        break 'mission Verdict::Satisfied {
                            accepts: cs.accept_count,
                        };
                    }
                }
            }
            Some(ActionOutcome::FixRequired(blocking)) => {
                executor = None;
                if mode.mode == Mode::Ltl {
                    let suspended = current_ltl_action
                        .clone()
                        .expect("an LTL action was executing");
                    mode.enter_fix(&blocking, suspended, world.robot.carried.clone());
                    events.push(t, format!("MODE {}", Mode::Fix));
                    for obj in &mode.stack {
                        events.push(t, format!("FIX push obj={obj}"));
                    }
                    if mode.regrasp.is_some() {
                        let carried = mode.stack.last().cloned().unwrap_or_default();
                        events.push(t, format!("REGRASP obj={carried}"));
                    }
                } else {
                    mode.step_interrupted();
                    let before = mode.stack.len();
                    mode.extend_stack(&blocking);
                    for obj in mode.stack.iter().skip(before) {
                        events.push(t, format!("FIX push obj={obj}"));
                    }
                }
            }
            Some(ActionOutcome::Infeasible(reason)) => {
                executor = None;
                match handle_infeasible(
                    &graph, &mut cs, &mut mode, &world, &mut events, t, &reason, &cost_of,
                ) {
                    Some(v) => break 'mission v,
                    None => {}
                }
            }
        }
    };

    let log = TrajectoryLog {
        ticks,
        events: events.events,
        advances,
        verdict,
    };
    Ok((log, world))
}

/// Ground the push target for disassembling `obj`: the robot is carrying it,
/// so the freespace is probed with the pair radius.
fn disassemble_goal(world: &WorldState, obj: &str) -> Vec2 {
    let r_eff = world.scenario.robot.radius + world.movable_radius(obj);
    let (enclosing, intrusions) =
        reactive::enclosing_and_intrusions(&world.scenario.workspace, r_eff);
    let movables: Vec<(String, crate::geometry::Polygon)> = world
        .dilated_movables(r_eff)
        .into_iter()
        .filter(|(id, _)| id != obj)
        .collect();
    let mut localized = world.dilated_localized(r_eff);
    localized.extend(intrusions);
    let center = world.plan_center();
    let group = crate::topology::topology_check(center, center, &enclosing, &movables, &localized)
        .map(|r| r.freespace_group)
        .unwrap_or_else(|_| vec![enclosing.clone()]);
    interface::disassemble_target(world, obj, &group)
}

/// Infeasibility path shared by grounding failures and reactive reports:
/// abort any fix in progress, then ask the symbolic controller for an
/// alternative. Returns a verdict when the mission fails.
#[allow(clippy::too_many_arguments)]
fn handle_infeasible(
    graph: &TaskGraph,
    cs: &mut ControllerState,
    mode: &mut ModeState,
    world: &WorldState,
    events: &mut EventSink,
    t: f64,
    reason: &str,
    cost_of: &dyn Fn(&WorldState, &Symbol) -> f64,
) -> Option<Verdict> {
    if mode.mode == Mode::Fix {
        mode.abort_fix();
        events.push(t, format!("MODE {}", Mode::Ltl));
    }
    events.push(
        t,
        format!(
            "SYMBOLIC infeasible state={} target={} symbol={} reason={}",
            graph.state_name(cs.current),
            graph.state_name(cs.target),
            cs.pending_symbol(),
            reason
        ),
    );
    let cost = |s: &Symbol| cost_of(world, s);
    match symbolic::report_infeasible(graph, cs, Some(&cost)) {
        RecoverOutcome::Retry(next) => {
            *cs = next;
            events.push(t, cs.status_line(graph));
            None
        }
        RecoverOutcome::Failure(msg) => Some(Verdict::Failed { reason: msg }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scenario;

    #[test]
    fn zero_input_keeps_pose() {
        let p = RobotPose {
            position: Vec2::new(1.0, 2.0),
            theta: 0.7,
            gripper: false,
            carried: None,
        };
        let q = step_pose(&p, 0.0, 0.0, 0.01);
        assert_eq!(p, q);
    }

    #[test]
    fn straight_line_is_exact() {
        let p = RobotPose {
            position: Vec2::ZERO,
            theta: 0.0,
            gripper: false,
            carried: None,
        };
        let q = step_pose(&p, 1.0, 0.0, 0.01);
        assert!((q.position - Vec2::new(0.01, 0.0)).norm() < 1e-15);
        assert_eq!(q.theta, 0.0);
    }

    #[test]
    fn unit_arc_matches_closed_form() {
        // v = 1, w = 1 for one second: x = sin t, y = 1 - cos t, theta = t
        let mut p = RobotPose {
            position: Vec2::ZERO,
            theta: 0.0,
            gripper: false,
            carried: None,
        };
        let dt = 1e-3;
        for _ in 0..1000 {
            p = step_pose(&p, 1.0, 1.0, dt);
        }
        let want = Vec2::new(1.0_f64.sin(), 1.0 - 1.0_f64.cos());
        assert!(
            p.position.dist(want) < 1e-6,
            "endpoint error {}",
            p.position.dist(want)
        );
    }

    #[test]
    fn simple_mission_in_empty_world() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "regions": {"l1": [[7.5,2.5],[8.5,2.5],[8.5,3.5],[7.5,3.5]]},
            "robot": {"start": {"x": 1.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        let scenario = parse_scenario(&text).unwrap();
        let (log, world) = run(
            &scenario,
            "F pi(move, l1)",
            None,
            &RunLimits::default(),
        )
        .unwrap();
        assert!(log.verdict.is_satisfied(), "verdict {:?}", log.verdict);
        assert!(world.robot.position.dist(Vec2::new(8.0, 3.0)) <= 0.05 + 1e-9);
        assert!(log.min_clearance() > 0.0);
        assert_eq!(log.fix_episodes(), 0);
    }

    #[test]
    fn timestamps_strictly_increase() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "regions": {"l1": [[7.5,2.5],[8.5,2.5],[8.5,3.5],[7.5,3.5]]},
            "robot": {"start": {"x": 1.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        let scenario = parse_scenario(&text).unwrap();
        let (log, _) = run(&scenario, "F pi(move, l1)", None, &RunLimits::default()).unwrap();
        for w in log.ticks.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        for w in log.events.windows(2) {
            assert!(w[1].t >= w[0].t);
            assert!(w[1].seq > w[0].seq);
        }
    }

    #[test]
    fn grasp_and_release_mission() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[12.0,0.0],[12.0,8.0],[0.0,8.0]],
            "regions": {
                "l2": [[9.0,3.3],[10.4,3.3],[10.4,4.7],[9.0,4.7]]
            },
            "movables": {"o1": {"center": {"x": 4.0, "y": 4.0}, "radius": 0.3}},
            "robot": {"start": {"x": 1.0, "y": 4.0}, "radius": 0.25, "sensor_range": 2.5}
        })
        .to_string();
        let scenario = parse_scenario(&text).unwrap();
        let (log, world) = run(
            &scenario,
            "F (pi(grasp,o1) & F pi(release,o1,l2))",
            None,
            &RunLimits::default(),
        )
        .unwrap();
        assert!(log.verdict.is_satisfied(), "verdict {:?}", log.verdict);
        // the object ended inside the target region
        let obj = world.movable_centers["o1"];
        assert!(
            crate::geometry::contains(&world.scenario.regions["l2"], obj),
            "object at {obj:?}"
        );
        assert!(!world.robot.gripper);
        assert!(log.min_clearance() > -1e-3, "clearance {}", log.min_clearance());
    }
}
