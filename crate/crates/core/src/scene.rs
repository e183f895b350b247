//! Scenario files and the mutable world state of a running mission.

use crate::automaton::Symbol;
use crate::geometry::{self, Disk, Polygon, Shape};
use crate::ltl::Predicate;
use crate::reactive::RobotPose;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at {pointer}: {msg}")]
    Schema { pointer: String, msg: String },
    #[error("scenario invariants violated:\n{0}")]
    Invariants(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobotSpec {
    pub start: Vec2,
    #[serde(default)]
    pub theta: f64,
    pub radius: f64,
    pub sensor_range: f64,
}

/// Controller gains, caps and tolerances; every field has a default.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    pub v_max: f64,
    pub omega_max: f64,
    pub delta_goal: f64,
    pub eps_stuck: f64,
    pub k_v: f64,
    pub k_theta: f64,
    pub grasp_align_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            v_max: 1.0,
            omega_max: 2.0,
            delta_goal: 0.05,
            eps_stuck: 0.01,
            k_v: 1.0,
            k_theta: 2.0,
            grasp_align_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub workspace: Polygon,
    #[serde(default)]
    pub regions: BTreeMap<String, Polygon>,
    #[serde(default)]
    pub movables: BTreeMap<String, Disk>,
    #[serde(default)]
    pub familiar_obstacles: Vec<Polygon>,
    #[serde(default)]
    pub unknown_obstacles: Vec<Shape>,
    pub robot: RobotSpec,
    #[serde(default)]
    pub params: Params,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, SceneError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let scenario: Scenario =
        serde_path_to_error::deserialize(&mut de).map_err(|e| SceneError::Schema {
            pointer: format!("/{}", e.path().to_string().replace('.', "/")),
            msg: e.inner().to_string(),
        })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    /// Check every scenario invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), SceneError> {
        let mut bad: Vec<String> = Vec::new();
        if self.robot.radius <= 0.0 {
            bad.push("robot radius must be positive".to_string());
        }
        if self.robot.sensor_range <= 0.0 {
            bad.push("sensor range must be positive".to_string());
        }
        for (id, d) in &self.movables {
            if d.radius <= 0.0 {
                bad.push(format!("movable {id} has non-positive radius"));
            }
        }
        for (i, s) in self.unknown_obstacles.iter().enumerate() {
            if let Shape::Disk(d) = s {
                if d.radius <= 0.0 {
                    bad.push(format!("unknown obstacle {i} has non-positive radius"));
                }
            }
        }
        for (id, region) in &self.regions {
            let outside = geometry::boolean(
                geometry::BoolOp::Difference,
                std::slice::from_ref(region),
                std::slice::from_ref(&self.workspace),
            )
            .map(|d| d.iter().map(|p| p.area()).sum::<f64>())
            .unwrap_or(f64::INFINITY);
            if outside > geometry::EPS_AREA {
                bad.push(format!("region {id} is not contained in the workspace"));
            }
        }
        if self.start_clearance() < 0.0 {
            bad.push(format!(
                "robot start ({}, {}) is not in freespace (clearance {:.4})",
                self.robot.start.x,
                self.robot.start.y,
                self.start_clearance()
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SceneError::Invariants(bad.join("\n")))
        }
    }

    fn start_clearance(&self) -> f64 {
        let x = self.robot.start;
        let r = self.robot.radius;
        let mut clear = -geometry::signed_distance(&self.workspace, x) - r;
        for p in &self.familiar_obstacles {
            clear = clear.min(geometry::signed_distance(p, x) - r);
        }
        for s in &self.unknown_obstacles {
            let d = match s {
                Shape::Disk(d) => x.dist(d.center) - d.radius,
                Shape::Poly(p) => geometry::signed_distance(p, x),
            };
            clear = clear.min(d - r);
        }
        for d in self.movables.values() {
            clear = clear.min(x.dist(d.center) - d.radius - r);
        }
        clear
    }

    /// Separation advisories: unknown obstacles closer than 2r to any other
    /// obstacle or movable object undermine the separation assumptions.
    pub fn separation_warnings(&self) -> Vec<String> {
        let r = self.robot.radius;
        let mut out = Vec::new();
        let gap = |s: &Shape, other: &Shape| -> f64 {
            match (s, other) {
                (Shape::Disk(a), Shape::Disk(b)) => {
                    a.center.dist(b.center) - a.radius - b.radius
                }
                (Shape::Disk(a), Shape::Poly(p)) | (Shape::Poly(p), Shape::Disk(a)) => {
                    geometry::signed_distance(p, a.center) - a.radius
                }
                (Shape::Poly(a), Shape::Poly(b)) => {
                    let mut best = f64::INFINITY;
                    for v in &a.exterior {
                        best = best.min(geometry::signed_distance(b, *v));
                    }
                    for v in &b.exterior {
                        best = best.min(geometry::signed_distance(a, *v));
                    }
                    best
                }
            }
        };
        let mut others: Vec<(String, Shape)> = Vec::new();
        for (i, p) in self.familiar_obstacles.iter().enumerate() {
            others.push((format!("familiar obstacle {i}"), Shape::Poly(p.clone())));
        }
        for (id, d) in &self.movables {
            others.push((format!("movable {id}"), Shape::Disk(*d)));
        }
        for (i, s) in self.unknown_obstacles.iter().enumerate() {
            let name = format!("unknown obstacle {i}");
            for (oname, o) in &others {
                if gap(s, o) < 2.0 * r {
                    out.push(format!("{name} is within 2r of {oname}"));
                }
            }
            for (j, s2) in self.unknown_obstacles.iter().enumerate().skip(i + 1) {
                if gap(s, s2) < 2.0 * r {
                    out.push(format!("{name} is within 2r of unknown obstacle {j}"));
                }
            }
        }
        out
    }

    /// The predicate satisfied at t=0: the first region (by id) containing
    /// the start position, as a Move predicate; else the empty symbol.
    pub fn initial_symbol(&self) -> Symbol {
        for (id, region) in &self.regions {
            if geometry::contains(region, self.robot.start) {
                return Symbol::singleton(Predicate::move_to(id));
            }
        }
        Symbol::empty()
    }
}

/// The mutable world: robot pose, movable object poses and the monotonically
/// growing set of localized familiar obstacles.
#[derive(Clone, Debug)]
pub struct WorldState {
    pub scenario: Scenario,
    pub robot: RobotPose,
    pub movable_centers: BTreeMap<String, Vec2>,
    pub discovered: BTreeSet<usize>,
}

impl WorldState {
    pub fn new(scenario: Scenario) -> WorldState {
        let robot = RobotPose {
            position: scenario.robot.start,
            theta: scenario.robot.theta,
            gripper: false,
            carried: None,
        };
        let movable_centers = scenario
            .movables
            .iter()
            .map(|(id, d)| (id.clone(), d.center))
            .collect();
        WorldState {
            scenario,
            robot,
            movable_centers,
            discovered: BTreeSet::new(),
        }
    }

    pub fn movable_radius(&self, id: &str) -> f64 {
        self.scenario.movables[id].radius
    }

    pub fn movable_disk(&self, id: &str) -> Disk {
        Disk {
            center: self.movable_centers[id],
            radius: self.movable_radius(id),
        }
    }

    /// Robot radius, or the circumscribed pair radius while carrying.
    pub fn effective_radius(&self) -> f64 {
        let r = self.scenario.robot.radius;
        match &self.robot.carried {
            Some(id) => r + self.movable_radius(id),
            None => r,
        }
    }

    /// Center used for planning: the robot, or the pair center offset
    /// r + rho ahead of the wheel axis while carrying.
    pub fn plan_center(&self) -> Vec2 {
        match &self.robot.carried {
            Some(id) => {
                let d = self.scenario.robot.radius + self.movable_radius(id);
                self.robot.position + Vec2::from_angle(self.robot.theta) * d
            }
            None => self.robot.position,
        }
    }

    /// Dilated movable objects as polygons, excluding the carried object.
    pub fn dilated_movables(&self, by: f64) -> Vec<(String, Polygon)> {
        self.movable_centers
            .iter()
            .filter(|(id, _)| self.robot.carried.as_deref() != Some(id.as_str()))
            .map(|(id, &c)| {
                (
                    id.clone(),
                    geometry::circle_polygon(c, self.movable_radius(id) + by),
                )
            })
            .collect()
    }

    /// Dilated localized familiar obstacles.
    pub fn dilated_localized(&self, by: f64) -> Vec<Polygon> {
        self.discovered
            .iter()
            .map(|&i| {
                geometry::dilate(
                    &Shape::Poly(self.scenario.familiar_obstacles[i].clone()),
                    by,
                )
            })
            .collect()
    }

    pub fn region_centroid(&self, id: &str) -> Option<Vec2> {
        self.scenario.regions.get(id).map(|p| p.centroid())
    }

    /// Smallest distance margin between the robot body and every physical
    /// obstacle, other object and the workspace boundary; negative means
    /// penetration.
    pub fn min_clearance(&self) -> f64 {
        let x = self.robot.position;
        let r = self.scenario.robot.radius;
        let mut clear = -geometry::signed_distance(&self.scenario.workspace, x) - r;
        for p in &self.scenario.familiar_obstacles {
            clear = clear.min(geometry::signed_distance(p, x) - r);
        }
        for s in &self.scenario.unknown_obstacles {
            let d = match s {
                Shape::Disk(d) => x.dist(d.center) - d.radius,
                Shape::Poly(p) => geometry::signed_distance(p, x),
            };
            clear = clear.min(d - r);
        }
        for (id, &c) in &self.movable_centers {
            if self.robot.carried.as_deref() == Some(id.as_str()) {
                continue;
            }
            clear = clear.min(x.dist(c) - self.movable_radius(id) - r);
        }
        clear
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_scenario_json() -> String {
        serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "robot": {"start": {"x": 1.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string()
    }

    #[test]
    fn minimal_scenario_loads() {
        let s = parse_scenario(&minimal_scenario_json()).unwrap();
        assert!(s.regions.is_empty());
        assert_eq!(s.params.v_max, 1.0);
        assert_eq!(s.initial_symbol(), Symbol::empty());
    }

    #[test]
    fn start_inside_obstacle_rejected() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "familiar_obstacles": [[[0.0,2.0],[3.0,2.0],[3.0,4.0],[0.0,4.0]]],
            "robot": {"start": {"x": 1.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        match parse_scenario(&text) {
            Err(SceneError::Invariants(msg)) => assert!(msg.contains("freespace")),
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn region_outside_workspace_rejected() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "regions": {"l1": [[9.0,5.0],[12.0,5.0],[12.0,7.0],[9.0,7.0]]},
            "robot": {"start": {"x": 1.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        assert!(matches!(
            parse_scenario(&text),
            Err(SceneError::Invariants(_))
        ));
    }

    #[test]
    fn schema_error_carries_pointer() {
        let text = r#"{"workspace": [[0,0],[10,0],[10,6],[0,6]], "robot": {"start": {"x": "oops", "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}}"#;
        match parse_scenario(text) {
            Err(SceneError::Schema { pointer, .. }) => {
                assert!(pointer.contains("robot"), "pointer was {pointer}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn initial_symbol_from_start_region() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "regions": {"l1": [[0.5,2.5],[1.5,2.5],[1.5,3.5],[0.5,3.5]]},
            "robot": {"start": {"x": 1.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        let s = parse_scenario(&text).unwrap();
        assert_eq!(
            s.initial_symbol(),
            Symbol::singleton(Predicate::move_to("l1"))
        );
    }

    #[test]
    fn separation_warning_for_close_unknowns() {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "movables": {"o1": {"center": {"x": 5.0, "y": 3.0}, "radius": 0.3}},
            "unknown_obstacles": [{"disk": {"center": {"x": 5.8, "y": 3.0}, "radius": 0.3}}],
            "robot": {"start": {"x": 1.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        let s = parse_scenario(&text).unwrap();
        let w = s.separation_warnings();
        assert_eq!(w.len(), 1, "{w:?}");
    }
}
