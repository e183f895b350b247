//! SVG snapshots of a run: workspace, obstacles, regions, robot and
//! trajectory. Object motion is reconstructed from the tick records (objects
//! move only while carried, rigidly attached to the gripper frame).

use super::log::{TickRecord, TrajectoryLog};
use crate::geometry::Shape;
use crate::scene::Scenario;
use crate::vec2::Vec2;
use std::collections::BTreeMap;
use std::fmt::Write as _;

const SCALE: f64 = 60.0; // pixels per meter
const MARGIN: f64 = 20.0;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("time {0} outside the log range")]
    OutOfRange(f64),
    #[error("empty log")]
    EmptyLog,
}

/// Render one frame per mode-change event (plus start and end), named
/// frame_000.svg, frame_001.svg, ...
pub fn render_all(log: &TrajectoryLog, scenario: &Scenario) -> Vec<(String, String)> {
    let mut times = vec![0.0];
    for e in &log.events {
        if e.line.starts_with("MODE ") {
            times.push(e.t);
        }
    }
    if let Some(last) = log.ticks.last() {
        times.push(last.t);
    }
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            (
                format!("frame_{i:03}.svg"),
                render_at(log, scenario, t).unwrap_or_default(),
            )
        })
        .collect()
}

/// Render the scene at simulated time `t`.
pub fn render_at(log: &TrajectoryLog, scenario: &Scenario, t: f64) -> Result<String, RenderError> {
    let last_t = log.ticks.last().map(|r| r.t).unwrap_or(0.0);
    if t < 0.0 || t > last_t + 1e-9 {
        return Err(RenderError::OutOfRange(t));
    }
    let upto: Vec<&TickRecord> = log.ticks.iter().filter(|r| r.t <= t + 1e-9).collect();
    let pose = upto.last();

    // reconstruct object centers: follow the gripper while carried
    let mut centers: BTreeMap<String, Vec2> = scenario
        .movables
        .iter()
        .map(|(id, d)| (id.clone(), d.center))
        .collect();
    for r in &upto {
        if r.carried != "-" {
            if let Some(d) = scenario.movables.get(&r.carried) {
                let offset = scenario.robot.radius + d.radius;
                centers.insert(
                    r.carried.clone(),
                    Vec2::new(r.x, r.y) + Vec2::from_angle(r.theta) * offset,
                );
            }
        }
    }

    // discovery times from events
    let discovered: Vec<usize> = log
        .events
        .iter()
        .filter(|e| e.t <= t + 1e-9)
        .filter_map(|e| e.line.strip_prefix("DISCOVER obstacle="))
        .filter_map(|s| s.parse().ok())
        .collect();

    let (min, max) = scenario.workspace.bounds();
    let width = (max.x - min.x) * SCALE + 2.0 * MARGIN;
    let height = (max.y - min.y) * SCALE + 2.0 * MARGIN;
    let px = |p: Vec2| -> (f64, f64) {
        (
            MARGIN + (p.x - min.x) * SCALE,
            height - (MARGIN + (p.y - min.y) * SCALE),
        )
    };
    let ring_path = |ring: &[Vec2]| -> String {
        let mut s = String::new();
        for (i, v) in ring.iter().enumerate() {
            let (x, y) = px(*v);
            let _ = write!(s, "{}{x:.1} {y:.1} ", if i == 0 { "M" } else { "L" });
        }
        s.push('Z');
        s
    };
    let poly_path = |p: &crate::geometry::Polygon| -> String {
        p.rings().map(ring_path).collect::<Vec<_>>().join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="100%" height="100%" fill="white"/><path d="{}" fill="none" stroke="black" stroke-width="2"/>"#,
        poly_path(&scenario.workspace)
    );
    // regions
    for (id, region) in &scenario.regions {
        let _ = writeln!(
            svg,
            r##"<path d="{}" fill="#d9f2d9" stroke="green" stroke-width="1"/>"##,
            poly_path(region)
        );
        let (cx, cy) = px(region.centroid());
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.1}" y="{cy:.1}" font-size="12" text-anchor="middle" fill="green">{id}</text>"#
        );
    }
    // familiar obstacles: black once localized, dark grey before
    for (i, p) in scenario.familiar_obstacles.iter().enumerate() {
        let fill = if discovered.contains(&i) {
            "#1a1a1a"
        } else {
            "#707070"
        };
        let _ = writeln!(svg, r##"<path d="{}" fill="{fill}"/>"##, poly_path(p));
    }
    // unknown obstacles: light grey
    for s in &scenario.unknown_obstacles {
        match s {
            Shape::Disk(d) => {
                let (cx, cy) = px(d.center);
                let _ = writeln!(
                    svg,
                    r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{:.1}" fill="#c8c8c8"/>"##,
                    d.radius * SCALE
                );
            }
            Shape::Poly(p) => {
                let _ = writeln!(svg, r##"<path d="{}" fill="#c8c8c8"/>"##, poly_path(p));
            }
        }
    }
    // movable objects
    for (id, center) in &centers {
        let (cx, cy) = px(*center);
        let r = scenario.movables[id].radius * SCALE;
        let _ = writeln!(
            svg,
            r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{r:.1}" fill="#7aa6d9" stroke="#2a5a9a"/><text x="{cx:.1}" y="{cy:.1}" font-size="10" text-anchor="middle">{id}</text>"##
        );
    }
    // trajectory polyline
    if upto.len() > 1 {
        let mut pts = String::new();
        for r in upto.iter().step_by(5) {
            let (x, y) = px(Vec2::new(r.x, r.y));
            let _ = write!(pts, "{x:.1},{y:.1} ");
        }
        let _ = writeln!(
            svg,
            r##"<polyline points="{pts}" fill="none" stroke="#cc4444" stroke-width="1"/>"##
        );
    }
    // robot disk and heading tick
    if let Some(r) = pose {
        let (cx, cy) = px(Vec2::new(r.x, r.y));
        let rr = scenario.robot.radius * SCALE;
        let tip = px(Vec2::new(r.x, r.y) + Vec2::from_angle(r.theta) * scenario.robot.radius);
        let _ = writeln!(
            svg,
            r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{rr:.1}" fill="#e8b84a" stroke="black"/><line x1="{cx:.1}" y1="{cy:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"##,
            tip.0, tip.1
        );
    }
    let _ = writeln!(svg, "<text x=\"10\" y=\"16\" font-size=\"12\">t = {t:.2}s</text>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scenario;
    use crate::sim::{run, RunLimits};

    fn small_run() -> (TrajectoryLog, Scenario) {
        let text = serde_json::json!({
            "workspace": [[0.0,0.0],[10.0,0.0],[10.0,6.0],[0.0,6.0]],
            "regions": {"l1": [[7.5,2.5],[8.5,2.5],[8.5,3.5],[7.5,3.5]]},
            "robot": {"start": {"x": 1.0, "y": 3.0}, "radius": 0.25, "sensor_range": 2.0}
        })
        .to_string();
        let scenario = parse_scenario(&text).unwrap();
        let (log, _) = run(&scenario, "F pi(move, l1)", None, &RunLimits::default()).unwrap();
        (log, scenario)
    }

    #[test]
    fn initial_frame_has_no_trajectory() {
        let (log, scenario) = small_run();
        let svg = render_at(&log, &scenario, 0.0).unwrap();
        assert!(svg.contains("<svg"));
        assert!(!svg.contains("polyline"));
    }

    #[test]
    fn out_of_range_time_is_an_error() {
        let (log, scenario) = small_run();
        assert!(matches!(
            render_at(&log, &scenario, 1e9),
            Err(RenderError::OutOfRange(_))
        ));
    }

    #[test]
    fn one_frame_per_mode_change_plus_ends() {
        let (log, scenario) = small_run();
        let frames = render_all(&log, &scenario);
        // no mode changes in the empty world: start + end
        assert_eq!(frames.len(), 2 + log.fix_episodes() * 2);
        for (_, svg) in &frames {
            assert!(svg.contains("</svg>"));
        }
    }
}
