//! Grid flood-fill reachability oracle, used to cross-check the polygonal
//! topology pipeline. Deliberately independent of the geometry kernel: it
//! rasterizes the scene with its own point-in-polygon and distance tests and
//! runs a 4-connected breadth-first fill.

use crate::geometry::Shape;
use crate::scene::WorldState;
use crate::vec2::Vec2;

/// Verdict of the grid oracle for one (start, goal) query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleResult {
    /// goal reachable through freespace alone
    pub direct: bool,
    /// goal reachable when movable objects are passable
    pub through_movables: bool,
}

pub const DEFAULT_RESOLUTION: f64 = 0.01;

/// even-odd crossing test, boundary treatment irrelevant at grid scale
fn point_in_ring(ring: &[Vec2], p: Vec2) -> bool {
    let mut inside = false;
    let n = ring.len();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            if p.x < a.x + t * (b.x - a.x) {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_in_poly(poly: &crate::geometry::Polygon, p: Vec2) -> bool {
    if !point_in_ring(&poly.exterior, p) {
        return false;
    }
    for h in &poly.holes {
        if point_in_ring(h, p) {
            return false;
        }
    }
    true
}

fn dist_to_ring(ring: &[Vec2], p: Vec2) -> f64 {
    let n = ring.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let ab = b - a;
        let len_sq = ab.norm_sq();
        let t = if len_sq > 0.0 {
            ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        best = best.min(p.dist(a + ab * t));
    }
    best
}

fn dist_to_poly_boundary(poly: &crate::geometry::Polygon, p: Vec2) -> f64 {
    let mut best = dist_to_ring(&poly.exterior, p);
    for h in &poly.holes {
        best = best.min(dist_to_ring(h, p));
    }
    best
}

/// Flood-fill reachability of `goal` from the current plan center, with
/// obstacles dilated by the effective radius. Pass `localized_only = true`
/// to restrict fixed obstacles to the discovered set (matching what the
/// topology pipeline knows), `false` for ground truth.
pub fn flood_fill_check(
    world: &WorldState,
    goal: Vec2,
    resolution: f64,
    localized_only: bool,
) -> OracleResult {
    let scen = &world.scenario;
    let r_eff = world.effective_radius();
    let (min, max) = scen.workspace.bounds();
    let nx = ((max.x - min.x) / resolution).ceil() as usize + 1;
    let ny = ((max.y - min.y) / resolution).ceil() as usize + 1;
    let cell_center = |i: usize, j: usize| -> Vec2 {
        Vec2::new(
            min.x + (i as f64 + 0.5) * resolution,
            min.y + (j as f64 + 0.5) * resolution,
        )
    };

    let fixed: Vec<&crate::geometry::Polygon> = scen
        .familiar_obstacles
        .iter()
        .enumerate()
        .filter(|(i, _)| !localized_only || world.discovered.contains(i))
        .map(|(_, p)| p)
        .collect();

    // 0 = blocked, 1 = free, 2 = movable-covered (passable in phase two)
    let mut grid = vec![0u8; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = cell_center(i, j);
            if !point_in_poly(&scen.workspace, p)
                || dist_to_poly_boundary(&scen.workspace, p) < r_eff
            {
                continue;
            }
            let mut blocked = false;
            for poly in &fixed {
                if point_in_poly(poly, p) || dist_to_poly_boundary(poly, p) < r_eff {
                    blocked = true;
                    break;
                }
            }
            if !blocked && !localized_only {
                for s in &scen.unknown_obstacles {
                    let hit = match s {
                        Shape::Disk(d) => p.dist(d.center) < d.radius + r_eff,
                        Shape::Poly(poly) => {
                            point_in_poly(poly, p) || dist_to_poly_boundary(poly, p) < r_eff
                        }
                    };
                    if hit {
                        blocked = true;
                        break;
                    }
                }
            }
            if blocked {
                continue;
            }
            let mut covered = false;
            for (id, &c) in &world.movable_centers {
                if world.robot.carried.as_deref() == Some(id.as_str()) {
                    continue;
                }
                if p.dist(c) < world.movable_radius(id) + r_eff {
                    covered = true;
                    break;
                }
            }
            grid[j * nx + i] = if covered { 2 } else { 1 };
        }
    }

    let to_cell = |p: Vec2| -> Option<(usize, usize)> {
        let i = ((p.x - min.x) / resolution - 0.5).round();
        let j = ((p.y - min.y) / resolution - 0.5).round();
        if i < 0.0 || j < 0.0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        if i >= nx || j >= ny {
            return None;
        }
        Some((i, j))
    };
    let start = to_cell(world.plan_center());
    let goal_cell = to_cell(goal);
    let (Some(start), Some(goal_cell)) = (start, goal_cell) else {
        return OracleResult {
            direct: false,
            through_movables: false,
        };
    };

    let bfs = |passable: &dyn Fn(u8) -> bool| -> bool {
        if !passable(grid[start.1 * nx + start.0]) || !passable(grid[goal_cell.1 * nx + goal_cell.0])
        {
            return false;
        }
        let mut seen = vec![false; nx * ny];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start.1 * nx + start.0] = true;
        while let Some((i, j)) = queue.pop_front() {
            if (i, j) == goal_cell {
                return true;
            }
            let neighbours = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (a, b) in neighbours {
                if a < nx && b < ny && !seen[b * nx + a] && passable(grid[b * nx + a]) {
                    seen[b * nx + a] = true;
                    queue.push_back((a, b));
                }
            }
        }
        false
    };

    OracleResult {
        direct: bfs(&|c| c == 1),
        through_movables: bfs(&|c| c >= 1),
    }
}
