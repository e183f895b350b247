//! Freespace topology checking: detect disconnections caused by movable
//! objects or fixed obstacles, update the enclosing freespace, and extract
//! the stack of blocking movable objects.

use crate::geometry::{self, BoolOp, Polygon};
use crate::vec2::Vec2;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("robot position ({0}, {1}) lies in no freespace component")]
    RobotInObstacle(f64, f64),
    #[error("connectivity is not a tree: a movable cluster touches more than two freespace components in a cycle")]
    CycleDetected,
    #[error("goal ({0}, {1}) is not contained in any connectivity-tree vertex")]
    GoalNotInTree(f64, f64),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

/// Result of one topology check.
#[derive(Clone, Debug)]
pub struct TopologyResult {
    /// convex hull of the robot's freespace component
    pub enclosing_freespace: Polygon,
    /// the polygon of the robot's freespace component that contains the robot
    pub freespace: Polygon,
    /// every polygon of the robot's freespace component (point-touching parts)
    pub freespace_group: Vec<Polygon>,
    pub is_feasible: bool,
    /// blocking movable objects, nearest-to-goal cluster first
    pub blocking: Vec<String>,
}

/// Bipartite adjacency tree over freespace components and movable-object
/// clusters, rooted at the robot's component.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectivityTree {
    /// vertex labels: freespace component index or cluster index
    pub vertices: Vec<TreeVertex>,
    /// parent vertex index per vertex; root maps to itself
    pub parent: Vec<usize>,
    pub root: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TreeVertex {
    Free(usize),
    Cluster(usize),
}

/// One movable-object cluster: a closure-connected group of dilated objects.
#[derive(Clone, Debug)]
pub struct Cluster {
    pub objects: Vec<String>,
    pub polys: Vec<Polygon>,
}

/// The topology checking algorithm.
///
/// Subtracts the dilated movable objects `movables` and localized familiar
/// obstacles `localized` from the enclosing freespace, identifies the robot's
/// component, re-derives the enclosing freespace as its convex hull, and
/// classifies the goal: directly reachable, blocked by movables (returning
/// the blocking stack), or blocked by fixed obstacles.
pub fn topology_check(
    x: Vec2,
    goal: Vec2,
    enclosing: &Polygon,
    movables: &[(String, Polygon)],
    localized: &[Polygon],
) -> Result<TopologyResult, TopologyError> {
    let mut obstacles: Vec<Polygon> = movables.iter().map(|(_, p)| p.clone()).collect();
    obstacles.extend(localized.iter().cloned());
    let free_polys = geometry::boolean(
        BoolOp::Difference,
        std::slice::from_ref(enclosing),
        &obstacles,
    )?;
    let free_groups = geometry::components(&free_polys);
    let robot_group = free_groups
        .iter()
        .position(|g| g.iter().any(|p| geometry::contains(p, x)))
        .ok_or(TopologyError::RobotInObstacle(x.x, x.y))?;
    let freespace = free_groups[robot_group]
        .iter()
        .find(|p| geometry::contains(p, x))
        .unwrap()
        .clone();
    let enclosing_freespace = geometry::convex_hull(&free_groups[robot_group])?;

    let goal_free = free_groups[robot_group]
        .iter()
        .any(|p| geometry::contains(p, goal));
    if goal_free {
        return Ok(TopologyResult {
            enclosing_freespace,
            freespace,
            freespace_group: free_groups[robot_group].clone(),
            is_feasible: true,
            blocking: Vec::new(),
        });
    }

    // is the goal separated from the robot only by movable objects?
    let mut union_members: Vec<Polygon> = free_polys.clone();
    union_members.extend(movables.iter().map(|(_, p)| p.clone()));
    let joint_groups = geometry::components(&union_members);
    let robot_joint = joint_groups
        .iter()
        .position(|g| g.iter().any(|p| geometry::contains(p, x)))
        .ok_or(TopologyError::RobotInObstacle(x.x, x.y))?;
    let goal_joint = joint_groups
        .iter()
        .position(|g| g.iter().any(|p| geometry::contains(p, goal)));
    if goal_joint != Some(robot_joint) {
        // blocked by fixed obstacles
        return Ok(TopologyResult {
            enclosing_freespace,
            freespace,
            freespace_group: free_groups[robot_group].clone(),
            is_feasible: false,
            blocking: Vec::new(),
        });
    }

    let clusters = movable_clusters(movables);
    let tree = connectivity_tree(&free_groups, &clusters, robot_group)?;
    let blocking = backtrack_blocking(&tree, goal, &free_groups, &clusters)?;
    Ok(TopologyResult {
        enclosing_freespace,
        freespace,
        freespace_group: free_groups[robot_group].clone(),
        is_feasible: true,
        blocking,
    })
}

/// Group dilated movable objects into closure-connected clusters.
pub fn movable_clusters(movables: &[(String, Polygon)]) -> Vec<Cluster> {
    let polys: Vec<Polygon> = movables.iter().map(|(_, p)| p.clone()).collect();
    let groups = geometry::components(&polys);
    groups
        .into_iter()
        .map(|group| {
            let mut objects: Vec<String> = movables
                .iter()
                .filter(|(_, p)| group.contains(p))
                .map(|(id, _)| id.clone())
                .collect();
            objects.sort();
            Cluster {
                objects,
                polys: group,
            }
        })
        .collect()
}

/// Breadth-first adjacency tree over freespace components and movable
/// clusters, rooted at the robot's freespace component. Vertices alternate
/// between the two kinds along any path. Reports an error when adjacency
/// contains a cycle (a cluster bridging components in more than one way).
pub fn connectivity_tree(
    free_groups: &[Vec<Polygon>],
    clusters: &[Cluster],
    root_group: usize,
) -> Result<ConnectivityTree, TopologyError> {
    let n = free_groups.len() + clusters.len();
    let vid = |v: TreeVertex| match v {
        TreeVertex::Free(i) => i,
        TreeVertex::Cluster(i) => free_groups.len() + i,
    };
    let mut vertices = Vec::with_capacity(n);
    for i in 0..free_groups.len() {
        vertices.push(TreeVertex::Free(i));
    }
    for i in 0..clusters.len() {
        vertices.push(TreeVertex::Cluster(i));
    }
    let touches = |a: &[Polygon], b: &[Polygon]| -> bool {
        a.iter().any(|pa| {
            b.iter()
                .any(|pb| pa.to_geo_intersects(pb))
        })
    };
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let root = vid(TreeVertex::Free(root_group));
    parent[root] = Some(root);
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let neighbours: Vec<usize> = match vertices[v] {
            TreeVertex::Free(fi) => (0..clusters.len())
                .filter(|&ci| touches(&free_groups[fi], &clusters[ci].polys))
                .map(|ci| vid(TreeVertex::Cluster(ci)))
                .collect(),
            TreeVertex::Cluster(ci) => (0..free_groups.len())
                .filter(|&fi| touches(&free_groups[fi], &clusters[ci].polys))
                .map(|fi| vid(TreeVertex::Free(fi)))
                .collect(),
        };
        for w in neighbours {
            if w == parent[v].unwrap() {
                continue;
            }
            if parent[w].is_some() {
                return Err(TopologyError::CycleDetected);
            }
            parent[w] = Some(v);
            queue.push_back(w);
        }
    }
    Ok(ConnectivityTree {
        vertices,
        parent: parent
            .into_iter()
            .map(|p| p.unwrap_or(usize::MAX))
            .collect(),
        root,
    })
}

/// Walk from the tree vertex containing the goal back to the root, pushing
/// the objects of every movable cluster encountered along the way.
pub fn backtrack_blocking(
    tree: &ConnectivityTree,
    goal: Vec2,
    free_groups: &[Vec<Polygon>],
    clusters: &[Cluster],
) -> Result<Vec<String>, TopologyError> {
    let contains_goal = |v: TreeVertex| -> bool {
        match v {
            TreeVertex::Free(i) => free_groups[i].iter().any(|p| geometry::contains(p, goal)),
            TreeVertex::Cluster(i) => clusters[i]
                .polys
                .iter()
                .any(|p| geometry::contains(p, goal)),
        }
    };
    // clusters take priority: a goal on a shared boundary is a blocked goal
    let start = tree
        .vertices
        .iter()
        .enumerate()
        .filter(|(i, _)| tree.parent[*i] != usize::MAX)
        .filter(|(_, v)| matches!(v, TreeVertex::Cluster(_)))
        .chain(
            tree.vertices
                .iter()
                .enumerate()
                .filter(|(i, _)| tree.parent[*i] != usize::MAX)
                .filter(|(_, v)| matches!(v, TreeVertex::Free(_))),
        )
        .find(|(_, v)| contains_goal(**v))
        .map(|(i, _)| i)
        .ok_or(TopologyError::GoalNotInTree(goal.x, goal.y))?;
    let mut blocking = Vec::new();
    let mut cur = start;
    loop {
        if let TreeVertex::Cluster(ci) = tree.vertices[cur] {
            for obj in &clusters[ci].objects {
                if !blocking.contains(obj) {
                    blocking.push(obj.clone());
                }
            }
        }
        if cur == tree.root {
            break;
        }
        cur = tree.parent[cur];
    }
    Ok(blocking)
}

impl Polygon {
    fn to_geo_intersects(&self, other: &Polygon) -> bool {
        use geo::Intersects;
        self.to_geo().intersects(&other.to_geo())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{circle_polygon, Polygon};

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::rectangle(Vec2::new(x0, y0), Vec2::new(x1, y1))
    }

    #[test]
    fn empty_world_is_feasible() {
        let ws = rect(0.0, 0.0, 10.0, 10.0);
        let r = topology_check(
            Vec2::new(1.0, 1.0),
            Vec2::new(9.0, 9.0),
            &ws,
            &[],
            &[],
        )
        .unwrap();
        assert!(r.is_feasible);
        assert!(r.blocking.is_empty());
        // hull of the full workspace is the workspace
        assert!((r.enclosing_freespace.area() - 100.0).abs() < 1e-3);
    }

    /// Two rectangles form a corridor plugged by one movable disk.
    #[test]
    fn corridor_plugged_by_movable() {
        let ws = rect(0.0, 0.0, 10.0, 6.0);
        let top = rect(4.0, 3.4, 6.0, 6.0);
        let bottom = rect(4.0, 0.0, 6.0, 2.6);
        // dilated movable disk blocks the 0.8-wide corridor
        let plug = circle_polygon(Vec2::new(5.0, 3.0), 0.55);
        let r = topology_check(
            Vec2::new(1.0, 3.0),
            Vec2::new(9.0, 3.0),
            &ws,
            &[("o1".to_string(), plug)],
            &[top, bottom],
        )
        .unwrap();
        assert!(r.is_feasible);
        assert_eq!(r.blocking, vec!["o1".to_string()]);
    }

    #[test]
    fn goal_walled_in_by_fixed_obstacles() {
        let ws = rect(0.0, 0.0, 10.0, 6.0);
        // a box of walls fully enclosing the goal
        let walls = vec![
            rect(7.0, 1.0, 9.0, 1.5),
            rect(7.0, 4.5, 9.0, 5.0),
            rect(7.0, 1.0, 7.5, 5.0),
            rect(8.5, 1.0, 9.0, 5.0),
        ];
        let r = topology_check(
            Vec2::new(1.0, 3.0),
            Vec2::new(8.0, 3.0),
            &ws,
            &[],
            &walls,
        )
        .unwrap();
        assert!(!r.is_feasible);
        assert!(r.blocking.is_empty());
    }

    #[test]
    fn robot_in_obstacle_is_an_error() {
        let ws = rect(0.0, 0.0, 4.0, 4.0);
        let wall = rect(0.5, 0.5, 3.5, 3.5);
        assert!(matches!(
            topology_check(Vec2::new(2.0, 2.0), Vec2::new(0.1, 0.1), &ws, &[], &[wall]),
            Err(TopologyError::RobotInObstacle(_, _))
        ));
    }

    #[test]
    fn chain_tree_and_backtrack_order() {
        // root component | cluster A | middle component | cluster B | goal component
        let ws = rect(0.0, 0.0, 10.0, 2.0);
        let a = rect(2.0, 0.0, 3.0, 2.0);
        let b = rect(6.0, 0.0, 7.0, 2.0);
        let movs = vec![("a1".to_string(), a), ("b1".to_string(), b)];
        let r = topology_check(
            Vec2::new(1.0, 1.0),
            Vec2::new(9.0, 1.0),
            &ws,
            &movs,
            &[],
        )
        .unwrap();
        assert!(r.is_feasible);
        // nearer-to-goal cluster's objects pushed first
        assert_eq!(r.blocking, vec!["b1".to_string(), "a1".to_string()]);
    }

    #[test]
    fn touching_disks_form_one_cluster() {
        let ws = rect(0.0, 0.0, 10.0, 4.0);
        // overlapping chain spanning the full corridor height
        let c1 = circle_polygon(Vec2::new(5.0, 0.5), 0.9);
        let c2 = circle_polygon(Vec2::new(5.0, 2.0), 0.9);
        let c3 = circle_polygon(Vec2::new(5.0, 3.5), 0.9);
        let movs = vec![
            ("m1".to_string(), c1),
            ("m2".to_string(), c2),
            ("m3".to_string(), c3),
        ];
        let clusters = movable_clusters(&movs);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].objects.len(), 3);
        // wall of disks blocks the corridor: all three are pushed
        let r = topology_check(
            Vec2::new(1.0, 2.0),
            Vec2::new(9.0, 2.0),
            &ws,
            &movs,
            &[],
        )
        .unwrap();
        assert!(r.is_feasible);
        assert_eq!(r.blocking.len(), 3);
    }

    #[test]
    fn parallel_plugged_corridors_detect_cycle() {
        // two separate clusters each plug a corridor between the same pair
        // of components: adjacency has a cycle, not a tree
        let ws = rect(0.0, 0.0, 10.0, 6.0);
        let wall_mid = rect(4.0, 2.0, 6.0, 4.0); // splits corridor into two
        let plug_top = rect(4.0, 4.5, 6.0, 6.0);
        let plug_bottom = rect(4.0, 0.0, 6.0, 1.5);
        // each movable bridges one gap: y in [1.5, 2.0] and [4.0, 4.5]
        let bridge1 = rect(4.5, 1.4, 5.5, 2.1);
        let bridge2 = rect(4.5, 3.9, 5.5, 4.6);
        let movs = vec![
            ("m1".to_string(), bridge1),
            ("m2".to_string(), bridge2),
        ];
        let r = topology_check(
            Vec2::new(1.0, 3.0),
            Vec2::new(9.0, 3.0),
            &ws,
            &movs,
            &[wall_mid, plug_top, plug_bottom],
        );
        assert!(matches!(r, Err(TopologyError::CycleDetected)));
    }

    #[test]
    fn idempotent_on_unchanged_world() {
        let ws = rect(0.0, 0.0, 10.0, 6.0);
        let top = rect(4.0, 3.4, 6.0, 6.0);
        let bottom = rect(4.0, 0.0, 6.0, 2.6);
        let plug = circle_polygon(Vec2::new(5.0, 3.0), 0.55);
        let movs = vec![("o1".to_string(), plug)];
        let walls = vec![top, bottom];
        let r1 = topology_check(Vec2::new(1.0, 3.0), Vec2::new(9.0, 3.0), &ws, &movs, &walls)
            .unwrap();
        let r2 = topology_check(Vec2::new(1.0, 3.0), Vec2::new(9.0, 3.0), &ws, &movs, &walls)
            .unwrap();
        assert_eq!(r1.is_feasible, r2.is_feasible);
        assert_eq!(r1.blocking, r2.blocking);
        assert_eq!(r1.enclosing_freespace, r2.enclosing_freespace);
    }
}
