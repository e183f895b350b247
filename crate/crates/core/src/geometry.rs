//! Polygon kernel: boolean set operations, dilation/erosion by a disk,
//! convex hulls, connectivity components and membership predicates.
//!
//! Circles are represented as equal-area 16-gons so the kernel stays purely
//! polygonal. Boolean operations are delegated to `geo`, everything else is
//! implemented directly on vertex lists.

use crate::vec2::Vec2;
use geo::{BooleanOps, Contains, ConvexHull, Intersects};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Predicate snapping tolerance, in meters.
pub const EPS_PREDICATE: f64 = 1e-9;
/// Tolerance for area comparisons, in square meters.
pub const EPS_AREA: f64 = 1e-6;

/// Number of segments used to approximate a circle.
const CIRCLE_SEGMENTS: usize = 16;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate input: polygon area {0} below tolerance")]
    DegenerateInput(f64),
    #[error("ring must have at least 3 vertices, got {0}")]
    ShortRing(usize),
    #[error("empty input set")]
    EmptyInput,
}

/// A simple polygon with optional holes. Exterior is counter-clockwise,
/// holes are clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub exterior: Vec<Vec2>,
    pub holes: Vec<Vec<Vec2>>,
}

/// A disk-shaped object (movable objects, the robot, unknown obstacles).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

/// Union of the kernel's shape kinds; used where either is accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    #[serde(rename = "polygon")]
    Poly(Polygon),
    #[serde(rename = "disk")]
    Disk(Disk),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoolOp {
    Union,
    Difference,
    Intersection,
}

impl Polygon {
    /// Validates ring sizes and area, and normalizes ring orientation.
    pub fn new(exterior: Vec<Vec2>, holes: Vec<Vec<Vec2>>) -> Result<Self, GeometryError> {
        if exterior.len() < 3 {
            return Err(GeometryError::ShortRing(exterior.len()));
        }
        for h in &holes {
            if h.len() < 3 {
                return Err(GeometryError::ShortRing(h.len()));
            }
        }
        let mut poly = Polygon { exterior, holes };
        poly.normalize_orientation();
        let a = poly.area();
        if a <= EPS_PREDICATE {
            return Err(GeometryError::DegenerateInput(a));
        }
        Ok(poly)
    }

    pub fn rectangle(min: Vec2, max: Vec2) -> Polygon {
        Polygon {
            exterior: vec![
                Vec2::new(min.x, min.y),
                Vec2::new(max.x, min.y),
                Vec2::new(max.x, max.y),
                Vec2::new(min.x, max.y),
            ],
            holes: vec![],
        }
    }

    fn normalize_orientation(&mut self) {
        if ring_signed_area(&self.exterior) < 0.0 {
            self.exterior.reverse();
        }
        for h in &mut self.holes {
            if ring_signed_area(h) > 0.0 {
                h.reverse();
            }
        }
    }

    /// Area of the polygon, holes subtracted.
    pub fn area(&self) -> f64 {
        let mut a = ring_signed_area(&self.exterior);
        for h in &self.holes {
            a += ring_signed_area(h); // holes are CW, negative area
        }
        a
    }

    /// Area centroid of the exterior-with-holes region.
    pub fn centroid(&self) -> Vec2 {
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        let mut accumulate = |ring: &[Vec2]| {
            let n = ring.len();
            for i in 0..n {
                let p = ring[i];
                let q = ring[(i + 1) % n];
                let w = p.cross(q);
                cx += (p.x + q.x) * w;
                cy += (p.y + q.y) * w;
                a += w;
            }
        };
        accumulate(&self.exterior);
        for h in &self.holes {
            accumulate(h);
        }
        if a.abs() < EPS_PREDICATE {
            // fall back to vertex mean for degenerate rings
            let n = self.exterior.len() as f64;
            let s = self
                .exterior
                .iter()
                .fold(Vec2::ZERO, |acc, p| acc + *p);
            return s / n;
        }
        Vec2::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Vec2]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.exterior {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }

    pub(crate) fn to_geo(&self) -> geo::Polygon<f64> {
        geo::Polygon::new(
            ring_to_geo(&self.exterior),
            self.holes.iter().map(|h| ring_to_geo(h)).collect(),
        )
    }

    pub(crate) fn from_geo(p: &geo::Polygon<f64>) -> Polygon {
        let mut poly = Polygon {
            exterior: ring_from_geo(p.exterior()),
            holes: p.interiors().iter().map(ring_from_geo).collect(),
        };
        poly.normalize_orientation();
        poly
    }
}

// Polygons serialize as an array of rings, exterior first, holes after.
// Deserialization also accepts a bare ring for convenience in scenario files.
impl Serialize for Polygon {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rings: Vec<Vec<[f64; 2]>> = self
            .rings()
            .map(|r| r.iter().map(|p| [p.x, p.y]).collect())
            .collect();
        rings.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polygon {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Rings(Vec<Vec<[f64; 2]>>),
            Ring(Vec<[f64; 2]>),
        }
        let repr = Repr::deserialize(deserializer)?;
        let rings: Vec<Vec<Vec2>> = match repr {
            Repr::Ring(r) => vec![r.into_iter().map(|[x, y]| Vec2::new(x, y)).collect()],
            Repr::Rings(rs) => rs
                .into_iter()
                .map(|r| r.into_iter().map(|[x, y]| Vec2::new(x, y)).collect())
                .collect(),
        };
        let mut iter = rings.into_iter();
        let exterior = iter.next().ok_or_else(|| D::Error::custom("empty polygon"))?;
        Polygon::new(exterior, iter.collect()).map_err(D::Error::custom)
    }
}

fn ring_signed_area(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    let mut a = 0.0;
    for i in 0..n {
        a += ring[i].cross(ring[(i + 1) % n]);
    }
    a / 2.0
}

fn ring_to_geo(ring: &[Vec2]) -> geo::LineString<f64> {
    geo::LineString::from(
        ring.iter()
            .map(|p| geo::coord! { x: p.x, y: p.y })
            .collect::<Vec<_>>(),
    )
}

fn ring_from_geo(ls: &geo::LineString<f64>) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = ls.coords().map(|c| Vec2::new(c.x, c.y)).collect();
    // geo closes rings explicitly; drop the repeated last vertex
    if out.len() >= 2 && out.first() == out.last() {
        out.pop();
    }
    out
}

fn to_multi(ps: &[Polygon]) -> geo::MultiPolygon<f64> {
    geo::MultiPolygon::new(ps.iter().map(|p| p.to_geo()).collect())
}

fn from_multi(mp: &geo::MultiPolygon<f64>) -> Vec<Polygon> {
    mp.0.iter()
        .map(Polygon::from_geo)
        .filter(|p| p.area() > EPS_PREDICATE && p.exterior.len() >= 3)
        .collect()
}

/// Boolean set operation on two polygon sets.
pub fn boolean(op: BoolOp, a: &[Polygon], b: &[Polygon]) -> Result<Vec<Polygon>, GeometryError> {
    for p in a.iter().chain(b.iter()) {
        if p.area() <= EPS_PREDICATE {
            return Err(GeometryError::DegenerateInput(p.area()));
        }
    }
    // merge each side first; members of one side may overlap each other
    let geos_a: Vec<geo::Polygon<f64>> = a.iter().map(|p| p.to_geo()).collect();
    let geos_b: Vec<geo::Polygon<f64>> = b.iter().map(|p| p.to_geo()).collect();
    let ma = geo::unary_union(geos_a.iter());
    let mb = geo::unary_union(geos_b.iter());
    let out = match op {
        BoolOp::Union => ma.union(&mb),
        BoolOp::Difference => ma.difference(&mb),
        BoolOp::Intersection => ma.intersection(&mb),
    };
    Ok(from_multi(&out))
}

/// Union of a polygon set into disjoint merged polygons.
pub fn union_all(ps: &[Polygon]) -> Vec<Polygon> {
    if ps.is_empty() {
        return vec![];
    }
    let geos: Vec<geo::Polygon<f64>> = ps.iter().map(|p| p.to_geo()).collect();
    let merged = geo::unary_union(geos.iter());
    from_multi(&merged)
}

/// Regular 16-gon approximating a circle, scaled so its area equals the
/// area of the true disk.
pub fn circle_polygon(center: Vec2, radius: f64) -> Polygon {
    let n = CIRCLE_SEGMENTS;
    // area of a regular n-gon with circumradius R is n/2 R^2 sin(2 pi / n)
    let kappa = (2.0 * std::f64::consts::PI
        / (n as f64 * (2.0 * std::f64::consts::PI / n as f64).sin()))
    .sqrt();
    let r = radius * kappa;
    let exterior = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            center + Vec2::from_angle(t) * r
        })
        .collect();
    Polygon {
        exterior,
        holes: vec![],
    }
}

/// Capsule around a segment: rectangle plus rounded end caps.
fn capsule(a: Vec2, b: Vec2, r: f64) -> Vec<Polygon> {
    let mut parts = vec![circle_polygon(a, r), circle_polygon(b, r)];
    let d = b - a;
    if d.norm() > EPS_PREDICATE {
        let n = d.normalized().perp() * r;
        parts.push(Polygon {
            exterior: vec![a + n, a - n, b - n, b + n],
            holes: vec![],
        });
    }
    for p in &mut parts {
        p.normalize_orientation();
    }
    parts
}

/// Minkowski sum of a shape with a disk of radius `by`.
/// The output contains the input; arcs are approximated by 16-gons.
pub fn dilate(shape: &Shape, by: f64) -> Polygon {
    match shape {
        Shape::Disk(d) => circle_polygon(d.center, d.radius + by),
        Shape::Poly(p) => {
            if by <= EPS_PREDICATE {
                return p.clone();
            }
            let mut parts: Vec<Polygon> = vec![p.clone()];
            for ring in p.rings() {
                let n = ring.len();
                for i in 0..n {
                    parts.extend(capsule(ring[i], ring[(i + 1) % n], by));
                }
            }
            let merged = union_all(&parts);
            // dilation of a connected polygon stays connected
            merged
                .into_iter()
                .max_by(|a, b| a.area().total_cmp(&b.area()))
                .expect("dilation produced empty output")
        }
    }
}

/// Erosion of a polygon by a disk of radius `by`; the set of interior points
/// at distance at least `by` from the boundary. May disconnect.
pub fn erode(p: &Polygon, by: f64) -> Vec<Polygon> {
    if by <= EPS_PREDICATE {
        return vec![p.clone()];
    }
    let mut strips: Vec<Polygon> = vec![];
    for ring in p.rings() {
        let n = ring.len();
        for i in 0..n {
            strips.extend(capsule(ring[i], ring[(i + 1) % n], by));
        }
    }
    boolean(BoolOp::Difference, std::slice::from_ref(p), &strips).unwrap_or_default()
}

/// Smallest convex polygon containing every vertex of the input set.
pub fn convex_hull(ps: &[Polygon]) -> Result<Polygon, GeometryError> {
    if ps.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let m = to_multi(ps);
    let hull = m.convex_hull();
    Ok(Polygon::from_geo(&hull))
}

/// Partition a polygon set into groups whose closures are connected
/// (shared boundary counts as connected).
pub fn components(ps: &[Polygon]) -> Vec<Vec<Polygon>> {
    let n = ps.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    let geos: Vec<geo::Polygon<f64>> = ps.iter().map(|p| p.to_geo()).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if geos[i].intersects(&geos[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Polygon>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(ps[i].clone());
    }
    groups.into_values().collect()
}

/// Point membership with closure semantics: boundary points count as inside.
pub fn contains(p: &Polygon, x: Vec2) -> bool {
    let gp = p.to_geo();
    let pt = geo::Point::new(x.x, x.y);
    if gp.contains(&pt) {
        return true;
    }
    // closure semantics: accept boundary points
    distance_to_boundary(p, x) <= EPS_PREDICATE || gp.intersects(&pt)
}

/// Distance from a point to the closest point of a polygon's boundary rings.
pub fn distance_to_boundary(p: &Polygon, x: Vec2) -> f64 {
    let mut best = f64::INFINITY;
    for ring in p.rings() {
        let n = ring.len();
        for i in 0..n {
            best = best.min(dist_point_segment(x, ring[i], ring[(i + 1) % n]));
        }
    }
    best
}

/// Signed distance to the polygon region: negative inside, positive outside.
pub fn signed_distance(p: &Polygon, x: Vec2) -> f64 {
    let d = distance_to_boundary(p, x);
    if contains(p, x) {
        -d
    } else {
        d
    }
}

/// Closest point on the polygon's boundary to `x`.
pub fn closest_boundary_point(p: &Polygon, x: Vec2) -> Vec2 {
    let mut best = f64::INFINITY;
    let mut arg = p.exterior[0];
    for ring in p.rings() {
        let n = ring.len();
        for i in 0..n {
            let c = closest_point_segment(x, ring[i], ring[(i + 1) % n]);
            let d = x.dist(c);
            if d < best {
                best = d;
                arg = c;
            }
        }
    }
    arg
}

pub fn dist_point_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    p.dist(closest_point_segment(p, a, b))
}

pub fn closest_point_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq <= EPS_PREDICATE * EPS_PREDICATE {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0))
    }

    #[test]
    fn difference_of_half_square() {
        let left = Polygon::rectangle(Vec2::ZERO, Vec2::new(0.5, 1.0));
        let d = boolean(BoolOp::Difference, &[unit_square()], &[left]).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0].area() - 0.5).abs() < EPS_AREA);
        let (min, _) = d[0].bounds();
        assert!((min.x - 0.5).abs() < EPS_AREA);
    }

    #[test]
    fn union_of_disjoint_squares_has_two_parts() {
        let a = unit_square();
        let b = Polygon::rectangle(Vec2::new(2.0, 0.0), Vec2::new(3.0, 1.0));
        let u = boolean(BoolOp::Union, &[a], &[b]).unwrap();
        assert_eq!(u.len(), 2);
    }

    #[test]
    fn degenerate_input_rejected() {
        let line = Polygon {
            exterior: vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)],
            holes: vec![],
        };
        assert!(boolean(BoolOp::Union, &[line], &[]).is_err());
        assert!(Polygon::new(
            vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)],
            vec![]
        )
        .is_err());
    }

    #[test]
    fn disk_dilation_area_within_one_percent() {
        let d = Disk {
            center: Vec2::new(2.0, -1.0),
            radius: 0.3,
        };
        let p = dilate(&Shape::Disk(d), 0.25);
        let want = std::f64::consts::PI * 0.55 * 0.55;
        assert!((p.area() - want).abs() / want < 0.01, "area {}", p.area());
    }

    #[test]
    fn square_dilation_matches_closed_form() {
        let s = 2.0;
        let r = 0.5;
        let sq = Polygon::rectangle(Vec2::ZERO, Vec2::new(s, s));
        let d = dilate(&Shape::Poly(sq), r);
        // s^2 + 4 s r + area of the 16-gon corner pieces (one full 16-gon)
        let gon = circle_polygon(Vec2::ZERO, r).area();
        let want = s * s + 4.0 * s * r + gon;
        assert!((d.area() - want).abs() < 1e-2, "area {d_area} want {want}", d_area = d.area());
    }

    #[test]
    fn zero_dilation_is_identity() {
        let sq = unit_square();
        let d = dilate(&Shape::Poly(sq.clone()), 0.0);
        assert_eq!(d, sq);
    }

    #[test]
    fn hull_of_convex_polygon_is_itself() {
        let sq = unit_square();
        let h = convex_hull(std::slice::from_ref(&sq)).unwrap();
        assert!((h.area() - sq.area()).abs() < EPS_AREA);
    }

    #[test]
    fn hull_closes_l_shape_notch() {
        let l = Polygon {
            exterior: vec![
                Vec2::ZERO,
                Vec2::new(2.0, 0.0),
                Vec2::new(2.0, 1.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(1.0, 2.0),
                Vec2::new(0.0, 2.0),
            ],
            holes: vec![],
        };
        let h = convex_hull(std::slice::from_ref(&l)).unwrap();
        assert!(h.area() > l.area() + 0.4);
        assert!(contains(&h, Vec2::new(1.5, 1.5)));
        assert!(!contains(&l, Vec2::new(1.5, 1.5)));
    }

    #[test]
    fn components_split_and_join() {
        let a = unit_square();
        let apart = Polygon::rectangle(Vec2::new(3.0, 0.0), Vec2::new(4.0, 1.0));
        assert_eq!(components(&[a.clone(), apart]).len(), 2);
        // sharing an edge counts as connected
        let adjacent = Polygon::rectangle(Vec2::new(1.0, 0.0), Vec2::new(2.0, 1.0));
        assert_eq!(components(&[a, adjacent]).len(), 1);
    }

    #[test]
    fn contains_boundary_counts_inside() {
        let sq = unit_square();
        assert!(contains(&sq, Vec2::new(0.5, 0.5)));
        assert!(contains(&sq, Vec2::new(1.0, 0.5)));
        assert!(!contains(&sq, Vec2::new(1.1, 0.5)));
    }

    #[test]
    fn erode_shrinks_square() {
        let sq = Polygon::rectangle(Vec2::ZERO, Vec2::new(4.0, 4.0));
        let e = erode(&sq, 1.0);
        assert_eq!(e.len(), 1);
        assert!((e[0].area() - 4.0).abs() < 0.05, "area {}", e[0].area());
        assert!(contains(&e[0], Vec2::new(2.0, 2.0)));
        assert!(!contains(&e[0], Vec2::new(0.5, 0.5)));
    }

    #[test]
    fn signed_distance_sign() {
        let sq = unit_square();
        assert!(signed_distance(&sq, Vec2::new(0.5, 0.5)) < 0.0);
        assert!(signed_distance(&sq, Vec2::new(2.0, 0.5)) > 0.9);
    }

    #[test]
    fn centroid_of_square() {
        let sq = Polygon::rectangle(Vec2::new(1.0, 2.0), Vec2::new(3.0, 4.0));
        let c = sq.centroid();
        assert!((c - Vec2::new(2.0, 3.0)).norm() < 1e-9);
    }
}
