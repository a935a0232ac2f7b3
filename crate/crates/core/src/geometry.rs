//! Planar geometry: poses, angle wrapping and narrow-phase contact tests
//! between circles and convex polygons (boxes and wall segments).

use std::f64::consts::PI;

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};

pub type Vec2 = Vector2<f64>;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// 2D cross product (z component of `a × b`).
#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// `ω × r` for a scalar angular velocity.
#[inline]
pub fn cross_scalar(omega: f64, r: &Vec2) -> Vec2 {
    Vec2::new(-omega * r.y, omega * r.x)
}

/// Planar pose `(x, y, θ)`. Serialized as a three-element array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl From<[f64; 3]> for Pose2 {
    fn from(v: [f64; 3]) -> Self {
        Pose2::new(v[0], v[1], v[2])
    }
}

impl From<Pose2> for [f64; 3] {
    fn from(p: Pose2) -> Self {
        [p.x, p.y, p.theta]
    }
}

impl Pose2 {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 { x, y, theta }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Unit vector along the local +x axis.
    pub fn heading(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    pub fn rotation(&self) -> Rotation2<f64> {
        Rotation2::new(self.theta)
    }

    /// Maps a point from the local frame into the world frame.
    pub fn to_world(&self, local: &Vec2) -> Vec2 {
        self.rotation() * local + self.position()
    }

    /// Maps a world point into the local frame.
    pub fn to_local(&self, world: &Vec2) -> Vec2 {
        self.rotation().inverse() * (world - self.position())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Rect { min, max }
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// Contact between two colliders. `normal` points from the first collider
/// towards the second; `depth` is strictly positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub normal: Vec2,
    pub depth: f64,
    pub point: Vec2,
}

impl Contact {
    fn flipped(self) -> Self {
        Contact {
            normal: -self.normal,
            ..self
        }
    }
}

/// Convex polygon with up to four vertices in counter-clockwise order.
/// Two vertices describe a segment.
#[derive(Clone, Copy, Debug)]
pub struct Polygon {
    verts: [Vec2; 4],
    len: usize,
}

impl Polygon {
    pub fn segment(a: Vec2, b: Vec2) -> Self {
        Polygon {
            verts: [a, b, Vec2::zeros(), Vec2::zeros()],
            len: 2,
        }
    }

    /// Oriented box with the given half extents.
    pub fn oriented_box(pose: &Pose2, half_x: f64, half_y: f64) -> Self {
        let local = [
            Vec2::new(-half_x, -half_y),
            Vec2::new(half_x, -half_y),
            Vec2::new(half_x, half_y),
            Vec2::new(-half_x, half_y),
        ];
        let mut verts = [Vec2::zeros(); 4];
        for (v, l) in verts.iter_mut().zip(local.iter()) {
            *v = pose.to_world(l);
        }
        Polygon { verts, len: 4 }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.verts[..self.len]
    }

    pub fn centroid(&self) -> Vec2 {
        self.vertices().iter().sum::<Vec2>() / self.len as f64
    }

    fn bounding_radius(&self, centre: &Vec2) -> f64 {
        self.vertices()
            .iter()
            .map(|v| (v - centre).norm())
            .fold(0.0, f64::max)
    }

    fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = if self.len == 2 { 1 } else { self.len };
        (0..n).map(move |i| (self.verts[i], self.verts[(i + 1) % self.len]))
    }

    fn axes(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.edges().filter_map(|(a, b)| {
            let e = b - a;
            let n = Vec2::new(e.y, -e.x);
            let len = n.norm();
            (len > 0.0).then(|| n / len)
        })
    }

    fn project(&self, axis: &Vec2) -> (f64, f64) {
        self.vertices()
            .iter()
            .map(|v| v.dot(axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p), hi.max(p))
            })
    }

    /// Average of the vertices whose projection on `dir` is maximal.
    fn support(&self, dir: &Vec2) -> Vec2 {
        let (_, hi) = self.project(dir);
        let tol = 1e-9;
        let (sum, count) = self
            .vertices()
            .iter()
            .filter(|v| v.dot(dir) >= hi - tol)
            .fold((Vec2::zeros(), 0usize), |(s, c), v| (s + v, c + 1));
        sum / count as f64
    }

    fn contains(&self, p: &Vec2) -> bool {
        self.len >= 3
            && self
                .edges()
                .all(|(a, b)| cross(&(b - a), &(p - a)) > 0.0)
    }

    fn closest_boundary_point(&self, p: &Vec2) -> Vec2 {
        let mut best = self.verts[0];
        let mut best_d = f64::INFINITY;
        for (a, b) in self.edges() {
            let q = closest_point_on_segment(&a, &b, p);
            let d = (p - q).norm_squared();
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }
}

pub fn closest_point_on_segment(a: &Vec2, b: &Vec2, p: &Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// World-space collider.
#[derive(Clone, Copy, Debug)]
pub enum Collider {
    Circle { centre: Vec2, radius: f64 },
    Polygon(Polygon),
}

impl Collider {
    pub fn centre(&self) -> Vec2 {
        match self {
            Collider::Circle { centre, .. } => *centre,
            Collider::Polygon(p) => p.centroid(),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match self {
            Collider::Circle { radius, .. } => *radius,
            Collider::Polygon(p) => p.bounding_radius(&p.centroid()),
        }
    }
}

/// Narrow-phase test. Touching shapes (zero clearance) do not collide; only
/// strict overlap produces a contact.
pub fn collide(a: &Collider, b: &Collider) -> Option<Contact> {
    let (ca, cb) = (a.centre(), b.centre());
    if (cb - ca).norm() >= a.bounding_radius() + b.bounding_radius() {
        return None;
    }
    match (a, b) {
        (
            Collider::Circle {
                centre: c1,
                radius: r1,
            },
            Collider::Circle {
                centre: c2,
                radius: r2,
            },
        ) => circle_circle(c1, *r1, c2, *r2),
        (Collider::Polygon(p), Collider::Circle { centre, radius }) => {
            polygon_circle(p, centre, *radius)
        }
        (Collider::Circle { centre, radius }, Collider::Polygon(p)) => {
            polygon_circle(p, centre, *radius).map(Contact::flipped)
        }
        (Collider::Polygon(p), Collider::Polygon(q)) => polygon_polygon(p, q),
    }
}

fn circle_circle(c1: &Vec2, r1: f64, c2: &Vec2, r2: f64) -> Option<Contact> {
    let d = c2 - c1;
    let dist = d.norm();
    if dist >= r1 + r2 {
        return None;
    }
    let normal = if dist > 0.0 { d / dist } else { Vec2::x() };
    let depth = r1 + r2 - dist;
    Some(Contact {
        normal,
        depth,
        point: c1 + normal * (r1 - 0.5 * depth),
    })
}

/// Normal points from the polygon to the circle.
fn polygon_circle(poly: &Polygon, centre: &Vec2, radius: f64) -> Option<Contact> {
    if poly.contains(centre) {
        // Centre inside: push out through the nearest face.
        let mut best: Option<(f64, Vec2)> = None;
        for (a, b) in poly.edges() {
            let e = b - a;
            let n = Vec2::new(e.y, -e.x).normalize();
            let inside = (a - centre).dot(&n);
            if best.is_none_or(|(d, _)| inside < d) {
                best = Some((inside, n));
            }
        }
        let (inside, normal) = best?;
        return Some(Contact {
            normal,
            depth: radius + inside,
            point: centre - normal * radius,
        });
    }
    let q = poly.closest_boundary_point(centre);
    let d = centre - q;
    let dist = d.norm();
    if dist >= radius || dist == 0.0 {
        return None;
    }
    Some(Contact {
        normal: d / dist,
        depth: radius - dist,
        point: q,
    })
}

fn polygon_polygon(a: &Polygon, b: &Polygon) -> Option<Contact> {
    let towards_b = b.centroid() - a.centroid();
    let mut best: Option<(f64, Vec2, bool)> = None;
    for (axis, from_a) in a
        .axes()
        .map(|n| (n, true))
        .chain(b.axes().map(|n| (n, false)))
    {
        let (amin, amax) = a.project(&axis);
        let (bmin, bmax) = b.project(&axis);
        let overlap = (amax - bmin).min(bmax - amin);
        if overlap <= 0.0 {
            return None;
        }
        if best.is_none_or(|(o, _, _)| overlap < o) {
            let n = if towards_b.dot(&axis) < 0.0 { -axis } else { axis };
            best = Some((overlap, n, from_a));
        }
    }
    let (depth, normal, from_a) = best?;
    // Incident feature: the deepest vertices of the polygon that does not own
    // the reference axis.
    let point = if from_a {
        b.support(&-normal)
    } else {
        a.support(&normal)
    };
    Some(Contact {
        normal,
        depth,
        point,
    })
}
