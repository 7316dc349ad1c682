//! Planar helpers: convex hull, polygon area and the minimal enclosing circle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn contains(&self, p: Point) -> bool {
        self.center.dist(p) <= self.radius * (1.0 + 1e-12) + 1e-9
    }

    pub fn scale(self, s: f64) -> Circle {
        Circle { center: self.center.scale(s), radius: self.radius * s }
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of integer lattice points (Andrew's monotone chain).
///
/// Returns vertices counter-clockwise in a y-up frame with collinear points
/// dropped. Fewer than three distinct input points come back as-is (deduplicated).
pub fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shoelace area of a simple polygon given as integer vertices.
pub fn polygon_area(vertices: &[(i64, i64)]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let twice: i64 = vertices
        .iter()
        .zip(vertices.iter().cycle().skip(1))
        .map(|(a, b)| a.0 * b.1 - b.0 * a.1)
        .sum();
    twice.abs() as f64 / 2.0
}

fn circle_from_two(a: Point, b: Point) -> Circle {
    let center = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
    Circle { center, radius: a.dist(b) / 2.0 }
}

fn circle_from_three(a: Point, b: Point, c: Point) -> Circle {
    let bx = b.x - a.x;
    let by = b.y - a.y;
    let cx = c.x - a.x;
    let cy = c.y - a.y;
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() < 1e-12 {
        // Collinear: the circle on the farthest pair covers all three.
        let candidates = [circle_from_two(a, b), circle_from_two(a, c), circle_from_two(b, c)];
        return candidates
            .into_iter()
            .max_by(|p, q| p.radius.total_cmp(&q.radius))
            .expect("three candidates");
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    let center = Point::new(a.x + ux, a.y + uy);
    let radius = [a, b, c].iter().map(|p| center.dist(*p)).fold(0.0, f64::max);
    Circle { center, radius }
}

/// Smallest circle containing every point (Welzl, iterative form).
///
/// The input order is shuffled with a fixed seed so results are reproducible
/// while keeping the expected linear running time.
pub fn min_enclosing_circle(points: &[Point]) -> Option<Circle> {
    if points.is_empty() {
        return None;
    }
    let mut pts = points.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c1c1e);
    pts.shuffle(&mut rng);

    let mut circle = Circle { center: pts[0], radius: 0.0 };
    for i in 1..pts.len() {
        if circle.contains(pts[i]) {
            continue;
        }
        circle = Circle { center: pts[i], radius: 0.0 };
        for j in 0..i {
            if circle.contains(pts[j]) {
                continue;
            }
            circle = circle_from_two(pts[i], pts[j]);
            for k in 0..j {
                if !circle.contains(pts[k]) {
                    circle = circle_from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Some(circle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = [(0, 0), (2, 0), (2, 2), (0, 2), (1, 1), (1, 0)];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert_relative_eq!(polygon_area(&hull), 4.0);
    }

    #[test]
    fn hull_of_collinear_points_is_degenerate() {
        let hull = convex_hull(&[(0, 0), (1, 1), (2, 2)]);
        assert_eq!(polygon_area(&hull), 0.0);
    }

    #[test]
    fn enclosing_circle_of_triangle() {
        let pts = [Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 3.0)];
        let c = min_enclosing_circle(&pts).unwrap();
        // right triangle: hypotenuse is the diameter
        assert_relative_eq!(c.radius, 2.5, epsilon = 1e-12);
        assert_relative_eq!(c.center.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(c.center.y, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn enclosing_circle_covers_every_point() {
        let pts: Vec<Point> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.731;
                Point::new((t * 3.1).sin() * 10.0 + t.cos(), (t * 1.7).cos() * 6.0)
            })
            .collect();
        let c = min_enclosing_circle(&pts).unwrap();
        assert!(pts.iter().all(|p| c.contains(*p)));
        // at least two points sit on the circle
        let on = pts.iter().filter(|p| (c.center.dist(**p) - c.radius).abs() < 1e-7).count();
        assert!(on >= 2);
    }

    #[test]
    fn empty_input_has_no_circle() {
        assert!(min_enclosing_circle(&[]).is_none());
    }
}
