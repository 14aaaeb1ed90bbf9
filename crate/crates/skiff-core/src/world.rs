//! Ground-truth world contents: obstacle shapes, labeled buoys, and ray
//! casting against them.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// Object class a detector can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectLabel {
    RedBuoy,
    GreenBuoy,
    WhiteBuoy,
    YellowBuoy,
    BlackBuoy,
    Dock,
}

impl std::fmt::Display for ObjectLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ObjectLabel::RedBuoy => "red_buoy",
            ObjectLabel::GreenBuoy => "green_buoy",
            ObjectLabel::WhiteBuoy => "white_buoy",
            ObjectLabel::YellowBuoy => "yellow_buoy",
            ObjectLabel::BlackBuoy => "black_buoy",
            ObjectLabel::Dock => "dock",
        };
        f.write_str(s)
    }
}

/// Static obstacle geometry in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Circle { x: f64, y: f64, radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

/// Labeled round task object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Buoy {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub label: ObjectLabel,
}

impl Buoy {
    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// Everything the sensors can see.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct World {
    #[serde(default)]
    pub obstacles: Vec<Shape>,
    #[serde(default)]
    pub buoys: Vec<Buoy>,
}

fn ray_circle(origin: Vector2<f64>, dir: Vector2<f64>, c: Vector2<f64>, r: f64) -> Option<f64> {
    let f = origin - c;
    let b = f.dot(&dir);
    let disc = b * b - (f.norm_squared() - r * r);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t1 = -b - sq;
    let t2 = -b + sq;
    if t1 > 0.0 {
        Some(t1)
    } else if t2 > 0.0 {
        // origin inside the circle
        Some(t2)
    } else {
        None
    }
}

fn ray_segment(
    origin: Vector2<f64>,
    dir: Vector2<f64>,
    a: Vector2<f64>,
    b: Vector2<f64>,
) -> Option<f64> {
    let e = b - a;
    let denom = dir.x * e.y - dir.y * e.x;
    if denom.abs() < 1e-15 {
        return None; // parallel
    }
    let ao = a - origin;
    let t = (ao.x * e.y - ao.y * e.x) / denom;
    let u = (ao.x * dir.y - ao.y * dir.x) / denom;
    if t > 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

impl Shape {
    /// Distance along the ray to the first boundary intersection, if any.
    pub fn raycast(&self, origin: Vector2<f64>, dir: Vector2<f64>) -> Option<f64> {
        match self {
            Shape::Circle { x, y, radius } => {
                ray_circle(origin, dir, Vector2::new(*x, *y), *radius)
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                if n < 2 {
                    return None;
                }
                let mut best: Option<f64> = None;
                for i in 0..n {
                    let a = Vector2::new(vertices[i][0], vertices[i][1]);
                    let b = Vector2::new(vertices[(i + 1) % n][0], vertices[(i + 1) % n][1]);
                    if let Some(t) = ray_segment(origin, dir, a, b) {
                        best = Some(best.map_or(t, |bt: f64| bt.min(t)));
                    }
                }
                best
            }
        }
    }

    /// Distance from a point to the shape boundary (>= 0 outside, 0 on/inside
    /// for circles the signed clearance is distance to center minus radius).
    pub fn clearance(&self, p: Vector2<f64>) -> f64 {
        match self {
            Shape::Circle { x, y, radius } => (p - Vector2::new(*x, *y)).norm() - radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let a = Vector2::new(vertices[i][0], vertices[i][1]);
                    let b = Vector2::new(vertices[(i + 1) % n][0], vertices[(i + 1) % n][1]);
                    let ab = b - a;
                    let len2 = ab.norm_squared();
                    let t = if len2 > 0.0 {
                        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    best = best.min((p - (a + ab * t)).norm());
                }
                best
            }
        }
    }

    /// True if the point lies inside the shape (circles only; polygons use
    /// the even-odd rule).
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        match self {
            Shape::Circle { x, y, radius } => (p - Vector2::new(*x, *y)).norm() <= *radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut inside = false;
                let mut j = n - 1;
                for i in 0..n {
                    let (xi, yi) = (vertices[i][0], vertices[i][1]);
                    let (xj, yj) = (vertices[j][0], vertices[j][1]);
                    if ((yi > p.y) != (yj > p.y))
                        && (p.x < (xj - xi) * (p.y - yi) / (yj - yi) + xi)
                    {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
        }
    }
}

impl World {
    /// All lidar-visible shapes: obstacles plus buoys as circles.
    pub fn lidar_shapes(&self) -> impl Iterator<Item = Shape> + '_ {
        self.obstacles.iter().cloned().chain(self.buoys.iter().map(|b| Shape::Circle {
            x: b.x,
            y: b.y,
            radius: b.radius,
        }))
    }

    /// Nearest boundary intersection along a ray over the whole world.
    pub fn raycast(&self, origin: Vector2<f64>, dir: Vector2<f64>) -> Option<f64> {
        let mut best: Option<f64> = None;
        for shape in self.lidar_shapes() {
            if let Some(t) = shape.raycast(origin, dir) {
                best = Some(best.map_or(t, |bt: f64| bt.min(t)));
            }
        }
        best
    }

    /// Minimum clearance from a point to any obstacle or buoy boundary.
    pub fn min_clearance(&self, p: Vector2<f64>) -> f64 {
        self.lidar_shapes()
            .map(|s| s.clearance(p))
            .fold(f64::INFINITY, f64::min)
    }
}
