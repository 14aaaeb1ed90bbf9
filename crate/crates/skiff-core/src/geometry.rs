//! Planar geometry shared across the stack: poses, angle wrapping and
//! body/world frame transforms.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// 2D rotation matrix for heading `psi`.
pub fn rotation(psi: f64) -> Matrix2<f64> {
    let (s, c) = psi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Proper intersection test between segments `a1-a2` and `b1-b2` (shared
/// endpoints count as touching).
pub fn segments_intersect(
    a1: Vector2<f64>,
    a2: Vector2<f64>,
    b1: Vector2<f64>,
    b2: Vector2<f64>,
) -> bool {
    let cross = |o: Vector2<f64>, p: Vector2<f64>, q: Vector2<f64>| {
        (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x)
    };
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |p: Vector2<f64>, q: Vector2<f64>, r: Vector2<f64>| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}

/// World-frame planar pose. Heading is kept wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn heading_dir(&self) -> Vector2<f64> {
        Vector2::new(self.psi.cos(), self.psi.sin())
    }

    /// Transform a body-frame point into the world frame.
    pub fn body_to_world(&self, p: Vector2<f64>) -> Vector2<f64> {
        self.position() + rotation(self.psi) * p
    }

    /// Transform a world-frame point into the body frame.
    pub fn world_to_body(&self, p: Vector2<f64>) -> Vector2<f64> {
        rotation(self.psi).transpose() * (p - self.position())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_keeps_half_open_interval() {
        assert_relative_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(0.1 - 4.0 * std::f64::consts::PI), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn body_world_round_trip() {
        let pose = Pose2D::new(3.0, -2.0, 0.7);
        let p = Vector2::new(5.0, 1.5);
        let back = pose.world_to_body(pose.body_to_world(p));
        assert_relative_eq!(back, p, epsilon = 1e-12);
    }

    #[test]
    fn body_to_world_rotated() {
        // ego at (10, 10) facing +y: body +x maps to world +y
        let pose = Pose2D::new(10.0, 10.0, std::f64::consts::FRAC_PI_2);
        let w = pose.body_to_world(Vector2::new(5.0, 0.0));
        assert_relative_eq!(w, Vector2::new(10.0, 15.0), epsilon = 1e-12);
    }
}
