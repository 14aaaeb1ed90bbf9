//! Pure-pursuit path tracking: lookahead-circle intersection against the
//! sampled path (plus a straight endpoint extension) and the circular-arc
//! steering law.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Pose2D};
use crate::planner::SampledPath;

#[derive(Debug, Error, PartialEq)]
pub enum FollowerError {
    #[error("path must contain at least two points")]
    EmptyPath,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FollowerParams {
    /// Lookahead circle radius (m).
    pub lookahead: f64,
    /// Straight extension appended past the path end (m).
    pub extension_len: f64,
}

impl Default for FollowerParams {
    fn default() -> Self {
        Self {
            lookahead: 4.0,
            extension_len: 10.0,
        }
    }
}

/// Lookahead query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPoint {
    pub point: Vector2<f64>,
    /// Arc length along the path (extension counts past the end).
    pub station: f64,
    /// False when no circle intersection existed and the nearest path point
    /// was returned instead.
    pub intersected: bool,
}

/// Circle-segment intersections as segment parameters in [0, 1].
fn circle_segment(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, r: f64) -> Vec<f64> {
    let d = b - a;
    let f = a - c;
    let qa = d.norm_squared();
    if qa == 0.0 {
        return Vec::new();
    }
    let qb = 2.0 * f.dot(&d);
    let qc = f.norm_squared() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let mut out = Vec::new();
    for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
        if (0.0..=1.0).contains(&t) {
            out.push(t);
        }
    }
    out
}

/// Intersect the lookahead circle with the path polyline plus its endpoint
/// extension; return the intersection farthest along the path. Without any
/// intersection the nearest path point is returned, flagged.
pub fn lookahead_target(
    path: &SampledPath,
    extension_len: f64,
    pose: &Pose2D,
    lookahead: f64,
) -> Result<TargetPoint, FollowerError> {
    if path.points.len() < 2 {
        return Err(FollowerError::EmptyPath);
    }
    debug_assert!(lookahead > 0.0);
    let center = pose.position();
    let mut best: Option<TargetPoint> = None;
    let mut consider = |point: Vector2<f64>, station: f64| {
        if best.map_or(true, |b| station > b.station) {
            best = Some(TargetPoint {
                point,
                station,
                intersected: true,
            });
        }
    };
    for i in 0..path.points.len() - 1 {
        let a = path.points[i];
        let b = path.points[i + 1];
        for t in circle_segment(a, b, center, lookahead) {
            consider(a + (b - a) * t, path.stations[i] + (b - a).norm() * t);
        }
    }
    if extension_len > 0.0 {
        let end = *path.points.last().unwrap();
        let dir = Vector2::new(
            path.headings.last().unwrap().cos(),
            path.headings.last().unwrap().sin(),
        );
        let ext_end = end + dir * extension_len;
        for t in circle_segment(end, ext_end, center, lookahead) {
            consider(end + dir * extension_len * t, path.total_length() + extension_len * t);
        }
    }
    if let Some(hit) = best {
        return Ok(hit);
    }
    // no intersection: fall back to the nearest path point
    let (station, _) = path.project(center);
    let mut nearest = path.points[0];
    let mut best_d = f64::INFINITY;
    for p in &path.points {
        let d = (p - center).norm();
        if d < best_d {
            best_d = d;
            nearest = *p;
        }
    }
    Ok(TargetPoint {
        point: nearest,
        station,
        intersected: false,
    })
}

/// Circular-arc pure pursuit: `omega = 2 v sin(alpha) / L` toward the target
/// bearing `alpha` in the body frame.
pub fn pursuit_command(pose: &Pose2D, target: Vector2<f64>, v_des: f64, lookahead: f64) -> (f64, f64) {
    let d = target - pose.position();
    debug_assert!(d.norm() > 0.0, "target coincides with pose");
    let alpha = wrap_angle(d.y.atan2(d.x) - pose.psi);
    (v_des, 2.0 * v_des * alpha.sin() / lookahead)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn straight_path() -> SampledPath {
        SampledPath::from_points((0..=10).map(|i| Vector2::new(i as f64, 0.0)).collect())
    }

    #[test]
    fn on_path_target_is_lookahead_ahead() {
        let t = lookahead_target(&straight_path(), 10.0, &Pose2D::new(3.0, 0.0, 0.0), 2.0).unwrap();
        assert!(t.intersected);
        assert_relative_eq!(t.point, Vector2::new(5.0, 0.0), epsilon = 1e-9);
        assert_relative_eq!(t.station, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn target_beyond_end_lands_on_extension() {
        let t = lookahead_target(&straight_path(), 10.0, &Pose2D::new(12.0, 0.0, 0.0), 2.0).unwrap();
        assert!(t.intersected);
        assert_relative_eq!(t.point, Vector2::new(14.0, 0.0), epsilon = 1e-9);
        assert!(t.station > 10.0);
    }

    #[test]
    fn no_intersection_falls_back_to_nearest() {
        let t = lookahead_target(&straight_path(), 0.0, &Pose2D::new(5.0, 50.0, 0.0), 2.0).unwrap();
        assert!(!t.intersected);
        assert_relative_eq!(t.point, Vector2::new(5.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn empty_path_is_an_error() {
        let path = SampledPath {
            points: vec![Vector2::new(0.0, 0.0)],
            stations: vec![0.0],
            headings: vec![0.0],
            ts: vec![0.0],
        };
        assert_eq!(
            lookahead_target(&path, 0.0, &Pose2D::new(0.0, 0.0, 0.0), 1.0),
            Err(FollowerError::EmptyPath)
        );
    }

    #[test]
    fn intersections_sit_on_the_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let pts: Vec<Vector2<f64>> = (0..8)
                .scan(Vector2::new(0.0, 0.0), |acc, _| {
                    *acc += Vector2::new(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
                    Some(*acc)
                })
                .collect();
            let path = SampledPath::from_points(pts);
            let pose = Pose2D::new(rng.gen_range(-1.0..8.0), rng.gen_range(-2.0..2.0), 0.0);
            let lookahead = rng.gen_range(0.5..3.0);
            let t = lookahead_target(&path, 5.0, &pose, lookahead).unwrap();
            if t.intersected {
                assert_relative_eq!((t.point - pose.position()).norm(), lookahead, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn command_examples() {
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let (v, omega) = pursuit_command(&pose, Vector2::new(3.0, 0.0), 1.5, 2.0);
        assert_eq!(v, 1.5);
        assert_relative_eq!(omega, 0.0);
        // target straight left: alpha = pi/2
        let (_, omega) = pursuit_command(&pose, Vector2::new(0.0, 2.0), 1.0, 2.0);
        assert_relative_eq!(omega, 1.0, epsilon = 1e-12);
        // sign follows bearing
        let (_, omega) = pursuit_command(&pose, Vector2::new(1.0, -1.0), 1.0, 2.0);
        assert!(omega < 0.0);
    }
}
