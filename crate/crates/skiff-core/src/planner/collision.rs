//! Collision judgment between a planned curve and scan-derived obstacle
//! points, plus the goal-offset replanning search.
//!
//! An obstacle point counts as a hit when its nearest curve point lies
//! strictly inside the segment (0 < t < 1) and the point-to-curve distance is
//! below `width + margin`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::hermite::HermiteCurve;
use super::nearest::nearest_point;
use super::plan_path;
use crate::geometry::Pose2D;

/// World-frame obstacle point (from unmatched clusters or raw scan returns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePoint {
    pub x: f64,
    pub y: f64,
}

impl ObstaclePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// One obstacle judged in collision with the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionHit {
    /// Index into the obstacle list.
    pub index: usize,
    /// Curve parameter of the nearest point.
    pub t: f64,
    /// Point-to-curve distance there.
    pub distance: f64,
}

/// All obstacle points in collision with the curve.
pub fn check_collision(
    curve: &HermiteCurve,
    obstacles: &[ObstaclePoint],
    width: f64,
    margin: f64,
) -> Vec<CollisionHit> {
    debug_assert!(width >= 0.0 && margin >= 0.0);
    let thresh = width + margin;
    let mut hits = Vec::new();
    for (index, ob) in obstacles.iter().enumerate() {
        let np = nearest_point(curve, ob.as_vector());
        if np.t > 0.0 && np.t < 1.0 && np.distance < thresh {
            hits.push(CollisionHit {
                index,
                t: np.t,
                distance: np.distance,
            });
        }
    }
    hits
}

/// Try the goal, then laterally/longitudinally shifted goals, and return the
/// first collision-free curve. `offsets` must lead with (0, 0); callers order
/// the rest by preference (usually offset magnitude).
pub fn local_waypoint_search(
    start: &Pose2D,
    goal: &Pose2D,
    obstacles: &[ObstaclePoint],
    width: f64,
    margin: f64,
    offsets: &[Vector2<f64>],
) -> Option<(HermiteCurve, Vector2<f64>)> {
    for off in offsets {
        let shifted = Pose2D::new(goal.x + off.x, goal.y + off.y, goal.psi);
        let curve = match plan_path(start, &shifted) {
            Ok(c) => c,
            Err(_) => continue,
        };
        if check_collision(&curve, obstacles, width, margin).is_empty() {
            return Some((curve, *off));
        }
    }
    None
}

/// Offset grid used by the replanner: (0,0) first, then rings of growing
/// radius on a square lattice.
pub fn offset_grid(steps: i32, spacing: f64) -> Vec<Vector2<f64>> {
    let mut offsets = Vec::new();
    for ix in -steps..=steps {
        for iy in -steps..=steps {
            offsets.push(Vector2::new(ix as f64 * spacing, iy as f64 * spacing));
        }
    }
    offsets.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    offsets
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn straight() -> HermiteCurve {
        plan_path(&Pose2D::new(0.0, 0.0, 0.0), &Pose2D::new(20.0, 0.0, 0.0)).unwrap()
    }

    #[test]
    fn far_obstacles_do_not_hit() {
        let hits = check_collision(
            &straight(),
            &[ObstaclePoint::new(10.0, 5.0), ObstaclePoint::new(-3.0, 0.0)],
            1.0,
            0.5,
        );
        assert!(hits.is_empty());
    }

    #[test]
    fn lateral_obstacle_inside_threshold_hits() {
        let hits = check_collision(&straight(), &[ObstaclePoint::new(10.0, 1.0)], 1.0, 0.5);
        assert_eq!(hits.len(), 1);
        assert!((hits[0].distance - 1.0).abs() < 1e-9);
        assert!((hits[0].t - 0.5).abs() < 1e-6);
    }

    #[test]
    fn obstacle_beyond_endpoint_is_ignored() {
        // nearest point is the endpoint itself (t = 1), outside the open interval
        let hits = check_collision(&straight(), &[ObstaclePoint::new(21.0, 0.0)], 1.0, 0.5);
        assert!(hits.is_empty());
    }

    #[test]
    fn hits_grow_with_margin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let curve = plan_path(&Pose2D::new(0.0, 0.0, 0.4), &Pose2D::new(15.0, 6.0, -0.3)).unwrap();
        for _ in 0..50 {
            let obstacles: Vec<ObstaclePoint> = (0..30)
                .map(|_| ObstaclePoint::new(rng.gen_range(-2.0..18.0), rng.gen_range(-6.0..10.0)))
                .collect();
            let small = check_collision(&curve, &obstacles, 1.0, 0.2);
            let large = check_collision(&curve, &obstacles, 1.0, 1.5);
            let small_set: Vec<usize> = small.iter().map(|h| h.index).collect();
            let large_set: Vec<usize> = large.iter().map(|h| h.index).collect();
            for idx in &small_set {
                assert!(large_set.contains(idx), "margin monotonicity violated");
            }
        }
    }

    #[test]
    fn waypoint_search_prefers_zero_offset() {
        let offsets = offset_grid(2, 1.0);
        assert_eq!(offsets[0], Vector2::new(0.0, 0.0));
        let got = local_waypoint_search(
            &Pose2D::new(0.0, 0.0, 0.0),
            &Pose2D::new(20.0, 0.0, 0.0),
            &[],
            1.0,
            0.5,
            &offsets,
        );
        let (_, off) = got.unwrap();
        assert_eq!(off, Vector2::new(0.0, 0.0));
    }

    #[test]
    fn waypoint_search_sidesteps_blocked_goal() {
        // obstacle sits just short of the goal so its projection is interior
        let obstacles = [ObstaclePoint::new(18.0, 0.0)];
        let offsets = offset_grid(3, 2.0);
        let (curve, off) = local_waypoint_search(
            &Pose2D::new(0.0, 0.0, 0.0),
            &Pose2D::new(20.0, 0.0, 0.0),
            &obstacles,
            1.0,
            0.5,
            &offsets,
        )
        .unwrap();
        assert!(off.norm() > 0.0);
        assert!(check_collision(&curve, &obstacles, 1.0, 0.5).is_empty());
    }

    #[test]
    fn walled_in_goal_returns_none() {
        // dense wall of points all around the goal, wide enough that every
        // offset candidate passes within the threshold
        let mut obstacles = Vec::new();
        for ix in -12..=12 {
            for iy in -12..=12 {
                obstacles.push(ObstaclePoint::new(20.0 + ix as f64, iy as f64));
            }
        }
        let got = local_waypoint_search(
            &Pose2D::new(0.0, 0.0, 0.0),
            &Pose2D::new(20.0, 0.0, 0.0),
            &obstacles,
            1.0,
            0.5,
            &offset_grid(2, 1.0),
        );
        assert!(got.is_none());
    }
}
