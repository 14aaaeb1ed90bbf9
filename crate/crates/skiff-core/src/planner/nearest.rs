//! Nearest point on a Hermite curve by damped Newton iteration.
//!
//! The stationarity function is `g(t) = (c(t) - q) . c'(t)`; its derivative
//! `g'(t) = |c'(t)|^2 + (c(t) - q) . c''(t)`. Iterates are clamped to [0, 1];
//! a boundary with outward-pointing gradient counts as converged. The public
//! entry runs a multi-start sweep and returns the global minimum.

use nalgebra::Vector2;

use super::hermite::HermiteCurve;

const MAX_ITER: usize = 30;
const G_TOL: f64 = 1e-10;

/// Result of a nearest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestPoint {
    pub t: f64,
    pub distance: f64,
    /// True when no Newton start converged and a dense scan supplied the answer.
    pub fallback: bool,
}

fn g(curve: &HermiteCurve, q: Vector2<f64>, t: f64) -> f64 {
    (curve.point_at(t) - q).dot(&curve.tangent_at(t))
}

/// Single-seed Newton iteration; returns `(t, distance, converged)`.
pub fn nearest_point_newton(curve: &HermiteCurve, q: Vector2<f64>, t0: f64) -> (f64, f64, bool) {
    debug_assert!((0.0..=1.0).contains(&t0));
    let mut t = t0;
    for _ in 0..MAX_ITER {
        let gt = g(curve, q, t);
        if gt.abs() < G_TOL {
            return (t, (curve.point_at(t) - q).norm(), true);
        }
        // boundary minima: gradient points out of the interval
        if t == 0.0 && gt > 0.0 {
            return (t, (curve.point_at(t) - q).norm(), true);
        }
        if t == 1.0 && gt < 0.0 {
            return (t, (curve.point_at(t) - q).norm(), true);
        }
        let d = curve.point_at(t) - q;
        let dp = curve.tangent_at(t);
        let gp = dp.norm_squared() + d.dot(&curve.second_derivative_at(t));
        if gp.abs() < 1e-14 {
            break;
        }
        let next = (t - gt / gp).clamp(0.0, 1.0);
        if (next - t).abs() < 1e-15 {
            t = next;
            let gt = g(curve, q, t);
            let on_boundary_min =
                (t == 0.0 && gt >= 0.0) || (t == 1.0 && gt <= 0.0) || gt.abs() < G_TOL;
            return (t, (curve.point_at(t) - q).norm(), on_boundary_min);
        }
        t = next;
    }
    (t, (curve.point_at(t) - q).norm(), false)
}

/// Global nearest point: multi-start Newton over 8 uniform seeds plus both
/// endpoints, minimum by distance; dense-scan fallback if nothing converges.
pub fn nearest_point(curve: &HermiteCurve, q: Vector2<f64>) -> NearestPoint {
    let mut best: Option<(f64, f64)> = None;
    let mut any_converged = false;
    for i in 0..8 {
        let t0 = i as f64 / 7.0;
        let (t, d, converged) = nearest_point_newton(curve, q, t0);
        if converged {
            any_converged = true;
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((t, d));
            }
        }
    }
    // endpoints are always candidates: the interior stationary points may all
    // be farther than a boundary
    for t in [0.0, 1.0] {
        let d = (curve.point_at(t) - q).norm();
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((t, d));
        }
    }
    if any_converged {
        let (t, distance) = best.unwrap();
        return NearestPoint {
            t,
            distance,
            fallback: false,
        };
    }
    // dense fallback, flagged
    let mut bt = 0.0;
    let mut bd = f64::INFINITY;
    const N: usize = 4096;
    for i in 0..=N {
        let t = i as f64 / N as f64;
        let d = (curve.point_at(t) - q).norm();
        if d < bd {
            bd = d;
            bt = t;
        }
    }
    NearestPoint {
        t: bt,
        distance: bd,
        fallback: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::planner::plan_path;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_min(curve: &HermiteCurve, q: Vector2<f64>, n: usize) -> (f64, f64) {
        let mut bt = 0.0;
        let mut bd = f64::INFINITY;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let d = (curve.point_at(t) - q).norm();
            if d < bd {
                bd = d;
                bt = t;
            }
        }
        (bt, bd)
    }

    #[test]
    fn point_on_curve_has_zero_distance() {
        let c = plan_path(&Pose2D::new(0.0, 0.0, 0.3), &Pose2D::new(10.0, 4.0, -0.2)).unwrap();
        let q = c.point_at(0.37);
        let np = nearest_point(&c, q);
        assert!(np.distance < 1e-9);
        assert_relative_eq!(np.t, 0.37, epsilon = 1e-6);
        assert!(!np.fallback);
    }

    #[test]
    fn perpendicular_foot_on_straight_segment() {
        let c = plan_path(&Pose2D::new(0.0, 0.0, 0.0), &Pose2D::new(1.0, 0.0, 0.0)).unwrap();
        let np = nearest_point(&c, Vector2::new(0.5, 1.0));
        assert_relative_eq!(np.t, 0.5, epsilon = 1e-9);
        assert_relative_eq!(np.distance, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_dense_grid_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..500 {
            let c = HermiteCurve::new(
                Vector2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)),
                Vector2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)),
                Vector2::new(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0)),
                Vector2::new(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0)),
            );
            let c = match c {
                Ok(c) => c,
                Err(_) => continue,
            };
            let q = Vector2::new(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0));
            let np = nearest_point(&c, q);
            let (_, dd) = dense_min(&c, q, 20_000);
            assert!(
                np.distance <= dd + 1e-6,
                "newton {} dense {}",
                np.distance,
                dd
            );
        }
    }
}
