//! Analytic 2D lidar simulation: one ray per beam against the world shapes.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::scan::{LaserScan, ScanSpec};
use crate::geometry::Pose2D;
use crate::world::World;

/// Cast every beam from the vessel pose and return ranges with optional
/// Gaussian noise. Beams without an intersection inside `range_max` read
/// `+inf`. Deterministic for a given rng state.
pub fn simulate_lidar<R: Rng>(
    world: &World,
    pose: &Pose2D,
    spec: &ScanSpec,
    noise_sigma: f64,
    timestamp: f64,
    rng: &mut R,
) -> LaserScan {
    let origin = pose.position();
    let noise = if noise_sigma > 0.0 {
        Some(Normal::new(0.0, noise_sigma).expect("positive sigma"))
    } else {
        None
    };
    let mut ranges = Vec::with_capacity(spec.n_beams);
    for i in 0..spec.n_beams {
        let angle = pose.psi + spec.angle_min + i as f64 * spec.angle_increment;
        let dir = nalgebra::Vector2::new(angle.cos(), angle.sin());
        let range = match world.raycast(origin, dir) {
            Some(t) if t <= spec.range_max => {
                let r = match &noise {
                    Some(n) => t + n.sample(rng),
                    None => t,
                };
                r.clamp(1e-3, spec.range_max)
            }
            _ => f64::INFINITY,
        };
        ranges.push(range);
    }
    LaserScan {
        angle_min: spec.angle_min,
        angle_increment: spec.angle_increment,
        range_max: spec.range_max,
        ranges,
        timestamp,
    }
}
