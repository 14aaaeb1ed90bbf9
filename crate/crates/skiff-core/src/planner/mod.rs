//! Path planning: Hermite-curve geometry, nearest-point projection, collision
//! judgment against scan points, goal-offset replanning and the velocity
//! profile search.

mod collision;
mod hermite;
mod nearest;
mod velocity;

pub use collision::{check_collision, local_waypoint_search, offset_grid, CollisionHit, ObstaclePoint};
pub use hermite::{chain_through, plan_path, HermiteCurve, SampledPath};
pub use nearest::{nearest_point, nearest_point_newton, NearestPoint};
pub use velocity::{
    curve_planner, obstacle_planner, stop_planner, uniform_levels, velocity_graph_search,
    VelocityConstraint, VelocityProfile,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("curve parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("degenerate curve: endpoints coincide")]
    DegenerateEndpoints,
    #[error("tangent vector must be nonzero")]
    ZeroTangent,
    #[error("start speed {v_start} exceeds the first-station limit {limit}")]
    StartSpeedInfeasible { v_start: f64, limit: f64 },
    #[error("constraints must share one station grid")]
    MismatchedStations,
}
