//! Deterministic planar navigation stack and closed-loop simulator for a
//! differential-thrust catamaran.
//!
//! The crate covers the full pipeline the simulator exercises end to end:
//! vessel dynamics, EKF localization, lidar/camera perception and fusion,
//! behavior-tree task logic, Hermite path planning with a velocity-profile
//! search, pure-pursuit tracking, the heartbeat wire protocol, and the
//! scenario harness that closes the loop.

pub mod behavior;
pub mod dynamics;
pub mod follower;
pub mod geometry;
pub mod heartbeat;
pub mod localization;
pub mod output;
pub mod perception;
pub mod planner;
pub mod scenario;
pub mod sim;
pub mod world;

pub use dynamics::{BodyVelocity, VesselParams, VesselState, Wrench};
pub use geometry::Pose2D;
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use sim::{run, run_with_heartbeat, Metrics, RunOutput, RunStatus, SimLog};
pub use world::{Buoy, ObjectLabel, Shape, World};
