//! Scenario files: the versioned TOML schema driving the simulator, with
//! validation that reports violations by field path.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{build_tree, GoalTolerance, TreeSpec};
use crate::dynamics::{CoriolisMode, PropellerParams, VesselParams};
use crate::follower::FollowerParams;
use crate::heartbeat::Datum;
use crate::perception::CameraModel;
use crate::world::{ObjectLabel, World};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarConfig {
    pub rate_hz: f64,
    pub beams: usize,
    pub range_max: f64,
    pub noise_sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            beams: 360,
            range_max: 40.0,
            noise_sigma: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnssConfig {
    pub rate_hz: f64,
    pub sigma: f64,
}

impl Default for GnssConfig {
    fn default() -> Self {
        Self {
            rate_hz: 1.0,
            sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImuConfig {
    pub rate_hz: f64,
    pub sigma_psi: f64,
    pub sigma_omega: f64,
}

impl Default for ImuConfig {
    fn default() -> Self {
        Self {
            rate_hz: 50.0,
            sigma_psi: 0.02,
            sigma_omega: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub rate_hz: f64,
    #[serde(flatten)]
    pub model: CameraModel,
    pub miss_rate: f64,
    pub jitter_px: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        let width = 800u32;
        let fx = 400.0;
        Self {
            rate_hz: 10.0,
            model: CameraModel {
                fx,
                fy: 400.0,
                cx: 400.0,
                cy: 300.0,
                width,
                height: 600,
                mount_x: 0.0,
                mount_y: 0.0,
                mount_yaw: 0.0,
                hfov: 2.0 * (width as f64 / (2.0 * fx)).atan(),
            },
            miss_rate: 0.02,
            jitter_px: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SensorsConfig {
    pub lidar: LidarConfig,
    pub gnss: GnssConfig,
    pub imu: ImuConfig,
    pub camera: CameraConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfConfig {
    /// Process-noise spectral densities for [x, y, psi, u, v, omega].
    pub q: [f64; 6],
    pub init_sigma_pos: f64,
    pub init_sigma_psi: f64,
    pub init_sigma_vel: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            q: [0.02, 0.02, 0.005, 0.2, 0.2, 0.1],
            init_sigma_pos: 0.5,
            init_sigma_psi: 0.1,
            init_sigma_vel: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionConfig {
    pub outlier_k: usize,
    pub outlier_thresh: f64,
    pub segment_base: f64,
    pub segment_slope: f64,
    pub min_points: usize,
    pub iou_gate: f64,
    pub object_height: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            outlier_k: 1,
            outlier_thresh: 1.0,
            segment_base: 0.3,
            segment_slope: 0.05,
            min_points: 2,
            iou_gate: 0.15,
            object_height: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub margin: f64,
    pub standoff: f64,
    pub a_max: f64,
    pub a_dec: f64,
    pub omega_max: f64,
    pub v_cruise: f64,
    pub v_levels: usize,
    pub station_ds: f64,
    pub offset_steps: i32,
    pub offset_spacing: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            margin: 0.5,
            standoff: 2.0,
            a_max: 0.5,
            a_dec: 0.5,
            omega_max: 0.6,
            v_cruise: 1.5,
            v_levels: 21,
            station_ds: 0.5,
            offset_steps: 3,
            offset_spacing: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub rate_hz: f64,
    pub kp_surge: f64,
    pub kp_yaw: f64,
    /// Per-thruster force limit (N).
    pub f_max: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            rate_hz: 20.0,
            kp_surge: 300.0,
            kp_yaw: 400.0,
            f_max: 300.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorConfig {
    #[serde(default = "default_bt_rate")]
    pub rate_hz: f64,
    #[serde(default = "default_tol_pos")]
    pub tol_pos: f64,
    #[serde(default = "default_tol_heading")]
    pub tol_heading: f64,
    pub tree: TreeSpec,
}

fn default_bt_rate() -> f64 {
    10.0
}
fn default_tol_pos() -> f64 {
    1.0
}
fn default_tol_heading() -> f64 {
    0.2
}

impl BehaviorConfig {
    pub fn tolerance(&self) -> GoalTolerance {
        GoalTolerance {
            pos: self.tol_pos,
            heading: self.tol_heading,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeartbeatConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_td_port")]
    pub port: u16,
    pub team_id: String,
    #[serde(default = "default_hb_rate")]
    pub rate_hz: f64,
    pub datum: Datum,
    /// (day, month, two-digit year) stamped into every sentence.
    pub date: [u8; 3],
}

fn default_host() -> String {
    "127.0.0.1".to_string()
}
fn default_td_port() -> u16 {
    9000
}
fn default_hb_rate() -> f64 {
    1.0
}

/// Everything one closed-loop run needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub vessel: VesselParams,
    /// Resistance-matrix variant used by the ground-truth integrator.
    #[serde(default)]
    pub coriolis_mode: CoriolisMode,
    pub propeller: PropellerParams,
    pub start: StartPose,
    #[serde(default)]
    pub world: World,
    #[serde(default)]
    pub sensors: SensorsConfig,
    #[serde(default)]
    pub ekf: EkfConfig,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub follower: FollowerParams,
    #[serde(default)]
    pub control: ControlConfig,
    pub behavior: BehaviorConfig,
    #[serde(default)]
    pub heartbeat: Option<HeartbeatConfig>,
    /// Buoy index pairs (red, green) whose segment counts as a gate for the
    /// crossing metrics.
    #[serde(default)]
    pub gates: Vec<[usize; 2]>,
}

fn default_dt() -> f64 {
    0.02
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errors = Vec::new();
        fn check(errors: &mut Vec<String>, ok: bool, path: &str, reason: &str) {
            if !ok {
                errors.push(format!("{path}: {reason}"));
            }
        }
        check(
            &mut errors,
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            &format!("expected {SCHEMA_VERSION}"),
        );
        check(&mut errors, self.duration_s > 0.0, "duration_s", "must be > 0");
        check(&mut errors, self.dt > 0.0 && self.dt <= 0.5, "dt", "must be in (0, 0.5]");
        if let Err(e) = self.vessel.validate() {
            errors.push(format!("vessel.{}: {}", e.field, e.reason));
        }
        if let Err(e) = self.propeller.validate() {
            errors.push(format!("propeller.{}: {}", e.field, e.reason));
        }
        if let Err(e) = self.sensors.camera.model.validate() {
            errors.push(format!("sensors.camera.{}: {}", e.field, e.reason));
        }
        check(&mut errors, self.sensors.lidar.rate_hz > 0.0, "sensors.lidar.rate_hz", "must be > 0");
        check(&mut errors, self.sensors.lidar.beams >= 8, "sensors.lidar.beams", "must be >= 8");
        check(&mut errors, self.sensors.lidar.range_max > 0.0, "sensors.lidar.range_max", "must be > 0");
        check(&mut errors, 
            self.sensors.lidar.noise_sigma >= 0.0,
            "sensors.lidar.noise_sigma",
            "must be >= 0",
        );
        check(&mut errors, self.sensors.gnss.rate_hz > 0.0, "sensors.gnss.rate_hz", "must be > 0");
        check(&mut errors, self.sensors.gnss.sigma > 0.0, "sensors.gnss.sigma", "must be > 0");
        check(&mut errors, self.sensors.imu.rate_hz > 0.0, "sensors.imu.rate_hz", "must be > 0");
        check(&mut errors, self.sensors.imu.sigma_psi > 0.0, "sensors.imu.sigma_psi", "must be > 0");
        check(&mut errors, self.sensors.imu.sigma_omega > 0.0, "sensors.imu.sigma_omega", "must be > 0");
        check(&mut errors, self.sensors.camera.rate_hz > 0.0, "sensors.camera.rate_hz", "must be > 0");
        check(&mut errors, 
            (0.0..=1.0).contains(&self.sensors.camera.miss_rate),
            "sensors.camera.miss_rate",
            "must be in [0, 1]",
        );
        check(&mut errors, 
            self.sensors.camera.jitter_px >= 0.0,
            "sensors.camera.jitter_px",
            "must be >= 0",
        );
        for (i, q) in self.ekf.q.iter().enumerate() {
            check(&mut errors, *q >= 0.0, &format!("ekf.q[{i}]"), "must be >= 0");
        }
        check(&mut errors, self.perception.outlier_k >= 1, "perception.outlier_k", "must be >= 1");
        check(&mut errors, 
            self.perception.outlier_thresh > 0.0,
            "perception.outlier_thresh",
            "must be > 0",
        );
        check(&mut errors, self.perception.segment_base > 0.0, "perception.segment_base", "must be > 0");
        check(&mut errors, self.perception.segment_slope >= 0.0, "perception.segment_slope", "must be >= 0");
        check(&mut errors, self.perception.min_points >= 1, "perception.min_points", "must be >= 1");
        check(&mut errors, 
            self.perception.iou_gate > 0.0 && self.perception.iou_gate < 1.0,
            "perception.iou_gate",
            "must be in (0, 1)",
        );
        check(&mut errors, 
            self.perception.object_height > 0.0,
            "perception.object_height",
            "must be > 0",
        );
        check(&mut errors, self.planner.margin >= 0.0, "planner.margin", "must be >= 0");
        check(&mut errors, self.planner.standoff >= 0.0, "planner.standoff", "must be >= 0");
        check(&mut errors, self.planner.a_max > 0.0, "planner.a_max", "must be > 0");
        check(&mut errors, self.planner.a_dec > 0.0, "planner.a_dec", "must be > 0");
        check(&mut errors, self.planner.omega_max > 0.0, "planner.omega_max", "must be > 0");
        check(&mut errors, self.planner.v_cruise > 0.0, "planner.v_cruise", "must be > 0");
        check(&mut errors, self.planner.v_levels >= 2, "planner.v_levels", "must be >= 2");
        check(&mut errors, self.planner.station_ds > 0.0, "planner.station_ds", "must be > 0");
        check(&mut errors, self.planner.offset_steps >= 0, "planner.offset_steps", "must be >= 0");
        check(&mut errors, self.planner.offset_spacing > 0.0, "planner.offset_spacing", "must be > 0");
        check(&mut errors, self.follower.lookahead > 0.0, "follower.lookahead", "must be > 0");
        check(&mut errors, self.follower.extension_len >= 0.0, "follower.extension_len", "must be >= 0");
        check(&mut errors, self.control.rate_hz > 0.0, "control.rate_hz", "must be > 0");
        check(&mut errors, self.control.kp_surge > 0.0, "control.kp_surge", "must be > 0");
        check(&mut errors, self.control.kp_yaw > 0.0, "control.kp_yaw", "must be > 0");
        check(&mut errors, self.control.f_max > 0.0, "control.f_max", "must be > 0");
        check(&mut errors, self.behavior.rate_hz > 0.0, "behavior.rate_hz", "must be > 0");
        check(&mut errors, self.behavior.tol_pos > 0.0, "behavior.tol_pos", "must be > 0");
        check(&mut errors, self.behavior.tol_heading > 0.0, "behavior.tol_heading", "must be > 0");
        if let Err(e) = build_tree(&self.behavior.tree) {
            errors.push(format!("behavior.tree: {e}"));
        }
        for (i, shape) in self.world.obstacles.iter().enumerate() {
            match shape {
                crate::world::Shape::Circle { radius, .. } => check(&mut errors, 
                    *radius > 0.0,
                    &format!("world.obstacles[{i}].radius"),
                    "must be > 0",
                ),
                crate::world::Shape::Polygon { vertices } => check(&mut errors, 
                    vertices.len() >= 3,
                    &format!("world.obstacles[{i}].vertices"),
                    "polygon needs >= 3 vertices",
                ),
            }
        }
        for (i, b) in self.world.buoys.iter().enumerate() {
            check(&mut errors, b.radius > 0.0, &format!("world.buoys[{i}].radius"), "must be > 0");
        }
        for (i, gate) in self.gates.iter().enumerate() {
            let n = self.world.buoys.len();
            if gate[0] >= n || gate[1] >= n {
                errors.push(format!("gates[{i}]: buoy index out of range (have {n})"));
                continue;
            }
            check(&mut errors, 
                self.world.buoys[gate[0]].label == ObjectLabel::RedBuoy,
                &format!("gates[{i}][0]"),
                "must reference a red buoy",
            );
            check(&mut errors, 
                self.world.buoys[gate[1]].label == ObjectLabel::GreenBuoy,
                &format!("gates[{i}][1]"),
                "must reference a green buoy",
            );
        }
        if let Some(hb) = &self.heartbeat {
            check(&mut errors, hb.rate_hz > 0.0, "heartbeat.rate_hz", "must be > 0");
            check(&mut errors, !hb.team_id.is_empty(), "heartbeat.team_id", "must be nonempty");
            check(&mut errors, 
                hb.team_id.chars().all(|c| c.is_ascii_alphanumeric()),
                "heartbeat.team_id",
                "must be alphanumeric",
            );
            check(&mut errors, 
                (1..=31).contains(&hb.date[0]) && (1..=12).contains(&hb.date[1]),
                "heartbeat.date",
                "must be a valid [day, month, year] triple",
            );
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Validation(errors))
        }
    }
}

/// Parse and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let scenario: Scenario = toml::from_str(&text)?;
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_toml() -> String {
        r#"
schema_version = 1
name = "unit"
seed = 7
duration_s = 10.0

[vessel]
m = 180.0
mx = 25.0
my = 40.0
iz = 250.0
jz = 30.0
w = 2.4
hull_width = 1.2
lin_drag = [70.0, 100.0, 80.0]

[propeller]
rho = 1000.0
dp = 0.25
k0 = 0.5
k1 = -0.3
k2 = -0.1
max_rev = 20.0

[start]
x = 0.0
y = 0.0
psi = 0.0

[behavior]
tree = { kind = "sequence", children = [ { kind = "stop" } ] }
"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_parses_and_validates() {
        let s: Scenario = toml::from_str(&minimal_toml()).unwrap();
        s.validate().unwrap();
        assert_eq!(s.dt, 0.02);
        assert_eq!(s.sensors.imu.rate_hz, 50.0);
    }

    #[test]
    fn negative_mass_names_the_field() {
        let text = minimal_toml().replace("m = 180.0", "m = -5.0");
        let s: Scenario = toml::from_str(&text).unwrap();
        let err = s.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("vessel.m"), "missing field path: {msg}");
    }

    #[test]
    fn unknown_behavior_action_is_rejected_at_parse() {
        let text = minimal_toml().replace("\"stop\"", "\"warp_drive\"");
        let err = toml::from_str::<Scenario>(&text).unwrap_err();
        assert!(err.to_string().contains("warp_drive") || err.to_string().contains("unknown variant"));
    }

    #[test]
    fn gate_referencing_wrong_color_fails() {
        let mut text = minimal_toml();
        text.push_str(
            r#"
gates = [[0, 1]]

[[world.buoys]]
x = 5.0
y = 2.0
radius = 0.4
label = "green_buoy"

[[world.buoys]]
x = 5.0
y = -2.0
radius = 0.4
label = "green_buoy"
"#,
        );
        let s: Scenario = toml::from_str(&text).unwrap();
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("gates[0][0]"), "got: {err}");
    }

    #[test]
    fn seed_is_mandatory() {
        let text = minimal_toml().replace("seed = 7\n", "");
        assert!(toml::from_str::<Scenario>(&text).is_err());
    }
}
