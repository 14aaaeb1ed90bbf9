//! Deterministic closed-loop simulation: ground truth -> sensors -> EKF ->
//! perception -> behavior -> planner -> follower -> velocity controller ->
//! thrusters -> dynamics, at fixed dt. Only sensor simulators, the thruster
//! plant and the metrics read ground truth.

use nalgebra::{Matrix6, Vector2, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::behavior::{build_tree, tick, Blackboard, Goal, NodeStatus};
use crate::dynamics::{
    allocate_thrust, inverse_allocation, propeller_thrust, step, thrust_to_rev, BodyVelocity,
    VesselState, Wrench,
};
use crate::follower::{lookahead_target, pursuit_command};
use crate::geometry::{segments_intersect, wrap_angle, Pose2D};
use crate::heartbeat::{HeartbeatClient, HeartbeatSentence, SystemMode};
use crate::localization::{Ekf, EkfState, GnssMeasurement, ImuMeasurement};
use crate::perception::{
    filter_outliers, fuse, segment_scan, simulate_camera_detections, simulate_lidar, Cluster,
    FusedObject, ScanSpec,
};
use crate::planner::{
    check_collision, curve_planner, local_waypoint_search, obstacle_planner, offset_grid,
    stop_planner, uniform_levels, velocity_graph_search, HermiteCurve, ObstaclePoint, SampledPath,
    VelocityProfile,
};
use crate::scenario::Scenario;

/// One tick of the log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub gt: [f64; 6],
    pub est: [f64; 6],
    pub cmd_fx: f64,
    pub cmd_fyaw: f64,
    pub f_right: f64,
    pub f_left: f64,
    pub rev_right: f64,
    pub rev_left: f64,
    pub v_des: f64,
    pub omega_des: f64,
    pub goal: Option<Pose2D>,
    pub bt_status: String,
    pub fused_count: usize,
    pub clearance: f64,
}

/// A path committed by the planner, kept for plotting.
#[derive(Debug, Clone)]
pub struct PlannedPath {
    pub t: f64,
    pub points: Vec<Vector2<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct SimLog {
    pub dt: f64,
    pub rows: Vec<LogRow>,
    pub planned_paths: Vec<PlannedPath>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    TaskSuccess,
    TaskFailure,
    RunError,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateCrossing {
    pub gate: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub status: RunStatus,
    pub rmse_position: f64,
    pub completed: bool,
    pub completion_time: Option<f64>,
    pub min_obstacle_clearance: f64,
    pub sim_duration: f64,
    pub gates_crossed: Vec<GateCrossing>,
    pub heartbeat_sent: Option<u32>,
    pub errors: Vec<String>,
}

pub struct RunOutput {
    pub log: SimLog,
    pub metrics: Metrics,
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fires at a fixed rate on the sim clock (at most once per tick).
struct RateTimer {
    period: f64,
    next: f64,
}

impl RateTimer {
    fn new(rate_hz: f64) -> Self {
        Self {
            period: 1.0 / rate_hz,
            next: 0.0,
        }
    }

    fn due(&mut self, t: f64) -> bool {
        if t + 1e-9 >= self.next {
            self.next += self.period;
            true
        } else {
            false
        }
    }
}

struct PlanState {
    curve: HermiteCurve,
    path: SampledPath,
    profile: VelocityProfile,
    goal: Pose2D,
}

/// Run a scenario to completion. Never panics on module errors; they are
/// collected into the metrics and fail the run.
pub fn run(scenario: &Scenario) -> RunOutput {
    run_with_heartbeat(scenario, None)
}

/// Like [`run`], optionally overriding the heartbeat endpoint (enables the
/// client even when the scenario leaves it off).
pub fn run_with_heartbeat(scenario: &Scenario, endpoint: Option<(String, u16)>) -> RunOutput {
    let mut errors: Vec<String> = Vec::new();

    let mut rng_lidar = rng_stream(scenario.seed, 1);
    let mut rng_camera = rng_stream(scenario.seed, 2);
    let mut rng_gnss = rng_stream(scenario.seed, 3);
    let mut rng_imu = rng_stream(scenario.seed, 4);

    let start = Pose2D::new(scenario.start.x, scenario.start.y, scenario.start.psi);
    let mut gt = VesselState::at_rest(start);
    let ekf_cfg = &scenario.ekf;
    let init_cov = Matrix6::from_diagonal(&Vector6::new(
        ekf_cfg.init_sigma_pos * ekf_cfg.init_sigma_pos,
        ekf_cfg.init_sigma_pos * ekf_cfg.init_sigma_pos,
        ekf_cfg.init_sigma_psi * ekf_cfg.init_sigma_psi,
        ekf_cfg.init_sigma_vel * ekf_cfg.init_sigma_vel,
        ekf_cfg.init_sigma_vel * ekf_cfg.init_sigma_vel,
        ekf_cfg.init_sigma_vel * ekf_cfg.init_sigma_vel,
    ));
    let mut ekf = Ekf::new(
        EkfState::new(start, BodyVelocity::zero(), init_cov),
        ekf_cfg.q,
        0.0,
    );

    let mut tree = match build_tree(&scenario.behavior.tree) {
        Ok(t) => t,
        Err(e) => {
            return error_output(scenario, format!("behavior tree: {e}"));
        }
    };
    let mut bb = Blackboard::default();
    bb.tol = scenario.behavior.tolerance();
    bb.set_fused(Vec::new());
    let mut terminal: Option<NodeStatus> = None;
    let mut bt_status = "init".to_string();

    let scan_spec = ScanSpec::full_circle(scenario.sensors.lidar.beams, scenario.sensors.lidar.range_max);
    let gnss_noise = Normal::new(0.0, scenario.sensors.gnss.sigma).expect("sigma > 0");
    let imu_psi_noise = Normal::new(0.0, scenario.sensors.imu.sigma_psi).expect("sigma > 0");
    let imu_omega_noise = Normal::new(0.0, scenario.sensors.imu.sigma_omega).expect("sigma > 0");

    let mut lidar_timer = RateTimer::new(scenario.sensors.lidar.rate_hz);
    let mut camera_timer = RateTimer::new(scenario.sensors.camera.rate_hz);
    let mut gnss_timer = RateTimer::new(scenario.sensors.gnss.rate_hz);
    let mut imu_timer = RateTimer::new(scenario.sensors.imu.rate_hz);
    let mut bt_timer = RateTimer::new(scenario.behavior.rate_hz);
    let mut control_timer = RateTimer::new(scenario.control.rate_hz);

    let offsets = offset_grid(scenario.planner.offset_steps, scenario.planner.offset_spacing);
    let levels = uniform_levels(scenario.planner.v_cruise, scenario.planner.v_levels);
    let collision_width = scenario.vessel.hull_width;

    let heartbeat = start_heartbeat(scenario, endpoint);

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut fused: Vec<FusedObject> = Vec::new();
    let mut obstacle_points: Vec<ObstaclePoint> = Vec::new();
    let mut plan: Option<PlanState> = None;
    let mut planned_paths: Vec<PlannedPath> = Vec::new();

    let mut cmd = Wrench::zero();
    let mut forces = (0.0_f64, 0.0_f64);
    let mut revs = (0.0_f64, 0.0_f64);
    let mut applied = Wrench::zero();
    let mut v_des = 0.0_f64;
    let mut omega_des = 0.0_f64;

    let n_steps = (scenario.duration_s / scenario.dt).round() as usize;
    let mut rows = Vec::with_capacity(n_steps + 1);
    let mut min_clearance = f64::INFINITY;
    let mut gates_crossed: Vec<GateCrossing> = Vec::new();
    let mut gate_done = vec![false; scenario.gates.len()];
    let mut completion_time: Option<f64> = None;

    for k in 0..=n_steps {
        let t = k as f64 * scenario.dt;

        // --- sensing & estimation ---
        if imu_timer.due(t) {
            let meas = ImuMeasurement {
                psi: wrap_angle(gt.pose.psi + imu_psi_noise.sample(&mut rng_imu)),
                omega: gt.vel.omega + imu_omega_noise.sample(&mut rng_imu),
                sigma_psi: scenario.sensors.imu.sigma_psi,
                sigma_omega: scenario.sensors.imu.sigma_omega,
            };
            ekf.ingest_imu(&meas, t);
        }
        if gnss_timer.due(t) {
            let meas = GnssMeasurement {
                x: gt.pose.x + gnss_noise.sample(&mut rng_gnss),
                y: gt.pose.y + gnss_noise.sample(&mut rng_gnss),
                sigma: scenario.sensors.gnss.sigma,
            };
            ekf.ingest_gnss(&meas, t);
        }
        ekf.predict_to(t);
        let est_pose = ekf.state.pose();
        let est_vel = ekf.state.velocity();

        if lidar_timer.due(t) {
            let raw = simulate_lidar(
                &scenario.world,
                &gt.pose,
                &scan_spec,
                scenario.sensors.lidar.noise_sigma,
                t,
                &mut rng_lidar,
            );
            let filtered = filter_outliers(
                &raw,
                scenario.perception.outlier_k,
                scenario.perception.outlier_thresh,
            );
            clusters = segment_scan(
                &filtered,
                scenario.perception.segment_base,
                scenario.perception.segment_slope,
                scenario.perception.min_points,
            );
        }
        if camera_timer.due(t) {
            let detections = simulate_camera_detections(
                &scenario.world.buoys,
                &scenario.sensors.camera.model,
                &gt.pose,
                scenario.sensors.camera.miss_rate,
                scenario.sensors.camera.jitter_px,
                &mut rng_camera,
            );
            let result = fuse(
                &clusters,
                &detections,
                &scenario.sensors.camera.model,
                scenario.perception.iou_gate,
                scenario.perception.object_height,
            );
            fused = result.objects;
            // every scan cluster is an obstacle for the planner, labeled or
            // not, expressed in the world frame through the estimate
            obstacle_points = collect_obstacle_points(&clusters, &est_pose);
        }

        // --- behavior & planning ---
        if bt_timer.due(t) {
            if terminal.is_none() {
                bb.set_ego(est_pose, est_vel);
                bb.set_fused(fused.clone());
                match tick(&mut tree, &mut bb) {
                    Ok(status) => {
                        bt_status = status.to_string();
                        if status != NodeStatus::Running {
                            terminal = Some(status);
                            completion_time = Some(t);
                            bb.goal = Some(Goal::Hold);
                        }
                    }
                    Err(e) => {
                        errors.push(format!("behavior tick at t={t:.2}: {e}"));
                        terminal = Some(NodeStatus::Failure);
                        bb.goal = Some(Goal::Hold);
                    }
                }
            }

            match bb.goal {
                Some(Goal::Move(goal)) => {
                    let goal_changed = plan.as_ref().map_or(true, |p| p.goal != goal);
                    let path_blocked = plan.as_ref().is_some_and(|p| {
                        !check_collision(
                            &p.curve,
                            &obstacle_points,
                            collision_width,
                            scenario.planner.margin,
                        )
                        .is_empty()
                    });
                    if goal_changed || path_blocked {
                        plan = make_plan(
                            scenario,
                            &est_pose,
                            est_vel.u,
                            &goal,
                            &obstacle_points,
                            &offsets,
                            &levels,
                        );
                        if let Some(p) = &plan {
                            planned_paths.push(PlannedPath {
                                t,
                                points: p.path.points.clone(),
                            });
                        }
                    }
                }
                _ => plan = None,
            }
        }

        // --- control ---
        if control_timer.due(t) {
            (v_des, omega_des) = command(scenario, &bb, &plan, &est_pose);
            let fx = scenario.control.kp_surge * (v_des - est_vel.u)
                + scenario.vessel.lin_drag[0] * v_des;
            let fyaw = scenario.control.kp_yaw * (omega_des - est_vel.omega)
                + scenario.vessel.lin_drag[2] * omega_des;
            cmd = Wrench::new(fx, 0.0, fyaw);
            let pair = inverse_allocation(&cmd, scenario.vessel.w, scenario.control.f_max);
            // rev command from the estimated inflow, force realized by the
            // plant at the true inflow
            let (rev_r, f_r) = thruster_chain(pair.right, est_vel.u, gt.vel.u, scenario);
            let (rev_l, f_l) = thruster_chain(pair.left, est_vel.u, gt.vel.u, scenario);
            revs = (rev_r, rev_l);
            forces = (f_r, f_l);
            applied = allocate_thrust(f_r, f_l, scenario.vessel.w);
        }

        // --- metrics & logging ---
        let clearance = scenario.world.min_clearance(gt.pose.position());
        min_clearance = min_clearance.min(clearance);
        rows.push(LogRow {
            t,
            gt: [gt.pose.x, gt.pose.y, gt.pose.psi, gt.vel.u, gt.vel.v, gt.vel.omega],
            est: [
                est_pose.x, est_pose.y, est_pose.psi, est_vel.u, est_vel.v, est_vel.omega,
            ],
            cmd_fx: cmd.fx,
            cmd_fyaw: cmd.fyaw,
            f_right: forces.0,
            f_left: forces.1,
            rev_right: revs.0,
            rev_left: revs.1,
            v_des,
            omega_des,
            goal: match bb.goal {
                Some(Goal::Move(g)) => Some(g),
                _ => None,
            },
            bt_status: bt_status.clone(),
            fused_count: fused.len(),
            clearance,
        });

        if let Some(hb) = &heartbeat {
            hb.client.push_snapshot(HeartbeatSentence::from_enu(
                est_pose.x,
                est_pose.y,
                &hb.datum,
                hb.date,
                t,
                &hb.team_id,
                SystemMode::Autonomous,
            ));
        }

        // --- plant ---
        if k < n_steps {
            let prev = gt.pose.position();
            gt = step(
                &gt,
                &applied,
                scenario.dt,
                &scenario.vessel,
                scenario.coriolis_mode,
            );
            let now = gt.pose.position();
            for (gi, gate) in scenario.gates.iter().enumerate() {
                if gate_done[gi] {
                    continue;
                }
                let a = scenario.world.buoys[gate[0]].center();
                let b = scenario.world.buoys[gate[1]].center();
                if segments_intersect(prev, now, a, b) {
                    gate_done[gi] = true;
                    gates_crossed.push(GateCrossing {
                        gate: gi,
                        t: t + scenario.dt,
                    });
                }
            }
        }
    }

    let heartbeat_sent = heartbeat.map(|hb| {
        let sent = hb.client.metrics.sent.load(std::sync::atomic::Ordering::SeqCst);
        hb.client.stop();
        sent
    });

    let rmse_position = {
        let sum: f64 = rows
            .iter()
            .map(|r| {
                let dx = r.gt[0] - r.est[0];
                let dy = r.gt[1] - r.est[1];
                dx * dx + dy * dy
            })
            .sum();
        (sum / rows.len() as f64).sqrt()
    };

    let completed = terminal == Some(NodeStatus::Success);
    let status = if !errors.is_empty() {
        RunStatus::RunError
    } else if completed {
        RunStatus::TaskSuccess
    } else {
        RunStatus::TaskFailure
    };
    RunOutput {
        log: SimLog {
            dt: scenario.dt,
            rows,
            planned_paths,
        },
        metrics: Metrics {
            status,
            rmse_position,
            completed,
            completion_time,
            min_obstacle_clearance: min_clearance,
            sim_duration: scenario.duration_s,
            gates_crossed,
            heartbeat_sent,
            errors,
        },
    }
}

struct HeartbeatHandle {
    client: HeartbeatClient,
    datum: crate::heartbeat::Datum,
    date: (u8, u8, u8),
    team_id: String,
}

fn start_heartbeat(scenario: &Scenario, endpoint: Option<(String, u16)>) -> Option<HeartbeatHandle> {
    let cfg = scenario.heartbeat.as_ref()?;
    let (host, port) = match endpoint {
        Some((h, p)) => (h, p),
        None if cfg.enabled => (cfg.host.clone(), cfg.port),
        None => return None,
    };
    Some(HeartbeatHandle {
        client: HeartbeatClient::start(host, port, cfg.rate_hz),
        datum: cfg.datum,
        date: (cfg.date[0], cfg.date[1], cfg.date[2]),
        team_id: cfg.team_id.clone(),
    })
}

fn error_output(scenario: &Scenario, message: String) -> RunOutput {
    RunOutput {
        log: SimLog {
            dt: scenario.dt,
            rows: Vec::new(),
            planned_paths: Vec::new(),
        },
        metrics: Metrics {
            status: RunStatus::RunError,
            rmse_position: f64::NAN,
            completed: false,
            completion_time: None,
            min_obstacle_clearance: f64::INFINITY,
            sim_duration: scenario.duration_s,
            gates_crossed: Vec::new(),
            heartbeat_sent: None,
            errors: vec![message],
        },
    }
}

/// World-frame obstacle points from the scan clusters, capped to keep the
/// collision checks bounded.
fn collect_obstacle_points(clusters: &[Cluster], est_pose: &Pose2D) -> Vec<ObstaclePoint> {
    const MAX_POINTS: usize = 300;
    let total: usize = clusters.iter().map(|c| c.points.len()).sum();
    let stride = (total / MAX_POINTS).max(1);
    let mut out = Vec::with_capacity(total.min(MAX_POINTS) + clusters.len());
    for c in clusters {
        for p in c.points.iter().step_by(stride) {
            let w = est_pose.body_to_world(*p);
            out.push(ObstaclePoint::new(w.x, w.y));
        }
    }
    out
}

fn make_plan(
    scenario: &Scenario,
    est_pose: &Pose2D,
    est_u: f64,
    goal: &Pose2D,
    obstacles: &[ObstaclePoint],
    offsets: &[Vector2<f64>],
    levels: &[f64],
) -> Option<PlanState> {
    let pcfg = &scenario.planner;
    if (est_pose.position() - goal.position()).norm() < scenario.behavior.tol_pos * 0.5 {
        return None; // already on top of the goal; alignment handles heading
    }
    let (curve, _off) = local_waypoint_search(
        est_pose,
        goal,
        obstacles,
        scenario.vessel.hull_width,
        pcfg.margin,
        offsets,
    )?;
    let path = SampledPath::from_curve(&curve, pcfg.station_ds);
    let stop = stop_planner(&path.stations, pcfg.v_cruise, pcfg.a_dec);
    let obst = obstacle_planner(
        &curve,
        &path,
        obstacles,
        scenario.vessel.hull_width,
        pcfg.margin,
        pcfg.standoff,
        pcfg.a_dec,
    );
    let curv = curve_planner(&path, pcfg.omega_max, pcfg.v_cruise);
    let start_cap = stop.v_max[0].min(obst.v_max[0]).min(curv.v_max[0]);
    let v_start = est_u.clamp(0.0, start_cap.min(pcfg.v_cruise));
    let profile = match velocity_graph_search(&[stop, obst, curv], pcfg.a_max, levels, v_start) {
        Ok(p) => p,
        Err(_) => return None,
    };
    Some(PlanState {
        curve,
        path,
        profile,
        goal: *goal,
    })
}

/// Desired (v, omega) for the current tick.
fn command(
    scenario: &Scenario,
    bb: &Blackboard,
    plan: &Option<PlanState>,
    est_pose: &Pose2D,
) -> (f64, f64) {
    match (&bb.goal, plan) {
        (Some(Goal::Move(goal)), Some(p)) => {
            let dist = (est_pose.position() - goal.position()).norm();
            let heading_err = wrap_angle(goal.psi - est_pose.psi);
            if dist < scenario.behavior.tol_pos && heading_err.abs() > scenario.behavior.tol_heading
            {
                // close enough: rotate in place to the goal heading
                let omega = (1.5 * heading_err).clamp(-scenario.planner.omega_max, scenario.planner.omega_max);
                return (0.0, omega);
            }
            let s_now = p.path.project(est_pose.position()).0;
            let v = if p.profile.feasible {
                p.profile.speed_at(s_now)
            } else {
                0.0
            };
            match lookahead_target(&p.path, scenario.follower.extension_len, est_pose, scenario.follower.lookahead) {
                Ok(target) => pursuit_command(est_pose, target.point, v, scenario.follower.lookahead),
                Err(_) => (0.0, 0.0),
            }
        }
        (Some(Goal::Move(goal)), None) => {
            // no path (goal on top of us or blocked): align heading only
            let heading_err = wrap_angle(goal.psi - est_pose.psi);
            let omega = (1.5 * heading_err).clamp(-scenario.planner.omega_max, scenario.planner.omega_max);
            (0.0, omega)
        }
        _ => (0.0, 0.0),
    }
}

/// Controller-side rev selection at the estimated inflow, plant-side force at
/// the true inflow.
fn thruster_chain(f_des: f64, est_u: f64, gt_u: f64, scenario: &Scenario) -> (f64, f64) {
    let rev = thrust_to_rev(f_des.abs(), est_u.max(0.0), &scenario.propeller);
    let applied = propeller_thrust(rev.n, gt_u.max(0.0), &scenario.propeller);
    (f_des.signum() * rev.n, f_des.signum() * applied)
}
