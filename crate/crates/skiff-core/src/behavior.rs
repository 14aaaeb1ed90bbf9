//! Behavior-tree task logic: a Sequence composite with memory plus the leaf
//! actions the competition tasks need. Actions are non-blocking; anything
//! that takes time returns `Running` and is re-entered on the next tick. All
//! mutable task state lives in node memory and the blackboard.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::BodyVelocity;
use crate::geometry::{wrap_angle, Pose2D};
use crate::perception::FusedObject;
use crate::world::ObjectLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Running,
    Success,
    Failure,
}

impl std::fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NodeStatus::Running => "running",
            NodeStatus::Success => "success",
            NodeStatus::Failure => "failure",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BehaviorError {
    #[error("blackboard key `{0}` missing")]
    MissingKey(&'static str),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
}

/// What the task layer currently wants from the motion stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    /// Drive to a pose.
    Move(Pose2D),
    /// Hold position: zero commanded velocity.
    Hold,
}

#[derive(Debug, Clone, Copy)]
pub struct GoalTolerance {
    pub pos: f64,
    pub heading: f64,
}

impl Default for GoalTolerance {
    fn default() -> Self {
        Self {
            pos: 1.0,
            heading: 0.2,
        }
    }
}

/// Shared task state between the harness and the tree.
#[derive(Debug, Clone, Default)]
pub struct Blackboard {
    ego: Option<(Pose2D, BodyVelocity)>,
    fused: Option<Vec<FusedObject>>,
    pub goal: Option<Goal>,
    /// Gate midpoints already committed to, so a later search picks the next
    /// gate instead of re-finding the one just crossed.
    pub visited_gates: Vec<Vector2<f64>>,
    pub tol: GoalTolerance,
    /// Names of the actions ticked since the last `clear_trace`.
    pub trace: Vec<&'static str>,
}

impl Blackboard {
    pub fn set_ego(&mut self, pose: Pose2D, vel: BodyVelocity) {
        self.ego = Some((pose, vel));
    }

    pub fn set_fused(&mut self, objects: Vec<FusedObject>) {
        self.fused = Some(objects);
    }

    pub fn ego(&self) -> Result<(Pose2D, BodyVelocity), BehaviorError> {
        self.ego.ok_or(BehaviorError::MissingKey("ego"))
    }

    pub fn fused(&self) -> Result<&[FusedObject], BehaviorError> {
        self.fused
            .as_deref()
            .ok_or(BehaviorError::MissingKey("fused_objects"))
    }

    pub fn clear_trace(&mut self) {
        self.trace.clear();
    }
}

/// Declarative tree description, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeSpec {
    Sequence { children: Vec<TreeSpec> },
    SearchChannelMarkers,
    Navigate,
    MoveForward { distance: f64 },
    Stop,
    RotateAroundBuoy { radius: f64, #[serde(default)] clockwise: bool },
}

/// Instantiated tree node with per-node memory.
#[derive(Debug, Clone)]
pub enum BehaviorNode {
    Sequence { children: Vec<BehaviorNode>, cursor: usize },
    Action(ActionNode),
}

#[derive(Debug, Clone)]
pub enum ActionNode {
    SearchChannelMarkers,
    Navigate,
    MoveForward { distance: f64, target: Option<Pose2D> },
    Stop,
    RotateAroundBuoy {
        radius: f64,
        clockwise: bool,
        plan: Option<RotationPlan>,
    },
}

/// Waypoint circuit around a buoy, fixed once on first tick.
#[derive(Debug, Clone)]
pub struct RotationPlan {
    pub center: Vector2<f64>,
    pub waypoints: Vec<Pose2D>,
    pub next: usize,
}

/// Build an executable tree, rejecting malformed structure up front.
pub fn build_tree(spec: &TreeSpec) -> Result<BehaviorNode, BehaviorError> {
    match spec {
        TreeSpec::Sequence { children } => {
            if children.is_empty() {
                return Err(BehaviorError::MalformedTree(
                    "sequence needs at least one child".into(),
                ));
            }
            let children = children.iter().map(build_tree).collect::<Result<_, _>>()?;
            Ok(BehaviorNode::Sequence {
                children,
                cursor: 0,
            })
        }
        TreeSpec::SearchChannelMarkers => Ok(BehaviorNode::Action(ActionNode::SearchChannelMarkers)),
        TreeSpec::Navigate => Ok(BehaviorNode::Action(ActionNode::Navigate)),
        TreeSpec::MoveForward { distance } => {
            if *distance <= 0.0 {
                return Err(BehaviorError::MalformedTree(
                    "move_forward distance must be > 0".into(),
                ));
            }
            Ok(BehaviorNode::Action(ActionNode::MoveForward {
                distance: *distance,
                target: None,
            }))
        }
        TreeSpec::Stop => Ok(BehaviorNode::Action(ActionNode::Stop)),
        TreeSpec::RotateAroundBuoy { radius, clockwise } => {
            if *radius <= 0.0 {
                return Err(BehaviorError::MalformedTree(
                    "rotate_around_buoy radius must be > 0".into(),
                ));
            }
            Ok(BehaviorNode::Action(ActionNode::RotateAroundBuoy {
                radius: *radius,
                clockwise: *clockwise,
                plan: None,
            }))
        }
    }
}

/// Tick the tree once. The Sequence resumes at its running child, fails fast
/// on the first child failure, and resets after completing either way.
pub fn tick(node: &mut BehaviorNode, bb: &mut Blackboard) -> Result<NodeStatus, BehaviorError> {
    match node {
        BehaviorNode::Sequence { children, cursor } => {
            while *cursor < children.len() {
                match tick(&mut children[*cursor], bb)? {
                    NodeStatus::Success => *cursor += 1,
                    NodeStatus::Running => return Ok(NodeStatus::Running),
                    NodeStatus::Failure => {
                        *cursor = 0;
                        return Ok(NodeStatus::Failure);
                    }
                }
            }
            *cursor = 0;
            Ok(NodeStatus::Success)
        }
        BehaviorNode::Action(action) => tick_action(action, bb),
    }
}

fn goal_reached(ego: &Pose2D, goal: &Pose2D, tol: &GoalTolerance) -> bool {
    let dp = (ego.position() - goal.position()).norm();
    let dh = wrap_angle(ego.psi - goal.psi).abs();
    dp < tol.pos && dh < tol.heading
}

fn tick_action(action: &mut ActionNode, bb: &mut Blackboard) -> Result<NodeStatus, BehaviorError> {
    match action {
        ActionNode::SearchChannelMarkers => {
            bb.trace.push("search_channel_markers");
            search_channel_markers(bb)
        }
        ActionNode::Navigate => {
            bb.trace.push("navigate");
            let (pose, _) = bb.ego()?;
            let Some(Goal::Move(goal)) = bb.goal else {
                return Err(BehaviorError::MissingKey("goal"));
            };
            if goal_reached(&pose, &goal, &bb.tol) {
                Ok(NodeStatus::Success)
            } else {
                Ok(NodeStatus::Running)
            }
        }
        ActionNode::MoveForward { distance, target } => {
            bb.trace.push("move_forward");
            let (pose, _) = bb.ego()?;
            let goal = match target {
                Some(g) => *g,
                None => {
                    let p = pose.position() + pose.heading_dir() * *distance;
                    let g = Pose2D::new(p.x, p.y, pose.psi);
                    *target = Some(g);
                    g
                }
            };
            bb.goal = Some(Goal::Move(goal));
            if (pose.position() - goal.position()).norm() < bb.tol.pos {
                *target = None;
                Ok(NodeStatus::Success)
            } else {
                Ok(NodeStatus::Running)
            }
        }
        ActionNode::Stop => {
            bb.trace.push("stop");
            let (_, vel) = bb.ego()?;
            bb.goal = Some(Goal::Hold);
            if vel.speed() < 0.05 {
                Ok(NodeStatus::Success)
            } else {
                Ok(NodeStatus::Running)
            }
        }
        ActionNode::RotateAroundBuoy {
            radius,
            clockwise,
            plan,
        } => {
            bb.trace.push("rotate_around_buoy");
            let (pose, _) = bb.ego()?;
            if plan.is_none() {
                let fused = bb.fused()?;
                let nearest = fused
                    .iter()
                    .filter(|o| o.label != ObjectLabel::Dock)
                    .min_by(|a, b| a.position.norm().partial_cmp(&b.position.norm()).unwrap());
                let Some(buoy) = nearest else {
                    return Ok(NodeStatus::Failure);
                };
                let center = pose.body_to_world(buoy.position);
                *plan = Some(make_rotation_plan(center, &pose, *radius, *clockwise));
            }
            let p = plan.as_mut().unwrap();
            let wp = p.waypoints[p.next];
            bb.goal = Some(Goal::Move(wp));
            if (pose.position() - wp.position()).norm() < bb.tol.pos {
                p.next += 1;
                if p.next >= p.waypoints.len() {
                    *plan = None;
                    return Ok(NodeStatus::Success);
                }
            }
            Ok(NodeStatus::Running)
        }
    }
}

/// Circuit of waypoints on the circle of `radius` around `center`, starting
/// from the vessel's current bearing and running the requested direction.
pub fn make_rotation_plan(
    center: Vector2<f64>,
    pose: &Pose2D,
    radius: f64,
    clockwise: bool,
) -> RotationPlan {
    const SEGMENTS: usize = 12;
    let rel = pose.position() - center;
    let theta0 = rel.y.atan2(rel.x);
    let dir = if clockwise { -1.0 } else { 1.0 };
    let mut waypoints = Vec::with_capacity(SEGMENTS);
    for k in 1..=SEGMENTS {
        let theta = theta0 + dir * 2.0 * std::f64::consts::PI * k as f64 / SEGMENTS as f64;
        let p = center + Vector2::new(theta.cos(), theta.sin()) * radius;
        // tangent heading in the travel direction
        let heading = theta + dir * std::f64::consts::FRAC_PI_2;
        waypoints.push(Pose2D::new(p.x, p.y, heading));
    }
    RotationPlan {
        center,
        waypoints,
        next: 0,
    }
}

/// Find a red/green marker pair, write the gate midpoint plus crossing
/// heading as the goal. Pairs behind the vessel, implausibly wide, or at an
/// already-visited midpoint are skipped; the nearest midpoint wins.
fn search_channel_markers(bb: &mut Blackboard) -> Result<NodeStatus, BehaviorError> {
    const MIN_AHEAD: f64 = 2.0;
    const MAX_GATE_WIDTH: f64 = 20.0;
    const MIN_GATE_WIDTH: f64 = 1.0;
    const VISITED_RADIUS: f64 = 3.0;
    // a crossable gate stands roughly perpendicular to its approach bearing
    const MAX_PARALLELISM: f64 = 0.7;
    let (pose, _) = bb.ego()?;
    let fused = bb.fused()?;
    let reds: Vec<&FusedObject> = fused.iter().filter(|o| o.label == ObjectLabel::RedBuoy).collect();
    let greens: Vec<&FusedObject> =
        fused.iter().filter(|o| o.label == ObjectLabel::GreenBuoy).collect();
    let mut best: Option<(f64, Vector2<f64>, f64)> = None; // (dist, midpoint_world, heading)
    for r in &reds {
        for g in &greens {
            let width = (r.position - g.position).norm();
            if !(MIN_GATE_WIDTH..=MAX_GATE_WIDTH).contains(&width) {
                continue;
            }
            let mid_body = (r.position + g.position) * 0.5;
            if mid_body.x < MIN_AHEAD {
                continue;
            }
            let seg_body = (g.position - r.position) / width;
            let approach = mid_body.normalize();
            if seg_body.dot(&approach).abs() > MAX_PARALLELISM {
                continue; // markers from different gates line up with the bearing
            }
            let mid_world = pose.body_to_world(mid_body);
            if bb
                .visited_gates
                .iter()
                .any(|v| (v - mid_world).norm() < VISITED_RADIUS)
            {
                continue;
            }
            let dist = mid_body.norm();
            if best.map_or(true, |(bd, _, _)| dist < bd) {
                let r_world = pose.body_to_world(r.position);
                let g_world = pose.body_to_world(g.position);
                let seg = (g_world - r_world).normalize();
                let mut normal = Vector2::new(-seg.y, seg.x);
                if normal.dot(&(mid_world - pose.position())) < 0.0 {
                    normal = -normal;
                }
                best = Some((dist, mid_world, normal.y.atan2(normal.x)));
            }
        }
    }
    match best {
        Some((_, mid, heading)) => {
            bb.goal = Some(Goal::Move(Pose2D::new(mid.x, mid.y, heading)));
            bb.visited_gates.push(mid);
            Ok(NodeStatus::Success)
        }
        None => Ok(NodeStatus::Running),
    }
}
