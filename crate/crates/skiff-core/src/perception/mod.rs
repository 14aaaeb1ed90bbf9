//! Simulated sensing and the lidar/camera fusion pipeline: ray-cast scans,
//! outlier filtering, adaptive segmentation, pinhole projection and gated
//! Hungarian matching against labeled detections.

mod assignment;
mod camera;
mod fusion;
mod lidar;
mod scan;

pub use assignment::{hungarian, match_detections, MatchResult};
pub use camera::{
    buoy_bbox, iou, project_cluster, simulate_camera_detections, BBox, CameraModel, Detection,
};
pub use fusion::{fuse, FusedObject, FusionResult};
pub use lidar::simulate_lidar;
pub use scan::{filter_outliers, gap_joins, segment_scan, Cluster, LaserScan, ScanSpec};
