//! Cluster/detection fusion: project, match, attach labels to centroids.

use nalgebra::Vector2;

use super::assignment::match_detections;
use super::camera::{project_cluster, BBox, CameraModel, Detection};
use super::scan::Cluster;
use crate::world::ObjectLabel;

/// Labeled object in the body frame, produced by a cluster/detection match.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedObject {
    pub label: ObjectLabel,
    /// Cluster centroid in the body frame.
    pub position: Vector2<f64>,
    pub cluster_id: usize,
    pub detection_id: usize,
    /// Assignment cost `1 - IoU`, in [0, 1].
    pub cost: f64,
}

/// Fusion output: labeled objects plus the leftovers on both sides.
/// Unmatched clusters stay useful downstream as unlabeled obstacles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusionResult {
    pub objects: Vec<FusedObject>,
    pub unmatched_clusters: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Compose projection and gated matching.
pub fn fuse(
    clusters: &[Cluster],
    detections: &[Detection],
    cam: &CameraModel,
    iou_gate: f64,
    object_height: f64,
) -> FusionResult {
    // clusters that project into the image, with their original indices
    let mut visible: Vec<(usize, BBox)> = Vec::new();
    let mut result = FusionResult::default();
    for (i, c) in clusters.iter().enumerate() {
        match project_cluster(c, cam, object_height) {
            Some(b) => visible.push((i, b)),
            None => result.unmatched_clusters.push(i),
        }
    }
    let boxes: Vec<BBox> = visible.iter().map(|(_, b)| *b).collect();
    let det_boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
    let matches = match_detections(&boxes, &det_boxes, iou_gate);
    for (vi, di, overlap) in matches.pairs {
        let cluster_id = visible[vi].0;
        result.objects.push(FusedObject {
            label: detections[di].label,
            position: clusters[cluster_id].centroid,
            cluster_id,
            detection_id: di,
            cost: 1.0 - overlap,
        });
    }
    for vi in matches.unmatched_clusters {
        result.unmatched_clusters.push(visible[vi].0);
    }
    result.unmatched_clusters.sort_unstable();
    result.unmatched_detections = matches.unmatched_detections;
    result
}
