//! Pinhole camera model, cluster projection and simulated detections.
//!
//! The scan is planar, so projected cluster boxes get their vertical span
//! synthesized from a configured object height centered on the scan plane.

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scan::Cluster;
use crate::dynamics::ParamError;
use crate::geometry::Pose2D;
use crate::world::{Buoy, ObjectLabel};

/// Axis-aligned pixel box, `min` corner inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        debug_assert!(x_min < x_max && y_min < y_max);
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }
}

/// Intersection-over-union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Pinhole intrinsics plus the mount pose in the body frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Camera position in the body frame (m).
    pub mount_x: f64,
    pub mount_y: f64,
    /// Optical-axis yaw in the body frame (rad).
    pub mount_yaw: f64,
    /// Horizontal field of view (rad); must agree with `2 atan(width / 2 fx)`.
    pub hfov: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(ParamError {
                field: "fx/fy",
                reason: "focal lengths must be > 0".into(),
            });
        }
        let implied = 2.0 * (self.width as f64 / (2.0 * self.fx)).atan();
        if (implied - self.hfov).abs() > 0.05 {
            return Err(ParamError {
                field: "hfov",
                reason: format!("inconsistent with width/fx (implied {implied:.4} rad)"),
            });
        }
        Ok(())
    }

    /// Body-frame point to camera coordinates (X right, Z along the optical
    /// axis).
    pub fn body_to_camera(&self, p: Vector2<f64>) -> (f64, f64) {
        let r = p - Vector2::new(self.mount_x, self.mount_y);
        let (s, c) = self.mount_yaw.sin_cos();
        let z = r.x * c + r.y * s;
        let x = r.x * s - r.y * c;
        (x, z)
    }

    /// Pixel column of a camera-frame point (Z > 0).
    pub fn project_u(&self, x: f64, z: f64) -> f64 {
        self.fx * x / z + self.cx
    }

    fn clip(&self, b: BBox) -> Option<BBox> {
        let x_min = b.x_min.max(0.0);
        let y_min = b.y_min.max(0.0);
        let x_max = b.x_max.min(self.width as f64);
        let y_max = b.y_max.min(self.height as f64);
        if x_min < x_max && y_min < y_max {
            Some(BBox {
                x_min,
                y_min,
                x_max,
                y_max,
            })
        } else {
            None
        }
    }
}

const Z_NEAR: f64 = 0.05;

/// Project a scan cluster into the image: hull of the projected points with a
/// synthesized vertical extent of `object_height` around the scan plane.
/// `None` when every point is behind the camera or the hull misses the image.
pub fn project_cluster(cluster: &Cluster, cam: &CameraModel, object_height: f64) -> Option<BBox> {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut any = false;
    for p in &cluster.points {
        let (x, z) = cam.body_to_camera(*p);
        if z <= Z_NEAR {
            continue;
        }
        any = true;
        let u = cam.project_u(x, z);
        let dv = cam.fy * (object_height / 2.0) / z;
        x_min = x_min.min(u);
        x_max = x_max.max(u);
        y_min = y_min.min(cam.cy - dv);
        y_max = y_max.max(cam.cy + dv);
    }
    if !any {
        return None;
    }
    // widen degenerate single-column hulls by half a pixel
    if x_max - x_min < 1.0 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    cam.clip(BBox {
        x_min,
        y_min,
        x_max,
        y_max,
    })
}

/// Labeled detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: ObjectLabel,
    pub prob: f64,
    pub bbox: BBox,
}

/// Ground-truth bounding box of a buoy in the image, if visible.
pub fn buoy_bbox(buoy: &Buoy, cam: &CameraModel, pose: &Pose2D) -> Option<BBox> {
    let body = pose.world_to_body(buoy.center());
    let (x, z) = cam.body_to_camera(body);
    if z <= Z_NEAR {
        return None;
    }
    let u = cam.project_u(x, z);
    let du = cam.fx * buoy.radius / z;
    let dv = cam.fy * buoy.radius / z;
    cam.clip(BBox {
        x_min: u - du,
        y_min: cam.cy - dv,
        x_max: u + du,
        y_max: cam.cy + dv,
    })
}

/// Detector stand-in: every visible buoy yields a ground-truth-labeled
/// detection with jittered corners, dropped i.i.d. with `miss_rate`.
pub fn simulate_camera_detections<R: Rng>(
    buoys: &[Buoy],
    cam: &CameraModel,
    pose: &Pose2D,
    miss_rate: f64,
    bbox_jitter_px: f64,
    rng: &mut R,
) -> Vec<Detection> {
    debug_assert!((0.0..=1.0).contains(&miss_rate));
    let mut out = Vec::new();
    for buoy in buoys {
        let Some(bbox) = buoy_bbox(buoy, cam, pose) else {
            continue;
        };
        if rng.gen::<f64>() < miss_rate {
            continue;
        }
        let bbox = if bbox_jitter_px > 0.0 {
            let noise = Normal::new(0.0, bbox_jitter_px).expect("positive sigma");
            let jittered = BBox {
                x_min: bbox.x_min + noise.sample(rng),
                y_min: bbox.y_min + noise.sample(rng),
                x_max: bbox.x_max + noise.sample(rng),
                y_max: bbox.y_max + noise.sample(rng),
            };
            let fixed = BBox {
                x_min: jittered.x_min.min(jittered.x_max - 1.0),
                y_min: jittered.y_min.min(jittered.y_max - 1.0),
                x_max: jittered.x_max.max(jittered.x_min + 1.0),
                y_max: jittered.y_max.max(jittered.y_min + 1.0),
            };
            match cam.clip(fixed) {
                Some(b) => b,
                None => continue,
            }
        } else {
            bbox
        };
        out.push(Detection {
            label: buoy.label,
            prob: 1.0 - miss_rate,
            bbox,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn test_cam() -> CameraModel {
        let width = 800u32;
        let fx = 400.0;
        CameraModel {
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
        }
    }

    fn cluster_at(points: Vec<Vector2<f64>>) -> Cluster {
        let centroid = points.iter().sum::<Vector2<f64>>() / points.len() as f64;
        Cluster {
            indices: (0..points.len()).collect(),
            points,
            centroid,
        }
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 1.0, 1.0);
        assert_eq!(iou(&a, &a), 1.0);
        let b = BBox::new(5.0, 5.0, 6.0, 6.0);
        assert_eq!(iou(&a, &b), 0.0);
        // unit squares overlapping by half: 0.5 / 1.5
        let c = BBox::new(0.5, 0.0, 1.5, 1.0);
        assert_relative_eq!(iou(&a, &c), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let rb = |rng: &mut ChaCha8Rng| {
                let x = rng.gen_range(0.0..50.0);
                let y = rng.gen_range(0.0..50.0);
                BBox::new(x, y, x + rng.gen_range(1.0..20.0), y + rng.gen_range(1.0..20.0))
            };
            let a = rb(&mut rng);
            let b = rb(&mut rng);
            let ab = iou(&a, &b);
            assert_eq!(ab, iou(&b, &a));
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn on_axis_cluster_centers_at_cx() {
        let cam = test_cam();
        // symmetric cluster straight ahead
        let c = cluster_at(vec![
            Vector2::new(5.0, -0.3),
            Vector2::new(5.0, 0.0),
            Vector2::new(5.0, 0.3),
        ]);
        let b = project_cluster(&c, &cam, 1.0).unwrap();
        let (ucx, _) = b.center();
        assert_relative_eq!(ucx, cam.cx, epsilon = 1e-9);
    }

    #[test]
    fn cluster_behind_camera_is_invisible() {
        let cam = test_cam();
        let c = cluster_at(vec![Vector2::new(-3.0, 0.0), Vector2::new(-3.5, 0.2)]);
        assert!(project_cluster(&c, &cam, 1.0).is_none());
    }

    #[test]
    fn pinhole_arithmetic_by_hand() {
        let cam = test_cam();
        // forward-facing camera at origin: body (Z=4, X=right=-y_body)
        let pts = [
            (Vector2::new(4.0, 0.0), 400.0),          // on axis
            (Vector2::new(4.0, -1.0), 500.0),         // 1 m to the right: u = 400*1/4 + 400
            (Vector2::new(2.0, 0.5), 300.0),          // left: u = 400*(-0.5)/2 + 400
        ];
        for (p, want_u) in pts {
            let (x, z) = cam.body_to_camera(p);
            assert_relative_eq!(cam.project_u(x, z), want_u, epsilon = 1e-9);
        }
    }

    #[test]
    fn buoy_outside_fov_absent() {
        let cam = test_cam();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        // directly left of the vessel: outside a forward ~90 deg FOV
        let buoy = Buoy {
            x: 0.0,
            y: 10.0,
            radius: 0.4,
            label: ObjectLabel::RedBuoy,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = simulate_camera_detections(&[buoy], &cam, &pose, 0.0, 0.0, &mut rng);
        assert!(out.is_empty());
    }

    #[test]
    fn noiseless_detection_matches_projection() {
        let cam = test_cam();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let buoy = Buoy {
            x: 8.0,
            y: 1.0,
            radius: 0.4,
            label: ObjectLabel::GreenBuoy,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = simulate_camera_detections(&[buoy], &cam, &pose, 0.0, 0.0, &mut rng);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, ObjectLabel::GreenBuoy);
        assert_eq!(out[0].prob, 1.0);
        let want = buoy_bbox(&buoy, &cam, &pose).unwrap();
        assert_eq!(out[0].bbox, want);
    }

    #[test]
    fn empirical_miss_rate_tracks_parameter() {
        let cam = test_cam();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let buoy = Buoy {
            x: 10.0,
            y: 0.0,
            radius: 0.4,
            label: ObjectLabel::RedBuoy,
        };
        let miss = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 10_000;
        let mut missed = 0;
        for _ in 0..trials {
            if simulate_camera_detections(&[buoy], &cam, &pose, miss, 0.0, &mut rng).is_empty() {
                missed += 1;
            }
        }
        let frac = missed as f64 / trials as f64;
        assert!((frac - miss).abs() < 0.02, "empirical miss rate {frac}");
    }

    #[test]
    fn fov_consistency_enforced() {
        let mut cam = test_cam();
        cam.hfov = 2.1; // way off the implied ~1.57
        assert!(cam.validate().is_err());
    }
}
