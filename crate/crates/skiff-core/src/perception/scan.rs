//! 2D laser scans, outlier removal and adaptive-breakpoint segmentation.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// Beam geometry of the simulated scanner.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanSpec {
    pub n_beams: usize,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
}

impl ScanSpec {
    /// Full-circle 360-beam scanner.
    pub fn full_circle(n_beams: usize, range_max: f64) -> Self {
        let angle_increment = 2.0 * std::f64::consts::PI / n_beams as f64;
        Self {
            n_beams,
            angle_min: -std::f64::consts::PI + angle_increment / 2.0,
            angle_increment,
            range_max,
        }
    }
}

/// One planar scan in the body frame. `+inf` marks a beam without a return.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserScan {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub ranges: Vec<f64>,
    pub timestamp: f64,
}

impl LaserScan {
    pub fn angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment
    }

    /// Body-frame cartesian point of beam `i`, `None` without a return.
    pub fn point(&self, i: usize) -> Option<Vector2<f64>> {
        let r = self.ranges[i];
        if r.is_finite() {
            let a = self.angle(i);
            Some(Vector2::new(r * a.cos(), r * a.sin()))
        } else {
            None
        }
    }

    /// True when the beams cover the full circle, so index 0 and n-1 are
    /// angular neighbors.
    pub fn wraps(&self) -> bool {
        let span = self.angle_increment * self.ranges.len() as f64;
        (span - 2.0 * std::f64::consts::PI).abs() < 1e-6
    }
}

/// Replace isolated returns with `+inf`: a sample survives only if some
/// neighbor within `k` beams on either side is within `dist_thresh` of it.
pub fn filter_outliers(scan: &LaserScan, k: usize, dist_thresh: f64) -> LaserScan {
    debug_assert!(k >= 1);
    let n = scan.ranges.len();
    let wraps = scan.wraps();
    let mut out = scan.ranges.clone();
    for i in 0..n {
        let r = scan.ranges[i];
        if !r.is_finite() {
            continue;
        }
        let mut supported = false;
        for off in 1..=k {
            for j in [i as isize - off as isize, i as isize + off as isize] {
                let j = if wraps {
                    j.rem_euclid(n as isize) as usize
                } else if j < 0 || j >= n as isize {
                    continue;
                } else {
                    j as usize
                };
                if j == i {
                    continue;
                }
                let rj = scan.ranges[j];
                if rj.is_finite() && (r - rj).abs() <= dist_thresh {
                    supported = true;
                }
            }
            if supported {
                break;
            }
        }
        if !supported {
            out[i] = f64::INFINITY;
        }
    }
    LaserScan {
        ranges: out,
        ..scan.clone()
    }
}

/// Contiguous run of scan returns forming one object candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Scan indices, contiguous modulo wraparound.
    pub indices: Vec<usize>,
    /// Body-frame points of those indices.
    pub points: Vec<Vector2<f64>>,
    pub centroid: Vector2<f64>,
}

impl Cluster {
    fn from_indices(indices: Vec<usize>, scan: &LaserScan) -> Self {
        let points: Vec<Vector2<f64>> = indices.iter().map(|&i| scan.point(i).unwrap()).collect();
        let centroid = points.iter().sum::<Vector2<f64>>() / points.len() as f64;
        Self {
            indices,
            points,
            centroid,
        }
    }
}

/// Adaptive-breakpoint gap predicate: consecutive returns join one cluster
/// when their cartesian gap stays below `base + slope * min(r_i, r_j)`.
pub fn gap_joins(scan: &LaserScan, i: usize, j: usize, base: f64, slope: f64) -> bool {
    let (pi, pj) = match (scan.point(i), scan.point(j)) {
        (Some(a), Some(b)) => (a, b),
        _ => return false,
    };
    let thresh = base + slope * scan.ranges[i].min(scan.ranges[j]);
    (pj - pi).norm() < thresh
}

/// Split a scan into clusters at adaptive range breakpoints. Runs shorter
/// than `min_points` are discarded. On full-circle scans the first and last
/// runs merge when the wraparound gap also joins.
pub fn segment_scan(scan: &LaserScan, base: f64, slope: f64, min_points: usize) -> Vec<Cluster> {
    let n = scan.ranges.len();
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for i in 0..n {
        if !scan.ranges[i].is_finite() {
            if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
            continue;
        }
        if let Some(&last) = current.last() {
            if gap_joins(scan, last, i, base, slope) {
                current.push(i);
            } else {
                runs.push(std::mem::take(&mut current));
                current.push(i);
            }
        } else {
            current.push(i);
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    // wraparound: last run may continue into the first
    if scan.wraps() && runs.len() >= 2 {
        let first_idx = runs[0][0];
        let last_idx = *runs.last().unwrap().last().unwrap();
        if first_idx == 0
            && last_idx == n - 1
            && gap_joins(scan, last_idx, first_idx, base, slope)
        {
            let first = runs.remove(0);
            runs.last_mut().unwrap().extend(first);
        }
    }
    runs.retain(|r| r.len() >= min_points);
    runs.into_iter().map(|r| Cluster::from_indices(r, scan)).collect()
}
