//! Velocity constraints along a path and the profile search.
//!
//! Three independent constraint sources (terminal stop, obstacle standoff,
//! curvature) produce per-station speed caps over one shared station grid.
//! The profile search runs dynamic programming over the DAG whose nodes are
//! (station, discrete speed level) and whose edges keep
//! `|v_j^2 - v_i^2| <= 2 a_max ds`, maximizing total speed.

use super::collision::{check_collision, ObstaclePoint};
use super::hermite::{HermiteCurve, SampledPath};
use super::PlannerError;
use crate::geometry::wrap_angle;

const EPS: f64 = 1e-9;

/// Per-station speed caps; `v_max[i]` applies at `stations[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityConstraint {
    pub stations: Vec<f64>,
    pub v_max: Vec<f64>,
}

impl VelocityConstraint {
    pub fn unbounded(stations: &[f64]) -> Self {
        Self {
            stations: stations.to_vec(),
            v_max: vec![f64::INFINITY; stations.len()],
        }
    }

    /// Pointwise minimum with another constraint on the same grid.
    pub fn merge(&self, other: &VelocityConstraint) -> Result<VelocityConstraint, PlannerError> {
        if self.stations.len() != other.stations.len()
            || self
                .stations
                .iter()
                .zip(&other.stations)
                .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(PlannerError::MismatchedStations);
        }
        Ok(VelocityConstraint {
            stations: self.stations.clone(),
            v_max: self
                .v_max
                .iter()
                .zip(&other.v_max)
                .map(|(a, b)| a.min(*b))
                .collect(),
        })
    }

    pub fn merge_all(constraints: &[VelocityConstraint]) -> Result<VelocityConstraint, PlannerError> {
        let mut it = constraints.iter();
        let first = it.next().expect("at least one constraint");
        it.try_fold(first.clone(), |acc, c| acc.merge(c))
    }
}

/// Planned speed per station. `feasible` is false when no profile satisfied
/// the constraints; speeds are then all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub stations: Vec<f64>,
    pub v: Vec<f64>,
    pub feasible: bool,
}

impl VelocityProfile {
    /// Planned speed at arc length `s`, linearly interpolated.
    pub fn speed_at(&self, s: f64) -> f64 {
        if s <= self.stations[0] {
            return self.v[0];
        }
        for i in 1..self.stations.len() {
            if s <= self.stations[i] {
                let span = self.stations[i] - self.stations[i - 1];
                let frac = if span > 0.0 {
                    (s - self.stations[i - 1]) / span
                } else {
                    0.0
                };
                return self.v[i - 1] + frac * (self.v[i] - self.v[i - 1]);
            }
        }
        *self.v.last().unwrap()
    }
}

/// Terminal-stop constraint: decelerate at `a_dec` to zero speed at the path
/// end, capped by the cruise speed.
pub fn stop_planner(stations: &[f64], v_cruise: f64, a_dec: f64) -> VelocityConstraint {
    debug_assert!(a_dec > 0.0);
    let total = *stations.last().expect("nonempty stations");
    let v_max = stations
        .iter()
        .map(|s| (2.0 * a_dec * (total - s).max(0.0)).sqrt().min(v_cruise))
        .collect();
    VelocityConstraint {
        stations: stations.to_vec(),
        v_max,
    }
}

/// Stop-before-obstacle constraint: like the terminal stop, but the wall sits
/// `standoff` short of the nearest on-path hit. No hits leaves the constraint
/// unbounded.
pub fn obstacle_planner(
    curve: &HermiteCurve,
    path: &SampledPath,
    obstacles: &[ObstaclePoint],
    width: f64,
    margin: f64,
    standoff: f64,
    a_dec: f64,
) -> VelocityConstraint {
    debug_assert!(a_dec > 0.0);
    let hits = check_collision(curve, obstacles, width, margin);
    let s_hit = hits
        .iter()
        .map(|h| path.station_at_t(h.t))
        .fold(f64::INFINITY, f64::min);
    if !s_hit.is_finite() {
        return VelocityConstraint::unbounded(&path.stations);
    }
    let v_max = path
        .stations
        .iter()
        .map(|s| (2.0 * a_dec * (s_hit - standoff - s).max(0.0)).sqrt())
        .collect();
    VelocityConstraint {
        stations: path.stations.clone(),
        v_max,
    }
}

/// Curvature constraint: cap speed so the yaw rate implied by the discrete
/// heading change between successive samples stays below `omega_max`.
pub fn curve_planner(path: &SampledPath, omega_max: f64, v_cruise: f64) -> VelocityConstraint {
    debug_assert!(omega_max > 0.0);
    let n = path.stations.len();
    let mut v_max = vec![v_cruise; n];
    for i in 1..n {
        let ds = path.stations[i] - path.stations[i - 1];
        if ds <= 0.0 {
            continue;
        }
        let kappa = wrap_angle(path.headings[i] - path.headings[i - 1]).abs() / ds;
        let cap = if kappa > 1e-9 {
            omega_max / kappa
        } else {
            f64::INFINITY
        };
        let cap = cap.min(v_cruise);
        v_max[i] = v_max[i].min(cap);
        // the heading change spans both stations
        v_max[i - 1] = v_max[i - 1].min(cap);
    }
    VelocityConstraint {
        stations: path.stations.clone(),
        v_max,
    }
}

fn edge_ok(va: f64, vb: f64, ds: f64, a_max: f64) -> bool {
    (vb * vb - va * va).abs() <= 2.0 * a_max * ds + EPS
}

/// Search the maximum-total-speed profile over discrete speed levels.
///
/// Station 0 is pinned to `v_start` (an error if the merged constraint
/// forbids it); later stations take any level below their cap reachable under
/// the acceleration bound. Ties prefer higher speed at earlier stations. An
/// empty DAG yields the flagged all-zero profile.
pub fn velocity_graph_search(
    constraints: &[VelocityConstraint],
    a_max: f64,
    v_levels: &[f64],
    v_start: f64,
) -> Result<VelocityProfile, PlannerError> {
    let merged = VelocityConstraint::merge_all(constraints)?;
    let stations = merged.stations.clone();
    let n = stations.len();
    if v_start > merged.v_max[0] + EPS {
        return Err(PlannerError::StartSpeedInfeasible {
            v_start,
            limit: merged.v_max[0],
        });
    }
    debug_assert!(v_levels.contains(&0.0), "level set must include 0");
    let mut levels = v_levels.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let infeasible = VelocityProfile {
        stations: stations.clone(),
        v: vec![0.0; n],
        feasible: false,
    };
    if n == 1 {
        return Ok(VelocityProfile {
            stations,
            v: vec![v_start],
            feasible: true,
        });
    }

    let m = levels.len();
    // dp[i][j]: best achievable sum of speeds over stations i..n with level j
    // at station i, NEG_INFINITY when unreachable-forward
    let mut dp = vec![vec![f64::NEG_INFINITY; m]; n];
    for j in 0..m {
        if levels[j] <= merged.v_max[n - 1] + EPS {
            dp[n - 1][j] = levels[j];
        }
    }
    for i in (1..n - 1).rev() {
        let ds = stations[i + 1] - stations[i];
        for j in 0..m {
            if levels[j] > merged.v_max[i] + EPS {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for k in 0..m {
                if dp[i + 1][k] > f64::NEG_INFINITY && edge_ok(levels[j], levels[k], ds, a_max) {
                    best = best.max(dp[i + 1][k]);
                }
            }
            if best > f64::NEG_INFINITY {
                dp[i][j] = levels[j] + best;
            }
        }
    }

    // choose the first-station successor of the pinned v_start
    let ds0 = stations[1] - stations[0];
    let mut chosen: Option<(usize, f64)> = None;
    for j in 0..m {
        if dp[1][j] > f64::NEG_INFINITY && edge_ok(v_start, levels[j], ds0, a_max) {
            match chosen {
                None => chosen = Some((j, dp[1][j])),
                Some((cj, best)) => {
                    if dp[1][j] > best + EPS
                        || ((dp[1][j] - best).abs() <= EPS && levels[j] > levels[cj])
                    {
                        chosen = Some((j, dp[1][j]));
                    }
                }
            }
        }
    }
    let Some((mut cur, _)) = chosen else {
        return Ok(infeasible);
    };

    let mut v = Vec::with_capacity(n);
    v.push(v_start);
    v.push(levels[cur]);
    for i in 1..n - 1 {
        let ds = stations[i + 1] - stations[i];
        let mut next: Option<usize> = None;
        for k in 0..m {
            if dp[i + 1][k] > f64::NEG_INFINITY && edge_ok(levels[cur], levels[k], ds, a_max) {
                match next {
                    None => next = Some(k),
                    Some(nk) => {
                        if dp[i + 1][k] > dp[i + 1][nk] + EPS
                            || ((dp[i + 1][k] - dp[i + 1][nk]).abs() <= EPS
                                && levels[k] > levels[nk])
                        {
                            next = Some(k);
                        }
                    }
                }
            }
        }
        match next {
            Some(k) => {
                v.push(levels[k]);
                cur = k;
            }
            // dp guaranteed a successor; defensive bail-out
            None => return Ok(infeasible),
        }
    }
    Ok(VelocityProfile {
        stations,
        v,
        feasible: true,
    })
}

/// Uniformly spaced speed levels `[0, v_cruise]`, always including 0.
pub fn uniform_levels(v_cruise: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|i| v_cruise * i as f64 / (count - 1) as f64)
        .collect()
}
