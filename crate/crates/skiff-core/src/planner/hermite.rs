//! Cubic Hermite curves and their arc-length sampling.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::geometry::Pose2D;

/// Cubic Hermite segment: endpoints and endpoint tangent vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteCurve {
    pub p0: Vector2<f64>,
    pub p1: Vector2<f64>,
    pub m0: Vector2<f64>,
    pub m1: Vector2<f64>,
}

impl HermiteCurve {
    pub fn new(
        p0: Vector2<f64>,
        p1: Vector2<f64>,
        m0: Vector2<f64>,
        m1: Vector2<f64>,
    ) -> Result<Self, PlannerError> {
        if m0.norm() == 0.0 || m1.norm() == 0.0 {
            return Err(PlannerError::ZeroTangent);
        }
        Ok(Self { p0, p1, m0, m1 })
    }

    /// Curve point at `t in [0, 1]`.
    pub fn eval(&self, t: f64) -> Result<Vector2<f64>, PlannerError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(PlannerError::ParameterOutOfRange(t));
        }
        Ok(self.point_at(t))
    }

    /// Curve tangent at `t in [0, 1]`.
    pub fn tangent(&self, t: f64) -> Result<Vector2<f64>, PlannerError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(PlannerError::ParameterOutOfRange(t));
        }
        Ok(self.tangent_at(t))
    }

    pub(crate) fn point_at(&self, t: f64) -> Vector2<f64> {
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        self.p0 * h00 + self.m0 * h10 + self.p1 * h01 + self.m1 * h11
    }

    pub(crate) fn tangent_at(&self, t: f64) -> Vector2<f64> {
        let t2 = t * t;
        let h00 = 6.0 * t2 - 6.0 * t;
        let h10 = 3.0 * t2 - 4.0 * t + 1.0;
        let h01 = -6.0 * t2 + 6.0 * t;
        let h11 = 3.0 * t2 - 2.0 * t;
        self.p0 * h00 + self.m0 * h10 + self.p1 * h01 + self.m1 * h11
    }

    pub(crate) fn second_derivative_at(&self, t: f64) -> Vector2<f64> {
        let h00 = 12.0 * t - 6.0;
        let h10 = 6.0 * t - 4.0;
        let h01 = -12.0 * t + 6.0;
        let h11 = 6.0 * t - 2.0;
        self.p0 * h00 + self.m0 * h10 + self.p1 * h01 + self.m1 * h11
    }
}

/// Build the curve from the current pose to a goal pose. Tangents point along
/// the respective headings with magnitude equal to the chord length, which
/// keeps short-chord curves loop-free and chains Catmull-Rom-compatibly.
pub fn plan_path(start: &Pose2D, goal: &Pose2D) -> Result<HermiteCurve, PlannerError> {
    let p0 = start.position();
    let p1 = goal.position();
    let chord = (p1 - p0).norm();
    if chord < 1e-9 {
        return Err(PlannerError::DegenerateEndpoints);
    }
    HermiteCurve::new(p0, p1, start.heading_dir() * chord, goal.heading_dir() * chord)
}

/// Chain two segments through an interior waypoint, sharing the joint tangent
/// `(c - a) / 2` so the pair is C1-continuous at `b`.
pub fn chain_through(
    start: &Pose2D,
    mid: Vector2<f64>,
    goal: &Pose2D,
) -> Result<(HermiteCurve, HermiteCurve), PlannerError> {
    let a = start.position();
    let c = goal.position();
    if (mid - a).norm() < 1e-9 || (c - mid).norm() < 1e-9 {
        return Err(PlannerError::DegenerateEndpoints);
    }
    let joint = (c - a) * 0.5;
    let first = HermiteCurve::new(a, mid, start.heading_dir() * (mid - a).norm(), joint)?;
    let second = HermiteCurve::new(mid, c, joint, goal.heading_dir() * (c - mid).norm())?;
    Ok((first, second))
}

/// Polyline discretization of a path with cumulative arc-length stations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub points: Vec<Vector2<f64>>,
    /// Cumulative arc length at each point, starting at 0.
    pub stations: Vec<f64>,
    /// Travel heading at each point.
    pub headings: Vec<f64>,
    /// Curve parameter at each point, when sampled from a curve.
    pub ts: Vec<f64>,
}

impl SampledPath {
    /// Sample a curve at (approximately) uniform arc-length spacing `ds`.
    pub fn from_curve(curve: &HermiteCurve, ds: f64) -> Self {
        assert!(ds > 0.0);
        // dense parameter table for the t -> s map
        const DENSE: usize = 2048;
        let mut cum = Vec::with_capacity(DENSE + 1);
        let mut prev = curve.point_at(0.0);
        let mut total = 0.0;
        cum.push(0.0);
        for i in 1..=DENSE {
            let t = i as f64 / DENSE as f64;
            let p = curve.point_at(t);
            total += (p - prev).norm();
            cum.push(total);
            prev = p;
        }
        let n_st = (total / ds).ceil().max(1.0) as usize;
        let mut points = Vec::with_capacity(n_st + 1);
        let mut stations = Vec::with_capacity(n_st + 1);
        let mut headings = Vec::with_capacity(n_st + 1);
        let mut ts = Vec::with_capacity(n_st + 1);
        let mut cursor = 0usize;
        for k in 0..=n_st {
            let s = (total * k as f64 / n_st as f64).min(total);
            while cursor + 1 < cum.len() && cum[cursor + 1] < s {
                cursor += 1;
            }
            let t = if cursor + 1 >= cum.len() {
                1.0
            } else {
                let seg = cum[cursor + 1] - cum[cursor];
                let frac = if seg > 0.0 { (s - cum[cursor]) / seg } else { 0.0 };
                ((cursor as f64 + frac) / DENSE as f64).min(1.0)
            };
            let tangent = curve.tangent_at(t);
            points.push(curve.point_at(t));
            stations.push(s);
            headings.push(tangent.y.atan2(tangent.x));
            ts.push(t);
        }
        Self {
            points,
            stations,
            headings,
            ts,
        }
    }

    /// Wrap an existing polyline; headings come from segment directions.
    pub fn from_points(points: Vec<Vector2<f64>>) -> Self {
        assert!(points.len() >= 2);
        let mut stations = Vec::with_capacity(points.len());
        let mut headings = Vec::with_capacity(points.len());
        let mut s = 0.0;
        stations.push(0.0);
        for i in 1..points.len() {
            s += (points[i] - points[i - 1]).norm();
            stations.push(s);
        }
        for i in 0..points.len() {
            let d = if i + 1 < points.len() {
                points[i + 1] - points[i]
            } else {
                points[i] - points[i - 1]
            };
            headings.push(d.y.atan2(d.x));
        }
        let ts = vec![0.0; points.len()];
        Self {
            points,
            stations,
            headings,
            ts,
        }
    }

    pub fn total_length(&self) -> f64 {
        *self.stations.last().unwrap()
    }

    /// Arc length for a curve parameter, by interpolation of the sample table.
    pub fn station_at_t(&self, t: f64) -> f64 {
        if self.ts.len() < 2 || t <= self.ts[0] {
            return self.stations[0];
        }
        for i in 1..self.ts.len() {
            if t <= self.ts[i] {
                let span = self.ts[i] - self.ts[i - 1];
                let frac = if span > 0.0 { (t - self.ts[i - 1]) / span } else { 0.0 };
                return self.stations[i - 1] + frac * (self.stations[i] - self.stations[i - 1]);
            }
        }
        self.total_length()
    }

    /// Closest point of the polyline to `q`: (arc length, distance).
    pub fn project(&self, q: Vector2<f64>) -> (f64, f64) {
        let mut best_s = 0.0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let b = self.points[i + 1];
            let ab = b - a;
            let len2 = ab.norm_squared();
            let t = if len2 > 0.0 {
                ((q - a).dot(&ab) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let p = a + ab * t;
            let d = (q - p).norm();
            if d < best_d {
                best_d = d;
                best_s = self.stations[i] + ab.norm() * t;
            }
        }
        (best_s, best_d)
    }
}
