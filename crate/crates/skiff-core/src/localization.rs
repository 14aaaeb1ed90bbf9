//! Planar extended Kalman filter over `[x, y, psi, u, v, omega]`.
//!
//! Prediction uses a constant-body-velocity kinematic model (velocity random
//! walk), deliberately independent of the hull parameters. Position fixes and
//! heading/yaw-rate measurements enter through standard EKF updates in Joseph
//! form, with the heading innovation wrapped. The covariance is re-symmetrized
//! after every operation.

use nalgebra::{Matrix2, Matrix6, SMatrix, Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::BodyVelocity;
use crate::geometry::{wrap_angle, Pose2D};

/// Gaussian belief over the planar state.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    /// Mean `[x, y, psi, u, v, omega]`.
    pub mean: Vector6<f64>,
    pub cov: Matrix6<f64>,
}

impl EkfState {
    pub fn new(pose: Pose2D, vel: BodyVelocity, cov: Matrix6<f64>) -> Self {
        Self {
            mean: Vector6::new(pose.x, pose.y, pose.psi, vel.u, vel.v, vel.omega),
            cov,
        }
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.mean[0], self.mean[1], self.mean[2])
    }

    pub fn velocity(&self) -> BodyVelocity {
        BodyVelocity::new(self.mean[3], self.mean[4], self.mean[5])
    }
}

/// Position fix in world coordinates with isotropic standard deviation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GnssMeasurement {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

/// Heading plus yaw-rate measurement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImuMeasurement {
    pub psi: f64,
    pub omega: f64,
    pub sigma_psi: f64,
    pub sigma_omega: f64,
}

/// Process-noise spectral densities per state component; `Q = diag(q) * dt`.
pub type ProcessNoise = [f64; 6];

/// Outcome diagnostics for a measurement update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDiag {
    pub accepted: bool,
    /// Normalized innovation squared, when the update was applied.
    pub nis: f64,
}

fn symmetrize(p: &mut Matrix6<f64>) {
    *p = (*p + p.transpose()) * 0.5;
}

/// Kinematic motion map: pose advances along the body velocity, velocities
/// persist.
pub fn motion_map(mean: &Vector6<f64>, dt: f64) -> Vector6<f64> {
    let (x, y, psi, u, v, omega) = (mean[0], mean[1], mean[2], mean[3], mean[4], mean[5]);
    let (s, c) = psi.sin_cos();
    Vector6::new(
        x + dt * (u * c - v * s),
        y + dt * (u * s + v * c),
        wrap_angle(psi + dt * omega),
        u,
        v,
        omega,
    )
}

/// Analytic Jacobian of [`motion_map`] with respect to the state.
pub fn motion_jacobian(mean: &Vector6<f64>, dt: f64) -> Matrix6<f64> {
    let (psi, u, v) = (mean[2], mean[3], mean[4]);
    let (s, c) = psi.sin_cos();
    let mut f = Matrix6::identity();
    f[(0, 2)] = dt * (-u * s - v * c);
    f[(0, 3)] = dt * c;
    f[(0, 4)] = -dt * s;
    f[(1, 2)] = dt * (u * c - v * s);
    f[(1, 3)] = dt * s;
    f[(1, 4)] = dt * c;
    f[(2, 5)] = dt;
    f
}

/// EKF time update.
pub fn predict(state: &EkfState, dt: f64, q: &ProcessNoise) -> EkfState {
    debug_assert!(dt > 0.0);
    let f = motion_jacobian(&state.mean, dt);
    let mut cov = f * state.cov * f.transpose();
    for i in 0..6 {
        cov[(i, i)] += q[i] * dt;
    }
    symmetrize(&mut cov);
    EkfState {
        mean: motion_map(&state.mean, dt),
        cov,
    }
}

/// Generic 2-row Joseph-form update. `rows` selects the measured components,
/// `innovation` is already wrapped where needed.
fn update2(
    state: &EkfState,
    rows: [usize; 2],
    innovation: Vector2<f64>,
    r: Matrix2<f64>,
) -> (EkfState, UpdateDiag) {
    let mut h = SMatrix::<f64, 2, 6>::zeros();
    h[(0, rows[0])] = 1.0;
    h[(1, rows[1])] = 1.0;
    let s = h * state.cov * h.transpose() + r;
    let s_inv = match s.cholesky() {
        Some(ch) => ch.inverse(),
        // innovation covariance not PD: reject, keep the prior
        None => {
            return (
                state.clone(),
                UpdateDiag {
                    accepted: false,
                    nis: f64::NAN,
                },
            )
        }
    };
    let k = state.cov * h.transpose() * s_inv;
    let nis = (innovation.transpose() * s_inv * innovation)[(0, 0)];
    let mut mean = state.mean + k * innovation;
    mean[2] = wrap_angle(mean[2]);
    let i_kh = Matrix6::identity() - k * h;
    let mut cov = i_kh * state.cov * i_kh.transpose() + k * r * k.transpose();
    symmetrize(&mut cov);
    (EkfState { mean, cov }, UpdateDiag { accepted: true, nis })
}

/// Position update from a GNSS fix.
pub fn update_gnss(state: &EkfState, meas: &GnssMeasurement) -> (EkfState, UpdateDiag) {
    let innovation = Vector2::new(meas.x - state.mean[0], meas.y - state.mean[1]);
    let r = Matrix2::from_diagonal(&Vector2::new(meas.sigma * meas.sigma, meas.sigma * meas.sigma));
    update2(state, [0, 1], innovation, r)
}

/// Heading/yaw-rate update; the heading innovation is wrapped to (-pi, pi].
pub fn update_imu(state: &EkfState, meas: &ImuMeasurement) -> (EkfState, UpdateDiag) {
    let innovation = Vector2::new(
        wrap_angle(meas.psi - state.mean[2]),
        meas.omega - state.mean[5],
    );
    let r = Matrix2::from_diagonal(&Vector2::new(
        meas.sigma_psi * meas.sigma_psi,
        meas.sigma_omega * meas.sigma_omega,
    ));
    update2(state, [2, 5], innovation, r)
}

/// Stateful filter wrapper used by the simulation loop: owns the belief,
/// advances it with `predict`, and drops measurements whose timestamps run
/// backwards.
#[derive(Debug, Clone)]
pub struct Ekf {
    pub state: EkfState,
    pub q: ProcessNoise,
    t: f64,
    last_meas_t: f64,
    pub dropped: u32,
    pub rejected: u32,
}

impl Ekf {
    pub fn new(initial: EkfState, q: ProcessNoise, t0: f64) -> Self {
        Self {
            state: initial,
            q,
            t: t0,
            last_meas_t: t0,
            dropped: 0,
            rejected: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Advance the belief to time `t` (no-op when `t` is not ahead).
    pub fn predict_to(&mut self, t: f64) {
        let dt = t - self.t;
        if dt > 0.0 {
            self.state = predict(&self.state, dt, &self.q);
            self.t = t;
        }
    }

    pub fn ingest_gnss(&mut self, meas: &GnssMeasurement, t: f64) -> bool {
        if t < self.last_meas_t {
            self.dropped += 1;
            return false;
        }
        self.predict_to(t);
        self.last_meas_t = t;
        let (state, diag) = update_gnss(&self.state, meas);
        self.state = state;
        if !diag.accepted {
            self.rejected += 1;
        }
        diag.accepted
    }

    pub fn ingest_imu(&mut self, meas: &ImuMeasurement, t: f64) -> bool {
        if t < self.last_meas_t {
            self.dropped += 1;
            return false;
        }
        self.predict_to(t);
        self.last_meas_t = t;
        let (state, diag) = update_imu(&self.state, meas);
        self.state = state;
        if !diag.accepted {
            self.rejected += 1;
        }
        diag.accepted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_state() -> EkfState {
        EkfState {
            mean: Vector6::zeros(),
            cov: Matrix6::zeros(),
        }
    }

    #[test]
    fn stationary_propagation_is_identity() {
        let s = zero_state();
        let out = predict(&s, 0.5, &[0.0; 6]);
        assert_eq!(out.mean, s.mean);
        assert_eq!(out.cov, s.cov);
    }

    #[test]
    fn kinematic_advance() {
        let mut s = zero_state();
        s.mean[3] = 1.0; // u
        let out = predict(&s, 1.0, &[0.0; 6]);
        assert_relative_eq!(out.mean[0], 1.0);
        assert_relative_eq!(out.mean[1], 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dt = 0.07;
        let h = 1e-6;
        for _ in 0..100 {
            let mean = Vector6::from_fn(|i, _| match i {
                2 => rng.gen_range(-2.5..2.5),
                _ => rng.gen_range(-3.0..3.0),
            });
            let f = motion_jacobian(&mean, dt);
            for j in 0..6 {
                let mut plus = mean;
                let mut minus = mean;
                plus[j] += h;
                minus[j] -= h;
                let fp = motion_map(&plus, dt);
                let fm = motion_map(&minus, dt);
                for i in 0..6 {
                    let mut diff = fp[i] - fm[i];
                    if i == 2 {
                        diff = wrap_angle(diff);
                    }
                    let fd = diff / (2.0 * h);
                    assert!(
                        (fd - f[(i, j)]).abs() < 1e-6,
                        "entry ({i},{j}): fd {fd} analytic {}",
                        f[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let mut s = zero_state();
        s.mean = Vector6::new(2.0, -1.0, 0.4, 0.5, 0.0, 0.1);
        s.cov = Matrix6::identity();
        let (out, diag) = update_gnss(
            &s,
            &GnssMeasurement {
                x: 2.0,
                y: -1.0,
                sigma: 0.5,
            },
        );
        assert!(diag.accepted);
        assert_relative_eq!(out.mean, s.mean, epsilon = 1e-12);
        let (out, _) = update_imu(
            &s,
            &ImuMeasurement {
                psi: 0.4,
                omega: 0.1,
                sigma_psi: 0.02,
                sigma_omega: 0.01,
            },
        );
        assert_relative_eq!(out.mean, s.mean, epsilon = 1e-12);
    }

    #[test]
    fn uninformative_measurement_is_a_noop() {
        let mut s = zero_state();
        s.mean = Vector6::new(1.0, 2.0, 0.3, 0.1, 0.0, 0.0);
        s.cov = Matrix6::identity() * 0.2;
        let (out, _) = update_gnss(
            &s,
            &GnssMeasurement {
                x: 50.0,
                y: -30.0,
                sigma: 1e9,
            },
        );
        assert!((out.mean - s.mean).amax() < 1e-9);
        assert!((out.cov - s.cov).amax() < 1e-9);
    }

    #[test]
    fn scalar_posterior_variance_matches_bayes() {
        let mut s = zero_state();
        let p0 = 0.8;
        s.cov = Matrix6::from_diagonal(&Vector6::new(p0, p0, 0.0, 0.0, 0.0, 0.0));
        let sigma = 0.5;
        let (out, _) = update_gnss(&s, &GnssMeasurement { x: 0.3, y: 0.0, sigma });
        let expected = 1.0 / (1.0 / p0 + 1.0 / (sigma * sigma));
        assert_relative_eq!(out.cov[(0, 0)], expected, epsilon = 1e-12);
    }

    #[test]
    fn heading_innovation_wraps() {
        let mut s = zero_state();
        s.mean[2] = 3.1;
        s.cov = Matrix6::identity() * 0.1;
        let innov = wrap_angle(-3.1 - 3.1);
        assert!(innov.abs() < 0.1, "wrapped innovation should be small, got {innov}");
        assert_relative_eq!(innov.abs(), 2.0 * std::f64::consts::PI - 6.2, epsilon = 1e-12);
        let (out, diag) = update_imu(
            &s,
            &ImuMeasurement {
                psi: -3.1,
                omega: 0.0,
                sigma_psi: 0.02,
                sigma_omega: 0.01,
            },
        );
        assert!(diag.accepted);
        // posterior heading moved across the branch cut, not back through zero
        assert!(out.mean[2].abs() > 3.1 || out.mean[2] > 3.1);
    }

    #[test]
    fn repeated_imu_updates_contract_heading_error() {
        let mut s = zero_state();
        s.mean[2] = 1.0;
        s.cov = Matrix6::identity() * 0.5;
        let meas = ImuMeasurement {
            psi: 2.0,
            omega: 0.0,
            sigma_psi: 0.1,
            sigma_omega: 0.1,
        };
        let mut err = (s.mean[2] - meas.psi).abs();
        for _ in 0..20 {
            // keep some heading variance so the gain never collapses entirely
            s.cov[(2, 2)] += 0.01;
            let (next, _) = update_imu(&s, &meas);
            s = next;
            let e = wrap_angle(s.mean[2] - meas.psi).abs();
            assert!(e <= err + 1e-12);
            err = e;
        }
        assert!(err < 0.05);
    }

    #[test]
    fn measured_variance_never_grows_on_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut diag = Vector6::zeros();
            for i in 0..6 {
                diag[i] = rng.gen_range(0.01..2.0);
            }
            let s = EkfState {
                mean: Vector6::from_fn(|_, _| rng.gen_range(-3.0..3.0)),
                cov: Matrix6::from_diagonal(&diag),
            };
            let (out, _) = update_gnss(
                &s,
                &GnssMeasurement {
                    x: rng.gen_range(-5.0..5.0),
                    y: rng.gen_range(-5.0..5.0),
                    sigma: rng.gen_range(0.05..2.0),
                },
            );
            assert!(out.cov[(0, 0)] <= s.cov[(0, 0)] + 1e-12);
            assert!(out.cov[(1, 1)] <= s.cov[(1, 1)] + 1e-12);
        }
    }

    #[test]
    fn covariance_stays_symmetric_psd_over_long_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut s = EkfState {
            mean: Vector6::zeros(),
            cov: Matrix6::identity(),
        };
        let q = [0.01, 0.01, 0.001, 0.1, 0.1, 0.05];
        for step in 0..10_000 {
            s = predict(&s, 0.02, &q);
            if step % 7 == 0 {
                let (next, _) = update_gnss(
                    &s,
                    &GnssMeasurement {
                        x: s.mean[0] + rng.gen_range(-1.0..1.0),
                        y: s.mean[1] + rng.gen_range(-1.0..1.0),
                        sigma: 0.3,
                    },
                );
                s = next;
            }
            if step % 3 == 0 {
                let (next, _) = update_imu(
                    &s,
                    &ImuMeasurement {
                        psi: wrap_angle(s.mean[2] + rng.gen_range(-0.1..0.1)),
                        omega: s.mean[5] + rng.gen_range(-0.1..0.1),
                        sigma_psi: 0.02,
                        sigma_omega: 0.01,
                    },
                );
                s = next;
            }
            if step % 500 == 0 {
                let asym = (s.cov - s.cov.transpose()).amax();
                assert!(asym < 1e-9, "asymmetry {asym}");
                let min_eig = s
                    .cov
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                assert!(min_eig >= -1e-9, "min eigenvalue {min_eig}");
            }
        }
    }

    #[test]
    fn out_of_order_measurements_are_dropped() {
        let mut ekf = Ekf::new(
            EkfState {
                mean: Vector6::zeros(),
                cov: Matrix6::identity(),
            },
            [0.01; 6],
            0.0,
        );
        assert!(ekf.ingest_gnss(&GnssMeasurement { x: 0.0, y: 0.0, sigma: 0.3 }, 1.0));
        let before = ekf.state.clone();
        assert!(!ekf.ingest_gnss(&GnssMeasurement { x: 9.0, y: 9.0, sigma: 0.3 }, 0.5));
        assert_eq!(ekf.state, before);
        assert_eq!(ekf.dropped, 1);
    }
}
