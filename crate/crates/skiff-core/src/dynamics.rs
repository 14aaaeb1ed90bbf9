//! Rigid-body surface-vessel model for a differential-thrust catamaran.
//!
//! The model is the 3-DOF body-frame equation of motion
//!
//! ```text
//! M nu_dot = -C(nu) nu - diag(d) nu + tau
//! ```
//!
//! with `nu = [u, v, omega]` (surge, sway, yaw rate) and `tau` the body
//! wrench. `M` is diagonal (rigid mass plus added mass), `C` the
//! velocity-dependent resistance matrix and `diag(d)` an optional linear
//! damping term that keeps open-loop trajectories bounded. The same module
//! provides the thrust allocation of the two fixed stern thrusters and the
//! quadratic propeller thrust curve, both used forward by the simulator and
//! inverse by the controller.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Pose2D};

#[derive(Debug, Error)]
#[error("invalid parameter `{field}`: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: String,
}

fn require(ok: bool, field: &'static str, reason: &str) -> Result<(), ParamError> {
    if ok {
        Ok(())
    } else {
        Err(ParamError {
            field,
            reason: reason.to_string(),
        })
    }
}

/// Body-frame velocity: surge, sway, yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub u: f64,
    pub v: f64,
    pub omega: f64,
}

impl BodyVelocity {
    pub fn new(u: f64, v: f64, omega: f64) -> Self {
        Self { u, v, omega }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.omega)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Magnitude used for "vessel at rest" checks: max of linear speed and yaw rate.
    pub fn speed(&self) -> f64 {
        (self.u * self.u + self.v * self.v).sqrt().max(self.omega.abs())
    }
}

/// Body-frame generalized force: surge force, sway force, yaw moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fy: f64,
    pub fyaw: f64,
}

impl Wrench {
    pub fn new(fx: f64, fy: f64, fyaw: f64) -> Self {
        Self { fx, fy, fyaw }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.fyaw)
    }
}

/// Hull mass/inertia and damping parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VesselParams {
    /// Vessel mass (kg).
    pub m: f64,
    /// Added mass in surge (kg).
    pub mx: f64,
    /// Added mass in sway (kg).
    pub my: f64,
    /// Yaw moment of inertia (kg m^2).
    pub iz: f64,
    /// Added yaw inertia (kg m^2).
    pub jz: f64,
    /// Lateral separation of the two thrusters (m).
    pub w: f64,
    /// Hull half-extent used as the collision width basis (m).
    pub hull_width: f64,
    /// Diagonal linear damping [surge, sway, yaw].
    pub lin_drag: [f64; 3],
}

impl VesselParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        require(self.m > 0.0 && self.m.is_finite(), "m", "must be > 0")?;
        require(self.iz > 0.0 && self.iz.is_finite(), "iz", "must be > 0")?;
        require(self.mx >= 0.0 && self.mx.is_finite(), "mx", "must be >= 0")?;
        require(self.my >= 0.0 && self.my.is_finite(), "my", "must be >= 0")?;
        require(self.jz >= 0.0 && self.jz.is_finite(), "jz", "must be >= 0")?;
        require(self.w > 0.0 && self.w.is_finite(), "w", "must be > 0")?;
        require(
            self.hull_width >= 0.0 && self.hull_width.is_finite(),
            "hull_width",
            "must be >= 0",
        )?;
        for (i, d) in self.lin_drag.iter().enumerate() {
            require(
                *d >= 0.0 && d.is_finite(),
                match i {
                    0 => "lin_drag[0]",
                    1 => "lin_drag[1]",
                    _ => "lin_drag[2]",
                },
                "must be >= 0",
            )?;
        }
        Ok(())
    }
}

/// Propeller thrust-curve parameters: `T = rho n^2 D^4 (k2 Js^2 + k1 Js + k0)`
/// with advance ratio `Js = up / (n D)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PropellerParams {
    /// Fluid density (kg/m^3).
    pub rho: f64,
    /// Propeller diameter (m).
    pub dp: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    /// Maximum commanded rotation speed (rev/s).
    pub max_rev: f64,
}

impl PropellerParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        require(self.rho > 0.0 && self.rho.is_finite(), "rho", "must be > 0")?;
        require(self.dp > 0.0 && self.dp.is_finite(), "dp", "must be > 0")?;
        require(self.max_rev > 0.0 && self.max_rev.is_finite(), "max_rev", "must be > 0")?;
        require(self.k0.is_finite(), "k0", "must be finite")?;
        require(self.k1.is_finite(), "k1", "must be finite")?;
        require(self.k2.is_finite(), "k2", "must be finite")?;
        Ok(())
    }
}

/// Ground-truth vessel state: world pose plus body velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselState {
    pub pose: Pose2D,
    pub vel: BodyVelocity,
}

impl VesselState {
    pub fn at_rest(pose: Pose2D) -> Self {
        Self {
            pose,
            vel: BodyVelocity::zero(),
        }
    }
}

/// Which velocity-dependent resistance matrix to use.
///
/// `Raw` is the model verbatim; its matrix is not skew-symmetric and feeds a
/// spurious yaw moment `m u^2` during straight motion. `SkewSymmetric`
/// (default) swaps the velocity-proportional entries so that
/// `nu' C(nu) nu = 0` holds, which keeps the unforced model passive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoriolisMode {
    Raw,
    #[default]
    SkewSymmetric,
}

/// Diagonal mass matrix `diag(m + mx, m + my, iz + jz)`.
pub fn mass_matrix(params: &VesselParams) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(
        params.m + params.mx,
        params.m + params.my,
        params.iz + params.jz,
    ))
}

/// Velocity-dependent resistance matrix `C(nu)` in the requested mode.
pub fn coriolis_matrix(params: &VesselParams, nu: &BodyVelocity, mode: CoriolisMode) -> Matrix3<f64> {
    let m = params.m;
    match mode {
        CoriolisMode::Raw => Matrix3::new(
            0.0,
            0.0,
            -m * nu.u,
            0.0,
            0.0,
            m * nu.v,
            m * nu.u,
            -m * nu.u,
            0.0,
        ),
        CoriolisMode::SkewSymmetric => Matrix3::new(
            0.0,
            0.0,
            -m * nu.v,
            0.0,
            0.0,
            m * nu.u,
            m * nu.v,
            -m * nu.u,
            0.0,
        ),
    }
}

/// Body acceleration `nu_dot = M^-1 (-C(nu) nu - diag(d) nu + tau)`.
pub fn dynamics_derivative(
    params: &VesselParams,
    nu: &BodyVelocity,
    tau: &Wrench,
    mode: CoriolisMode,
) -> BodyVelocity {
    let nu_v = nu.as_vector();
    let c = coriolis_matrix(params, nu, mode);
    let drag = Vector3::new(
        params.lin_drag[0] * nu.u,
        params.lin_drag[1] * nu.v,
        params.lin_drag[2] * nu.omega,
    );
    let rhs = -c * nu_v - drag + tau.as_vector();
    let m = mass_matrix(params);
    // M is diagonal positive definite by invariant
    BodyVelocity::new(rhs[0] / m[(0, 0)], rhs[1] / m[(1, 1)], rhs[2] / m[(2, 2)])
}

fn state_derivative(
    params: &VesselParams,
    s: &Vector6<f64>,
    tau: &Wrench,
    mode: CoriolisMode,
) -> Vector6<f64> {
    let psi = s[2];
    let nu = BodyVelocity::new(s[3], s[4], s[5]);
    let (sp, cp) = psi.sin_cos();
    let nu_dot = dynamics_derivative(params, &nu, tau, mode);
    Vector6::new(
        nu.u * cp - nu.v * sp,
        nu.u * sp + nu.v * cp,
        nu.omega,
        nu_dot.u,
        nu_dot.v,
        nu_dot.omega,
    )
}

/// One RK4 step of the coupled pose/velocity ODE. Heading is re-wrapped once
/// at the end so intermediate stages stay continuous.
pub fn step(
    state: &VesselState,
    tau: &Wrench,
    dt: f64,
    params: &VesselParams,
    mode: CoriolisMode,
) -> VesselState {
    debug_assert!(dt > 0.0);
    let s0 = Vector6::new(
        state.pose.x,
        state.pose.y,
        state.pose.psi,
        state.vel.u,
        state.vel.v,
        state.vel.omega,
    );
    let k1 = state_derivative(params, &s0, tau, mode);
    let k2 = state_derivative(params, &(s0 + k1 * (dt / 2.0)), tau, mode);
    let k3 = state_derivative(params, &(s0 + k2 * (dt / 2.0)), tau, mode);
    let k4 = state_derivative(params, &(s0 + k3 * dt), tau, mode);
    let s1 = s0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    VesselState {
        pose: Pose2D::new(s1[0], s1[1], wrap_angle(s1[2])),
        vel: BodyVelocity::new(s1[3], s1[4], s1[5]),
    }
}

/// Body wrench produced by right/left thruster forces separated by `w`:
/// `fx = (Fr + Fl)/2`, `fy = 0`, `fyaw = w (Fr - Fl)/2`.
pub fn allocate_thrust(f_right: f64, f_left: f64, w: f64) -> Wrench {
    debug_assert!(w > 0.0);
    Wrench::new(
        0.5 * (f_right + f_left),
        0.0,
        0.5 * w * (f_right - f_left),
    )
}

/// Per-thruster force command from an inverse allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustPair {
    pub right: f64,
    pub left: f64,
    /// True when either force hit the `f_max` limit.
    pub clamped: bool,
}

/// Invert the allocation on the actuated components (fx, fyaw); the sway
/// request is unactuated and ignored. Forces are clamped to [-f_max, f_max].
pub fn inverse_allocation(tau_des: &Wrench, w: f64, f_max: f64) -> ThrustPair {
    debug_assert!(w > 0.0);
    let right = tau_des.fx + tau_des.fyaw / w;
    let left = tau_des.fx - tau_des.fyaw / w;
    let rc = right.clamp(-f_max, f_max);
    let lc = left.clamp(-f_max, f_max);
    ThrustPair {
        right: rc,
        left: lc,
        clamped: rc != right || lc != left,
    }
}

/// Propeller thrust `T = rho n^2 D^4 Kt(Js)` with `Js = up/(n D)` and
/// `Kt(Js) = k2 Js^2 + k1 Js + k0`. Defined as 0 at `n = 0`.
pub fn propeller_thrust(n: f64, up: f64, prop: &PropellerParams) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let js = up / (n * prop.dp);
    let kt = prop.k2 * js * js + prop.k1 * js + prop.k0;
    prop.rho * n * n * prop.dp.powi(4) * kt
}

/// Rotation-speed command from the thrust inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevCommand {
    pub n: f64,
    /// True when the requested thrust was outside the achievable range.
    pub clamped: bool,
}

/// Numeric inverse of [`propeller_thrust`] over `n in [0, max_rev]`.
///
/// The thrust curve expands to `T(n) = rho D^4 (k0 n^2 + (k1 up / D) n + k2 up^2 / D^2)`,
/// a parabola in `n`; bisection runs on its rising branch (right of the
/// vertex) so the bracket is monotone. Out-of-range requests saturate and are
/// flagged instead of failing.
pub fn thrust_to_rev(t_des: f64, up: f64, prop: &PropellerParams) -> RevCommand {
    let tol = 1e-6 * t_des.abs().max(1.0);
    // Rising-branch start: vertex of the parabola, clamped into [0, max_rev].
    let n_lo = if prop.k0 > 0.0 {
        (-prop.k1 * up / (2.0 * prop.k0 * prop.dp)).clamp(0.0, prop.max_rev)
    } else {
        0.0
    };
    let t_lo = propeller_thrust(n_lo, up, prop);
    let t_hi = propeller_thrust(prop.max_rev, up, prop);
    if t_des <= t_lo {
        return RevCommand {
            n: n_lo,
            clamped: (t_lo - t_des).abs() > tol,
        };
    }
    if t_des >= t_hi {
        return RevCommand {
            n: prop.max_rev,
            clamped: (t_hi - t_des).abs() > tol,
        };
    }
    let mut lo = n_lo;
    let mut hi = prop.max_rev;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let t = propeller_thrust(mid, up, prop);
        if (t - t_des).abs() < tol {
            return RevCommand {
                n: mid,
                clamped: false,
            };
        }
        if t < t_des {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    RevCommand {
        n: 0.5 * (lo + hi),
        clamped: false,
    }
}

/// Thrust command resolved through the propeller model: the rev the inverse
/// selects for `|f|`, signed by the requested direction, and the force that
/// rev actually produces. Keeps the applied force consistent with what the
/// actuator can deliver.
pub fn resolve_thruster(f_des: f64, up: f64, prop: &PropellerParams) -> (f64, f64) {
    let rev = thrust_to_rev(f_des.abs(), up.max(0.0), prop);
    let applied = propeller_thrust(rev.n, up.max(0.0), prop);
    (f_des.signum() * rev.n, f_des.signum() * applied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> VesselParams {
        VesselParams {
            m: 100.0,
            mx: 20.0,
            my: 30.0,
            iz: 50.0,
            jz: 10.0,
            w: 2.0,
            hull_width: 1.2,
            lin_drag: [0.0, 0.0, 0.0],
        }
    }

    fn random_params(rng: &mut ChaCha8Rng) -> VesselParams {
        VesselParams {
            m: rng.gen_range(10.0..500.0),
            mx: rng.gen_range(0.0..100.0),
            my: rng.gen_range(0.0..100.0),
            iz: rng.gen_range(5.0..300.0),
            jz: rng.gen_range(0.0..50.0),
            w: rng.gen_range(0.5..4.0),
            hull_width: 1.0,
            lin_drag: [
                rng.gen_range(0.0..100.0),
                rng.gen_range(0.0..100.0),
                rng.gen_range(0.0..100.0),
            ],
        }
    }

    #[test]
    fn mass_matrix_diagonal() {
        let m = mass_matrix(&params());
        assert_eq!(m, Matrix3::from_diagonal(&Vector3::new(120.0, 130.0, 60.0)));
        assert_eq!(m.transpose(), m);
    }

    #[test]
    fn mass_matrix_without_added_mass() {
        let mut p = params();
        p.mx = 0.0;
        p.my = 0.0;
        p.jz = 0.0;
        let m = mass_matrix(&p);
        assert_eq!(m, Matrix3::from_diagonal(&Vector3::new(100.0, 100.0, 50.0)));
    }

    #[test]
    fn coriolis_zero_velocity() {
        let nu = BodyVelocity::zero();
        assert_eq!(coriolis_matrix(&params(), &nu, CoriolisMode::Raw), Matrix3::zeros());
        assert_eq!(
            coriolis_matrix(&params(), &nu, CoriolisMode::SkewSymmetric),
            Matrix3::zeros()
        );
    }

    #[test]
    fn coriolis_raw_third_row() {
        let mut p = params();
        p.m = 1.0;
        let c = coriolis_matrix(&p, &BodyVelocity::new(2.0, 3.0, 0.0), CoriolisMode::Raw);
        assert_eq!(c[(2, 0)], 2.0);
        assert_eq!(c[(2, 1)], -2.0);
        assert_eq!(c[(2, 2)], 0.0);
    }

    #[test]
    fn coriolis_skew_mode_absorbs_no_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = params();
        for _ in 0..1000 {
            let nu = BodyVelocity::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-2.0..2.0),
            );
            let c = coriolis_matrix(&p, &nu, CoriolisMode::SkewSymmetric);
            let v = nu.as_vector();
            assert!((v.dot(&(c * v))).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_equilibrium_at_rest() {
        let d = dynamics_derivative(
            &params(),
            &BodyVelocity::zero(),
            &Wrench::zero(),
            CoriolisMode::SkewSymmetric,
        );
        assert_eq!(d, BodyVelocity::zero());
    }

    #[test]
    fn derivative_decoupled_surge() {
        let d = dynamics_derivative(
            &params(),
            &BodyVelocity::zero(),
            &Wrench::new(60.0, 0.0, 0.0),
            CoriolisMode::SkewSymmetric,
        );
        assert_relative_eq!(d.u, 60.0 / 120.0);
        assert_eq!(d.v, 0.0);
        assert_eq!(d.omega, 0.0);
    }

    #[test]
    fn derivative_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let p = random_params(&mut rng);
            let nu = BodyVelocity::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-2.0..2.0),
            );
            let tau = Wrench::new(
                rng.gen_range(-500.0..500.0),
                rng.gen_range(-500.0..500.0),
                rng.gen_range(-500.0..500.0),
            );
            for mode in [CoriolisMode::Raw, CoriolisMode::SkewSymmetric] {
                let acc = dynamics_derivative(&p, &nu, &tau, mode);
                let drag = Vector3::new(
                    p.lin_drag[0] * nu.u,
                    p.lin_drag[1] * nu.v,
                    p.lin_drag[2] * nu.omega,
                );
                let residual = mass_matrix(&p) * acc.as_vector()
                    + coriolis_matrix(&p, &nu, mode) * nu.as_vector()
                    + drag
                    - tau.as_vector();
                assert!(residual.amax() < 1e-9, "residual {residual}");
            }
        }
    }

    #[test]
    fn step_rest_stays_at_rest() {
        let s0 = VesselState::at_rest(Pose2D::new(1.0, 2.0, 0.3));
        let s1 = step(&s0, &Wrench::zero(), 0.02, &params(), CoriolisMode::SkewSymmetric);
        assert_eq!(s0, s1);
    }

    #[test]
    fn step_straight_advance_under_balanced_drag() {
        let mut p = params();
        p.lin_drag = [50.0, 0.0, 0.0];
        let u0 = 1.5;
        let psi = 0.6;
        let s0 = VesselState {
            pose: Pose2D::new(0.0, 0.0, psi),
            vel: BodyVelocity::new(u0, 0.0, 0.0),
        };
        let tau = Wrench::new(50.0 * u0, 0.0, 0.0);
        let dt = 0.02;
        let s1 = step(&s0, &tau, dt, &p, CoriolisMode::SkewSymmetric);
        assert_relative_eq!(s1.pose.x, u0 * dt * psi.cos(), epsilon = 1e-12);
        assert_relative_eq!(s1.pose.y, u0 * dt * psi.sin(), epsilon = 1e-12);
        assert_relative_eq!(s1.vel.u, u0, epsilon = 1e-12);
        assert_eq!(s1.pose.psi, psi);
    }

    #[test]
    fn step_fourth_order_richardson() {
        let mut p = params();
        p.lin_drag = [40.0, 60.0, 20.0];
        let tau = Wrench::new(120.0, 30.0, 45.0);
        let s0 = VesselState {
            pose: Pose2D::new(0.0, 0.0, 0.4),
            vel: BodyVelocity::new(1.0, 0.3, 0.5),
        };
        let diff = |dt: f64| -> f64 {
            let full = step(&s0, &tau, dt, &p, CoriolisMode::SkewSymmetric);
            let half = step(&s0, &tau, dt / 2.0, &p, CoriolisMode::SkewSymmetric);
            let half2 = step(&half, &tau, dt / 2.0, &p, CoriolisMode::SkewSymmetric);
            let d = Vector6::new(
                full.pose.x - half2.pose.x,
                full.pose.y - half2.pose.y,
                full.pose.psi - half2.pose.psi,
                full.vel.u - half2.vel.u,
                full.vel.v - half2.vel.v,
                full.vel.omega - half2.vel.omega,
            );
            d.amax()
        };
        let d1 = diff(0.2);
        let d2 = diff(0.1);
        // one-step defect scales ~ dt^5, so halving dt divides it by ~32
        let ratio = d1 / d2;
        assert!(ratio > 16.0 && ratio < 64.0, "ratio {ratio}");
    }

    #[test]
    fn step_energy_nonincreasing_with_drag() {
        let mut p = params();
        p.lin_drag = [30.0, 40.0, 15.0];
        let mut s = VesselState {
            pose: Pose2D::new(0.0, 0.0, 0.0),
            vel: BodyVelocity::new(2.0, -1.0, 0.8),
        };
        let m = mass_matrix(&p);
        let ke = |v: &BodyVelocity| 0.5 * v.as_vector().dot(&(m * v.as_vector()));
        let mut last = ke(&s.vel);
        for _ in 0..500 {
            s = step(&s, &Wrench::zero(), 0.02, &p, CoriolisMode::SkewSymmetric);
            let e = ke(&s.vel);
            assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn step_bitwise_deterministic() {
        let p = params();
        let s0 = VesselState {
            pose: Pose2D::new(0.3, -0.7, 1.1),
            vel: BodyVelocity::new(0.9, -0.1, 0.2),
        };
        let tau = Wrench::new(17.3, 2.2, -4.4);
        let a = step(&s0, &tau, 0.02, &p, CoriolisMode::SkewSymmetric);
        let b = step(&s0, &tau, 0.02, &p, CoriolisMode::SkewSymmetric);
        assert_eq!(a.pose.x.to_bits(), b.pose.x.to_bits());
        assert_eq!(a.pose.y.to_bits(), b.pose.y.to_bits());
        assert_eq!(a.pose.psi.to_bits(), b.pose.psi.to_bits());
        assert_eq!(a.vel.u.to_bits(), b.vel.u.to_bits());
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_thrust(10.0, 10.0, 2.0), Wrench::new(10.0, 0.0, 0.0));
        assert_eq!(allocate_thrust(10.0, -10.0, 2.0), Wrench::new(0.0, 0.0, 20.0));
        assert_eq!(allocate_thrust(4.0, 2.0, 3.0), Wrench::new(3.0, 0.0, 3.0));
    }

    #[test]
    fn inverse_allocation_examples() {
        let p = inverse_allocation(&Wrench::new(10.0, 0.0, 0.0), 2.0, f64::INFINITY);
        assert_eq!((p.right, p.left, p.clamped), (10.0, 10.0, false));
        let p = inverse_allocation(&Wrench::new(0.0, 0.0, 20.0), 2.0, f64::INFINITY);
        assert_eq!((p.right, p.left, p.clamped), (10.0, -10.0, false));
    }

    #[test]
    fn inverse_allocation_saturates() {
        let p = inverse_allocation(&Wrench::new(100.0, 0.0, 40.0), 2.0, 50.0);
        assert_eq!((p.right, p.left), (50.0, 50.0));
        assert!(p.clamped);
    }

    #[test]
    fn allocation_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let tau = Wrench::new(rng.gen_range(-100.0..100.0), rng.gen_range(-5.0..5.0), rng.gen_range(-80.0..80.0));
            let w = rng.gen_range(0.5..4.0);
            let pair = inverse_allocation(&tau, w, f64::INFINITY);
            let back = allocate_thrust(pair.right, pair.left, w);
            assert!((back.fx - tau.fx).abs() < 1e-12);
            assert!((back.fyaw - tau.fyaw).abs() < 1e-12);
            assert_eq!(back.fy, 0.0);
        }
    }

    fn prop() -> PropellerParams {
        PropellerParams {
            rho: 1000.0,
            dp: 0.2,
            k0: 0.5,
            k1: -0.3,
            k2: -0.1,
            max_rev: 20.0,
        }
    }

    #[test]
    fn propeller_bollard() {
        let p = PropellerParams {
            rho: 1000.0,
            dp: 0.1,
            k0: 0.5,
            k1: 7.7,
            k2: -3.3,
            max_rev: 20.0,
        };
        assert_relative_eq!(propeller_thrust(10.0, 0.0, &p), 5.0);
    }

    #[test]
    fn propeller_zero_rev() {
        assert_eq!(propeller_thrust(0.0, 1.0, &prop()), 0.0);
    }

    #[test]
    fn propeller_hand_evaluation() {
        let p = PropellerParams {
            rho: 1000.0,
            dp: 0.2,
            k0: -0.1,
            k1: -0.2,
            k2: 0.4,
            max_rev: 20.0,
        };
        // Js = 1/(5*0.2) = 1, Kt = 0.4 - 0.2 - 0.1 = 0.1
        assert_relative_eq!(propeller_thrust(5.0, 1.0, &p), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rev_inverse_zero_thrust() {
        let r = thrust_to_rev(0.0, 0.0, &prop());
        assert_eq!(r.n, 0.0);
        assert!(!r.clamped);
    }

    #[test]
    fn rev_inverse_round_trip_grid() {
        let p = prop();
        for up in [0.0, 0.5, 1.5] {
            let t_max = propeller_thrust(p.max_rev, up, &p);
            for i in 1..=20 {
                let t_des = t_max * (i as f64) / 21.0;
                let r = thrust_to_rev(t_des, up, &p);
                assert!(!r.clamped, "t_des {t_des} up {up}");
                let t_back = propeller_thrust(r.n, up, &p);
                assert!((t_back - t_des).abs() < 1e-6 * t_des.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rev_inverse_clamps_above_max() {
        let p = prop();
        let t_max = propeller_thrust(p.max_rev, 0.0, &p);
        let r = thrust_to_rev(t_max * 2.0, 0.0, &p);
        assert_eq!(r.n, p.max_rev);
        assert!(r.clamped);
    }

    #[test]
    fn validate_rejects_bad_mass() {
        let mut p = params();
        p.m = -1.0;
        assert!(p.validate().is_err());
    }
}
