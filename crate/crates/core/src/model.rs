//! Vehicle parameters and the planar rigid-body model.
//!
//! Frames: `{W}` is the world frame with z up, `{B}` the body frame at the
//! center of mass. Pitch `theta` rotates `{B}` into `{W}` through
//! [`rotation`]. Rotor 1 sits at `[a_x, a_z]` tilted by `-eta`, rotor 2 at
//! `[-a_x, a_z]` tilted by `+eta`.

use core::f64::consts::FRAC_PI_2;

use nalgebra::RowVector2;

use crate::{Error, Mat2, Vec2};

/// Physical and actuation constants of one vehicle, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DesignParams {
    /// Mass, kg.
    pub m: f64,
    /// Pitch moment of inertia, kg m^2.
    pub j_theta: f64,
    /// Rotor lateral offset, m.
    pub a_x: f64,
    /// Rotor vertical offset, m (negative: rotors below the COM).
    pub a_z: f64,
    /// Tilt of rotor 2, rad; rotor 1 is tilted by `-eta`.
    pub eta: f64,
    /// Distance from the center of lift to the center of mass, m.
    pub l_b: f64,
    /// Buoyancy force, N.
    pub f_b: f64,
    /// Translational drag along world x, N s/m.
    pub d_x: f64,
    /// Translational drag along world z, N s/m.
    pub d_z: f64,
    /// Rotational drag, N m s.
    pub d_tau: f64,
    /// Per-rotor thrust limits, N.
    pub f_min: f64,
    pub f_max: f64,
    /// Gravitational acceleration, m/s^2.
    pub g: f64,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self {
            m: 0.06,
            j_theta: 0.01,
            a_x: 0.04,
            a_z: -0.01,
            eta: core::f64::consts::FRAC_PI_6,
            l_b: 0.3,
            f_b: 0.55,
            d_x: 0.05,
            d_z: 0.05,
            d_tau: 0.005,
            f_min: 0.0,
            f_max: 0.15,
            g: 9.81,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), Error> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter { name, value, reason: "must be finite" });
    }
    if value <= 0.0 {
        return Err(Error::InvalidParameter { name, value, reason: "must be > 0" });
    }
    Ok(())
}

impl DesignParams {
    /// Checks the structural invariants. A zero tilt passes here; it is
    /// rejected when a controller is built, since only the controller needs
    /// the allocation inverse.
    pub fn validate(&self) -> Result<(), Error> {
        positive("m", self.m)?;
        positive("j_theta", self.j_theta)?;
        positive("a_x", self.a_x)?;
        positive("l_b", self.l_b)?;
        positive("f_b", self.f_b)?;
        positive("d_x", self.d_x)?;
        positive("d_z", self.d_z)?;
        positive("d_tau", self.d_tau)?;
        positive("g", self.g)?;
        if !(self.a_z.is_finite() && self.a_z < 0.0) {
            return Err(Error::InvalidParameter {
                name: "a_z",
                value: self.a_z,
                reason: "must be < 0 (rotors below the center of mass)",
            });
        }
        if !(self.eta.is_finite() && self.eta.abs() < FRAC_PI_2) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: self.eta,
                reason: "must lie in (-pi/2, pi/2)",
            });
        }
        if !(self.f_min.is_finite() && self.f_min >= 0.0) {
            return Err(Error::InvalidParameter { name: "f_min", value: self.f_min, reason: "must be >= 0" });
        }
        if !(self.f_max.is_finite() && self.f_max > self.f_min) {
            return Err(Error::InvalidParameter { name: "f_max", value: self.f_max, reason: "must exceed f_min" });
        }
        Ok(())
    }

    /// Fails with [`Error::DegenerateDesign`] unless the force allocation is invertible.
    pub fn require_tilt(&self) -> Result<(), Error> {
        if self.eta == 0.0 || !(self.eta.abs() < FRAC_PI_2) {
            return Err(Error::DegenerateDesign { eta: self.eta });
        }
        Ok(())
    }

    /// Net downward weight the rotors must carry, `m g - f_b`.
    pub fn weight_surplus(&self) -> f64 {
        self.m * self.g - self.f_b
    }

    /// Static force balance at level attitude: the rotors can hold altitude
    /// iff `f_b + 2 f_min cos(eta) <= m g <= f_b + 2 f_max cos(eta)`.
    pub fn hover_feasible(&self) -> bool {
        let c = libm::cos(self.eta);
        let mg = self.m * self.g;
        mg <= self.f_b + 2.0 * self.f_max * c && mg >= self.f_b + 2.0 * self.f_min * c
    }
}

/// Planar pose and twist. `theta` is never wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarState {
    /// Position `[x, z]`, m.
    pub r: Vec2,
    /// Velocity `[x', z']`, m/s.
    pub v: Vec2,
    pub theta: f64,
    pub theta_dot: f64,
}

impl PlanarState {
    pub fn at_rest(r: Vec2) -> Self {
        Self { r, ..Self::default() }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.r.x, self.r.y, self.v.x, self.v.y, self.theta, self.theta_dot]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            r: Vec2::new(a[0], a[1]),
            v: Vec2::new(a[2], a[3]),
            theta: a[4],
            theta_dot: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Thrust pair `[f1, f2]` with per-rotor saturation flags.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorCommand {
    pub thrust: Vec2,
    pub saturated: [bool; 2],
}

impl RotorCommand {
    /// An unclamped command; flags are all false.
    pub fn raw(thrust: Vec2) -> Self {
        Self { thrust, saturated: [false; 2] }
    }

    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

/// Total rotor force and pitch torque in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyWrench {
    pub f: Vec2,
    pub tau: f64,
}

/// 2-D rotation by `alpha`: `[[cos, -sin], [sin, cos]]`.
pub fn rotation(alpha: f64) -> Mat2 {
    let (s, c) = (libm::sin(alpha), libm::cos(alpha));
    Mat2::new(c, -s, s, c)
}

/// Maps the thrust pair to body-frame force: `[[sin eta, -sin eta], [cos eta, cos eta]]`.
pub fn allocation_force_matrix(params: &DesignParams) -> Mat2 {
    let (s, c) = (libm::sin(params.eta), libm::cos(params.eta));
    Mat2::new(s, -s, c, c)
}

/// Maps the thrust pair to pitch torque. The two entries are exact negatives.
pub fn allocation_torque_matrix(params: &DesignParams) -> RowVector2<f64> {
    let (s, c) = (libm::sin(params.eta), libm::cos(params.eta));
    let t = params.a_z * s - params.a_x * c;
    RowVector2::new(t, -t)
}

/// The scalar `c = a_z - a_x / tan(eta)` with `A_tau = [c, 0] A_f`: rotor
/// torque is `c` times the body-x rotor force.
pub fn coupling_coefficient(params: &DesignParams) -> Result<f64, Error> {
    params.require_tilt()?;
    Ok(params.a_z - params.a_x / libm::tan(params.eta))
}

pub fn body_wrench(params: &DesignParams, thrust: &Vec2) -> BodyWrench {
    BodyWrench {
        f: allocation_force_matrix(params) * thrust,
        tau: (allocation_torque_matrix(params) * thrust)[0],
    }
}

/// Restoring torque of the buoyancy acting `l_b` above the center of mass.
pub fn buoyancy_torque(params: &DesignParams, theta: f64) -> f64 {
    -params.f_b * params.l_b * libm::sin(theta)
}

/// Mechanical energy of the buoyancy pendulum,
/// `J theta'^2 / 2 + f_b l_b (1 - cos theta)`.
pub fn pendulum_energy(params: &DesignParams, theta: f64, theta_dot: f64) -> f64 {
    0.5 * params.j_theta * theta_dot * theta_dot + params.f_b * params.l_b * (1.0 - libm::cos(theta))
}

/// Newton-Euler time derivative under thrust `thrust` (no clamping here).
/// The returned struct holds rates: `r` is the velocity, `v` the
/// acceleration, `theta` the pitch rate and `theta_dot` the pitch acceleration.
pub fn state_derivative(params: &DesignParams, s: &PlanarState, thrust: &Vec2) -> PlanarState {
    derivative_with_drag(params, s, thrust, true)
}

pub(crate) fn derivative_with_drag(
    params: &DesignParams,
    s: &PlanarState,
    thrust: &Vec2,
    drag: bool,
) -> PlanarState {
    let wrench = body_wrench(params, thrust);
    let mut force = rotation(s.theta) * wrench.f;
    force.y += params.f_b - params.m * params.g;
    if drag {
        force.x -= params.d_x * s.v.x;
        force.y -= params.d_z * s.v.y;
    }
    let torque = -params.d_tau * s.theta_dot + buoyancy_torque(params, s.theta) + wrench.tau;
    PlanarState {
        r: s.v,
        v: force / params.m,
        theta: s.theta_dot,
        theta_dot: torque / params.j_theta,
    }
}
