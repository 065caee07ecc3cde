//! Attitude-free velocity controller.
//!
//! The controller never looks at position or pitch rate. Pitch enters only
//! through the rotation that maps the world-frame force demand into the body
//! frame before allocation.

use crate::model::{rotation, DesignParams, RotorCommand};
use crate::{Error, Mat2, Vec2};

/// Diagonal velocity gains, N s/m.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ControllerGains {
    pub k_vx: f64,
    pub k_vz: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { k_vx: 0.5, k_vz: 0.5 }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, value) in [("k_vx", self.k_vx), ("k_vz", self.k_vz)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter { name, value, reason: "gain must be > 0" });
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { k_vx: self.k_vx * factor, k_vz: self.k_vz * factor }
    }

    fn diag(&self) -> Vec2 {
        Vec2::new(self.k_vx, self.k_vz)
    }
}

/// Desired world-frame velocity `[x', z']`, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocitySetpoint {
    pub v_d: Vec2,
}

impl VelocitySetpoint {
    pub fn new(vx: f64, vz: f64) -> Self {
        Self { v_d: Vec2::new(vx, vz) }
    }
}

/// Proportional velocity law `K_v (v_d - v)`.
///
/// The gains carry N s/m, so the result is the force the loop asks for on
/// top of the weight compensation. Divide by the mass to get the
/// acceleration fed to [`feedback_linearize`].
pub fn auxiliary_input(gains: &ControllerGains, v_d: &VelocitySetpoint, v: &Vec2) -> Vec2 {
    gains.diag().component_mul(&(v_d.v_d - v))
}

/// Static feedback `u = m A_f^-1 Rot(theta)^T ((g - f_b/m) z + w)`.
///
/// With drag ignored, the resulting world acceleration is exactly `w`.
pub fn feedback_linearize(params: &DesignParams, theta: f64, w: &Vec2) -> Result<Vec2, Error> {
    params.require_tilt()?;
    if !theta.is_finite() {
        return Err(Error::NonFinite("theta"));
    }
    let af_inv = force_allocation_inverse(params);
    Ok(linearize_with(params, &af_inv, theta, w))
}

fn force_allocation_inverse(params: &DesignParams) -> Mat2 {
    // [[s, -s], [c, c]]^-1 = [[1/(2s), 1/(2c)], [-1/(2s), 1/(2c)]]
    let (s, c) = (libm::sin(params.eta), libm::cos(params.eta));
    Mat2::new(0.5 / s, 0.5 / c, -0.5 / s, 0.5 / c)
}

fn linearize_with(params: &DesignParams, af_inv: &Mat2, theta: f64, w: &Vec2) -> Vec2 {
    let mut demand = *w;
    demand.y += params.weight_surplus() / params.m;
    af_inv * (rotation(theta).transpose() * demand) * params.m
}

/// Clips each thrust to `[f_min, f_max]`, flagging the rotors that were out of range.
pub fn clamp(params: &DesignParams, u_raw: &Vec2) -> RotorCommand {
    let mut cmd = RotorCommand::raw(*u_raw);
    for i in 0..2 {
        let f = u_raw[i];
        if f < params.f_min {
            cmd.thrust[i] = params.f_min;
            cmd.saturated[i] = true;
        } else if f > params.f_max {
            cmd.thrust[i] = params.f_max;
            cmd.saturated[i] = true;
        }
    }
    cmd
}

/// Exact solution of `m v' = K_v (v_d - v) - D v` for constant `v_d`, per axis:
/// `v(t) = k/(k+d) v_d + (v0 - k/(k+d) v_d) exp(-(k+d) t / m)`.
pub fn closed_form_velocity(
    params: &DesignParams,
    gains: &ControllerGains,
    v_d: &VelocitySetpoint,
    v0: &Vec2,
    t: f64,
) -> Vec2 {
    let axis = |k: f64, d: f64, vd: f64, v0: f64| {
        let steady = k / (k + d) * vd;
        steady + (v0 - steady) * libm::exp(-(k + d) * t / params.m)
    };
    Vec2::new(
        axis(gains.k_vx, params.d_x, v_d.v_d.x, v0.x),
        axis(gains.k_vz, params.d_z, v_d.v_d.y, v0.y),
    )
}

/// Steady-state velocity ratio `k/(k+d)` per axis.
pub fn steady_state_ratio(params: &DesignParams, gains: &ControllerGains) -> Vec2 {
    Vec2::new(gains.k_vx / (gains.k_vx + params.d_x), gains.k_vz / (gains.k_vz + params.d_z))
}

/// Feedback linearization plus proportional velocity law, bound to one design.
#[derive(Debug, Clone, Copy)]
pub struct VelocityController {
    params: DesignParams,
    gains: ControllerGains,
    af_inv: Mat2,
}

impl VelocityController {
    pub fn new(params: DesignParams, gains: ControllerGains) -> Result<Self, Error> {
        params.validate()?;
        params.require_tilt()?;
        gains.validate()?;
        Ok(Self { af_inv: force_allocation_inverse(&params), params, gains })
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    /// World acceleration the loop asks for: `K_v (v_d - v) / m`.
    pub fn acceleration_demand(&self, v_d: &VelocitySetpoint, v: &Vec2) -> Vec2 {
        auxiliary_input(&self.gains, v_d, v) / self.params.m
    }

    /// Thrust pair before clamping.
    pub fn raw_command(&self, theta: f64, v: &Vec2, v_d: &VelocitySetpoint) -> Vec2 {
        let w = self.acceleration_demand(v_d, v);
        linearize_with(&self.params, &self.af_inv, theta, &w)
    }

    pub fn command(&self, theta: f64, v: &Vec2, v_d: &VelocitySetpoint) -> RotorCommand {
        clamp(&self.params, &self.raw_command(theta, v, v_d))
    }
}
