//! Closed-loop pitch response to a prescribed velocity-error history.
//!
//! Substituting the controller into the Euler equation and using
//! `A_tau = [c, 0] A_f` gives
//!
//! `J θ'' = c [cos θ, sin θ] · ((m g - f_b) z + K_v e) - d_τ θ' - f_b L_b sin θ`
//!
//! where `e(t) = v_d - v` and `K_v e` is the proportional force demand. The
//! linearized model replaces `[cos θ, sin θ]` by `[1, θ]` and `sin θ` by `θ`.
//! Both are verification references only; the simulator never uses them.

use alloc::vec::Vec;

use crate::controller::ControllerGains;
use crate::model::{coupling_coefficient, DesignParams};
use crate::sim::Integrator;
use crate::{Error, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PitchModel {
    Nonlinear,
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchSample {
    pub t: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

/// Pitch acceleration of the closed loop at `(theta, theta_dot)` under
/// velocity error `e`.
pub fn pitch_acceleration(
    model: PitchModel,
    params: &DesignParams,
    coupling: f64,
    gains: &ControllerGains,
    e: &Vec2,
    theta: f64,
    theta_dot: f64,
) -> f64 {
    let fx = gains.k_vx * e.x;
    let fz = params.weight_surplus() + gains.k_vz * e.y;
    let stiffness = params.f_b * params.l_b;
    let torque = match model {
        PitchModel::Nonlinear => {
            coupling * (libm::cos(theta) * fx + libm::sin(theta) * fz) - stiffness * libm::sin(theta)
        }
        PitchModel::Linearized => coupling * (fx + theta * fz) - stiffness * theta,
    };
    (torque - params.d_tau * theta_dot) / params.j_theta
}

/// Integrates the closed-loop pitch equation with RK4 from
/// `(theta0, theta_dot0)` and returns every sample including `t = 0`.
pub fn pitch_response<E>(
    model: PitchModel,
    params: &DesignParams,
    gains: &ControllerGains,
    theta0: f64,
    theta_dot0: f64,
    velocity_error: E,
    dt: f64,
    duration: f64,
) -> Result<Vec<PitchSample>, Error>
where
    E: Fn(f64) -> Vec2,
{
    let c = coupling_coefficient(params)?;
    if !(dt > 0.0 && duration >= 0.0) {
        return Err(Error::InvalidParameter { name: "dt", value: dt, reason: "must be > 0" });
    }
    let n = libm::round(duration / dt) as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut x = [theta0, theta_dot0];
    out.push(PitchSample { t: 0.0, theta: x[0], theta_dot: x[1] });
    for k in 0..n {
        let t = k as f64 * dt;
        x = Integrator::Rk4.advance(t, &x, dt, |tau, y| {
            [y[1], pitch_acceleration(model, params, c, gains, &velocity_error(tau), y[0], y[1])]
        });
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::Diverged { t });
        }
        out.push(PitchSample { t: t + dt, theta: x[0], theta_dot: x[1] });
    }
    Ok(out)
}

/// Largest `|θ_lin - θ_full|` over the run, relative to the largest `|θ_full|`.
pub fn relative_deviation(full: &[PitchSample], linear: &[PitchSample]) -> f64 {
    let scale = full.iter().map(|s| s.theta.abs()).fold(0.0, f64::max);
    let dev = full
        .iter()
        .zip(linear)
        .map(|(a, b)| (a.theta - b.theta).abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        dev
    } else {
        dev / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(_: f64) -> Vec2 {
        Vec2::zeros()
    }

    #[test]
    fn equilibrium_stays_put() {
        let p = DesignParams::default();
        let g = ControllerGains::default();
        let r = pitch_response(PitchModel::Linearized, &p, &g, 0.0, 0.0, zero, 1e-3, 5.0).unwrap();
        assert!(r.iter().all(|s| s.theta == 0.0 && s.theta_dot == 0.0));
    }

    #[test]
    fn small_swing_decays() {
        let p = DesignParams::default();
        let g = ControllerGains::default();
        let r = pitch_response(PitchModel::Linearized, &p, &g, 0.05, 0.0, zero, 1e-3, 40.0).unwrap();
        // peak |theta| per 5 s window shrinks
        let peaks: Vec<f64> = r
            .chunks(5000)
            .map(|c| c.iter().map(|s| s.theta.abs()).fold(0.0, f64::max))
            .collect();
        assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
        assert!(r.last().unwrap().theta.abs() < 0.05 * 0.01);
    }

    #[test]
    fn linearization_tracks_full_model() {
        let p = DesignParams::default();
        let g = ControllerGains::default();
        let err = |t: f64| Vec2::new(0.01 * libm::exp(-t), 0.005 * libm::sin(t));
        for theta0 in [-0.05, 0.02, 0.05] {
            let full = pitch_response(PitchModel::Nonlinear, &p, &g, theta0, 0.0, err, 1e-3, 5.0).unwrap();
            let lin = pitch_response(PitchModel::Linearized, &p, &g, theta0, 0.0, err, 1e-3, 5.0).unwrap();
            assert!(relative_deviation(&full, &lin) < 0.05);
        }
    }

    #[test]
    fn rejects_degenerate_design() {
        let p = DesignParams { eta: 0.0, ..DesignParams::default() };
        let g = ControllerGains::default();
        assert!(pitch_response(PitchModel::Nonlinear, &p, &g, 0.0, 0.0, zero, 1e-3, 1.0).is_err());
    }
}
