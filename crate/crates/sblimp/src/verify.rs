//! Built-in verification suite run by `sblimp verify`.

use sblimp_core::controller::{closed_form_velocity, feedback_linearize};
use sblimp_core::model::{allocation_force_matrix, allocation_torque_matrix, coupling_coefficient, pendulum_energy};
use sblimp_core::sim::{Actuation, SimConfig, Simulator};
use sblimp_core::trajectory::TrajectoryRef;
use sblimp_core::{ControllerGains, DesignParams, PlanarState, Vec2, Vec3, VelocitySetpoint};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, result: Result<String, String>) -> Self {
        match result {
            Ok(detail) => Self { name, passed: true, detail },
            Err(detail) => Self { name, passed: false, detail },
        }
    }
}

pub const COUPLING_TOL: f64 = 1e-12;
pub const HOVER_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-6;
pub const SETTLE_ANGLE: f64 = 1e-3;
pub const ENERGY_TOL: f64 = 1e-9;

pub fn run_checks(params: &DesignParams, gains: &ControllerGains) -> Vec<Check> {
    vec![
        Check::new("design invariants", design_invariants(params, gains)),
        Check::new("allocation coupling identity", coupling_identity(params)),
        Check::new("hover allocation", hover_allocation(params)),
        Check::new("closed-loop analytic oracle", closed_loop_oracle(params, gains)),
        Check::new("pendulum decay", pendulum_decay(params)),
    ]
}

fn design_invariants(params: &DesignParams, gains: &ControllerGains) -> Result<String, String> {
    params.validate().map_err(|e| e.to_string())?;
    gains.validate().map_err(|e| e.to_string())?;
    Ok("all parameters in range".into())
}

/// `A_tau = [c, 0] A_f` for the configured design and the same geometry at
/// other tilts.
fn coupling_identity(params: &DesignParams) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let tilts = std::iter::once(params.eta).chain((1..=20).map(|i| params.eta * i as f64 / 10.0));
    for eta in tilts {
        let p = DesignParams { eta, ..*params };
        if !(libm::sin(eta).abs() > 1e-9) {
            continue;
        }
        let c = coupling_coefficient(&p).map_err(|e| e.to_string())?;
        let af = allocation_force_matrix(&p);
        let predicted = af.row(0) * c;
        worst = worst.max((allocation_torque_matrix(&p) - predicted).abs().max());
    }
    coupling_coefficient(params).map_err(|e| e.to_string())?;
    if worst <= COUPLING_TOL {
        Ok(format!("max deviation {worst:.3e}"))
    } else {
        Err(format!("max deviation {worst:.3e} > {COUPLING_TOL:e}"))
    }
}

fn hover_allocation(params: &DesignParams) -> Result<String, String> {
    let u = feedback_linearize(params, 0.0, &Vec2::zeros()).map_err(|e| e.to_string())?;
    let f = allocation_force_matrix(params) * u;
    let want = Vec2::new(0.0, params.weight_surplus());
    let err = (f - want).abs().max();
    if err <= HOVER_TOL {
        Ok(format!("u = [{:.6}, {:.6}] N", u.x, u.y))
    } else {
        Err(format!("A_f u misses the hover force by {err:.3e}"))
    }
}

/// Pinned-pitch closed loop against the exact first-order velocity response.
fn closed_loop_oracle(params: &DesignParams, gains: &ControllerGains) -> Result<String, String> {
    let v_d = Vec2::new(0.03, 0.02);
    let cfg = SimConfig {
        duration: 10.0,
        pin_pitch: true,
        initial_state: PlanarState::at_rest(Vec2::new(0.0, 1.0)),
        ..SimConfig::default()
    };
    let sim = Simulator::new(*params, *gains, cfg).map_err(|e| e.to_string())?;
    let tr = TrajectoryRef::ConstantVelocity { velocity: Vec3::new(v_d.x, 0.0, v_d.y), start: Vec3::new(0.0, 0.0, 1.0) };
    let log = sim.run(&tr);
    if log.diverged {
        return Err("run diverged".into());
    }
    if log.metrics.saturation_fraction > 0.0 {
        return Err("rotors saturated; the oracle needs an unsaturated run".into());
    }
    let sp = VelocitySetpoint::new(v_d.x, v_d.y);
    let worst = log
        .records
        .iter()
        .map(|r| (r.state.v - closed_form_velocity(params, gains, &sp, &Vec2::zeros(), r.t)).abs().max())
        .fold(0.0, f64::max);
    if worst <= ORACLE_TOL {
        Ok(format!("max deviation {worst:.3e} m/s"))
    } else {
        Err(format!("max deviation {worst:.3e} m/s > {ORACLE_TOL:e}"))
    }
}

/// Unactuated swing from 0.5 rad settles and never gains energy.
fn pendulum_decay(params: &DesignParams) -> Result<String, String> {
    let cfg = SimConfig {
        duration: 120.0,
        actuation: Actuation::Unactuated,
        initial_state: PlanarState { theta: 0.5, ..PlanarState::at_rest(Vec2::new(0.0, 1.0)) },
        ..SimConfig::default()
    };
    let sim = Simulator::new(*params, ControllerGains::default(), cfg).map_err(|e| e.to_string())?;
    let log = sim.run(&TrajectoryRef::hover(Vec3::new(0.0, 0.0, 1.0)));
    if log.diverged {
        return Err("run diverged".into());
    }
    let energy: Vec<f64> = log.records.iter().map(|r| pendulum_energy(params, r.state.theta, r.state.theta_dot)).collect();
    if let Some(i) = energy.windows(2).position(|w| w[1] > w[0] + ENERGY_TOL) {
        return Err(format!("energy rose at t = {:.3} s", log.records[i + 1].t));
    }
    let last = log.records.last().map(|r| r.state.theta.abs()).unwrap_or(f64::NAN);
    if last < SETTLE_ANGLE {
        Ok(format!("|theta| = {last:.3e} rad after {} s", cfg.duration))
    } else {
        Err(format!("|theta| = {last:.3e} rad after {} s", cfg.duration))
    }
}
