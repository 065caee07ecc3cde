//! Quasi-3D vehicle: two planar attitude subsystems (xz/pitch, yz/roll)
//! sharing the vertical axis.
//!
//! This is an extrapolation of the planar model. Four rotors sit at
//! `(±a_x, ±a_x, a_z)`; each one acts in both vertical planes exactly like a
//! planar rotor, so its force column is `(σx sin η, σy sin η, cos η)`. Body
//! forces reach the world frame through the decoupled map [`body_to_world`],
//! which drops pitch-roll product terms except on the vertical thrust. Yaw is
//! fixed at zero; the allocation keeps the diagonal rotor pairs balanced so
//! no yaw moment is commanded.

use alloc::vec::Vec;

use nalgebra::{Matrix3, SMatrix};

use crate::controller::ControllerGains;
use crate::experiments::MetricsAccumulator;
use crate::model::{buoyancy_torque, DesignParams};
use crate::sim::{Actuation, DivergenceCause, SimConfig};
use crate::trajectory::TrajectoryRef;
use crate::{Error, Vec3};

/// Rotor sign pattern `(σx, σy)`. Rotors 1, 2 are the front pair (planar
/// rotor 1), rotors 3, 4 the rear pair (planar rotor 2).
pub const ROTOR_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)];

pub type Allocation = SMatrix<f64, 5, 4>;
pub type Thrust4 = nalgebra::Vector4<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpatialState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub pitch: f64,
    pub roll: f64,
    pub pitch_rate: f64,
    pub roll_rate: f64,
}

impl SpatialState {
    pub fn at_rest(position: Vec3) -> Self {
        Self { position, ..Self::default() }
    }

    pub fn to_array(&self) -> [f64; 10] {
        let (p, v) = (self.position, self.velocity);
        [p.x, p.y, p.z, v.x, v.y, v.z, self.pitch, self.roll, self.pitch_rate, self.roll_rate]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        Self {
            position: Vec3::new(a[0], a[1], a[2]),
            velocity: Vec3::new(a[3], a[4], a[5]),
            pitch: a[6],
            roll: a[7],
            pitch_rate: a[8],
            roll_rate: a[9],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadCommand {
    pub thrust: Thrust4,
    pub saturated: [bool; 4],
}

impl QuadCommand {
    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

/// Rows: body `f_x, f_y, f_z`, pitch torque, roll torque.
pub fn spatial_allocation(params: &DesignParams) -> Result<Allocation, Error> {
    params.require_tilt()?;
    let (s, c) = (libm::sin(params.eta), libm::cos(params.eta));
    let arm = params.a_z * s - params.a_x * c;
    let mut a = Allocation::zeros();
    for (i, (sx, sy)) in ROTOR_SIGNS.iter().enumerate() {
        a[(0, i)] = sx * s;
        a[(1, i)] = sy * s;
        a[(2, i)] = c;
        a[(3, i)] = sx * arm;
        a[(4, i)] = sy * arm;
    }
    Ok(a)
}

/// Decoupled body-to-world force map for pitch `theta` and roll `phi`.
pub fn body_to_world(theta: f64, phi: f64) -> Matrix3<f64> {
    let (st, ct) = (libm::sin(theta), libm::cos(theta));
    let (sp, cp) = (libm::sin(phi), libm::cos(phi));
    Matrix3::new(ct, 0.0, -st, 0.0, cp, -sp, st, sp, ct * cp)
}

/// Inverse of [`body_to_world`] applied to `f`.
pub fn world_to_body(theta: f64, phi: f64, f: &Vec3) -> Vec3 {
    let (st, ct) = (libm::sin(theta), libm::cos(theta));
    let (sp, cp) = (libm::sin(phi), libm::cos(phi));
    let bz = (f.z - st / ct * f.x - sp / cp * f.y) / (st * st / ct + sp * sp / cp + ct * cp);
    Vec3::new((f.x + st * bz) / ct, (f.y + sp * bz) / cp, bz)
}

/// Time derivative of the quasi-3D state under rotor thrusts `thrust`.
pub fn spatial_derivative(params: &DesignParams, alloc: &Allocation, s: &SpatialState, thrust: &Thrust4) -> [f64; 10] {
    let w = alloc * thrust;
    let body = Vec3::new(w[0], w[1], w[2]);
    let mut force = body_to_world(s.pitch, s.roll) * body;
    force.z += params.f_b - params.m * params.g;
    force -= Vec3::new(params.d_x * s.velocity.x, params.d_x * s.velocity.y, params.d_z * s.velocity.z);
    let acc = force / params.m;
    let pitch_acc = (-params.d_tau * s.pitch_rate + buoyancy_torque(params, s.pitch) + w[3]) / params.j_theta;
    let roll_acc = (-params.d_tau * s.roll_rate + buoyancy_torque(params, s.roll) + w[4]) / params.j_theta;
    [
        s.velocity.x,
        s.velocity.y,
        s.velocity.z,
        acc.x,
        acc.y,
        acc.z,
        s.pitch_rate,
        s.roll_rate,
        pitch_acc,
        roll_acc,
    ]
}

/// Velocity controller applied per plane, with a shared vertical channel.
#[derive(Debug, Clone, Copy)]
pub struct SpatialController {
    params: DesignParams,
    gains: ControllerGains,
}

impl SpatialController {
    pub fn new(params: DesignParams, gains: ControllerGains) -> Result<Self, Error> {
        params.validate()?;
        params.require_tilt()?;
        gains.validate()?;
        Ok(Self { params, gains })
    }

    /// Thrusts before clamping. The lateral gain `k_vx` serves both x and y.
    pub fn raw_command(&self, s: &SpatialState, v_d: &Vec3) -> Thrust4 {
        let p = &self.params;
        let e = v_d - s.velocity;
        let mut demand = Vec3::new(self.gains.k_vx * e.x, self.gains.k_vx * e.y, self.gains.k_vz * e.z);
        demand.z += p.weight_surplus();
        let b = world_to_body(s.pitch, s.roll, &demand);
        let (sn, cs) = (libm::sin(p.eta), libm::cos(p.eta));
        let mut f = Thrust4::zeros();
        for (i, (sx, sy)) in ROTOR_SIGNS.iter().enumerate() {
            f[i] = 0.25 * (b.z / cs + sx * b.x / sn + sy * b.y / sn);
        }
        f
    }

    pub fn command(&self, s: &SpatialState, v_d: &Vec3) -> QuadCommand {
        let raw = self.raw_command(s, v_d);
        let mut cmd = QuadCommand { thrust: raw, saturated: [false; 4] };
        for i in 0..4 {
            if raw[i] < self.params.f_min {
                cmd.thrust[i] = self.params.f_min;
                cmd.saturated[i] = true;
            } else if raw[i] > self.params.f_max {
                cmd.thrust[i] = self.params.f_max;
                cmd.saturated[i] = true;
            }
        }
        cmd
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialRecord {
    pub t: f64,
    pub state: SpatialState,
    pub command: QuadCommand,
    pub setpoint: Vec3,
    pub reference_position: Vec3,
    pub velocity_error: f64,
    /// `sqrt(theta^2 + phi^2)`.
    pub angular_error: f64,
    pub position_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpatialLog {
    pub records: Vec<SpatialRecord>,
    pub diverged: bool,
    pub cause: Option<DivergenceCause>,
    /// Time of the first state that broke a bound.
    pub diverged_at: Option<f64>,
    pub metrics: crate::experiments::RunMetrics,
}

#[derive(Debug, Clone, Copy)]
pub struct SpatialSimulator {
    params: DesignParams,
    alloc: Allocation,
    controller: SpatialController,
    config: SimConfig,
    initial: SpatialState,
}

impl SpatialSimulator {
    /// `config.initial_state` is ignored; the spatial start is `initial`.
    pub fn new(
        params: DesignParams,
        gains: ControllerGains,
        config: SimConfig,
        initial: SpatialState,
    ) -> Result<Self, Error> {
        config.validate()?;
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial_state"));
        }
        Ok(Self {
            alloc: spatial_allocation(&params)?,
            controller: SpatialController::new(params, gains)?,
            params,
            config,
            initial,
        })
    }

    fn command_for(&self, s: &SpatialState, v_d: &Vec3) -> QuadCommand {
        match self.config.actuation {
            Actuation::Closed => self.controller.command(s, v_d),
            Actuation::Unactuated => QuadCommand::default(),
        }
    }

    fn advance<F>(&self, t: f64, s: &SpatialState, held: Option<&QuadCommand>, setpoint: F) -> SpatialState
    where
        F: Fn(f64, &Vec3) -> Vec3,
    {
        let x = self.config.integrator.advance(t, &s.to_array(), self.config.dt, |tau, x| {
            let st = SpatialState::from_array(*x);
            let cmd = match held {
                Some(c) => *c,
                None => self.command_for(&st, &setpoint(tau, &st.position)),
            };
            let mut d = spatial_derivative(&self.params, &self.alloc, &st, &cmd.thrust);
            if self.config.pin_pitch {
                d[6..].iter_mut().for_each(|v| *v = 0.0);
            }
            d
        });
        SpatialState::from_array(x)
    }

    /// One continuous-control step toward a constant setpoint.
    pub fn step(&self, t: f64, s: &SpatialState, v_d: &Vec3) -> Result<SpatialState, Error> {
        let next = self.advance(t, s, None, |_, _| *v_d);
        if next.is_finite() {
            Ok(next)
        } else {
            Err(Error::Diverged { t })
        }
    }

    fn check(&self, s: &SpatialState, position_error: f64) -> Option<DivergenceCause> {
        let lim = &self.config.limits;
        if !s.is_finite() {
            Some(DivergenceCause::NonFinite)
        } else if s.velocity.norm() > lim.max_speed {
            Some(DivergenceCause::Speed)
        } else if s.pitch.abs() > lim.max_angle || s.roll.abs() > lim.max_angle {
            Some(DivergenceCause::Angle)
        } else if self.config.actuation == Actuation::Closed && position_error > lim.max_position_error {
            Some(DivergenceCause::PositionError)
        } else {
            None
        }
    }

    pub fn run(&self, trajectory: &TrajectoryRef) -> SpatialLog {
        let cfg = &self.config;
        let n = cfg.steps();
        let hold = cfg.controller_rate_hz.map(|hz| (libm::round(1.0 / (hz * cfg.dt)) as usize).max(1));
        let setpoint = |t: f64, p: &Vec3| trajectory.setpoint(t, p);
        let mut log = SpatialLog { records: Vec::with_capacity(n / cfg.decimate + 1), ..SpatialLog::default() };
        let mut acc = MetricsAccumulator::new(cfg.transient);
        let mut s = self.initial;
        let mut held = QuadCommand::default();
        for k in 0..=n {
            let t = k as f64 * cfg.dt;
            let sp = setpoint(t, &s.position);
            let cmd = match hold {
                Some(h) if k % h != 0 => held,
                _ => self.command_for(&s, &sp),
            };
            held = cmd;
            let p_d = trajectory.reference(t).p_d;
            let record = SpatialRecord {
                t,
                state: s,
                command: cmd,
                setpoint: sp,
                reference_position: p_d,
                velocity_error: (sp - s.velocity).norm(),
                angular_error: libm::hypot(s.pitch, s.roll),
                position_error: (p_d - s.position).norm(),
            };
            acc.push(t, record.velocity_error, record.angular_error, record.position_error, cmd.any_saturated());
            if k % cfg.decimate == 0 {
                log.records.push(record);
            }
            if k == n {
                break;
            }
            let next = self.advance(t, &s, hold.map(|_| &held), setpoint);
            let p_next = trajectory.reference(t + cfg.dt).p_d;
            if let Some(cause) = self.check(&next, (p_next - next.position).norm()) {
                log.diverged = true;
                log.cause = Some(cause);
                log.diverged_at = Some((k + 1) as f64 * cfg.dt);
                break;
            }
            s = next;
        }
        log.metrics = acc.finish();
        log
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::model::body_wrench;
    use crate::Vec2;

    #[test]
    fn equal_thrusts_give_pure_lift() {
        let p = DesignParams::default();
        let a = spatial_allocation(&p).unwrap();
        let w = a * Thrust4::repeat(0.1);
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 0.4 * libm::cos(p.eta), epsilon = 1e-15);
        assert_abs_diff_eq!(w[3], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[4], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn front_and_rear_pairs_reproduce_the_planar_wrench() {
        let p = DesignParams::default();
        let a = spatial_allocation(&p).unwrap();
        for (f1, f2) in [(0.1, 0.0), (0.03, 0.07), (0.12, 0.12)] {
            // split each planar rotor's thrust across the matching pair
            let w = a * Thrust4::new(f1 / 2.0, f1 / 2.0, f2 / 2.0, f2 / 2.0);
            let planar = body_wrench(&p, &Vec2::new(f1, f2));
            assert_abs_diff_eq!(w[0], planar.f.x, epsilon = 1e-15);
            assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(w[2], planar.f.y, epsilon = 1e-15);
            assert_abs_diff_eq!(w[3], planar.tau, epsilon = 1e-15);
            assert_abs_diff_eq!(w[4], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn degenerate_tilt() {
        let p = DesignParams { eta: 0.0, ..DesignParams::default() };
        assert!(spatial_allocation(&p).is_err());
    }

    #[test]
    fn body_to_world_inverse_and_planar_limit() {
        let f = Vec3::new(0.02, -0.01, 0.04);
        for (th, ph) in [(0.0, 0.0), (0.3, -0.2), (-1.0, 0.7)] {
            let b = world_to_body(th, ph, &f);
            assert_abs_diff_eq!(body_to_world(th, ph) * b, f, epsilon = 1e-15);
        }
        let r = crate::model::rotation(0.4);
        let m = body_to_world(0.4, 0.0);
        assert_abs_diff_eq!(m[(0, 0)], r[(0, 0)]);
        assert_abs_diff_eq!(m[(0, 2)], r[(0, 1)]);
        assert_abs_diff_eq!(m[(2, 0)], r[(1, 0)]);
        assert_abs_diff_eq!(m[(2, 2)], r[(1, 1)]);
    }

    #[test]
    fn pure_x_setpoint_keeps_y_and_roll_at_zero() {
        let cfg = SimConfig { duration: 20.0, ..SimConfig::default() };
        let sim = SpatialSimulator::new(DesignParams::default(), ControllerGains::default(), cfg, SpatialState::default()).unwrap();
        let mut s = SpatialState::default();
        let vd = Vec3::new(0.1, 0.0, 0.0);
        for k in 0..cfg.steps() {
            s = sim.step(k as f64 * cfg.dt, &s, &vd).unwrap();
            assert!(s.position.y.abs() < 1e-9 && s.roll.abs() < 1e-9);
        }
        assert!(s.position.x > 1.0);
    }

    #[test]
    fn unactuated_angles_decay() {
        let cfg = SimConfig {
            duration: 60.0,
            actuation: crate::sim::Actuation::Unactuated,
            ..SimConfig::default()
        };
        let init = SpatialState { pitch: 0.4, roll: -0.3, ..SpatialState::default() };
        let sim = SpatialSimulator::new(DesignParams::default(), ControllerGains::default(), cfg, init).unwrap();
        let log = sim.run(&TrajectoryRef::hover(Vec3::zeros()));
        let last = log.records.last().unwrap().state;
        assert!(last.pitch.abs() < 1e-3 && last.roll.abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn force_block_has_rank_three(a_x in 0.01f64..0.2, a_z in -0.1f64..-0.001, eta in 0.05f64..1.5) {
            let p = DesignParams { a_x, a_z, eta, ..DesignParams::default() };
            let a = spatial_allocation(&p).unwrap();
            let forces = a.fixed_rows::<3>(0).into_owned();
            let sv = forces.svd(false, false).singular_values;
            let rank = sv.iter().filter(|&&x| x > 1e-9 * sv.max()).count();
            prop_assert_eq!(rank, 3);
        }

        #[test]
        fn allocation_inverts_the_demand(th in -0.5f64..0.5, ph in -0.5f64..0.5,
                                         ex in -0.02f64..0.02, ey in -0.02f64..0.02, ez in -0.02f64..0.02) {
            let p = DesignParams::default();
            let g = ControllerGains::default();
            let ctl = SpatialController::new(p, g).unwrap();
            let s = SpatialState { pitch: th, roll: ph, ..SpatialState::default() };
            let vd = Vec3::new(ex, ey, ez);
            let f = ctl.raw_command(&s, &vd);
            let w = spatial_allocation(&p).unwrap() * f;
            let world = body_to_world(th, ph) * Vec3::new(w[0], w[1], w[2]);
            let want = Vec3::new(g.k_vx * ex, g.k_vx * ey, g.k_vz * ez + p.weight_surplus());
            prop_assert!((world - want).norm() < 1e-12);
            // balanced diagonals: no yaw moment is commanded
            prop_assert!((f[0] - f[1] + f[2] - f[3]).abs() < 1e-12);
        }
    }
}
