//! Fixed-step closed-loop simulation of the planar vehicle.

use alloc::vec::Vec;

use crate::controller::{ControllerGains, VelocityController, VelocitySetpoint};
use crate::experiments::{MetricsAccumulator, RunMetrics};
use crate::model::{derivative_with_drag, DesignParams, PlanarState, RotorCommand};
use crate::trajectory::TrajectoryRef;
use crate::{Error, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

impl Integrator {
    /// One step of `x' = f(t, x)`.
    pub fn advance<const N: usize, F>(self, t: f64, x: &[f64; N], dt: f64, mut f: F) -> [f64; N]
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let axpy = |a: &[f64; N], k: &[f64; N], h: f64| {
            let mut out = *a;
            for (o, ki) in out.iter_mut().zip(k) {
                *o += h * ki;
            }
            out
        };
        match self {
            Self::Euler => axpy(x, &f(t, x), dt),
            Self::Rk4 => {
                let k1 = f(t, x);
                let k2 = f(t + 0.5 * dt, &axpy(x, &k1, 0.5 * dt));
                let k3 = f(t + 0.5 * dt, &axpy(x, &k2, 0.5 * dt));
                let k4 = f(t + dt, &axpy(x, &k3, dt));
                let mut out = *x;
                for i in 0..N {
                    out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                out
            }
        }
    }
}

/// What drives the rotors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Actuation {
    #[default]
    Closed,
    /// Rotors off: the free buoyancy pendulum.
    Unactuated,
}

/// Early-termination bounds. The blow-up bounds (speed, angle) only trip on
/// numerical or physical runaway; `max_position_error` catches a vehicle that
/// has lost control of its height and drifts away from the reference. It is
/// ignored for unactuated runs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DivergenceLimits {
    pub max_speed: f64,
    pub max_angle: f64,
    pub max_position_error: f64,
}

impl Default for DivergenceLimits {
    fn default() -> Self {
        Self { max_speed: 100.0, max_angle: 10.0, max_position_error: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceCause {
    NonFinite,
    Speed,
    Angle,
    PositionError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub integrator: Integrator,
    /// Discrete controller rate with zero-order hold; `None` evaluates the
    /// controller inside every integrator stage.
    pub controller_rate_hz: Option<f64>,
    pub initial_state: PlanarState,
    pub seed: u64,
    /// Keep every `decimate`-th record.
    pub decimate: usize,
    /// Averages and maxima ignore records before this time.
    pub transient: f64,
    pub actuation: Actuation,
    /// Hold pitch and pitch rate at their initial values.
    pub pin_pitch: bool,
    /// Include translational drag in the plant.
    pub plant_drag: bool,
    pub limits: DivergenceLimits,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 100.0,
            integrator: Integrator::Rk4,
            controller_rate_hz: None,
            initial_state: PlanarState::default(),
            seed: 0,
            decimate: 1,
            transient: 10.0,
            actuation: Actuation::Closed,
            pin_pitch: false,
            plant_drag: true,
            limits: DivergenceLimits::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", self.dt, "must be > 0");
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return bad("duration", self.duration, "must be >= dt");
        }
        if let Some(hz) = self.controller_rate_hz {
            if !(hz.is_finite() && hz > 0.0 && hz <= 1.0 / self.dt * (1.0 + 1e-9)) {
                return bad("controller_rate_hz", hz, "must be in (0, 1/dt]");
            }
        }
        if self.decimate == 0 {
            return bad("decimate", 0.0, "must be >= 1");
        }
        if !(self.transient >= 0.0) {
            return bad("transient", self.transient, "must be >= 0");
        }
        if !self.initial_state.is_finite() {
            return Err(Error::NonFinite("initial_state"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        libm::round(self.duration / self.dt) as usize
    }

    /// Integrator steps between controller updates (1 in continuous mode).
    fn hold_steps(&self) -> Option<usize> {
        self.controller_rate_hz
            .map(|hz| (libm::round(1.0 / (hz * self.dt)) as usize).max(1))
    }
}

/// One logged sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub state: PlanarState,
    /// Command applied from `t` onward.
    pub command: RotorCommand,
    /// Velocity setpoint handed to the controller.
    pub setpoint: VelocitySetpoint,
    pub reference_position: Vec2,
    /// `|v_d - v|`, m/s.
    pub velocity_error: f64,
    /// `|theta|`: deviation from the natural equilibrium, rad.
    pub angular_error: f64,
    /// `|p_d - r|`, m.
    pub position_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub records: Vec<SimRecord>,
    pub diverged: bool,
    pub cause: Option<DivergenceCause>,
    /// Time of the first state that broke a bound.
    pub diverged_at: Option<f64>,
    /// Metrics accumulated at the full integrator rate, independent of decimation.
    pub metrics: RunMetrics,
}

/// Planar closed-loop simulator for one design, gain set and configuration.
#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    controller: VelocityController,
    config: SimConfig,
}

impl Simulator {
    pub fn new(params: DesignParams, gains: ControllerGains, config: SimConfig) -> Result<Self, Error> {
        config.validate()?;
        Ok(Self { controller: VelocityController::new(params, gains)?, config })
    }

    pub fn params(&self) -> &DesignParams {
        self.controller.params()
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn controller(&self) -> &VelocityController {
        &self.controller
    }

    fn command_for(&self, s: &PlanarState, setpoint: &VelocitySetpoint) -> RotorCommand {
        match self.config.actuation {
            Actuation::Closed => self.controller.command(s.theta, &s.v, setpoint),
            Actuation::Unactuated => RotorCommand::default(),
        }
    }

    fn derivative(&self, s: &PlanarState, thrust: &Vec2) -> [f64; 6] {
        let mut d = derivative_with_drag(self.params(), s, thrust, self.config.plant_drag);
        if self.config.pin_pitch {
            d.theta = 0.0;
            d.theta_dot = 0.0;
        }
        d.to_array()
    }

    /// Advances one step. `held` fixes the thrust over the step; otherwise
    /// the controller is re-evaluated at every stage against `setpoint(t, r)`.
    fn advance<F>(&self, t: f64, s: &PlanarState, held: Option<&RotorCommand>, setpoint: F) -> PlanarState
    where
        F: Fn(f64, &Vec2) -> VelocitySetpoint,
    {
        let x = self.config.integrator.advance(t, &s.to_array(), self.config.dt, |tau, x| {
            let st = PlanarState::from_array(*x);
            let cmd = match held {
                Some(c) => *c,
                None => self.command_for(&st, &setpoint(tau, &st.r)),
            };
            self.derivative(&st, &cmd.thrust)
        });
        PlanarState::from_array(x)
    }

    /// One continuous-control step toward a constant setpoint.
    pub fn step(&self, t: f64, s: &PlanarState, v_d: &VelocitySetpoint) -> Result<PlanarState, Error> {
        let next = self.advance(t, s, None, |_, _| *v_d);
        if next.is_finite() {
            Ok(next)
        } else {
            Err(Error::Diverged { t })
        }
    }

    fn check(&self, s: &PlanarState, position_error: f64) -> Option<DivergenceCause> {
        let lim = &self.config.limits;
        if !s.is_finite() {
            Some(DivergenceCause::NonFinite)
        } else if s.v.norm() > lim.max_speed {
            Some(DivergenceCause::Speed)
        } else if s.theta.abs() > lim.max_angle {
            Some(DivergenceCause::Angle)
        } else if self.config.actuation == Actuation::Closed && position_error > lim.max_position_error {
            Some(DivergenceCause::PositionError)
        } else {
            None
        }
    }

    /// Runs the closed loop over `trajectory` for the configured duration.
    /// Divergence ends the run early and is reported through the log.
    pub fn run(&self, trajectory: &TrajectoryRef) -> SimLog {
        let cfg = &self.config;
        let n = cfg.steps();
        let hold = cfg.hold_steps();
        let setpoint = |t: f64, r: &Vec2| {
            let v = trajectory.setpoint(t, &Vec3::new(r.x, 0.0, r.y));
            VelocitySetpoint::new(v.x, v.z)
        };

        let mut log = SimLog {
            records: Vec::with_capacity(n / cfg.decimate + 1),
            ..SimLog::default()
        };
        let mut acc = MetricsAccumulator::new(cfg.transient);
        let mut s = cfg.initial_state;
        let mut held = RotorCommand::default();
        for k in 0..=n {
            let t = k as f64 * cfg.dt;
            let sp = setpoint(t, &s.r);
            let cmd = match hold {
                Some(h) if k % h != 0 => held,
                _ => self.command_for(&s, &sp),
            };
            held = cmd;
            let (_, p_d) = trajectory.reference(t).planar();
            let record = SimRecord {
                t,
                state: s,
                command: cmd,
                setpoint: sp,
                reference_position: p_d,
                velocity_error: (sp.v_d - s.v).norm(),
                angular_error: s.theta.abs(),
                position_error: (p_d - s.r).norm(),
            };
            acc.push(t, record.velocity_error, record.angular_error, record.position_error, cmd.any_saturated());
            if k % cfg.decimate == 0 {
                log.records.push(record);
            }
            if k == n {
                break;
            }
            let next = self.advance(t, &s, hold.map(|_| &held), setpoint);
            let t_next = t + cfg.dt;
            let (_, p_next) = trajectory.reference(t_next).planar();
            if let Some(cause) = self.check(&next, (p_next - next.r).norm()) {
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
