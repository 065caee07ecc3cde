//! Velocity setpoints and reference positions.
//!
//! References are three-dimensional; planar simulations use the `(x, z)`
//! components.

use core::f64::consts::TAU;

use crate::{Error, Vec2, Vec3};

/// Plane a circle is drawn in. Planar runs need [`CirclePlane::Xz`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CirclePlane {
    #[default]
    Xz,
    Xy,
}

/// Feed-forward reference at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub v_d: Vec3,
    pub p_d: Vec3,
}

impl Reference {
    /// `(x, z)` projection used by the planar simulator.
    pub fn planar(&self) -> (Vec2, Vec2) {
        (Vec2::new(self.v_d.x, self.v_d.z), Vec2::new(self.p_d.x, self.p_d.z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryRef {
    /// Hold `target` with an outer proportional position loop.
    Hover { target: Vec3, k_p: f64, max_speed: f64 },
    /// Constant-speed circle starting at `center + radius * e1`.
    Circle { radius: f64, speed: f64, center: Vec3, plane: CirclePlane },
    /// Horizontal circle with a linear speed ramp and a constant climb rate.
    /// `center.z` is the starting height.
    Helix { radius: f64, v0: f64, ramp: f64, climb: f64, center: Vec3 },
    ConstantVelocity { velocity: Vec3, start: Vec3 },
}

pub const HOVER_GAIN: f64 = 0.5;
pub const HOVER_MAX_SPEED: f64 = 0.3;
pub const HELIX_V0: f64 = 0.06;
pub const HELIX_RAMP: f64 = 0.000537;
pub const HELIX_CLIMB: f64 = 0.002;
pub const HELIX_START_HEIGHT: f64 = 0.35;

impl TrajectoryRef {
    pub fn hover(target: Vec3) -> Self {
        Self::Hover { target, k_p: HOVER_GAIN, max_speed: HOVER_MAX_SPEED }
    }

    /// Circle of `radius` in the vertical xz-plane about the origin.
    pub fn circle(radius: f64, speed: f64) -> Self {
        Self::Circle { radius, speed, center: Vec3::zeros(), plane: CirclePlane::Xz }
    }

    pub fn helix() -> Self {
        Self::Helix {
            radius: 1.0,
            v0: HELIX_V0,
            ramp: HELIX_RAMP,
            climb: HELIX_CLIMB,
            center: Vec3::new(0.0, 0.0, HELIX_START_HEIGHT),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let check = |name: &'static str, value: f64, ok: bool| {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value, reason: "out of range for trajectory" })
            }
        };
        match *self {
            Self::Hover { k_p, max_speed, .. } => {
                check("k_p", k_p, k_p >= 0.0)?;
                check("max_speed", max_speed, max_speed > 0.0)
            }
            Self::Circle { radius, speed, .. } => {
                check("radius", radius, radius > 0.0)?;
                check("speed", speed, speed > 0.0)
            }
            Self::Helix { radius, v0, ramp, climb, .. } => {
                check("radius", radius, radius > 0.0)?;
                check("v0", v0, v0 > 0.0)?;
                check("ramp", ramp, true)?;
                check("climb", climb, climb >= 0.0)
            }
            Self::ConstantVelocity { velocity, .. } => {
                if velocity.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::NonFinite("velocity"))
                }
            }
        }
    }

    /// Feed-forward velocity and reference position at `t`.
    pub fn reference(&self, t: f64) -> Reference {
        match *self {
            Self::Hover { target, .. } => Reference { v_d: Vec3::zeros(), p_d: target },
            Self::Circle { radius, speed, center, plane } => {
                let (v, p) = circle_setpoint(radius, speed, t);
                let lift = |a: Vec2| match plane {
                    CirclePlane::Xz => Vec3::new(a.x, 0.0, a.y),
                    CirclePlane::Xy => Vec3::new(a.x, a.y, 0.0),
                };
                Reference { v_d: lift(v), p_d: center + lift(p) }
            }
            Self::Helix { radius, v0, ramp, climb, center } => {
                let mut r = helix_setpoint(radius, v0, ramp, climb, t);
                r.p_d += center;
                r
            }
            Self::ConstantVelocity { velocity, start } => Reference { v_d: velocity, p_d: start + velocity * t },
        }
    }

    /// Velocity command at `t` for a vehicle at `position`. Hover closes a
    /// position loop; the other kinds are pure feed-forward.
    pub fn setpoint(&self, t: f64, position: &Vec3) -> Vec3 {
        match *self {
            Self::Hover { target, k_p, max_speed } => hover_setpoint(&target, position, k_p, max_speed),
            _ => self.reference(t).v_d,
        }
    }

    /// Declared planar speed at `t` (the circle speed, the helix ramp, ...).
    pub fn declared_speed(&self, t: f64) -> f64 {
        match *self {
            Self::Hover { .. } => 0.0,
            Self::Circle { speed, .. } => speed,
            Self::Helix { v0, ramp, .. } => v0 + ramp * t,
            Self::ConstantVelocity { velocity, .. } => velocity.norm(),
        }
    }

    pub fn start_position(&self) -> Vec3 {
        self.reference(0.0).p_d
    }
}

/// Circle about the origin in plane coordinates:
/// `v = speed [-sin(wt), cos(wt)]`, `p = radius [cos(wt), sin(wt)]`, `w = speed / radius`.
pub fn circle_setpoint(radius: f64, speed: f64, t: f64) -> (Vec2, Vec2) {
    let phase = speed / radius * t;
    circle_point(radius, speed, phase)
}

fn circle_point(radius: f64, speed: f64, phase: f64) -> (Vec2, Vec2) {
    let (s, c) = (libm::sin(phase), libm::cos(phase));
    (Vec2::new(-s, c) * speed, Vec2::new(c, s) * radius)
}

/// Helix about the z-axis from height 0: planar speed `v0 + ramp t`,
/// phase `(v0 t + ramp t^2 / 2) / radius`, climb rate `climb`.
pub fn helix_setpoint(radius: f64, v0: f64, ramp: f64, climb: f64, t: f64) -> Reference {
    let speed = v0 + ramp * t;
    let phase = (v0 * t + 0.5 * ramp * t * t) / radius;
    let (v, p) = circle_point(radius, speed, phase);
    Reference { v_d: Vec3::new(v.x, v.y, climb), p_d: Vec3::new(p.x, p.y, climb * t) }
}

/// `K_p (target - position)`, clipped to `max_speed` in magnitude.
pub fn hover_setpoint(target: &Vec3, position: &Vec3, k_p: f64, max_speed: f64) -> Vec3 {
    let v = (target - position) * k_p;
    let n = v.norm();
    if n > max_speed {
        v * (max_speed / n)
    } else {
        v
    }
}

/// Period of a constant-speed circle.
pub fn circle_period(radius: f64, speed: f64) -> f64 {
    TAU * radius / speed
}
