//! Planar dynamics, tilted-rotor allocation and the attitude-free velocity
//! controller for a swing-blimp: a tilted-rotor quadrotor hung beneath a
//! helium balloon.
//!
//! The crate is `no_std` (it needs `alloc` for simulation logs). IO, config
//! files and the command-line front end live in the `sblimp` crate.
//!
//! - [`model`]: parameters, allocation matrices, buoyancy torque, Newton-Euler derivative
//! - [`controller`]: feedback linearization, proportional velocity law, rotor clamping
//! - [`trajectory`]: hover / circle / helix / constant-velocity references
//! - [`sim`]: fixed-step RK4 / Euler closed-loop simulation with divergence detection
//! - [`spatial`]: quasi-3D vehicle built from two decoupled planar subsystems
//! - [`experiments`]: run metrics, stability classification and parameter sweeps
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod controller;
pub mod error;
pub mod experiments;
pub mod model;
pub mod pitch;
pub mod sim;
pub mod spatial;
pub mod trajectory;

pub use controller::{ControllerGains, VelocitySetpoint};
pub use error::Error;
pub use model::{BodyWrench, DesignParams, PlanarState, RotorCommand};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;
