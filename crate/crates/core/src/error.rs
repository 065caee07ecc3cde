use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Rotor tilt is zero (or at ±π/2), so the force allocation is singular.
    #[error("degenerate design: rotor tilt eta = {eta} leaves the force allocation singular")]
    DegenerateDesign { eta: f64 },
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    /// Integration produced a non-finite state; carries the last finite time.
    #[error("integration diverged at t = {t}")]
    Diverged { t: f64 },
}
