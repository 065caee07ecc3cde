//! TOML run configuration.
//!
//! Every section and key is optional; missing keys take the defaults below
//! and unknown keys are rejected. Units are SI throughout (m, kg, s, rad, N).
//!
//! ```toml
//! model = "planar"            # or "spatial" (quasi-3D)
//!
//! [params]                    # vehicle design
//! m = 0.06                    # kg
//! f_b = 0.55                  # N
//! l_b = 0.3                   # m
//! eta = 0.5235987755982988    # rad
//!
//! [gains]
//! k_vx = 0.5                  # N s/m
//! k_vz = 0.5
//!
//! [sim]
//! dt = 0.001                  # s
//! duration = 100.0            # s
//! integrator = "rk4"          # or "euler"
//! decimate = 1
//! transient = 10.0            # s excluded from metrics
//!
//! [trajectory]
//! kind = "circle"             # hover | circle | helix | constant-velocity
//! radius = 1.0
//! speed = 0.1
//!
//! [sweep]
//! parameter = "speed"         # l_b | mass | speed
//! min = 0.01
//! max = 2.0
//! step = 0.01
//! parallelism = 4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sblimp_core::experiments::{ClassifyThresholds, Grid, SweepParameter, SweepSpec};
use sblimp_core::sim::{Actuation, DivergenceLimits, Integrator, SimConfig};
use sblimp_core::spatial::SpatialState;
use sblimp_core::trajectory::{
    CirclePlane, TrajectoryRef, HELIX_CLIMB, HELIX_RAMP, HELIX_START_HEIGHT, HELIX_V0, HOVER_GAIN,
    HOVER_MAX_SPEED,
};
use sblimp_core::{ControllerGains, DesignParams, PlanarState, Vec2, Vec3};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(#[from] sblimp_core::Error),
    #[error("invalid configuration: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Planar,
    Spatial,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub params: DesignParams,
    pub gains: ControllerGains,
    pub sim: SimSection,
    pub trajectory: TrajectorySection,
    pub sweep: SweepSection,
    pub classify: ClassifyThresholds,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub duration: f64,
    pub integrator: Integrator,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller_rate_hz: Option<f64>,
    pub decimate: usize,
    pub transient: f64,
    pub seed: u64,
    pub actuation: Actuation,
    pub pin_pitch: bool,
    pub initial: InitialSection,
    pub limits: DivergenceLimits,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            dt: d.dt,
            duration: d.duration,
            integrator: d.integrator,
            controller_rate_hz: d.controller_rate_hz,
            decimate: d.decimate,
            transient: d.transient,
            seed: d.seed,
            actuation: d.actuation,
            pin_pitch: d.pin_pitch,
            initial: InitialSection::default(),
            limits: d.limits,
        }
    }
}

/// Initial state. Position and velocity default to the reference at
/// `t = 0`; planar runs use the x and z components.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 3]>,
    pub pitch: f64,
    pub roll: f64,
    pub pitch_rate: f64,
    pub roll_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Hover,
    #[default]
    Circle,
    Helix,
    ConstantVelocity,
}

/// Keys not used by the selected `kind` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub kind: TrajectoryKind,
    /// Circle and helix radius, m.
    pub radius: f64,
    /// Circle speed, m/s.
    pub speed: f64,
    pub plane: CirclePlane,
    /// Circle and helix center; for the helix, `center[2]` is the start height.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    /// Hover target, m.
    pub target: [f64; 3],
    pub k_p: f64,
    pub max_speed: f64,
    /// Helix speed ramp `v0 + ramp t`, m/s and m/s^2.
    pub v0: f64,
    pub ramp: f64,
    pub climb: f64,
    /// Constant-velocity kind.
    pub velocity: [f64; 3],
    pub start: [f64; 3],
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Circle,
            radius: 1.0,
            speed: 0.1,
            plane: CirclePlane::Xz,
            center: None,
            target: [0.0, 0.0, 1.0],
            k_p: HOVER_GAIN,
            max_speed: HOVER_MAX_SPEED,
            v0: HELIX_V0,
            ramp: HELIX_RAMP,
            climb: HELIX_CLIMB,
            velocity: [0.1, 0.0, 0.0],
            start: [0.0, 0.0, 1.0],
        }
    }
}

impl TrajectorySection {
    pub fn build(&self) -> TrajectoryRef {
        let v3 = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        match self.kind {
            TrajectoryKind::Hover => TrajectoryRef::Hover { target: v3(self.target), k_p: self.k_p, max_speed: self.max_speed },
            TrajectoryKind::Circle => TrajectoryRef::Circle {
                radius: self.radius,
                speed: self.speed,
                center: v3(self.center.unwrap_or([0.0; 3])),
                plane: self.plane,
            },
            TrajectoryKind::Helix => TrajectoryRef::Helix {
                radius: self.radius,
                v0: self.v0,
                ramp: self.ramp,
                climb: self.climb,
                center: v3(self.center.unwrap_or([0.0, 0.0, HELIX_START_HEIGHT])),
            },
            TrajectoryKind::ConstantVelocity => {
                TrajectoryRef::ConstantVelocity { velocity: v3(self.velocity), start: v3(self.start) }
            }
        }
    }
}

/// Grid bounds default to the standard sweep for the chosen parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub parallelism: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { parameter: SweepParameter::Speed, min: None, max: None, step: None, parallelism: 1 }
    }
}

impl SweepSection {
    pub fn grid(&self) -> Grid {
        let standard = match self.parameter {
            SweepParameter::LB => SweepSpec::l_b_sweep().grid,
            SweepParameter::Mass => SweepSpec::mass_sweep().grid,
            SweepParameter::Speed => SweepSpec::speed_sweep().grid,
        };
        Grid::new(
            self.min.unwrap_or(standard.min),
            self.max.unwrap_or(standard.max),
            self.step.unwrap_or(standard.step),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub decimate: Option<usize>,
    pub parallel: Option<usize>,
    pub integrator: Option<Integrator>,
}

/// Everything a run needs, validated.
#[derive(Debug, Clone, Copy)]
pub struct Resolved {
    pub model: ModelKind,
    pub params: DesignParams,
    pub gains: ControllerGains,
    pub sim: SimConfig,
    pub trajectory: TrajectoryRef,
    pub spatial_initial: SpatialState,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output.dir = Some(out.clone());
        }
        if let Some(n) = o.decimate {
            self.sim.decimate = n;
        }
        if let Some(n) = o.parallel {
            self.sweep.parallelism = n;
        }
        if let Some(i) = o.integrator {
            self.sim.integrator = i;
        }
    }

    /// Fills every defaulted optional so the echoed config is explicit.
    pub fn make_explicit(&mut self) {
        let grid = self.sweep.grid();
        self.sweep.min = Some(grid.min);
        self.sweep.max = Some(grid.max);
        self.sweep.step = Some(grid.step);
        let start = self.trajectory.build().reference(0.0);
        let init = &mut self.sim.initial;
        init.position.get_or_insert([start.p_d.x, start.p_d.y, start.p_d.z]);
        init.velocity.get_or_insert([start.v_d.x, start.v_d.y, start.v_d.z]);
        if matches!(self.trajectory.kind, TrajectoryKind::Circle | TrajectoryKind::Helix) {
            let center = match self.trajectory.build() {
                TrajectoryRef::Circle { center, .. } | TrajectoryRef::Helix { center, .. } => center,
                _ => unreachable!(),
            };
            self.trajectory.center.get_or_insert([center.x, center.y, center.z]);
        }
    }

    /// Validates the design, gains, simulation and trajectory.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        self.params.validate()?;
        self.gains.validate()?;
        let trajectory = self.trajectory.build();
        trajectory.validate()?;
        let s = &self.sim;
        let start = trajectory.reference(0.0);
        let v3 = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let p0 = s.initial.position.map(v3).unwrap_or(start.p_d);
        let v0 = s.initial.velocity.map(v3).unwrap_or(start.v_d);
        if self.model == ModelKind::Planar && self.trajectory.kind == TrajectoryKind::Circle && self.trajectory.plane != CirclePlane::Xz
        {
            return Err(ConfigError::Unsupported("planar model needs a circle in the xz plane".into()));
        }
        let sim = SimConfig {
            dt: s.dt,
            duration: s.duration,
            integrator: s.integrator,
            controller_rate_hz: s.controller_rate_hz,
            initial_state: PlanarState {
                r: Vec2::new(p0.x, p0.z),
                v: Vec2::new(v0.x, v0.z),
                theta: s.initial.pitch,
                theta_dot: s.initial.pitch_rate,
            },
            seed: s.seed,
            decimate: s.decimate,
            transient: s.transient,
            actuation: s.actuation,
            pin_pitch: s.pin_pitch,
            plant_drag: true,
            limits: s.limits,
        };
        sim.validate()?;
        if self.sweep.parallelism == 0 {
            return Err(ConfigError::Unsupported("sweep.parallelism must be >= 1".into()));
        }
        self.sweep.grid().validate()?;
        Ok(Resolved {
            model: self.model,
            params: self.params,
            gains: self.gains,
            sim,
            trajectory,
            spatial_initial: SpatialState {
                position: p0,
                velocity: v0,
                pitch: s.initial.pitch,
                roll: s.initial.roll,
                pitch_rate: s.initial.pitch_rate,
                roll_rate: s.initial.roll_rate,
            },
        })
    }

    /// Sweep definition. Sweeps run the planar circle scenario, so the
    /// trajectory must be a circle; its radius and speed become the base.
    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let r = self.resolve()?;
        if self.trajectory.kind != TrajectoryKind::Circle {
            return Err(ConfigError::Unsupported("sweeps need trajectory.kind = \"circle\"".into()));
        }
        let mut spec = SweepSpec::new(self.sweep.parameter, self.sweep.grid());
        spec.params = r.params;
        spec.gains = r.gains;
        spec.sim = r.sim;
        spec.radius = self.trajectory.radius;
        spec.speed = self.trajectory.speed;
        spec.classify = self.classify;
        spec.parallelism = self.sweep.parallelism;
        spec.validate()?;
        Ok(spec)
    }
}
