//! Run metrics, stability classification and parameter sweeps.
//!
//! Every sweep point is the same scenario: the vehicle starts on a circle
//! of radius `radius` in the vertical plane, moving with the reference
//! velocity, and tracks it for `sim.duration` seconds.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::controller::ControllerGains;
use crate::model::{DesignParams, PlanarState};
use crate::sim::{SimConfig, SimLog, Simulator};
use crate::trajectory::TrajectoryRef;
use crate::Error;

/// Max/avg error summary of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunMetrics {
    pub max_velocity_error: f64,
    pub avg_velocity_error: f64,
    pub max_angular_error: f64,
    pub avg_angular_error: f64,
    pub max_position_error: f64,
    pub avg_position_error: f64,
    /// Fraction of samples with any rotor saturated.
    pub saturation_fraction: f64,
    pub samples: usize,
}

/// Streaming max/avg accumulator. Samples before `transient` are left out
/// unless the run ends before the window opens, in which case every sample
/// counts.
#[derive(Debug, Clone, Copy)]
pub struct MetricsAccumulator {
    transient: f64,
    windowed: Sums,
    all: Sums,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: usize,
    sat: usize,
    max: [f64; 3],
    sum: [f64; 3],
}

impl Sums {
    fn push(&mut self, e: [f64; 3], saturated: bool) {
        self.n += 1;
        self.sat += saturated as usize;
        for i in 0..3 {
            self.max[i] = self.max[i].max(e[i]);
            self.sum[i] += e[i];
        }
    }
}

impl MetricsAccumulator {
    pub fn new(transient: f64) -> Self {
        Self { transient, windowed: Sums::default(), all: Sums::default() }
    }

    pub fn push(&mut self, t: f64, velocity: f64, angular: f64, position: f64, saturated: bool) {
        let e = [velocity, angular, position];
        self.all.push(e, saturated);
        if t >= self.transient {
            self.windowed.push(e, saturated);
        }
    }

    pub fn finish(&self) -> RunMetrics {
        let s = if self.windowed.n > 0 { &self.windowed } else { &self.all };
        if s.n == 0 {
            return RunMetrics::default();
        }
        let n = s.n as f64;
        RunMetrics {
            max_velocity_error: s.max[0],
            avg_velocity_error: s.sum[0] / n,
            max_angular_error: s.max[1],
            avg_angular_error: s.sum[1] / n,
            max_position_error: s.max[2],
            avg_position_error: s.sum[2] / n,
            saturation_fraction: s.sat as f64 / n,
            samples: s.n,
        }
    }
}

/// Metrics over the logged records, ignoring those before `transient`.
pub fn metrics(log: &SimLog, transient: f64) -> RunMetrics {
    let mut acc = MetricsAccumulator::new(transient);
    for r in &log.records {
        acc.push(r.t, r.velocity_error, r.angular_error, r.position_error, r.command.any_saturated());
    }
    acc.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StabilityClass {
    Stable,
    SaturatedDegraded,
    Diverged,
}

impl StabilityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::SaturatedDegraded => "saturated-degraded",
            Self::Diverged => "diverged",
        }
    }
}

impl core::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for StabilityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "stable" => Ok(Self::Stable),
            "saturated-degraded" => Ok(Self::SaturatedDegraded),
            "diverged" => Ok(Self::Diverged),
            _ => Err(Error::NonFinite("unknown stability class")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ClassifyThresholds {
    /// Minimum saturated-sample fraction for `saturated-degraded`.
    pub saturation_fraction: f64,
    /// Max velocity error must exceed this multiple of the median error of
    /// the samples before the first saturation.
    pub error_ratio: f64,
    pub transient: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self { saturation_fraction: 0.05, error_ratio: 5.0, transient: 10.0 }
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) })
}

/// Labels a run. `diverged` comes straight from the log; otherwise a run is
/// `saturated-degraded` when rotors saturate often enough and the worst
/// velocity error has grown well past the error seen before the first
/// saturation (or of all unsaturated samples when the window opens saturated).
pub fn classify_stability(log: &SimLog, thresholds: &ClassifyThresholds) -> StabilityClass {
    let samples = log.records.iter().map(|r| (r.t, r.velocity_error, r.command.any_saturated()));
    classify_samples(log.diverged, samples, thresholds)
}

/// [`classify_stability`] over `(t, velocity_error, saturated)` samples.
pub fn classify_samples<I>(diverged: bool, samples: I, thresholds: &ClassifyThresholds) -> StabilityClass
where
    I: IntoIterator<Item = (f64, f64, bool)>,
{
    if diverged {
        return StabilityClass::Diverged;
    }
    let all: Vec<(f64, f64, bool)> = samples.into_iter().collect();
    let windowed: Vec<(f64, f64, bool)> = all.iter().copied().filter(|s| s.0 >= thresholds.transient).collect();
    let window = if windowed.is_empty() { all } else { windowed };
    if window.is_empty() {
        return StabilityClass::Stable;
    }
    let saturated = window.iter().filter(|s| s.2).count();
    if saturated as f64 / window.len() as f64 <= thresholds.saturation_fraction {
        return StabilityClass::Stable;
    }
    let max_error = window.iter().map(|s| s.1).fold(0.0, f64::max);
    let before = window.iter().take_while(|s| !s.2).map(|s| s.1).collect();
    let unsaturated = || window.iter().filter(|s| !s.2).map(|s| s.1).collect();
    let baseline = median(before).or_else(|| median(unsaturated())).unwrap_or(0.0);
    if max_error > thresholds.error_ratio * baseline {
        StabilityClass::SaturatedDegraded
    } else {
        StabilityClass::Stable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweepParameter {
    /// COL-to-COM distance `l_b`, m.
    LB,
    /// Vehicle mass, kg.
    Mass,
    /// Circle target speed, m/s.
    Speed,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LB => "l_b",
            Self::Mass => "mass",
            Self::Speed => "speed",
        }
    }
}

/// Inclusive, evenly spaced grid `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::NonFinite("grid bounds"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad("step", self.step, "must be > 0");
        }
        if self.max < self.min {
            return bad("max", self.max, "must be >= min");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        libm::floor((self.max - self.min) / self.step + 1e-9) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid values computed by index so that no rounding error accumulates.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Grid,
    pub params: DesignParams,
    pub gains: ControllerGains,
    pub sim: SimConfig,
    pub radius: f64,
    /// Circle speed for the `l_b` and mass sweeps.
    pub speed: f64,
    pub classify: ClassifyThresholds,
    /// Worker count for harnesses that evaluate points concurrently.
    pub parallelism: usize,
}

impl SweepSpec {
    /// Circle tracking for 100 s at `radius = 1 m` and `0.1 m/s`, logging
    /// every 10th step.
    pub fn new(parameter: SweepParameter, grid: Grid) -> Self {
        let sim = SimConfig { decimate: 10, ..SimConfig::default() };
        Self {
            parameter,
            grid,
            params: DesignParams::default(),
            gains: ControllerGains::default(),
            sim,
            radius: 1.0,
            speed: 0.1,
            classify: ClassifyThresholds::default(),
            parallelism: 1,
        }
    }

    /// L_b from 0.01 m to 1.0 m.
    pub fn l_b_sweep() -> Self {
        Self::new(SweepParameter::LB, Grid::new(0.01, 1.0, 0.01))
    }

    /// Mass from 0.05 kg to 0.1 kg.
    pub fn mass_sweep() -> Self {
        Self::new(SweepParameter::Mass, Grid::new(0.05, 0.1, 0.001))
    }

    /// Target speed from 0.01 m/s to 2.0 m/s in 0.01 m/s steps.
    pub fn speed_sweep() -> Self {
        Self::new(SweepParameter::Speed, Grid::new(0.01, 2.0, 0.01))
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.grid.validate()?;
        self.sim.validate()?;
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParameter { name: "radius", value: self.radius, reason: "must be > 0" });
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(Error::InvalidParameter { name: "speed", value: self.speed, reason: "must be > 0" });
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidParameter { name: "parallelism", value: 0.0, reason: "must be >= 1" });
        }
        Ok(())
    }

    /// Design, trajectory and config for one grid value.
    pub fn scenario(&self, value: f64) -> (DesignParams, TrajectoryRef, SimConfig) {
        let mut params = self.params;
        let mut speed = self.speed;
        match self.parameter {
            SweepParameter::LB => params.l_b = value,
            SweepParameter::Mass => params.m = value,
            SweepParameter::Speed => speed = value,
        }
        let trajectory = TrajectoryRef::circle(self.radius, speed);
        let mut sim = self.sim;
        sim.initial_state = start_on(&trajectory);
        (params, trajectory, sim)
    }
}

/// At rest in attitude, on the reference position and velocity at `t = 0`.
pub fn start_on(trajectory: &TrajectoryRef) -> PlanarState {
    let (v, r) = trajectory.reference(0.0).planar();
    PlanarState { r, v, theta: 0.0, theta_dot: 0.0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub metrics: RunMetrics,
    pub class: StabilityClass,
    /// Time of early termination, if any.
    pub diverged_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// `Err` carries the reason a grid value did not form a valid configuration.
    pub outcome: Result<PointResult, String>,
}

impl SweepPoint {
    pub fn class(&self) -> Option<StabilityClass> {
        self.outcome.as_ref().ok().map(|r| r.class)
    }

    pub fn metrics(&self) -> Option<&RunMetrics> {
        self.outcome.as_ref().ok().map(|r| &r.metrics)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
    /// Points that break the expected stability frontier.
    pub anomalies: Vec<String>,
}

impl SweepReport {
    /// First grid value whose run saturated at all.
    pub fn saturation_onset(&self) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.metrics().is_some_and(|m| m.saturation_fraction > 0.0))
            .map(|p| p.value)
    }

    /// First grid value classified diverged.
    pub fn divergence_onset(&self) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.class() == Some(StabilityClass::Diverged))
            .map(|p| p.value)
    }
}

/// Simulates one grid value. Invalid configurations become `Err` points.
pub fn evaluate_point(spec: &SweepSpec, value: f64) -> SweepPoint {
    let (params, trajectory, sim) = spec.scenario(value);
    let outcome = params
        .validate()
        .and_then(|_| Simulator::new(params, spec.gains, sim))
        .map(|simulator| {
            let log = simulator.run(&trajectory);
            PointResult {
                metrics: log.metrics,
                class: classify_stability(&log, &spec.classify),
                diverged_at: log.diverged_at,
            }
        })
        .map_err(|e| e.to_string());
    SweepPoint { value, outcome }
}

/// Orders points by value and flags frontier violations: in a speed sweep,
/// every speed above the first diverged one must diverge too.
pub fn assemble_report(spec: &SweepSpec, mut points: Vec<SweepPoint>) -> SweepReport {
    points.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut anomalies = Vec::new();
    if spec.parameter == SweepParameter::Speed {
        let mut seen_diverged = None;
        for p in &points {
            match (p.class(), seen_diverged) {
                (Some(StabilityClass::Diverged), None) => seen_diverged = Some(p.value),
                (Some(c), Some(first)) if c != StabilityClass::Diverged => anomalies.push(alloc::format!(
                    "speed {:.4} is {} although {:.4} diverged",
                    p.value,
                    c,
                    first
                )),
                _ => {}
            }
        }
    }
    SweepReport { parameter: spec.parameter, points, anomalies }
}

/// Evaluates every grid point in order on the calling thread.
pub fn sweep(spec: &SweepSpec) -> Result<SweepReport, Error> {
    spec.validate()?;
    let points = spec.grid.values().into_iter().map(|v| evaluate_point(spec, v)).collect();
    Ok(assemble_report(spec, points))
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r^2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Result of [`calibrate_drag`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Drag coefficient applied to both `d_x` and `d_z`, N s/m.
    pub drag: f64,
    /// Saturation-onset speed on the sweep grid at that drag, m/s.
    pub onset: f64,
    pub evaluations: usize,
}

/// First speed on `spec.grid` whose run saturates, by bisection over the
/// grid index (saturation is monotone in speed for this scenario).
pub fn saturation_onset_speed(spec: &SweepSpec) -> Option<f64> {
    let values = spec.grid.values();
    let saturates = |v: f64| {
        evaluate_point(spec, v)
            .metrics()
            .is_some_and(|m| m.saturation_fraction > 0.0)
    };
    if !saturates(*values.last()?) {
        return None;
    }
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    if saturates(values[0]) {
        return Some(values[0]);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if saturates(values[mid]) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(values[hi])
}

/// Searches the isotropic drag coefficient that places the speed-sweep
/// saturation onset at `target` (within `tolerance`). Onset speed falls as
/// drag grows, so the search bisects on drag within `[lo, hi]`.
pub fn calibrate_drag(base: &SweepSpec, target: f64, tolerance: f64, lo: f64, hi: f64) -> Option<Calibration> {
    let mut spec = *base;
    spec.parameter = SweepParameter::Speed;
    let mut evaluations = 0;
    let mut onset_at = |d: f64| {
        evaluations += 1;
        let mut s = spec;
        s.params.d_x = d;
        s.params.d_z = d;
        saturation_onset_speed(&s)
    };
    let (mut lo, mut hi) = (lo, hi);
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let onset = onset_at(mid)?;
        if best.is_none_or(|(_, b)| (onset - target).abs() < (b - target).abs()) {
            best = Some((mid, onset));
        }
        if (onset - target).abs() <= tolerance * 0.5 {
            break;
        }
        // lower drag pushes onset to higher speed
        if onset > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.filter(|(_, o)| (o - target).abs() <= tolerance)
        .map(|(drag, onset)| Calibration { drag, onset, evaluations })
}
