//! `simulate`, `sweep` and `verify`, independent of argument parsing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sblimp_core::experiments::{classify_samples, classify_stability, linear_fit, StabilityClass, SweepParameter, SweepReport};
use sblimp_core::sim::{DivergenceCause, Simulator};
use sblimp_core::spatial::SpatialSimulator;

use crate::config::{ConfigError, ModelKind, Overrides, RunConfig};
use crate::output::{self, summary_text};
use crate::parallel::sweep_parallel;
use crate::verify::{run_checks, Check};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SBLIMP_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Failure = 1,
    Diverged = 2,
    ConfigError = 3,
    VerifyFailed = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl CommandError {
    pub fn status(&self) -> ExitStatus {
        match self {
            Self::Config(_) => ExitStatus::ConfigError,
            Self::Runtime(_) => ExitStatus::Failure,
        }
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

/// Reads the file (or starts from defaults) and applies the overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(overrides);
    Ok(cfg)
}

/// `output.dir`, else `$SBLIMP_OUT/<command>`, else `sblimp-out/<command>`.
pub fn output_dir(cfg: &RunConfig, command: &str) -> PathBuf {
    if let Some(dir) = &cfg.output.dir {
        return dir.clone();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("sblimp-out"));
    root.join(command)
}

fn write_resolved(cfg: &RunConfig, dir: &Path) -> std::io::Result<()> {
    let mut explicit = cfg.clone();
    explicit.make_explicit();
    fs::write(dir.join("resolved_config.toml"), explicit.to_toml())
}

fn cause_name(c: DivergenceCause) -> &'static str {
    match c {
        DivergenceCause::NonFinite => "non-finite state",
        DivergenceCause::Speed => "speed bound exceeded",
        DivergenceCause::Angle => "angle bound exceeded",
        DivergenceCause::PositionError => "position error bound exceeded",
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub dir: PathBuf,
    pub class: StabilityClass,
    pub summary: String,
}

impl SimulateOutcome {
    pub fn status(&self) -> ExitStatus {
        match self.class {
            StabilityClass::Diverged => ExitStatus::Diverged,
            _ => ExitStatus::Success,
        }
    }
}

/// Runs one trajectory. Nothing is written unless the config resolves.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutcome, CommandError> {
    let r = cfg.resolve()?;
    let dir = output_dir(cfg, "simulate");
    let (class, summary) = match r.model {
        ModelKind::Planar => {
            let sim = Simulator::new(r.params, r.gains, r.sim).map_err(ConfigError::from)?;
            let log = sim.run(&r.trajectory);
            fs::create_dir_all(&dir)?;
            write_resolved(cfg, &dir)?;
            output::write_log_csv(fs::File::create(dir.join("log.csv"))?, &log).map_err(anyhow::Error::from)?;
            output::write_planar_trace(&dir, &log)?;
            let class = classify_stability(&log, &cfg.classify);
            (class, summary_text(class, log.diverged_at, log.cause.map(cause_name), &log.metrics))
        }
        ModelKind::Spatial => {
            let sim = SpatialSimulator::new(r.params, r.gains, r.sim, r.spatial_initial).map_err(ConfigError::from)?;
            let log = sim.run(&r.trajectory);
            fs::create_dir_all(&dir)?;
            write_resolved(cfg, &dir)?;
            output::write_spatial_log_csv(fs::File::create(dir.join("log.csv"))?, &log)
                .map_err(anyhow::Error::from)?;
            output::write_spatial_trace(&dir, &log)?;
            let samples = log.records.iter().map(|x| (x.t, x.velocity_error, x.command.any_saturated()));
            let class = classify_samples(log.diverged, samples, &cfg.classify);
            let mut s = summary_text(class, log.diverged_at, log.cause.map(cause_name), &log.metrics);
            if let Some(t) = log.diverged_at {
                let _ = writeln!(s, "declared_speed_at_divergence = {}", output::num(r.trajectory.declared_speed(t)));
            }
            (class, s)
        }
    };
    fs::write(dir.join("summary.txt"), &summary)?;
    Ok(SimulateOutcome { dir, class, summary })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub report: SweepReport,
    pub summary: String,
}

/// Least-squares fit of average velocity error against speed over the grid
/// points before the first saturating one.
pub fn pre_saturation_fit(report: &SweepReport) -> Option<(f64, f64, f64, usize)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = report
        .points
        .iter()
        .filter_map(|p| p.metrics().map(|m| (p.value, m)))
        .take_while(|(_, m)| m.saturation_fraction == 0.0)
        .map(|(v, m)| (v, m.avg_velocity_error))
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Some((slope, intercept, r2, xs.len()))
}

pub fn sweep_summary(report: &SweepReport) -> String {
    let mut s = String::new();
    let fmt = |v: Option<f64>| v.map(output::num).unwrap_or_else(|| "none".into());
    let _ = writeln!(s, "parameter = {}", report.parameter.as_str());
    let _ = writeln!(s, "points = {}", report.points.len());
    let invalid = report.points.iter().filter(|p| p.outcome.is_err()).count();
    let _ = writeln!(s, "invalid_points = {invalid}");
    for class in [StabilityClass::Stable, StabilityClass::SaturatedDegraded, StabilityClass::Diverged] {
        let n = report.points.iter().filter(|p| p.class() == Some(class)).count();
        let _ = writeln!(s, "{} = {n}", class.as_str().replace('-', "_"));
    }
    let _ = writeln!(s, "saturation_onset = {}", fmt(report.saturation_onset()));
    let _ = writeln!(s, "divergence_onset = {}", fmt(report.divergence_onset()));
    if report.parameter == SweepParameter::Speed {
        if let Some((slope, intercept, r2, n)) = pre_saturation_fit(report) {
            let _ = writeln!(s, "pre_saturation_fit_points = {n}");
            let _ = writeln!(s, "pre_saturation_slope = {}", output::num(slope));
            let _ = writeln!(s, "pre_saturation_intercept = {}", output::num(intercept));
            let _ = writeln!(s, "pre_saturation_r2 = {}", output::num(r2));
        }
    }
    for a in &report.anomalies {
        let _ = writeln!(s, "anomaly = {a}");
    }
    s
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepOutcome, CommandError> {
    let spec = cfg.sweep_spec()?;
    let dir = output_dir(cfg, "sweep");
    let report = sweep_parallel(&spec)?;
    fs::create_dir_all(&dir)?;
    write_resolved(cfg, &dir)?;
    output::write_sweep_artifacts(&dir, &report)?;
    let summary = sweep_summary(&report);
    fs::write(dir.join("summary.txt"), &summary)?;
    Ok(SweepOutcome { dir, report, summary })
}

pub fn verify(cfg: &RunConfig) -> Vec<Check> {
    run_checks(&cfg.params, &cfg.gains)
}

pub fn verify_status(checks: &[Check]) -> ExitStatus {
    if checks.iter().all(|c| c.passed) {
        ExitStatus::Success
    } else {
        ExitStatus::VerifyFailed
    }
}
