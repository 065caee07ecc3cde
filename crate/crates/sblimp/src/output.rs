//! CSV logs, sweep reports, two-column plot data and gnuplot scripts.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use sblimp_core::experiments::{RunMetrics, StabilityClass, SweepReport};
use sblimp_core::sim::SimLog;
use sblimp_core::spatial::SpatialLog;

pub const LOG_HEADER: [&str; 16] = [
    "t", "x", "z", "theta", "vx", "vz", "theta_dot", "f1", "f2", "sat1", "sat2", "vdx", "vdz", "ex", "ez", "etheta",
];

pub const SPATIAL_LOG_HEADER: [&str; 27] = [
    "t", "x", "y", "z", "theta", "phi", "vx", "vy", "vz", "theta_dot", "phi_dot", "f1", "f2", "f3", "f4", "sat1",
    "sat2", "sat3", "sat4", "vdx", "vdy", "vdz", "ex", "ey", "ez", "etheta", "ephi",
];

pub const SWEEP_HEADER: [&str; 9] =
    ["param_value", "max_verr", "avg_verr", "max_aerr", "avg_aerr", "max_perr", "avg_perr", "sat_frac", "class"];

/// Nine significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_log_csv<W: Write>(w: W, log: &SimLog) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(LOG_HEADER)?;
    for r in &log.records {
        let s = &r.state;
        let vd = r.setpoint.v_d;
        let e = vd - s.v;
        let c = &r.command;
        let row = [
            num(r.t),
            num(s.r.x),
            num(s.r.y),
            num(s.theta),
            num(s.v.x),
            num(s.v.y),
            num(s.theta_dot),
            num(c.thrust.x),
            num(c.thrust.y),
            flag(c.saturated[0]).into(),
            flag(c.saturated[1]).into(),
            num(vd.x),
            num(vd.y),
            num(e.x),
            num(e.y),
            num(s.theta),
        ];
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_spatial_log_csv<W: Write>(w: W, log: &SpatialLog) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SPATIAL_LOG_HEADER)?;
    for r in &log.records {
        let s = &r.state;
        let (p, v, vd) = (s.position, s.velocity, r.setpoint);
        let e = vd - v;
        let c = &r.command;
        let mut row = vec![num(r.t), num(p.x), num(p.y), num(p.z), num(s.pitch), num(s.roll)];
        row.extend([v.x, v.y, v.z, s.pitch_rate, s.roll_rate].map(num));
        row.extend(c.thrust.iter().map(|&f| num(f)));
        row.extend(c.saturated.map(|b| flag(b).to_string()));
        row.extend([vd.x, vd.y, vd.z, e.x, e.y, e.z, s.pitch, s.roll].map(num));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, report: &SweepReport) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for p in &report.points {
        let mut row = vec![num(p.value)];
        match &p.outcome {
            Ok(r) => {
                let m = &r.metrics;
                row.extend(
                    [
                        m.max_velocity_error,
                        m.avg_velocity_error,
                        m.max_angular_error,
                        m.avg_angular_error,
                        m.max_position_error,
                        m.avg_position_error,
                        m.saturation_fraction,
                    ]
                    .map(num),
                );
                row.push(r.class.to_string());
            }
            Err(_) => {
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push("invalid-config".into());
            }
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Whitespace-separated two-column data file.
pub fn write_columns<W: Write>(mut w: W, header: &str, rows: impl IntoIterator<Item = (f64, f64)>) -> io::Result<()> {
    writeln!(w, "# {header}")?;
    for (a, b) in rows {
        writeln!(w, "{} {}", num(a), num(b))?;
    }
    Ok(())
}

/// Metric columns of the sweep report, by file stem.
pub const SWEEP_METRICS: [(&str, fn(&RunMetrics) -> f64); 7] = [
    ("max_verr", |m| m.max_velocity_error),
    ("avg_verr", |m| m.avg_velocity_error),
    ("max_aerr", |m| m.max_angular_error),
    ("avg_aerr", |m| m.avg_angular_error),
    ("max_perr", |m| m.max_position_error),
    ("avg_perr", |m| m.avg_position_error),
    ("sat_frac", |m| m.saturation_fraction),
];

/// `sweep.csv`, one `<metric>.dat` per metric and `sweep.gp`.
pub fn write_sweep_artifacts(dir: &Path, report: &SweepReport) -> io::Result<()> {
    write_sweep_csv(fs::File::create(dir.join("sweep.csv"))?, report).map_err(io::Error::other)?;
    let name = report.parameter.as_str();
    for (stem, get) in SWEEP_METRICS {
        let rows = report.points.iter().filter_map(|p| p.metrics().map(|m| (p.value, get(m))));
        write_columns(fs::File::create(dir.join(format!("{stem}.dat")))?, &format!("{name} {stem}"), rows)?;
    }
    let script = format!(
        "set terminal pngcairo size 900,600\n\
         set output 'sweep.png'\n\
         set xlabel '{name}'\n\
         set ylabel 'velocity error [m/s]'\n\
         set y2label 'saturation fraction'\n\
         set y2tics\n\
         set ytics nomirror\n\
         plot 'max_verr.dat' using 1:2 with linespoints title 'max', \\\n\
         \x20    'avg_verr.dat' using 1:2 with linespoints title 'avg', \\\n\
         \x20    'sat_frac.dat' using 1:2 axes x1y2 with lines title 'saturation'\n"
    );
    fs::write(dir.join("sweep.gp"), script)
}

/// Planar trace and reference (`x z`), plus a gnuplot script.
pub fn write_planar_trace(dir: &Path, log: &SimLog) -> io::Result<()> {
    let rows = log.records.iter().map(|r| (r.state.r.x, r.state.r.y));
    write_columns(fs::File::create(dir.join("trace.dat"))?, "x z", rows)?;
    let rows = log.records.iter().map(|r| (r.reference_position.x, r.reference_position.y));
    write_columns(fs::File::create(dir.join("reference.dat"))?, "x z", rows)?;
    fs::write(dir.join("trace.gp"), trace_script("x [m]", "z [m]"))
}

/// Spatial top view (`x y`) and height over time (`t z`), plus a gnuplot script.
pub fn write_spatial_trace(dir: &Path, log: &SpatialLog) -> io::Result<()> {
    let rows = log.records.iter().map(|r| (r.state.position.x, r.state.position.y));
    write_columns(fs::File::create(dir.join("trace.dat"))?, "x y", rows)?;
    let rows = log.records.iter().map(|r| (r.reference_position.x, r.reference_position.y));
    write_columns(fs::File::create(dir.join("reference.dat"))?, "x y", rows)?;
    let rows = log.records.iter().map(|r| (r.t, r.state.position.z));
    write_columns(fs::File::create(dir.join("height.dat"))?, "t z", rows)?;
    fs::write(dir.join("trace.gp"), trace_script("x [m]", "y [m]"))
}

fn trace_script(xlabel: &str, ylabel: &str) -> String {
    format!(
        "set terminal pngcairo size 700,700\n\
         set output 'trace.png'\n\
         set size ratio -1\n\
         set xlabel '{xlabel}'\n\
         set ylabel '{ylabel}'\n\
         plot 'reference.dat' using 1:2 with lines title 'reference', \\\n\
         \x20    'trace.dat' using 1:2 with lines title 'vehicle'\n"
    )
}

/// `key = value` run summary.
pub fn summary_text(class: StabilityClass, diverged_at: Option<f64>, cause: Option<&str>, m: &RunMetrics) -> String {
    let mut s = String::new();
    s.push_str(&format!("class = {class}\n"));
    s.push_str(&format!("diverged = {}\n", class == StabilityClass::Diverged));
    if let Some(t) = diverged_at {
        s.push_str(&format!("diverged_at = {}\n", num(t)));
    }
    if let Some(c) = cause {
        s.push_str(&format!("cause = {c}\n"));
    }
    for (key, value) in [
        ("max_velocity_error", m.max_velocity_error),
        ("avg_velocity_error", m.avg_velocity_error),
        ("max_angular_error", m.max_angular_error),
        ("avg_angular_error", m.avg_angular_error),
        ("max_position_error", m.max_position_error),
        ("avg_position_error", m.avg_position_error),
        ("saturation_fraction", m.saturation_fraction),
    ] {
        s.push_str(&format!("{key} = {}\n", num(value)));
    }
    s.push_str(&format!("samples = {}\n", m.samples));
    s
}
