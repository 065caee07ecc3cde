//! Sweeps evaluated on a bounded rayon pool.

use rayon::prelude::*;

use sblimp_core::experiments::{assemble_report, evaluate_point, SweepReport, SweepSpec};

/// Same report as [`sblimp_core::experiments::sweep`], computed on
/// `spec.parallelism` worker threads.
pub fn sweep_parallel(spec: &SweepSpec) -> anyhow::Result<SweepReport> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.parallelism).build()?;
    let values = spec.grid.values();
    let points = pool.install(|| values.par_iter().map(|&v| evaluate_point(spec, v)).collect());
    Ok(assemble_report(spec, points))
}
