//! Corpus generation, solver benchmarks and workspace export.

mod bench;
mod corpus;

use std::path::Path;

use nalgebra::Vector3;

pub use bench::{
    read_case_log, run_benchmark, run_case, run_cases, write_case_log, BenchReport, BenchSettings, CaseRecord,
    Solver, SolverStats,
};
pub use corpus::{
    generate_random_orientation_corpus, generate_reachable_corpus, random_config, random_euler_rotation,
    read_corpus, write_corpus, Provenance, TestCase,
};

use crate::model::{ConfigClass, StructuralParams};
use crate::workspace::{position_reachable, write_boundary_set, BoundarySet, DexterousRegion, DEFAULT_SAMPLES};
use crate::{Error, Result};

/// Computes the boundaries at `position` and writes them to `path` (CSV or
/// JSON by extension).
pub fn export_workspace(
    position: &Vector3<f64>,
    params: &StructuralParams,
    class: ConfigClass,
    path: impl AsRef<Path>,
) -> Result<BoundarySet> {
    if !position_reachable(position, class, params) {
        return Err(Error::NoSolution(format!(
            "position ({}, {}, {}) is outside the {class} translational workspace",
            position.x, position.y, position.z
        )));
    }
    let set = DexterousRegion::compute(position, class, params, DEFAULT_SAMPLES).into_boundaries();
    write_boundary_set(&set, path)?;
    Ok(set)
}
