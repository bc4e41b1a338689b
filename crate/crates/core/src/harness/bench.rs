//! Head-to-head runs of the solvers over a corpus.

use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{Provenance, TestCase};
use crate::dls::{solve_dls, DlsSettings, Priority};
use crate::model::{ConfigClass, StructuralParams};
use crate::vsik::{self, IkOutcome, SolverSettings};
use crate::workspace::{solve_with_fallback, DEFAULT_SAMPLES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Vsik,
    Dls,
}

impl Solver {
    pub fn as_str(&self) -> &'static str {
        match self {
            Solver::Vsik => "vsik",
            Solver::Dls => "dls",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "vsik" => Ok(Solver::Vsik),
            "dls" => Ok(Solver::Dls),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchSettings {
    pub vsik: SolverSettings,
    pub dls: DlsSettings,
}

/// One solver run on one case; a row of the per-case log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: u64,
    pub solver: Solver,
    pub class: ConfigClass,
    pub status: String,
    pub iterations: usize,
    pub time_s: f64,
    pub pos_err_mm: f64,
    pub ori_err_rad: f64,
    /// CI-2 root used by VS-IK; empty otherwise.
    pub branch: String,
    pub success: bool,
}

/// Runs one solver on one case the way the benchmark does.
///
/// FK-generated targets are solved for the full pose. For random-orientation
/// targets VS-IK substitutes the closest reachable direction when needed,
/// DLS runs in position-first mode, and success means reaching the position.
pub fn run_case(case: &TestCase, solver: Solver, params: &StructuralParams, settings: &BenchSettings) -> (IkOutcome, f64) {
    let class = case.config_class;
    let start = Instant::now();
    let out = match (solver, case.provenance) {
        (Solver::Vsik, Provenance::FkGenerated) => vsik::solve(&case.target, class, params, &settings.vsik),
        (Solver::Vsik, Provenance::RandomOrientation) => {
            solve_with_fallback(&case.target, class, params, &settings.vsik, DEFAULT_SAMPLES)
        }
        (Solver::Dls, Provenance::FkGenerated) => {
            solve_dls(&case.target, class, params, &settings.dls, Priority::FullPose)
        }
        (Solver::Dls, Provenance::RandomOrientation) => {
            solve_dls(&case.target, class, params, &settings.dls, Priority::PositionFirst)
        }
    };
    (out, start.elapsed().as_secs_f64())
}

fn record(case: &TestCase, solver: Solver, out: &IkOutcome, time_s: f64, pos_tol: f64) -> CaseRecord {
    let success = match case.provenance {
        Provenance::FkGenerated => out.is_solved(),
        Provenance::RandomOrientation => out.position_error < pos_tol,
    };
    CaseRecord {
        id: case.id,
        solver,
        class: case.config_class,
        status: out.status.as_str().to_string(),
        iterations: out.iterations,
        time_s,
        pos_err_mm: out.position_error,
        ori_err_rad: out.orientation_error,
        branch: out.branch_used.map(|b| b.as_str().to_string()).unwrap_or_default(),
        success,
    }
}

/// Runs every solver on every case. Records are ordered by solver, then by
/// case order in `corpus`.
pub fn run_cases(
    corpus: &[TestCase],
    solvers: &[Solver],
    params: &StructuralParams,
    settings: &BenchSettings,
) -> Vec<CaseRecord> {
    let mut records = Vec::with_capacity(corpus.len() * solvers.len());
    for &solver in solvers {
        let pos_tol = match solver {
            Solver::Vsik => settings.vsik.pos_tol,
            Solver::Dls => settings.dls.pos_tol,
        };
        let rows: Vec<CaseRecord> = corpus
            .par_iter()
            .map(|case| {
                let (out, t) = run_case(case, solver, params, settings);
                record(case, solver, &out, t, pos_tol)
            })
            .collect();
        records.extend(rows);
    }
    records
}

/// Aggregates for one solver on one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub solver: Solver,
    pub class: ConfigClass,
    pub case_count: usize,
    /// Sum of per-case times (s).
    pub total_time: f64,
    pub avg_iterations: f64,
    pub avg_time_per_iteration: f64,
    pub success_rate: f64,
    pub failure_count: usize,
    /// Mean over every case that produced a configuration (mm).
    pub avg_position_error: f64,
    /// Mean over every case that produced a configuration (rad).
    pub avg_orientation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub entries: Vec<SolverStats>,
}

impl BenchReport {
    /// Aggregates a per-case log; the same rows always give the same report.
    pub fn from_records(records: &[CaseRecord]) -> Self {
        let mut keys: Vec<(Solver, ConfigClass)> = records.iter().map(|r| (r.solver, r.class)).collect();
        keys.sort_by_key(|&(s, c)| (s, c as u8));
        keys.dedup();
        let entries = keys
            .into_iter()
            .map(|(solver, class)| {
                let rows: Vec<&CaseRecord> = records
                    .iter()
                    .filter(|r| r.solver == solver && r.class == class)
                    .collect();
                let n = rows.len();
                let total_time: f64 = rows.iter().map(|r| r.time_s).sum();
                let iterations: usize = rows.iter().map(|r| r.iterations).sum();
                let failure_count = rows.iter().filter(|r| !r.success).count();
                let mean = |f: &dyn Fn(&CaseRecord) -> f64| {
                    let vals: Vec<f64> = rows.iter().map(|r| f(r)).filter(|v| v.is_finite()).collect();
                    if vals.is_empty() {
                        f64::NAN
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    }
                };
                SolverStats {
                    solver,
                    class,
                    case_count: n,
                    total_time,
                    avg_iterations: iterations as f64 / n as f64,
                    avg_time_per_iteration: if iterations > 0 {
                        total_time / iterations as f64
                    } else {
                        f64::NAN
                    },
                    success_rate: 1.0 - failure_count as f64 / n as f64,
                    failure_count,
                    avg_position_error: mean(&|r| r.pos_err_mm),
                    avg_orientation_error: mean(&|r| r.ori_err_rad),
                }
            })
            .collect();
        Self { entries }
    }

    pub fn get(&self, solver: Solver, class: ConfigClass) -> Option<&SolverStats> {
        self.entries.iter().find(|e| e.solver == solver && e.class == class)
    }

    /// Aligned-column table, one column per solver and class.
    pub fn to_table(&self) -> String {
        let header: Vec<String> = self
            .entries
            .iter()
            .map(|e| format!("{} {}", e.solver.as_str().to_uppercase(), e.class.to_string().to_uppercase()))
            .collect();
        let rows: [(&str, Box<dyn Fn(&SolverStats) -> String>); 8] = [
            ("Cases", Box::new(|e| e.case_count.to_string())),
            ("Execution time (s)", Box::new(|e| format!("{:.4}", e.total_time))),
            ("Avg. iterations", Box::new(|e| format!("{:.2}", e.avg_iterations))),
            ("Time per iteration (s)", Box::new(|e| format!("{:.3e}", e.avg_time_per_iteration))),
            ("Success rate", Box::new(|e| format!("{:.2}%", 100.0 * e.success_rate))),
            ("Failure count", Box::new(|e| e.failure_count.to_string())),
            ("Avg. position error (mm)", Box::new(|e| format!("{:.5}", e.avg_position_error))),
            ("Avg. orientation error (rad)", Box::new(|e| format!("{:.4}", e.avg_orientation_error))),
        ];
        let label_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let cells: Vec<Vec<String>> = rows.iter().map(|(_, f)| self.entries.iter().map(|e| f(e)).collect()).collect();
        let col_w: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{:label_w$}", "");
        for (h, w) in header.iter().zip(&col_w) {
            let _ = write!(out, "  {h:>w$}");
        }
        out.push('\n');
        for ((label, _), row) in rows.iter().zip(&cells) {
            let _ = write!(out, "{label:label_w$}");
            for (v, w) in row.iter().zip(&col_w) {
                let _ = write!(out, "  {v:>w$}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs the benchmark and aggregates it.
pub fn run_benchmark(
    corpus: &[TestCase],
    solvers: &[Solver],
    params: &StructuralParams,
    settings: &BenchSettings,
) -> (BenchReport, Vec<CaseRecord>) {
    let records = run_cases(corpus, solvers, params, settings);
    (BenchReport::from_records(&records), records)
}

pub fn write_case_log(records: &[CaseRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_case_log(path: impl AsRef<Path>) -> Result<Vec<CaseRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.into(),
            message: format!("{other:?}"),
        },
    }
}
