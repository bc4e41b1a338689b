use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ccik::dls::{solve_dls, DlsSettings, Priority};
use ccik::harness::{
    export_workspace, generate_random_orientation_corpus, generate_reachable_corpus, read_corpus, run_benchmark,
    write_case_log, write_corpus, BenchSettings, Solver,
};
use ccik::vsik::{self, SolverSettings};
use ccik::workspace::{solve_with_fallback, DEFAULT_SAMPLES};
use ccik::{ConfigClass, Pose, StructuralParams};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

#[derive(Parser)]
#[command(name = "ccik", version, about = "Continuum-robot inverse kinematics toolkit")]
struct Cli {
    /// Structural parameters as a `key = value` file; defaults are used otherwise.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Forward kinematics of random configurations.
    Reachable,
    /// Reachable positions with random orientations.
    RandomOrientation,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorityArg {
    FullPose,
    PositionFirst,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test corpus.
    Gen {
        #[arg(long)]
        class: ConfigClass,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Reachable)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one target and print the outcome as JSON.
    Solve {
        /// Pose as JSON (`{"position": [..], "rotation": [[..], ..]}`) or a path to such a file.
        #[arg(long)]
        target: String,
        #[arg(long)]
        class: ConfigClass,
        #[arg(long, default_value = "vsik")]
        solver: Solver,
        /// VS-IK: substitute the closest reachable direction when the orientation is unreachable.
        #[arg(long)]
        fallback: bool,
        /// DLS weighting of position against orientation.
        #[arg(long, value_enum, default_value_t = PriorityArg::FullPose)]
        priority: PriorityArg,
    },
    /// Run solvers over a corpus and print the summary table.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "vsik,dls")]
        solvers: Vec<Solver>,
        /// Aggregated statistics (JSON).
        #[arg(long)]
        out_report: Option<PathBuf>,
        /// Per-case log (CSV).
        #[arg(long)]
        out_log: Option<PathBuf>,
    },
    /// Compute the dexterous-workspace boundaries at a position.
    Workspace {
        /// Position as `x,y,z` in mm.
        #[arg(long, value_parser = parse_position, allow_hyphen_values = true)]
        position: Vector3<f64>,
        #[arg(long)]
        class: ConfigClass,
        /// Output file; `.json` writes the full set, anything else CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_position(s: &str) -> std::result::Result<Vector3<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("`{c}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, z] => Ok(Vector3::new(x, y, z)),
        _ => Err(format!("expected three comma-separated values, got {}", v.len())),
    }
}

fn read_target(arg: &str) -> Result<Pose> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading target {arg}"))?
    };
    serde_json::from_str(&text).context("parsing target pose")
}

fn run(cli: Cli) -> Result<()> {
    let params = match &cli.params {
        Some(path) => StructuralParams::load(path)?,
        None => StructuralParams::default(),
    };
    match cli.command {
        Command::Gen {
            class,
            n,
            seed,
            mode,
            out,
        } => {
            let corpus = match mode {
                Mode::Reachable => generate_reachable_corpus(&params, class, n, seed),
                Mode::RandomOrientation => generate_random_orientation_corpus(&params, class, n, seed),
            };
            write_corpus(&corpus, &out)?;
            println!("wrote {} cases to {}", corpus.len(), out.display());
        }
        Command::Solve {
            target,
            class,
            solver,
            fallback,
            priority,
        } => {
            let target = read_target(&target)?;
            let out = match solver {
                Solver::Vsik if fallback => {
                    solve_with_fallback(&target, class, &params, &SolverSettings::default(), DEFAULT_SAMPLES)
                }
                Solver::Vsik => vsik::solve(&target, class, &params, &SolverSettings::default()),
                Solver::Dls => {
                    let priority = match priority {
                        PriorityArg::FullPose => Priority::FullPose,
                        PriorityArg::PositionFirst => Priority::PositionFirst,
                    };
                    solve_dls(&target, class, &params, &DlsSettings::default(), priority)
                }
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Bench {
            corpus,
            solvers,
            out_report,
            out_log,
        } => {
            let cases = read_corpus(&corpus)?;
            if solvers.is_empty() {
                bail!("no solvers given");
            }
            let (report, records) = run_benchmark(&cases, &solvers, &params, &BenchSettings::default());
            print!("{}", report.to_table());
            if let Some(path) = out_report {
                report.write_json(&path)?;
            }
            if let Some(path) = out_log {
                write_case_log(&records, &path)?;
            }
        }
        Command::Workspace { position, class, out } => match export_workspace(&position, &params, class, &out) {
            Ok(set) => print_summary(&set, &out),
            // An unreachable position is a result, not a usage error.
            Err(ccik::Error::NoSolution(msg)) => println!("{msg}"),
            Err(e) => return Err(e.into()),
        },
    }
    Ok(())
}

fn print_summary(set: &ccik::workspace::BoundarySet, out: &Path) {
    let mut kinds: Vec<&str> = set.curves.iter().map(|c| c.kind.as_str()).collect();
    kinds.sort();
    kinds.dedup();
    println!(
        "{} curves ({}){}; wrote {}",
        set.curves.len(),
        kinds.join(", "),
        if set.disconnected { ", disconnected region" } else { "" },
        out.display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
