//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line to
//! stdout (written directly, so it shows without `--nocapture`); the test
//! fails if any criterion fails.
//!
//! Everything runs in one test so that the timing comparison is not disturbed
//! by other tests sharing the CPU.

use std::f64::consts::PI;
use std::io::Write;

use ccik::dls::{numerical_jacobian, solve_dls, DlsSettings, Priority};
use ccik::harness::{
    generate_random_orientation_corpus, generate_reachable_corpus, random_config, run_benchmark, BenchReport,
    BenchSettings, Solver, TestCase,
};
use ccik::model::{forward_kinematics, minimal_rotation, virtual_length, Config, ConfigClass, Pose, StructuralParams};
use ccik::vsik::{self, SolverSettings};
use ccik::workspace::{boundary_set, solve_with_fallback, BoundaryKind, DexterousRegion, SymmetryFrame, DEFAULT_SAMPLES};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLASSES: [ConfigClass; 2] = [ConfigClass::Ci1, ConfigClass::Ci2];
const CORPUS_SIZE: usize = 10_000;
const SEED: u64 = 7;

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(n: usize, name: &str, v: &Verdict) {
    let mut out = std::io::stdout();
    let tag = if v.pass { "PASS" } else { "FAIL" };
    writeln!(out, "[{tag}] criterion {n}: {name}: {}", v.detail).unwrap();
    out.flush().unwrap();
}

fn pose_pointing(position: Vector3<f64>, direction: &Vector3<f64>) -> Pose {
    Pose::new(position, minimal_rotation(&Vector3::z(), direction) * Matrix3::identity())
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

fn roundtrip(report: &BenchReport, records_ok: &[(ConfigClass, usize, usize)]) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for &(class, solved, total) in records_ok {
        let s = report.get(Solver::Vsik, class).unwrap();
        pass &= solved == total;
        detail.push(format!("{class} {solved}/{total} within 0.01 mm / 0.01 rad in {:.2} s", s.total_time));
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

fn iteration_economy(report: &BenchReport) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for class in CLASSES {
        let s = report.get(Solver::Vsik, class).unwrap();
        pass &= s.avg_iterations <= 20.0;
        detail.push(format!("{class} avg {:.2} iterations", s.avg_iterations));
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

fn baseline_ordering(report: &BenchReport) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for class in CLASSES {
        let v = report.get(Solver::Vsik, class).unwrap();
        let d = report.get(Solver::Dls, class).unwrap();
        let speedup = d.avg_time_per_iteration / v.avg_time_per_iteration;
        pass &= (0.9..=1.0).contains(&d.success_rate) && d.success_rate <= v.success_rate && speedup > 2.0;
        detail.push(format!(
            "{class} DLS {:.2}% vs VS-IK {:.2}%, per-iteration {:.2e} s vs {:.2e} s ({speedup:.1}x)",
            100.0 * d.success_rate,
            100.0 * v.success_rate,
            d.avg_time_per_iteration,
            v.avg_time_per_iteration,
        ));
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

fn random_orientation(report: &BenchReport) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for class in CLASSES {
        let v = report.get(Solver::Vsik, class).unwrap();
        let d = report.get(Solver::Dls, class).unwrap();
        pass &= v.success_rate == 1.0
            && v.avg_position_error < 0.01
            && v.avg_orientation_error <= d.avg_orientation_error;
        detail.push(format!(
            "{class} VS-IK position success {:.2}%, avg pos {:.2e} mm, avg ori {:.4} rad vs DLS {:.4} rad",
            100.0 * v.success_rate,
            v.avg_position_error,
            v.avg_orientation_error,
            d.avg_orientation_error,
        ));
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(-PI..PI);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

fn boundary_solver_consistency(params: &StructuralParams) -> Verdict {
    const POSITIONS: usize = 200;
    const DIRECTIONS: usize = 500;
    const BAND: f64 = 0.01;
    let settings = SolverSettings::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for class in CLASSES {
        let positions = generate_random_orientation_corpus(params, class, POSITIONS, SEED + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
        let (mut agree, mut counted, mut excluded) = (0usize, 0usize, 0usize);
        for case in &positions {
            let p = case.target.position;
            let region = DexterousRegion::compute(&p, class, params, DEFAULT_SAMPLES);
            let frame = SymmetryFrame::for_position(&p);
            for _ in 0..DIRECTIONS {
                let d = random_unit(&mut rng);
                let s = frame.to_frame(&d);
                if region.distance_to_boundary(s.x, s.z) < BAND {
                    excluded += 1;
                    continue;
                }
                let inside = region.contains(s.x, s.z);
                let solved = vsik::solve(&pose_pointing(p, &d), class, params, &settings).is_solved();
                counted += 1;
                agree += usize::from(inside == solved);
            }
        }
        let rate = agree as f64 / counted as f64;
        pass &= rate >= 0.99;
        detail.push(format!(
            "{class} {:.3}% agreement on {counted} directions ({excluded} in the boundary band)",
            100.0 * rate
        ));
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

/// Deviation of the variable that `kind` holds at its limit.
fn limit_deviation(kind: BoundaryKind, config: &Config, p: &StructuralParams) -> f64 {
    match (kind, config) {
        (BoundaryKind::TypeI1, Config::Ci1(q)) => (q.theta2 - p.theta2_max).abs(),
        (BoundaryKind::TypeI2, Config::Ci1(q)) => (q.theta1 - p.theta1_max).abs(),
        (BoundaryKind::TypeI3, Config::Ci1(q)) => (q.l1 - p.r1_min * q.theta1).abs(),
        (BoundaryKind::TypeI4, Config::Ci1(q)) => (q.l1 - p.l10).abs(),
        (BoundaryKind::TypeI1, Config::Ci2(q)) => (q.theta1 - p.theta1_max).abs(),
        (BoundaryKind::TypeI2, Config::Ci2(q)) => (q.theta2 - p.theta2_max).abs(),
        (BoundaryKind::TypeI3, Config::Ci2(q)) => q.ls.abs(),
        (BoundaryKind::TypeI4, Config::Ci2(q)) => (q.ls - p.ls_max).abs(),
        _ => unreachable!("not a type-I boundary"),
    }
}

fn boundary_exactness(default: &StructuralParams) -> Verdict {
    const POSITIONS: usize = 30;
    const SAMPLES: usize = 100;
    // With the default parameters r1_min·θ1max equals L10 and the θ1 = θ1max
    // boundary of CI-1 shrinks to a point, so a smaller r1_min is run as well.
    let small_radius = StructuralParams {
        r1_min: 20.0,
        ..*default
    };
    let settings = SolverSettings::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for class in CLASSES {
        // kind -> (points, within 1e-3, worst deviation)
        let mut stats = [(0usize, 0usize, 0.0f64); 4];
        let kinds = [BoundaryKind::TypeI1, BoundaryKind::TypeI2, BoundaryKind::TypeI3, BoundaryKind::TypeI4];
        for (run, params) in [default, &small_radius].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10 + run as u64);
            for _ in 0..POSITIONS {
                let c = random_config(&mut rng, params, class);
                let pos = forward_kinematics(params, &c).unwrap().position;
                let set = boundary_set(&pos, class, params, SAMPLES);
                let frame = SymmetryFrame::for_position(&pos);
                for curve in set.curves.iter().filter(|c| c.kind.is_type_one()) {
                    let k = kinds.iter().position(|&k| k == curve.kind).unwrap();
                    for b in curve.points.iter().step_by(7) {
                        let pose = pose_pointing(pos, &frame.lift(b.a_sx, b.a_sz, 1.0));
                        let hint = match class {
                            ConfigClass::Ci1 => b.theta2,
                            ConfigClass::Ci2 => b.theta1,
                        };
                        let out = vsik::solve_with_hint(&pose, class, params, &settings, Some(hint));
                        let dev = out
                            .config
                            .map_or(f64::INFINITY, |cfg| limit_deviation(curve.kind, &cfg, params));
                        stats[k].0 += 1;
                        stats[k].1 += usize::from(dev <= 1e-3);
                        stats[k].2 = stats[k].2.max(dev);
                    }
                }
            }
        }
        for (kind, (n, ok, worst)) in kinds.iter().zip(stats) {
            pass &= n > 0 && ok == n;
            detail.push(format!("{class} {} {ok}/{n} (worst {worst:.1e})", kind.as_str()));
        }
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

/// Nearly uniform points on the unit sphere with spacing close to `resolution`.
fn fibonacci_sphere(resolution: f64) -> Vec<Vector3<f64>> {
    let n = (4.0 * PI / (resolution * resolution)).ceil() as usize;
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

fn closest_direction_optimality(params: &StructuralParams, corpora: &[(ConfigClass, Vec<TestCase>)]) -> Verdict {
    const CASES: usize = 100;
    let resolution = 0.5f64.to_radians();
    let grid = fibonacci_sphere(resolution);
    let settings = SolverSettings::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for (class, corpus) in corpora {
        let class = *class;
        let (mut checked, mut ok, mut worst_gap) = (0usize, 0usize, f64::NEG_INFINITY);
        for case in corpus {
            if checked == CASES {
                break;
            }
            let target = &case.target;
            if vsik::solve(target, class, params, &settings).is_solved() {
                continue;
            }
            checked += 1;
            let out = solve_with_fallback(target, class, params, &settings, DEFAULT_SAMPLES);
            let Some(sub) = out.substitute_direction else {
                continue;
            };
            let a = target.approach();
            let fallback = angle_between(&a, &Vector3::from(sub));
            // Only grid directions closer than `fallback - resolution` could
            // beat the fallback by more than the grid resolution; check them
            // nearest first.
            let cap = fallback - resolution;
            let mut near: Vec<(f64, &Vector3<f64>)> = grid
                .iter()
                .map(|d| (angle_between(&a, d), d))
                .filter(|&(ang, _)| ang < cap)
                .collect();
            near.sort_by(|x, y| x.0.total_cmp(&y.0));
            let best = near
                .iter()
                .find(|(_, d)| vsik::solve(&pose_pointing(target.position, d), class, params, &settings).is_solved())
                .map(|&(ang, _)| ang);
            match best {
                None => ok += 1,
                Some(b) => worst_gap = worst_gap.max(fallback - b - resolution),
            }
        }
        pass &= checked == CASES && ok == CASES;
        detail.push(if ok == checked {
            format!("{class} {ok}/{checked} fallbacks within the grid resolution of the brute-force best")
        } else {
            format!("{class} {ok}/{checked} optimal, worst excess {worst_gap:.2e} rad")
        });
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

fn failure_mode(params: &StructuralParams) -> Verdict {
    // On-axis targets above the straight robot that the straight start
    // configuration cannot reach by bending: DLS retracts the length variable
    // to its lower limit and stalls there.
    let cases = [(ConfigClass::Ci1, 95.0), (ConfigClass::Ci2, 120.0)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (class, z) in cases {
        let target = Pose::new(Vector3::new(0.0, 0.0, z), Matrix3::identity());
        let dls = solve_dls(&target, class, params, &DlsSettings::default(), Priority::PositionFirst);
        let length = dls.config.map(|c| match c {
            Config::Ci1(q) => q.l1,
            Config::Ci2(q) => q.ls,
        });
        let vs = solve_with_fallback(&target, class, params, &SolverSettings::default(), DEFAULT_SAMPLES);
        let stalled_at_zero = length.is_some_and(|l| l.abs() < 1e-3);
        pass &= stalled_at_zero && dls.position_error > 1.0 && vs.position_error < 0.01;
        detail.push(format!(
            "{class} target z={z}: DLS pos {:.3} mm with length {:.2e} mm, VS-IK pos {:.1e} mm",
            dls.position_error,
            length.unwrap_or(f64::NAN),
            vs.position_error,
        ));
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

/// World-frame twist Jacobian by Richardson-extrapolated central differences.
fn richardson_jacobian(config: &Config, params: &StructuralParams, h: f64) -> [[f64; 6]; 6] {
    let class = config.class();
    let q = config.to_array();
    let pose = forward_kinematics(params, config).unwrap();
    let central = |j: usize, h: f64| -> [f64; 6] {
        let (mut qp, mut qm) = (q, q);
        qp[j] += h;
        qm[j] -= h;
        let a = forward_kinematics(params, &Config::from_array(class, qp)).unwrap();
        let b = forward_kinematics(params, &Config::from_array(class, qm)).unwrap();
        let dp = (a.position - b.position) / (2.0 * h);
        // Skew part of dR/dq · Rᵀ is the angular velocity.
        let w = (a.rotation - b.rotation) / (2.0 * h) * pose.rotation.transpose();
        [dp.x, dp.y, dp.z, 0.5 * (w[(2, 1)] - w[(1, 2)]), 0.5 * (w[(0, 2)] - w[(2, 0)]), 0.5 * (w[(1, 0)] - w[(0, 1)])]
    };
    let mut jac = [[0.0; 6]; 6];
    for j in 0..6 {
        let (coarse, fine) = (central(j, h), central(j, h / 2.0));
        for i in 0..6 {
            jac[i][j] = (4.0 * fine[i] - coarse[i]) / 3.0;
        }
    }
    jac
}

fn numerical_hygiene(params: &StructuralParams) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 20);
    let mut worst_jac = 0.0f64;
    let mut worst_ortho = 0.0f64;
    for class in CLASSES {
        for _ in 0..300 {
            let mut c = random_config(&mut rng, params, class);
            let fk = forward_kinematics(params, &c).unwrap();
            worst_ortho = worst_ortho.max((fk.rotation.transpose() * fk.rotation - Matrix3::identity()).amax());
            worst_ortho = worst_ortho.max((fk.rotation.determinant() - 1.0).abs());
            // Keep the difference stencils inside the length and bending ranges.
            match &mut c {
                Config::Ci1(q) => {
                    q.theta1 = q.theta1.clamp(0.05, params.theta1_max - 0.05);
                    q.theta2 = q.theta2.max(0.05);
                    q.l1 = q.l1.clamp(params.r1_min * q.theta1 + 0.05, params.l10 - 0.05);
                }
                Config::Ci2(q) => {
                    q.theta1 = q.theta1.max(0.05);
                    q.theta2 = q.theta2.max(0.05);
                    q.ls = q.ls.clamp(0.05, params.ls_max - 0.05);
                }
            }
            let jac = numerical_jacobian(&c, params);
            let oracle = richardson_jacobian(&c, params, 1e-3);
            let (mut diff, mut norm) = (0.0f64, 0.0f64);
            for i in 0..6 {
                for j in 0..6 {
                    diff += (jac[(i, j)] - oracle[i][j]).powi(2);
                    norm += oracle[i][j].powi(2);
                }
            }
            worst_jac = worst_jac.max((diff / norm).sqrt());
        }
    }
    let mut worst_vl = 0.0f64;
    for length in [20.0, 40.0, 60.0] {
        let at_zero = virtual_length(length, 0.0).unwrap();
        worst_vl = worst_vl.max((at_zero - length / 2.0).abs() / (length / 2.0));
        for theta in [1e-14, 1e-10, 1e-8, 1e-6, 1e-5, 1e-4] {
            let l = virtual_length(length, theta).unwrap();
            worst_vl = worst_vl.max((l - at_zero).abs() / at_zero);
        }
    }
    Verdict {
        pass: worst_jac < 1e-4 && worst_ortho < 1e-10 && worst_vl < 1e-9,
        detail: format!(
            "Jacobian rel {worst_jac:.1e} (< 1e-4), FK orthonormality {worst_ortho:.1e} (< 1e-10), \
             virtual length near 0 rel {worst_vl:.1e} (< 1e-9)"
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let params = StructuralParams::default();
    let settings = BenchSettings::default();
    let mut verdicts: Vec<(usize, &str, Verdict)> = Vec::new();

    let mut reachable = Vec::new();
    let mut solved = Vec::new();
    for class in CLASSES {
        reachable.extend(generate_reachable_corpus(&params, class, CORPUS_SIZE, SEED));
    }
    let (report, records) = run_benchmark(&reachable, &[Solver::Vsik, Solver::Dls], &params, &settings);
    for class in CLASSES {
        let vs = records.iter().filter(|r| r.solver == Solver::Vsik && r.class == class);
        let ok = vs
            .clone()
            .filter(|r| r.success && r.pos_err_mm < 0.01 && r.ori_err_rad < 0.01)
            .count();
        solved.push((class, ok, vs.count()));
    }
    write!(std::io::stdout(), "{}", report.to_table()).unwrap();
    verdicts.push((1, "roundtrip completeness", roundtrip(&report, &solved)));
    report_last(&verdicts);
    verdicts.push((2, "iteration economy", iteration_economy(&report)));
    report_last(&verdicts);
    verdicts.push((3, "baseline ordering", baseline_ordering(&report)));
    report_last(&verdicts);

    let random: Vec<(ConfigClass, Vec<TestCase>)> = CLASSES
        .iter()
        .map(|&c| (c, generate_random_orientation_corpus(&params, c, CORPUS_SIZE, SEED)))
        .collect();
    let all: Vec<TestCase> = random.iter().flat_map(|(_, c)| c.iter().cloned()).collect();
    let (report, _) = run_benchmark(&all, &[Solver::Vsik, Solver::Dls], &params, &settings);
    write!(std::io::stdout(), "{}", report.to_table()).unwrap();
    verdicts.push((4, "random-orientation corpus", random_orientation(&report)));
    report_last(&verdicts);

    verdicts.push((5, "boundary-solver consistency", boundary_solver_consistency(&params)));
    report_last(&verdicts);
    verdicts.push((6, "type-I boundary exactness", boundary_exactness(&params)));
    report_last(&verdicts);
    verdicts.push((7, "closest-direction optimality", closest_direction_optimality(&params, &random)));
    report_last(&verdicts);
    verdicts.push((8, "failure-mode reproduction", failure_mode(&params)));
    report_last(&verdicts);
    verdicts.push((9, "numerical hygiene", numerical_hygiene(&params)));
    report_last(&verdicts);

    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.2.pass).map(|v| v.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn report_last(verdicts: &[(usize, &str, Verdict)]) {
    let (n, name, v) = verdicts.last().unwrap();
    report(*n, name, v);
}
