use ccik::harness::{
    export_workspace, generate_random_orientation_corpus, generate_reachable_corpus, read_case_log, read_corpus,
    run_benchmark, write_case_log, write_corpus, BenchReport, BenchSettings, Provenance, Solver,
};
use ccik::model::{forward_kinematics, ConfigClass, StructuralParams};
use ccik::workspace::{position_reachable, read_boundary_csv, read_boundary_json};
use ccik::Error;
use nalgebra::Vector3;

#[test]
fn corpus_round_trips_through_json() {
    let p = StructuralParams::default();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.json");
    let mut cases = generate_reachable_corpus(&p, ConfigClass::Ci1, 15, 4);
    cases.extend(generate_random_orientation_corpus(&p, ConfigClass::Ci2, 15, 4));
    write_corpus(&cases, &path).unwrap();
    assert_eq!(read_corpus(&path).unwrap(), cases);
}

#[test]
fn fk_targets_match_their_configuration() {
    let p = StructuralParams::default();
    for class in [ConfigClass::Ci1, ConfigClass::Ci2] {
        for case in generate_reachable_corpus(&p, class, 50, 8) {
            assert_eq!(case.provenance, Provenance::FkGenerated);
            let config = case.config.unwrap();
            assert!(config.check_limits(&p, 0.0).is_ok());
            let pose = forward_kinematics(&p, &config).unwrap();
            assert!(pose.position_error(&case.target) < 1e-12);
        }
    }
}

#[test]
fn random_orientation_positions_are_reachable() {
    let p = StructuralParams::default();
    for class in [ConfigClass::Ci1, ConfigClass::Ci2] {
        for case in generate_random_orientation_corpus(&p, class, 30, 2) {
            assert!(case.config.is_none());
            assert!(case.target.is_orthonormal(1e-12));
            assert!(position_reachable(&case.target.position, class, &p));
        }
    }
}

#[test]
fn benchmark_log_reproduces_report() {
    let p = StructuralParams::default();
    let mut corpus = generate_reachable_corpus(&p, ConfigClass::Ci2, 30, 1);
    corpus.extend(generate_random_orientation_corpus(&p, ConfigClass::Ci1, 10, 1));
    let (report, records) = run_benchmark(&corpus, &[Solver::Vsik, Solver::Dls], &p, &BenchSettings::default());
    assert_eq!(records.len(), 80);

    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    write_case_log(&records, &log).unwrap();
    let again = BenchReport::from_records(&read_case_log(&log).unwrap());
    for e in &report.entries {
        let r = again.get(e.solver, e.class).unwrap();
        assert_eq!(r.case_count, e.case_count);
        assert_eq!(r.failure_count, e.failure_count);
        assert!((r.avg_iterations - e.avg_iterations).abs() < 1e-12);
        assert!((r.success_rate - e.success_rate).abs() < 1e-12);
    }
    let vs = report.get(Solver::Vsik, ConfigClass::Ci2).unwrap();
    assert_eq!(vs.success_rate, 1.0);

    let json = dir.path().join("report.json");
    report.write_json(&json).unwrap();
    let text = std::fs::read_to_string(&json).unwrap();
    assert!(text.contains("avg_time_per_iteration"));
}

#[test]
fn workspace_export_in_both_formats() {
    let p = StructuralParams::default();
    let dir = tempfile::tempdir().unwrap();
    let position = Vector3::new(30.0, 20.0, 110.0);
    let json = dir.path().join("b.json");
    let set = export_workspace(&position, &p, ConfigClass::Ci2, &json).unwrap();
    assert!(!set.curves.is_empty());
    assert_eq!(read_boundary_json(&json).unwrap(), set);

    let csv = dir.path().join("b.csv");
    export_workspace(&position, &p, ConfigClass::Ci2, &csv).unwrap();
    let rows = read_boundary_csv(&csv).unwrap();
    assert_eq!(rows.len(), set.curves.iter().map(|c| c.points.len()).sum::<usize>());

    let far = Vector3::new(0.0, 0.0, -400.0);
    assert!(matches!(
        export_workspace(&far, &p, ConfigClass::Ci1, dir.path().join("x.csv")),
        Err(Error::NoSolution(_))
    ));
}
