use r2ch::experiments::{
    compare_nested, preset, refine_error_space, refine_error_time, run_convergence_study, run_full, symmetry_probe,
    unconditional_probe, Axis, ExperimentError, InitCondition, Setup,
};
use r2ch::grid::GridSpec;
use r2ch::scheme::{simulate, PhysParams, SolverCfg, TimeGrid, TrajectoryOptions};

fn small_setup() -> Setup {
    Setup {
        init: InitCondition::DamBreak { a: 1.0 },
        x_left: -8.0,
        length: 16.0,
        params: PhysParams::new(1.0, 1.0, 1.0, 0.01).unwrap(),
    }
}

#[test]
fn time_study_shows_second_order() {
    let s = small_setup();
    let rows = run_convergence_study(
        &s,
        Axis::Time,
        3,
        GridSpec::new(s.x_left, s.length, 64).unwrap(),
        TimeGrid::new(1.0, 4).unwrap(),
        &SolverCfg::default(),
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].ord_u.is_none() && rows[0].ord_rho.is_none());
    assert_eq!(rows[0].step, 0.25);
    for r in &rows[1..] {
        assert!((r.ord_u.unwrap() - 2.0).abs() < 0.2, "{r:?}");
        assert!((r.ord_rho.unwrap() - 2.0).abs() < 0.2, "{r:?}");
    }
}

#[test]
fn nesting_is_checked() {
    let s = small_setup();
    let cfg = SolverCfg::default();
    let tg = TimeGrid::new(0.1, 2).unwrap();
    let a = run_full(&s, GridSpec::new(-8.0, 16.0, 32).unwrap(), tg, &cfg).unwrap();
    let b = run_full(&s, GridSpec::new(-8.0, 16.0, 48).unwrap(), tg, &cfg).unwrap();
    let c = run_full(&s, GridSpec::new(-8.0, 16.0, 64).unwrap(), tg.refined(), &cfg).unwrap();
    assert!(matches!(compare_nested(&a, &b), Err(ExperimentError::Misaligned(_))));
    assert!(matches!(refine_error_space(&a, &c), Err(ExperimentError::Misaligned(_))));
    assert!(matches!(refine_error_time(&a, &c), Err(ExperimentError::Misaligned(_))));
    // ratio 2 in both directions is still a valid nesting
    let (eu, er) = compare_nested(&a, &c).unwrap();
    assert!(eu > 0.0 && er > 0.0);
    // a run against itself has no error
    assert_eq!(compare_nested(&a, &a).unwrap(), (0.0, 0.0));

    let no_fields = simulate(
        &s.init.build(GridSpec::new(-8.0, 16.0, 32).unwrap()),
        &s.params,
        &tg,
        &cfg,
        &TrajectoryOptions::default(),
    )
    .unwrap();
    assert_eq!(compare_nested(&no_fields, &a), Err(ExperimentError::NoFields));
}

#[test]
fn probe_on_a_coarse_setup() {
    let s = small_setup();
    let probe = unconditional_probe(
        &s,
        GridSpec::new(s.x_left, s.length, 16).unwrap(),
        TimeGrid::new(0.5, 5).unwrap(),
        2,
        4,
        &SolverCfg::default(),
    )
    .unwrap();
    assert_eq!(probe.errors.len(), 3);
    assert_eq!(probe.tau, 0.1);
    assert!(probe.errors[0].1 > probe.errors[2].1);
    assert!(probe.plateau.0 > 0.0);
}

#[test]
fn symmetry_probe_requires_centered_even_grid() {
    let c = preset("exA52").unwrap();
    let cfg = SolverCfg::default();
    let tg = TimeGrid::new(0.1, 2).unwrap();
    let odd = run_full(&c.setup(), GridSpec::new(-20.0, 40.0, 41).unwrap(), tg, &cfg).unwrap();
    assert!(matches!(symmetry_probe(&odd), Err(ExperimentError::Asymmetric(_))));
    let shifted = run_full(&c.setup(), GridSpec::new(-19.0, 40.0, 40).unwrap(), tg, &cfg).unwrap();
    assert!(matches!(symmetry_probe(&shifted), Err(ExperimentError::Asymmetric(_))));
    let ok = run_full(&c.setup(), GridSpec::new(-20.0, 40.0, 400).unwrap(), tg, &cfg).unwrap();
    // the only asymmetry is the tail jump across the periodic seam, 2 e^-15
    let d = symmetry_probe(&ok).unwrap();
    assert!((d - 2.0 * (-15f64).exp()).abs() < 1e-9, "{d}");
}

#[test]
fn failed_run_reports_completed_rows() {
    let s = small_setup();
    let cfg = SolverCfg {
        max_picard_iters: 2,
        ..SolverCfg::default()
    };
    let err = run_convergence_study(
        &s,
        Axis::Space,
        2,
        GridSpec::new(s.x_left, s.length, 16).unwrap(),
        TimeGrid::new(0.5, 5).unwrap(),
        &cfg,
    )
    .unwrap_err();
    match err {
        ExperimentError::Run { run: 0, completed, .. } => assert!(completed.is_empty()),
        other => panic!("{other:?}"),
    }
}
