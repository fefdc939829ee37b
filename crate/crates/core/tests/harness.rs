use cosparse::harness::{
    compare_trial_rng, emit_heatmap, overlay_theory, phase_trial_rng, relative_error,
    run_phase_transition, run_tv_vs_tikhonov, trial_instance, CompareConfig, PhaseGridConfig,
    TRIAL_CSV_HEADER,
};
use cosparse::numerics::norm2;
use cosparse::solver::{solve_analysis_l1, solve_tikhonov, RecoveryProblem, SolverOptions};
use cosparse::Operator;

fn small_grid(jobs: usize) -> PhaseGridConfig {
    PhaseGridConfig {
        d: 24,
        s_values: vec![0, 2, 12, 23],
        m_values: vec![1, 6, 12, 24],
        trials: 12,
        jobs: Some(jobs),
        ..PhaseGridConfig::desk()
    }
}

#[test]
fn phase_runs_are_reproducible_across_thread_counts() {
    let a = run_phase_transition(&small_grid(1)).unwrap();
    let b = run_phase_transition(&small_grid(3)).unwrap();
    assert_eq!(a.grid, b.grid);
    assert_eq!(a.grid.to_csv(), b.grid.to_csv());
    let rows = |r: &cosparse::harness::PhaseRun| r.records.iter().map(|t| t.csv_row()).collect::<Vec<_>>();
    assert_eq!(rows(&a), rows(&b));
}

#[test]
fn phase_grid_extremes() {
    let run = run_phase_transition(&small_grid(2)).unwrap();
    let g = &run.grid;
    let s_idx = |s: usize| g.s_values.iter().position(|&v| v == s).unwrap();
    let m_at = |m: usize| g.m_values.iter().position(|&v| v == m).unwrap();
    // Square Gaussian matrices are invertible.
    for si in 0..g.s_values.len() {
        assert_eq!(g.rate(si, m_at(24)), 1.0, "s={}", g.s_values[si]);
    }
    assert!(g.rate(s_idx(0), m_at(12)) >= 0.9);
    assert!(g.rate(s_idx(23), m_at(1)) <= 0.1);
    assert_eq!(g.frontier(s_idx(0)).map(|f| f <= 12.0), Some(true));
}

#[test]
fn trial_records_cover_the_grid() {
    let cfg = small_grid(2);
    let run = run_phase_transition(&cfg).unwrap();
    let cells = cfg.s_values.len() * cfg.m_values.len();
    assert_eq!(run.records.len(), cells * cfg.trials);
    assert_eq!(run.grid.to_csv().lines().count(), cells + 1);
    assert_eq!(TRIAL_CSV_HEADER.split(',').count(), run.records[0].csv_row().split(',').count());
    let k = cfg.trials * (cfg.m_values.len() + 2) + 5;
    let rec = &run.records[k];
    assert_eq!((rec.s, rec.m, rec.trial_index), (cfg.s_values[1], cfg.m_values[2], 5));

    // The record can be regenerated from its stream alone.
    let mut rng = phase_trial_rng(cfg.base_seed, 1, 2, 5);
    let inst = trial_instance(&mut rng, cfg.d, rec.s, rec.m).unwrap();
    let op = Operator::diff1d(cfg.d).unwrap();
    let prob = RecoveryProblem::new(&inst.matrix, &inst.observations, 0.0, &op).unwrap();
    let res = solve_analysis_l1(&prob, &cfg.solver).unwrap();
    assert_eq!(relative_error(&res.x_hat, &inst.signal.x), rec.relative_error);
}

#[test]
fn heatmap_files_are_written() {
    let run = run_phase_transition(&small_grid(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_heatmap(&run.grid, &dir.path().join("phase")).unwrap();
    assert_eq!(paths.len(), 2);
    let pgm = std::fs::read(&paths[1]).unwrap();
    assert!(pgm.starts_with(b"P5"));
}

#[test]
fn overlay_theory_values() {
    let mut cfg = small_grid(1);
    cfg.d = 200;
    cfg.s_values = vec![80, 199];
    cfg.m_values = vec![200];
    cfg.trials = 1;
    let run = run_phase_transition(&cfg).unwrap();
    let rows = overlay_theory(&run.grid).unwrap();
    let want = 200.0 * (1.0 - (1.0 - 81.0f64 / 200.0).powi(2) / std::f64::consts::PI);
    assert!((rows[0].theory_m - want).abs() < 1e-9);
    assert!((rows[0].theory_m - 177.46).abs() < 0.01);
    assert!((rows[1].theory_m - 200.0).abs() < 1e-9);
}

#[test]
fn comparison_pairs_share_their_instances() {
    let cfg = CompareConfig {
        jobs: Some(2),
        ..CompareConfig::new(40, 10, 30, 4, 99)
    };
    let run = run_tv_vs_tikhonov(&cfg).unwrap();
    assert_eq!(run.pairs.len(), 4);
    for (t, pair) in run.pairs.iter().enumerate() {
        let mut rng = compare_trial_rng(cfg.base_seed, t);
        let inst = trial_instance(&mut rng, cfg.d, cfg.s, cfg.m).unwrap();
        let op = Operator::diff1d(cfg.d).unwrap();
        let prob = RecoveryProblem::new(&inst.matrix, &inst.observations, 0.0, &op).unwrap();
        let tv = solve_analysis_l1(&prob, &cfg.solver).unwrap();
        let tik = solve_tikhonov(&prob).unwrap();
        assert_eq!(pair.tv.relative_error, relative_error(&tv.x_hat, &inst.signal.x));
        assert_eq!(pair.tikhonov.relative_error, relative_error(&tik.x_hat, &inst.signal.x));
        if t == 0 {
            assert_eq!(run.first.x, inst.signal.x);
            assert_eq!(run.first.tv, tv.x_hat);
        }
    }
    assert_eq!(run.to_csv().lines().count(), 5);
    assert_eq!(run.snapshot_csv().lines().count(), 41);
}

#[test]
fn failed_solves_count_as_failures() {
    let cfg = PhaseGridConfig {
        d: 30,
        s_values: vec![5],
        m_values: vec![20],
        trials: 3,
        solver: SolverOptions { tol: 1e-8, max_iters: 1 },
        jobs: Some(1),
        ..PhaseGridConfig::desk()
    };
    let run = run_phase_transition(&cfg).unwrap();
    assert!(run.records.iter().all(|r| !r.converged && !r.success));
    assert_eq!(run.grid.rate(0, 0), 0.0);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut cfg = small_grid(1);
    cfg.s_values = vec![24];
    assert!(run_phase_transition(&cfg).is_err());
    let mut cfg = small_grid(1);
    cfg.trials = 0;
    assert!(run_phase_transition(&cfg).is_err());
    assert!(run_tv_vs_tikhonov(&CompareConfig::new(10, 10, 5, 1, 0)).is_err());
    assert!(run_tv_vs_tikhonov(&CompareConfig::new(10, 2, 0, 1, 0)).is_err());
}

#[test]
fn instances_are_consistent() {
    let inst = trial_instance(&mut compare_trial_rng(1, 0), 50, 7, 20).unwrap();
    assert_eq!(inst.signal.sparsity, 7);
    assert_eq!(inst.observations, cosparse::LinearMap::apply(&inst.matrix, &inst.signal.x));
    assert!(norm2(&inst.observations) > 0.0);
}
