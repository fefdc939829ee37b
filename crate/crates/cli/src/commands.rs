use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cosparse::bounds::{
    figure1_curves, frame_bound, tv1d_bound, tv2d_bound, BoundQuery, BoundReport,
};
use cosparse::geometry::{width_upper_mc_with, SubdifferentialSpec, WidthOptions, WIDTH_CSV_HEADER};
use cosparse::harness::{
    emit_heatmap, gen_cosparse_frame_signal, gen_gradient_sparse_signal, overlay_theory,
    relative_error, run_phase_transition, run_tv_vs_tikhonov, svg_line_plot, write_text,
    CompareConfig, PhaseGridConfig, PlotSeries, RunManifest, DEFAULT_SEED, OVERLAY_CSV_HEADER,
    TRIAL_CSV_HEADER,
};
use cosparse::io::{read_matrix, read_vector, write_vector};
use cosparse::operators::random_unit_frame;
use cosparse::solver::{solve_analysis_l1, solve_tikhonov, RecoveryProblem, SolverOptions};
use cosparse::{LinearMap, Matrix, Operator, SeededRng};
use serde::Serialize;

use crate::config::{Method, OpArg, Params, Preset};
use crate::CliError;

const RECOVER_STREAM: u64 = 11;
const WIDTH_STREAM: u64 = 12;
const FRAME_STREAM: u64 = 13;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn seed(p: &Params) -> u64 {
    p.seed.unwrap_or(DEFAULT_SEED)
}

fn solver_options(p: &Params) -> Result<SolverOptions<f64>, CliError> {
    let mut opts = SolverOptions::default();
    if let Some(tol) = p.tol {
        if !(tol > 0.0) {
            return Err(usage("--tol must be positive"));
        }
        opts.tol = tol;
    }
    if let Some(n) = p.max_iters {
        if n == 0 {
            return Err(usage("--max-iters must be positive"));
        }
        opts.max_iters = n;
    }
    Ok(opts)
}

/// Creates the output directory, refusing a non-empty one without `--force`.
fn prepare_out(p: &Params) -> Result<PathBuf, CliError> {
    let dir = p.out.clone().ok_or_else(|| usage("this command needs --out DIR"))?;
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Io(format!("{} exists and is not a directory", dir.display())));
        }
        let non_empty = fs::read_dir(&dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
            .next()
            .is_some();
        if non_empty && !p.force.unwrap_or(false) {
            return Err(usage(format!(
                "output directory {} is not empty; pass --force to write into it",
                dir.display()
            )));
        }
    } else {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    Ok(dir)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn finish<P: Serialize>(
    dir: &Path,
    command: &str,
    parameters: &P,
    base_seed: Option<u64>,
    artifacts: &[PathBuf],
    started: Instant,
    trial_time_secs: Option<f64>,
) -> Result<(), CliError> {
    let names = artifacts.iter().map(|a| file_name(a)).collect();
    let manifest = RunManifest::new(
        command,
        parameters,
        base_seed,
        names,
        started.elapsed().as_secs_f64(),
        trial_time_secs,
    )?;
    let path = manifest.write(dir)?;
    for a in artifacts.iter().chain(std::iter::once(&path)) {
        println!("wrote {}", a.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct BoundParams {
    op: OpArg,
    d: usize,
    p: Option<usize>,
    side: Option<usize>,
    s: usize,
    eps: f64,
    tau: f64,
    unit_tight: bool,
    seed: Option<u64>,
}

/// Bound evaluator for one operator setting, as a function of sparsity.
struct BoundSetting {
    op: OpArg,
    d: usize,
    side: Option<usize>,
    p: Option<usize>,
    /// Upper frame bound, for frames.
    upper: f64,
    max_s: usize,
}

impl BoundSetting {
    fn evaluate(&self, s: usize, q: &BoundQuery) -> Result<BoundReport, CliError> {
        if s > self.max_s {
            return Err(usage(format!("sparsity {s} exceeds the maximum {}", self.max_s)));
        }
        Ok(match self.op {
            OpArg::Diff1d => tv1d_bound(self.d, s, q)?,
            OpArg::Diff2d => tv2d_bound(self.side.expect("side set for diff2d"), s, q)?,
            OpArg::Frame => {
                let p = self.p.expect("p set for frames");
                frame_bound(self.d, p, self.upper, &vec![1.0; p - s], q)?
            }
        })
    }
}

pub fn bound(p: &Params) -> Result<(), CliError> {
    let started = Instant::now();
    let op = p.op.ok_or_else(|| usage("bound needs --op diff1d|diff2d|frame"))?;
    let q = BoundQuery::new(p.eps.unwrap_or(0.05), p.tau.unwrap_or(0.1))?;
    let unit_tight = p.unit_tight.unwrap_or(false);
    let setting = match op {
        OpArg::Diff1d => {
            let d = p.d.ok_or_else(|| usage("diff1d needs --d"))?;
            if d < 2 {
                return Err(usage("--d must be at least 2"));
            }
            BoundSetting { op, d, side: None, p: None, upper: 0.0, max_s: d - 1 }
        }
        OpArg::Diff2d => {
            let side = match (p.side, p.d) {
                (Some(side), _) => side,
                (None, Some(d)) => {
                    let side = (d as f64).sqrt().round() as usize;
                    if side * side != d {
                        return Err(usage("diff2d needs --side, or --d a perfect square"));
                    }
                    side
                }
                (None, None) => return Err(usage("diff2d needs --side")),
            };
            if side < 2 {
                return Err(usage("--side must be at least 2"));
            }
            BoundSetting {
                op,
                d: side * side,
                side: Some(side),
                p: None,
                upper: 0.0,
                max_s: 2 * side * (side - 1),
            }
        }
        OpArg::Frame => {
            let (rows, d) = match (p.p, p.d) {
                (Some(rows), Some(d)) => (rows, d),
                _ => return Err(usage("frame needs --p and --d")),
            };
            if d == 0 || rows < d {
                return Err(usage("a frame needs --p >= --d >= 1"));
            }
            let upper = if unit_tight {
                rows as f64 / d as f64
            } else {
                let mut rng = SeededRng::new(seed(p), FRAME_STREAM);
                random_unit_frame::<f64>(&mut rng, rows, d)?.1.upper
            };
            BoundSetting { op, d, side: None, p: Some(rows), upper, max_s: rows }
        }
    };

    if let Some(sweep) = &p.sweep {
        if sweep != "s" {
            return Err(usage(format!("--sweep supports only `s`, got {sweep:?}")));
        }
        let dir = prepare_out(p)?;
        let mut csv = String::from("s,m_min,fraction,rough_fraction\n");
        for s in 0..=setting.max_s {
            let r = setting.evaluate(s, &q)?;
            csv.push_str(&format!(
                "{s},{},{},{}\n",
                r.m_min,
                cosparse::io::fmt_f64(r.fraction),
                cosparse::io::fmt_f64(r.rough_fraction)
            ));
        }
        let path = dir.join("bound_sweep.csv");
        write_text(&path, csv)?;
        let params = BoundParams {
            op,
            d: setting.d,
            p: setting.p,
            side: setting.side,
            s: p.s.unwrap_or(0),
            eps: q.epsilon,
            tau: q.tau,
            unit_tight,
            seed: (op == OpArg::Frame && !unit_tight).then(|| seed(p)),
        };
        return finish(&dir, "bound", &params, params.seed, &[path], started, None);
    }

    let s = p.s.ok_or_else(|| usage("bound needs --s (or --sweep s)"))?;
    let r = setting.evaluate(s, &q)?;
    println!("operator: {}", cosparse::OperatorKind::from(op));
    println!("d: {}", r.d);
    if let Some(rows) = setting.p {
        println!("p: {rows}");
        println!("upper_frame_bound: {}", setting.upper);
    }
    println!("s: {s}");
    println!("m_min: {}", r.m_min);
    println!("fraction: {}", r.fraction);
    println!("rough_fraction: {}", r.rough_fraction);
    println!("width_surrogate: {}", r.width_surrogate);
    println!("confidence_term: {}", r.confidence_term);
    println!("tau: {}", r.tau);
    println!("rhs: {}", r.rhs);
    Ok(())
}

#[derive(Serialize)]
struct RecoverParams {
    op: OpArg,
    d: usize,
    s: Option<usize>,
    m: usize,
    eta: f64,
    noise: f64,
    method: Method,
    signal: Option<PathBuf>,
    matrix: Option<PathBuf>,
    solver: SolverOptions<f64>,
}

pub fn recover(p: &Params) -> Result<(), CliError> {
    let started = Instant::now();
    let op_kind = p.op.unwrap_or(OpArg::Diff1d);
    let method = p.method.unwrap_or(Method::Tv);
    let eta = p.eta.unwrap_or(0.0);
    let noise = p.noise.unwrap_or(0.0);
    if !(eta >= 0.0) || !(noise >= 0.0) {
        return Err(usage("--eta and --noise must be non-negative"));
    }
    let opts = solver_options(p)?;
    let mut rng = SeededRng::new(seed(p), RECOVER_STREAM);

    let x = match &p.signal {
        Some(path) => read_vector(path)?,
        None => {
            if op_kind != OpArg::Diff1d {
                return Err(usage("generated signals are available for --op diff1d only; pass --signal"));
            }
            let d = p.d.unwrap_or(200);
            let s = p.s.unwrap_or(80);
            gen_gradient_sparse_signal(&mut rng, d, s)?.x
        }
    };
    let d = x.len();
    let op = match op_kind {
        OpArg::Diff1d => Operator::diff1d(d)?,
        OpArg::Diff2d => {
            let side = (d as f64).sqrt().round() as usize;
            if side * side != d {
                return Err(usage("a diff2d signal needs a perfect-square length"));
            }
            Operator::diff2d(side)?
        }
        OpArg::Frame => return Err(usage("recover supports --op diff1d and diff2d")),
    };
    let matrix = match &p.matrix {
        Some(path) => read_matrix(path)?,
        None => Matrix::gaussian(&mut rng, p.m.unwrap_or(180), d),
    };
    if matrix.cols() != d {
        return Err(usage(format!(
            "matrix has {} columns but the signal has length {d}",
            matrix.cols()
        )));
    }
    let mut y = matrix.apply(&x);
    if noise > 0.0 {
        let w: Vec<f64> = (0..y.len()).map(|_| rng.gaussian()).collect();
        let nw = cosparse::numerics::norm2(&w);
        for (yi, wi) in y.iter_mut().zip(&w) {
            *yi += noise * wi / nw;
        }
    }
    let prob = RecoveryProblem::new(&matrix, &y, eta, &op)?;
    let dir = prepare_out(p)?;
    let result = match method {
        Method::Tv => solve_analysis_l1(&prob, &opts)?,
        Method::Tikhonov => solve_tikhonov(&prob)?,
    };

    let x_path = dir.join("x.csv");
    let x_hat_path = dir.join("x_hat.csv");
    write_vector(&x_path, &x)?;
    write_vector(&x_hat_path, &result.x_hat)?;
    let params = RecoverParams {
        op: op_kind,
        d,
        s: p.signal.is_none().then(|| p.s.unwrap_or(80)),
        m: matrix.rows(),
        eta,
        noise,
        method,
        signal: p.signal.clone(),
        matrix: p.matrix.clone(),
        solver: opts,
    };
    let generated = p.signal.is_none() || p.matrix.is_none() || noise > 0.0;
    finish(
        &dir,
        "recover",
        &params,
        generated.then(|| seed(p)),
        &[x_path, x_hat_path],
        started,
        None,
    )?;
    println!(
        "method={} relative_error={:e} iterations={} converged={} objective={} feasibility_gap={:e}",
        match method {
            Method::Tv => "tv",
            Method::Tikhonov => "tikhonov",
        },
        relative_error(&result.x_hat, &x),
        result.iterations,
        result.converged,
        result.objective,
        result.feasibility_gap
    );
    if !result.converged {
        return Err(CliError::Numeric(format!(
            "solver stopped at the iteration cap ({}) without converging",
            opts.max_iters
        )));
    }
    Ok(())
}

pub fn phase(p: &Params) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = match p.preset.unwrap_or(Preset::Desk) {
        Preset::Desk => PhaseGridConfig::desk(),
        Preset::Paper => PhaseGridConfig::paper(),
    };
    if let Some(d) = p.d {
        cfg.d = d;
    }
    if let Some(t) = p.trials {
        cfg.trials = t;
    }
    if let Some(t) = p.threshold {
        cfg.threshold = t;
    }
    if let Some(v) = &p.s_values {
        cfg.s_values = v.0.clone();
    }
    if let Some(v) = &p.m_values {
        cfg.m_values = v.0.clone();
    }
    cfg.base_seed = seed(p);
    cfg.solver = solver_options(p)?;
    cfg.jobs = p.jobs;
    cfg.validate()?;
    let dir = prepare_out(p)?;

    let run = run_phase_transition(&cfg)?;
    let grid = &run.grid;
    let mut artifacts = emit_heatmap(grid, &dir.join("phase"))?;

    let mut trials = format!("{TRIAL_CSV_HEADER}\n");
    for r in &run.records {
        trials.push_str(&r.csv_row());
        trials.push('\n');
    }
    let trials_path = dir.join("trials.csv");
    write_text(&trials_path, trials)?;
    artifacts.push(trials_path);

    let overlay = overlay_theory(grid)?;
    let mut csv = format!("{OVERLAY_CSV_HEADER}\n");
    for row in &overlay {
        csv.push_str(&row.csv_row());
        csv.push('\n');
    }
    let overlay_path = dir.join("overlay.csv");
    write_text(&overlay_path, csv)?;
    artifacts.push(overlay_path);

    let series = vec![
        PlotSeries {
            name: "theory m = d * rough fraction".into(),
            points: overlay.iter().map(|r| (r.s as f64, r.theory_m)).collect(),
        },
        PlotSeries {
            name: "empirical 50% frontier".into(),
            points: overlay
                .iter()
                .filter_map(|r| r.frontier_m.map(|f| (r.s as f64, f)))
                .collect(),
        },
    ];
    let svg = svg_line_plot(
        &format!("Phase transition, d = {}", grid.d),
        "gradient sparsity s",
        "measurements m",
        &series,
        (0.0, grid.d as f64),
    );
    let svg_path = dir.join("overlay.svg");
    write_text(&svg_path, svg)?;
    artifacts.push(svg_path);

    for row in &overlay {
        println!(
            "s={:>4} theory_m={:>8.2} frontier_m={}",
            row.s,
            row.theory_m,
            row.frontier_m.map_or("none".to_string(), |f| format!("{f:.2}"))
        );
    }
    let unconverged = run.records.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        println!("{unconverged} of {} solves hit the iteration cap (counted as failures)", run.records.len());
    }
    let trial_time = run.records.iter().map(|r| r.wall_time_secs).sum();
    finish(&dir, "phase", &cfg, Some(cfg.base_seed), &artifacts, started, Some(trial_time))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn compare(p: &Params) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = CompareConfig::new(
        p.d.unwrap_or(200),
        p.s.unwrap_or(80),
        p.m.unwrap_or(180),
        p.trials.unwrap_or(100),
        seed(p),
    );
    if let Some(t) = p.threshold {
        cfg.threshold = t;
    }
    cfg.solver = solver_options(p)?;
    cfg.jobs = p.jobs;
    let dir = prepare_out(p)?;
    let run = run_tv_vs_tikhonov(&cfg)?;

    let pairs_path = dir.join("compare.csv");
    write_text(&pairs_path, run.to_csv())?;
    let first_path = dir.join("first_trial.csv");
    write_text(&first_path, run.snapshot_csv())?;
    let indexed = |v: &[f64]| v.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
    let series = vec![
        PlotSeries { name: "signal".into(), points: indexed(&run.first.x) },
        PlotSeries { name: "TV minimization".into(), points: indexed(&run.first.tv) },
        PlotSeries { name: "minimum-norm".into(), points: indexed(&run.first.tikhonov) },
    ];
    let lo = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).fold(f64::INFINITY, f64::min);
    let hi = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (hi - lo).max(1e-12);
    let svg = svg_line_plot(
        &format!("First trial, d = {}, s = {}, m = {}", cfg.d, cfg.s, cfg.m),
        "index",
        "value",
        &series,
        (lo - pad, hi + pad),
    );
    let svg_path = dir.join("first_trial.svg");
    write_text(&svg_path, svg)?;

    let tv_ok = run.pairs.iter().filter(|p| p.tv.success).count();
    let tik_ok = run.pairs.iter().filter(|p| p.tikhonov.success).count();
    let n = run.pairs.len();
    println!(
        "tv: {tv_ok}/{n} successes, median relative error {:e}",
        median(run.pairs.iter().map(|p| p.tv.relative_error).collect())
    );
    println!(
        "tikhonov: {tik_ok}/{n} successes, median relative error {:e}",
        median(run.pairs.iter().map(|p| p.tikhonov.relative_error).collect())
    );
    let trial_time = run.pairs.iter().map(|p| p.tv.wall_time_secs + p.tikhonov.wall_time_secs).sum();
    finish(
        &dir,
        "compare",
        &cfg,
        Some(cfg.base_seed),
        &[pairs_path, first_path, svg_path],
        started,
        Some(trial_time),
    )
}

#[derive(Serialize)]
struct WidthParams {
    op: OpArg,
    d: usize,
    p: usize,
    s: usize,
    samples: usize,
    seed: u64,
}

pub fn width(p: &Params) -> Result<(), CliError> {
    let started = Instant::now();
    let op_kind = p.op.unwrap_or(OpArg::Diff1d);
    let samples = p.samples.unwrap_or(2000);
    let mut rng = SeededRng::new(seed(p), WIDTH_STREAM);
    let op = match op_kind {
        OpArg::Diff1d => Operator::diff1d(p.d.unwrap_or(50))?,
        OpArg::Diff2d => Operator::diff2d(p.side.unwrap_or(8))?,
        OpArg::Frame => {
            let d = p.d.unwrap_or(50);
            let rows = p.p.unwrap_or(2 * d);
            random_unit_frame(&mut rng, rows, d)?.0
        }
    };
    let s = p.s.unwrap_or(10);
    let spec = match op_kind {
        OpArg::Diff1d => {
            let sig = gen_gradient_sparse_signal(&mut rng, op.dim(), s)?;
            SubdifferentialSpec::at(&op, &sig.x, None)?
        }
        OpArg::Frame => {
            let rows = op.num_rows();
            if s > rows {
                return Err(usage(format!("--s must be at most p = {rows}")));
            }
            let sig = gen_cosparse_frame_signal(&mut rng, &op, rows - s)?;
            SubdifferentialSpec::at(&op, &sig.x, None)?
        }
        OpArg::Diff2d => {
            // Sign pattern on a uniformly random support of size s.
            let rows = op.num_rows();
            if s > rows {
                return Err(usage(format!("--s must be at most {rows}")));
            }
            let support = rand_support(&mut rng, rows, s);
            let mut fixed = vec![0.0; rows];
            for &j in &support {
                fixed[j] = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            }
            let cosupport = (0..rows).filter(|j| fixed[*j] == 0.0).collect();
            SubdifferentialSpec::new(&op, fixed, cosupport)?
        }
    };
    let est = width_upper_mc_with(&spec, &mut rng, samples, &WidthOptions::default())?;
    let dir = prepare_out(p)?;
    let path = dir.join("width.csv");
    let csv = format!("{WIDTH_CSV_HEADER}\n{}\n", est.csv_row());
    write_text(&path, &csv)?;
    print!("{csv}");
    let params = WidthParams {
        op: op_kind,
        d: op.dim(),
        p: op.num_rows(),
        s: spec.sparsity(),
        samples,
        seed: seed(p),
    };
    finish(&dir, "width", &params, Some(seed(p)), &[path], started, None)
}

fn rand_support(rng: &mut SeededRng, n: usize, k: usize) -> Vec<usize> {
    // Partial Fisher-Yates shuffle.
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.index(n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

#[derive(Serialize)]
struct Figure1Params {
    d: usize,
    kappas: Vec<f64>,
    samples: usize,
}

pub fn figure1(p: &Params) -> Result<(), CliError> {
    let started = Instant::now();
    let params = Figure1Params {
        d: p.d.unwrap_or(200),
        kappas: p.kappas.as_ref().map_or(vec![1.0, 1.3], |k| k.0.clone()),
        samples: p.samples.unwrap_or(101),
    };
    let table = figure1_curves(params.d, &params.kappas, params.samples)?;
    let dir = prepare_out(p)?;
    let csv_path = dir.join("figure1.csv");
    write_text(&csv_path, table.to_csv())?;
    let mut series = vec![PlotSeries {
        name: "new bound".into(),
        points: table.rows.iter().map(|r| (r.s_over_p, r.new_fraction)).collect(),
    }];
    for (k, kappa) in table.kappas.iter().enumerate() {
        series.push(PlotSeries {
            name: format!("previous bound, p = {kappa} d"),
            points: table.rows.iter().map(|r| (r.s_over_p, r.prev_fractions[k])).collect(),
        });
    }
    let svg = svg_line_plot(
        "Measurement bounds for tight unit-norm frames",
        "sparsity fraction s/p",
        "measurements m/d",
        &series,
        (0.0, 1.2),
    );
    let svg_path = dir.join("figure1.svg");
    write_text(&svg_path, svg)?;
    finish(&dir, "figure1", &params, None, &[csv_path, svg_path], started, None)
}
