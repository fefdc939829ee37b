//! Recovery experiments: gradient-sparse signal generation, phase-transition
//! grids over (sparsity, measurement count), paired TV/minimum-norm
//! comparisons, and the theory overlay for the grids.
//!
//! Every trial draws from its own random stream keyed by
//! `(base_seed, experiment tag, cell indices, trial index)`, so results do
//! not depend on scheduling or on the number of worker threads.

mod output;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::tv1d_rough_fraction;
use crate::error::{Error, Result};
use crate::numerics::{norm2, DenseMatrix, LinearMap, SeededRng};
use crate::operators::{cosupport, AnalysisOperator, SignalModel};
use crate::solver::{
    solve_analysis_l1, solve_tikhonov, RecoveryProblem, SolverOptions, SolverResult,
};

pub use output::{
    emit_heatmap, svg_line_plot, write_text, PlotSeries, RunManifest, OVERLAY_CSV_HEADER,
    TRIAL_CSV_HEADER,
};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_140_419;
/// Relative reconstruction error counted as exact recovery.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-5;

const PHASE_STREAM: u64 = 1;
const COMPARE_STREAM: u64 = 2;

/// Piecewise-constant signal in `R^d` with exactly `s` jumps. Jump
/// positions are uniform without replacement among the `d - 1` gaps and
/// piece values are i.i.d. standard normal.
pub fn gen_gradient_sparse_signal(
    rng: &mut SeededRng,
    d: usize,
    s: usize,
) -> Result<SignalModel<f64>> {
    if d < 2 || s > d - 1 {
        return Err(Error::invalid(format!(
            "gradient sparsity must satisfy 0 <= s <= d-1 with d >= 2, got d={d}, s={s}"
        )));
    }
    let op = AnalysisOperator::<f64>::diff1d(d)?;
    let mut jumps = rand::seq::index::sample(rng, d - 1, s).into_vec();
    jumps.sort_unstable();
    loop {
        let mut x = Vec::with_capacity(d);
        let mut level = rng.gaussian();
        let mut next_jump = jumps.iter().peekable();
        for i in 0..d {
            // Gap j sits between entries j and j + 1.
            if i > 0 && next_jump.peek().is_some_and(|&&j| j + 1 == i) {
                next_jump.next();
                level = rng.gaussian();
            }
            x.push(level);
        }
        let model = cosupport(&op, &x, None)?;
        if model.sparsity == s {
            return Ok(model);
        }
        // Two neighbouring pieces drew (numerically) equal values.
    }
}

/// Signal with cosparsity `ell` with respect to a frame: a Gaussian vector
/// projected onto the orthogonal complement of `ell` randomly chosen rows.
pub fn gen_cosparse_frame_signal(
    rng: &mut SeededRng,
    op: &AnalysisOperator<f64>,
    ell: usize,
) -> Result<SignalModel<f64>> {
    let (d, p) = (op.dim(), op.num_rows());
    if ell >= d || ell > p {
        return Err(Error::invalid(format!(
            "cosparsity must be below the dimension: ell={ell}, d={d}, p={p}"
        )));
    }
    let mut rows = rand::seq::index::sample(rng, p, ell).into_vec();
    rows.sort_unstable();
    // Gram-Schmidt basis of the chosen rows, then project a Gaussian vector.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(ell);
    for &j in &rows {
        let mut v = op.row_dense(j);
        for _ in 0..2 {
            for q in &basis {
                let c = crate::numerics::dot(q, &v);
                crate::numerics::axpy(-c, q, &mut v);
            }
        }
        let n = norm2(&v);
        if n > 1e-12 {
            v.iter_mut().for_each(|e| *e /= n);
            basis.push(v);
        }
    }
    let mut x: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
    for _ in 0..2 {
        for q in &basis {
            let c = crate::numerics::dot(q, &x);
            crate::numerics::axpy(-c, q, &mut x);
        }
    }
    cosupport(op, &x, None)
}

/// Signal, Gaussian measurement matrix and noiseless observations of one
/// trial.
#[derive(Clone, Debug)]
pub struct TrialInstance {
    pub signal: SignalModel<f64>,
    pub matrix: DenseMatrix<f64>,
    pub observations: Vec<f64>,
}

/// Draws the signal first, then the `m x d` matrix with i.i.d. standard
/// normal entries, from the same stream.
pub fn trial_instance(rng: &mut SeededRng, d: usize, s: usize, m: usize) -> Result<TrialInstance> {
    if m == 0 {
        return Err(Error::invalid("need at least one measurement"));
    }
    let signal = gen_gradient_sparse_signal(rng, d, s)?;
    let matrix = DenseMatrix::gaussian(rng, m, d);
    let observations = matrix.apply(&signal.x);
    Ok(TrialInstance {
        signal,
        matrix,
        observations,
    })
}

/// `||x_hat - x|| / ||x||`, or `||x_hat||` when `x = 0`.
pub fn relative_error(x_hat: &[f64], x: &[f64]) -> f64 {
    let diff: Vec<f64> = x_hat.iter().zip(x).map(|(a, b)| a - b).collect();
    let scale = norm2(x);
    if scale > 0.0 {
        norm2(&diff) / scale
    } else {
        norm2(&diff)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub s: usize,
    pub m: usize,
    pub trial_index: usize,
    /// `+inf` when the solver failed outright.
    pub relative_error: f64,
    pub success: bool,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_secs: f64,
}

impl TrialRecord {
    fn from_outcome(
        s: usize,
        m: usize,
        trial_index: usize,
        outcome: &Result<SolverResult<f64>>,
        truth: &[f64],
        threshold: f64,
        started: Instant,
    ) -> Self {
        let (relative_error, iterations, converged) = match outcome {
            Ok(res) => (relative_error(&res.x_hat, truth), res.iterations, res.converged),
            Err(Error::NotConverged { best, iterations, .. }) => {
                (relative_error(best, truth), *iterations, false)
            }
            Err(_) => (f64::INFINITY, 0, false),
        };
        Self {
            s,
            m,
            trial_index,
            relative_error,
            success: relative_error <= threshold,
            iterations,
            converged,
            wall_time_secs: started.elapsed().as_secs_f64(),
        }
    }

    /// CSV row without the wall time, so reruns give identical bytes.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.s,
            self.m,
            self.trial_index,
            crate::io::fmt_f64(self.relative_error),
            self.success as u8,
            self.iterations,
            self.converged as u8
        )
    }
}

fn run_jobs<J, R, F>(jobs: Option<usize>, items: Vec<J>, f: F) -> Result<Vec<R>>
where
    J: Send,
    R: Send,
    F: Fn(J) -> R + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseGridConfig {
    pub d: usize,
    pub s_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub threshold: f64,
    pub base_seed: u64,
    pub solver: SolverOptions<f64>,
    /// Worker threads; `None` uses all cores.
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl PhaseGridConfig {
    /// `d = 64`, `s = 4, 8, ..., 60`, `m = 8, 16, ..., 64`, 50 trials.
    pub fn desk() -> Self {
        Self {
            d: 64,
            s_values: (4..=60).step_by(4).collect(),
            m_values: (8..=64).step_by(8).collect(),
            trials: 50,
            threshold: DEFAULT_SUCCESS_THRESHOLD,
            base_seed: DEFAULT_SEED,
            solver: SolverOptions::default(),
            jobs: None,
        }
    }

    /// `d = 200`, `s = 10, 20, ..., 190`, `m = 10, 20, ..., 200`, 200 trials.
    pub fn paper() -> Self {
        Self {
            d: 200,
            s_values: (10..=190).step_by(10).collect(),
            m_values: (10..=200).step_by(10).collect(),
            trials: 200,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_values.is_empty() || self.m_values.is_empty() {
            return Err(Error::invalid("sparsity and measurement lists must be nonempty"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("need at least one trial per cell"));
        }
        if self.d < 2 {
            return Err(Error::invalid("signal dimension must be at least 2"));
        }
        if let Some(&s) = self.s_values.iter().find(|&&s| s > self.d - 1) {
            return Err(Error::invalid(format!("sparsity {s} exceeds d-1 = {}", self.d - 1)));
        }
        if self.m_values.contains(&0) {
            return Err(Error::invalid("measurement counts must be positive"));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("success threshold must be positive"));
        }
        Ok(())
    }
}

/// Success rates over a (sparsity x measurement count) grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub d: usize,
    pub s_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub success_threshold: f64,
    pub base_seed: u64,
    /// Row-major, one row per sparsity.
    pub successes: Vec<usize>,
    pub rates: Vec<f64>,
}

impl PhaseGrid {
    pub fn rate(&self, s_index: usize, m_index: usize) -> f64 {
        self.rates[s_index * self.m_values.len() + m_index]
    }

    /// Success-rate curve over `m` for one sparsity.
    pub fn rate_row(&self, s_index: usize) -> &[f64] {
        let n = self.m_values.len();
        &self.rates[s_index * n..(s_index + 1) * n]
    }

    /// Measurement count where the success rate first reaches 1/2, linearly
    /// interpolated between neighbouring cells. `None` if it never does.
    pub fn frontier(&self, s_index: usize) -> Option<f64> {
        let rates = self.rate_row(s_index);
        let k = rates.iter().position(|&r| r >= 0.5)?;
        if k == 0 {
            return Some(self.m_values[0] as f64);
        }
        let (m0, m1) = (self.m_values[k - 1] as f64, self.m_values[k] as f64);
        let (r0, r1) = (rates[k - 1], rates[k]);
        Some(m0 + (0.5 - r0) / (r1 - r0) * (m1 - m0))
    }

    /// Cells `(s_index, m_index_low, m_index_high)` where the rate drops by
    /// more than `slack` as `m` grows.
    pub fn monotonicity_violations(&self, slack: f64) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for si in 0..self.s_values.len() {
            let row = self.rate_row(si);
            for lo in 0..row.len() {
                for hi in lo + 1..row.len() {
                    if row[hi] < row[lo] - slack {
                        out.push((si, lo, hi));
                    }
                }
            }
        }
        out
    }

    /// `s,m,success_rate`, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,m,success_rate\n");
        for (si, &s) in self.s_values.iter().enumerate() {
            for (mi, &m) in self.m_values.iter().enumerate() {
                out.push_str(&format!("{s},{m},{}\n", crate::io::fmt_f64(self.rate(si, mi))));
            }
        }
        out
    }

    /// Binary PGM (P5): one row per sparsity, one column per measurement
    /// count, black for 100% success.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (h, w) = (self.s_values.len(), self.m_values.len());
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        out.extend(self.rates.iter().map(|&r| (255.0 * (1.0 - r)).round().clamp(0.0, 255.0) as u8));
        out
    }
}

#[derive(Clone, Debug)]
pub struct PhaseRun {
    pub grid: PhaseGrid,
    pub records: Vec<TrialRecord>,
}

/// Stream of trial `trial` in grid cell `(s_index, m_index)`.
pub fn phase_trial_rng(base_seed: u64, s_index: usize, m_index: usize, trial: usize) -> SeededRng {
    SeededRng::for_indices(
        base_seed,
        &[PHASE_STREAM, s_index as u64, m_index as u64, trial as u64],
    )
}

/// Runs noiseless TV recovery for every cell and trial of the grid.
pub fn run_phase_transition(cfg: &PhaseGridConfig) -> Result<PhaseRun> {
    cfg.validate()?;
    let op = AnalysisOperator::<f64>::diff1d(cfg.d)?;
    let mut jobs = Vec::new();
    for si in 0..cfg.s_values.len() {
        for mi in 0..cfg.m_values.len() {
            for t in 0..cfg.trials {
                jobs.push((si, mi, t));
            }
        }
    }
    let records = run_jobs(cfg.jobs, jobs, |(si, mi, t)| {
        let started = Instant::now();
        let (s, m) = (cfg.s_values[si], cfg.m_values[mi]);
        let mut rng = phase_trial_rng(cfg.base_seed, si, mi, t);
        let inst = trial_instance(&mut rng, cfg.d, s, m).expect("validated trial parameters");
        let outcome = RecoveryProblem::new(&inst.matrix, &inst.observations, 0.0, &op)
            .and_then(|prob| solve_analysis_l1(&prob, &cfg.solver));
        TrialRecord::from_outcome(s, m, t, &outcome, &inst.signal.x, cfg.threshold, started)
    })?;

    let cells = cfg.s_values.len() * cfg.m_values.len();
    let mut successes = vec![0usize; cells];
    for (k, rec) in records.iter().enumerate() {
        if rec.success {
            successes[k / cfg.trials] += 1;
        }
    }
    let rates = successes
        .iter()
        .map(|&n| n as f64 / cfg.trials as f64)
        .collect();
    Ok(PhaseRun {
        grid: PhaseGrid {
            d: cfg.d,
            s_values: cfg.s_values.clone(),
            m_values: cfg.m_values.clone(),
            trials: cfg.trials,
            success_threshold: cfg.threshold,
            base_seed: cfg.base_seed,
            successes,
            rates,
        },
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlayRow {
    pub s: usize,
    /// Rough 1D TV fraction `1 - (1/pi)(1 - (s+1)/d)^2`.
    pub theory_fraction: f64,
    pub theory_m: f64,
    /// Empirical 50% success frontier.
    pub frontier_m: Option<f64>,
}

/// Rough theoretical measurement count next to the empirical frontier, for
/// each sparsity of a 1D TV grid.
pub fn overlay_theory(grid: &PhaseGrid) -> Result<Vec<OverlayRow>> {
    grid.s_values
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            let theory_fraction = tv1d_rough_fraction(grid.d, s)?;
            Ok(OverlayRow {
                s,
                theory_fraction,
                theory_m: grid.d as f64 * theory_fraction,
                frontier_m: grid.frontier(si),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareConfig {
    pub d: usize,
    pub s: usize,
    pub m: usize,
    pub trials: usize,
    pub threshold: f64,
    pub base_seed: u64,
    pub solver: SolverOptions<f64>,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl CompareConfig {
    /// `d = 200`, `s = 80`, `m = 180`.
    pub fn new(d: usize, s: usize, m: usize, trials: usize, base_seed: u64) -> Self {
        Self {
            d,
            s,
            m,
            trials,
            threshold: DEFAULT_SUCCESS_THRESHOLD,
            base_seed,
            solver: SolverOptions::default(),
            jobs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedTrial {
    pub tv: TrialRecord,
    pub tikhonov: TrialRecord,
}

/// Signal and both reconstructions of the first trial.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonSnapshot {
    pub x: Vec<f64>,
    pub tv: Vec<f64>,
    pub tikhonov: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRun {
    pub pairs: Vec<PairedTrial>,
    pub first: ComparisonSnapshot,
}

pub fn compare_trial_rng(base_seed: u64, trial: usize) -> SeededRng {
    SeededRng::for_indices(base_seed, &[COMPARE_STREAM, trial as u64])
}

fn reconstruction(outcome: &Result<SolverResult<f64>>, d: usize) -> Vec<f64> {
    match outcome {
        Ok(res) => res.x_hat.clone(),
        Err(Error::NotConverged { best, .. }) => best.clone(),
        Err(_) => vec![f64::NAN; d],
    }
}

/// Feeds the same `(x, M, y)` to the TV solver and to the minimum-norm
/// baseline, trial by trial.
pub fn run_tv_vs_tikhonov(cfg: &CompareConfig) -> Result<ComparisonRun> {
    if cfg.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    if cfg.m == 0 {
        return Err(Error::invalid("need at least one measurement"));
    }
    if cfg.d < 2 || cfg.s > cfg.d - 1 {
        return Err(Error::invalid(format!(
            "gradient sparsity must satisfy 0 <= s <= d-1, got d={}, s={}",
            cfg.d, cfg.s
        )));
    }
    let op = AnalysisOperator::<f64>::diff1d(cfg.d)?;
    let results = run_jobs(cfg.jobs, (0..cfg.trials).collect(), |t| {
        let mut rng = compare_trial_rng(cfg.base_seed, t);
        let inst = trial_instance(&mut rng, cfg.d, cfg.s, cfg.m).expect("validated trial parameters");
        let prob = RecoveryProblem::new(&inst.matrix, &inst.observations, 0.0, &op);
        let started = Instant::now();
        let tv = match &prob {
            Ok(p) => solve_analysis_l1(p, &cfg.solver),
            Err(e) => Err(Error::invalid(e.to_string())),
        };
        let tv_rec = TrialRecord::from_outcome(cfg.s, cfg.m, t, &tv, &inst.signal.x, cfg.threshold, started);
        let started = Instant::now();
        let tik = prob.and_then(|p| solve_tikhonov(&p));
        let tik_rec = TrialRecord::from_outcome(cfg.s, cfg.m, t, &tik, &inst.signal.x, cfg.threshold, started);
        let snapshot = (t == 0).then(|| ComparisonSnapshot {
            x: inst.signal.x.clone(),
            tv: reconstruction(&tv, cfg.d),
            tikhonov: reconstruction(&tik, cfg.d),
        });
        (
            PairedTrial {
                tv: tv_rec,
                tikhonov: tik_rec,
            },
            snapshot,
        )
    })?;
    let mut first = None;
    let mut pairs = Vec::with_capacity(results.len());
    for (pair, snap) in results {
        if snap.is_some() {
            first = snap;
        }
        pairs.push(pair);
    }
    Ok(ComparisonRun {
        pairs,
        first: first.expect("trial 0 always runs"),
    })
}

impl ComparisonRun {
    /// `trial,tv_relative_error,tikhonov_relative_error,tv_success,tikhonov_success,tv_iterations`
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut out = String::from(
            "trial,tv_relative_error,tikhonov_relative_error,tv_success,tikhonov_success,tv_iterations\n",
        );
        for p in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.tv.trial_index,
                fmt_f64(p.tv.relative_error),
                fmt_f64(p.tikhonov.relative_error),
                p.tv.success as u8,
                p.tikhonov.success as u8,
                p.tv.iterations
            ));
        }
        out
    }

    /// `index,x,tv,tikhonov` for the first trial.
    pub fn snapshot_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut out = String::from("index,x,tv,tikhonov\n");
        for (i, ((x, a), b)) in self
            .first
            .x
            .iter()
            .zip(&self.first.tv)
            .zip(&self.first.tikhonov)
            .enumerate()
        {
            out.push_str(&format!("{i},{},{},{}\n", fmt_f64(*x), fmt_f64(*a), fmt_f64(*b)));
        }
        out
    }
}
