//! Analysis l1-minimization
//!
//! ```text
//! minimize ||Omega z||_1  subject to  ||M z - y||_2 <= eta
//! ```
//!
//! by a first-order primal-dual iteration on the saddle-point form with the
//! stacked operator `K = [Omega; A]`, where `A z - b` is an equivalent
//! rewriting of the constraint residual:
//!
//! * `eta = 0`: the rows of `M` are orthonormalized (`M = L Q`, `Q Q^T = I`)
//!   and the constraint becomes `Q z = L^{-1} y`. The affine set is the same;
//!   the constraint block is perfectly conditioned.
//! * `eta > 0`: `A = M / c`, `b = y / c`, radius `eta / c` with
//!   `c = ||M|| / ||Omega||`, which balances the two blocks of `K`.
//!
//! Dual updates are the projection onto the l-infinity unit ball for the
//! `||.||_1` block and, through the Moreau identity, the projection onto the
//! ball of radius `eta` around `b` for the constraint block. Step sizes are
//! `sigma = theta = 0.99 / ||K||`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    axpy, dot, min_norm_least_squares, norm1, norm2, norm_inf, operator_norm, DenseMatrix, LinearMap,
    PowerIterationOptions,
};
use crate::operators::AnalysisOperator;
use crate::scalar::Scalar;

/// Measurements `y = M x + w` with `||w||_2 <= eta`, and the analysis
/// operator defining the regularizer.
#[derive(Clone, Copy, Debug)]
pub struct RecoveryProblem<'a, T> {
    pub matrix: &'a DenseMatrix<T>,
    pub observations: &'a [T],
    pub eta: T,
    pub operator: &'a AnalysisOperator<T>,
}

impl<'a, T: Scalar> RecoveryProblem<'a, T> {
    pub fn new(
        matrix: &'a DenseMatrix<T>,
        observations: &'a [T],
        eta: T,
        operator: &'a AnalysisOperator<T>,
    ) -> Result<Self> {
        let prob = Self {
            matrix,
            observations,
            eta,
            operator,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        if self.matrix.rows() == 0 {
            return Err(Error::invalid("measurement matrix has no rows"));
        }
        if self.matrix.cols() != self.operator.dim() {
            return Err(Error::invalid(format!(
                "measurement matrix has {} columns, operator acts on R^{}",
                self.matrix.cols(),
                self.operator.dim()
            )));
        }
        if self.observations.len() != self.matrix.rows() {
            return Err(Error::invalid(format!(
                "{} observations for {} measurements",
                self.observations.len(),
                self.matrix.rows()
            )));
        }
        if !(self.eta >= T::zero()) || !self.eta.is_finite() {
            return Err(Error::invalid("noise level must be finite and non-negative"));
        }
        if self.observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observations must be finite"));
        }
        Ok(())
    }

    /// `max(0, ||M z - y||_2 - eta)`
    pub fn feasibility_gap(&self, z: &[T]) -> T {
        let mut r = self.matrix.apply(z);
        axpy(-T::one(), self.observations, &mut r);
        (norm2(&r) - self.eta).max(T::zero())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions<T> {
    /// Relative iterate change and feasibility tolerance.
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-8),
            max_iters: 50_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverResult<T> {
    pub x_hat: Vec<T>,
    pub iterations: usize,
    /// `||Omega x_hat||_1`
    pub objective: T,
    /// `max(0, ||M x_hat - y||_2 - eta)`
    pub feasibility_gap: T,
    /// Primal objective minus the dual objective at the current iterates.
    /// Ignores dual infeasibility, so it is an estimate only.
    pub primal_dual_gap_estimate: T,
    pub converged: bool,
}

impl<T: Scalar> SolverResult<T> {
    /// Error bound `2 eta / tau` for this reconstruction when the minimal
    /// gain of `M` over the descent cone is at least `tau`.
    pub fn error_certificate(&self, eta: T, tau: T) -> Result<T> {
        robust_error_certificate(eta, tau)
    }
}

/// `2 eta / tau`: the reconstruction error guaranteed when
/// `inf { ||M v|| : v in T(x), ||v|| <= 1 } >= tau`.
pub fn robust_error_certificate<T: Scalar>(eta: T, tau: T) -> Result<T> {
    if !(tau > T::zero()) {
        return Err(Error::invalid("tau must be positive"));
    }
    if !(eta >= T::zero()) {
        return Err(Error::invalid("eta must be non-negative"));
    }
    Ok(T::of(2.0) * eta / tau)
}

/// Constraint `||A z - b|| <= radius` equivalent to the problem's.
struct Constraint<T> {
    map: DenseMatrix<T>,
    target: Vec<T>,
    radius: T,
}

/// Orthonormal basis of the row space of `m` (modified Gram-Schmidt with
/// one reorthogonalization pass) and the transformed right-hand side.
/// Rows that are numerically dependent on earlier ones are dropped.
fn orthonormalize_rows<T: Scalar>(m: &DenseMatrix<T>, y: &[T]) -> Constraint<T> {
    let d = m.cols();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m.rows().min(d));
    let mut target: Vec<T> = Vec::with_capacity(m.rows().min(d));
    let drop_tol = T::of(1e-12);
    for (i, &yi) in y.iter().enumerate() {
        let row = m.row(i);
        let row_norm = norm2(row);
        if row_norm == T::zero() {
            continue;
        }
        let mut v = row.to_vec();
        let mut coeffs = vec![T::zero(); basis.len()];
        for _ in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&basis) {
                let proj = dot(q, &v);
                *c = *c + proj;
                axpy(-proj, q, &mut v);
            }
        }
        let r = norm2(&v);
        if r <= drop_tol * row_norm {
            continue;
        }
        // row_i = sum_k coeffs[k] q_k + r q_new, so
        // <q_new, z> = (y_i - sum_k coeffs[k] b_k) / r on the feasible set.
        let partial: T = coeffs.iter().zip(&target).map(|(&c, &b)| c * b).sum();
        v.iter_mut().for_each(|e| *e = *e / r);
        basis.push(v);
        target.push((yi - partial) / r);
    }
    let rows = basis.len();
    let map = DenseMatrix::new(rows, d, basis.concat()).expect("finite orthonormal rows");
    Constraint {
        map,
        target,
        radius: T::zero(),
    }
}

fn balanced_constraint<T: Scalar>(prob: &RecoveryProblem<'_, T>, power: &PowerIterationOptions<T>) -> Constraint<T> {
    let m_norm = operator_norm(prob.matrix, power);
    let o_norm = operator_norm(prob.operator, power);
    let c = if m_norm > T::zero() && o_norm > T::zero() {
        m_norm / o_norm
    } else {
        T::one()
    };
    Constraint {
        map: prob.matrix.scaled(T::one() / c),
        target: prob.observations.iter().map(|&v| v / c).collect(),
        radius: prob.eta / c,
    }
}

struct Stacked<'a, T> {
    top: &'a AnalysisOperator<T>,
    bottom: &'a DenseMatrix<T>,
}

impl<T: Scalar> LinearMap<T> for Stacked<'_, T> {
    fn nrows(&self) -> usize {
        self.top.num_rows() + self.bottom.rows()
    }
    fn ncols(&self) -> usize {
        self.top.dim()
    }
    fn apply_into(&self, x: &[T], out: &mut [T]) {
        let (a, b) = out.split_at_mut(self.top.num_rows());
        self.top.apply_into(x, a);
        self.bottom.apply_into(x, b);
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        let (a, b) = y.split_at(self.top.num_rows());
        self.top.adjoint_into(a, out);
        let extra = self.bottom.adjoint(b);
        axpy(T::one(), &extra, out);
    }
}

/// Exact projection onto `{z : A z = b}` for `A` with orthonormal rows.
fn project_affine<T: Scalar>(a: &DenseMatrix<T>, b: &[T], z: &mut [T]) {
    let mut resid = vec![T::zero(); a.rows()];
    let mut corr = vec![T::zero(); z.len()];
    for _ in 0..2 {
        a.apply_into(z, &mut resid);
        for (r, &bi) in resid.iter_mut().zip(b) {
            *r = *r - bi;
        }
        a.adjoint_into(&resid, &mut corr);
        axpy(-T::one(), &corr, z);
    }
}

/// `[A; Omega_Lambda]` for a fixed row subset `Lambda` of `Omega`.
struct CosupportConstraint<'a, T> {
    a: &'a DenseMatrix<T>,
    op: &'a AnalysisOperator<T>,
    rows: &'a [usize],
}

impl<T: Scalar> LinearMap<T> for CosupportConstraint<'_, T> {
    fn nrows(&self) -> usize {
        self.a.rows() + self.rows.len()
    }
    fn ncols(&self) -> usize {
        self.op.dim()
    }
    fn apply_into(&self, x: &[T], out: &mut [T]) {
        let (top, bottom) = out.split_at_mut(self.a.rows());
        self.a.apply_into(x, top);
        let coeffs = self.op.apply(x);
        for (o, &j) in bottom.iter_mut().zip(self.rows) {
            *o = coeffs[j];
        }
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        let (top, bottom) = y.split_at(self.a.rows());
        self.a.adjoint_into(top, out);
        let mut full = vec![T::zero(); self.op.num_rows()];
        for (&v, &j) in bottom.iter().zip(self.rows) {
            full[j] = v;
        }
        axpy(T::one(), &self.op.adjoint(&full), out);
    }
}

/// Rows of `Omega` whose coefficients at `z` are negligible next to the
/// largest coefficient or the largest entry of `z`.
fn near_zero_rows<T: Scalar>(op: &AnalysisOperator<T>, z: &[T], tol: T) -> Vec<usize> {
    let coeffs = op.apply(z);
    let threshold = tol.sqrt() * norm_inf(&coeffs).max(norm_inf(z));
    (0..coeffs.len())
        .filter(|&j| coeffs[j].abs() <= threshold)
        .collect()
}

/// Minimum-norm least-squares solution, falling back to the last iterate.
fn least_squares<T: Scalar, L: LinearMap<T>>(map: &L, rhs: &[T], iters: usize) -> Option<Vec<T>> {
    match min_norm_least_squares(map, rhs, T::of(1e-14), iters) {
        Ok(x) => Some(x),
        Err(Error::NotConverged { best, .. }) => Some(best.into_iter().map(T::of).collect()),
        Err(_) => None,
    }
}

/// Projects `z` onto the constraint set intersected with the subspace where
/// the near-zero analysis coefficients of `z` vanish exactly.
fn polish_on_cosupport<T: Scalar>(
    op: &AnalysisOperator<T>,
    constraint: &Constraint<T>,
    z: &[T],
    tol: T,
) -> Option<Vec<T>> {
    let rows = near_zero_rows(op, z, tol);
    if rows.is_empty() {
        return None;
    }
    let map = CosupportConstraint {
        a: &constraint.map,
        op,
        rows: &rows,
    };
    let mut resid = map.apply(z);
    for (r, &bi) in resid.iter_mut().zip(&constraint.target) {
        *r = *r - bi;
    }
    let delta = least_squares(&map, &resid, 4 * op.dim() + 50)?;
    let mut out = z.to_vec();
    axpy(-T::one(), &delta, &mut out);
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Orthogonal projection onto `{x : (Omega x)_j = 0 for j in rows}`.
struct NullProjector<'a, T> {
    rows_only: CosupportConstraint<'a, T>,
    iters: usize,
}

impl<T: Scalar> NullProjector<'_, T> {
    fn project(&self, x: &[T]) -> Vec<T> {
        let coeffs = self.rows_only.apply(x);
        let mut out = x.to_vec();
        if let Some(delta) = least_squares(&self.rows_only, &coeffs, self.iters) {
            axpy(-T::one(), &delta, &mut out);
        }
        out
    }
}

/// `A P` for the null-space projector `P`.
struct ProjectedMap<'a, T> {
    a: &'a DenseMatrix<T>,
    proj: &'a NullProjector<'a, T>,
}

impl<T: Scalar> LinearMap<T> for ProjectedMap<'_, T> {
    fn nrows(&self) -> usize {
        self.a.rows()
    }
    fn ncols(&self) -> usize {
        self.a.cols()
    }
    fn apply_into(&self, x: &[T], out: &mut [T]) {
        self.a.apply_into(&self.proj.project(x), out);
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.proj.project(&self.a.adjoint(y)));
    }
}

/// Noisy counterpart of [`polish_on_cosupport`]: projects `z` onto the
/// subspace where its near-zero analysis coefficients vanish, then moves
/// towards the least-squares point of that subspace until the residual is
/// back inside the ball.
fn polish_in_ball<T: Scalar>(
    op: &AnalysisOperator<T>,
    constraint: &Constraint<T>,
    z: &[T],
    tol: T,
) -> Option<Vec<T>> {
    let rows = near_zero_rows(op, z, tol);
    if rows.is_empty() {
        return None;
    }
    let a = &constraint.map;
    let empty = DenseMatrix::zeros(0, op.dim());
    let proj = NullProjector {
        rows_only: CosupportConstraint {
            a: &empty,
            op,
            rows: &rows,
        },
        iters: 4 * op.dim() + 50,
    };
    let start = proj.project(z);
    let residual = |x: &[T]| {
        let mut r = a.apply(x);
        axpy(-T::one(), &constraint.target, &mut r);
        r
    };
    let r0 = residual(&start);
    if norm2(&r0) <= constraint.radius {
        return start.iter().all(|v| v.is_finite()).then_some(start);
    }

    let mut rhs = r0.clone();
    rhs.iter_mut().for_each(|v| *v = -*v);
    let map = ProjectedMap { a, proj: &proj };
    let w = least_squares(&map, &rhs, op.dim() + 50)?;
    let mut target = proj.project(&w);
    axpy(T::one(), &start, &mut target);
    let r1 = residual(&target);

    // Smallest theta with ||r0 + theta (r1 - r0)|| <= radius.
    let mut diff = r1.clone();
    axpy(-T::one(), &r0, &mut diff);
    let (qa, qb, qc) = (
        dot(&diff, &diff),
        dot(&r0, &diff),
        dot(&r0, &r0) - constraint.radius.powi(2),
    );
    let disc = qb * qb - qa * qc;
    if !(qa > T::zero()) || disc < T::zero() {
        return None;
    }
    let theta = (-qb - disc.sqrt()) / qa;
    if !(theta >= T::zero() && theta <= T::one()) {
        return None;
    }
    let mut out = start;
    for (o, &t) in out.iter_mut().zip(&target) {
        *o = *o + theta * (t - *o);
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Solves the analysis l1 program. Running out of iterations is not an
/// error: the result comes back with `converged = false`.
pub fn solve_analysis_l1<T: Scalar>(
    prob: &RecoveryProblem<'_, T>,
    opts: &SolverOptions<T>,
) -> Result<SolverResult<T>> {
    prob.validate()?;
    if !(opts.tol > T::zero()) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    let power = PowerIterationOptions::default();
    let constraint = if prob.eta == T::zero() {
        orthonormalize_rows(prob.matrix, prob.observations)
    } else {
        balanced_constraint(prob, &power)
    };
    let op = prob.operator;
    let a = &constraint.map;
    let (d, p, k) = (op.dim(), op.num_rows(), a.rows());

    let k_norm = operator_norm(&Stacked { top: op, bottom: a }, &power);
    let step = T::of(0.99) / k_norm;

    let y_scale = norm2(prob.observations).max(T::one());
    let mut z = vec![T::zero(); d];
    let mut z_bar = z.clone();
    let mut z_next = z.clone();
    let mut u = vec![T::zero(); p];
    let mut v = vec![T::zero(); k];
    let mut work_p = vec![T::zero(); p];
    let mut work_k = vec![T::zero(); k];
    let mut back = vec![T::zero(); d];
    let mut back_k = vec![T::zero(); d];
    let mut v_prev = v.clone();

    let mut iterations = opts.max_iters;
    let mut converged = false;
    for it in 0..opts.max_iters {
        let mut dual_change = T::zero();
        op.apply_into(&z_bar, &mut work_p);
        for (ui, &w) in u.iter_mut().zip(&work_p) {
            let next = (*ui + step * w).max(-T::one()).min(T::one());
            dual_change = dual_change + (next - *ui).powi(2);
            *ui = next;
        }

        // v <- v~ - sigma * P_ball(v~ / sigma), v~ = v + sigma A z_bar.
        a.apply_into(&z_bar, &mut work_k);
        for (vi, &w) in v.iter_mut().zip(&work_k) {
            *vi = *vi + step * w;
        }
        let mut dist = T::zero();
        for (&vi, &bi) in v.iter().zip(&constraint.target) {
            dist = dist + (vi / step - bi).powi(2);
        }
        let dist = dist.sqrt();
        let shrink = if dist > constraint.radius {
            constraint.radius / dist
        } else {
            T::one()
        };
        for ((vi, &bi), &w_prev) in v.iter_mut().zip(&constraint.target).zip(&v_prev) {
            let w = *vi / step;
            let proj = bi + (w - bi) * shrink;
            *vi = *vi - step * proj;
            dual_change = dual_change + (*vi - w_prev).powi(2);
        }
        v_prev.copy_from_slice(&v);

        op.adjoint_into(&u, &mut back);
        a.adjoint_into(&v, &mut back_k);
        let mut change = T::zero();
        let mut size = T::zero();
        for i in 0..d {
            let zn = z[i] - step * (back[i] + back_k[i]);
            change = change + (zn - z[i]).powi(2);
            size = size + zn * zn;
            z_next[i] = zn;
        }
        for i in 0..d {
            z_bar[i] = z_next[i] + z_next[i] - z[i];
        }
        std::mem::swap(&mut z, &mut z_next);

        let dual_size = dot(&u, &u) + dot(&v, &v);
        let relative_change = ((change + dual_change) / (size + dual_size).max(T::one())).sqrt();
        if relative_change < opts.tol && prob.feasibility_gap(&z) <= opts.tol * y_scale {
            iterations = it + 1;
            converged = true;
            break;
        }
    }

    let polished = if constraint.radius == T::zero() {
        project_affine(a, &constraint.target, &mut z);
        polish_on_cosupport(op, &constraint, &z, opts.tol)
    } else {
        polish_in_ball(op, &constraint, &z, opts.tol)
    };
    if let Some(polished) = polished {
        let current = norm1(&op.apply(&z));
        let candidate = norm1(&op.apply(&polished));
        if prob.feasibility_gap(&polished) <= opts.tol * y_scale
            && candidate <= current + opts.tol * current.max(T::one())
        {
            z = polished;
        }
    }

    let objective = norm1(&op.apply(&z));
    let dual = -dot(&constraint.target, &v) - constraint.radius * norm2(&v);
    Ok(SolverResult {
        feasibility_gap: prob.feasibility_gap(&z),
        objective,
        primal_dual_gap_estimate: objective - dual,
        x_hat: z,
        iterations,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TikhonovOptions<T> {
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Scalar> Default for TikhonovOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-10),
            max_iters: 20_000,
        }
    }
}

/// Minimum-norm solution of `M z = y`, the non-sparse baseline.
pub fn solve_tikhonov<T: Scalar>(prob: &RecoveryProblem<'_, T>) -> Result<SolverResult<T>> {
    solve_tikhonov_with(prob, &TikhonovOptions::default())
}

pub fn solve_tikhonov_with<T: Scalar>(
    prob: &RecoveryProblem<'_, T>,
    opts: &TikhonovOptions<T>,
) -> Result<SolverResult<T>> {
    prob.validate()?;
    let x_hat = min_norm_least_squares(prob.matrix, prob.observations, opts.tol, opts.max_iters)?;
    let objective = norm1(&prob.operator.apply(&x_hat));
    Ok(SolverResult {
        feasibility_gap: prob.feasibility_gap(&x_hat),
        objective,
        primal_dual_gap_estimate: T::zero(),
        x_hat,
        iterations: 0,
        converged: true,
    })
}
