//! Descent-cone geometry of `z -> ||Omega z||_1` at a cosparse point.
//!
//! The subdifferential at `x` is `Omega^T A` with
//! `A = { a : a_j = sgn((Omega x)_j) off the cosupport, |a_j| <= 1 on it }`,
//! so the distance from `g` to `t * subdifferential` is a box-constrained
//! least-squares problem in the cosupport coordinates. Its mean square over
//! Gaussian `g`, minimized over `t >= 0`, bounds the squared Gaussian width
//! of the descent cone from above.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    dot, min_norm_least_squares, minimize_scalar, norm1, norm2, operator_norm, DenseMatrix,
    LinearMap, PowerIterationOptions, SeededRng,
};
use crate::operators::{cosupport, sign_vector, AnalysisOperator};
use crate::scalar::Scalar;

/// Subdifferential of `||Omega . ||_1` at a point, described by the sign
/// pattern off the cosupport and the free (box) coordinates on it.
#[derive(Clone, Debug)]
pub struct SubdifferentialSpec<'a, T> {
    operator: &'a AnalysisOperator<T>,
    fixed_part: Vec<T>,
    cosupport: Vec<usize>,
    op_norm_sq: T,
}

impl<'a, T: Scalar> SubdifferentialSpec<'a, T> {
    /// Builds the subdifferential from a fixed part (entries `+-1`, zero
    /// exactly on `cosupport`) and the cosupport indices.
    pub fn new(
        operator: &'a AnalysisOperator<T>,
        fixed_part: Vec<T>,
        mut cosupport: Vec<usize>,
    ) -> Result<Self> {
        let p = operator.num_rows();
        if fixed_part.len() != p {
            return Err(Error::invalid(format!(
                "fixed part has length {}, operator has {p} rows",
                fixed_part.len()
            )));
        }
        cosupport.sort_unstable();
        cosupport.dedup();
        if cosupport.last().is_some_and(|&j| j >= p) {
            return Err(Error::invalid("cosupport index out of range"));
        }
        let mut on_cosupport = vec![false; p];
        for &j in &cosupport {
            on_cosupport[j] = true;
        }
        for (j, &v) in fixed_part.iter().enumerate() {
            let ok = if on_cosupport[j] {
                v == T::zero()
            } else {
                v.abs() == T::one()
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "fixed part must be zero exactly on the cosupport and +-1 elsewhere (row {j})"
                )));
            }
        }
        let op_norm_sq = operator_norm(operator, &PowerIterationOptions::default()).powi(2);
        Ok(Self {
            operator,
            fixed_part,
            cosupport,
            op_norm_sq,
        })
    }

    /// Subdifferential at `x`, with the cosupport and signs taken under
    /// `zero_tol` (default relative threshold when `None`).
    pub fn at(operator: &'a AnalysisOperator<T>, x: &[T], zero_tol: Option<T>) -> Result<Self> {
        let model = cosupport(operator, x, zero_tol)?;
        let coeffs = operator.apply(x);
        let mut sign = sign_vector(&coeffs, T::zero());
        for &j in &model.cosupport {
            sign[j] = T::zero();
        }
        Self::new(operator, sign, model.cosupport)
    }

    pub fn operator(&self) -> &AnalysisOperator<T> {
        self.operator
    }

    pub fn fixed_part(&self) -> &[T] {
        &self.fixed_part
    }

    pub fn cosupport(&self) -> &[usize] {
        &self.cosupport
    }

    /// Number of nonzero analysis coefficients.
    pub fn sparsity(&self) -> usize {
        self.operator.num_rows() - self.cosupport.len()
    }

    /// `E ||Omega_Lambda g||_1 = sqrt(2/pi) sum_{i in Lambda} ||w_i||_2`.
    pub fn expected_cosupport_l1(&self) -> T {
        let norms = self.operator.row_norms();
        let mass: T = self.cosupport.iter().map(|&j| norms[j]).sum();
        (T::of(2.0) / T::PI()).sqrt() * mass
    }

    /// Squared distance from `g` to `t * subdifferential`, warm-started from
    /// and updating the box coordinates `alpha` (one per cosupport row).
    fn box_distance_sq(
        &self,
        g: &[T],
        t: T,
        alpha: &mut [T],
        tol: T,
        max_iters: usize,
    ) -> Result<T> {
        let op = self.operator;
        let (d, p) = (op.dim(), op.num_rows());
        let mut base = op.adjoint(&self.fixed_part);
        for (b, &gi) in base.iter_mut().zip(g) {
            *b = gi - t * *b;
        }
        if t == T::zero() || self.cosupport.is_empty() {
            return Ok(dot(&base, &base));
        }

        let lipschitz = t * t * self.op_norm_sq;
        let step = T::one() / lipschitz;
        let n = alpha.len();
        let mut coef = vec![T::zero(); p];
        let mut back = vec![T::zero(); d];
        let mut resid = vec![T::zero(); d];
        let mut analysed = vec![T::zero(); p];
        let mut grad = vec![T::zero(); n];
        let mut prev = alpha.to_vec();
        let mut y = alpha.to_vec();
        let mut next = vec![T::zero(); n];

        // r = base - t Omega^T (alpha embedded on the cosupport);
        // gradient of 0.5 ||r||^2 in alpha is -t (Omega r)_Lambda.
        let mut gradient_at = |point: &[T], grad: &mut [T], resid: &mut [T]| {
            coef.iter_mut().for_each(|c| *c = T::zero());
            for (&j, &a) in self.cosupport.iter().zip(point) {
                coef[j] = a;
            }
            op.adjoint_into(&coef, &mut back);
            for ((r, &b), &w) in resid.iter_mut().zip(&base).zip(&back) {
                *r = b - t * w;
            }
            op.apply_into(resid, &mut analysed);
            for (gr, &j) in grad.iter_mut().zip(&self.cosupport) {
                *gr = -t * analysed[j];
            }
        };

        let mut momentum_k = 1usize;
        for _ in 0..max_iters {
            let beta = T::of_usize(momentum_k - 1) / T::of_usize(momentum_k + 2);
            for ((yi, &ai), &pi) in y.iter_mut().zip(alpha.iter()).zip(&prev) {
                *yi = ai + beta * (ai - pi);
            }
            gradient_at(&y, &mut grad, &mut resid);
            let mut change = T::zero();
            for ((ni, &yi), &gi) in next.iter_mut().zip(&y).zip(&grad) {
                *ni = (yi - step * gi).max(-T::one()).min(T::one());
                change = change.max((*ni - yi).abs());
            }
            // Gradient-based restart of the momentum.
            let uphill: T = grad
                .iter()
                .zip(next.iter().zip(alpha.iter()))
                .map(|(&gi, (&ni, &ai))| gi * (ni - ai))
                .sum();
            prev.copy_from_slice(alpha);
            alpha.copy_from_slice(&next);
            if change < tol {
                gradient_at(alpha, &mut grad, &mut resid);
                return Ok(dot(&resid, &resid));
            }
            momentum_k = if uphill > T::zero() { 1 } else { momentum_k + 1 };
        }

        gradient_at(alpha, &mut grad, &mut resid);
        // Frank-Wolfe gap over the box bounds the suboptimality of 0.5 ||r||^2.
        let gap: T = grad
            .iter()
            .zip(alpha.iter())
            .map(|(&gi, &ai)| gi * ai + gi.abs())
            .sum();
        Err(Error::NotConverged {
            method: "box-constrained distance",
            iterations: max_iters,
            residual: gap.as_f64(),
            best: vec![norm2(&resid).as_f64()],
        })
    }
}

/// `dist(g, t * subdifferential)` by projected gradient over the box
/// coordinates, started from zero, step `1 / (t^2 ||Omega||^2)`, stopping
/// when a projected step moves no coordinate by more than `tol`.
///
/// On failure the error carries the best distance in `best[0]` and a
/// Frank-Wolfe gap estimate of the squared objective in `residual`.
pub fn dist_to_scaled_subdiff<T: Scalar>(
    g: &[T],
    spec: &SubdifferentialSpec<'_, T>,
    t: T,
    tol: T,
    max_iters: usize,
) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(Error::invalid("scale t must be non-negative"));
    }
    if g.len() != spec.operator.dim() {
        return Err(Error::invalid("g has the wrong dimension"));
    }
    if t == T::zero() {
        return Ok(norm2(g));
    }
    let mut alpha = vec![T::zero(); spec.cosupport.len()];
    Ok(spec
        .box_distance_sq(g, t, &mut alpha, tol, max_iters)?
        .sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WidthEstimate<T> {
    pub d: usize,
    pub p: usize,
    pub s: usize,
    pub samples: usize,
    /// Minimizing scale found by the search.
    pub t_star: T,
    /// Monte-Carlo mean of `dist(g, t_star * subdifferential)^2`.
    pub mean_sq_dist: T,
    pub std_err: T,
    /// `d - (E ||Omega_Lambda g||_1)^2 / G^2` with `G` the operator's
    /// l1-gain bound.
    pub closed_form_upper: T,
}

pub const WIDTH_CSV_HEADER: &str = "d,p,s,samples,t_star,mean_sq_dist,std_err,closed_form_upper";

impl<T: Scalar> WidthEstimate<T> {
    pub fn csv_row(&self) -> String {
        use crate::io::fmt_f64;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.d,
            self.p,
            self.s,
            self.samples,
            fmt_f64(self.t_star.as_f64()),
            fmt_f64(self.mean_sq_dist.as_f64()),
            fmt_f64(self.std_err.as_f64()),
            fmt_f64(self.closed_form_upper.as_f64()),
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct WidthOptions<T> {
    /// Stopping tolerance of the inner distance solver.
    pub tol: T,
    pub max_iters: usize,
    /// Width of the final `t` bracket relative to the search interval.
    pub t_rel_tol: T,
}

impl<T: Scalar> Default for WidthOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-8),
            max_iters: 10_000,
            t_rel_tol: T::of(1e-3),
        }
    }
}

/// Monte-Carlo estimate of `inf_t E dist(g, t * subdifferential)^2`.
pub fn width_upper_mc<T: Scalar>(
    spec: &SubdifferentialSpec<'_, T>,
    rng: &mut SeededRng,
    samples: usize,
) -> Result<WidthEstimate<T>> {
    width_upper_mc_with(spec, rng, samples, &WidthOptions::default())
}

/// [`width_upper_mc`] with explicit solver options.
///
/// The same Gaussian draws are reused for every `t` so the objective is a
/// smooth function of `t`; `t` is searched on `[0, 4 t0]` where `t0` is the
/// scale minimizing the closed-form quadratic upper bound.
pub fn width_upper_mc_with<T: Scalar>(
    spec: &SubdifferentialSpec<'_, T>,
    rng: &mut SeededRng,
    samples: usize,
    opts: &WidthOptions<T>,
) -> Result<WidthEstimate<T>> {
    if samples < 100 {
        return Err(Error::invalid(format!(
            "width estimation needs at least 100 samples, got {samples}"
        )));
    }
    let op = spec.operator;
    let d = op.dim();
    let gain = op.l1_gain_bound();
    let expected = spec.expected_cosupport_l1();
    let closed_form_upper = T::of_usize(d) - (expected / gain).powi(2);
    let t_closed = expected / (gain * gain);
    let t_hi = if t_closed > T::zero() {
        T::of(4.0) * t_closed
    } else {
        T::one()
    };

    let mut draws: Vec<(Vec<T>, Vec<T>)> = Vec::with_capacity(samples);
    for _ in 0..samples {
        let g: Vec<T> = (0..d).map(|_| T::of(rng.gaussian())).collect();
        draws.push((g, vec![T::zero(); spec.cosupport.len()]));
    }

    let evaluate = |draws: &mut Vec<(Vec<T>, Vec<T>)>, t: T| -> Result<Vec<T>> {
        draws
            .par_iter_mut()
            .map(|(g, alpha)| spec.box_distance_sq(g, t, alpha, opts.tol, opts.max_iters))
            .collect()
    };
    let mean = |v: &[T]| v.iter().copied().sum::<T>() / T::of_usize(v.len());

    let mut failure: Option<Error> = None;
    let (t_search, f_search) = minimize_scalar(
        |t| {
            if failure.is_some() {
                return T::infinity();
            }
            match evaluate(&mut draws, t) {
                Ok(v) => mean(&v),
                Err(e) => {
                    failure = Some(e);
                    T::infinity()
                }
            }
        },
        T::zero(),
        t_hi,
        opts.t_rel_tol * t_hi,
    );
    if let Some(e) = failure {
        return Err(e);
    }

    let at_zero = evaluate(&mut draws, T::zero())?;
    let t_star = if mean(&at_zero) <= f_search {
        T::zero()
    } else {
        t_search
    };
    let values = if t_star == T::zero() {
        at_zero
    } else {
        evaluate(&mut draws, t_star)?
    };
    let mean_sq = mean(&values);
    let n = T::of_usize(samples);
    let var = values.iter().map(|&v| (v - mean_sq).powi(2)).sum::<T>() / (n - T::one());
    Ok(WidthEstimate {
        d,
        p: op.num_rows(),
        s: spec.sparsity(),
        samples,
        t_star,
        mean_sq_dist: mean_sq,
        std_err: (var / n).sqrt(),
        closed_form_upper,
    })
}

/// Heuristic upper bound on `inf { ||M v||_2 : v in T(x), ||v||_2 = 1 }`,
/// the minimal gain of `M` over the descent cone of `||Omega . ||_1` at `x`.
///
/// Each sampled direction starts from a Gaussian vector `h`; every other
/// draw is first projected onto the null space of the cosupport rows so it
/// keeps `Omega x` zero there. It is then shrunk towards `-x` just enough
/// that the directional derivative of `||Omega . ||_1` is non-positive,
/// which places it in the descent cone. The smallest observed gain is
/// returned.
///
/// The sampler covers only part of the cone, so the result can exceed the
/// true infimum. It is a diagnostic for falsifying an optimistic `tau`; it
/// never certifies recovery.
pub fn tangent_cone_min_gain<T: Scalar>(
    x: &[T],
    op: &AnalysisOperator<T>,
    m: &DenseMatrix<T>,
    rng: &mut SeededRng,
    n_dirs: usize,
) -> Result<T> {
    if n_dirs == 0 {
        return Err(Error::invalid("need at least one direction"));
    }
    let d = op.dim();
    if x.len() != d || m.cols() != d {
        return Err(Error::invalid(format!(
            "dimension mismatch: x has {}, M has {} columns, operator expects {d}",
            x.len(),
            m.cols()
        )));
    }
    let model = cosupport(op, x, None)?;
    let coeffs = op.apply(x);
    let mut sign = sign_vector(&coeffs, T::zero());
    for &j in &model.cosupport {
        sign[j] = T::zero();
    }
    let mass = norm1(&coeffs);
    let cosupport_rows = if model.cosupport.is_empty() {
        None
    } else {
        let rows: Vec<Vec<T>> = model.cosupport.iter().map(|&j| op.row_dense(j)).collect();
        Some(DenseMatrix::from_rows(&rows)?)
    };

    let mut best: Option<T> = None;
    let mut u = vec![T::zero(); d];
    let mut mu = vec![T::zero(); m.rows()];
    let tiny = T::of(1e-8);
    for k in 0..n_dirs {
        let h: Vec<T> = (0..d).map(|_| T::of(rng.gaussian())).collect();
        let h_norm = norm2(&h);
        let project = k % 2 == 1 || mass == T::zero();
        let mut dir = h;
        if project {
            if let Some(rows) = &cosupport_rows {
                let target = rows.apply(&dir);
                let q = match min_norm_least_squares(rows, &target, T::of(1e-10), 10 * d) {
                    Ok(q) => q,
                    Err(Error::NotConverged { best, .. }) => best.into_iter().map(T::of).collect(),
                    Err(e) => return Err(e),
                };
                for (di, qi) in dir.iter_mut().zip(q) {
                    *di = *di - qi;
                }
            }
        }
        // Directional derivative of ||Omega . ||_1 at x along dir.
        let analysed = op.apply(&dir);
        let slope = dot(&sign, &analysed)
            + model
                .cosupport
                .iter()
                .map(|&j| analysed[j].abs())
                .sum::<T>();
        let shrink = if mass > T::zero() {
            (slope / mass).max(T::zero())
        } else if slope > tiny * h_norm {
            continue;
        } else {
            T::zero()
        };
        for ((ui, &di), &xi) in u.iter_mut().zip(&dir).zip(x) {
            *ui = di - shrink * xi;
        }
        let norm = norm2(&u);
        if !(norm > tiny * h_norm) {
            continue;
        }
        u.iter_mut().for_each(|ui| *ui = *ui / norm);
        m.apply_into(&u, &mut mu);
        let gain = norm2(&mu);
        best = Some(best.map_or(gain, |b: T| b.min(gain)));
    }
    best.ok_or_else(|| {
        Error::NoFeasibleDirection(format!(
            "none of {n_dirs} sampled directions is a nonzero descent direction"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scale_is_norm_of_g() {
        let op = AnalysisOperator::<f64>::diff1d(6).unwrap();
        let spec = SubdifferentialSpec::at(&op, &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0], None).unwrap();
        let g = [0.3, -1.0, 2.0, 0.5, 0.0, -0.7];
        assert_eq!(dist_to_scaled_subdiff(&g, &spec, 0.0, 1e-8, 100).unwrap(), norm2(&g));
    }

    #[test]
    fn g_inside_box_has_zero_distance() {
        let op = AnalysisOperator::from_rows(DenseMatrix::<f64>::identity(4)).unwrap();
        let spec = SubdifferentialSpec::at(&op, &[0.0; 4], None).unwrap();
        assert_eq!(spec.cosupport().len(), 4);
        let g = [0.5, -1.2, 0.0, 1.9];
        let dist = dist_to_scaled_subdiff(&g, &spec, 2.0, 1e-12, 10_000).unwrap();
        assert!(dist < 1e-9, "distance {dist}");
    }

    #[test]
    fn negative_scale_rejected() {
        let op = AnalysisOperator::<f64>::diff1d(4).unwrap();
        let spec = SubdifferentialSpec::at(&op, &[1.0; 4], None).unwrap();
        assert!(dist_to_scaled_subdiff(&[0.0; 4], &spec, -1.0, 1e-8, 10).is_err());
    }

    #[test]
    fn malformed_fixed_part_rejected() {
        let op = AnalysisOperator::<f64>::diff1d(4).unwrap();
        assert!(SubdifferentialSpec::new(&op, vec![1.0, 0.0, 0.5], vec![1]).is_err());
        assert!(SubdifferentialSpec::new(&op, vec![1.0, 1.0, 0.0], vec![1]).is_err());
        assert!(SubdifferentialSpec::new(&op, vec![1.0, 0.0, -1.0], vec![1]).is_ok());
    }

    #[test]
    fn iteration_cap_reports_best_value() {
        let op = AnalysisOperator::<f64>::diff1d(40).unwrap();
        let mut x = vec![0.0; 40];
        x[20..].iter_mut().for_each(|v| *v = 1.0);
        let spec = SubdifferentialSpec::at(&op, &x, None).unwrap();
        let mut rng = SeededRng::new(3, 0);
        let g: Vec<f64> = (0..40).map(|_| rng.gaussian()).collect();
        match dist_to_scaled_subdiff(&g, &spec, 0.7, 1e-14, 2) {
            Err(Error::NotConverged { best, .. }) => assert!(best[0] <= norm2(&g) + 1e-12),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn dense_sign_identity_width_at_most_d() {
        let d = 20;
        let op = AnalysisOperator::from_rows(DenseMatrix::<f64>::identity(d)).unwrap();
        let x: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -2.0 }).collect();
        let spec = SubdifferentialSpec::at(&op, &x, None).unwrap();
        let est = width_upper_mc(&spec, &mut SeededRng::new(9, 9), 200).unwrap();
        assert!(est.mean_sq_dist <= d as f64 + 3.0 * est.std_err);
        assert_eq!(est.s, d);
    }

    #[test]
    fn too_few_samples() {
        let op = AnalysisOperator::<f64>::diff1d(5).unwrap();
        let spec = SubdifferentialSpec::at(&op, &[1.0; 5], None).unwrap();
        assert!(width_upper_mc(&spec, &mut SeededRng::new(1, 1), 99).is_err());
    }

    #[test]
    fn identity_measurements_have_unit_gain() {
        let d = 12;
        let op = AnalysisOperator::<f64>::diff1d(d).unwrap();
        let mut x = vec![0.0; d];
        x[4..].iter_mut().for_each(|v| *v = 2.0);
        let gain = tangent_cone_min_gain(&x, &op, &DenseMatrix::identity(d), &mut SeededRng::new(1, 0), 30).unwrap();
        assert!((gain - 1.0).abs() < 1e-12);
        let zero = tangent_cone_min_gain(&x, &op, &DenseMatrix::zeros(3, d), &mut SeededRng::new(1, 0), 30).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn zero_signal_under_a_frame_has_no_direction() {
        let op = AnalysisOperator::from_rows(DenseMatrix::<f64>::identity(5)).unwrap();
        let m = DenseMatrix::identity(5);
        assert!(matches!(
            tangent_cone_min_gain(&[0.0; 5], &op, &m, &mut SeededRng::new(2, 2), 10),
            Err(Error::NoFeasibleDirection(_))
        ));
    }
}
