//! Closed-form bounds on the number of Gaussian measurements that suffice
//! for analysis l1-recovery of a cosparse signal.
//!
//! Every bound has the same shape: with probability at least `1 - eps`,
//! recovery succeeds (with error at most `2 eta / tau`) once
//!
//! ```text
//! m^2 / (m + 1) >= (sqrt(d - E^2 / G^2) + sqrt(2 ln(1/eps)) + tau)^2
//! ```
//!
//! where `E = E ||Omega_Lambda g||_1` is the expected l1 mass of the
//! cosupport rows applied to a standard Gaussian vector and `G` bounds
//! `max_{||z||_2 <= 1} ||Omega z||_1`. The specializations below substitute
//! the known values of `E` and `G` for difference operators and frames.
//!
//! Formulas are evaluated in `f64`; inputs are counts and probabilities.

use std::f64::consts::{E as EULER, PI};

use serde::Serialize;

use crate::error::{Error, Result};

/// Failure probability and robustness margin of a bound query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundQuery {
    pub epsilon: f64,
    pub tau: f64,
}

impl BoundQuery {
    pub fn new(epsilon: f64, tau: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(format!(
                "failure probability must lie in (0, 1), got {epsilon}"
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!(
                "robustness margin must be positive, got {tau}"
            )));
        }
        Ok(Self { epsilon, tau })
    }

    /// `sqrt(2 ln(1/eps))`
    pub fn confidence_term(&self) -> f64 {
        (2.0 * (1.0 / self.epsilon).ln()).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub d: usize,
    /// Smallest admissible number of measurements.
    pub m_min: u64,
    /// Right-hand-side root `R = width + confidence + tau`.
    pub rhs: f64,
    /// `sqrt(d - E^2 / G^2)`, the Gaussian-width surrogate.
    pub width_surrogate: f64,
    pub confidence_term: f64,
    pub tau: f64,
    /// `m_min / d`.
    pub fraction: f64,
    /// `width_surrogate^2 / d`: the bound with lower-order terms dropped.
    pub rough_fraction: f64,
}

/// Smallest integer `m >= 1` with `m^2 / (m + 1) >= r^2`.
pub fn min_measurements(r: f64) -> Result<u64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::invalid(format!(
            "bound root must be finite and non-negative, got {r}"
        )));
    }
    let r2 = r * r;
    let holds = |m: u64| {
        let m = m as f64;
        m * m / (m + 1.0) >= r2
    };
    // Positive root of m^2 - r^2 m - r^2 = 0, then fix rounding.
    let mut m = ((r2 + (r2 * r2 + 4.0 * r2).sqrt()) / 2.0).ceil().max(1.0) as u64;
    while m > 1 && holds(m - 1) {
        m -= 1;
    }
    while !holds(m) {
        m += 1;
    }
    Ok(m)
}

fn report(d: usize, width_sq: f64, query: &BoundQuery) -> Result<BoundReport> {
    let width = width_sq.max(0.0).sqrt();
    let confidence = query.confidence_term();
    let rhs = width + confidence + query.tau;
    let m_min = min_measurements(rhs)?;
    Ok(BoundReport {
        d,
        m_min,
        rhs,
        width_surrogate: width,
        confidence_term: confidence,
        tau: query.tau,
        fraction: m_min as f64 / d as f64,
        rough_fraction: width_sq.max(0.0) / d as f64,
    })
}

/// General bound from the expected cosupport l1 mass `expected_sub_l1` and
/// the l1-gain bound `max_omega_l1`.
pub fn general_bound(
    query: &BoundQuery,
    expected_sub_l1: f64,
    max_omega_l1: f64,
    d: usize,
) -> Result<BoundReport> {
    if d == 0 {
        return Err(Error::invalid("ambient dimension must be positive"));
    }
    if !(expected_sub_l1 >= 0.0) || !(max_omega_l1 > 0.0) {
        return Err(Error::invalid(format!(
            "need expected cosupport mass >= 0 and l1 gain > 0, got {expected_sub_l1} and {max_omega_l1}"
        )));
    }
    let ratio_sq = (expected_sub_l1 / max_omega_l1).powi(2);
    let d_f = d as f64;
    if ratio_sq > d_f * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "inconsistent surrogate inputs: (E/G)^2 = {ratio_sq} exceeds d = {d}"
        )));
    }
    report(d, d_f - ratio_sq, query)
}

/// `sqrt(2/pi) * sum of row norms`: the exact value of
/// `E ||Omega_Lambda g||_1` for a standard Gaussian `g`.
pub fn expected_cosupport_l1_rownorm(row_norms: &[f64]) -> f64 {
    (2.0 / PI).sqrt() * row_norms.iter().sum::<f64>()
}

fn check_tv1d(d: usize, s: usize) -> Result<()> {
    if d < 2 || s > d - 1 {
        return Err(Error::invalid(format!(
            "1D difference sparsity must satisfy 0 <= s <= d-1 with d >= 2, got d={d}, s={s}"
        )));
    }
    Ok(())
}

/// `1 - (1/pi) (1 - (s+1)/d)^2`
pub fn tv1d_rough_fraction(d: usize, s: usize) -> Result<f64> {
    check_tv1d(d, s)?;
    let t = 1.0 - (s as f64 + 1.0) / d as f64;
    Ok(1.0 - t * t / PI)
}

/// Bound for a gradient-sparse signal under the 1D difference operator.
pub fn tv1d_bound(d: usize, s: usize, query: &BoundQuery) -> Result<BoundReport> {
    let fraction = tv1d_rough_fraction(d, s)?;
    report(d, d as f64 * fraction, query)
}

fn check_tv2d(side: usize, s: usize) -> Result<()> {
    if side < 2 || s > 2 * side * (side - 1) {
        return Err(Error::invalid(format!(
            "2D difference sparsity must satisfy 0 <= s <= 2 d0 (d0-1) with d0 >= 2, got d0={side}, s={s}"
        )));
    }
    Ok(())
}

/// `1 - (1/pi) (1 - 1/d0 - s/(2 d0^2))^2`
pub fn tv2d_rough_fraction(side: usize, s: usize) -> Result<f64> {
    check_tv2d(side, s)?;
    let n = side as f64;
    let t = 1.0 - 1.0 / n - s as f64 / (2.0 * n * n);
    Ok(1.0 - t * t / PI)
}

/// Bound for an image of side `d0` under the 2D difference operator.
pub fn tv2d_bound(side: usize, s: usize, query: &BoundQuery) -> Result<BoundReport> {
    let fraction = tv2d_rough_fraction(side, s)?;
    let d = side * side;
    report(d, d as f64 * fraction, query)
}

fn frame_width_sq(d: usize, p: usize, upper: f64, cosupport_row_norms: &[f64]) -> Result<f64> {
    if d == 0 || p == 0 {
        return Err(Error::invalid("frame dimensions must be positive"));
    }
    if !(upper > 0.0) || !upper.is_finite() {
        return Err(Error::invalid(format!("upper frame bound must be positive, got {upper}")));
    }
    if cosupport_row_norms.len() > p || cosupport_row_norms.iter().any(|n| !(*n >= 0.0)) {
        return Err(Error::invalid("cosupport row norms must be non-negative, at most p of them"));
    }
    let mass: f64 = cosupport_row_norms.iter().sum();
    let ratio_sq = 2.0 / PI * mass * mass / (p as f64 * upper);
    if ratio_sq > d as f64 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "(2/pi) (sum ||w_i||)^2 / (p B) = {ratio_sq} exceeds d = {d}"
        )));
    }
    Ok(d as f64 - ratio_sq)
}

/// `1 - (2/pi) (sum_Lambda ||w_i||)^2 / (p B d)`
pub fn frame_rough_fraction(d: usize, p: usize, upper: f64, cosupport_row_norms: &[f64]) -> Result<f64> {
    Ok(frame_width_sq(d, p, upper, cosupport_row_norms)? / d as f64)
}

/// Rough fraction for a tight unit-norm frame (`A = B = p/d`) and sparsity
/// `s`: `1 - 2 (p-s)^2 / (pi p^2)`.
pub fn tight_frame_rough_fraction(p: f64, s: f64) -> Result<f64> {
    if !(p > 0.0) || !(0.0..=p).contains(&s) {
        return Err(Error::invalid(format!("need 0 <= s <= p and p > 0, got s={s}, p={p}")));
    }
    Ok(1.0 - 2.0 * (p - s).powi(2) / (PI * p * p))
}

/// Bound for a frame with upper frame bound `upper` and the row norms of
/// the cosupport rows.
pub fn frame_bound(
    d: usize,
    p: usize,
    upper: f64,
    cosupport_row_norms: &[f64],
    query: &BoundQuery,
) -> Result<BoundReport> {
    report(d, frame_width_sq(d, p, upper, cosupport_row_norms)?, query)
}

/// Bounds from the compressive sensing literature, for comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonBounds {
    /// `c s ln(d/s)`
    pub standard: f64,
    /// `c sqrt(s d) ln d`
    pub caixu: f64,
    /// `(2B/A) s ln(e p / s)`
    pub frame_prev: f64,
}

/// Default constant for the comparison bounds.
pub const DEFAULT_COMPARISON_CONSTANT: f64 = 2.0;

/// Literature bounds at sparsity `s`. At `s = 0` the two sparse-vector
/// bounds are undefined and reported as `+inf`; the frame bound takes its
/// limit 0.
pub fn comparison_bounds(
    s: usize,
    d: usize,
    p: usize,
    lower: f64,
    upper: f64,
    c: f64,
) -> Result<ComparisonBounds> {
    if d == 0 || p == 0 || s > p {
        return Err(Error::invalid(format!(
            "need 0 <= s <= p with d, p positive; got s={s}, d={d}, p={p}"
        )));
    }
    if !(lower > 0.0 && lower <= upper) {
        return Err(Error::invalid(format!(
            "frame bounds must satisfy 0 < A <= B, got A={lower}, B={upper}"
        )));
    }
    if s == 0 {
        return Ok(ComparisonBounds {
            standard: f64::INFINITY,
            caixu: f64::INFINITY,
            frame_prev: 0.0,
        });
    }
    let (s, d, p) = (s as f64, d as f64, p as f64);
    Ok(ComparisonBounds {
        standard: c * s * (d / s).ln(),
        caixu: c * (s * d).sqrt() * d.ln(),
        frame_prev: 2.0 * upper / lower * s * (EULER * p / s).ln(),
    })
}

/// Previous frame bound, rescaled by `d`, for a tight frame with
/// redundancy `kappa = p/d` at sparsity fraction `r = s/p`:
/// `2 kappa r ln(e / r)`.
pub fn prev_frame_fraction(kappa: f64, s_over_p: f64) -> f64 {
    if s_over_p <= 0.0 {
        return 0.0;
    }
    2.0 * kappa * s_over_p * (EULER / s_over_p).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure1Row {
    pub s_over_p: f64,
    pub new_fraction: f64,
    /// One entry per redundancy in [`Figure1Table::kappas`].
    pub prev_fractions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure1Table {
    pub kappas: Vec<f64>,
    pub rows: Vec<Figure1Row>,
}

impl Figure1Table {
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["s_over_p".to_string(), "new_bound_fraction".to_string()];
        cols.extend(
            self.kappas
                .iter()
                .map(|k| format!("prev_bound_fraction_kappa_{k}")),
        );
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![crate::io::fmt_f64(row.s_over_p), crate::io::fmt_f64(row.new_fraction)];
            cells.extend(row.prev_fractions.iter().map(|&v| crate::io::fmt_f64(v)));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Measurement fractions `m/d` against the sparsity fraction `s/p` for
/// tight unit-norm frames with `p = kappa d`: the new bound and the
/// previous frame bound for each `kappa`. `samples` points cover `[0, 1]`.
pub fn figure1_curves(d: usize, kappas: &[f64], samples: usize) -> Result<Figure1Table> {
    if d == 0 || samples < 2 {
        return Err(Error::invalid("figure 1 needs d >= 1 and at least 2 samples"));
    }
    if kappas.is_empty() || kappas.iter().any(|k| !(*k >= 1.0) || !k.is_finite()) {
        return Err(Error::invalid("redundancies must be finite and >= 1"));
    }
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let r = i as f64 / (samples - 1) as f64;
        // The new bound does not depend on the redundancy; evaluate it at
        // p = d with s = r p.
        let p = d as f64;
        let new_fraction = tight_frame_rough_fraction(p, r * p)?;
        let prev_fractions = kappas.iter().map(|&k| prev_frame_fraction(k, r)).collect();
        rows.push(Figure1Row {
            s_over_p: r,
            new_fraction,
            prev_fractions,
        });
    }
    Ok(Figure1Table {
        kappas: kappas.to_vec(),
        rows,
    })
}
