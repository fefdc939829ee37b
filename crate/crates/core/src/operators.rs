//! Analysis operators: one- and two-dimensional finite differences and
//! frames given by explicit rows.
//!
//! Difference operators are matrix-free; `apply` and `adjoint` work by index
//! arithmetic. Two-dimensional signals are images `X` of side `d0`
//! vectorized column by column (`x[i + j*d0] = X[i][j]`), and the output
//! lists all vertical differences `X[i+1][j] - X[i][j]` first (column by
//! column), then all horizontal differences `X[i][j+1] - X[i][j]`.

use crate::error::{Error, Result};
use crate::numerics::{
    norm2, norm_inf, operator_norm, power_iteration, DenseMatrix, LinearMap,
    PowerIterationOptions, SeededRng,
};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    Diff1d,
    Diff2d,
    Frame,
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OperatorKind::Diff1d => "diff1d",
            OperatorKind::Diff2d => "diff2d",
            OperatorKind::Frame => "frame",
        })
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diff1d" => Ok(OperatorKind::Diff1d),
            "diff2d" => Ok(OperatorKind::Diff2d),
            "frame" => Ok(OperatorKind::Frame),
            other => Err(Error::invalid(format!(
                "unknown operator kind {other:?} (expected diff1d, diff2d or frame)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
enum Repr<T> {
    Diff1d { d: usize },
    Diff2d { side: usize },
    Frame { rows: DenseMatrix<T> },
}

/// Linear map `Omega: R^d -> R^p`. Immutable after construction.
#[derive(Clone, Debug)]
pub struct AnalysisOperator<T> {
    repr: Repr<T>,
}

/// Frame bounds `A ||x||^2 <= ||Omega x||^2 <= B ||x||^2` and row norms.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameInfo<T> {
    pub lower: T,
    pub upper: T,
    pub row_norms: Vec<T>,
}

/// A signal together with the zero pattern of its analysis coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalModel<T> {
    pub x: Vec<T>,
    /// Indices `j` with `(Omega x)_j = 0`, increasing.
    pub cosupport: Vec<usize>,
    /// Number of nonzero analysis coefficients.
    pub sparsity: usize,
}

impl<T> SignalModel<T> {
    pub fn cosparsity(&self) -> usize {
        self.cosupport.len()
    }
}

impl<T: Scalar> AnalysisOperator<T> {
    /// One-dimensional difference operator, `(Omega x)_i = x_{i+1} - x_i`.
    pub fn diff1d(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("diff1d needs d >= 2, got {d}")));
        }
        Ok(Self {
            repr: Repr::Diff1d { d },
        })
    }

    /// Two-dimensional difference operator on `side x side` images.
    pub fn diff2d(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid(format!("diff2d needs d0 >= 2, got {side}")));
        }
        Ok(Self {
            repr: Repr::Diff2d { side },
        })
    }

    /// Frame operator whose analysis atoms are the rows of `rows`.
    /// No frame condition is checked here; see [`frame_bounds`].
    pub fn from_rows(rows: DenseMatrix<T>) -> Result<Self> {
        if rows.rows() == 0 || rows.cols() == 0 {
            return Err(Error::invalid("frame needs at least one row and column"));
        }
        Ok(Self {
            repr: Repr::Frame { rows },
        })
    }

    pub fn kind(&self) -> OperatorKind {
        match self.repr {
            Repr::Diff1d { .. } => OperatorKind::Diff1d,
            Repr::Diff2d { .. } => OperatorKind::Diff2d,
            Repr::Frame { .. } => OperatorKind::Frame,
        }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Diff1d { d } => *d,
            Repr::Diff2d { side } => side * side,
            Repr::Frame { rows } => rows.cols(),
        }
    }

    /// Number of analysis coefficients.
    pub fn num_rows(&self) -> usize {
        match &self.repr {
            Repr::Diff1d { d } => d - 1,
            Repr::Diff2d { side } => 2 * side * (side - 1),
            Repr::Frame { rows } => rows.rows(),
        }
    }

    /// Side length for the 2D difference operator.
    pub fn side(&self) -> Option<usize> {
        match self.repr {
            Repr::Diff2d { side } => Some(side),
            _ => None,
        }
    }

    pub fn frame_rows(&self) -> Option<&DenseMatrix<T>> {
        match &self.repr {
            Repr::Frame { rows } => Some(rows),
            _ => None,
        }
    }

    /// Nonzero pattern of row `j` as `(column, value)` pairs.
    pub fn row(&self, j: usize) -> Vec<(usize, T)> {
        assert!(j < self.num_rows(), "row {j} out of range");
        let one = T::one();
        match &self.repr {
            Repr::Diff1d { .. } => vec![(j, -one), (j + 1, one)],
            Repr::Diff2d { side } => {
                let n = side;
                let vertical = n * (n - 1);
                if j < vertical {
                    let (col, i) = (j / (n - 1), j % (n - 1));
                    let k = i + col * n;
                    vec![(k, -one), (k + 1, one)]
                } else {
                    let k = j - vertical;
                    vec![(k, -one), (k + n, one)]
                }
            }
            Repr::Frame { rows } => rows
                .row(j)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(|(c, &v)| (c, v))
                .collect(),
        }
    }

    /// Row `j` as a dense vector in `R^d`.
    pub fn row_dense(&self, j: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (c, v) in self.row(j) {
            out[c] = v;
        }
        out
    }

    /// Euclidean norms of all rows.
    pub fn row_norms(&self) -> Vec<T> {
        match &self.repr {
            Repr::Frame { rows } => (0..rows.rows()).map(|j| norm2(rows.row(j))).collect(),
            _ => vec![T::of(2.0).sqrt(); self.num_rows()],
        }
    }

    /// Upper bound on `max_{||z||_2 <= 1} ||Omega z||_1`: `2 sqrt(d)` for
    /// diff1d, `4 d0` for diff2d and `sqrt(p B)` for frames, `B` being the
    /// upper frame bound estimated by power iteration.
    pub fn l1_gain_bound(&self) -> T {
        match &self.repr {
            Repr::Diff1d { d } => T::of(2.0) * T::of_usize(*d).sqrt(),
            Repr::Diff2d { side } => T::of(4.0) * T::of_usize(*side),
            Repr::Frame { rows } => {
                let b = operator_norm(rows, &PowerIterationOptions::default()).powi(2);
                (T::of_usize(rows.rows()) * b).sqrt()
            }
        }
    }

    /// Dense `p x d` matrix of the operator.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.num_rows(), self.dim());
        for j in 0..self.num_rows() {
            for (c, v) in self.row(j) {
                m.set(j, c, v);
            }
        }
        m
    }
}

impl<T: Scalar> LinearMap<T> for AnalysisOperator<T> {
    fn nrows(&self) -> usize {
        self.num_rows()
    }

    fn ncols(&self) -> usize {
        self.dim()
    }

    fn apply_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.dim());
        match &self.repr {
            Repr::Diff1d { .. } => {
                for (o, w) in out.iter_mut().zip(x.windows(2)) {
                    *o = w[1] - w[0];
                }
            }
            Repr::Diff2d { side } => {
                let n = *side;
                let (vert, horiz) = out.split_at_mut(n * (n - 1));
                for (col, chunk) in x.chunks_exact(n).enumerate() {
                    for (i, w) in chunk.windows(2).enumerate() {
                        vert[col * (n - 1) + i] = w[1] - w[0];
                    }
                }
                for (k, h) in horiz.iter_mut().enumerate() {
                    *h = x[k + n] - x[k];
                }
            }
            Repr::Frame { rows } => rows.apply_into(x, out),
        }
    }

    fn adjoint_into(&self, u: &[T], out: &mut [T]) {
        debug_assert_eq!(u.len(), self.num_rows());
        match &self.repr {
            Repr::Diff1d { d } => {
                out[0] = -u[0];
                for i in 1..d - 1 {
                    out[i] = u[i - 1] - u[i];
                }
                out[d - 1] = u[d - 2];
            }
            Repr::Diff2d { side } => {
                let n = *side;
                out.iter_mut().for_each(|o| *o = T::zero());
                let (vert, horiz) = u.split_at(n * (n - 1));
                for col in 0..n {
                    for i in 0..n - 1 {
                        let v = vert[col * (n - 1) + i];
                        let k = i + col * n;
                        out[k] = out[k] - v;
                        out[k + 1] = out[k + 1] + v;
                    }
                }
                for (k, &h) in horiz.iter().enumerate() {
                    out[k] = out[k] - h;
                    out[k + n] = out[k + n] + h;
                }
            }
            Repr::Frame { rows } => rows.adjoint_into(u, out),
        }
    }
}

/// Default zero threshold for analysis coefficients `v`:
/// `1e-9 * max(1, ||v||_inf)`.
pub fn default_zero_tol<T: Scalar>(v: &[T]) -> T {
    T::of(1e-9) * norm_inf(v).max(T::one())
}

/// Componentwise sign with entries of magnitude `<= zero_tol` mapped to 0.
pub fn sign_vector<T: Scalar>(v: &[T], zero_tol: T) -> Vec<T> {
    v.iter()
        .map(|&x| {
            if x.abs() > zero_tol {
                x.signum()
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Cosupport of `x`: rows with `|(Omega x)_j| <= zero_tol`. `None` selects
/// [`default_zero_tol`].
pub fn cosupport<T: Scalar>(
    op: &AnalysisOperator<T>,
    x: &[T],
    zero_tol: Option<T>,
) -> Result<SignalModel<T>> {
    if x.len() != op.dim() {
        return Err(Error::invalid(format!(
            "signal has length {}, operator expects {}",
            x.len(),
            op.dim()
        )));
    }
    let coeffs = op.apply(x);
    let tol = zero_tol.unwrap_or_else(|| default_zero_tol(&coeffs));
    let cosupport: Vec<usize> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= tol)
        .map(|(j, _)| j)
        .collect();
    Ok(SignalModel {
        x: x.to_vec(),
        sparsity: coeffs.len() - cosupport.len(),
        cosupport,
    })
}

const FRAME_THRESHOLD: f64 = 1e-10;

/// Frame bounds `A = lambda_min(Omega^T Omega)` and
/// `B = lambda_max(Omega^T Omega)`.
///
/// `B` comes from power iteration. `A` comes from inverse iteration on a
/// Cholesky factorization of the Gram matrix. Difference operators annihilate
/// constants and are rejected outright.
pub fn frame_bounds<T: Scalar>(op: &AnalysisOperator<T>) -> Result<FrameInfo<T>> {
    let Some(rows) = op.frame_rows() else {
        return Err(Error::NotAFrame { lower: 0.0 });
    };
    let opts = PowerIterationOptions {
        max_iters: 1000,
        ..PowerIterationOptions::default()
    };
    let upper = operator_norm(rows, &opts).powi(2);
    let d = op.dim();
    let rows_t = rows.transpose();
    let mut gram = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..=i {
            let v: f64 = rows_t
                .row(i)
                .iter()
                .zip(rows_t.row(j))
                .map(|(a, b)| a.as_f64() * b.as_f64())
                .sum();
            gram[i * d + j] = v;
            gram[j * d + i] = v;
        }
    }
    let not_a_frame = || Error::NotAFrame { lower: 0.0 };
    let chol = cholesky(&mut gram, d, FRAME_THRESHOLD * upper.as_f64().max(1.0)).ok_or_else(not_a_frame)?;
    let inv_opts = PowerIterationOptions {
        max_iters: 1000,
        tol: 1e-13,
        ..PowerIterationOptions::default()
    };
    let inv_top = power_iteration(
        d,
        |x: &[f64], out: &mut [f64]| {
            out.copy_from_slice(x);
            cholesky_solve(chol, d, out);
        },
        &inv_opts,
    );
    let lower = 1.0 / inv_top;
    if !(lower > FRAME_THRESHOLD) {
        return Err(Error::NotAFrame { lower });
    }
    Ok(FrameInfo {
        lower: T::of(lower),
        upper,
        row_norms: op.row_norms(),
    })
}

/// In-place lower Cholesky factor of a symmetric `n x n` matrix; `None` if a
/// pivot falls to `min_pivot` or below.
fn cholesky(a: &mut [f64], n: usize, min_pivot: f64) -> Option<&[f64]> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > min_pivot) {
            return None;
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / diag;
        }
    }
    Some(a)
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Frame of `p` i.i.d. Gaussian rows in `R^d`, each normalized to unit
/// length, with its estimated bounds.
pub fn random_unit_frame<T: Scalar>(
    rng: &mut SeededRng,
    p: usize,
    d: usize,
) -> Result<(AnalysisOperator<T>, FrameInfo<T>)> {
    if d == 0 || p < d {
        return Err(Error::invalid(format!(
            "a frame of R^{d} needs at least d rows and d >= 1, got p = {p}"
        )));
    }
    let mut rows = DenseMatrix::<T>::gaussian(rng, p, d);
    for j in 0..p {
        let row = rows.row_mut(j);
        let n = norm2(row);
        row.iter_mut().for_each(|v| *v = *v / n);
    }
    let op = AnalysisOperator::from_rows(rows)?;
    let info = frame_bounds(&op)?;
    Ok((op, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diff1d_small_example() {
        let op = AnalysisOperator::<f64>::diff1d(3).unwrap();
        assert_eq!(op.apply(&[1.0, 2.0, 4.0]), vec![1.0, 2.0]);
        assert_eq!(op.num_rows(), 2);
    }

    #[test]
    fn diff2d_small_example() {
        // X = [[1, 3], [2, 5]] stored column-major.
        let op = AnalysisOperator::<f64>::diff2d(2).unwrap();
        assert_eq!(op.apply(&[1.0, 2.0, 3.0, 5.0]), vec![1.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn constants_are_annihilated() {
        let one = AnalysisOperator::<f64>::diff1d(7).unwrap();
        assert!(one.apply(&[2.5; 7]).iter().all(|&v| v == 0.0));
        let two = AnalysisOperator::<f64>::diff2d(4).unwrap();
        assert!(two.apply(&[-1.0; 16]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_small_dimensions() {
        assert!(AnalysisOperator::<f64>::diff1d(1).is_err());
        assert!(AnalysisOperator::<f64>::diff2d(1).is_err());
    }

    #[test]
    fn row_structure() {
        let op = AnalysisOperator::<f64>::diff2d(3).unwrap();
        assert_eq!(op.num_rows(), 12);
        for j in 0..12 {
            let row = op.row(j);
            assert_eq!(row.len(), 2);
            assert_eq!(row[0].1, -1.0);
            assert_eq!(row[1].1, 1.0);
        }
        let sqrt2 = 2f64.sqrt();
        assert!(op.row_norms().iter().all(|&n| n == sqrt2));
        let one = AnalysisOperator::<f64>::diff1d(9).unwrap();
        assert!(one.row_norms().iter().all(|&n| n == sqrt2));
        assert_eq!(one.row(4), vec![(4, -1.0), (5, 1.0)]);
    }

    #[test]
    fn sign_examples() {
        assert_eq!(sign_vector(&[2.0, -3.0, 0.0], 1e-9), vec![1.0, -1.0, 0.0]);
        assert_eq!(sign_vector(&[0.0; 4], 1e-9), vec![0.0; 4]);
        let v = [0.3, -1e-3, 7.0, 0.0];
        let big: Vec<f64> = v.iter().map(|x| x * 1e6).collect();
        assert_eq!(sign_vector(&v, 1e-9), sign_vector(&big, 1e-9));
    }

    #[test]
    fn cosupport_examples() {
        let op = AnalysisOperator::<f64>::diff1d(5).unwrap();
        let flat = cosupport(&op, &[1.0; 5], None).unwrap();
        assert_eq!(flat.cosupport, vec![0, 1, 2, 3]);
        assert_eq!((flat.sparsity, flat.cosparsity()), (0, 4));

        // One jump between entries 2 and 3 (1-based): rows {1,3,4} are zero.
        let step = cosupport(&op, &[0.0, 0.0, 1.0, 1.0, 1.0], None).unwrap();
        assert_eq!(step.cosupport, vec![0, 2, 3]);
        assert_eq!((step.sparsity, step.cosparsity()), (1, 3));

        let op2 = AnalysisOperator::<f64>::diff2d(3).unwrap();
        let img = cosupport(&op2, &[4.0; 9], None).unwrap();
        assert_eq!((img.sparsity, img.cosparsity()), (0, 12));
    }

    #[test]
    fn cosupport_rejects_wrong_length() {
        let op = AnalysisOperator::<f64>::diff1d(5).unwrap();
        assert!(cosupport(&op, &[1.0; 4], None).is_err());
    }

    #[test]
    fn identity_frame_bounds() {
        let op = AnalysisOperator::from_rows(DenseMatrix::<f64>::identity(6)).unwrap();
        let info = frame_bounds(&op).unwrap();
        assert!((info.lower - 1.0).abs() < 1e-8);
        assert!((info.upper - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stacked_identity_is_tight() {
        let d = 5;
        let rows = DenseMatrix::<f64>::from_fn(2 * d, d, |i, j| if i % d == j { 1.0 } else { 0.0 });
        let info = frame_bounds(&AnalysisOperator::from_rows(rows).unwrap()).unwrap();
        assert!((info.lower - 2.0).abs() < 1e-8);
        assert!((info.upper - 2.0).abs() < 1e-8);
    }

    #[test]
    fn difference_operator_is_not_a_frame() {
        let op = AnalysisOperator::<f64>::diff1d(10).unwrap();
        assert!(matches!(frame_bounds(&op), Err(Error::NotAFrame { .. })));
    }

    #[test]
    fn random_frame_rows_are_unit() {
        let mut rng = SeededRng::new(1, 2);
        let (op, info) = random_unit_frame::<f64>(&mut rng, 30, 10).unwrap();
        assert!(info.row_norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
        assert!(info.lower > 0.0 && info.lower <= info.upper);
        assert_eq!(op.kind(), OperatorKind::Frame);
    }

    #[test]
    fn too_few_frame_rows() {
        let mut rng = SeededRng::new(1, 2);
        assert!(random_unit_frame::<f64>(&mut rng, 3, 4).is_err());
    }

    #[test]
    fn kind_round_trips_through_text() {
        for k in [OperatorKind::Diff1d, OperatorKind::Diff2d, OperatorKind::Frame] {
            assert_eq!(k.to_string().parse::<OperatorKind>().unwrap(), k);
        }
        assert!("wavelet".parse::<OperatorKind>().is_err());
    }
}
