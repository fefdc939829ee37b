use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::rng::SeededRng;

/// Matrix-free linear map `R^ncols -> R^nrows` with its adjoint.
pub trait LinearMap<T: Scalar> {
    /// Output dimension.
    fn nrows(&self) -> usize;
    /// Input dimension.
    fn ncols(&self) -> usize;
    /// `out = A x`, overwriting `out`.
    fn apply_into(&self, x: &[T], out: &mut [T]);
    /// `out = A^T y`, overwriting `out`.
    fn adjoint_into(&self, y: &[T], out: &mut [T]);

    fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows()];
        self.apply_into(x, &mut out);
        out
    }

    fn adjoint(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.ncols()];
        self.adjoint_into(y, &mut out);
        out
    }
}

impl<T: Scalar, L: LinearMap<T> + ?Sized> LinearMap<T> for &L {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply_into(&self, x: &[T], out: &mut [T]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        (**self).adjoint_into(y, out)
    }
}

/// The transpose of a wrapped map.
pub struct Adjoint<L>(pub L);

impl<T: Scalar, L: LinearMap<T>> LinearMap<T> for Adjoint<L> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn apply_into(&self, x: &[T], out: &mut [T]) {
        self.0.adjoint_into(x, out)
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        self.0.apply_into(y, out)
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "matrix entry ({}, {}) is not finite",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix with i.i.d. standard normal entries, filled row by row.
    pub fn gaussian(rng: &mut SeededRng, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| T::of(rng.gaussian()))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("rows have different lengths"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    /// Entry-wise conversion to another scalar type.
    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

impl<T: Scalar> LinearMap<T> for DenseMatrix<T> {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = dot(row, x);
        }
        if self.cols == 0 {
            out.iter_mut().for_each(|o| *o = T::zero());
        }
    }

    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        debug_assert_eq!(y.len(), self.rows);
        out.iter_mut().for_each(|o| *o = T::zero());
        if self.cols == 0 {
            return;
        }
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            axpy(yi, row, out);
        }
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm1<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x.abs())
}

pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PowerIterationOptions<T> {
    pub max_iters: usize,
    pub tol: T,
    /// Seed of the fixed random start vector.
    pub seed: u64,
}

impl<T: Scalar> Default for PowerIterationOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: T::of(1e-9),
            seed: 0x00C0_5A25_E5EE_D000,
        }
    }
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator on
/// `R^n`, given by its action. Uses the Rayleigh quotient of the normalized
/// iterate and stops when its relative change drops below `opts.tol`.
pub fn power_iteration<T, F>(n: usize, mut apply: F, opts: &PowerIterationOptions<T>) -> T
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    if n == 0 {
        return T::zero();
    }
    let mut rng = SeededRng::new(opts.seed, n as u64);
    let mut v: Vec<T> = (0..n).map(|_| T::of(rng.gaussian())).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    let mut w = vec![T::zero(); n];
    let mut lambda = T::zero();
    for _ in 0..opts.max_iters.max(1) {
        apply(&v, &mut w);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == T::zero() || !nw.is_finite() {
            return next.max(T::zero());
        }
        for (vi, &wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let converged = (next - lambda).abs() <= opts.tol * next.abs();
        lambda = next;
        if converged {
            break;
        }
    }
    lambda.max(T::zero())
}

/// Largest singular value of `op`, by power iteration on `op^T op`.
pub fn operator_norm<T: Scalar, L: LinearMap<T> + ?Sized>(
    op: &L,
    opts: &PowerIterationOptions<T>,
) -> T {
    let mut tmp = vec![T::zero(); op.nrows()];
    power_iteration(
        op.ncols(),
        |x, out| {
            op.apply_into(x, &mut tmp);
            op.adjoint_into(&tmp, out);
        },
        opts,
    )
    .sqrt()
}

/// Minimum-norm solution of `M z = y` by conjugate gradients on the normal
/// equations (CGLS) started at zero, so every iterate stays in the row space
/// of `M`.
///
/// Succeeds once `||M z - y|| <= tol * ||y||`. Otherwise returns
/// [`Error::NotConverged`] carrying the iterate with the smallest residual
/// and its relative residual. Iteration also ends early once the
/// normal-equation residual `||M^T r||` reaches rounding level, where
/// further steps only amplify noise.
pub fn min_norm_least_squares<T: Scalar, L: LinearMap<T> + ?Sized>(
    m: &L,
    y: &[T],
    tol: T,
    max_iters: usize,
) -> Result<Vec<T>> {
    if y.len() != m.nrows() {
        return Err(Error::invalid(format!(
            "right-hand side has length {}, operator has {} rows",
            y.len(),
            m.nrows()
        )));
    }
    let n = m.ncols();
    let mut x = vec![T::zero(); n];
    let y_norm = norm2(y);
    if y_norm == T::zero() {
        return Ok(x);
    }
    let target = tol * y_norm;
    let mut r = y.to_vec();
    let mut s = m.adjoint(&r);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let mut q = vec![T::zero(); m.nrows()];
    let mut best = x.clone();
    let mut best_norm = y_norm;
    let floor = gamma * T::epsilon() * T::epsilon();
    let mut iterations = 0;
    while iterations < max_iters {
        if gamma <= floor {
            break;
        }
        m.apply_into(&p, &mut q);
        let qq = dot(&q, &q);
        if qq == T::zero() {
            break;
        }
        let alpha = gamma / qq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        iterations += 1;
        let r_norm = norm2(&r);
        if r_norm <= target {
            return Ok(x);
        }
        if r_norm < best_norm {
            best_norm = r_norm;
            best.copy_from_slice(&x);
        }
        m.adjoint_into(&r, &mut s);
        let gamma_next = dot(&s, &s);
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, &si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    Err(Error::NotConverged {
        method: "minimum-norm least squares",
        iterations,
        residual: (best_norm / y_norm).as_f64(),
        best: best.iter().map(|v| v.as_f64()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Diag(Vec<f64>);

    impl LinearMap<f64> for Diag {
        fn nrows(&self) -> usize {
            self.0.len()
        }
        fn ncols(&self) -> usize {
            self.0.len()
        }
        fn apply_into(&self, x: &[f64], out: &mut [f64]) {
            for ((o, &d), &xi) in out.iter_mut().zip(&self.0).zip(x) {
                *o = d * xi;
            }
        }
        fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
            self.apply_into(y, out)
        }
    }

    #[test]
    fn norm_of_identity() {
        let n = operator_norm(&DenseMatrix::<f64>::identity(5), &Default::default());
        assert!((n - 1.0).abs() < 1e-8);
    }

    #[test]
    fn norm_of_diagonal() {
        let n = operator_norm(&Diag(vec![3.0, 1.0]), &Default::default());
        assert!((n - 3.0).abs() < 1e-6);
    }

    #[test]
    fn norm_of_zero_map() {
        let z = DenseMatrix::<f64>::zeros(4, 3);
        assert_eq!(operator_norm(&z, &Default::default()), 0.0);
    }

    #[test]
    fn adjoint_has_same_norm() {
        let mut rng = SeededRng::new(5, 5);
        let m = DenseMatrix::<f64>::gaussian(&mut rng, 7, 12);
        let a = operator_norm(&m, &Default::default());
        let b = operator_norm(&Adjoint(&m), &Default::default());
        assert!((a - b).abs() <= 1e-6 * a);
    }

    #[test]
    fn dense_apply_and_adjoint() {
        let m = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.apply(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(m.adjoint(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
        assert_eq!(m.transpose().get(2, 1), 6.0);
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn least_squares_identity() {
        let y = vec![1.5f64, -2.0, 0.25];
        let x = min_norm_least_squares(&DenseMatrix::identity(3), &y, 1e-12, 10).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_single_row() {
        let m = DenseMatrix::new(1, 2, vec![1.0f64, 0.0]).unwrap();
        let x = min_norm_least_squares(&m, &[2.0], 1e-12, 10).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn least_squares_reports_best_iterate() {
        // Inconsistent system: no exact solution exists.
        let m = DenseMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        match min_norm_least_squares(&m, &[1.0, -1.0], 1e-12, 5) {
            Err(Error::NotConverged { best, residual, .. }) => {
                assert_eq!(best.len(), 1);
                assert!(residual > 0.5);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn least_squares_dimension_mismatch() {
        let m = DenseMatrix::<f64>::identity(3);
        assert!(matches!(
            min_norm_least_squares(&m, &[1.0], 1e-10, 10),
            Err(Error::InvalidArgument(_))
        ));
    }
}
