use crate::scalar::Scalar;

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmin, f(argmin))`. The bracket shrinks to width `tol`; near a
/// smooth minimum, rounding in `f` limits the argmin to about
/// `sqrt(epsilon)` relative accuracy. A degenerate interval (`lo >= hi`)
/// evaluates the midpoint.
pub fn minimize_scalar<T, F>(mut f: F, lo: T, hi: T, tol: T) -> (T, T)
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let half = T::of(0.5);
    if !(lo < hi) {
        let mid = (lo + hi) * half;
        return (mid, f(mid));
    }
    let inv_phi = T::of((5f64.sqrt() - 1.0) / 2.0);
    let tol = tol.max(T::epsilon() * (lo.abs() + hi.abs()));
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
