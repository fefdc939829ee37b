//! Independent reference computations used by the integration tests.
//! Everything here is written directly from the definitions, with dense
//! matrices and textbook algorithms, and shares no code with the library's
//! numerical routines.

#![allow(dead_code, clippy::needless_range_loop)]

use cosparse::SeededRng;

/// Smallest integer m >= 1 with m^2/(m+1) >= r^2, by linear scan.
pub fn brute_force_min_measurements(r: f64) -> u64 {
    let mut m = 1u64;
    while ((m * m) as f64 / (m + 1) as f64) < r * r {
        m += 1;
    }
    m
}

/// Dense `(d-1) x d` forward-difference matrix, row-major rows.
pub fn dense_diff1d(d: usize) -> Vec<Vec<f64>> {
    (0..d - 1)
        .map(|i| {
            let mut row = vec![0.0; d];
            row[i] = -1.0;
            row[i + 1] = 1.0;
            row
        })
        .collect()
}

/// Dense 2D difference matrix on a column-major `n x n` image: all vertical
/// differences (down each column), then all horizontal differences.
pub fn dense_diff2d(n: usize) -> Vec<Vec<f64>> {
    let idx = |i: usize, j: usize| j * n + i;
    let mut rows = Vec::new();
    for j in 0..n {
        for i in 0..n - 1 {
            let mut row = vec![0.0; n * n];
            row[idx(i, j)] = -1.0;
            row[idx(i + 1, j)] = 1.0;
            rows.push(row);
        }
    }
    for j in 0..n - 1 {
        for i in 0..n {
            let mut row = vec![0.0; n * n];
            row[idx(i, j)] = -1.0;
            row[idx(i, j + 1)] = 1.0;
            rows.push(row);
        }
    }
    rows
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

pub fn gram(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a[0].len();
    let mut g = vec![vec![0.0; d]; d];
    for r in a {
        for i in 0..d {
            for j in 0..d {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    g
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Minimum-norm solution of `M z = y` for full-row-rank `M`:
/// `z = M^T (M M^T)^{-1} y`.
pub fn pinv_solve(m: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = m.len();
    let mmt: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let w = solve_dense(mmt, y.to_vec());
    let d = m[0].len();
    (0..d).map(|c| (0..k).map(|r| m[r][c] * w[r]).sum()).collect()
}

/// Monte-Carlo mean and standard error of `sum_{j in cosupport} |(A g)_j|`.
pub fn mc_cosupport_l1(
    a: &[Vec<f64>],
    cosupport: &[usize],
    samples: usize,
    rng: &mut SeededRng,
) -> (f64, f64) {
    let d = a[0].len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let g: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
        let v: f64 = cosupport
            .iter()
            .map(|&j| a[j].iter().zip(&g).map(|(u, w)| u * w).sum::<f64>().abs())
            .sum();
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exact `min over |alpha_i| <= t of ||g - t * a^T fixed - b^T alpha||^2`,
/// where `b` holds the cosupport rows, by enumerating every assignment of
/// each coordinate to its lower bound, upper bound, or the interior, and
/// solving the interior coordinates by least squares. Exponential in the
/// cosupport size; meant for a handful of coordinates.
pub fn box_distance_sq_exhaustive(
    rows: &[Vec<f64>],
    fixed: &[f64],
    cosupport: &[usize],
    g: &[f64],
    t: f64,
) -> f64 {
    let d = g.len();
    let mut base = g.to_vec();
    for (r, &f) in rows.iter().zip(fixed) {
        for i in 0..d {
            base[i] -= t * f * r[i];
        }
    }
    let l = cosupport.len();
    let mut best = f64::INFINITY;
    let combos = 3usize.pow(l as u32);
    for code in 0..combos {
        let mut state = Vec::with_capacity(l);
        let mut c = code;
        for _ in 0..l {
            state.push(c % 3);
            c /= 3;
        }
        let mut resid = base.clone();
        let mut free = Vec::new();
        for (k, &st) in state.iter().enumerate() {
            let row = &rows[cosupport[k]];
            match st {
                0 => (0..d).for_each(|i| resid[i] += t * row[i]),
                1 => (0..d).for_each(|i| resid[i] -= t * row[i]),
                _ => free.push(row.clone()),
            }
        }
        let mut alpha = vec![];
        if !free.is_empty() {
            let nf = free.len();
            let gm: Vec<Vec<f64>> = (0..nf)
                .map(|i| (0..nf).map(|j| free[i].iter().zip(&free[j]).map(|(a, b)| a * b).sum()).collect())
                .collect();
            let rhs: Vec<f64> = free.iter().map(|r| r.iter().zip(&resid).map(|(a, b)| a * b).sum()).collect();
            alpha = solve_dense(gm, rhs);
            if alpha.iter().any(|a| !a.is_finite() || a.abs() > t + 1e-12) {
                continue;
            }
            for (a, r) in alpha.iter().zip(&free) {
                (0..d).for_each(|i| resid[i] -= a * r[i]);
            }
        }
        let _ = alpha;
        best = best.min(resid.iter().map(|v| v * v).sum());
    }
    best
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}
