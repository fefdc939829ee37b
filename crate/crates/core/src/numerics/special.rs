use crate::error::{Error, Result};

// Lanczos approximation, g = 7, nine terms (about 15 significant digits).
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Expected Euclidean norm of a standard Gaussian vector in `R^m`,
/// `sqrt(2) * Gamma((m+1)/2) / Gamma(m/2)`.
pub fn expected_gauss_norm(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("expected_gauss_norm needs m >= 1"));
    }
    let m = m as f64;
    Ok(std::f64::consts::SQRT_2 * (ln_gamma((m + 1.0) / 2.0) - ln_gamma(m / 2.0)).exp())
}
