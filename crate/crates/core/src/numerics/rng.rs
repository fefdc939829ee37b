use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reproducible random stream identified by `(base_seed, stream_id)`.
///
/// Backed by ChaCha20, whose 64-bit stream parameter selects a disjoint
/// keystream for each `stream_id`, so streams never overlap. Gaussian
/// deviates come from the Box–Muller transform, which uses only
/// `ln`, `sqrt`, `sin` and `cos` and therefore gives the same bits on every
/// IEEE-754 platform with a correctly rounded libm.
#[derive(Clone, Debug)]
pub struct SeededRng {
    base_seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(base_seed);
        inner.set_stream(stream_id);
        Self {
            base_seed,
            stream_id,
            inner,
            spare: None,
        }
    }

    /// Stream keyed by a tuple of indices, e.g. `(cell_row, cell_col, trial)`.
    pub fn for_indices(base_seed: u64, indices: &[u64]) -> Self {
        Self::new(base_seed, stream_id(indices))
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift with rejection.
        let n = n as u64;
        loop {
            let x = self.inner.next_u64();
            let wide = (x as u128) * (n as u128);
            let low = wide as u64;
            if low >= n.wrapping_neg() % n {
                return (wide >> 64) as usize;
            }
        }
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of an index tuple. Unlike `std::hash`, the value is
/// fixed across Rust versions and platforms.
pub fn stream_id(indices: &[u64]) -> u64 {
    let mut h = splitmix64(indices.len() as u64);
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i));
    }
    h
}

/// `n` i.i.d. standard normal samples.
pub fn gauss_vector<T: Scalar>(rng: &mut SeededRng, n: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::invalid("gauss_vector needs n >= 1"));
    }
    Ok((0..n).map(|_| T::of(rng.gaussian())).collect())
}
