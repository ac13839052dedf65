//! Seeded random sources shared by the synthetic generators, the smoothing
//! module, and the test suites.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Deterministic RNG for a (seed, stream) pair. Distinct streams from the
/// same seed are independent, which is how per-example noise draws stay
/// reproducible under parallel execution.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&stream.to_le_bytes());
    ChaCha12Rng::from_seed(bytes)
}

/// Standard normal sampler (Box-Muller over a counting RNG).
///
/// Hand-rolled so that certificates are bit-reproducible regardless of
/// distribution-crate internals.
pub struct NormalSource<R: RngCore> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> NormalSource<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    /// Uniform draw in (0, 1].
    fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.sample();
        }
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

/// Uniformly distributed unit vector in `dim` dimensions.
pub fn unit_vector<R: RngCore>(normals: &mut NormalSource<R>, dim: usize) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; dim];
        normals.fill(&mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}
