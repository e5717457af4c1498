//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! `(seed, stream)`. ChaCha is a counter-based generator with a published
//! specification, so any implementation fed the same key reproduces the same
//! uniforms. Uniforms use the top 53 bits of each 64-bit word; normals use the
//! Box-Muller transform on pairs of uniforms.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseRng {
    inner: ChaCha8Rng,
    spare: Option<u64>,
    draws: u64,
}

impl NoiseRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            spare: None,
            draws: 0,
        }
    }

    /// Number of mapping-noise vectors drawn through [`NoiseRng::next_draw_id`].
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Returns the tag of the next noise draw and advances the counter.
    pub fn next_draw_id(&mut self) -> u64 {
        let id = self.draws;
        self.draws += 1;
        id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Standard normal via Box-Muller; the second variate of each pair is
    /// cached for the next call.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(bits) = self.spare.take() {
            return f64::from_bits(bits);
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some((radius * angle.sin()).to_bits());
        radius * angle.cos()
    }
}

impl RngCore for NoiseRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
