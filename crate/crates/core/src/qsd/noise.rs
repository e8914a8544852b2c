//! Reproducible complex Wiener increments.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Number of Lindblad channels; every step draws one increment per channel.
pub const CHANNELS: usize = 2;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` within an ensemble. Depends only on the pair,
/// so results do not depend on how trajectories are scheduled.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    mix(master_seed ^ mix(index))
}

/// Complex Gaussian increments with `E[dξ] = 0`, `E[dξ²] = 0` and
/// `E[|dξ|²] = dt`.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// One increment.
    pub fn draw(&mut self, dt: f64) -> Complex64 {
        let s = (0.5 * dt).sqrt();
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }

    /// Increments for every channel of one step.
    pub fn step(&mut self, dt: f64) -> [Complex64; CHANNELS] {
        [self.draw(dt), self.draw(dt)]
    }

    /// Increments for one step of length `dt` built as the sum of `substeps`
    /// draws over `dt / substeps`. A run at `dt` with `substeps = 2` sees the
    /// same Brownian path as a run at `dt / 2` with the same seed.
    pub fn step_refined(&mut self, dt: f64, substeps: u32) -> [Complex64; CHANNELS] {
        let h = dt / f64::from(substeps);
        let mut acc = [Complex64::new(0.0, 0.0); CHANNELS];
        for _ in 0..substeps {
            for (a, d) in acc.iter_mut().zip(self.step(h)) {
                *a += d;
            }
        }
        acc
    }

    /// Standard normal draw from the same stream, for initial conditions.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}
