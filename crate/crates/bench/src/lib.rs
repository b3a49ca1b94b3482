//! Shared signal generators for the benchmark suite.

use mesdr::Signal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Slow sine trend plus uniform noise, the standard benchmark input.
pub fn noisy_sine(n: usize, sample_rate: u32, noise: f64, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 2.0 * std::f64::consts::PI * 3.0 / sample_rate as f64;
    let samples = (0..n)
        .map(|t| 0.6 * (w * t as f64).sin() + noise * (rng.random::<f64>() * 2.0 - 1.0))
        .collect();
    Signal::new(samples, sample_rate, "bench".to_string()).unwrap()
}
