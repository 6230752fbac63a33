//! Seeded test signals.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

/// RMS level of the generated signals (−20 dBFS).
pub const SIGNAL_RMS: f64 = 0.1;

pub fn white_noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| SIGNAL_RMS * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect()
}

/// Gaussian noise with a long-term speech-like spectrum (high-pass at
/// 100 Hz, −6 dB/octave above 600 Hz) and a syllabic on/off envelope of
/// 120–350 ms segments, about a fifth of them silent. Normalized to
/// [`SIGNAL_RMS`].
pub fn speech_shaped_noise(seed: u64, n: usize, sample_rate: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nfft = n.next_power_of_two();
    let mut spec: Vec<Complex64> = (0..nfft)
        .map(|k| {
            if k < n {
                Complex64::new(StandardNormal.sample(&mut rng), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(nfft).process(&mut spec);
    for (k, c) in spec.iter_mut().enumerate() {
        let f = k.min(nfft - k) as f64 * sample_rate / nfft as f64;
        let hp = f / (f * f + 100.0 * 100.0).sqrt();
        let lp = 1.0 / (1.0 + (f / 600.0).powi(2)).sqrt();
        *c *= hp * lp;
    }
    planner.plan_fft_inverse(nfft).process(&mut spec);

    let mut envelope = Vec::with_capacity(n);
    while envelope.len() < n {
        let len = ((rng.random_range(0.12..0.35)) * sample_rate)
            .round()
            .max(1.0) as usize;
        let amp = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.3..1.0)
        };
        envelope.extend((0..len).map(|i| {
            amp * (std::f64::consts::PI * (i as f64 + 0.5) / len as f64)
                .sin()
                .powi(2)
        }));
    }
    let mut x: Vec<f64> = spec[..n]
        .iter()
        .zip(&envelope)
        .map(|(c, e)| c.re * e)
        .collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= SIGNAL_RMS / rms);
    }
    x
}
