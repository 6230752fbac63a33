//! Frequency-weighted segmental SNR and the two-talker scenario evaluation.

mod scenario;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use scenario::{
    eval_scenario, NamedDesign, ScenarioCell, ScenarioMatrix, ScenarioReport, ScenarioScene,
    TargetSummary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FwSegSnrParams {
    pub frame_ms: f64,
    pub overlap: f64,
    pub num_bands: usize,
    /// Exponent applied to the reference band magnitude to form band weights.
    pub weight_exponent: f64,
    pub clamp_db: (f64, f64),
    pub band_lo_hz: f64,
    /// Upper band edge; `None` means `f_s/2`.
    pub band_hi_hz: Option<f64>,
    /// Frames whose reference mean-square level is below this are skipped.
    pub silence_dbfs: f64,
}

impl Default for FwSegSnrParams {
    fn default() -> Self {
        FwSegSnrParams {
            frame_ms: 30.0,
            overlap: 0.75,
            num_bands: 25,
            weight_exponent: 0.2,
            clamp_db: (-10.0, 35.0),
            band_lo_hz: 50.0,
            band_hi_hz: None,
            silence_dbfs: -60.0,
        }
    }
}

impl FwSegSnrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms.is_finite() && self.frame_ms > 0.0) {
            return Err(Error::invalid(format!(
                "frame length must be positive, got {} ms",
                self.frame_ms
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::invalid(format!(
                "overlap must lie in [0, 1), got {}",
                self.overlap
            )));
        }
        if self.num_bands == 0 {
            return Err(Error::invalid("at least one band is required"));
        }
        if !(self.clamp_db.0 < self.clamp_db.1) {
            return Err(Error::invalid(format!(
                "clamp range {:?} is empty",
                self.clamp_db
            )));
        }
        if !(self.weight_exponent.is_finite() && self.band_lo_hz >= 0.0) {
            return Err(Error::invalid(
                "weight exponent and lower band edge must be finite, edge ≥ 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwSegSnr {
    pub score_db: f64,
    /// `floor((T − frame)/hop) + 1`
    pub total_frames: usize,
    pub scored_frames: usize,
    pub silent_frames: usize,
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters `[band][bin]` over the bins `0..=nfft/2`.
fn mel_bands(num_bands: usize, lo: f64, hi: f64, nfft: usize, fs: f64) -> Vec<Vec<f64>> {
    let (mlo, mhi) = (hz_to_mel(lo), hz_to_mel(hi));
    let edges: Vec<f64> = (0..num_bands + 2)
        .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (num_bands + 1) as f64))
        .collect();
    (0..num_bands)
        .map(|j| {
            let (a, c, b) = (edges[j], edges[j + 1], edges[j + 2]);
            (0..=nfft / 2)
                .map(|k| {
                    let f = k as f64 * fs / nfft as f64;
                    if f <= a || f >= b {
                        0.0
                    } else if f <= c {
                        (f - a) / (c - a)
                    } else {
                        (b - f) / (b - c)
                    }
                })
                .collect()
        })
        .collect()
}

/// Frequency-weighted segmental SNR of `test` against `reference`.
///
/// Per Hann-windowed frame and mel band `j`, `X_j = Σ_k t_j(k)|X(k)|` and
/// `E_j = Σ_k t_j(k)|X(k) − X̂(k)|`; the band SNR `10 log10(X_j²/E_j²)` is
/// clamped and averaged with weights `X_j^γ_w`, and frame scores are averaged.
pub fn fwsegsnr(
    reference: &[f64],
    test: &[f64],
    sample_rate: f64,
    p: &FwSegSnrParams,
) -> Result<FwSegSnr> {
    p.validate()?;
    if reference.len() != test.len() {
        return Err(Error::invalid(format!(
            "reference has {} samples, test {}",
            reference.len(),
            test.len()
        )));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let frame = (p.frame_ms * 1e-3 * sample_rate).round() as usize;
    let hop = ((frame as f64) * (1.0 - p.overlap)).round().max(1.0) as usize;
    if frame < 2 {
        return Err(Error::invalid("frame is shorter than two samples"));
    }
    let hi = p.band_hi_hz.unwrap_or(sample_rate / 2.0);
    if !(p.band_lo_hz < hi && hi <= sample_rate / 2.0) {
        return Err(Error::invalid(format!(
            "band [{}, {hi}] Hz is empty or above Nyquist",
            p.band_lo_hz
        )));
    }
    if reference.len() < frame {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than one {frame}-sample frame",
            reference.len()
        )));
    }
    let total_frames = (reference.len() - frame) / hop + 1;
    let nfft = frame.next_power_of_two();
    let bands = mel_bands(p.num_bands, p.band_lo_hz, hi, nfft, sample_rate);
    let window: Vec<f64> = (0..frame)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / frame as f64).cos())
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let silence = 10f64.powf(p.silence_dbfs / 10.0);
    let (lo_db, hi_db) = p.clamp_db;

    let spectrum = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for ((b, v), w) in buf.iter_mut().zip(x).zip(&window) {
            b.re = v * w;
        }
        fft.process(&mut buf);
        buf.truncate(nfft / 2 + 1);
        buf
    };

    // deficits below the ceiling are accumulated so that an exact match
    // scores the ceiling exactly
    let mut deficit_sum = 0.0;
    let mut scored = 0usize;
    let mut silent = 0usize;
    for m in 0..total_frames {
        let r = &reference[m * hop..m * hop + frame];
        let t = &test[m * hop..m * hop + frame];
        if r.iter().map(|v| v * v).sum::<f64>() / (frame as f64) < silence {
            silent += 1;
            continue;
        }
        let (sr, st) = (spectrum(r), spectrum(t));
        let (mut wsum, mut wdef) = (0.0, 0.0);
        for tri in &bands {
            let (mut x, mut e) = (0.0, 0.0);
            for ((wk, a), b) in tri.iter().zip(&sr).zip(&st) {
                if *wk > 0.0 {
                    x += wk * a.norm();
                    e += wk * (a - b).norm();
                }
            }
            let snr = if e == 0.0 {
                hi_db
            } else {
                (20.0 * (x / e).log10()).clamp(lo_db, hi_db)
            };
            let w = x.powf(p.weight_exponent);
            if x > 0.0 {
                wsum += w;
                wdef += w * (hi_db - snr);
            }
        }
        if wsum > 0.0 {
            deficit_sum += wdef / wsum;
            scored += 1;
        } else {
            silent += 1;
        }
    }
    if scored == 0 {
        return Err(Error::invalid(format!(
            "all {total_frames} frames of the reference are below {} dBFS",
            p.silence_dbfs
        )));
    }
    Ok(FwSegSnr {
        score_db: (hi_db - deficit_sum / scored as f64).clamp(lo_db, hi_db),
        total_frames,
        scored_frames: scored,
        silent_frames: silent,
    })
}
