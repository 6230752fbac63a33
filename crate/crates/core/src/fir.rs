//! FIR realization of per-bin optimum weights.
//!
//! The optimum frequency responses are only specified at the `L/2 + 1` DFT
//! bins, so an `L`-tap filter can match them exactly: apply a modeling delay
//! of `L/2` samples, extend to a Hermitian-symmetric spectrum and take the
//! inverse DFT. Only the bins 0 and `L/2`, which a real filter forces to be
//! real, lose information.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array::Direction;
use crate::error::{Error, Result};
use crate::solver::FrequencyDesign;

/// Relative imaginary energy at the real-forced bins above which synthesis is
/// flagged.
pub const IMAG_DISCARD_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    /// Imaginary energy dropped at bins 0 and L/2 relative to the total
    /// spectral energy of all filters.
    pub discarded_imag_ratio: f64,
    pub flagged: bool,
}

/// Time-domain filter-and-sum filters, one row of `L` taps per microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerFilters {
    taps: Vec<Vec<f64>>,
    modeling_delay: usize,
    sample_rate: f64,
    pub look: Option<Direction>,
    /// Linear WNG floor the filters were designed for.
    pub gamma: Option<f64>,
    pub report: SynthesisReport,
}

impl BeamformerFilters {
    pub fn new(taps: Vec<Vec<f64>>, modeling_delay: usize, sample_rate: f64) -> Result<Self> {
        let len = taps.first().map_or(0, Vec::len);
        if taps.is_empty() || len == 0 {
            return Err(Error::invalid(
                "filter set needs at least one non-empty row",
            ));
        }
        if taps.iter().any(|r| r.len() != len) {
            return Err(Error::invalid("all filter rows must have the same length"));
        }
        if taps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("filter taps must be finite"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(BeamformerFilters {
            taps,
            modeling_delay,
            sample_rate,
            look: None,
            gamma: None,
            report: SynthesisReport::default(),
        })
    }

    pub fn taps(&self) -> &[Vec<f64>] {
        &self.taps
    }

    pub fn num_mics(&self) -> usize {
        self.taps.len()
    }

    pub fn len(&self) -> usize {
        self.taps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn modeling_delay(&self) -> usize {
        self.modeling_delay
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Multiplies every tap by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.taps.iter_mut().flatten().for_each(|v| *v *= alpha);
        out
    }
}

/// Inverse-DFT synthesis with an `L/2` modeling delay.
pub fn synthesize_fir(fd: &FrequencyDesign) -> Result<BeamformerFilters> {
    let l = fd.freqs.num_taps();
    let bins = fd.freqs.num_bins();
    if fd.weights.len() != bins {
        return Err(Error::invalid(format!(
            "design holds {} bins, expected {bins}",
            fd.weights.len()
        )));
    }
    let n_mics = fd.num_mics();
    let delay = l / 2;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(l);
    let mut taps = Vec::with_capacity(n_mics);
    let mut discarded = 0.0;
    let mut total = 0.0;
    let mut spec = vec![Complex64::new(0.0, 0.0); l];
    for n in 0..n_mics {
        for (q, s) in spec.iter_mut().take(bins).enumerate() {
            // e^{−jω_q L/2} with ω_q = 2πq/L is (−1)^q
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            *s = fd.weights[q][n] * sign;
        }
        for q in [0, l / 2] {
            discarded += spec[q].im * spec[q].im;
            spec[q].im = 0.0;
        }
        for q in 1..l / 2 {
            spec[l - q] = spec[q].conj();
        }
        total += spec.iter().map(|c| c.norm_sqr()).sum::<f64>();
        ifft.process(&mut spec);
        taps.push(spec.iter().map(|c| c.re / l as f64).collect());
    }
    total += discarded;
    let ratio = if total > 0.0 { discarded / total } else { 0.0 };
    let mut bf = BeamformerFilters::new(taps, delay, fd.freqs.sample_rate())?;
    bf.look = Some(fd.look);
    bf.gamma = Some(fd.gamma);
    bf.report = SynthesisReport {
        discarded_imag_ratio: ratio,
        flagged: ratio > IMAG_DISCARD_LIMIT,
    };
    Ok(bf)
}

/// Exact DTFT `W_n(ω) = Σ_l w_{n,l} e^{−jωl}` of every row at `f` Hz.
pub fn filter_response(bf: &BeamformerFilters, f: f64) -> Result<Vec<Complex64>> {
    if !(f >= 0.0 && f <= bf.sample_rate / 2.0) {
        return Err(Error::invalid(format!(
            "frequency {f} Hz outside [0, {}] Hz",
            bf.sample_rate / 2.0
        )));
    }
    let omega = 2.0 * PI * f / bf.sample_rate;
    let phasors: Vec<Complex64> = (0..bf.len())
        .map(|l| Complex64::from_polar(1.0, -omega * l as f64))
        .collect();
    Ok(bf
        .taps
        .iter()
        .map(|row| row.iter().zip(&phasors).map(|(w, p)| p * *w).sum())
        .collect())
}
