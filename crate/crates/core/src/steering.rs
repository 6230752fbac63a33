//! Sensor responses g_n(ω, φ, θ) on a direction grid and a set of DFT bins.
//!
//! Two sources are supported: an analytic far-field plane-wave model
//! (evaluated on demand, so a 2522-direction grid over 513 bins costs no
//! memory) and tabulated transfer functions obtained from measured impulse
//! responses.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, Direction, DirectionGrid};
use crate::error::{Error, Result};
use crate::hrtf::HrtfDataset;

pub const DEFAULT_SOUND_SPEED: f64 = 343.0;

/// The `L/2 + 1` DFT bin frequencies `f_q = q·f_s/L` of a length-`L` filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    sample_rate: f64,
    num_taps: usize,
}

impl FrequencyGrid {
    pub fn new(sample_rate: f64, num_taps: usize) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if num_taps < 2 || !num_taps.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "filter length must be even and ≥ 2, got {num_taps}"
            )));
        }
        Ok(FrequencyGrid {
            sample_rate,
            num_taps,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn num_taps(&self) -> usize {
        self.num_taps
    }

    pub fn num_bins(&self) -> usize {
        self.num_taps / 2 + 1
    }

    pub fn freq_hz(&self, q: usize) -> f64 {
        q as f64 * self.sample_rate / self.num_taps as f64
    }

    /// Angular frequency in rad/s.
    pub fn omega(&self, q: usize) -> f64 {
        2.0 * PI * self.freq_hz(q)
    }

    pub fn freqs_hz(&self) -> Vec<f64> {
        (0..self.num_bins()).map(|q| self.freq_hz(q)).collect()
    }

    /// Bins whose frequency lies in `[lo, hi]`.
    pub fn bins_in_band(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.num_bins())
            .filter(|&q| {
                let f = self.freq_hz(q);
                f >= lo && f <= hi
            })
            .collect()
    }

    /// Bin nearest to `f` (clamped to the valid range).
    pub fn nearest_bin(&self, f: f64) -> usize {
        let q = (f * self.num_taps as f64 / self.sample_rate).round();
        (q.max(0.0) as usize).min(self.num_bins() - 1)
    }
}

/// Plane-wave arrival delays (seconds) of each microphone relative to the
/// array centroid for a source in direction `dir`: `τ_n = −(r_n · u)/c`.
pub fn plane_wave_delays(geom: &ArrayGeometry, dir: &Direction, c: f64) -> Vec<f64> {
    let u = dir.unit_vector();
    geom.centered()
        .iter()
        .map(|r| -(r[0] * u[0] + r[1] * u[1] + r[2] * u[2]) / c)
        .collect()
}

#[derive(Debug, Clone)]
enum Responses {
    /// Delays `[direction][mic]` in seconds.
    FreeField { delays: Vec<f64> },
    /// Transfer functions `[bin][direction][mic]`.
    Tabulated { g: Vec<Complex64> },
}

/// Complex sensor responses indexed `[bin q][direction m][mic n]`.
#[derive(Debug, Clone)]
pub struct SteeringSet {
    grid: DirectionGrid,
    freqs: FrequencyGrid,
    num_mics: usize,
    responses: Responses,
}

impl SteeringSet {
    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn num_mics(&self) -> usize {
        self.num_mics
    }

    pub fn num_directions(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn response(&self, q: usize, m: usize, n: usize) -> Complex64 {
        match &self.responses {
            Responses::FreeField { delays } => {
                if q == 0 {
                    return Complex64::new(1.0, 0.0);
                }
                let phase = -self.freqs.omega(q) * delays[m * self.num_mics + n];
                Complex64::from_polar(1.0, phase)
            }
            Responses::Tabulated { g } => {
                let m_total = self.grid.len();
                g[(q * m_total + m) * self.num_mics + n]
            }
        }
    }

    /// Steering vector `[g_0, …, g_{N−1}]` of direction `m` at bin `q`.
    pub fn vector(&self, q: usize, m: usize) -> Vec<Complex64> {
        (0..self.num_mics).map(|n| self.response(q, m, n)).collect()
    }

    fn check_bin(&self, q: usize) -> Result<()> {
        if q >= self.freqs.num_bins() {
            return Err(Error::invalid(format!(
                "bin {q} out of range ({} bins)",
                self.freqs.num_bins()
            )));
        }
        Ok(())
    }

    /// Rows `dirs` of G(ω_q): `[G]_{mn} = g_n(ω_q, φ_m, θ_m)`.
    pub fn submatrix(&self, q: usize, dirs: &[usize]) -> Result<DMatrix<Complex64>> {
        self.check_bin(q)?;
        if let Some(&bad) = dirs.iter().find(|&&m| m >= self.grid.len()) {
            return Err(Error::invalid(format!(
                "direction index {bad} out of range ({} directions)",
                self.grid.len()
            )));
        }
        Ok(DMatrix::from_fn(dirs.len(), self.num_mics, |r, n| {
            self.response(q, dirs[r], n)
        }))
    }

    /// The full G(ω_q).
    pub fn matrix(&self, q: usize) -> Result<DMatrix<Complex64>> {
        let all: Vec<usize> = (0..self.grid.len()).collect();
        self.submatrix(q, &all)
    }
}

/// Far-field plane-wave steering with phase reference at the array centroid:
/// `g_n(ω, φ, θ) = exp(−jωτ_n)`.
pub fn free_field_steering(
    geom: &ArrayGeometry,
    grid: &DirectionGrid,
    freqs: &FrequencyGrid,
    c: f64,
) -> Result<SteeringSet> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!(
            "sound speed must be positive, got {c}"
        )));
    }
    let delays = grid
        .directions()
        .iter()
        .flat_map(|d| plane_wave_delays(geom, d, c))
        .collect();
    Ok(SteeringSet {
        grid: grid.clone(),
        freqs: *freqs,
        num_mics: geom.num_mics(),
        responses: Responses::FreeField { delays },
    })
}

/// Transfer functions of the dataset's impulse responses, zero-padded to
/// length `L` and evaluated at bins `0..=L/2` with the `e^{−jωl}` convention.
pub fn hrtf_steering(ds: &HrtfDataset, freqs: &FrequencyGrid) -> Result<SteeringSet> {
    if (ds.sample_rate() - freqs.sample_rate()).abs() > 1e-9 * freqs.sample_rate() {
        return Err(Error::invalid(format!(
            "dataset sample rate {} Hz does not match design rate {} Hz",
            ds.sample_rate(),
            freqs.sample_rate()
        )));
    }
    let l = freqs.num_taps();
    if ds.ir_length() > l {
        return Err(Error::invalid(format!(
            "impulse responses ({} taps) longer than the transform length {l}",
            ds.ir_length()
        )));
    }
    let m_total = ds.grid().len();
    let n_mics = ds.geometry().num_mics();
    let bins = freqs.num_bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(l);
    let mut g = vec![Complex64::new(0.0, 0.0); bins * m_total * n_mics];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for m in 0..m_total {
        for n in 0..n_mics {
            buf.fill(Complex64::new(0.0, 0.0));
            for (b, &h) in buf.iter_mut().zip(ds.impulse_response(m, n)) {
                b.re = h;
            }
            fft.process(&mut buf);
            for q in 0..bins {
                g[(q * m_total + m) * n_mics + n] = buf[q];
            }
        }
    }
    // DC of a real sequence is real; drop the rounding residue
    for v in g.iter_mut().take(m_total * n_mics) {
        v.im = 0.0;
    }
    Ok(SteeringSet {
        grid: ds.grid().clone(),
        freqs: *freqs,
        num_mics: n_mics,
        responses: Responses::Tabulated { g },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::make_uniform_grid;

    fn fgrid() -> FrequencyGrid {
        FrequencyGrid::new(16000.0, 64).unwrap()
    }

    #[test]
    fn frequency_grid() {
        let f = FrequencyGrid::new(16000.0, 1024).unwrap();
        assert_eq!(f.num_bins(), 513);
        assert_eq!(f.freq_hz(512), 8000.0);
        assert!(FrequencyGrid::new(16000.0, 7).is_err());
        assert!(FrequencyGrid::new(16000.0, 0).is_err());
        assert!(FrequencyGrid::new(0.0, 8).is_err());
        let band = f.bins_in_band(300.0, 5000.0);
        assert_eq!(f.freq_hz(band[0]), 312.5);
        assert_eq!(f.freq_hz(*band.last().unwrap()), 5000.0);
    }

    #[test]
    fn centroid_mic_has_unit_response() {
        let geom = ArrayGeometry::new(vec![[0.0; 3]], 0).unwrap();
        let grid = make_uniform_grid(30.0, 30.0, true).unwrap();
        let s = free_field_steering(&geom, &grid, &fgrid(), DEFAULT_SOUND_SPEED).unwrap();
        for q in 0..fgrid().num_bins() {
            for m in 0..grid.len() {
                let g = s.response(q, m, 0);
                assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn path_difference_identity() {
        let x = 0.05;
        let geom = ArrayGeometry::new(vec![[-x, 0.0, 0.0], [x, 0.0, 0.0]], 0).unwrap();
        let grid =
            DirectionGrid::with_equal_weights(vec![Direction::new(0.0, 90.0).unwrap()]).unwrap();
        let s = free_field_steering(&geom, &grid, &fgrid(), 343.0).unwrap();
        for q in 0..fgrid().num_bins() {
            let w = fgrid().omega(q);
            let lhs = s.response(q, 0, 0) * s.response(q, 0, 1).conj();
            let rhs = Complex64::from_polar(1.0, -w * 2.0 * x / 343.0);
            assert!((lhs - rhs).norm() < 1e-12, "bin {q}");
        }
    }

    #[test]
    fn free_field_unit_modulus_and_dc() {
        let geom = ArrayGeometry::head12();
        let grid = make_uniform_grid(15.0, 15.0, true).unwrap();
        let s = free_field_steering(&geom, &grid, &fgrid(), 343.0).unwrap();
        for q in 0..fgrid().num_bins() {
            for m in 0..grid.len() {
                for n in 0..12 {
                    let g = s.response(q, m, n);
                    assert!((g.norm() - 1.0).abs() < 1e-12);
                    if q == 0 {
                        assert_eq!(g, Complex64::new(1.0, 0.0));
                    }
                }
            }
        }
        assert!(free_field_steering(&geom, &grid, &fgrid(), 0.0).is_err());
    }

    #[test]
    fn submatrix_layout() {
        let geom = ArrayGeometry::head12();
        let grid = make_uniform_grid(30.0, 30.0, true).unwrap();
        let s = free_field_steering(&geom, &grid, &fgrid(), 343.0).unwrap();
        let full = s.matrix(5).unwrap();
        assert_eq!(full.shape(), (grid.len(), 12));
        let row = s.submatrix(5, &[7]).unwrap();
        let d = s.vector(5, 7);
        for n in 0..12 {
            assert_eq!(row[(0, n)], d[n]);
            assert_eq!(full[(7, n)], d[n]);
        }
        assert_eq!(s.submatrix(5, &[]).unwrap().shape(), (0, 12));
        assert!(s.submatrix(5, &[grid.len()]).is_err());
        assert!(s.submatrix(fgrid().num_bins(), &[0]).is_err());
    }
}
