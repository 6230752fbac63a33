//! Signal-independent evaluation of a beamformer: beampattern, white noise
//! gain and directivity index.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{Direction, DirectionGrid};
use crate::error::{Error, Result};
use crate::fir::{filter_response, BeamformerFilters};
use crate::solver::FrequencyDesign;
use crate::steering::SteeringSet;

/// Lower clamp applied to dB values in CSV exports.
pub const CSV_DB_FLOOR: f64 = -80.0;

/// Complex response `B(ω, φ, θ)` at a set of bins over a direction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternMap {
    pub freqs: Vec<f64>,
    pub grid: DirectionGrid,
    /// `[freq][direction]`
    pub values: Vec<Vec<Complex64>>,
}

fn check_bins(steer: &SteeringSet, bins: &[usize]) -> Result<()> {
    let nb = steer.freqs().num_bins();
    match bins.iter().find(|&&q| q >= nb) {
        Some(q) => Err(Error::invalid(format!(
            "bin {q} not in the steering set ({nb} bins)"
        ))),
        None => Ok(()),
    }
}

fn pattern_from<F>(steer: &SteeringSet, bins: &[usize], weights_at: F) -> Result<BeampatternMap>
where
    F: Fn(usize) -> Result<Vec<Complex64>> + Sync,
{
    check_bins(steer, bins)?;
    let values = bins
        .par_iter()
        .map(|&q| {
            let w = weights_at(q)?;
            Ok((0..steer.num_directions())
                .map(|m| (0..w.len()).map(|n| w[n] * steer.response(q, m, n)).sum())
                .collect())
        })
        .collect::<Result<Vec<Vec<Complex64>>>>()?;
    Ok(BeampatternMap {
        freqs: bins.iter().map(|&q| steer.freqs().freq_hz(q)).collect(),
        grid: steer.grid().clone(),
        values,
    })
}

/// `B(ω_q, φ_m, θ_m) = Σ_n W_n(ω_q) g_n(ω_q, φ_m, θ_m)` with `W_n` the exact
/// DTFT of the FIR taps.
pub fn beampattern(
    bf: &BeamformerFilters,
    steer: &SteeringSet,
    bins: &[usize],
) -> Result<BeampatternMap> {
    if bf.num_mics() != steer.num_mics() {
        return Err(Error::invalid(format!(
            "filters have {} channels, steering set {}",
            bf.num_mics(),
            steer.num_mics()
        )));
    }
    pattern_from(steer, bins, |q| {
        filter_response(bf, steer.freqs().freq_hz(q))
    })
}

/// Beampattern of the per-bin optimum weights, before FIR synthesis.
pub fn beampattern_of_design(
    fd: &FrequencyDesign,
    steer: &SteeringSet,
    bins: &[usize],
) -> Result<BeampatternMap> {
    if fd.num_mics() != steer.num_mics() || fd.freqs != *steer.freqs() {
        return Err(Error::invalid(
            "design and steering set disagree on channels or bins",
        ));
    }
    pattern_from(steer, bins, |q| Ok(fd.weights[q].clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    Wng,
    Di,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub kind: CurveKind,
    pub freqs: Vec<f64>,
    /// dB
    pub values: Vec<f64>,
}

impl CurveReport {
    /// Keeps the points with `lo ≤ f ≤ hi`.
    pub fn restrict(&self, lo: f64, hi: f64) -> CurveReport {
        let (freqs, values) = self
            .freqs
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .unzip();
        CurveReport {
            kind: self.kind,
            freqs,
            values,
        }
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let col = match self.kind {
            CurveKind::Wng => "wng_db",
            CurveKind::Di => "di_db",
        };
        writeln!(w, "freq_hz,{col}")?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            writeln!(w, "{f},{v}")?;
        }
        Ok(())
    }
}

/// `|wᵀd|² / (wᴴw)` in dB.
pub fn wng_db(w: &[Complex64], d: &[Complex64]) -> f64 {
    let wd: Complex64 = w.iter().zip(d).map(|(a, b)| a * b).sum();
    let ww: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    10.0 * (wd.norm_sqr() / ww).log10()
}

/// WNG of the per-bin weights, as reported by the solver.
pub fn wng_curve(fd: &FrequencyDesign) -> CurveReport {
    CurveReport {
        kind: CurveKind::Wng,
        freqs: fd.freqs.freqs_hz(),
        values: fd
            .diagnostics
            .iter()
            .map(|d| 10.0 * d.wng.log10())
            .collect(),
    }
}

/// WNG recomputed from the per-bin weights against a steering set.
pub fn wng_curve_from_weights(
    fd: &FrequencyDesign,
    steer: &SteeringSet,
    look: &Direction,
) -> Result<CurveReport> {
    let m = look_index(steer.grid(), look)?;
    Ok(CurveReport {
        kind: CurveKind::Wng,
        freqs: fd.freqs.freqs_hz(),
        values: (0..fd.freqs.num_bins())
            .map(|q| wng_db(&fd.weights[q], &steer.vector(q, m)))
            .collect(),
    })
}

/// WNG of the synthesized FIR filters, sampled at every bin of `steer`.
pub fn wng_curve_fir(
    bf: &BeamformerFilters,
    steer: &SteeringSet,
    look: &Direction,
) -> Result<CurveReport> {
    let m = look_index(steer.grid(), look)?;
    let freqs = steer.freqs();
    let values = (0..freqs.num_bins())
        .into_par_iter()
        .map(|q| {
            let w = filter_response(bf, freqs.freq_hz(q))?;
            Ok(wng_db(&w, &steer.vector(q, m)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveReport {
        kind: CurveKind::Wng,
        freqs: freqs.freqs_hz(),
        values,
    })
}

fn look_index(grid: &DirectionGrid, look: &Direction) -> Result<usize> {
    grid.index_of(look)
        .ok_or_else(|| Error::invalid(format!("look direction {look} is not on the grid")))
}

/// `DI(ω) = |B(ω, look)|² / ((1/4π) Σ_m w_m |B(ω, m)|²)` in dB, using the
/// grid's quadrature weights.
pub fn directivity_index(bp: &BeampatternMap, look: &Direction) -> Result<CurveReport> {
    let li = look_index(&bp.grid, look)?;
    let weights = bp.grid.weights();
    let values = bp
        .values
        .iter()
        .zip(&bp.freqs)
        .map(|(row, f)| {
            let diffuse: f64 = row
                .iter()
                .zip(weights)
                .map(|(b, w)| w * b.norm_sqr())
                .sum::<f64>()
                / (4.0 * PI);
            if !(diffuse > 0.0) {
                return Err(Error::Numerical(format!(
                    "beampattern vanishes everywhere at {f} Hz"
                )));
            }
            Ok(10.0 * (row[li].norm_sqr() / diffuse).log10())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveReport {
        kind: CurveKind::Di,
        freqs: bp.freqs.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    /// Maximum over all frequencies and directions is 0 dB.
    Global,
    /// Maximum over the directions at the given elevation (all frequencies)
    /// is 0 dB; directions off that plane may exceed it.
    Plane { elevation_deg: f64 },
}

impl std::str::FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Normalization::Global),
            _ => {
                let el = s
                    .strip_prefix("plane:")
                    .or_else(|| s.strip_prefix("plane="))
                    .map(str::trim)
                    .unwrap_or(if s == "plane" { "90" } else { "" });
                el.parse::<f64>()
                    .map(|elevation_deg| Normalization::Plane { elevation_deg })
                    .map_err(|_| {
                        Error::invalid(format!(
                            "unknown normalization {s:?} (use global or plane:<deg>)"
                        ))
                    })
            }
        }
    }
}

/// Magnitude map in dB relative to a reference maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct DbMap {
    pub freqs: Vec<f64>,
    pub grid: DirectionGrid,
    /// `[freq][direction]`; `-inf` where the response is exactly zero.
    pub values: Vec<Vec<f64>>,
}

impl DbMap {
    /// CSV with columns `freq_hz,azimuth_deg,elevation_deg,db`, clamped at
    /// [`CSV_DB_FLOOR`].
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "freq_hz,azimuth_deg,elevation_deg,db")?;
        for (f, row) in self.freqs.iter().zip(&self.values) {
            for (d, v) in self.grid.directions().iter().zip(row) {
                writeln!(
                    w,
                    "{f},{},{},{}",
                    d.azimuth_deg,
                    d.elevation_deg,
                    v.max(CSV_DB_FLOOR)
                )?;
            }
        }
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn normalize_db(bp: &BeampatternMap, mode: Normalization) -> Result<DbMap> {
    let in_ref: Vec<bool> = match mode {
        Normalization::Global => vec![true; bp.grid.len()],
        Normalization::Plane { elevation_deg } => bp
            .grid
            .directions()
            .iter()
            .map(|d| (d.elevation_deg - elevation_deg).abs() < 1e-9)
            .collect(),
    };
    let reference = bp
        .values
        .iter()
        .flat_map(|row| {
            row.iter()
                .zip(&in_ref)
                .filter(|(_, r)| **r)
                .map(|(b, _)| b.norm())
        })
        .fold(0.0, f64::max);
    if !(reference > 0.0) {
        return Err(Error::Numerical(
            "beampattern is zero over the normalization region".into(),
        ));
    }
    let ref_db = 20.0 * reference.log10();
    Ok(DbMap {
        freqs: bp.freqs.clone(),
        grid: bp.grid.clone(),
        values: bp
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|b| 20.0 * b.norm().log10() - ref_db)
                    .collect()
            })
            .collect(),
    })
}

/// For each frequency, the direction holding the largest `|B|`.
pub fn peak_directions(bp: &BeampatternMap) -> Vec<Direction> {
    bp.values
        .iter()
        .map(|row| {
            let (i, _) = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, b)| {
                    if b.norm() > acc.1 {
                        (i, b.norm())
                    } else {
                        acc
                    }
                });
            bp.grid.directions()[i]
        })
        .collect()
}
