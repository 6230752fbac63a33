//! Frequency-invariant desired responses b̂ over a set of design directions.

use std::f64::consts::PI;
use std::io::Write;

use crate::array::{great_circle_distance, Direction, DirectionGrid};
use crate::error::{Error, Result};

/// Cosine main-lobe profile: `cos(π Δ / (2 Δ0))` for `Δ ≤ Δ0`, zero
/// beyond, with `Δ0` the 3-dB beamwidth. Unity at the look direction and
/// −3 dB at `Δ0 / 2`, i.e. the full width at −3 dB equals `Δ0`.
pub fn taper(delta_deg: f64, beamwidth_3db: f64) -> Result<f64> {
    if !(beamwidth_3db.is_finite() && beamwidth_3db > 0.0) {
        return Err(Error::invalid(format!(
            "beamwidth must be positive, got {beamwidth_3db}"
        )));
    }
    if !(delta_deg >= 0.0) {
        return Err(Error::invalid(format!(
            "angular distance must be ≥ 0, got {delta_deg}"
        )));
    }
    // distances computed on the sphere land a few ulps short of the edge
    if delta_deg >= beamwidth_3db * (1.0 - 1e-12) {
        return Ok(0.0);
    }
    Ok((PI * delta_deg / (2.0 * beamwidth_3db)).cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesiredResponse {
    grid: DirectionGrid,
    values: Vec<f64>,
    look_index: usize,
}

impl DesiredResponse {
    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn look_index(&self) -> usize {
        self.look_index
    }

    pub fn look(&self) -> Direction {
        self.grid.directions()[self.look_index]
    }

    /// CSV rows `azimuth_deg,elevation_deg,value` (header included).
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "azimuth_deg,elevation_deg,value")?;
        for (d, v) in self.grid.directions().iter().zip(&self.values) {
            writeln!(w, "{},{},{}", d.azimuth_deg, d.elevation_deg, v)?;
        }
        Ok(())
    }
}

/// Desired response on a single azimuth ring at fixed `elevation`.
pub fn build_desired_1d(
    az_step: f64,
    elevation: f64,
    look: Direction,
    beamwidth_3db: f64,
) -> Result<DesiredResponse> {
    let n = (360.0 / az_step).round();
    if !(az_step > 0.0) || (n * az_step - 360.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "360 is not divisible by the azimuth step {az_step}"
        )));
    }
    let dirs = (0..n as usize)
        .map(|j| Direction::new(j as f64 * az_step, elevation))
        .collect::<Result<Vec<_>>>()?;
    if (look.elevation_deg - elevation).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "look direction {look} is not on the {elevation}° elevation ring"
        )));
    }
    let grid = DirectionGrid::with_equal_weights(dirs)?;
    let look_index = grid.index_of(&look).ok_or_else(|| {
        Error::invalid(format!(
            "look azimuth of {look} is not on the {az_step}° lattice"
        ))
    })?;
    from_grid(grid, look_index, beamwidth_3db)
}

/// Desired response over an arbitrary grid by great-circle distance to `look`.
pub fn build_desired_2d(
    grid: &DirectionGrid,
    look: Direction,
    beamwidth_3db: f64,
) -> Result<DesiredResponse> {
    let look_index = grid
        .index_of(&look)
        .ok_or_else(|| Error::invalid(format!("look direction {look} is not a grid node")))?;
    from_grid(grid.clone(), look_index, beamwidth_3db)
}

fn from_grid(
    grid: DirectionGrid,
    look_index: usize,
    beamwidth_3db: f64,
) -> Result<DesiredResponse> {
    let look = grid.directions()[look_index];
    let mut values = grid
        .directions()
        .iter()
        .map(|d| taper(great_circle_distance(d, &look), beamwidth_3db))
        .collect::<Result<Vec<_>>>()?;
    values[look_index] = 1.0;
    Ok(DesiredResponse {
        grid,
        values,
        look_index,
    })
}
