//! Array geometry, spherical direction grids and quadrature weights.
//!
//! Angles follow the usual acoustics convention: azimuth is measured from the
//! positive x-axis in the xy-plane, elevation from the positive z-axis, both
//! in degrees. A grid is ordered elevation-major (north pole, rings of
//! ascending elevation with ascending azimuth, south pole) so that 2-D maps
//! can be written out as row-major matrices.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Azimuth assigned to the single direction kept at each pole.
pub const POLE_AZIMUTH_DEG: f64 = 90.0;

const MIN_MIC_SPACING_M: f64 = 1e-6;
const FOUR_PI: f64 = 4.0 * PI;

/// Microphone positions in a head-fixed Cartesian frame (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct ArrayGeometry {
    mics: Vec<Vec3>,
    frontmost_index: usize,
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    mics_m: Vec<Vec3>,
    frontmost_index: usize,
}

impl TryFrom<GeometryRepr> for ArrayGeometry {
    type Error = Error;
    fn try_from(r: GeometryRepr) -> Result<Self> {
        ArrayGeometry::new(r.mics_m, r.frontmost_index)
    }
}

impl From<ArrayGeometry> for GeometryRepr {
    fn from(g: ArrayGeometry) -> Self {
        GeometryRepr {
            mics_m: g.mics,
            frontmost_index: g.frontmost_index,
        }
    }
}

impl ArrayGeometry {
    pub fn new(mics: Vec<Vec3>, frontmost_index: usize) -> Result<Self> {
        if mics.is_empty() {
            return Err(Error::invalid(
                "array geometry needs at least one microphone",
            ));
        }
        if frontmost_index >= mics.len() {
            return Err(Error::invalid(format!(
                "frontmost index {frontmost_index} out of range for {} microphones",
                mics.len()
            )));
        }
        for (i, p) in mics.iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "microphone {i} has a non-finite coordinate"
                )));
            }
        }
        for i in 0..mics.len() {
            for j in i + 1..mics.len() {
                if dist(&mics[i], &mics[j]) < MIN_MIC_SPACING_M {
                    return Err(Error::invalid(format!(
                        "microphones {i} and {j} are closer than {MIN_MIC_SPACING_M} m"
                    )));
                }
            }
        }
        Ok(ArrayGeometry {
            mics,
            frontmost_index,
        })
    }

    /// Twelve microphones scattered irregularly over a 6 cm sphere, standing
    /// in for a humanoid robot head array. Mic 1 sits nearest the +y
    /// (90°, 90°) direction and is the frontmost one.
    pub fn head12() -> Self {
        const RADIUS: f64 = 0.06;
        const ANGLES: [(f64, f64); 12] = [
            (20.0, 60.0),
            (75.0, 80.0),
            (110.0, 95.0),
            (150.0, 55.0),
            (200.0, 70.0),
            (250.0, 100.0),
            (300.0, 65.0),
            (340.0, 110.0),
            (95.0, 40.0),
            (160.0, 125.0),
            (45.0, 120.0),
            (230.0, 35.0),
        ];
        let mics = ANGLES
            .iter()
            .map(|&(az, el)| {
                let u = Direction::new_unchecked(az, el).unit_vector();
                [RADIUS * u[0], RADIUS * u[1], RADIUS * u[2]]
            })
            .collect();
        ArrayGeometry::new(mics, 1).expect("built-in geometry is valid")
    }

    /// Plain CSV of `x,y,z` rows in meters. Blank lines, `#` comments and a
    /// non-numeric header row are skipped.
    pub fn from_csv_str(text: &str, frontmost_index: usize) -> Result<Self> {
        let mut mics = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 3 => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::invalid(format!(
                            "line {}: non-finite coordinate",
                            lineno + 1
                        )));
                    }
                    mics.push([v[0], v[1], v[2]]);
                }
                Ok(v) => {
                    return Err(Error::invalid(format!(
                        "line {}: expected 3 columns, found {}",
                        lineno + 1,
                        v.len()
                    )))
                }
                Err(_) if mics.is_empty() => continue, // header
                Err(e) => return Err(Error::invalid(format!("line {}: {e}", lineno + 1))),
            }
        }
        ArrayGeometry::new(mics, frontmost_index)
    }

    pub fn load_csv(path: impl AsRef<Path>, frontmost_index: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ArrayGeometry::from_csv_str(&text, frontmost_index).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::format(path, None, m),
            e => e,
        })
    }

    pub fn num_mics(&self) -> usize {
        self.mics.len()
    }

    pub fn mics(&self) -> &[Vec3] {
        &self.mics
    }

    pub fn frontmost_index(&self) -> usize {
        self.frontmost_index
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.mics.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.mics {
            for k in 0..3 {
                c[k] += p[k] / n;
            }
        }
        c
    }

    /// Positions relative to the centroid.
    pub fn centered(&self) -> Vec<Vec3> {
        let c = self.centroid();
        self.mics
            .iter()
            .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
            .collect()
    }
}

fn dist(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// A direction on the unit sphere in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DirectionRepr")]
pub struct Direction {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

#[derive(Deserialize)]
struct DirectionRepr {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl TryFrom<DirectionRepr> for Direction {
    type Error = Error;
    fn try_from(r: DirectionRepr) -> Result<Self> {
        Direction::new(r.azimuth_deg, r.elevation_deg)
    }
}

impl Direction {
    /// Azimuth is wrapped into `[0, 360)`; elevation must lie in `[0, 180]`.
    /// At the poles the azimuth is canonicalized to [`POLE_AZIMUTH_DEG`].
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        if !azimuth_deg.is_finite() || !elevation_deg.is_finite() {
            return Err(Error::invalid("direction angles must be finite"));
        }
        if !(0.0..=180.0).contains(&elevation_deg) {
            return Err(Error::invalid(format!(
                "elevation {elevation_deg}° outside [0, 180]"
            )));
        }
        Ok(Self::new_unchecked(azimuth_deg, elevation_deg))
    }

    pub(crate) fn new_unchecked(azimuth_deg: f64, elevation_deg: f64) -> Self {
        let azimuth_deg = if elevation_deg == 0.0 || elevation_deg == 180.0 {
            POLE_AZIMUTH_DEG
        } else {
            let a = azimuth_deg.rem_euclid(360.0);
            // rem_euclid can round up to exactly 360 for tiny negative inputs
            if a >= 360.0 {
                0.0
            } else {
                a
            }
        };
        Direction {
            azimuth_deg,
            elevation_deg,
        }
    }

    pub fn is_pole(&self) -> bool {
        self.elevation_deg == 0.0 || self.elevation_deg == 180.0
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (sp, cp) = self.azimuth_deg.to_radians().sin_cos();
        let (st, ct) = self.elevation_deg.to_radians().sin_cos();
        [st * cp, st * sp, ct]
    }

    fn key(&self) -> (i64, i64) {
        (
            (self.elevation_deg * 1e6).round() as i64,
            (self.azimuth_deg * 1e6).round() as i64,
        )
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}°, {}°)", self.azimuth_deg, self.elevation_deg)
    }
}

/// Great-circle distance in degrees, in `[0, 180]`.
///
/// Evaluated as `atan2(|u×v|, u·v)`, which equals `acos(u·v)` but keeps full
/// precision for nearly coincident or antipodal directions.
pub fn great_circle_distance(a: &Direction, b: &Direction) -> f64 {
    let u = a.unit_vector();
    let v = b.unit_vector();
    let dot = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0);
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let s = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    s.atan2(dot).to_degrees()
}

/// Ordered directions with spherical quadrature weights summing to 4π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct DirectionGrid {
    directions: Vec<Direction>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    /// `[azimuth_deg, elevation_deg]` pairs
    directions_deg: Vec<[f64; 2]>,
    weights_sr: Vec<f64>,
}

impl TryFrom<GridRepr> for DirectionGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        let dirs = r
            .directions_deg
            .iter()
            .map(|&[az, el]| Direction::new(az, el))
            .collect::<Result<Vec<_>>>()?;
        DirectionGrid::new(dirs, r.weights_sr)
    }
}

impl From<DirectionGrid> for GridRepr {
    fn from(g: DirectionGrid) -> Self {
        GridRepr {
            directions_deg: g
                .directions
                .iter()
                .map(|d| [d.azimuth_deg, d.elevation_deg])
                .collect(),
            weights_sr: g.weights,
        }
    }
}

impl DirectionGrid {
    pub fn new(directions: Vec<Direction>, weights: Vec<f64>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::invalid("direction grid is empty"));
        }
        if directions.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} directions but {} weights",
                directions.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(format!(
                "weight {i} is not strictly positive"
            )));
        }
        let total: f64 = weights.iter().sum();
        if ((total - FOUR_PI) / FOUR_PI).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "weights sum to {total}, expected 4π"
            )));
        }
        let mut seen = HashSet::with_capacity(directions.len());
        for (i, d) in directions.iter().enumerate() {
            let d = Direction::new(d.azimuth_deg, d.elevation_deg)?;
            if !seen.insert(d.key()) {
                return Err(Error::invalid(format!(
                    "duplicate direction {d} at index {i}"
                )));
            }
        }
        Ok(DirectionGrid {
            directions,
            weights,
        })
    }

    /// Equal weights 4π/M. Used for design grids (rings, subsets) where the
    /// quadrature weights play no role.
    pub fn with_equal_weights(directions: Vec<Direction>) -> Result<Self> {
        let w = FOUR_PI / directions.len().max(1) as f64;
        let weights = vec![w; directions.len()];
        DirectionGrid::new(directions, weights)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> Option<&Direction> {
        self.directions.get(i)
    }

    /// Quadrature sum Σ w_m f(dir_m).
    pub fn integrate(&self, mut f: impl FnMut(&Direction) -> f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * f(d))
            .sum()
    }

    /// Index of the node exactly at `target` (up to 1e-6°), if any.
    pub fn index_of(&self, target: &Direction) -> Option<usize> {
        let i = nearest_direction(self, target);
        (great_circle_distance(&self.directions[i], target) < 1e-6).then_some(i)
    }

    /// SHA-256 over the little-endian bytes of every (azimuth, elevation, weight).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (d, w) in self.directions.iter().zip(&self.weights) {
            h.update(d.azimuth_deg.to_le_bytes());
            h.update(d.elevation_deg.to_le_bytes());
            h.update(w.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Uniform azimuth × elevation grid. Rings sit at elevations
/// `el_step, …, 180 − el_step`; with `include_poles` one extra direction is
/// placed at each pole. Ring nodes are weighted ∝ sin θ, poles by the area of
/// the cap of half-angle `el_step / 2`, and everything is rescaled to 4π.
pub fn make_uniform_grid(az_step: f64, el_step: f64, include_poles: bool) -> Result<DirectionGrid> {
    let n_az = lattice_count(360.0, az_step, "azimuth")?;
    let n_el = lattice_count(180.0, el_step, "elevation")?;
    let d_az = az_step.to_radians();
    let d_el = el_step.to_radians();

    let mut dirs = Vec::new();
    let mut weights = Vec::new();
    let cap = 2.0 * PI * (1.0 - (d_el / 2.0).cos());
    if include_poles {
        dirs.push(Direction::new_unchecked(POLE_AZIMUTH_DEG, 0.0));
        weights.push(cap);
    }
    for i in 1..n_el {
        let el = i as f64 * el_step;
        let w = el.to_radians().sin() * d_el * d_az;
        for j in 0..n_az {
            dirs.push(Direction::new_unchecked(j as f64 * az_step, el));
            weights.push(w);
        }
    }
    if include_poles {
        dirs.push(Direction::new_unchecked(POLE_AZIMUTH_DEG, 180.0));
        weights.push(cap);
    }
    if dirs.is_empty() {
        return Err(Error::invalid(
            "grid has no directions (elevation step 180° without poles)",
        ));
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= FOUR_PI / total;
    }
    DirectionGrid::new(dirs, weights)
}

fn lattice_count(span: f64, step: f64, what: &str) -> Result<usize> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!(
            "{what} step must be positive, got {step}"
        )));
    }
    let n = (span / step).round();
    if (n * step - span).abs() > 1e-9 * span || n < 1.0 {
        return Err(Error::invalid(format!(
            "{span} is not divisible by the {what} step {step}"
        )));
    }
    Ok(n as usize)
}

/// Index of the grid node closest to `target`; ties go to the lowest index.
pub fn nearest_direction(grid: &DirectionGrid, target: &Direction) -> usize {
    let t = target.unit_vector();
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, d) in grid.directions.iter().enumerate() {
        let u = d.unit_vector();
        let dot = u[0] * t[0] + u[1] * t[1] + u[2] * t[2];
        // compare in angle space so exact ties stay ties after rounding
        if dot > best_dot + 1e-15 {
            best = i;
            best_dot = dot;
        }
    }
    best
}
