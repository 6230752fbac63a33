//! Measured impulse-response datasets (HRTFs or room impulse responses).
//!
//! On disk a dataset is a JSON manifest plus a raw payload file next to it.
//! The payload holds little-endian `f32` samples laid out row-major as
//! `[direction][mic][tap]` with no header. The manifest carries the magic
//! string, version, sample rate, geometry, grid and sizes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, DirectionGrid};
use crate::error::{Error, Result};

pub const HRTF_FORMAT: &str = "rlsfi-hrtf";
pub const HRTF_VERSION: u32 = 1;
const SAMPLE_FORMAT: &str = "f32le";
const LAYOUT: &str = "direction,mic,tap";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    sample_rate_hz: f64,
    num_directions: usize,
    num_mics: usize,
    ir_length: usize,
    sample_format: String,
    layout: String,
    data_file: String,
    geometry: serde_json::Value,
    grid: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrtfDataset {
    geometry: ArrayGeometry,
    grid: DirectionGrid,
    ir_length: usize,
    sample_rate: f64,
    /// `[direction][mic][tap]`
    irs: Vec<f64>,
}

impl HrtfDataset {
    pub fn new(
        geometry: ArrayGeometry,
        grid: DirectionGrid,
        sample_rate: f64,
        ir_length: usize,
        irs: Vec<f64>,
    ) -> Result<Self> {
        if ir_length == 0 {
            return Err(Error::invalid("impulse responses need at least one tap"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let expected = grid.len() * geometry.num_mics() * ir_length;
        if irs.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} impulse-response samples, got {}",
                irs.len()
            )));
        }
        if let Some(i) = irs.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "impulse-response sample {i} is not finite"
            )));
        }
        Ok(HrtfDataset {
            geometry,
            grid,
            ir_length,
            sample_rate,
            irs,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn ir_length(&self) -> usize {
        self.ir_length
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Same data with a different microphone marked as frontmost.
    pub fn with_frontmost_index(mut self, index: usize) -> Result<Self> {
        self.geometry = ArrayGeometry::new(self.geometry.mics().to_vec(), index)?;
        Ok(self)
    }

    pub fn impulse_response(&self, m: usize, n: usize) -> &[f64] {
        let start = (m * self.geometry.num_mics() + n) * self.ir_length;
        &self.irs[start..start + self.ir_length]
    }

    /// Reads a manifest and its payload, validating every field.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let man: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::format(path, None, format!("manifest: {e}")))?;
        let bad = |msg: String| Error::format(path, None, msg);
        if man.format != HRTF_FORMAT {
            return Err(bad(format!(
                "unknown format tag {:?}, expected {HRTF_FORMAT:?}",
                man.format
            )));
        }
        if man.version != HRTF_VERSION {
            return Err(bad(format!("unsupported version {}", man.version)));
        }
        if man.sample_format != SAMPLE_FORMAT || man.layout != LAYOUT {
            return Err(bad(format!(
                "unsupported sample format/layout {:?}/{:?}",
                man.sample_format, man.layout
            )));
        }
        let geometry: ArrayGeometry =
            serde_json::from_value(man.geometry).map_err(|e| bad(format!("geometry: {e}")))?;
        let grid: DirectionGrid =
            serde_json::from_value(man.grid).map_err(|e| bad(format!("grid: {e}")))?;
        if grid.len() != man.num_directions || geometry.num_mics() != man.num_mics {
            return Err(bad(format!(
                "declared {} directions × {} mics but grid/geometry hold {} × {}",
                man.num_directions,
                man.num_mics,
                grid.len(),
                geometry.num_mics()
            )));
        }
        if man.ir_length == 0 {
            return Err(bad("ir_length must be at least 1".into()));
        }

        let data_path = data_path(path, &man.data_file);
        let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
        let expected = man.num_directions * man.num_mics * man.ir_length * 4;
        if bytes.len() != expected {
            return Err(Error::format(
                &data_path,
                Some(bytes.len().min(expected) as u64),
                format!(
                    "payload size mismatch: expected {expected} bytes, found {}",
                    bytes.len()
                ),
            ));
        }
        let mut irs = Vec::with_capacity(expected / 4);
        for (i, chunk) in bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(
                    &data_path,
                    Some(4 * i as u64),
                    format!("non-finite sample {v}"),
                ));
            }
            irs.push(v as f64);
        }
        HrtfDataset::new(geometry, grid, man.sample_rate_hz, man.ir_length, irs)
            .map_err(|e| Error::format(path, None, e.to_string()))
    }

    /// Writes `path` (manifest) and `<stem>.bin` (payload) beside it. Samples
    /// are stored as `f32`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::invalid(format!("bad manifest path {}", path.display())))?;
        let data_file = format!("{stem}.bin");
        let man = Manifest {
            format: HRTF_FORMAT.into(),
            version: HRTF_VERSION,
            sample_rate_hz: self.sample_rate,
            num_directions: self.grid.len(),
            num_mics: self.geometry.num_mics(),
            ir_length: self.ir_length,
            sample_format: SAMPLE_FORMAT.into(),
            layout: LAYOUT.into(),
            data_file: data_file.clone(),
            geometry: serde_json::to_value(&self.geometry).expect("geometry serializes"),
            grid: serde_json::to_value(&self.grid).expect("grid serializes"),
        };
        let mut text = serde_json::to_string_pretty(&man).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::with_capacity(self.irs.len() * 4);
        for &v in &self.irs {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let dp = data_path(path, &data_file);
        fs::write(&dp, bytes).map_err(|e| Error::io(&dp, e))
    }
}

fn data_path(manifest: &Path, data_file: &str) -> PathBuf {
    manifest
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(data_file)
}
