//! Design and filter files: a JSON manifest plus a raw little-endian payload
//! beside it.
//!
//! * design: `complex64` weights (interleaved `f32` real/imaginary parts),
//!   row-major `[bin][mic]`;
//! * filters: `f64` taps, row-major `[mic][tap]`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::Direction;
use crate::error::{Error, Result};
use crate::fir::{BeamformerFilters, SynthesisReport};
use crate::solver::{BinDiagnostics, FrequencyDesign};
use crate::steering::FrequencyGrid;

pub const DESIGN_FORMAT: &str = "rlsfi-design";
pub const FILTERS_FORMAT: &str = "rlsfi-filters";
pub const FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DesignManifest {
    format: String,
    version: u32,
    sample_rate_hz: f64,
    num_taps: usize,
    num_bins: usize,
    num_mics: usize,
    look: Direction,
    gamma: f64,
    gamma_db: f64,
    beamwidth_deg: f64,
    grid_hash: String,
    sample_format: String,
    layout: String,
    data_file: String,
    /// Companion filter manifest, relative to this one.
    #[serde(default)]
    filters_file: Option<String>,
    diagnostics: Vec<BinDiagnostics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FiltersManifest {
    format: String,
    version: u32,
    sample_rate_hz: f64,
    num_mics: usize,
    num_taps: usize,
    modeling_delay: usize,
    look: Option<Direction>,
    gamma_db: Option<f64>,
    synthesis: SynthesisReport,
    sample_format: String,
    layout: String,
    data_file: String,
}

fn sibling(manifest: &Path, name: &str) -> PathBuf {
    manifest
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(name)
}

fn payload_name(manifest: &Path) -> Result<String> {
    manifest
        .file_stem()
        .and_then(|s| s.to_str())
        .map(|s| format!("{s}.bin"))
        .ok_or_else(|| Error::invalid(format!("bad manifest path {}", manifest.display())))
}

fn write_pair(path: &Path, manifest: &impl Serialize, payload: &[u8]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let data = sibling(path, &payload_name(path)?);
    fs::write(&data, payload).map_err(|e| Error::io(&data, e))
}

fn read_manifest<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, None, format!("manifest: {e}")))
}

fn read_payload(manifest: &Path, data_file: &str, expected: usize) -> Result<(PathBuf, Vec<u8>)> {
    let p = sibling(manifest, data_file);
    let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
    if bytes.len() != expected {
        return Err(Error::format(
            &p,
            Some(bytes.len().min(expected) as u64),
            format!(
                "payload size mismatch: expected {expected} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    Ok((p, bytes))
}

/// `got` and `want` are `[format tag, sample format, layout]`.
fn check_header(path: &Path, version: u32, got: [&str; 3], want: [&str; 3]) -> Result<()> {
    let [format, sample, layout] = got;
    let [want, want_sample, want_layout] = want;
    if format != want {
        return Err(Error::format(
            path,
            None,
            format!("unknown format tag {format:?}, expected {want:?}"),
        ));
    }
    if version != FILE_VERSION {
        return Err(Error::format(
            path,
            None,
            format!("unsupported version {version}"),
        ));
    }
    if sample != want_sample || layout != want_layout {
        return Err(Error::format(
            path,
            None,
            format!("unsupported sample format/layout {sample:?}/{layout:?}"),
        ));
    }
    Ok(())
}

/// Writes `path` and `<stem>.bin`. `filters_file` names an accompanying
/// filter manifest to record.
pub fn write_design(
    path: impl AsRef<Path>,
    fd: &FrequencyDesign,
    filters_file: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let man = DesignManifest {
        format: DESIGN_FORMAT.into(),
        version: FILE_VERSION,
        sample_rate_hz: fd.freqs.sample_rate(),
        num_taps: fd.freqs.num_taps(),
        num_bins: fd.weights.len(),
        num_mics: fd.num_mics(),
        look: fd.look,
        gamma: fd.gamma,
        gamma_db: 10.0 * fd.gamma.log10(),
        beamwidth_deg: fd.beamwidth_3db,
        grid_hash: fd.grid_hash.clone(),
        sample_format: "c64le".into(),
        layout: "bin,mic".into(),
        data_file: payload_name(path)?,
        filters_file: filters_file.map(str::to_owned),
        diagnostics: fd.diagnostics.clone(),
    };
    let mut bytes = Vec::with_capacity(fd.weights.len() * fd.num_mics() * 8);
    for w in fd.weights.iter().flatten() {
        bytes.extend_from_slice(&(w.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(w.im as f32).to_le_bytes());
    }
    write_pair(path, &man, &bytes)
}

#[derive(Debug, Clone)]
pub struct LoadedDesign {
    pub design: FrequencyDesign,
    /// Resolved path of the companion filter manifest, if one is recorded.
    pub filters_path: Option<PathBuf>,
}

pub fn read_design(path: impl AsRef<Path>) -> Result<LoadedDesign> {
    let path = path.as_ref();
    let man: DesignManifest = read_manifest(path)?;
    check_header(
        path,
        man.version,
        [&man.format, &man.sample_format, &man.layout],
        [DESIGN_FORMAT, "c64le", "bin,mic"],
    )?;
    let bad = |m: String| Error::format(path, None, m);
    let freqs =
        FrequencyGrid::new(man.sample_rate_hz, man.num_taps).map_err(|e| bad(e.to_string()))?;
    if man.num_bins != freqs.num_bins()
        || man.diagnostics.len() != man.num_bins
        || man.num_mics == 0
    {
        return Err(bad(format!(
            "{} bins with {} diagnostics do not fit L = {} ({} bins) and {} mics",
            man.num_bins,
            man.diagnostics.len(),
            man.num_taps,
            freqs.num_bins(),
            man.num_mics
        )));
    }
    if !(man.gamma.is_finite() && man.gamma > 0.0) {
        return Err(bad(format!("invalid gamma {}", man.gamma)));
    }
    let (data, bytes) = read_payload(path, &man.data_file, man.num_bins * man.num_mics * 8)?;
    let mut vals = Vec::with_capacity(man.num_bins * man.num_mics);
    for (i, c) in bytes.chunks_exact(8).enumerate() {
        let re = f32::from_le_bytes(c[..4].try_into().unwrap());
        let im = f32::from_le_bytes(c[4..].try_into().unwrap());
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::format(
                &data,
                Some(8 * i as u64),
                "non-finite weight",
            ));
        }
        vals.push(Complex64::new(re as f64, im as f64));
    }
    let weights = vals
        .chunks(man.num_mics)
        .map(<[Complex64]>::to_vec)
        .collect();
    Ok(LoadedDesign {
        design: FrequencyDesign {
            freqs,
            look: man.look,
            gamma: man.gamma,
            beamwidth_3db: man.beamwidth_deg,
            weights,
            diagnostics: man.diagnostics,
            grid_hash: man.grid_hash,
        },
        filters_path: man.filters_file.map(|f| sibling(path, &f)),
    })
}

pub fn write_filters(path: impl AsRef<Path>, bf: &BeamformerFilters) -> Result<()> {
    let path = path.as_ref();
    let man = FiltersManifest {
        format: FILTERS_FORMAT.into(),
        version: FILE_VERSION,
        sample_rate_hz: bf.sample_rate(),
        num_mics: bf.num_mics(),
        num_taps: bf.len(),
        modeling_delay: bf.modeling_delay(),
        look: bf.look,
        gamma_db: bf.gamma.map(|g| 10.0 * g.log10()),
        synthesis: bf.report.clone(),
        sample_format: "f64le".into(),
        layout: "mic,tap".into(),
        data_file: payload_name(path)?,
    };
    let bytes: Vec<u8> = bf
        .taps()
        .iter()
        .flatten()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    write_pair(path, &man, &bytes)
}

pub fn read_filters(path: impl AsRef<Path>) -> Result<BeamformerFilters> {
    let path = path.as_ref();
    let man: FiltersManifest = read_manifest(path)?;
    check_header(
        path,
        man.version,
        [&man.format, &man.sample_format, &man.layout],
        [FILTERS_FORMAT, "f64le", "mic,tap"],
    )?;
    if man.num_mics == 0 || man.num_taps == 0 {
        return Err(Error::format(
            path,
            None,
            "filters need at least one mic and one tap",
        ));
    }
    let (data, bytes) = read_payload(path, &man.data_file, man.num_mics * man.num_taps * 8)?;
    let mut taps = Vec::with_capacity(man.num_mics * man.num_taps);
    for (i, c) in bytes.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(c.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(
                &data,
                Some(8 * i as u64),
                format!("non-finite tap {v}"),
            ));
        }
        taps.push(v);
    }
    let rows = taps.chunks(man.num_taps).map(<[f64]>::to_vec).collect();
    let mut bf = BeamformerFilters::new(rows, man.modeling_delay, man.sample_rate_hz)
        .map_err(|e| Error::format(path, None, e.to_string()))?;
    bf.look = man.look;
    bf.gamma = man.gamma_db.map(|g| 10f64.powf(g / 10.0));
    bf.report = man.synthesis;
    Ok(bf)
}
