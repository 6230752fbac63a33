//! Run configuration: a JSON file whose fields the command-line flags
//! override.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rlsfi::array::{make_uniform_grid, ArrayGeometry, Direction, DirectionGrid};
use rlsfi::dsp::wav::SampleFormat;
use rlsfi::dsp::Acoustics;
use rlsfi::hrtf::HrtfDataset;
use rlsfi::metrics::{FwSegSnrParams, ScenarioMatrix};
use rlsfi::steering::{
    free_field_steering, hrtf_steering, FrequencyGrid, SteeringSet, DEFAULT_SOUND_SPEED,
};
use rlsfi::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Mode {
    #[serde(rename = "1d")]
    #[value(name = "1d")]
    OneD,
    #[serde(rename = "2d")]
    #[value(name = "2d")]
    TwoD,
}

impl Mode {
    pub fn id(self) -> &'static str {
        match self {
            Mode::OneD => "1d",
            Mode::TwoD => "2d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Microphone positions (CSV of x,y,z rows or geometry JSON); the
    /// built-in 12-microphone head when absent.
    pub geometry: Option<PathBuf>,
    pub frontmost_index: Option<usize>,
    /// Measured impulse-response dataset manifest.
    pub hrtf: Option<PathBuf>,
    pub free_field: bool,
    pub sound_speed: f64,
    pub gamma_db: f64,
    /// `[azimuth, elevation]` in degrees.
    pub look: [f64; 2],
    pub beamwidth_deg: f64,
    pub num_taps: usize,
    pub sample_rate_hz: f64,
    pub mode: Mode,
    /// `[azimuth, elevation]` steps of the free-field design grid.
    pub grid_step_deg: [f64; 2],
    pub band_hz: [f64; 2],
    pub normalization: String,
    /// Beampattern CSV keeps every n-th bin of the band.
    pub pattern_bin_stride: usize,
    pub wav_format: SampleFormat,
    pub seed: Option<u64>,
    pub scene: Option<PathBuf>,
    pub matrix: ScenarioMatrix,
    pub eval_modes: Vec<Mode>,
    pub fwsegsnr: FwSegSnrParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: None,
            frontmost_index: None,
            hrtf: None,
            free_field: false,
            sound_speed: DEFAULT_SOUND_SPEED,
            gamma_db: -20.0,
            look: [90.0, 90.0],
            beamwidth_deg: 20.0,
            num_taps: 1024,
            sample_rate_hz: 16000.0,
            mode: Mode::TwoD,
            grid_step_deg: [5.0, 5.0],
            band_hz: [300.0, 5000.0],
            normalization: "global".into(),
            pattern_bin_stride: 8,
            wav_format: SampleFormat::Float32,
            seed: None,
            scene: None,
            matrix: ScenarioMatrix::default(),
            eval_modes: vec![Mode::OneD, Mode::TwoD],
            fwsegsnr: FwSegSnrParams::default(),
        }
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.parse().map_err(|_| format!("{a:?} is not a number"))?,
            b.parse().map_err(|_| format!("{b:?} is not a number"))?,
        ]),
        _ => Err(format!("expected two comma-separated numbers, got {s:?}")),
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Plane-wave steering for the array geometry
    #[arg(long, global = true)]
    pub free_field: bool,
    /// Impulse-response dataset manifest
    #[arg(long, global = true)]
    pub hrtf: Option<PathBuf>,
    /// Microphone geometry (CSV or JSON)
    #[arg(long, global = true)]
    pub geometry: Option<PathBuf>,
    /// Index of the frontmost microphone in the geometry
    #[arg(long, global = true)]
    pub frontmost: Option<usize>,
    /// WNG floor in dB
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma_db: Option<f64>,
    /// Look direction "azimuth,elevation" in degrees
    #[arg(long, global = true, value_parser = parse_pair)]
    pub look: Option<[f64; 2]>,
    /// 3-dB beamwidth of the desired response in degrees
    #[arg(long, global = true)]
    pub beamwidth: Option<f64>,
    /// FIR length L (even)
    #[arg(long, global = true)]
    pub taps: Option<usize>,
    /// Sample rate in Hz
    #[arg(long, global = true)]
    pub fs: Option<f64>,
    /// Desired-response mode
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// Noise seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Analysis band "lo,hi" in Hz
    #[arg(long, global = true, value_parser = parse_pair)]
    pub band: Option<[f64; 2]>,
    /// Beampattern normalization: global or plane:<elevation>
    #[arg(long, global = true)]
    pub normalization: Option<String>,
}

pub fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Reads `--config` (relative paths inside it are taken from its folder)
    /// and applies the flags on top.
    pub fn from_args(args: &CommonArgs) -> rlsfi::Result<Self> {
        let mut cfg = match &args.config {
            None => RunConfig::default(),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                let mut cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new("."));
                resolve(base, &mut cfg.geometry);
                resolve(base, &mut cfg.hrtf);
                resolve(base, &mut cfg.scene);
                cfg
            }
        };
        if args.free_field && args.hrtf.is_some() {
            return Err(config_error(
                "choose either --free-field or --hrtf, not both",
            ));
        }
        if args.free_field {
            cfg.free_field = true;
            cfg.hrtf = None;
        }
        if let Some(p) = &args.hrtf {
            cfg.hrtf = Some(p.clone());
            cfg.free_field = false;
        }
        if args.geometry.is_some() {
            cfg.geometry = args.geometry.clone();
        }
        if args.frontmost.is_some() {
            cfg.frontmost_index = args.frontmost;
        }
        if let Some(v) = args.gamma_db {
            cfg.gamma_db = v;
        }
        if let Some(v) = args.look {
            cfg.look = v;
        }
        if let Some(v) = args.beamwidth {
            cfg.beamwidth_deg = v;
        }
        if let Some(v) = args.taps {
            cfg.num_taps = v;
        }
        if let Some(v) = args.fs {
            cfg.sample_rate_hz = v;
            cfg.matrix.sample_rate_hz = v;
        }
        if let Some(v) = args.mode {
            cfg.mode = v;
        }
        if args.seed.is_some() {
            cfg.seed = args.seed;
        }
        if let Some(v) = args.band {
            cfg.band_hz = v;
        }
        if let Some(v) = &args.normalization {
            cfg.normalization = v.clone();
        }
        if cfg.pattern_bin_stride == 0 {
            return Err(config_error("pattern_bin_stride must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn look(&self) -> rlsfi::Result<Direction> {
        Direction::new(self.look[0], self.look[1])
    }

    pub fn band(&self) -> (f64, f64) {
        (self.band_hz[0], self.band_hz[1])
    }

    pub fn load_geometry(&self) -> rlsfi::Result<ArrayGeometry> {
        let geom = match &self.geometry {
            None => ArrayGeometry::head12(),
            Some(p) if p.extension().is_some_and(|e| e == "json") => {
                let text = fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                serde_json::from_str(&text).map_err(|e| Error::Format {
                    path: p.clone(),
                    offset: None,
                    message: e.to_string(),
                })?
            }
            Some(p) => ArrayGeometry::load_csv(p, 0)?,
        };
        match self.frontmost_index {
            Some(i) => ArrayGeometry::new(geom.mics().to_vec(), i),
            None => Ok(geom),
        }
    }

    /// The acoustic model: measured dataset xor free field.
    pub fn source(&self) -> rlsfi::Result<SteeringSource> {
        match (&self.hrtf, self.free_field) {
            (Some(_), true) => Err(config_error(
                "choose either --free-field or --hrtf, not both",
            )),
            (None, false) => Err(config_error(
                "no steering model: pass --free-field or --hrtf <manifest>",
            )),
            (Some(p), false) => {
                let ds = HrtfDataset::load(p)?;
                if let Some(i) = self.frontmost_index {
                    return Ok(SteeringSource::Measured(ds.with_frontmost_index(i)?));
                }
                Ok(SteeringSource::Measured(ds))
            }
            (None, true) => {
                if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
                    return Err(config_error(format!(
                        "sound speed must be positive, got {}",
                        self.sound_speed
                    )));
                }
                Ok(SteeringSource::FreeField {
                    geometry: self.load_geometry()?,
                    grid: make_uniform_grid(self.grid_step_deg[0], self.grid_step_deg[1], true)?,
                    sound_speed: self.sound_speed,
                })
            }
        }
    }
}

pub enum SteeringSource {
    FreeField {
        geometry: ArrayGeometry,
        grid: DirectionGrid,
        sound_speed: f64,
    },
    Measured(HrtfDataset),
}

impl SteeringSource {
    pub fn steering(&self, freqs: &FrequencyGrid) -> rlsfi::Result<SteeringSet> {
        match self {
            SteeringSource::FreeField {
                geometry,
                grid,
                sound_speed,
            } => free_field_steering(geometry, grid, freqs, *sound_speed),
            SteeringSource::Measured(ds) => hrtf_steering(ds, freqs),
        }
    }

    pub fn acoustics(&self) -> Acoustics<'_> {
        match self {
            SteeringSource::FreeField {
                geometry,
                sound_speed,
                ..
            } => Acoustics::FreeField {
                geometry,
                sound_speed: *sound_speed,
            },
            SteeringSource::Measured(ds) => Acoustics::Measured(ds),
        }
    }
}
