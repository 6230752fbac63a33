use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::array::Direction;
use crate::error::{Error, Result};
use crate::signals;

use super::{same_rate, wav};

/// Where a source's mono signal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSource {
    /// A WAV file, relative paths resolved against the scene file's folder.
    Wav {
        path: PathBuf,
        #[serde(default)]
        channel: usize,
    },
    /// Seeded speech-shaped noise.
    SpeechNoise { seed: u64 },
    /// Seeded white Gaussian noise at −20 dBFS RMS.
    WhiteNoise { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub signal: SignalSource,
    pub direction: Direction,
    /// `null` in JSON stands for −∞ (source muted).
    #[serde(deserialize_with = "gain_or_muted")]
    pub gain_db: f64,
}

fn gain_or_muted<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub sources: Vec<SourceSpec>,
    pub target_index: usize,
    /// White sensor noise level relative to the target at the frontmost
    /// microphone; `None` for no noise.
    #[serde(default)]
    pub sensor_noise_snr_db: Option<f64>,
    /// Seeds the sensor noise.
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) || self.num_samples() == 0 {
            return Err(Error::invalid(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if self.sources.is_empty() {
            return Err(Error::invalid("scene has no sources"));
        }
        if self.target_index >= self.sources.len() {
            return Err(Error::invalid(format!(
                "target index {} out of range for {} sources",
                self.target_index,
                self.sources.len()
            )));
        }
        if let Some(s) = self
            .sources
            .iter()
            .find(|s| s.gain_db.is_nan() || s.gain_db == f64::INFINITY)
        {
            return Err(Error::invalid(format!(
                "invalid source gain {} dB",
                s.gain_db
            )));
        }
        if let Some(snr) = self.sensor_noise_snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid(format!(
                    "sensor noise SNR must be finite, got {snr}"
                )));
            }
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scene: SceneSpec =
            serde_json::from_str(&text).map_err(|e| Error::format(path, None, e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    /// The mono source signals at the scene rate, each exactly
    /// `num_samples()` long.
    pub fn signals(&self, base_dir: &Path) -> Result<Vec<Vec<f64>>> {
        let n = self.num_samples();
        let fs = self.sample_rate_hz;
        self.sources
            .iter()
            .map(|s| {
                let mut x = match &s.signal {
                    SignalSource::SpeechNoise { seed } => {
                        signals::speech_shaped_noise(*seed, n, fs)
                    }
                    SignalSource::WhiteNoise { seed } => signals::white_noise(*seed, n),
                    SignalSource::Wav { path, channel } => {
                        let p = base_dir.join(path);
                        let buf = wav::read_wav(&p)?;
                        if !same_rate(buf.sample_rate(), fs) {
                            return Err(Error::invalid(format!(
                                "{} is sampled at {} Hz, scene at {fs} Hz",
                                p.display(),
                                buf.sample_rate()
                            )));
                        }
                        if *channel >= buf.num_channels() {
                            return Err(Error::invalid(format!(
                                "{} has no channel {channel}",
                                p.display()
                            )));
                        }
                        buf.channel(*channel).to_vec()
                    }
                };
                x.resize(n, 0.0);
                Ok(x)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::AudioBuffer;

    const JSON: &str = r#"{
        "sample_rate_hz": 16000,
        "duration_s": 0.01,
        "sources": [
            {"signal": {"kind": "speech_noise", "seed": 3}, "direction": {"azimuth_deg": 90, "elevation_deg": 90}, "gain_db": 0},
            {"signal": {"kind": "wav", "path": "x.wav"}, "direction": {"azimuth_deg": 15, "elevation_deg": 73}, "gain_db": null}
        ],
        "target_index": 0,
        "sensor_noise_snr_db": 30,
        "seed": 7
    }"#;

    #[test]
    fn parses_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.json");
        fs::write(&p, JSON).unwrap();
        let scene = SceneSpec::load(&p).unwrap();
        assert_eq!(scene.sources[1].gain_db, f64::NEG_INFINITY);
        assert_eq!(scene.num_samples(), 160);
        assert!(scene.signals(dir.path()).is_err());
        let w = AudioBuffer::mono(16000.0, vec![0.5; 100]).unwrap();
        wav::write_wav(dir.path().join("x.wav"), &w, wav::SampleFormat::Float32).unwrap();
        let sigs = scene.signals(dir.path()).unwrap();
        assert_eq!(sigs[1].len(), 160);
        assert_eq!(sigs[1][99], 0.5);
        assert_eq!(sigs[1][100], 0.0);
        assert_eq!(sigs[0], signals::speech_shaped_noise(3, 160, 16000.0));
        let w8 = AudioBuffer::mono(8000.0, vec![0.5; 100]).unwrap();
        wav::write_wav(dir.path().join("x.wav"), &w8, wav::SampleFormat::Float32).unwrap();
        assert!(scene.signals(dir.path()).is_err());
    }

    #[test]
    fn validation() {
        let base: SceneSpec = serde_json::from_str(JSON).unwrap();
        let mut s = base.clone();
        s.target_index = 2;
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.sources.clear();
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.duration_s = 0.0;
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.sensor_noise_snr_db = Some(f64::NAN);
        assert!(s.validate().is_err());
        let bad = JSON.replace("\"elevation_deg\": 73", "\"elevation_deg\": 190");
        assert!(serde_json::from_str::<SceneSpec>(&bad).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("broken.json");
        fs::write(&p, "{").unwrap();
        assert!(matches!(SceneSpec::load(&p), Err(Error::Format { .. })));
    }
}
