//! Multichannel WAV I/O (16/24/32-bit PCM and 32-bit float).

use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Float32,
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(SampleFormat::Pcm16),
            "pcm24" => Ok(SampleFormat::Pcm24),
            "float32" | "f32" => Ok(SampleFormat::Float32),
            _ => Err(Error::invalid(format!(
                "unknown sample format {s:?} (pcm16, pcm24, float32)"
            ))),
        }
    }
}

fn map_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, None, other.to_string()),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path).map_err(|e| map_err(path, e))?;
    let spec = reader.spec();
    let nch = spec.channels as usize;
    if nch == 0 {
        return Err(Error::format(path, None, "zero channels"));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (HoundFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 2f64.powi(bits as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
        }
        (fmt, bits) => {
            return Err(Error::format(
                path,
                None,
                format!("unsupported {bits}-bit {fmt:?} samples"),
            ))
        }
    }
    .map_err(|e| map_err(path, e))?;
    let frames = interleaved.len() / nch;
    let channels = (0..nch)
        .map(|c| (0..frames).map(|k| interleaved[k * nch + c]).collect())
        .collect();
    AudioBuffer::new(spec.sample_rate as f64, channels)
        .map_err(|e| Error::format(path, None, e.to_string()))
}

/// PCM samples are scaled by `2^(bits−1)` and clipped to the integer range.
pub fn write_wav(path: impl AsRef<Path>, buf: &AudioBuffer, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let rate = buf.sample_rate();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "WAV needs an integer sample rate, got {rate}"
        )));
    }
    let channels = u16::try_from(buf.num_channels())
        .map_err(|_| Error::invalid("too many channels for a WAV file"))?;
    let (bits, sample_format) = match format {
        SampleFormat::Pcm16 => (16, HoundFormat::Int),
        SampleFormat::Pcm24 => (24, HoundFormat::Int),
        SampleFormat::Float32 => (32, HoundFormat::Float),
    };
    let spec = WavSpec {
        channels,
        sample_rate: rate as u32,
        bits_per_sample: bits,
        sample_format,
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| map_err(path, e))?;
    let scale = 2f64.powi(bits as i32 - 1);
    for k in 0..buf.len() {
        for ch in buf.channels() {
            let v = ch[k];
            let r = match format {
                SampleFormat::Float32 => w.write_sample(v as f32),
                _ => w.write_sample((v * scale).round().clamp(-scale, scale - 1.0) as i32),
            };
            r.map_err(|e| map_err(path, e))?;
        }
    }
    w.finalize().map_err(|e| map_err(path, e))
}
