use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono audio at the fixed 16 kHz rate, samples nominally in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::InvalidConfig(format!(
                "sample rate {sample_rate} Hz; only {SAMPLE_RATE} Hz audio is accepted (no resampling)"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(AudioClip { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    pub fn scaled(&self, gain: f64) -> Self {
        AudioClip {
            samples: self.samples.iter().map(|s| s * gain).collect(),
        }
    }

    /// Reads 16-bit PCM mono 16 kHz WAV; anything else is rejected.
    pub fn read_wav(path: &Path) -> Result<Self> {
        let unsupported = |reason: String| Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = hound::WavReader::open(path).map_err(|e| match e {
            hound::Error::IoError(io) => Error::io(path, io),
            other => unsupported(other.to_string()),
        })?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(unsupported(format!("{} channels, expected mono", spec.channels)));
        }
        if spec.sample_rate != SAMPLE_RATE {
            return Err(unsupported(format!(
                "sample rate {} Hz, expected {SAMPLE_RATE} Hz",
                spec.sample_rate
            )));
        }
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(unsupported(format!(
                "{:?} {}-bit samples, expected 16-bit PCM",
                spec.sample_format, spec.bits_per_sample
            )));
        }
        let samples = reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| unsupported(e.to_string()))?;
        Ok(AudioClip { samples })
    }

    /// Writes 16-bit PCM mono; samples are clipped to `[-1, 1)`.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: SAMPLE_RATE,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let wrap = |e: hound::Error| match e {
            hound::Error::IoError(io) => Error::io(path, io),
            other => Error::UnsupportedAudio {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        };
        let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
        for &s in &self.samples {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(v).map_err(wrap)?;
        }
        writer.finalize().map_err(wrap)
    }
}
