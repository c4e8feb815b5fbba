//! Log-mel spectrogram: STFT (1024/256, periodic Hann) -> power -> 80 HTK mel
//! bands over 0-8 kHz -> `ln(x + 1e-6)` -> first 256 frames (short clips
//! padded with their own minimum) -> min-max scaled to `[-1, 1]`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::audio::{AudioClip, SAMPLE_RATE};
use crate::coremath::Tensor;
use crate::error::{Error, Result};

pub const N_FFT: usize = 1024;
pub const HOP: usize = 256;
pub const N_MELS: usize = 80;
pub const N_FRAMES: usize = 256;
pub const F_MIN: f64 = 0.0;
pub const F_MAX: f64 = 8000.0;
pub const LOG_FLOOR: f64 = 1e-6;
pub const N_BINS: usize = N_FFT / 2 + 1;

/// An `80 x 256` matrix of values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpec(Tensor);

impl MelSpec {
    pub fn from_tensor(t: Tensor) -> Result<Self> {
        t.expect_shape("mel spectrogram", &[N_MELS, N_FRAMES])?;
        if let Some(v) = t.data().iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::shape(format!("mel value {v} outside [-1, 1]")));
        }
        Ok(MelSpec(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Value at `(band, frame)`.
    pub fn at(&self, band: usize, frame: usize) -> f64 {
        self.0.data()[band * N_FRAMES + frame]
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Periodic Hann window of length `n`.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Triangular HTK-style filters (unit peak), `[n_mels][N_BINS]`, evaluated at
/// the FFT bin centre frequencies.
pub fn mel_filterbank(n_mels: usize, f_min: f64, f_max: f64) -> Vec<Vec<f64>> {
    let (m_lo, m_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = SAMPLE_RATE as f64 / N_FFT as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..N_BINS)
                .map(|b| {
                    let f = b as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Number of full STFT frames in a clip (no centring).
pub fn frame_count(samples: usize) -> usize {
    if samples < N_FFT {
        0
    } else {
        1 + (samples - N_FFT) / HOP
    }
}

/// Power spectrum `|X|^2` for every full frame, `[frames][N_BINS]`.
pub fn power_spectrogram(clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
    let x = clip.samples();
    let frames = frame_count(x.len());
    if frames == 0 {
        return Err(Error::InsufficientAudio {
            samples: x.len(),
            required: N_FFT,
        });
    }
    let window = hann_periodic(N_FFT);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(N_FFT);
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    let mut out = Vec::with_capacity(frames);
    for f in 0..frames {
        let start = f * HOP;
        for (i, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(x[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        out.push(buf[..N_BINS].iter().map(|c| c.norm_sqr()).collect());
    }
    Ok(out)
}

/// Mel-band power `[N_MELS, frames]` over the clip's own frames (unpadded).
pub fn mel_power(clip: &AudioClip) -> Result<Tensor> {
    let spec = power_spectrogram(clip)?;
    let bank = mel_filterbank(N_MELS, F_MIN, F_MAX);
    let frames = spec.len();
    let mut out = vec![0.0; N_MELS * frames];
    for (m, filt) in bank.iter().enumerate() {
        for (t, p) in spec.iter().enumerate() {
            out[m * frames + t] = filt.iter().zip(p).map(|(w, v)| w * v).sum();
        }
    }
    Tensor::new(&[N_MELS, frames], out)
}

/// Log-compresses, truncates to `N_FRAMES` or pads with the minimum log
/// value of the kept frames, and scales to `[-1, 1]` over the whole matrix.
/// Padding therefore lands on -1 without widening the range, so a global
/// gain change cancels. A constant matrix maps to all zeros.
pub fn normalize_mel_power(power: &Tensor) -> Result<MelSpec> {
    let frames = match *power.shape() {
        [N_MELS, f] if f > 0 => f,
        _ => return Err(Error::shape(format!("mel power must be [{N_MELS}, T>0], got {:?}", power.shape()))),
    };
    let kept = frames.min(N_FRAMES);
    let mut lo = f64::INFINITY;
    for m in 0..N_MELS {
        for t in 0..kept {
            lo = lo.min((power.data()[m * frames + t] + LOG_FLOOR).ln());
        }
    }
    let mut logmel = vec![lo; N_MELS * N_FRAMES];
    for m in 0..N_MELS {
        for t in 0..kept {
            logmel[m * N_FRAMES + t] = (power.data()[m * frames + t] + LOG_FLOOR).ln();
        }
    }
    let hi = logmel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for v in logmel.iter_mut() {
        *v = if range > 0.0 {
            (2.0 * (*v - lo) / range - 1.0).clamp(-1.0, 1.0)
        } else {
            0.0
        };
    }
    MelSpec::from_tensor(Tensor::new(&[N_MELS, N_FRAMES], logmel)?)
}

pub fn mel_spectrogram(clip: &AudioClip) -> Result<MelSpec> {
    normalize_mel_power(&mel_power(clip)?)
}
