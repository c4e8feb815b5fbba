//! Audio front end: 16 kHz mono clips, the normalized log-mel input shared by
//! both networks, and the scalar energy/pitch prompt features.

mod audio;
mod mel;
mod prosody;

pub use audio::{AudioClip, SAMPLE_RATE};
pub use mel::{
    frame_count, hann_periodic, hz_to_mel, mel_filterbank, mel_power, mel_spectrogram, mel_to_hz, normalize_mel_power,
    power_spectrogram, MelSpec, F_MAX, F_MIN, HOP, LOG_FLOOR, N_BINS, N_FFT, N_FRAMES, N_MELS,
};
pub use prosody::{
    average_energy, average_pitch, frame_pitch, ANALYSIS_HOP, ENERGY_FRAME, PITCH_FRAME, PITCH_MAX_HZ, PITCH_MIN_HZ,
    VOICING_MIN_RMS, VOICING_THRESHOLD,
};

use serde::{Deserialize, Serialize};

use crate::corpus::Gender;

/// Per-utterance prompt features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceFeatures {
    /// Mean frame RMS, linear amplitude scale.
    pub avg_energy: f64,
    /// Mean voiced F0 in Hz; 0 when fully unvoiced.
    pub avg_pitch_hz: f64,
    pub gender: Gender,
}

impl UtteranceFeatures {
    pub fn extract(clip: &AudioClip, gender: Gender) -> Self {
        UtteranceFeatures {
            avg_energy: average_energy(clip),
            avg_pitch_hz: average_pitch(clip),
            gender,
        }
    }
}

/// One line of a features file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRecord {
    pub utterance_id: String,
    pub avg_energy: f64,
    pub avg_pitch_hz: f64,
}

impl FeatureRecord {
    pub fn extract(utterance_id: &str, clip: &AudioClip) -> Self {
        FeatureRecord {
            utterance_id: utterance_id.to_string(),
            avg_energy: average_energy(clip),
            avg_pitch_hz: average_pitch(clip),
        }
    }

    pub fn with_gender(&self, gender: Gender) -> UtteranceFeatures {
        UtteranceFeatures {
            avg_energy: self.avg_energy,
            avg_pitch_hz: self.avg_pitch_hz,
            gender,
        }
    }
}
