//! Generated stand-in corpus: harmonic tones whose pitch, contour, spectral
//! tilt and amplitude modulation depend on the emotion, with templated
//! transcripts. Lets every stage run without licensed data.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::labels::Emotion;
use super::manifest::{write_manifest, CorpusName, Gender, Manifest, UtteranceRecord};
use crate::coremath::Rng;
use crate::dsp::{AudioClip, HOP, N_FFT, N_FRAMES, SAMPLE_RATE};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub speakers: usize,
    pub per_class_per_speaker: usize,
    pub seed: u64,
    /// Prefixed to speaker and utterance ids, so two generated sets can be
    /// merged without sharing speakers.
    pub id_prefix: String,
    pub corpus: CorpusName,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            speakers: 10,
            per_class_per_speaker: 3,
            seed: 0,
            id_prefix: String::new(),
            corpus: CorpusName::Synthetic,
        }
    }
}

struct Voice {
    pitch_factor: f64,
    /// Relative f0 change from start to end of the clip.
    glide: f64,
    harmonics: usize,
    tilt: f64,
    am_rate: f64,
    am_depth: f64,
    amplitude: f64,
}

fn voice(e: Emotion) -> Voice {
    match e {
        Emotion::Angry => Voice {
            pitch_factor: 1.35,
            glide: 0.0,
            harmonics: 24,
            tilt: 0.4,
            am_rate: 9.0,
            am_depth: 0.6,
            amplitude: 0.6,
        },
        Emotion::Happy => Voice {
            pitch_factor: 1.6,
            glide: 0.3,
            harmonics: 10,
            tilt: 1.0,
            am_rate: 5.0,
            am_depth: 0.3,
            amplitude: 0.45,
        },
        Emotion::Neutral => Voice {
            pitch_factor: 1.0,
            glide: 0.0,
            harmonics: 6,
            tilt: 1.5,
            am_rate: 0.0,
            am_depth: 0.0,
            amplitude: 0.25,
        },
        Emotion::Sad => Voice {
            pitch_factor: 0.8,
            glide: -0.25,
            harmonics: 3,
            tilt: 2.0,
            am_rate: 2.0,
            am_depth: 0.2,
            amplitude: 0.15,
        },
    }
}

const TEMPLATES: [[&str; 3]; 4] = [
    [
        "I am furious about this",
        "This is outrageous and I hate it",
        "Stop yelling at me, I have had enough",
    ],
    [
        "This is wonderful news",
        "What a great day, I love it",
        "I am so glad you came, this is fantastic",
    ],
    [
        "The meeting is at three o'clock",
        "Please put the file on the desk",
        "I will take the bus today",
    ],
    [
        "I miss her so much",
        "Everything feels hopeless and lonely",
        "I cried all night after the funeral",
    ],
];

pub fn speaker_id(index: usize) -> String {
    format!("S{:02}", index + 1)
}

/// Alternating male/female, starting with male.
pub fn speaker_gender(index: usize) -> Gender {
    if index % 2 == 0 {
        Gender::Male
    } else {
        Gender::Female
    }
}

fn additive(n: usize, f0: impl Fn(f64) -> f64, harmonics: usize, tilt: f64, rng: &mut Rng) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.uniform(0.0, 2.0 * PI)).collect();
    let mut phase = 0.0;
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let f = f0(i as f64 / n as f64);
        phase += 2.0 * PI * f / sr;
        let mut v = 0.0;
        for h in 1..=harmonics {
            if h as f64 * f >= 7600.0 {
                break;
            }
            v += (h as f64 * phase + phases[h - 1]).sin() / (h as f64).powf(tilt);
        }
        *o = v;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    out.iter_mut().for_each(|v| *v /= peak);
    out
}

/// One emotional utterance for speaker `speaker` (index), 1.0 to 1.4 s.
pub fn emotion_clip(emotion: Emotion, speaker: usize, rng: &mut Rng) -> AudioClip {
    let v = voice(emotion);
    let base = match speaker_gender(speaker) {
        Gender::Female => 200.0,
        _ => 110.0,
    } * (1.0 + 0.04 * ((speaker / 2) as f64 - 2.0) / 2.0);
    let f0 = base * v.pitch_factor * rng.uniform(0.95, 1.05);
    let secs = rng.uniform(1.0, 1.4);
    let n = (secs * SAMPLE_RATE as f64) as usize;
    let glide = v.glide;
    let mut x = additive(n, |p| f0 * (1.0 + glide * p), v.harmonics, v.tilt, rng);
    let am_phase = rng.uniform(0.0, 2.0 * PI);
    let sr = SAMPLE_RATE as f64;
    for (i, s) in x.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let am = 1.0 - v.am_depth * 0.5 * (1.0 + (2.0 * PI * v.am_rate * t + am_phase).sin());
        let fade = (t / 0.02).min((secs - t) / 0.02).clamp(0.0, 1.0);
        *s = v.amplitude * am * fade * *s + 0.002 * rng.normal();
    }
    x.iter_mut().for_each(|s| *s = s.clamp(-1.0, 1.0));
    AudioClip::new(x, SAMPLE_RATE).expect("valid synthetic clip")
}

/// Samples needed for exactly `N_FRAMES` STFT frames.
pub const FULL_CLIP_SAMPLES: usize = (N_FRAMES - 1) * HOP + N_FFT;

/// One of two spectrally disjoint stationary patterns filling all 256 mel
/// frames: 0 is a low harmonic tone (energy below ~1 kHz), 1 a cluster of
/// partials between 3 and 6 kHz.
pub fn pattern_clip(pattern: usize, rng: &mut Rng) -> AudioClip {
    let n = FULL_CLIP_SAMPLES;
    let sr = SAMPLE_RATE as f64;
    let partials: Vec<f64> = if pattern == 0 {
        let f0 = rng.uniform(140.0, 160.0);
        (1..=6).map(|h| f0 * h as f64).collect()
    } else {
        (0..6).map(|i| 3000.0 + 500.0 * i as f64 + rng.uniform(-40.0, 40.0)).collect()
    };
    let phases: Vec<f64> = partials.iter().map(|_| rng.uniform(0.0, 2.0 * PI)).collect();
    let amp = rng.uniform(0.2, 0.4) / partials.len() as f64;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let v: f64 = partials.iter().zip(&phases).map(|(f, p)| (2.0 * PI * f * t + p).sin()).sum();
            amp * v + 0.001 * rng.normal()
        })
        .collect();
    AudioClip::new(samples, SAMPLE_RATE).expect("valid pattern clip")
}

/// Records and clips of a balanced synthetic corpus, in a fixed order.
pub fn synth_corpus(cfg: &SynthConfig) -> Vec<(UtteranceRecord, AudioClip)> {
    let root = Rng::new(cfg.seed);
    let mut out = Vec::new();
    for s in 0..cfg.speakers {
        let spk = format!("{}{}", cfg.id_prefix, speaker_id(s));
        let mut rng = root.fork(s as u64);
        for e in Emotion::ALL {
            for take in 0..cfg.per_class_per_speaker {
                let id = format!("{spk}_{e}_{take:02}");
                let template = TEMPLATES[e.index()][(take + s) % 3];
                let mut r = UtteranceRecord::new(
                    id.clone(),
                    format!("wav/{id}.wav"),
                    format!("{template}. Take {take} for {spk}."),
                    spk.clone(),
                    cfg.corpus,
                );
                r.gender = speaker_gender(s);
                r.gold_label = Some(e);
                out.push((r, emotion_clip(e, s, &mut rng)));
            }
        }
    }
    out
}

/// Writes `wav/*.wav` and `manifest.jsonl` under `dir`.
pub fn write_synth_corpus(dir: &Path, cfg: &SynthConfig) -> Result<Manifest> {
    if cfg.speakers == 0 || cfg.per_class_per_speaker == 0 {
        return Err(Error::InvalidConfig("synthetic corpus needs speakers and takes".into()));
    }
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let mut records = Vec::new();
    for (r, clip) in synth_corpus(cfg) {
        clip.write_wav(&dir.join(&r.audio_path))?;
        records.push(r);
    }
    write_manifest(&dir.join("manifest.jsonl"), &records)?;
    Ok(Manifest {
        base_dir: dir.to_path_buf(),
        records,
    })
}
