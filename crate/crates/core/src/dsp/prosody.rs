//! Utterance-level energy and pitch used as prompt context.

use super::audio::{AudioClip, SAMPLE_RATE};

/// 25 ms analysis window for energy.
pub const ENERGY_FRAME: usize = 400;
/// 10 ms hop for both energy and pitch.
pub const ANALYSIS_HOP: usize = 160;
/// 40 ms pitch window: twice the longest searched period.
pub const PITCH_FRAME: usize = 640;
pub const PITCH_MIN_HZ: f64 = 50.0;
pub const PITCH_MAX_HZ: f64 = 500.0;
pub const VOICING_THRESHOLD: f64 = 0.3;
pub const VOICING_MIN_RMS: f64 = 0.01;

fn frames(len: usize, frame: usize, hop: usize) -> impl Iterator<Item = (usize, usize)> {
    let count = if len < frame { 1 } else { 1 + (len - frame) / hop };
    (0..count).map(move |i| (i * hop, (i * hop + frame).min(len)))
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Mean of per-frame RMS amplitude over 25 ms / 10 ms frames.
pub fn average_energy(clip: &AudioClip) -> f64 {
    let x = clip.samples();
    if x.is_empty() {
        return 0.0;
    }
    let (sum, n) = frames(x.len(), ENERGY_FRAME, ANALYSIS_HOP)
        .fold((0.0, 0usize), |(s, n), (a, b)| (s + rms(&x[a..b]), n + 1));
    sum / n as f64
}

/// Normalized autocorrelation at each lag in `lo..=hi`.
fn normalized_autocorrelation(x: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    (lo..=hi)
        .map(|lag| {
            if lag >= x.len() {
                return 0.0;
            }
            let (a, b) = (&x[..x.len() - lag], &x[lag..]);
            let num: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            let den = (a.iter().map(|v| v * v).sum::<f64>() * b.iter().map(|v| v * v).sum::<f64>()).sqrt();
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect()
}

/// F0 of one frame, or `None` when unvoiced.
///
/// Picks the shortest-lag local maximum reaching 90% of the best correlation
/// in the search range (guards against period doubling), refines it with a
/// parabola through its neighbours, and gates on the correlation threshold.
pub fn frame_pitch(frame: &[f64]) -> Option<f64> {
    if rms(frame) < VOICING_MIN_RMS {
        return None;
    }
    let sr = SAMPLE_RATE as f64;
    let min_lag = (sr / PITCH_MAX_HZ).floor() as usize;
    let max_lag = (sr / PITCH_MIN_HZ).ceil() as usize;
    // One extra lag either side so boundary lags can be tested as peaks.
    let r = normalized_autocorrelation(frame, min_lag - 1, max_lag + 1);
    let at = |lag: usize| r[lag + 1 - min_lag];
    let best = (min_lag..=max_lag).map(at).fold(f64::NEG_INFINITY, f64::max);
    if best < VOICING_THRESHOLD {
        return None;
    }
    let lag = (min_lag..=max_lag).find(|&l| {
        let v = at(l);
        v >= 0.9 * best && v >= at(l - 1) && v >= at(l + 1)
    })?;
    let (y0, y1, y2) = (at(lag - 1), at(lag), at(lag + 1));
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom.abs() > 1e-12 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let f0 = sr / (lag as f64 + shift);
    (PITCH_MIN_HZ..=PITCH_MAX_HZ).contains(&f0).then_some(f0)
}

/// Mean F0 over voiced frames; `0.0` when no frame is voiced.
pub fn average_pitch(clip: &AudioClip) -> f64 {
    let x = clip.samples();
    let voiced: Vec<f64> = frames(x.len(), PITCH_FRAME, ANALYSIS_HOP)
        .filter(|(a, b)| b - a == PITCH_FRAME)
        .filter_map(|(a, b)| frame_pitch(&x[a..b]))
        .collect();
    if voiced.is_empty() {
        0.0
    } else {
        voiced.iter().sum::<f64>() / voiced.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn synth(n: usize, f: impl Fn(f64) -> f64) -> AudioClip {
        AudioClip::new((0..n).map(|i| f(i as f64 / SAMPLE_RATE as f64)).collect(), SAMPLE_RATE).unwrap()
    }

    #[test]
    fn silence_has_no_energy_or_pitch() {
        let clip = synth(16_000, |_| 0.0);
        assert_eq!(average_energy(&clip), 0.0);
        assert_eq!(average_pitch(&clip), 0.0);
    }

    #[test]
    fn full_scale_square_has_unit_energy() {
        let clip = synth(16_000, |t| if (t * 100.0).fract() < 0.5 { 1.0 } else { -1.0 });
        assert!((average_energy(&clip) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_scale_sine_energy() {
        let clip = synth(32_000, |t| 0.5 * (2.0 * PI * 440.0 * t).sin());
        let want = 0.5 / 2f64.sqrt();
        assert!((average_energy(&clip) - want).abs() < 1e-3);
    }

    #[test]
    fn sawtooth_pitch() {
        let clip = synth(32_000, |t| 0.6 * (2.0 * (t * 200.0).fract() - 1.0));
        let f0 = average_pitch(&clip);
        assert!((f0 - 200.0).abs() <= 3.0, "{f0}");
    }

    #[test]
    fn low_and_high_tones_are_ordered() {
        let low = average_pitch(&synth(32_000, |t| 0.5 * (2.0 * PI * 120.0 * t).sin()));
        let high = average_pitch(&synth(32_000, |t| 0.5 * (2.0 * PI * 300.0 * t).sin()));
        assert!((low - 120.0).abs() <= 3.0, "{low}");
        assert!((high - 300.0).abs() <= 3.0, "{high}");
        assert!(low < high);
    }

    #[test]
    fn pitch_ignores_gain() {
        let base = synth(24_000, |t| (2.0 * PI * 180.0 * t).sin());
        let reference = average_pitch(&base);
        for gain in [0.1, 0.35, 1.0] {
            assert!((average_pitch(&base.scaled(gain)) - reference).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_scales_linearly_with_gain() {
        let base = synth(16_000, |t| 0.8 * (2.0 * PI * 250.0 * t).sin());
        let e = average_energy(&base);
        assert!((average_energy(&base.scaled(0.5)) - 0.5 * e).abs() < 1e-12);
    }
}
