//! Independent reference computations. Nothing here calls the code under test.

use std::f64::consts::PI;

pub const SR: f64 = 16_000.0;

pub fn sine(freq: f64, secs: f64, amp: f64) -> Vec<f64> {
    let n = (secs * SR).round() as usize;
    (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / SR).sin()).collect()
}

pub fn sawtooth(freq: f64, secs: f64, amp: f64) -> Vec<f64> {
    let n = (secs * SR).round() as usize;
    (0..n)
        .map(|i| {
            let phase = (freq * i as f64 / SR).fract();
            amp * (2.0 * phase - 1.0)
        })
        .collect()
}

/// `|DFT|^2` of one windowed frame, bins `0..=n/2`, by the O(n^2) sum.
pub fn naive_power(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let cos: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, x) in frame.iter().enumerate() {
                let idx = (k * t) % n;
                re += x * cos[idx];
                im -= x * sin[idx];
            }
            re * re + im * im
        })
        .collect()
}

/// 80 HTK triangles over 0..8 kHz with unit peaks, sampled at bin centres.
pub fn reference_filters(n_fft: usize) -> Vec<Vec<f64>> {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(8000.0);
    let pts: Vec<f64> = (0..82).map(|i| inv(top * i as f64 / 81.0)).collect();
    (0..80)
        .map(|b| {
            (0..=n_fft / 2)
                .map(|k| {
                    let f = k as f64 * SR / n_fft as f64;
                    let up = (f - pts[b]) / (pts[b + 1] - pts[b]);
                    let down = (pts[b + 2] - f) / (pts[b + 2] - pts[b + 1]);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Unpadded mel power `[band][frame]` of a signal, 1024/256 framing, no centring.
pub fn reference_mel_power(x: &[f64]) -> Vec<Vec<f64>> {
    let n = 1024;
    let window: Vec<f64> = (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())).collect();
    let filters = reference_filters(n);
    let frames = (x.len() - n) / 256 + 1;
    let spectra: Vec<Vec<f64>> = (0..frames)
        .map(|f| {
            let frame: Vec<f64> = (0..n).map(|i| x[f * 256 + i] * window[i]).collect();
            naive_power(&frame)
        })
        .collect();
    filters
        .iter()
        .map(|filt| spectra.iter().map(|p| filt.iter().zip(p).map(|(a, b)| a * b).sum()).collect())
        .collect()
}

/// Row-major 80 x 256 log-mel scaled to [-1, 1]; missing frames take the
/// smallest log value of the real ones.
pub fn reference_mel(x: &[f64]) -> Vec<f64> {
    let power = reference_mel_power(x);
    let logs: Vec<Vec<f64>> = power
        .iter()
        .map(|band| band.iter().take(256).map(|p| (p + 1e-6).ln()).collect())
        .collect();
    let lo = logs.iter().flatten().cloned().fold(f64::MAX, f64::min);
    let mut out = Vec::with_capacity(80 * 256);
    for band in &logs {
        for t in 0..256 {
            out.push(band.get(t).copied().unwrap_or(lo));
        }
    }
    let hi = out.iter().cloned().fold(f64::MIN, f64::max);
    out.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect()
}

/// Index of the smallest squared distance by a plain scan; first wins ties.
pub fn brute_force_nearest(z: &[f64], rows: &[Vec<f64>]) -> usize {
    let dists: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    dists.iter().position(|&d| d == min).unwrap()
}

/// Mean of per-class recalls, from a row = gold count matrix.
pub fn brute_force_uar(counts: &[Vec<u64>]) -> f64 {
    let mut total = 0.0;
    for (i, row) in counts.iter().enumerate() {
        let support: u64 = row.iter().sum();
        total += row[i] as f64 / support as f64;
    }
    total / counts.len() as f64
}

/// Mean and n-1 standard deviation, two-pass.
pub fn hand_mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mut sum = 0.0;
    for x in v {
        sum += x;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for x in v {
        ss += (x - mean) * (x - mean);
    }
    (mean, if v.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 })
}

/// Epochs at which a reduce-on-plateau schedule decays on a constant trace,
/// simulated step by step: a fresh stage starts after every decay.
pub fn flat_trace_decay_epochs(patience: usize, lr_init: f64, decay: f64, floor: f64) -> (Vec<usize>, f64) {
    let mut lr = lr_init;
    let mut epochs = Vec::new();
    let mut stage_start = 1;
    loop {
        // The stage's first epoch sets its best; `patience` flat epochs follow.
        let e = stage_start + patience;
        epochs.push(e);
        lr *= decay;
        if lr < floor {
            return (epochs, lr);
        }
        stage_start = e + 1;
    }
}
