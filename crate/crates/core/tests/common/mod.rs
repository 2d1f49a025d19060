//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use emorec::dsp::{AudioSignal, Frames};
use emorec::eval::ManifestRecord;
use emorec::nn::{ParamStore, Tensor};
use rand::Rng;
use std::f64::consts::PI;

pub fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn randomise(store: &mut ParamStore, rng: &mut impl Rng, scale: f64) {
    for id in store.ids().collect::<Vec<_>>() {
        store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-scale..scale));
    }
}

pub fn tone(hz: f64, secs: f64, sample_rate: u32) -> AudioSignal {
    let n = (secs * sample_rate as f64).round() as usize;
    let samples = (0..n).map(|i| 0.5 * (2.0 * PI * hz * i as f64 / sample_rate as f64).sin()).collect();
    AudioSignal::new(samples, sample_rate).unwrap()
}

fn mel(hz: f64) -> f64 {
    1127.0 * (1.0 + hz / 700.0).ln()
}

fn mel_inv(m: f64) -> f64 {
    700.0 * ((m / 1127.0).exp() - 1.0)
}

/// Log Mel energies by direct summation: Hamming window, zero padding to
/// the next power of two, `|X_k|²` from an O(N²) DFT, triangles between
/// Mel-spaced edges from 20 Hz to Nyquist, floor 1e-10.
pub fn dft_log_mel(frame: &[f64], sample_rate: u32, n_mels: usize) -> Vec<f64> {
    let n = frame.len();
    let nfft = n.next_power_of_two();
    let x: Vec<f64> = (0..nfft)
        .map(|i| if i < n { frame[i] * (0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()) } else { 0.0 })
        .collect();
    let bins = nfft / 2 + 1;
    let power: Vec<f64> = (0..bins)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let a = -2.0 * PI * ((k * i) % nfft) as f64 / nfft as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect();
    let (lo, hi) = (mel(20.0), mel(sample_rate as f64 / 2.0));
    let edge = |i: usize| mel_inv(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64);
    (0..n_mels)
        .map(|m| {
            let (l, c, r) = (edge(m), edge(m + 1), edge(m + 2));
            let e: f64 = (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / nfft as f64;
                    let w = if f > l && f <= c {
                        (f - l) / (c - l)
                    } else if f > c && f < r {
                        (r - f) / (r - c)
                    } else {
                        0.0
                    };
                    w * power[k]
                })
                .sum();
            e.max(1e-10).ln()
        })
        .collect()
}

/// Frame `t` built by hand: centred on `t * shift` with mirror padding.
pub fn frame_by_hand(samples: &[f64], t: usize, shift: usize, len: usize) -> Vec<f64> {
    let n = samples.len() as isize;
    (0..len as isize)
        .map(|k| {
            let mut i = (t * shift) as isize - (len / 2) as isize + k;
            while i < 0 || i >= n {
                if i < 0 {
                    i = -i;
                }
                if i >= n {
                    i = 2 * (n - 1) - i;
                }
            }
            samples[i as usize]
        })
        .collect()
}

pub fn frames_equal(frames: &Frames, samples: &[f64], shift: usize) -> bool {
    (0..frames.len()).all(|t| frames.frame(t) == frame_by_hand(samples, t, shift, frames.frame_len).as_slice())
}

/// Period search by brute force: the lag in `[min_lag, max_lag]` with the
/// largest normalised cross-correlation over a window starting at `start`.
pub fn nccf_peak_hz(x: &[f64], start: usize, window: usize, sample_rate: u32, min_hz: f64, max_hz: f64) -> f64 {
    let min_lag = (sample_rate as f64 / max_hz).floor() as usize;
    let max_lag = (sample_rate as f64 / min_hz).ceil() as usize;
    let dot = |a: usize, b: usize| (0..window).map(|i| x[a + i] * x[b + i]).sum::<f64>();
    let e0 = dot(start, start);
    let best = (min_lag..=max_lag)
        .map(|lag| (lag, dot(start, start + lag) / (e0 * dot(start + lag, start + lag)).sqrt()))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 + 1e-9 { c } else { b });
    sample_rate as f64 / best.0 as f64
}

/// A manifest with `sessions × 2` speakers (`F`, `M`), `per_speaker`
/// utterances each, and labels cycling through the four classes.
pub fn speaker_manifest(sessions: u32, per_speaker: usize) -> Vec<ManifestRecord> {
    let labels = ["hap", "ang", "sad", "neu"];
    let mut out = Vec::new();
    for s in 1..=sessions {
        for (gi, g) in ["F", "M"].iter().enumerate() {
            for u in 0..per_speaker {
                out.push(ManifestRecord {
                    utt_id: format!("Ses{s:02}_{g}_{u:03}"),
                    dialogue_id: format!("Ses{s:02}_d{}", u / 4),
                    session: Some(s),
                    speaker: Some(g.to_string()),
                    position: 2 * (u % 4) + gi,
                    audio_path: format!("Ses{s:02}_{g}_{u:03}.wav"),
                    ref_transcript: String::new(),
                    ref_alignments: Vec::new(),
                    asr_transcript: String::new(),
                    raw_label: labels[u % 4].to_string(),
                });
            }
        }
    }
    out
}

/// WA and UA by explicit counting, no confusion matrix.
pub fn brute_force_wa_ua(preds: &[usize], labels: &[usize], k: usize) -> (f64, f64) {
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    let wa = hits as f64 / labels.len() as f64;
    let mut recalls = Vec::new();
    for c in 0..k {
        let support = labels.iter().filter(|&&y| y == c).count();
        if support > 0 {
            let correct = preds.iter().zip(labels).filter(|(p, y)| **y == c && **p == c).count();
            recalls.push(correct as f64 / support as f64);
        }
    }
    (wa, recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Cross-entropy of `s · cos` logits computed from scratch.
pub fn plain_softmax_ce(x: &[f64], w: &Tensor, label: usize, s: f64) -> f64 {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let logits: Vec<f64> = (0..w.rows())
        .map(|j| {
            let r = w.row(j);
            let nw = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            s * x.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / (nx * nw)
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Raw label counts of the full ten-label corpus inventory.
pub const CORPUS_LABEL_COUNTS: [(&str, usize); 11] = [
    ("neu", 1708),
    ("fru", 1849),
    ("ang", 1103),
    ("sad", 1084),
    ("hap", 595),
    ("exc", 1041),
    ("sur", 107),
    ("fea", 40),
    ("dis", 2),
    ("oth", 3),
    ("xxx", 2507),
];
