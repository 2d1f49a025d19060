use super::framing::{length_samples, reflect_index, shift_samples};
use super::{AudioSignal, FeatureMatrix, FramingSpec, StreamTag};
use crate::error::{invalid_input, Result};
use serde::{Deserialize, Serialize};

/// Tunables for the NCCF + Viterbi pitch tracker.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PitchConfig {
    pub min_hz: f64,
    pub max_hz: f64,
    /// Cost per unit of |Δ log lag| between consecutive frames.
    pub transition_weight: f64,
    /// Linear penalty on longer lags, scaled to [0, lag_bias] over the
    /// search range. Breaks the tie between a period and its multiples.
    pub lag_bias: f64,
    /// Width of the centred window for the POV-weighted mean.
    pub mean_window_ms: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            min_hz: 60.0,
            max_hz: 400.0,
            transition_weight: 0.5,
            lag_bias: 0.1,
            mean_window_ms: 1500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchFrame {
    /// Log pitch after POV-weighted mean subtraction.
    pub log_pitch: f64,
    /// Probability of voicing in [0, 1].
    pub pov: f64,
}

#[derive(Debug, Clone)]
pub struct PitchTrack {
    pub frames: Vec<PitchFrame>,
    /// Log of the tracked frequency before mean subtraction.
    pub raw_log_pitch: Vec<f64>,
    pub frame_shift_ms: f64,
}

impl PitchTrack {
    /// The 1-d stream fed to the model: mean-subtracted log pitch.
    pub fn features(&self) -> Result<FeatureMatrix> {
        FeatureMatrix::new(
            self.frames.len(),
            1,
            self.frames.iter().map(|f| f.log_pitch).collect(),
            self.frame_shift_ms,
            StreamTag::Pitch,
        )
    }
}

/// NCCF of one analysis window against every lag in `min_lag..=max_lag`.
/// `x` must hold at least `start + window + max_lag` samples.
pub(crate) fn nccf_frame(
    x: &[f64],
    prefix_sq: &[f64],
    start: usize,
    window: usize,
    min_lag: usize,
    max_lag: usize,
) -> Vec<f64> {
    let energy = |from: usize| prefix_sq[from + window] - prefix_sq[from];
    let e0 = energy(start);
    let base = &x[start..start + window];
    (min_lag..=max_lag)
        .map(|lag| {
            let et = energy(start + lag);
            let denom = (e0 * et).sqrt();
            if denom <= 1e-20 {
                return 0.0;
            }
            let shifted = &x[start + lag..start + lag + window];
            let num: f64 = base.iter().zip(shifted).map(|(a, b)| a * b).sum();
            (num / denom).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Tracks pitch over `spec`-sized frames: per-frame NCCF over the lag range,
/// Viterbi smoothing with a |Δ log lag| transition cost, then subtraction of
/// the POV-weighted mean log pitch over a sliding centred window.
pub fn extract_pitch(signal: &AudioSignal, spec: &FramingSpec) -> Result<PitchTrack> {
    extract_pitch_with(signal, spec, &PitchConfig::default())
}

pub fn extract_pitch_with(signal: &AudioSignal, spec: &FramingSpec, cfg: &PitchConfig) -> Result<PitchTrack> {
    let sr = signal.sample_rate;
    let shift = shift_samples(sr, spec.frame_shift_ms)?;
    let window = length_samples(sr, spec.frame_length_ms);
    let n = signal.samples.len();
    if n < window {
        return Err(invalid_input(format!(
            "signal of {n} samples is shorter than one {window}-sample pitch frame"
        )));
    }
    if !(cfg.min_hz > 0.0 && cfg.max_hz > cfg.min_hz) {
        return Err(invalid_input("pitch search range must satisfy 0 < min_hz < max_hz"));
    }
    let min_lag = ((sr as f64 / cfg.max_hz).floor() as usize).max(1);
    let max_lag = (sr as f64 / cfg.min_hz).ceil() as usize;
    let frames = n / shift;
    let half = window / 2;

    // reflect-padded copy so every window and its lagged partner is in range
    let total = half + n + window + max_lag;
    let padded: Vec<f64> = (0..total)
        .map(|i| signal.samples[reflect_index(i as isize - half as isize, n)])
        .collect();
    let mut prefix_sq = Vec::with_capacity(total + 1);
    prefix_sq.push(0.0);
    for v in &padded {
        prefix_sq.push(prefix_sq.last().unwrap() + v * v);
    }

    let n_lags = max_lag - min_lag + 1;
    let nccf: Vec<Vec<f64>> = (0..frames)
        .map(|t| nccf_frame(&padded, &prefix_sq, t * shift, window, min_lag, max_lag))
        .collect();

    let span = (max_lag - min_lag).max(1) as f64;
    let local = |t: usize, j: usize| 1.0 - nccf[t][j] + cfg.lag_bias * j as f64 / span;
    let log_lag: Vec<f64> = (min_lag..=max_lag).map(|l| (l as f64).ln()).collect();

    // Viterbi over lag candidates
    let mut cost: Vec<f64> = (0..n_lags).map(|j| local(0, j)).collect();
    let mut back = vec![vec![0usize; n_lags]; frames];
    let mut next = vec![0.0; n_lags];
    for t in 1..frames {
        for j in 0..n_lags {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (i, c) in cost.iter().enumerate() {
                let v = c + cfg.transition_weight * (log_lag[j] - log_lag[i]).abs();
                if v < best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + local(t, j);
            back[t][j] = arg;
        }
        std::mem::swap(&mut cost, &mut next);
    }
    let mut path = vec![0usize; frames];
    path[frames - 1] = (0..n_lags)
        .min_by(|&a, &b| cost[a].total_cmp(&cost[b]))
        .unwrap_or(0);
    for t in (1..frames).rev() {
        path[t - 1] = back[t][path[t]];
    }

    let mut raw = Vec::with_capacity(frames);
    let mut pov = Vec::with_capacity(frames);
    for (t, &j) in path.iter().enumerate() {
        let row = &nccf[t];
        let mut lag = (min_lag + j) as f64;
        if j > 0 && j + 1 < n_lags {
            let (a, b, c) = (row[j - 1], row[j], row[j + 1]);
            let curvature = a - 2.0 * b + c;
            if curvature < 0.0 {
                lag += (0.5 * (a - c) / curvature).clamp(-0.5, 0.5);
            }
        }
        raw.push((sr as f64 / lag).ln());
        pov.push(row[j].clamp(0.0, 1.0));
    }

    let half_win = (cfg.mean_window_ms / 2.0 / spec.frame_shift_ms).round() as usize;
    let frames_out = (0..frames)
        .map(|t| {
            let lo = t.saturating_sub(half_win);
            let hi = (t + half_win).min(frames - 1);
            let (mut num, mut den) = (0.0, 0.0);
            for k in lo..=hi {
                num += pov[k] * raw[k];
                den += pov[k];
            }
            let mean = if den > 1e-12 {
                num / den
            } else {
                raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            };
            PitchFrame { log_pitch: raw[t] - mean, pov: pov[t] }
        })
        .collect();

    Ok(PitchTrack { frames: frames_out, raw_log_pitch: raw, frame_shift_ms: spec.frame_shift_ms })
}
