use super::{FeatureMatrix, Frames, StreamTag};
use crate::error::{invalid_input, Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// Energy floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

const MIN_MEL_HZ: f64 = 20.0;
const MAX_FFT_SIZE: usize = 1 << 20;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Smallest power of two that holds `frame_len` samples.
pub fn fft_size_for(frame_len: usize) -> Result<usize> {
    if frame_len == 0 {
        return Err(invalid_input("frame length must be positive"));
    }
    let n = frame_len.next_power_of_two();
    if n > MAX_FFT_SIZE {
        return Err(Error::InvalidSpec(format!(
            "frame of {frame_len} samples exceeds the largest supported FFT ({MAX_FFT_SIZE})"
        )));
    }
    Ok(n)
}

/// Triangular Mel filters over the one-sided power spectrum.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
    /// Filter centre frequencies in Hz.
    pub centers_hz: Vec<f64>,
    /// `n_mels` rows of `fft_size / 2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
}

/// Filters with centres equally spaced on the Mel scale between 20 Hz and
/// Nyquist; each triangle rises from the previous centre and falls to the
/// next, evaluated at the exact bin frequencies.
pub fn mel_filterbank(n_mels: usize, fft_size: usize, sample_rate: u32) -> MelFilterbank {
    let nyquist = sample_rate as f64 / 2.0;
    let lo = hz_to_mel(MIN_MEL_HZ);
    let hi = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let n_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let weights = (0..n_mels)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f > left && f <= center {
                        (f - left) / (center - left)
                    } else if f > center && f < right {
                        (right - f) / (right - center)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    MelFilterbank {
        n_mels,
        fft_size,
        sample_rate,
        centers_hz: edges[1..=n_mels].to_vec(),
        weights,
    }
}

pub(crate) fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Hamming window, zero-padded power spectrum, Mel filters, floored log.
pub fn log_mel_fbank(frames: &Frames, sample_rate: u32, n_mels: usize) -> Result<FeatureMatrix> {
    if frames.is_empty() {
        return Err(invalid_input("no frames"));
    }
    if n_mels == 0 {
        return Err(invalid_input("n_mels must be positive"));
    }
    let fft_size = fft_size_for(frames.frame_len)?;
    let bank = mel_filterbank(n_mels, fft_size, sample_rate);
    let window = hamming(frames.frame_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let n_bins = fft_size / 2 + 1;

    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut power = vec![0.0; n_bins];
    let mut out = Vec::with_capacity(frames.len() * n_mels);
    for frame in frames.iter() {
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < frame.len() { frame[i] * window[i] } else { 0.0 };
            *slot = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for w in &bank.weights {
            let e: f64 = w.iter().zip(&power).map(|(a, b)| a * b).sum();
            out.push(e.max(LOG_FLOOR).ln());
        }
    }
    let tag = if frames.frame_len as f64 > 0.1 * sample_rate as f64 {
        StreamTag::Fbk250
    } else {
        StreamTag::Fbk25
    };
    let shift_ms = frames.shift as f64 * 1000.0 / sample_rate as f64;
    let dim_tag = if n_mels == 40 { tag } else { StreamTag::Combined };
    FeatureMatrix::new(frames.len(), n_mels, out, shift_ms, dim_tag)
}
