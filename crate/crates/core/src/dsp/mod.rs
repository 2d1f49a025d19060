//! Frame-level audio features: log Mel filterbanks (short and long window),
//! log pitch with POV-weighted mean subtraction, deltas and corpus
//! normalisation.

mod deltas;
mod fbank;
mod framing;
mod io;
mod normalize;
mod pipeline;
mod pitch;
mod wav;

pub use deltas::append_deltas;
pub use fbank::{fft_size_for, hz_to_mel, log_mel_fbank, mel_filterbank, mel_to_hz, MelFilterbank, LOG_FLOOR};
pub use framing::{frame_signal, Frames};
pub use io::{read_feature_file, write_feature_file, FEATURE_MAGIC, FEATURE_VERSION};
pub use normalize::{normalize_features, NormalizationReport};
pub use pipeline::{extract_streams, AudioStreams, N_MELS};
pub use pitch::{extract_pitch, extract_pitch_with, PitchConfig, PitchFrame, PitchTrack};
pub use wav::{read_wav, write_wav};

use crate::error::{invalid_input, shape_err, Result};
use serde::{Deserialize, Serialize};

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(invalid_input("sample rate must be positive"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Edge handling for frames that extend past the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Reflect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramingSpec {
    pub frame_shift_ms: f64,
    pub frame_length_ms: f64,
    pub padding: Padding,
}

impl FramingSpec {
    /// 25 ms windows every 10 ms.
    pub const SHORT: FramingSpec = FramingSpec {
        frame_shift_ms: 10.0,
        frame_length_ms: 25.0,
        padding: Padding::Reflect,
    };

    /// 250 ms windows every 10 ms.
    pub const LONG: FramingSpec = FramingSpec {
        frame_shift_ms: 10.0,
        frame_length_ms: 250.0,
        padding: Padding::Reflect,
    };
}

/// Which feature stream a matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamTag {
    Fbk25,
    Fbk250,
    Pitch,
    Delta,
    Combined,
    /// Per-frame word vectors.
    Words,
}

impl StreamTag {
    /// Fixed width of the stream, if it has one.
    pub fn expected_dim(self) -> Option<usize> {
        match self {
            StreamTag::Fbk25 | StreamTag::Fbk250 => Some(40),
            StreamTag::Pitch => Some(1),
            StreamTag::Delta | StreamTag::Combined | StreamTag::Words => None,
        }
    }
}

/// A T×D matrix of frame features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    dim: usize,
    values: Vec<f64>,
    pub frame_shift_ms: f64,
    pub stream: StreamTag,
}

impl FeatureMatrix {
    pub fn new(frames: usize, dim: usize, values: Vec<f64>, frame_shift_ms: f64, stream: StreamTag) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(invalid_input(format!("feature matrix must be non-empty, got {frames}x{dim}")));
        }
        if values.len() != frames * dim {
            return Err(shape_err(format!(
                "feature matrix {frames}x{dim} needs {} values, got {}",
                frames * dim,
                values.len()
            )));
        }
        if let Some(d) = stream.expected_dim() {
            if d != dim {
                return Err(shape_err(format!("{stream:?} stream must be {d}-d, got {dim}")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("feature values must be finite"));
        }
        Ok(Self { frames, dim, values, frame_shift_ms, stream })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.values[t * self.dim + d]
    }

    /// Per-frame concatenation of streams with equal frame counts.
    pub fn concat(parts: &[&FeatureMatrix], stream: StreamTag) -> Result<FeatureMatrix> {
        let first = parts.first().ok_or_else(|| invalid_input("nothing to concatenate"))?;
        let frames = first.frames;
        if let Some(bad) = parts.iter().find(|p| p.frames != frames) {
            return Err(shape_err(format!(
                "stream frame counts differ: {} vs {}",
                frames, bad.frames
            )));
        }
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut values = Vec::with_capacity(frames * dim);
        for t in 0..frames {
            for p in parts {
                values.extend_from_slice(p.row(t));
            }
        }
        FeatureMatrix::new(frames, dim, values, first.frame_shift_ms, stream)
    }
}
