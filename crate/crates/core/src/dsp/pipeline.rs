use super::{
    append_deltas, extract_pitch, frame_signal, log_mel_fbank, AudioSignal, FeatureMatrix, FramingSpec, StreamTag,
};
use crate::error::Result;

pub const N_MELS: usize = 40;

/// The two audio streams the TSB consumes, before normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioStreams {
    /// 25 ms FBK + log pitch, with deltas: 82-d.
    pub audio25: FeatureMatrix,
    /// 250 ms FBK: 40-d.
    pub fbk250: FeatureMatrix,
}

pub fn extract_streams(signal: &AudioSignal) -> Result<AudioStreams> {
    let short = frame_signal(signal, &FramingSpec::SHORT)?;
    let fbk25 = log_mel_fbank(&short, signal.sample_rate, N_MELS)?;
    let pitch = extract_pitch(signal, &FramingSpec::SHORT)?.features()?;
    let base = FeatureMatrix::concat(&[&fbk25, &pitch], StreamTag::Combined)?;
    let audio25 = append_deltas(&base)?;
    let long = frame_signal(signal, &FramingSpec::LONG)?;
    let fbk250 = log_mel_fbank(&long, signal.sample_rate, N_MELS)?;
    Ok(AudioStreams { audio25, fbk250 })
}
