use super::AudioSignal;
use crate::error::{format_err, Result};
use std::path::Path;

/// Reads a WAV file, mixing down to mono and scaling to [-1, 1].
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let mut reader =
        hound::WavReader::open(path).map_err(|e| format_err(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
    }
    .map_err(|e| format_err(format!("{}: {e}", path.display())))?;
    let samples = interleaved
        .chunks(channels)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    AudioSignal::new(samples, spec.sample_rate)
}

/// Writes 16-bit mono PCM.
pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let err = |e: hound::Error| format_err(format!("{}: {e}", path.display()));
    let mut w = hound::WavWriter::create(path, spec).map_err(err)?;
    for s in &signal.samples {
        let v = (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
        w.write_sample(v).map_err(err)?;
    }
    w.finalize().map_err(err)?;
    Ok(())
}
