use super::{AudioSignal, FramingSpec, Padding};
use crate::error::{invalid_input, Error, Result};

/// Fixed-length frames centred on multiples of the frame shift.
#[derive(Debug, Clone)]
pub struct Frames {
    pub frame_len: usize,
    pub shift: usize,
    data: Vec<f64>,
}

impl Frames {
    pub fn len(&self) -> usize {
        self.data.len() / self.frame_len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.frame_len..(t + 1) * self.frame_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.frame_len)
    }
}

pub(crate) fn shift_samples(sample_rate: u32, shift_ms: f64) -> Result<usize> {
    let exact = sample_rate as f64 * shift_ms / 1000.0;
    let rounded = exact.round();
    if rounded < 1.0 || (exact - rounded).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!(
            "frame shift of {shift_ms} ms is not a whole number of samples at {sample_rate} Hz"
        )));
    }
    Ok(rounded as usize)
}

pub(crate) fn length_samples(sample_rate: u32, length_ms: f64) -> usize {
    (sample_rate as f64 * length_ms / 1000.0).round().max(1.0) as usize
}

/// Index into `[0, n)` with whole-sample reflection at both ends
/// (`-1 -> 1`, `n -> n-2`), folding repeatedly for large overhangs.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Cuts `signal` into `floor(len / shift)` frames. Frame `t` is centred on
/// sample `t * shift`, so streams with different frame lengths but the same
/// shift line up frame for frame.
pub fn frame_signal(signal: &AudioSignal, spec: &FramingSpec) -> Result<Frames> {
    if signal.samples.is_empty() {
        return Err(invalid_input("cannot frame an empty signal"));
    }
    if !(spec.frame_shift_ms > 0.0) || spec.frame_length_ms < spec.frame_shift_ms {
        return Err(Error::InvalidSpec(format!(
            "need frame_length_ms >= frame_shift_ms > 0, got {} / {}",
            spec.frame_length_ms, spec.frame_shift_ms
        )));
    }
    let shift = shift_samples(signal.sample_rate, spec.frame_shift_ms)?;
    let frame_len = length_samples(signal.sample_rate, spec.frame_length_ms);
    let n = signal.samples.len();
    let count = n / shift;
    if count == 0 {
        return Err(invalid_input(format!(
            "signal of {n} samples is shorter than one frame shift ({shift})"
        )));
    }
    let half = (frame_len / 2) as isize;
    let mut data = Vec::with_capacity(count * frame_len);
    for t in 0..count {
        let start = (t * shift) as isize - half;
        match spec.padding {
            Padding::Reflect => {
                data.extend((0..frame_len as isize).map(|k| signal.samples[reflect_index(start + k, n)]));
            }
        }
    }
    Ok(Frames { frame_len, shift, data })
}
