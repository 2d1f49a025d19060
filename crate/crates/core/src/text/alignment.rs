use super::WordEmbeddingTable;
use crate::dsp::{FeatureMatrix, StreamTag};
use crate::error::{invalid_input, Error, Result};
use serde::{Deserialize, Serialize};

/// A word and the half-open time interval `[start_ms, end_ms)` it occupies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAlignment {
    pub word: String,
    pub start_ms: f64,
    pub end_ms: f64,
}

fn validate(alignments: &[WordAlignment]) -> Result<()> {
    for (i, a) in alignments.iter().enumerate() {
        if !(a.start_ms >= 0.0 && a.start_ms < a.end_ms) {
            return Err(Error::InvalidAlignment(format!(
                "word {i} ({:?}) has interval [{}, {})",
                a.word, a.start_ms, a.end_ms
            )));
        }
        if i > 0 && a.start_ms < alignments[i - 1].end_ms {
            return Err(Error::InvalidAlignment(format!(
                "word {i} ({:?}) starts at {} before the previous word ends at {}",
                a.word,
                a.start_ms,
                alignments[i - 1].end_ms
            )));
        }
    }
    Ok(())
}

/// Expands word alignments to one word vector per frame. Frame `t` is
/// centred at `t * frame_shift_ms` and takes the vector of the word whose
/// interval contains that instant; frames between words are zero.
pub fn words_to_frames(
    alignments: &[WordAlignment],
    table: &WordEmbeddingTable,
    frames: usize,
    frame_shift_ms: f64,
) -> Result<FeatureMatrix> {
    if frames == 0 {
        return Err(invalid_input("frame count must be positive"));
    }
    validate(alignments)?;
    let dim = table.dim();
    let mut values = vec![0.0; frames * dim];
    for a in alignments {
        let vector = table.lookup(&a.word);
        // first frame whose centre is >= start
        let first = (a.start_ms / frame_shift_ms).ceil().max(0.0) as usize;
        for t in first..frames {
            let centre = t as f64 * frame_shift_ms;
            if centre >= a.end_ms {
                break;
            }
            if centre >= a.start_ms {
                values[t * dim..(t + 1) * dim].copy_from_slice(&vector);
            }
        }
    }
    FeatureMatrix::new(frames, dim, values, frame_shift_ms, StreamTag::Words)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> WordEmbeddingTable {
        let mut t = WordEmbeddingTable::new(50);
        t.insert("hello", vec![1.0; 50]).unwrap();
        t.insert("world", vec![2.0; 50]).unwrap();
        t
    }

    fn word(w: &str, s: f64, e: f64) -> WordAlignment {
        WordAlignment { word: w.into(), start_ms: s, end_ms: e }
    }

    #[test]
    fn single_word_window() {
        let f = words_to_frames(&[word("hello", 100.0, 300.0)], &table(), 40, 10.0).unwrap();
        for t in 0..40 {
            let expect = if (10..30).contains(&t) { 1.0 } else { 0.0 };
            assert!(f.row(t).iter().all(|v| *v == expect), "frame {t}");
        }
    }

    #[test]
    fn empty_alignment_is_silence() {
        let f = words_to_frames(&[], &table(), 12, 10.0).unwrap();
        assert!(f.values().iter().all(|v| *v == 0.0));
        assert_eq!((f.frames(), f.dim()), (12, 50));
    }

    #[test]
    fn abutting_words_split_at_boundary() {
        let f = words_to_frames(&[word("hello", 0.0, 150.0), word("world", 150.0, 250.0)], &table(), 30, 10.0)
            .unwrap();
        assert_eq!(f.get(14, 0), 1.0);
        assert_eq!(f.get(15, 0), 2.0);
        assert_eq!(f.get(24, 0), 2.0);
        assert_eq!(f.get(25, 0), 0.0);
    }

    #[test]
    fn oov_word_is_zero() {
        let f = words_to_frames(&[word("zebra", 0.0, 50.0)], &table(), 10, 10.0).unwrap();
        assert!(f.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn overlap_rejected() {
        let r = words_to_frames(&[word("hello", 0.0, 150.0), word("world", 140.0, 250.0)], &table(), 30, 10.0);
        assert!(matches!(r, Err(Error::InvalidAlignment(_))));
    }
}
