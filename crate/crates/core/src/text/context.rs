use super::{SentenceEmbeddingStore, SENTENCE_DIM};
use crate::error::{invalid_input, Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// How many utterances before and after the current one the TAB sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSpan {
    pub before: usize,
    pub after: usize,
}

impl ContextSpan {
    pub const fn new(before: usize, after: usize) -> Self {
        Self { before, after }
    }

    pub fn len(&self) -> usize {
        self.before + self.after + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for ContextSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.before == 0 && self.after == 0 {
            write!(f, "[0]")
        } else {
            write!(f, "[-{},{}]", self.before, self.after)
        }
    }
}

impl FromStr for ContextSpan {
    type Err = Error;

    /// Parses `"c1,c2"` with both components non-negative.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::InvalidConfig(format!("context {s:?} must look like \"c1,c2\"")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("context component {v:?} must be a non-negative integer")))
        };
        Ok(Self::new(parse(a)?, parse(b)?))
    }
}

/// Sentence vectors for dialogue positions `p - before ..= p + after`.
/// Slots outside the dialogue or without a stored vector are zero and
/// masked out.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextWindow {
    pub span: ContextSpan,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    /// Utterance id behind each slot, `None` outside the dialogue.
    pub ids: Vec<Option<String>>,
}

impl ContextWindow {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn any_present(&self) -> bool {
        self.mask.iter().any(|m| *m)
    }

    pub fn center_present(&self) -> bool {
        self.mask[self.span.before]
    }

    /// Row-major `len × dim` matrix of the slot vectors.
    pub fn flat(&self) -> Vec<f64> {
        self.vectors.iter().flatten().copied().collect()
    }
}

pub fn assemble_context(
    store: &SentenceEmbeddingStore,
    dialogue: &[String],
    position: usize,
    span: ContextSpan,
) -> Result<ContextWindow> {
    if position >= dialogue.len() {
        return Err(invalid_input(format!(
            "position {position} outside a dialogue of {} utterances",
            dialogue.len()
        )));
    }
    let dim = store.dim().unwrap_or(SENTENCE_DIM);
    let mut window = ContextWindow {
        span,
        dim,
        vectors: Vec::with_capacity(span.len()),
        mask: Vec::with_capacity(span.len()),
        ids: Vec::with_capacity(span.len()),
    };
    for offset in -(span.before as isize)..=span.after as isize {
        let idx = position as isize + offset;
        let id = (idx >= 0 && (idx as usize) < dialogue.len()).then(|| dialogue[idx as usize].clone());
        match id.as_deref().and_then(|id| store.get(id)) {
            Some(v) => {
                window.vectors.push(v.to_vec());
                window.mask.push(true);
            }
            None => {
                window.vectors.push(vec![0.0; dim]);
                window.mask.push(false);
            }
        }
        window.ids.push(id);
    }
    Ok(window)
}
