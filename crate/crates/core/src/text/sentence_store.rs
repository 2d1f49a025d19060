use crate::error::{format_err, Result};
use log::warn;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

/// One sentence vector per utterance id.
#[derive(Debug, Clone, Default)]
pub struct SentenceEmbeddingStore {
    dim: Option<usize>,
    vectors: HashMap<String, Vec<f64>>,
}

impl SentenceEmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Width of the stored vectors; `None` while the store is empty.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, utt_id: &str, vector: Vec<f64>) -> Result<()> {
        match self.dim {
            Some(d) if d != vector.len() => {
                return Err(format_err(format!(
                    "{utt_id}: expected {d} values, found {}",
                    vector.len()
                )))
            }
            None => self.dim = Some(vector.len()),
            _ => {}
        }
        if self.vectors.contains_key(utt_id) {
            return Err(format_err(format!("duplicate utterance id {utt_id}")));
        }
        self.vectors.insert(utt_id.to_string(), vector);
        Ok(())
    }

    pub fn get(&self, utt_id: &str) -> Option<&[f64]> {
        self.vectors.get(utt_id).map(Vec::as_slice)
    }

    pub fn contains(&self, utt_id: &str) -> bool {
        self.vectors.contains_key(utt_id)
    }

    pub fn remove(&mut self, utt_id: &str) -> Option<Vec<f64>> {
        self.vectors.remove(utt_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}

/// Loads `utt_id<TAB>v1 ... vD` rows (values separated by tabs or spaces).
/// With `expected_dim` set every row must have exactly that many values.
pub fn load_sentence_store(path: &Path, expected_dim: Option<usize>) -> Result<SentenceEmbeddingStore> {
    let text = std::fs::read_to_string(path)?;
    parse_sentence_store(&text, expected_dim).map_err(|e| match e {
        crate::Error::Format(msg) => format_err(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(crate) fn parse_sentence_store(text: &str, expected_dim: Option<usize>) -> Result<SentenceEmbeddingStore> {
    let mut store = SentenceEmbeddingStore { dim: expected_dim, vectors: HashMap::new() };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| format_err(format!("line {lineno}: missing TAB after utterance id")))?;
        let vector = rest
            .split_whitespace()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format_err(format!("line {lineno}: {e}")))?;
        store
            .insert(id.trim(), vector)
            .map_err(|e| format_err(format!("line {lineno}: {e}")))?;
    }
    if store.is_empty() {
        warn!("sentence store is empty");
    }
    Ok(store)
}

/// Writes rows sorted by utterance id.
pub fn write_sentence_store(path: &Path, store: &SentenceEmbeddingStore) -> Result<()> {
    let mut ids: Vec<&str> = store.ids().collect();
    ids.sort_unstable();
    let mut out = String::new();
    for id in ids {
        out.push_str(id);
        for (k, v) in store.get(id).unwrap().iter().enumerate() {
            out.push(if k == 0 { '\t' } else { ' ' });
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
