use crate::error::{format_err, Result};
use log::warn;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

pub const GLOVE_DIM: usize = 50;

/// Word → vector table with case-folded lookup.
#[derive(Debug, Clone)]
pub struct WordEmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordEmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, vectors: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Inserts a vector, returning the previous one for this word.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<Option<Vec<f64>>> {
        if vector.len() != self.dim {
            return Err(format_err(format!(
                "vector for {word:?} has {} values, table is {}-d",
                vector.len(),
                self.dim
            )));
        }
        Ok(self.vectors.insert(word.to_lowercase(), vector))
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    /// Out-of-vocabulary words map to the zero vector.
    pub fn lookup(&self, word: &str) -> Vec<f64> {
        self.get(word).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; self.dim])
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}

/// Parses `token v1 v2 ... vD` lines. All lines must share one width.
pub fn load_word_table(path: &Path) -> Result<WordEmbeddingTable> {
    let text = std::fs::read_to_string(path)?;
    parse_word_table(&text).map_err(|e| match e {
        crate::Error::Format(msg) => format_err(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(crate) fn parse_word_table(text: &str) -> Result<WordEmbeddingTable> {
    let mut table: Option<WordEmbeddingTable> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let vector = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format_err(format!("line {lineno}: {e}")))?;
        if vector.is_empty() {
            return Err(format_err(format!("line {lineno}: no vector values")));
        }
        let table = table.get_or_insert_with(|| WordEmbeddingTable::new(vector.len()));
        if vector.len() != table.dim {
            return Err(format_err(format!(
                "line {lineno}: expected {} values, found {}",
                table.dim,
                vector.len()
            )));
        }
        if table.insert(word, vector)?.is_some() {
            warn!("line {lineno}: duplicate token {word:?}, keeping the later vector");
        }
    }
    table.ok_or_else(|| format_err("word table is empty"))
}

pub fn write_word_table(path: &Path, table: &WordEmbeddingTable) -> Result<()> {
    let mut words: Vec<&str> = table.words().collect();
    words.sort_unstable();
    let mut out = String::new();
    for w in words {
        out.push_str(w);
        for v in table.get(w).unwrap() {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
