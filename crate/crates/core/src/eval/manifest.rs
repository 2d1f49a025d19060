use crate::error::{Error, Result};
use crate::text::WordAlignment;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// One utterance of the corpus manifest (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub utt_id: String,
    pub dialogue_id: String,
    #[serde(default)]
    pub session: Option<u32>,
    #[serde(default)]
    pub speaker: Option<String>,
    /// Order of the utterance within its dialogue.
    pub position: usize,
    /// Relative paths are resolved against the manifest's directory.
    pub audio_path: String,
    #[serde(default)]
    pub ref_transcript: String,
    #[serde(default)]
    pub ref_alignments: Vec<WordAlignment>,
    /// Empty when recognition produced nothing.
    #[serde(default)]
    pub asr_transcript: String,
    pub raw_label: String,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRecord>> {
    parse_lines(BufReader::new(text.as_bytes()))
}

fn parse_lines(reader: impl BufRead) -> Result<Vec<ManifestRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("manifest line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    let mut seen = std::collections::HashSet::new();
    for r in &out {
        if !seen.insert(r.utt_id.as_str()) {
            return Err(Error::Format(format!("duplicate utterance id {}", r.utt_id)));
        }
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::MissingData(format!("cannot open manifest {}: {e}", path.display())))?;
    parse_lines(BufReader::new(file))
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
