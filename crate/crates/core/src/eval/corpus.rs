use super::{read_manifest, ManifestRecord};
use crate::dsp::{
    extract_streams, normalize_features, read_feature_file, read_wav, write_feature_file, FeatureMatrix, StreamTag,
};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::text::{
    assemble_context, load_sentence_store, load_word_table, words_to_frames, ContextSpan, ContextWindow,
    SentenceEmbeddingStore, WordEmbeddingTable,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

const FRAME_SHIFT_MS: f64 = 10.0;

/// Which transcript the text features come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextSource {
    Ref,
    Asr,
}

/// Transcript sources for training and testing: `Mix` trains on reference
/// transcripts and tests on recogniser output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextCondition {
    Ref,
    Asr,
    Mix,
}

impl TextCondition {
    pub fn train_source(&self) -> TextSource {
        match self {
            TextCondition::Asr => TextSource::Asr,
            _ => TextSource::Ref,
        }
    }

    pub fn test_source(&self) -> TextSource {
        match self {
            TextCondition::Ref => TextSource::Ref,
            _ => TextSource::Asr,
        }
    }
}

impl fmt::Display for TextCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextCondition::Ref => "ref",
            TextCondition::Asr => "asr",
            TextCondition::Mix => "mix",
        })
    }
}

impl FromStr for TextCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ref" => Ok(TextCondition::Ref),
            "asr" => Ok(TextCondition::Asr),
            "mix" => Ok(TextCondition::Mix),
            other => Err(Error::InvalidConfig(format!("unknown text condition {other:?} (ref, asr, mix)"))),
        }
    }
}

/// Files the corpus draws on besides the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusPaths {
    pub word_table: Option<PathBuf>,
    pub sentences_ref: Option<PathBuf>,
    pub sentences_asr: Option<PathBuf>,
    /// Directory of precomputed, normalised feature files.
    pub feature_dir: Option<PathBuf>,
}

/// What to prepare when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusNeeds {
    pub audio: bool,
    pub glove: bool,
}

/// Normalised frame-level streams of one utterance.
#[derive(Debug, Clone, Default)]
pub struct UtteranceFeatures {
    pub audio25: Option<Tensor>,
    pub fbk250: Option<Tensor>,
    pub glove: Option<Tensor>,
}

pub struct Corpus {
    records: Vec<ManifestRecord>,
    features: Vec<UtteranceFeatures>,
    index: HashMap<String, usize>,
    dialogues: BTreeMap<String, Vec<String>>,
    pub sentences_ref: Option<SentenceEmbeddingStore>,
    pub sentences_asr: Option<SentenceEmbeddingStore>,
}

fn to_tensor(m: &FeatureMatrix) -> Tensor {
    Tensor::from_vec(m.frames(), m.dim(), m.values().to_vec()).expect("feature matrix shape")
}

fn to_matrix(t: &Tensor, stream: StreamTag) -> Result<FeatureMatrix> {
    FeatureMatrix::new(t.rows(), t.cols(), t.data().to_vec(), FRAME_SHIFT_MS, stream)
}

fn feature_file(dir: &Path, utt: &str, stream: &str) -> PathBuf {
    dir.join(format!("{utt}.{stream}.emof"))
}

impl Corpus {
    pub fn load(manifest: &Path, paths: &CorpusPaths, needs: CorpusNeeds) -> Result<Corpus> {
        let records = read_manifest(manifest)?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        Self::from_records(records, base, paths, needs)
    }

    /// Builds the corpus; audio paths are resolved against `base`.
    pub fn from_records(
        records: Vec<ManifestRecord>,
        base: &Path,
        paths: &CorpusPaths,
        needs: CorpusNeeds,
    ) -> Result<Corpus> {
        let index: HashMap<String, usize> = records.iter().enumerate().map(|(i, r)| (r.utt_id.clone(), i)).collect();
        let mut by_dialogue: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
        for r in &records {
            by_dialogue.entry(r.dialogue_id.clone()).or_default().push((r.position, r.utt_id.clone()));
        }
        let mut dialogues = BTreeMap::new();
        for (d, mut utts) in by_dialogue {
            utts.sort();
            if utts.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Format(format!("dialogue {d} repeats a position")));
            }
            dialogues.insert(d, utts.into_iter().map(|(_, id)| id).collect::<Vec<_>>());
        }

        let load_store = |p: &Option<PathBuf>| p.as_deref().map(|p| load_sentence_store(p, None)).transpose();
        let sentences_ref = load_store(&paths.sentences_ref)?;
        let sentences_asr = load_store(&paths.sentences_asr)?;

        let mut corpus = Corpus {
            features: vec![UtteranceFeatures::default(); records.len()],
            records,
            index,
            dialogues,
            sentences_ref,
            sentences_asr,
        };
        if let Some(dir) = &paths.feature_dir {
            corpus.read_features(dir, needs)?;
            return Ok(corpus);
        }
        if needs.audio {
            corpus.extract_audio(base)?;
        }
        if needs.glove {
            let path = paths
                .word_table
                .as_deref()
                .ok_or_else(|| Error::MissingData("GloVe features need a word table".into()))?;
            corpus.align_words(&load_word_table(path)?)?;
        }
        Ok(corpus)
    }

    fn extract_audio(&mut self, base: &Path) -> Result<()> {
        let streams: Vec<_> = self
            .records
            .par_iter()
            .map(|r| {
                let path = base.join(&r.audio_path);
                let signal = read_wav(&path)
                    .map_err(|e| Error::MissingData(format!("audio for {}: {e}", r.utt_id)))?;
                extract_streams(&signal)
            })
            .collect::<Result<_>>()?;
        let (mut audio25, mut fbk250): (Vec<_>, Vec<_>) = streams.into_iter().map(|s| (s.audio25, s.fbk250)).unzip();
        for stream in [&mut audio25, &mut fbk250] {
            let mut grouped = self.group_by_dialogue(std::mem::take(stream));
            let report = normalize_features(&mut grouped)?;
            if !report.unscaled.is_empty() {
                log::warn!("{} (dialogue, dim) pairs left unscaled", report.unscaled.len());
            }
            *stream = self.ungroup(grouped);
        }
        for (f, (a, b)) in self.features.iter_mut().zip(audio25.iter().zip(&fbk250)) {
            f.audio25 = Some(to_tensor(a));
            f.fbk250 = Some(to_tensor(b));
        }
        Ok(())
    }

    fn group_by_dialogue(&self, per_utt: Vec<FeatureMatrix>) -> Vec<Vec<FeatureMatrix>> {
        let mut slots: Vec<Option<FeatureMatrix>> = per_utt.into_iter().map(Some).collect();
        self.dialogues
            .values()
            .map(|ids| ids.iter().map(|id| slots[self.index[id]].take().expect("each utterance once")).collect())
            .collect()
    }

    fn ungroup(&self, grouped: Vec<Vec<FeatureMatrix>>) -> Vec<FeatureMatrix> {
        let mut slots: Vec<Option<FeatureMatrix>> = (0..self.records.len()).map(|_| None).collect();
        for (ids, feats) in self.dialogues.values().zip(grouped) {
            for (id, f) in ids.iter().zip(feats) {
                slots[self.index[id]] = Some(f);
            }
        }
        slots.into_iter().map(|s| s.expect("every utterance normalised")).collect()
    }

    fn align_words(&mut self, table: &WordEmbeddingTable) -> Result<()> {
        for (r, f) in self.records.iter().zip(self.features.iter_mut()) {
            let frames = f
                .audio25
                .as_ref()
                .map(|t| t.rows())
                .ok_or_else(|| Error::MissingData("word alignment needs audio frame counts".into()))?;
            f.glove = Some(to_tensor(&words_to_frames(&r.ref_alignments, table, frames, FRAME_SHIFT_MS)?));
        }
        Ok(())
    }

    fn read_features(&mut self, dir: &Path, needs: CorpusNeeds) -> Result<()> {
        for (r, f) in self.records.iter().zip(self.features.iter_mut()) {
            let read = |name: &str, tag: StreamTag| -> Result<Tensor> {
                let path = feature_file(dir, &r.utt_id, name);
                if !path.exists() {
                    return Err(Error::MissingData(format!("missing feature file {}", path.display())));
                }
                Ok(to_tensor(&read_feature_file(&path, tag)?))
            };
            if needs.audio || needs.glove {
                f.audio25 = Some(read("audio25", StreamTag::Combined)?);
                f.fbk250 = Some(read("fbk250", StreamTag::Fbk250)?);
            }
            if needs.glove {
                f.glove = Some(read("glove", StreamTag::Words)?);
            }
        }
        Ok(())
    }

    /// Writes every prepared stream as `<utt>.<stream>.emof` under `dir`.
    pub fn write_features(&self, dir: &Path) -> Result<usize> {
        std::fs::create_dir_all(dir)?;
        let mut written = 0;
        for (r, f) in self.records.iter().zip(&self.features) {
            let streams = [
                ("audio25", &f.audio25, StreamTag::Combined),
                ("fbk250", &f.fbk250, StreamTag::Fbk250),
                ("glove", &f.glove, StreamTag::Words),
            ];
            for (name, t, tag) in streams {
                if let Some(t) = t {
                    write_feature_file(&feature_file(dir, &r.utt_id, name), &to_matrix(t, tag)?)?;
                    written += 1;
                }
            }
        }
        Ok(written)
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn position_of(&self, utt_id: &str) -> Option<usize> {
        self.index.get(utt_id).copied()
    }

    pub fn record(&self, utt_id: &str) -> Option<&ManifestRecord> {
        self.position_of(utt_id).map(|i| &self.records[i])
    }

    pub fn features(&self, utt_id: &str) -> Option<&UtteranceFeatures> {
        self.position_of(utt_id).map(|i| &self.features[i])
    }

    pub fn dialogue_ids(&self) -> impl Iterator<Item = &str> {
        self.dialogues.keys().map(String::as_str)
    }

    /// Utterance ids of a dialogue in order.
    pub fn dialogue(&self, dialogue_id: &str) -> Option<&[String]> {
        self.dialogues.get(dialogue_id).map(Vec::as_slice)
    }

    pub fn store(&self, source: TextSource) -> Option<&SentenceEmbeddingStore> {
        match source {
            TextSource::Ref => self.sentences_ref.as_ref(),
            TextSource::Asr => self.sentences_asr.as_ref(),
        }
    }

    pub fn context(&self, utt_id: &str, span: ContextSpan, source: TextSource) -> Result<ContextWindow> {
        let store = self
            .store(source)
            .ok_or_else(|| Error::MissingData(format!("no {source:?} sentence embeddings loaded")))?;
        let rec = self
            .record(utt_id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown utterance {utt_id}")))?;
        let dialogue = &self.dialogues[&rec.dialogue_id];
        let pos = dialogue.iter().position(|id| id == utt_id).expect("indexed");
        assemble_context(store, dialogue, pos, span)
    }

    /// Utterances the recogniser gave nothing for: empty ASR transcript or
    /// no ASR sentence embedding.
    pub fn asr_failures(&self) -> HashSet<String> {
        self.records
            .iter()
            .filter(|r| {
                r.asr_transcript.trim().is_empty()
                    || self.sentences_asr.as_ref().is_some_and(|s| !s.contains(&r.utt_id))
            })
            .map(|r| r.utt_id.clone())
            .collect()
    }
}
