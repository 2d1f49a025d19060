//! Synthetic dialogue corpus with known structure.
//!
//! Every utterance is a harmonic tone whose pitch contour follows one of four
//! shapes (rising, wavy, falling, level), voiced word by word. Ordinary utterances carry two keywords of
//! their class, and their contour matches the class. Some utterances are
//! "ambiguous" replies (a fixed short phrase per dialogue, random contour)
//! whose label is that of the utterance before it, so only dialogue context
//! can resolve them. Ambiguous labels are balanced within every dialogue,
//! which makes them unpredictable from the reply alone.
//!
//! Word and sentence vectors are hash-seeded, so the corpus needs no
//! pretrained resources.

use crate::dsp::{write_wav, AudioSignal};
use crate::error::{Error, Result};
use crate::eval::{write_manifest, ManifestRecord};
use crate::text::{
    write_sentence_store, write_word_table, SentenceEmbeddingStore, WordAlignment, WordEmbeddingTable, GLOVE_DIM,
    SENTENCE_DIM,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const WORD_TABLE_FILE: &str = "glove.txt";
pub const SENT_REF_FILE: &str = "sent_ref.tsv";
pub const SENT_ASR_FILE: &str = "sent_asr.tsv";
pub const META_FILE: &str = "synth_meta.jsonl";

const RAW_LABELS: [&str; 4] = ["hap", "ang", "sad", "neu"];

const KEYWORDS: [[&str; 6]; 4] = [
    ["great", "wonderful", "fun", "glad", "love", "lovely"],
    ["hate", "stupid", "awful", "furious", "ridiculous", "damn"],
    ["miss", "lost", "sorry", "alone", "cry", "gone"],
    ["meeting", "table", "tuesday", "paper", "train", "office"],
];
const FILLERS: [&str; 8] = ["the", "it", "was", "that", "we", "so", "just", "well"];
const AMBIGUOUS: [&str; 5] = ["yes exactly", "oh really", "i see", "right right", "okay then"];

const WORD_MS: f64 = 200.0;
const GAP_MS: f64 = 40.0;
const EDGE_MS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_dialogues: usize,
    pub utterances_per_dialogue: usize,
    pub n_sessions: u32,
    pub sample_rate: u32,
    /// Share of utterances given no ASR output.
    pub asr_missing_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_dialogues: 80,
            utterances_per_dialogue: 16,
            n_sessions: 5,
            sample_rate: 16000,
            asr_missing_fraction: 0.1,
        }
    }
}

/// Pitch contour shapes, in class order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contour {
    Rising,
    Wavy,
    Falling,
    Level,
}

const WAVE_HZ: f64 = 4.0;
const WAVE_OCTAVES: f64 = 0.3;
const RAMP_OCTAVES: f64 = 0.7;

impl Contour {
    pub const ALL: [Contour; 4] = [Contour::Rising, Contour::Wavy, Contour::Falling, Contour::Level];

    /// log2 of the pitch factor at relative time `rel ∈ [0, 1]`, `secs`
    /// seconds into the voiced part.
    fn log2_factor(self, rel: f64, secs: f64) -> f64 {
        let ramp = RAMP_OCTAVES * (rel - 0.5);
        match self {
            Contour::Rising => ramp,
            Contour::Falling => -ramp,
            Contour::Wavy => WAVE_OCTAVES * (2.0 * std::f64::consts::PI * WAVE_HZ * secs).sin(),
            Contour::Level => 0.0,
        }
    }
}

/// Reads the contour off a natural-log pitch track: a least-squares line
/// through the voiced frames gives the overall change, and the spread of the
/// residuals separates the wavy shape.
pub fn classify_contour(log_pitch: &[f64], pov: &[f64], pov_threshold: f64) -> Option<Contour> {
    let pts: Vec<(f64, f64)> = log_pitch
        .iter()
        .zip(pov)
        .enumerate()
        .filter(|(_, (_, p))| **p >= pov_threshold)
        .map(|(i, (l, _))| (i as f64, *l))
        .collect();
    if pts.len() < 6 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx.max(1e-12);
    let resid = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    let span = pts.last().unwrap().0 - pts[0].0;
    let change = slope * span;
    let ln2 = std::f64::consts::LN_2;
    Some(if resid > 0.25 * WAVE_OCTAVES * ln2 {
        Contour::Wavy
    } else if change.abs() < 0.4 * RAMP_OCTAVES * ln2 {
        Contour::Level
    } else if change > 0.0 {
        Contour::Rising
    } else {
        Contour::Falling
    })
}

/// Side information about each generated utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMeta {
    pub utt_id: String,
    pub label: usize,
    pub contour: Contour,
    pub ambiguous: bool,
    pub asr_missing: bool,
}

#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub record: ManifestRecord,
    pub tokens: Vec<String>,
    pub meta: SynthMeta,
    f0_base: f64,
    seed: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A fixed pseudo-random Gaussian vector for `token`.
pub fn token_vector(token: &str, dim: usize, salt: &str) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(format!("{salt}:{token}").as_bytes()));
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Sum of the tokens' sentence-space vectors, rescaled to unit RMS per
/// dimension like the normalised audio streams.
pub fn sentence_vector(tokens: &[String]) -> Vec<f64> {
    let mut sum = vec![0.0; SENTENCE_DIM];
    for t in tokens {
        for (s, v) in sum.iter_mut().zip(token_vector(t, SENTENCE_DIM, "sentence")) {
            *s += v;
        }
    }
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let scale = (SENTENCE_DIM as f64).sqrt() / norm;
    sum.iter().map(|v| ((v * scale) as f32) as f64).collect()
}

pub fn vocabulary() -> BTreeSet<String> {
    KEYWORDS
        .iter()
        .flatten()
        .chain(FILLERS.iter())
        .map(|w| w.to_string())
        .chain(AMBIGUOUS.iter().flat_map(|p| p.split(' ').map(str::to_string)))
        .collect()
}

pub fn word_table() -> WordEmbeddingTable {
    let mut table = WordEmbeddingTable::new(GLOVE_DIM);
    for w in vocabulary() {
        let v = token_vector(&w, GLOVE_DIM, "glove").iter().map(|&x| (x as f32) as f64).collect();
        table.insert(&w, v).expect("fixed dimension");
    }
    table
}

/// Label sequence of one dialogue as `(label, ambiguous)`. Each block of 16
/// holds three ordinary utterances per class in random order, and after one
/// of each class an ambiguous reply repeating its label. A tail shorter than
/// 16 gets ordinary utterances only.
fn label_sequence(n: usize, rng: &mut impl Rng) -> Vec<(usize, bool)> {
    let mut seq = Vec::with_capacity(n);
    for _ in 0..n / 16 {
        let mut base: Vec<usize> = (0..12).map(|i| i / 3).collect();
        base.shuffle(rng);
        let mut after = [0usize; 4];
        for (c, slot) in after.iter_mut().enumerate() {
            let at: Vec<usize> = (0..12).filter(|&i| base[i] == c).collect();
            *slot = *at.choose(rng).expect("three per class");
        }
        for (i, &label) in base.iter().enumerate() {
            seq.push((label, false));
            if after[label] == i {
                seq.push((label, true));
            }
        }
    }
    let mut tail = Vec::new();
    while tail.len() < n % 16 {
        let mut block = [0usize, 1, 2, 3];
        block.shuffle(rng);
        tail.extend(block);
    }
    seq.extend(tail.into_iter().take(n % 16).map(|l| (l, false)));
    seq
}

fn plan_dialogue(cfg: &SynthConfig, d: usize) -> Vec<SynthUtterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9).wrapping_add(d as u64 + 1));
    let n = cfg.utterances_per_dialogue;
    let session = (d as u32 % cfg.n_sessions) + 1;
    let dialogue_id = format!("ses{session}_d{d:03}");
    let phrase: Vec<String> = AMBIGUOUS.choose(&mut rng).unwrap().split(' ').map(str::to_string).collect();

    let mut out = Vec::with_capacity(n);
    for (position, (label, ambiguous)) in label_sequence(n, &mut rng).into_iter().enumerate() {
        {
            let (tokens, contour) = if ambiguous {
                (phrase.clone(), *Contour::ALL.choose(&mut rng).unwrap())
            } else {
                let mut t: Vec<String> =
                    KEYWORDS[label].choose_multiple(&mut rng, 2).map(|w| w.to_string()).collect();
                let fillers = rng.gen_range(1..=3);
                t.extend(FILLERS.choose_multiple(&mut rng, fillers).map(|w| w.to_string()));
                t.shuffle(&mut rng);
                (t, Contour::ALL[label])
            };
            let speaker = if (position + d) % 2 == 0 { "F" } else { "M" };
            let utt_id = format!("{dialogue_id}_u{position:02}_{speaker}");
            let alignments: Vec<WordAlignment> = tokens
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let start = EDGE_MS + i as f64 * (WORD_MS + GAP_MS);
                    WordAlignment { word: w.clone(), start_ms: start, end_ms: start + WORD_MS }
                })
                .collect();
            let transcript = tokens.join(" ");
            let f0_base = if speaker == "F" { 210.0 } else { 125.0 } * rng.gen_range(0.95..1.05);
            out.push(SynthUtterance {
                record: ManifestRecord {
                    utt_id: utt_id.clone(),
                    dialogue_id: dialogue_id.clone(),
                    session: Some(session),
                    speaker: Some(speaker.to_string()),
                    position,
                    audio_path: format!("audio/{utt_id}.wav"),
                    ref_transcript: transcript.clone(),
                    ref_alignments: alignments,
                    asr_transcript: transcript,
                    raw_label: RAW_LABELS[label].to_string(),
                },
                tokens,
                meta: SynthMeta { utt_id, label, contour, ambiguous, asr_missing: false },
                f0_base,
                seed: rng.gen(),
            });
        }
    }
    out
}

/// The full corpus without audio. Exactly `round(asr_missing_fraction · N)`
/// utterances are marked as having no ASR output.
pub fn plan_corpus(cfg: &SynthConfig) -> Result<Vec<SynthUtterance>> {
    if cfg.n_dialogues == 0 || cfg.utterances_per_dialogue == 0 || cfg.n_sessions == 0 {
        return Err(Error::InvalidConfig("corpus sizes must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.asr_missing_fraction) {
        return Err(Error::InvalidConfig("asr_missing_fraction must be in [0, 1]".into()));
    }
    let mut utts: Vec<SynthUtterance> = (0..cfg.n_dialogues).flat_map(|d| plan_dialogue(cfg, d)).collect();
    let n_missing = (utts.len() as f64 * cfg.asr_missing_fraction).round() as usize;
    let mut order: Vec<usize> = (0..utts.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA5A5_5A5A));
    for &i in &order[..n_missing] {
        utts[i].meta.asr_missing = true;
        utts[i].record.asr_transcript.clear();
    }
    Ok(utts)
}

/// Harmonic tone following the utterance's contour, gated word by word,
/// over low-level noise.
pub fn render_audio(utt: &SynthUtterance, sample_rate: u32) -> AudioSignal {
    let sr = sample_rate as f64;
    let words = &utt.record.ref_alignments;
    let voiced_start = words.first().map_or(EDGE_MS, |w| w.start_ms) / 1000.0;
    let voiced_end = words.last().map_or(EDGE_MS, |w| w.end_ms) / 1000.0;
    let total = voiced_end + EDGE_MS / 1000.0;
    let n = (total * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(utt.seed);
    let ramp = 0.02;
    let mut phase = 0.0f64;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let rel = ((t - voiced_start) / (voiced_end - voiced_start).max(1e-9)).clamp(0.0, 1.0);
            let secs = (t - voiced_start).max(0.0);
            let f0 = utt.f0_base * 2f64.powf(utt.meta.contour.log2_factor(rel, secs));
            phase += 2.0 * std::f64::consts::PI * f0 / sr;
            let ms = t * 1000.0;
            let env = words
                .iter()
                .map(|w| {
                    let (s, e) = (w.start_ms / 1000.0, w.end_ms / 1000.0);
                    if ms < w.start_ms || ms >= w.end_ms {
                        0.0
                    } else {
                        let edge = ((t - s).min(e - t) / ramp).min(1.0);
                        0.5 - 0.5 * (std::f64::consts::PI * edge).cos()
                    }
                })
                .fold(0.0, f64::max);
            let tone: f64 = (1..=4).map(|k| (k as f64 * phase).sin() / k as f64).sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            0.25 * env * tone + 0.003 * noise
        })
        .collect();
    AudioSignal { samples, sample_rate }
}

#[derive(Debug, Clone)]
pub struct SynthSummary {
    pub dir: PathBuf,
    pub n_utterances: usize,
    pub n_ambiguous: usize,
    pub n_asr_missing: usize,
}

impl SynthSummary {
    pub fn manifest(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    pub fn word_table(&self) -> PathBuf {
        self.dir.join(WORD_TABLE_FILE)
    }

    pub fn sentences_ref(&self) -> PathBuf {
        self.dir.join(SENT_REF_FILE)
    }

    pub fn sentences_asr(&self) -> PathBuf {
        self.dir.join(SENT_ASR_FILE)
    }

    pub fn meta(&self) -> PathBuf {
        self.dir.join(META_FILE)
    }
}

/// Writes the manifest, audio, word table, both sentence stores and the
/// side-information file under `dir`.
pub fn generate(cfg: &SynthConfig, dir: &Path) -> Result<SynthSummary> {
    let utts = plan_corpus(cfg)?;
    std::fs::create_dir_all(dir.join("audio"))?;
    utts.par_iter()
        .map(|u| write_wav(&dir.join(&u.record.audio_path), &render_audio(u, cfg.sample_rate)))
        .collect::<Result<Vec<()>>>()?;

    let records: Vec<ManifestRecord> = utts.iter().map(|u| u.record.clone()).collect();
    write_manifest(&dir.join(MANIFEST_FILE), &records)?;
    write_word_table(&dir.join(WORD_TABLE_FILE), &word_table())?;

    let mut sent_ref = SentenceEmbeddingStore::new();
    let mut sent_asr = SentenceEmbeddingStore::new();
    for u in &utts {
        let v = sentence_vector(&u.tokens);
        if !u.meta.asr_missing {
            sent_asr.insert(&u.meta.utt_id, v.clone())?;
        }
        sent_ref.insert(&u.meta.utt_id, v)?;
    }
    write_sentence_store(&dir.join(SENT_REF_FILE), &sent_ref)?;
    write_sentence_store(&dir.join(SENT_ASR_FILE), &sent_asr)?;

    let mut meta = std::io::BufWriter::new(std::fs::File::create(dir.join(META_FILE))?);
    for u in &utts {
        serde_json::to_writer(&mut meta, &u.meta).map_err(|e| Error::Format(e.to_string()))?;
        meta.write_all(b"\n")?;
    }
    meta.flush()?;

    Ok(SynthSummary {
        dir: dir.to_path_buf(),
        n_utterances: utts.len(),
        n_ambiguous: utts.iter().filter(|u| u.meta.ambiguous).count(),
        n_asr_missing: utts.iter().filter(|u| u.meta.asr_missing).count(),
    })
}

pub fn read_synth_meta(path: &Path) -> Result<Vec<SynthMeta>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Format(format!("{}: line {}: {e}", path.display(), i + 1))))
        .collect()
}
