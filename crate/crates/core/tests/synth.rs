use emorec::dsp::{extract_pitch, FramingSpec};
use emorec::eval::{read_manifest, LabelScheme};
use emorec::synth::*;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

fn small(seed: u64) -> SynthConfig {
    SynthConfig { seed, n_dialogues: 10, ..Default::default() }
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn generation_is_reproducible() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = generate(&small(3), a.path()).unwrap();
    generate(&small(3), b.path()).unwrap();
    generate(&small(4), c.path()).unwrap();
    let (fa, fb, fc) = (files(a.path()), files(b.path()), files(c.path()));
    assert_eq!(fa.len(), sa.n_utterances + 5);
    assert!(fa == fb);
    assert!(fa != fc);
}

#[test]
fn manifest_labels_and_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let s = generate(&small(5), dir.path()).unwrap();
    let records = read_manifest(&s.manifest()).unwrap();
    let meta = read_synth_meta(&s.meta()).unwrap();
    assert_eq!(records.len(), 160);
    assert_eq!(meta.len(), 160);
    let mut per_label = [0usize; 4];
    for (r, m) in records.iter().zip(&meta) {
        assert_eq!(r.utt_id, m.utt_id);
        assert_eq!(LabelScheme::FourWay.map(&r.raw_label).unwrap(), Some(m.label));
        assert_eq!(r.asr_transcript.is_empty(), m.asr_missing);
        per_label[m.label] += 1;
    }
    assert_eq!(per_label, [40; 4]);
    let sessions: BTreeSet<u32> = records.iter().map(|r| r.session.unwrap()).collect();
    assert_eq!(sessions, (1..=5).collect());
    let speakers: BTreeSet<(u32, &str)> =
        records.iter().map(|r| (r.session.unwrap(), r.speaker.as_deref().unwrap())).collect();
    assert_eq!(speakers.len(), 10);
    assert_eq!(s.n_asr_missing, 16);
}

#[test]
fn ambiguous_text_carries_no_label() {
    let utts = plan_corpus(&SynthConfig::default()).unwrap();
    let mut labels_of: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for u in utts.iter().filter(|u| u.meta.ambiguous) {
        labels_of.entry(u.record.ref_transcript.as_str()).or_default().insert(u.meta.label);
    }
    assert!(!labels_of.is_empty());
    for (text, labels) in &labels_of {
        assert_eq!(labels.len(), 4, "{text:?} only seen with {labels:?}");
    }
    // and the other utterances' words never overlap with them
    let ambiguous_words: BTreeSet<&str> = labels_of.keys().flat_map(|t| t.split_whitespace()).collect();
    for u in utts.iter().filter(|u| !u.meta.ambiguous) {
        for w in u.record.ref_transcript.split_whitespace() {
            assert!(!ambiguous_words.contains(w), "{w} in {:?}", u.record.ref_transcript);
        }
    }
}

#[test]
fn contours_survive_the_pitch_tracker() {
    let cfg = SynthConfig { n_dialogues: 20, ..Default::default() };
    let utts = plan_corpus(&cfg).unwrap();
    let mut wrong = Vec::new();
    for u in &utts {
        let track = extract_pitch(&render_audio(u, cfg.sample_rate), &FramingSpec::SHORT).unwrap();
        let log_pitch: Vec<f64> = track.frames.iter().map(|f| f.log_pitch).collect();
        let pov: Vec<f64> = track.frames.iter().map(|f| f.pov).collect();
        let got = classify_contour(&log_pitch, &pov, 0.5);
        if got != Some(u.meta.contour) {
            wrong.push((u.meta.utt_id.clone(), u.meta.contour, got));
        }
    }
    let rate = 1.0 - wrong.len() as f64 / utts.len() as f64;
    assert!(rate > 0.99, "recovered {rate}: {wrong:?}");
}
