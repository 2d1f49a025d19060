mod common;

use common::*;
use emorec::eval::*;
use proptest::prelude::*;
use std::collections::{BTreeSet, HashMap};

fn speakers_of(records: &[ManifestRecord], ids: &[String]) -> BTreeSet<(u32, String)> {
    let by_id: HashMap<&str, &ManifestRecord> = records.iter().map(|r| (r.utt_id.as_str(), r)).collect();
    ids.iter().map(|id| (by_id[id.as_str()].session.unwrap(), by_id[id.as_str()].speaker.clone().unwrap())).collect()
}

#[test]
fn session_plan() {
    let records = speaker_manifest(5, 12);
    let plan = make_folds(&records, FoldScheme::Session5).unwrap();
    audit_folds(&records, &plan).unwrap();
    assert_eq!(plan.folds.len(), 5);
    for (i, fold) in plan.folds.iter().enumerate() {
        let test = speakers_of(&records, &fold.test);
        let train = speakers_of(&records, &fold.train);
        assert_eq!(test.len(), 2);
        assert!(test.iter().all(|(s, _)| *s == i as u32 + 1));
        assert_eq!(train.len(), 8);
        assert!(train.is_disjoint(&test));
    }
}

#[test]
fn speaker_plan() {
    let records = speaker_manifest(5, 7);
    let plan = make_folds(&records, FoldScheme::Speaker10).unwrap();
    audit_folds(&records, &plan).unwrap();
    assert_eq!(plan.folds.len(), 10);
    let mut tested = BTreeSet::new();
    for fold in &plan.folds {
        let test = speakers_of(&records, &fold.test);
        assert_eq!(test.len(), 1);
        assert_eq!(speakers_of(&records, &fold.train).len(), 9);
        tested.extend(test);
    }
    assert_eq!(tested.len(), 10);
}

#[test]
fn single_split_tests_the_last_session() {
    let records = speaker_manifest(5, 4);
    let plan = make_folds(&records, FoldScheme::SingleSession5).unwrap();
    audit_folds(&records, &plan).unwrap();
    assert_eq!(plan.folds.len(), 1);
    assert!(speakers_of(&records, &plan.folds[0].test).iter().all(|(s, _)| *s == 5));
    assert_eq!(plan.folds[0].train.len(), 4 * 2 * 4);
}

#[test]
fn audits_catch_broken_plans() {
    let records = speaker_manifest(5, 6);
    let good = make_folds(&records, FoldScheme::Session5).unwrap();

    // a test utterance leaks into training: its speaker is on both sides
    let mut leak = good.clone();
    let moved = leak.folds[0].test.pop().unwrap();
    leak.folds[0].train.push(moved);
    assert!(audit_folds(&records, &leak).is_err());

    // an utterance dropped from a fold
    let mut short = good.clone();
    short.folds[2].train.pop();
    assert!(audit_folds(&records, &short).is_err());

    // two folds test the same session
    let mut twice = good.clone();
    twice.folds[1] = twice.folds[0].clone();
    assert!(audit_folds(&records, &twice).is_err());

    // unknown utterance
    let mut ghost = good;
    ghost.folds[0].test[0] = "nobody".into();
    assert!(audit_folds(&records, &ghost).is_err());
}

#[test]
fn missing_metadata_is_an_error() {
    let mut records = speaker_manifest(2, 2);
    records[1].speaker = None;
    assert!(make_folds(&records, FoldScheme::Session5).is_err());
    let mut records = speaker_manifest(2, 2);
    records[0].session = None;
    assert!(make_folds(&records, FoldScheme::Speaker10).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn plans_pass_their_own_audit(sessions in 2u32..7, per in 1usize..9, drop in prop::collection::vec(any::<bool>(), 0..40)) {
        // uneven speakers: drop some utterances but keep at least one per speaker
        let mut records = speaker_manifest(sessions, per);
        let mut i = 0;
        records.retain(|r| {
            i += 1;
            r.utt_id.ends_with("_000") || !drop.get(i).copied().unwrap_or(false)
        });
        for scheme in [FoldScheme::Session5, FoldScheme::Speaker10, FoldScheme::SingleSession5] {
            let plan = make_folds(&records, scheme).unwrap();
            prop_assert!(audit_folds(&records, &plan).is_ok());
            let expected = match scheme {
                FoldScheme::Session5 => sessions as usize,
                FoldScheme::Speaker10 => 2 * sessions as usize,
                FoldScheme::SingleSession5 => 1,
            };
            prop_assert_eq!(plan.folds.len(), expected);
        }
    }
}
