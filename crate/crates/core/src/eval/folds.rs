use super::ManifestRecord;
use crate::error::{invalid_input, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldScheme {
    /// Leave one session (both its speakers) out.
    Session5,
    /// Leave one speaker out.
    Speaker10,
    /// A single split: every session but the last trains, the last tests.
    SingleSession5,
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FoldScheme::Session5 => "session5",
            FoldScheme::Speaker10 => "speaker10",
            FoldScheme::SingleSession5 => "single-session5",
        })
    }
}

impl FromStr for FoldScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "session5" => Ok(FoldScheme::Session5),
            "speaker10" => Ok(FoldScheme::Speaker10),
            "single-session5" | "single_session5" => Ok(FoldScheme::SingleSession5),
            other => Err(Error::InvalidConfig(format!(
                "unknown fold scheme {other:?} (session5, speaker10, single-session5)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: FoldScheme,
    pub folds: Vec<Fold>,
}

fn speaker_key(r: &ManifestRecord) -> Result<(u32, String)> {
    let session = r
        .session
        .ok_or_else(|| invalid_input(format!("utterance {} has no session", r.utt_id)))?;
    match r.speaker.as_deref() {
        Some(s) if !s.is_empty() => Ok((session, s.to_string())),
        _ => Err(invalid_input(format!("utterance {} has no speaker", r.utt_id))),
    }
}

/// Splits utterances by session or speaker. Speakers are keyed by
/// `(session, speaker)` so the usual per-session `F`/`M` names stay distinct.
pub fn make_folds(records: &[ManifestRecord], scheme: FoldScheme) -> Result<FoldPlan> {
    let mut by_group: BTreeMap<(u32, String), Vec<String>> = BTreeMap::new();
    for r in records {
        let key = speaker_key(r)?;
        by_group.entry(key).or_default().push(r.utt_id.clone());
    }
    if by_group.is_empty() {
        return Err(invalid_input("no utterances to split"));
    }
    let sessions: BTreeSet<u32> = by_group.keys().map(|k| k.0).collect();
    let test_groups: Vec<(String, Vec<(u32, String)>)> = match scheme {
        FoldScheme::Session5 => sessions
            .iter()
            .map(|s| (format!("session{s}"), by_group.keys().filter(|k| k.0 == *s).cloned().collect()))
            .collect(),
        FoldScheme::Speaker10 => by_group
            .keys()
            .map(|k| (format!("session{}-{}", k.0, k.1), vec![k.clone()]))
            .collect(),
        FoldScheme::SingleSession5 => {
            let last = *sessions.iter().next_back().unwrap();
            if sessions.len() < 2 {
                return Err(invalid_input("single split needs at least two sessions"));
            }
            vec![(format!("session{last}"), by_group.keys().filter(|k| k.0 == last).cloned().collect())]
        }
    };
    let folds = test_groups
        .into_iter()
        .map(|(name, groups)| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (key, ids) in &by_group {
                if groups.contains(key) {
                    test.extend(ids.iter().cloned());
                } else {
                    train.extend(ids.iter().cloned());
                }
            }
            Fold { name, train, test }
        })
        .collect();
    Ok(FoldPlan { scheme, folds })
}

/// Checks a plan against the manifest: no speaker on both sides of a fold,
/// disjoint and complete splits, and (for the cross-validation schemes)
/// every utterance tested exactly once.
pub fn audit_folds(records: &[ManifestRecord], plan: &FoldPlan) -> Result<()> {
    let speaker: HashMap<&str, (u32, String)> =
        records.iter().map(|r| Ok((r.utt_id.as_str(), speaker_key(r)?))).collect::<Result<_>>()?;
    let lookup = |id: &str| {
        speaker
            .get(id)
            .cloned()
            .ok_or_else(|| invalid_input(format!("fold mentions unknown utterance {id}")))
    };
    let mut tested: HashMap<&str, usize> = HashMap::new();
    for fold in &plan.folds {
        let train: BTreeSet<(u32, String)> = fold.train.iter().map(|id| lookup(id)).collect::<Result<_>>()?;
        let test: BTreeSet<(u32, String)> = fold.test.iter().map(|id| lookup(id)).collect::<Result<_>>()?;
        if let Some(shared) = train.intersection(&test).next() {
            return Err(invalid_input(format!(
                "fold {}: speaker {}/{} is in both train and test",
                fold.name, shared.0, shared.1
            )));
        }
        if plan.scheme == FoldScheme::Speaker10 && test.len() != 1 {
            return Err(invalid_input(format!("fold {} tests {} speakers", fold.name, test.len())));
        }
        if fold.train.len() + fold.test.len() != records.len() {
            return Err(invalid_input(format!("fold {} does not cover the corpus", fold.name)));
        }
        let ids: BTreeSet<&str> = fold.train.iter().chain(&fold.test).map(String::as_str).collect();
        if ids.len() != records.len() {
            return Err(invalid_input(format!("fold {} repeats utterances", fold.name)));
        }
        for id in &fold.test {
            *tested.entry(id.as_str()).or_default() += 1;
        }
    }
    if plan.scheme != FoldScheme::SingleSession5 {
        for r in records {
            let n = tested.get(r.utt_id.as_str()).copied().unwrap_or(0);
            if n != 1 {
                return Err(invalid_input(format!("utterance {} is tested {n} times", r.utt_id)));
            }
        }
    }
    Ok(())
}
