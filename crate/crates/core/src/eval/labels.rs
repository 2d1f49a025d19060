use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    FourWay,
    FiveWay,
}

const FOUR: [&str; 4] = ["happy", "angry", "sad", "neutral"];
const FIVE: [&str; 5] = ["happy", "angry", "sad", "neutral", "others"];

impl LabelScheme {
    pub fn n_classes(&self) -> usize {
        self.class_names().len()
    }

    pub fn class_names(&self) -> &'static [&'static str] {
        match self {
            LabelScheme::FourWay => &FOUR,
            LabelScheme::FiveWay => &FIVE,
        }
    }

    /// Class index of a raw corpus label, or `None` when the scheme drops it.
    /// Full names and the usual three-letter abbreviations are accepted in
    /// any case. `xxx` (annotators disagreed) is always dropped.
    pub fn map(&self, raw: &str) -> Result<Option<usize>> {
        let raw = raw.trim().to_ascii_lowercase();
        let class = match raw.as_str() {
            "happy" | "hap" | "happiness" | "excited" | "exc" | "excitement" => Some(0),
            "angry" | "ang" | "anger" => Some(1),
            "sad" | "sadness" => Some(2),
            "neutral" | "neu" => Some(3),
            "frustration" | "fru" | "frustrated" | "fear" | "fea" | "surprise" | "sur" | "disgust" | "dis"
            | "other" | "oth" => match self {
                LabelScheme::FourWay => None,
                LabelScheme::FiveWay => Some(4),
            },
            "xxx" => None,
            _ => return Err(Error::InvalidLabel(raw)),
        };
        Ok(class)
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelScheme::FourWay => "4way",
            LabelScheme::FiveWay => "5way",
        })
    }
}

impl FromStr for LabelScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "4way" | "four_way" | "4" => Ok(LabelScheme::FourWay),
            "5way" | "five_way" | "5" => Ok(LabelScheme::FiveWay),
            other => Err(Error::InvalidConfig(format!("unknown label scheme {other:?} (4way or 5way)"))),
        }
    }
}

/// Maps every raw label; returns the class per record (`None` = dropped).
pub fn map_labels<'a>(raw: impl IntoIterator<Item = &'a str>, scheme: LabelScheme) -> Result<Vec<Option<usize>>> {
    raw.into_iter().map(|r| scheme.map(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_buckets() {
        let four = LabelScheme::FourWay;
        assert_eq!(four.map("excited").unwrap(), Some(0));
        assert_eq!(four.map("Exc").unwrap(), Some(0));
        assert_eq!(four.map("frustration").unwrap(), None);
        assert_eq!(LabelScheme::FiveWay.map("fru").unwrap(), Some(4));
        assert_eq!(LabelScheme::FiveWay.map("xxx").unwrap(), None);
        assert_eq!(four.map("bored").unwrap_err().class(), "InvalidLabel");
        assert_eq!("5way".parse::<LabelScheme>().unwrap().n_classes(), 5);
    }
}
