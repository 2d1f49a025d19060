use crate::error::{Error, Result};
use crate::nn::{AttentionConfig, MarginConfig};
use crate::text::{ContextSpan, GLOVE_DIM, SENTENCE_DIM};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// FBK25 + pitch, with first differentials.
pub const AUDIO25_DIM: usize = 82;
pub const FBK250_DIM: usize = 40;
/// Largest context offset accepted on either side.
pub const MAX_SPAN: usize = 8;

/// Which input streams the model consumes. `bert` switches the TAB on; the
/// rest feed the TSB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub audio25: bool,
    pub fbk250: bool,
    pub glove: bool,
    pub bert: bool,
}

impl Default for FeatureSet {
    fn default() -> Self {
        Self { audio25: true, fbk250: true, glove: true, bert: true }
    }
}

impl FeatureSet {
    pub const NONE: FeatureSet = FeatureSet { audio25: false, fbk250: false, glove: false, bert: false };

    pub fn uses_tsb(&self) -> bool {
        self.audio25 || self.fbk250 || self.glove
    }

    pub fn uses_tab(&self) -> bool {
        self.bert
    }

    pub fn tsb_input_dim(&self) -> usize {
        AUDIO25_DIM * self.audio25 as usize + FBK250_DIM * self.fbk250 as usize + GLOVE_DIM * self.glove as usize
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.audio25, "audio25"),
            (self.fbk250, "fbk250"),
            (self.glove, "glove"),
            (self.bert, "bert"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        write!(f, "{}", names.join(","))
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    /// Comma-separated subset of `audio25,fbk250,glove,bert`.
    fn from_str(s: &str) -> Result<Self> {
        let mut set = FeatureSet::NONE;
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name.to_ascii_lowercase().as_str() {
                "audio25" => set.audio25 = true,
                "fbk250" => set.fbk250 = true,
                "glove" => set.glove = true,
                "bert" => set.bert = true,
                other => return Err(Error::InvalidConfig(format!("unknown feature stream {other:?}"))),
            }
        }
        if !set.uses_tsb() && !set.uses_tab() {
            return Err(Error::InvalidConfig("no feature stream selected".into()));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsbConfig {
    pub encoder_dim: usize,
    pub n_blocks: usize,
    pub context_offsets: Vec<isize>,
}

impl Default for TsbConfig {
    fn default() -> Self {
        Self { encoder_dim: 256, n_blocks: 4, context_offsets: vec![-2, -1, 0, 1, 2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabConfig {
    pub span: ContextSpan,
    pub proj_dim: usize,
    pub sentence_dim: usize,
}

impl Default for TabConfig {
    fn default() -> Self {
        Self { span: ContextSpan::new(3, 3), proj_dim: 128, sentence_dim: SENTENCE_DIM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub hidden_dim: usize,
    pub n_classes: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { hidden_dim: 256, n_classes: 4 }
    }
}

/// Full architecture description. Both branches share one attention
/// configuration, so one penalty weight covers both pooling layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub features: FeatureSet,
    pub tsb: TsbConfig,
    pub tab: TabConfig,
    pub fusion: FusionConfig,
    pub attention: AttentionConfig,
    pub margin: MarginConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !self.features.uses_tsb() && !self.features.uses_tab() {
            return bad("both branches are disabled".into());
        }
        if !matches!(self.fusion.n_classes, 4 | 5) {
            return bad(format!("n_classes must be 4 or 5, got {}", self.fusion.n_classes));
        }
        if self.tab.span.before > MAX_SPAN || self.tab.span.after > MAX_SPAN {
            return bad(format!("context span {} exceeds {MAX_SPAN}", self.tab.span));
        }
        if self.tsb.encoder_dim == 0 || self.tab.proj_dim == 0 || self.fusion.hidden_dim == 0 || self.tab.sentence_dim == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.features.uses_tsb() && self.tsb.context_offsets.is_empty() && self.tsb.n_blocks > 0 {
            return bad("TDNN context offsets are empty".into());
        }
        self.attention.validate()?;
        self.margin.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
