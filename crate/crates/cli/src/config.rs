//! Run configuration: a TOML file layered under command-line flags, and the
//! reproducibility stamp written next to every output.

use emorec::eval::{CorpusPaths, FoldScheme, LabelScheme, TextCondition};
use emorec::model::{FeatureSet, ModelConfig};
use emorec::synth::SynthConfig;
use emorec::text::ContextSpan;
use emorec::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub manifest: Option<PathBuf>,
    pub word_table: Option<PathBuf>,
    pub sentences_ref: Option<PathBuf>,
    pub sentences_asr: Option<PathBuf>,
    pub feature_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fold_scheme: String,
    pub labels: String,
    pub text: String,
    /// Restricts `train` / `evaluate` to one fold of the plan.
    pub fold: Option<String>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            fold_scheme: FoldScheme::Session5.to_string(),
            labels: LabelScheme::FourWay.to_string(),
            text: TextCondition::Ref.to_string(),
            fold: None,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub experiment: ExperimentConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    /// Present in stamps; ignored on input.
    #[serde(skip_serializing)]
    pub stamp: Option<toml::Table>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub word_table: Option<PathBuf>,
    pub sentences_ref: Option<PathBuf>,
    pub sentences_asr: Option<PathBuf>,
    pub feature_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub fold_scheme: Option<FoldScheme>,
    pub labels: Option<LabelScheme>,
    pub text: Option<TextCondition>,
    pub context: Option<ContextSpan>,
    pub features: Option<FeatureSet>,
    pub seed: Option<u64>,
    pub fold: Option<String>,
    pub checkpoint: Option<PathBuf>,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn absolute(p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if let Ok(abs) = std::path::absolute(&*path) {
            *path = abs;
        }
    }
}

impl RunConfig {
    /// Reads `path`; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.paths_mut() {
            rebase(base, p);
        }
        cfg.stamp = None;
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 7] {
        let d = &mut self.data;
        [
            &mut d.manifest,
            &mut d.word_table,
            &mut d.sentences_ref,
            &mut d.sentences_asr,
            &mut d.feature_dir,
            &mut d.out,
            &mut self.experiment.checkpoint,
        ]
    }

    pub fn apply(&mut self, o: Overrides) {
        let d = &mut self.data;
        let set = |dst: &mut Option<PathBuf>, src: Option<PathBuf>| {
            if src.is_some() {
                *dst = src;
            }
        };
        set(&mut d.manifest, o.manifest);
        set(&mut d.word_table, o.word_table);
        set(&mut d.sentences_ref, o.sentences_ref);
        set(&mut d.sentences_asr, o.sentences_asr);
        set(&mut d.feature_dir, o.feature_dir);
        set(&mut d.out, o.out);
        set(&mut self.experiment.checkpoint, o.checkpoint);
        if let Some(s) = o.fold_scheme {
            self.experiment.fold_scheme = s.to_string();
        }
        if let Some(l) = o.labels {
            self.experiment.labels = l.to_string();
            self.model.fusion.n_classes = l.n_classes();
        }
        if let Some(t) = o.text {
            self.experiment.text = t.to_string();
        }
        if o.fold.is_some() {
            self.experiment.fold = o.fold;
        }
        if let Some(c) = o.context {
            self.model.tab.span = c;
        }
        if let Some(f) = o.features {
            self.model.features = f;
        }
        if let Some(s) = o.seed {
            self.train.seed = s;
            self.synth.seed = s;
        }
        for p in self.paths_mut() {
            absolute(p);
        }
    }

    pub fn fold_scheme(&self) -> Result<FoldScheme, CliError> {
        self.experiment.fold_scheme.parse().map_err(CliError::from_config)
    }

    pub fn labels(&self) -> Result<LabelScheme, CliError> {
        self.experiment.labels.parse().map_err(CliError::from_config)
    }

    pub fn text(&self) -> Result<TextCondition, CliError> {
        self.experiment.text.parse().map_err(CliError::from_config)
    }

    /// Cross-field checks run before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.fold_scheme()?;
        let labels = self.labels()?;
        self.text()?;
        self.model.validate().map_err(CliError::from_config)?;
        self.train.validate().map_err(CliError::from_config)?;
        if self.model.fusion.n_classes != labels.n_classes() {
            return Err(CliError::Usage(format!(
                "model.fusion.n_classes = {} but labels {} has {} classes",
                self.model.fusion.n_classes,
                labels,
                labels.n_classes()
            )));
        }
        Ok(())
    }

    pub fn corpus_paths(&self) -> CorpusPaths {
        CorpusPaths {
            word_table: self.data.word_table.clone(),
            sentences_ref: self.data.sentences_ref.clone(),
            sentences_asr: self.data.sentences_asr.clone(),
            feature_dir: self.data.feature_dir.clone(),
        }
    }

    pub fn manifest(&self) -> Result<&Path, CliError> {
        self.data.manifest.as_deref().ok_or_else(|| CliError::Usage("no manifest given (--manifest or [data] manifest)".into()))
    }

    pub fn out(&self) -> Result<&Path, CliError> {
        self.data.out.as_deref().ok_or_else(|| CliError::Usage("no output directory given (--out or [data] out)".into()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Usage(format!("cannot serialise config: {e}")))
    }
}

/// Writes `stamp.toml` into `dir`: the resolved configuration followed by
/// its SHA-256, the seed, the engine version and the command. Feeding the
/// file back through `--config` repeats the run.
pub fn write_stamp(dir: &Path, cfg: &RunConfig, command: &str) -> Result<String, CliError> {
    let body = cfg.to_toml()?;
    let hash = hex::encode(Sha256::digest(body.as_bytes()));
    let mut stamp = toml::Table::new();
    stamp.insert("config_sha256".into(), hash.clone().into());
    stamp.insert("seed".into(), toml::Value::Integer(cfg.train.seed as i64));
    stamp.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    stamp.insert("command".into(), command.into());
    let mut wrapper = toml::Table::new();
    wrapper.insert("stamp".into(), toml::Value::Table(stamp));
    let tail = toml::to_string(&wrapper).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::create_dir_all(dir).map_err(emorec::Error::from)?;
    std::fs::write(dir.join("stamp.toml"), format!("{body}\n{tail}")).map_err(emorec::Error::from)?;
    Ok(hash)
}
