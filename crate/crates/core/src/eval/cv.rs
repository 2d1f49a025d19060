use super::{compute_metrics, mean_std, Corpus, FoldPlan, LabelScheme, MetricReport, TextCondition, TextSource};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelInput, TsbInput, TwoBranchModel};
use crate::nn::save_checkpoint;
use crate::text::ContextWindow;
use crate::train::{dropout_seed, fit, predict_all, write_history_csv, EpochRecord, Example, FitResult, TrainConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

/// Everything `run_cv` needs besides the corpus and the fold plan.
#[derive(Debug, Clone)]
pub struct CvSetup<'a> {
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub labels: LabelScheme,
    pub condition: TextCondition,
    /// Where per-fold checkpoints, histories and the reports go.
    pub out_dir: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub utt_id: String,
    pub fold: String,
    pub label: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub name: String,
    pub metrics: MetricReport,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    /// Utterance ids read while fitting this fold.
    pub accessed: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub labels: LabelScheme,
    pub condition: TextCondition,
    pub folds: Vec<FoldOutcome>,
    pub predictions: Vec<Prediction>,
    pub wa_mean: f64,
    pub wa_std: f64,
    pub ua_mean: f64,
    pub ua_std: f64,
}

impl CvReport {
    /// Metrics pooled over all folds for the test utterances in `ids`.
    pub fn subset_metrics(&self, ids: &HashSet<String>) -> Result<MetricReport> {
        let (preds, labels): (Vec<usize>, Vec<usize>) = self
            .predictions
            .iter()
            .filter(|p| ids.contains(&p.utt_id))
            .map(|p| (p.predicted, p.label))
            .unzip();
        compute_metrics(&preds, &labels, self.labels.n_classes())
    }

    /// Metrics over every prediction of every fold.
    pub fn pooled_metrics(&self) -> Result<MetricReport> {
        let (preds, labels): (Vec<usize>, Vec<usize>) =
            self.predictions.iter().map(|p| (p.predicted, p.label)).unzip();
        compute_metrics(&preds, &labels, self.labels.n_classes())
    }

    /// Machine-readable `key = value` summary. Floats are written with full
    /// round-trip precision.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "labels = \"{}\"", self.labels);
        let _ = writeln!(out, "condition = \"{}\"", self.condition);
        let _ = writeln!(out, "folds = {}", self.folds.len());
        let _ = writeln!(out, "wa_mean = {:?}", self.wa_mean);
        let _ = writeln!(out, "wa_std = {:?}", self.wa_std);
        let _ = writeln!(out, "ua_mean = {:?}", self.ua_mean);
        let _ = writeln!(out, "ua_std = {:?}", self.ua_std);
        for f in &self.folds {
            let _ = writeln!(out, "\n[fold.{}]", f.name);
            let _ = writeln!(out, "wa = {:?}", f.metrics.wa);
            let _ = writeln!(out, "ua = {:?}", f.metrics.ua);
            let _ = writeln!(out, "best_epoch = {}", f.best_epoch);
            let _ = writeln!(out, "epochs = {}", f.history.len());
            let _ = writeln!(out, "confusion = {:?}", f.metrics.confusion);
        }
        out
    }

    /// Human-readable per-fold table with the mean and standard deviation.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>8} {:>8} {:>6}", "fold", "WA(%)", "UA(%)", "epoch");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{:<16} {:>8.2} {:>8.2} {:>6}",
                f.name,
                100.0 * f.metrics.wa,
                100.0 * f.metrics.ua,
                f.best_epoch
            );
        }
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8}",
            "mean ± std",
            format!("{:.2}±{:.2}", 100.0 * self.wa_mean, 100.0 * self.wa_std),
            format!("{:.2}±{:.2}", 100.0 * self.ua_mean, 100.0 * self.ua_std)
        );
        out
    }

    pub fn predictions_tsv(&self) -> String {
        let mut out = String::from("utt_id\tfold\tlabel\tpredicted\n");
        for p in &self.predictions {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", p.utt_id, p.fold, p.label, p.predicted);
        }
        out
    }
}

/// Rows of `(system name, report)` as a results table in percent.
pub fn summary_table(title: &str, rows: &[(String, &CvReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(6).max(6);
    let mut out = format!("{title}\n");
    let _ = writeln!(out, "{:<width$}  {:>13}  {:>13}", "System", "WA (%)", "UA (%)");
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>13}  {:>13}",
            name,
            format!("{:.2} ± {:.2}", 100.0 * r.wa_mean, 100.0 * r.wa_std),
            format!("{:.2} ± {:.2}", 100.0 * r.ua_mean, 100.0 * r.ua_std)
        );
    }
    out
}

fn check_inputs(corpus: &Corpus, setup: &CvSetup) -> Result<()> {
    let f = setup.model.features;
    if setup.model.fusion.n_classes != setup.labels.n_classes() {
        return Err(Error::InvalidConfig(format!(
            "model has {} classes but the {} scheme has {}",
            setup.model.fusion.n_classes,
            setup.labels,
            setup.labels.n_classes()
        )));
    }
    if f.glove && setup.condition != TextCondition::Ref {
        return Err(Error::MissingData(format!(
            "GloVe frames need word alignments, which the {} condition's ASR transcripts lack",
            setup.condition
        )));
    }
    if f.uses_tab() {
        for source in [setup.condition.train_source(), setup.condition.test_source()] {
            if corpus.store(source).is_none() {
                return Err(Error::MissingData(format!(
                    "{} condition needs {source:?} sentence embeddings",
                    setup.condition
                )));
            }
        }
    }
    Ok(())
}

struct Prepared {
    id: String,
    label: usize,
    window: Option<ContextWindow>,
}

fn prepare(corpus: &Corpus, setup: &CvSetup, ids: &[String], source: TextSource) -> Result<Vec<Prepared>> {
    let span = setup.model.tab.span;
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let rec = corpus.record(id).ok_or_else(|| Error::InvalidInput(format!("unknown utterance {id}")))?;
        let Some(label) = setup.labels.map(&rec.raw_label)? else { continue };
        let window = if setup.model.features.uses_tab() { Some(corpus.context(id, span, source)?) } else { None };
        out.push(Prepared { id: id.clone(), label, window });
    }
    Ok(out)
}

fn examples<'a>(corpus: &'a Corpus, setup: &CvSetup, prepared: &'a [Prepared]) -> Result<Vec<Example<'a>>> {
    let f = setup.model.features;
    prepared
        .iter()
        .map(|p| {
            let feats = corpus.features(&p.id).expect("prepared ids exist");
            let need = |on: bool, t: &'a Option<crate::nn::Tensor>, name: &str| -> Result<Option<&'a crate::nn::Tensor>> {
                match (on, t) {
                    (false, _) => Ok(None),
                    (true, Some(t)) => Ok(Some(t)),
                    (true, None) => Err(Error::MissingData(format!("{name} features not loaded for {}", p.id))),
                }
            };
            let tsb = TsbInput {
                audio25: need(f.audio25, &feats.audio25, "audio25")?,
                fbk250: need(f.fbk250, &feats.fbk250, "fbk250")?,
                glove: need(f.glove, &feats.glove, "glove")?,
            };
            Ok(Example { id: &p.id, input: ModelInput { tsb, context: p.window.as_ref() }, label: p.label })
        })
        .collect()
}

/// Fits a fresh model on the labelled utterances among `train_ids`, holding
/// out `validation_fraction` of them (after a shuffle seeded by `seed`) for
/// the schedule and checkpoint selection. The model returned holds the best
/// parameters.
pub fn train_split(
    corpus: &Corpus,
    setup: &CvSetup,
    name: &str,
    train_ids: &[String],
    seed: u64,
) -> Result<(TwoBranchModel, FitResult)> {
    setup.model.validate()?;
    setup.train.validate()?;
    check_inputs(corpus, setup)?;
    let mut ids = train_ids.to_vec();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train_all = prepare(corpus, setup, &ids, setup.condition.train_source())?;
    let n_val = ((train_all.len() as f64 * setup.train.validation_fraction).round() as usize).max(1);
    if train_all.len() <= n_val {
        return Err(Error::InvalidInput(format!("{name} has too few labelled training utterances")));
    }
    let (val_part, train_part) = train_all.split_at(n_val);
    let train_ex = examples(corpus, setup, train_part)?;
    let val_ex = examples(corpus, setup, val_part)?;
    let mut cfg = setup.train.clone();
    cfg.seed = seed;
    let mut model = TwoBranchModel::new(setup.model.clone(), seed)?;
    log::info!("{name}: {} train, {} validation", train_ex.len(), val_ex.len());
    let fitted = fit(&mut model, &train_ex, &val_ex, &cfg)?;
    Ok((model, fitted))
}

/// Predictions of `model` for the labelled utterances among `ids`, using
/// the test-side text source.
pub fn predict_split(
    corpus: &Corpus,
    setup: &CvSetup,
    model: &TwoBranchModel,
    name: &str,
    ids: &[String],
) -> Result<Vec<Prediction>> {
    check_inputs(corpus, setup)?;
    let test = prepare(corpus, setup, ids, setup.condition.test_source())?;
    if test.is_empty() {
        return Err(Error::InvalidInput(format!("{name} has no labelled test utterances")));
    }
    let test_ex = examples(corpus, setup, &test)?;
    let preds = predict_all(model, &test_ex)?;
    Ok(test_ex
        .iter()
        .zip(preds)
        .map(|(e, p)| Prediction { utt_id: e.id.to_string(), fold: name.to_string(), label: e.label, predicted: p })
        .collect())
}

/// Metrics of a set of predictions.
pub fn prediction_metrics(preds: &[Prediction], n_classes: usize) -> Result<MetricReport> {
    let (p, l): (Vec<usize>, Vec<usize>) = preds.iter().map(|p| (p.predicted, p.label)).unzip();
    compute_metrics(&p, &l, n_classes)
}

/// Trains and tests one model per fold and aggregates WA/UA. Each fold holds
/// out a share of its own training utterances for the learning-rate
/// schedule and checkpoint selection.
pub fn run_cv(corpus: &Corpus, setup: &CvSetup, plan: &FoldPlan) -> Result<CvReport> {
    setup.model.validate()?;
    setup.train.validate()?;
    check_inputs(corpus, setup)?;
    if plan.folds.is_empty() {
        return Err(Error::InvalidInput("fold plan has no folds".into()));
    }
    let mut folds = Vec::new();
    let mut predictions = Vec::new();
    for (k, fold) in plan.folds.iter().enumerate() {
        let fold_seed = dropout_seed(setup.train.seed, 0, k);
        let (model, fitted) = train_split(corpus, setup, &fold.name, &fold.train, fold_seed)?;
        let preds = predict_split(corpus, setup, &model, &fold.name, &fold.test)?;
        let metrics = prediction_metrics(&preds, setup.labels.n_classes())?;
        log::info!("fold {}: WA {:.4} UA {:.4}", fold.name, metrics.wa, metrics.ua);

        if let Some(dir) = setup.out_dir {
            let fold_dir = dir.join(&fold.name);
            std::fs::create_dir_all(&fold_dir)?;
            save_checkpoint(&fold_dir.join("checkpoint.emow"), model.params())?;
            write_history_csv(&fold_dir.join("history.csv"), &fitted.history)?;
        }
        predictions.extend(preds);
        folds.push(FoldOutcome {
            name: fold.name.clone(),
            metrics,
            best_epoch: fitted.best_epoch,
            history: fitted.history,
            accessed: fitted.accessed,
        });
    }
    let was: Vec<f64> = folds.iter().map(|f| f.metrics.wa).collect();
    let uas: Vec<f64> = folds.iter().map(|f| f.metrics.ua).collect();
    let (wa_mean, wa_std) = mean_std(&was);
    let (ua_mean, ua_std) = mean_std(&uas);
    let report = CvReport {
        labels: setup.labels,
        condition: setup.condition,
        folds,
        predictions,
        wa_mean,
        wa_std,
        ua_mean,
        ua_std,
    };
    if let Some(dir) = setup.out_dir {
        std::fs::write(dir.join("report.toml"), report.key_values())?;
        std::fs::write(dir.join("report.txt"), report.table())?;
        std::fs::write(dir.join("predictions.tsv"), report.predictions_tsv())?;
        std::fs::write(dir.join("model.toml"), setup.model.to_toml()?)?;
    }
    Ok(report)
}
