//! Mini-batch training with momentum SGD under a newbob schedule.

mod newbob;
mod optim;

pub use newbob::{newbob_step, NewbobState, Phase};
pub use optim::Sgd;

use crate::error::{invalid_input, Error, Result};
use crate::eval::{compute_metrics, MetricReport};
use crate::model::{ModelInput, TwoBranchModel};
use crate::nn::{Dropout, ParamStore};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub dropout: f64,
    pub momentum: f64,
    pub learning_rate: f64,
    pub improve_threshold: f64,
    /// Share of the training utterances held out for the schedule.
    pub validation_fraction: f64,
    /// Margin blend weight in epoch 1; multiplied by `margin_blend_decay`
    /// every later epoch. Zero trains on the pure margin throughout.
    /// Starting near plain softmax avoids the flat region of `ψ` around
    /// `θ = π/2`, where a freshly initialised model sits.
    pub margin_blend: f64,
    pub margin_blend_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 60,
            seed: 0,
            dropout: 0.5,
            momentum: 0.9,
            learning_rate: 5e-5,
            improve_threshold: 0.005,
            validation_fraction: 0.1,
            margin_blend: 10.0,
            margin_blend_decay: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must be in [0, 1)");
        }
        if !(self.margin_blend >= 0.0 && self.margin_blend.is_finite()) {
            return bad("margin_blend must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.margin_blend_decay) {
            return bad("margin_blend_decay must be in [0, 1]");
        }
        Ok(())
    }
}

/// One labelled utterance ready for the model.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub id: &'a str,
    pub input: ModelInput<'a>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_wa: f64,
    pub val_ua: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub best_params: ParamStore,
    /// 1-based epoch of the best validation WA; ties go to the later epoch.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub halted: bool,
    /// Every utterance id read during the fit.
    pub accessed: BTreeSet<String>,
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over a simple combination
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the dropout masks for sample `position` of `epoch`.
pub fn dropout_seed(seed: u64, epoch: usize, position: usize) -> u64 {
    mix(mix(seed, epoch as u64 + 1), position as u64 + 1)
}

/// One pass over `data` in shuffled mini-batches. The shuffle and every
/// dropout mask derive from `(cfg.seed, epoch)`, so a repeated call gives the
/// same result.
pub fn train_epoch(
    model: &mut TwoBranchModel,
    data: &[Example],
    cfg: &TrainConfig,
    epoch: usize,
    lr: f64,
    opt: &mut Sgd,
) -> Result<EpochStats> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid_input("empty training split"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64)));
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
        let batch: Vec<(ModelInput, usize)> = chunk.iter().map(|&i| (data[i].input, data[i].label)).collect();
        let base = b * cfg.batch_size;
        let rate = cfg.dropout;
        let seed = cfg.seed;
        let dropout = move |k: usize| {
            Dropout::train(rate, ChaCha8Rng::seed_from_u64(dropout_seed(seed, epoch, base + k)))
                .expect("rate validated")
        };
        let outcome = model.batch_loss(&batch, &dropout)?;
        if !outcome.loss.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite loss in epoch {epoch}, batch {b}")));
        }
        loss_sum += outcome.loss * chunk.len() as f64;
        correct += outcome.correct;
        opt.step(model.params_mut(), &outcome.grads, lr);
    }
    Ok(EpochStats { loss: loss_sum / data.len() as f64, accuracy: correct as f64 / data.len() as f64 })
}

/// Predictions for `data` in evaluation mode.
pub fn predict_all(model: &TwoBranchModel, data: &[Example]) -> Result<Vec<usize>> {
    data.par_iter().map(|e| model.predict(&e.input)).collect()
}

pub fn evaluate(model: &TwoBranchModel, data: &[Example]) -> Result<MetricReport> {
    let preds = predict_all(model, data)?;
    let labels: Vec<usize> = data.iter().map(|e| e.label).collect();
    compute_metrics(&preds, &labels, model.n_classes())
}

/// Trains until newbob halts or `max_epochs`, scoring each epoch on `val`
/// and keeping the parameters with the best validation WA. On return the
/// model holds those parameters.
pub fn fit(model: &mut TwoBranchModel, train: &[Example], val: &[Example], cfg: &TrainConfig) -> Result<FitResult> {
    let train_ids: HashSet<&str> = train.iter().map(|e| e.id).collect();
    if let Some(e) = val.iter().find(|e| train_ids.contains(e.id)) {
        return Err(invalid_input(format!("utterance {} is in both training and validation", e.id)));
    }
    if val.is_empty() {
        return Err(invalid_input("empty validation split"));
    }
    let mut result = fit_with(model, train, cfg, &mut |m: &TwoBranchModel| {
        let r = evaluate(m, val)?;
        Ok((r.wa, r.ua))
    })?;
    result.accessed.extend(val.iter().map(|e| e.id.to_string()));
    Ok(result)
}

/// [`fit`] with a caller-supplied validation metric `(WA, UA)`.
pub fn fit_with(
    model: &mut TwoBranchModel,
    train: &[Example],
    cfg: &TrainConfig,
    validate: &mut dyn FnMut(&TwoBranchModel) -> Result<(f64, f64)>,
) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(invalid_input("empty training split"));
    }
    let mut sched = NewbobState::new(cfg.learning_rate, cfg.improve_threshold);
    let mut opt = Sgd::new(cfg.momentum);
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let blend0 = model.config().margin.blend;
    let mut blend = cfg.margin_blend;
    for epoch in 1..=cfg.max_epochs {
        let lr = sched.lr;
        model.set_margin_blend(blend)?;
        let stats = train_epoch(model, train, cfg, epoch, lr, &mut opt);
        model.set_margin_blend(blend0)?;
        let stats = stats?;
        blend *= cfg.margin_blend_decay;
        let (wa, ua) = validate(model)?;
        log::info!(
            "epoch {epoch}: lr {lr:.3e} loss {:.4} train acc {:.3} val WA {wa:.4} UA {ua:.4}",
            stats.loss,
            stats.accuracy
        );
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: stats.loss,
            train_accuracy: stats.accuracy,
            val_wa: wa,
            val_ua: ua,
        });
        if best.as_ref().is_none_or(|(b, _, _)| wa >= *b) {
            best = Some((wa, epoch, model.params().clone()));
        }
        sched.step(wa);
        if sched.halt {
            break;
        }
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    model.params_mut().copy_from(&best_params)?;
    Ok(FitResult {
        best_params,
        best_epoch,
        halted: sched.halt,
        history,
        accessed: train.iter().map(|e| e.id.to_string()).collect(),
    })
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,lr,train_loss,val_WA,val_UA\n");
    for r in history {
        let _ = writeln!(out, "{},{:e},{:.6},{:.6},{:.6}", r.epoch, r.lr, r.train_loss, r.val_wa, r.val_ua);
    }
    out
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    std::fs::write(path, history_csv(history))?;
    Ok(())
}
