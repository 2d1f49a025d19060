use super::FeatureMatrix;
use crate::error::{shape_err, Result};
use log::warn;

/// Dimensions that were left unscaled because their dialogue-level standard
/// deviation was zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizationReport {
    /// `(dialogue index, feature dimension)` pairs.
    pub unscaled: Vec<(usize, usize)>,
}

/// Per dialogue, divides each dimension by its standard deviation over all of
/// the dialogue's frames; then subtracts each utterance's own mean.
///
/// `dialogues[i]` holds every utterance of dialogue `i`. A dimension that is
/// constant across a dialogue is not scaled (and is reported), but still
/// mean-subtracted.
pub fn normalize_features(dialogues: &mut [Vec<FeatureMatrix>]) -> Result<NormalizationReport> {
    let mut report = NormalizationReport::default();
    for (di, utts) in dialogues.iter_mut().enumerate() {
        let Some(first) = utts.first() else { continue };
        let dim = first.dim();
        if let Some(bad) = utts.iter().find(|u| u.dim() != dim) {
            return Err(shape_err(format!(
                "dialogue {di}: utterance widths differ ({dim} vs {})",
                bad.dim()
            )));
        }
        let mut sum = vec![0.0; dim];
        let mut count = 0usize;
        for u in utts.iter() {
            for t in 0..u.frames() {
                for (s, v) in sum.iter_mut().zip(u.row(t)) {
                    *s += v;
                }
            }
            count += u.frames();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; dim];
        for u in utts.iter() {
            for t in 0..u.frames() {
                for ((acc, v), m) in var.iter_mut().zip(u.row(t)).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let scale: Vec<Option<f64>> = var
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let std = (v / count as f64).sqrt();
                if std > 1e-12 {
                    Some(1.0 / std)
                } else {
                    warn!("dialogue {di}: dimension {d} is constant; left unscaled");
                    report.unscaled.push((di, d));
                    None
                }
            })
            .collect();

        for u in utts.iter_mut() {
            let frames = u.frames();
            let vals = u.values_mut();
            for row in vals.chunks_exact_mut(dim) {
                for (v, s) in row.iter_mut().zip(&scale) {
                    if let Some(s) = s {
                        *v *= s;
                    }
                }
            }
            let mut umean = vec![0.0; dim];
            for row in vals.chunks_exact(dim) {
                for (m, v) in umean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            for m in umean.iter_mut() {
                *m /= frames as f64;
            }
            for row in vals.chunks_exact_mut(dim) {
                for (v, m) in row.iter_mut().zip(&umean) {
                    *v -= m;
                }
            }
        }
    }
    Ok(report)
}
