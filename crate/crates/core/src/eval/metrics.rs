use crate::error::{invalid_input, Result};
use serde::{Deserialize, Serialize};

/// Accuracy figures of one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Overall accuracy: trace / total.
    pub wa: f64,
    /// Mean of per-class recalls over classes with support.
    pub ua: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Classes left out of UA because they have no test samples.
    pub excluded: Vec<usize>,
}

impl MetricReport {
    pub fn n_classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> usize {
        self.confusion[class].iter().sum()
    }

    pub fn recall(&self, class: usize) -> Option<f64> {
        let s = self.support(class);
        (s > 0).then(|| self.confusion[class][class] as f64 / s as f64)
    }
}

pub fn compute_metrics(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<MetricReport> {
    if predictions.len() != labels.len() {
        return Err(invalid_input(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(invalid_input("no samples to score"));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= n_classes || y >= n_classes {
            return Err(invalid_input(format!("class index out of range for {n_classes} classes")));
        }
        confusion[y][p] += 1;
    }
    let total = labels.len() as f64;
    let trace: usize = (0..n_classes).map(|k| confusion[k][k]).sum();
    let mut recalls = Vec::new();
    let mut excluded = Vec::new();
    for (k, row) in confusion.iter().enumerate() {
        let support: usize = row.iter().sum();
        if support == 0 {
            excluded.push(k);
        } else {
            recalls.push(row[k] as f64 / support as f64);
        }
    }
    if !excluded.is_empty() {
        log::warn!("classes {excluded:?} have no test samples; left out of UA");
    }
    Ok(MetricReport {
        wa: trace as f64 / total,
        ua: recalls.iter().sum::<f64>() / recalls.len() as f64,
        confusion,
        excluded,
    })
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
