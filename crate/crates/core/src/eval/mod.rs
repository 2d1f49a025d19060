//! Label schemes, metrics, fold construction and cross-validation.

mod corpus;
mod cv;
mod folds;
mod labels;
mod manifest;
mod metrics;

pub use corpus::{Corpus, CorpusNeeds, CorpusPaths, TextCondition, TextSource, UtteranceFeatures};
pub use cv::{
    predict_split, prediction_metrics, run_cv, summary_table, train_split, CvReport, CvSetup, FoldOutcome, Prediction,
};
pub use folds::{audit_folds, make_folds, Fold, FoldPlan, FoldScheme};
pub use labels::{map_labels, LabelScheme};
pub use manifest::{parse_manifest, read_manifest, write_manifest, ManifestRecord};
pub use metrics::{compute_metrics, mean_std, MetricReport};
