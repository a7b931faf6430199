//! Metrics, reports and the end-to-end experiment pipeline.

mod experiment;
mod metrics;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use experiment::{
    build_extractor, predict_instances, run_experiment, sibling_vocabulary, ExperimentOutcome, Prediction,
    UnlabeledInstance,
};
pub use metrics::{confusion_matrix, metrics, ClassMetrics, ConfusionMatrix, Metrics};

use crate::classifier::{ClassifierKind, TreeParams};
use crate::corpus::Granularity;
use crate::error::{Error, Result};

/// What was run, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEcho {
    pub seed: u64,
    pub scalar: String,
    pub split_ratio: f64,
    pub granularity: Granularity,
    /// SHA-256 over the train and test id lists; equal digests mean equal splits.
    pub split_digest: String,
    pub n_train: usize,
    pub n_test: usize,
    pub augmented: bool,
    pub n_train_after_augment: usize,
    pub feature_blocks: Vec<String>,
    pub providers: Vec<String>,
    pub vocabulary_size: usize,
    pub feature_dim: usize,
    pub layout_hash: String,
    pub classifier: ClassifierKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_params: Option<TreeParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub experiment: ExperimentEcho,
    pub metrics: Metrics,
}

impl EvalReport {
    pub fn render(&self) -> String {
        let e = &self.experiment;
        let mut s = String::new();
        let _ = writeln!(s, "experiment     {}", self.name);
        let _ = writeln!(s, "classifier     {}", e.classifier);
        let _ = writeln!(s, "features       {}", e.feature_blocks.join(", "));
        let _ = writeln!(s, "split          {} train / {} test ({}, ratio {}, seed {})", e.n_train, e.n_test, granularity_name(e.granularity), e.split_ratio, e.seed);
        if e.augmented {
            let _ = writeln!(s, "augmented      {} training instances", e.n_train_after_augment);
        }
        s.push_str(&self.metrics.render());
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e))
    }
}

fn granularity_name(g: Granularity) -> &'static str {
    match g {
        Granularity::Target => "target",
        Granularity::Comment => "comment",
    }
}

/// Comparison table over several reports, best accuracy first.
/// Ties keep the order in which reports were given.
pub fn compare(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| b.metrics.accuracy.total_cmp(&a.metrics.accuracy));
    let width = rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(0).max(5);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>12}  {:>12}  {:>11}  {:>13}  {:>10}",
        "Model", "Accuracy (%)", "Macro-F1 (%)", "W-F1 (%)", "Precision (%)", "Recall (%)"
    );
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{:<width$}  {:>12.2}  {:>12.2}  {:>11.2}  {:>13.2}  {:>10.2}",
            r.name,
            m.accuracy * 100.0,
            m.macro_f1 * 100.0,
            m.weighted_f1 * 100.0,
            m.macro_precision * 100.0,
            m.macro_recall * 100.0
        );
    }
    s
}
