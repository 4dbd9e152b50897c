//! Evaluation metrics over labeled predictions: accuracy, precision, recall
//! and F1, overall and per category. Phishing is the positive class.
//!
//! Zero-denominator metrics are reported as explicitly undefined (`None` /
//! JSON `null`), never silently coerced to 0 or 1.

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

/// TP/TN/FP/FN counts with phishing as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Tally (predicted, actual) label pairs into confusion counts.
pub fn confusion(pairs: &[(Label, Label)]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for &(predicted, actual) in pairs {
        match (predicted, actual) {
            (Label::Phishing, Label::Phishing) => c.tp += 1,
            (Label::Legitimate, Label::Legitimate) => c.tn += 1,
            (Label::Phishing, Label::Legitimate) => c.fp += 1,
            (Label::Legitimate, Label::Phishing) => c.fn_ += 1,
        }
    }
    c
}

/// (tp + tn) / total.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Undefined);
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

/// tp / (tp + fp).
pub fn precision(c: &ConfusionCounts) -> Result<f64> {
    let denom = c.tp + c.fp;
    if denom == 0 {
        return Err(Error::Undefined);
    }
    Ok(c.tp as f64 / denom as f64)
}

/// tp / (tp + fn).
pub fn recall(c: &ConfusionCounts) -> Result<f64> {
    let denom = c.tp + c.fn_;
    if denom == 0 {
        return Err(Error::Undefined);
    }
    Ok(c.tp as f64 / denom as f64)
}

/// Harmonic mean 2pr / (p + r).
pub fn f1(p: f64, r: f64) -> Result<f64> {
    if p + r == 0.0 {
        return Err(Error::Undefined);
    }
    Ok(2.0 * p * r / (p + r))
}

/// Overall metrics plus the raw counts they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub counts: ConfusionCounts,
}

/// One category's slice of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub name: String,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub n: u64,
}

/// Overall and per-category evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: OverallMetrics,
    pub per_category: Vec<CategoryMetrics>,
}

/// Build the full report from (predicted, actual, category) triples.
///
/// Overall metrics are micro-averaged (pooled counts); the per-category
/// breakdown is there for macro inspection. Categories are sorted by name
/// and categories with zero samples simply never appear.
pub fn per_category_report(pairs: &[(Label, Label, String)]) -> EvalReport {
    let flat: Vec<(Label, Label)> = pairs.iter().map(|&(p, a, _)| (p, a)).collect();
    let counts = confusion(&flat);

    let p = precision(&counts).ok();
    let r = recall(&counts).ok();
    let overall = OverallMetrics {
        accuracy: accuracy(&counts).ok(),
        precision: p,
        recall: r,
        f1: match (p, r) {
            (Some(p), Some(r)) => f1(p, r).ok(),
            _ => None,
        },
        counts,
    };

    let mut by_cat: std::collections::BTreeMap<&str, Vec<(Label, Label)>> = Default::default();
    for (predicted, actual, category) in pairs {
        by_cat
            .entry(category.as_str())
            .or_default()
            .push((*predicted, *actual));
    }
    let per_category = by_cat
        .into_iter()
        .map(|(name, pairs)| {
            let c = confusion(&pairs);
            CategoryMetrics {
                name: name.to_string(),
                accuracy: accuracy(&c).ok(),
                precision: precision(&c).ok(),
                n: c.total(),
            }
        })
        .collect();

    EvalReport {
        overall,
        per_category,
    }
}

/// Format a ratio as a percentage with two decimals, rounding half up,
/// e.g. `0.8571` -> `"85.71%"`. Undefined metrics print as `"undefined"`.
pub fn format_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}%", (v * 10000.0).round() / 100.0),
        None => "undefined".to_string(),
    }
}
