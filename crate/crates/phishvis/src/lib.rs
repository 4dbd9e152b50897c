//! Phishing detection from page bytes.
//!
//! The pipeline scrapes the raw HTML of a URL (no rendering, no scripts),
//! maps every byte to a color class, lays the bytes out along a Hilbert
//! space-filling curve into a fixed 128x128 RGB image, and classifies the
//! image with a small convolutional network. Verdicts and images are cached
//! per URL so repeat checks skip the fetch and render entirely.
//!
//! Modules:
//! - [`hilbert`]: 1-D index <-> 2-D cell conversions for the layout curve
//! - [`bytevis`]: byte classification, coloring, sampling and PNG output
//! - [`fetcher`]: URL normalization and guarded HTTP scraping
//! - [`store`]: JSON-lines URL cache and dataset manifests
//! - [`classifier`]: the CNN: training, inference, persistence
//! - [`metrics`]: accuracy / precision / recall / F1 reporting
//! - [`corpus`]: deterministic synthetic HTML corpus generation
//! - [`pipeline`]: the end-to-end check with dedupe and stage timing

pub mod bytevis;
pub mod classifier;
pub mod corpus;
mod error;
pub mod fetcher;
pub mod hilbert;
pub mod metrics;
pub mod pipeline;
pub(crate) mod rng;
pub mod store;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Binary page label. Phishing is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Legitimate,
    Phishing,
}

impl Label {
    /// Class index used by the classifier: 0 = legitimate, 1 = phishing.
    pub fn class_index(self) -> usize {
        match self {
            Label::Legitimate => 0,
            Label::Phishing => 1,
        }
    }

    pub fn from_class_index(idx: usize) -> Label {
        if idx == 1 {
            Label::Phishing
        } else {
            Label::Legitimate
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Legitimate => "legitimate",
            Label::Phishing => "phishing",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        match s {
            "legitimate" => Ok(Label::Legitimate),
            "phishing" => Ok(Label::Phishing),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_round_trips_through_serde() {
        let json = serde_json::to_string(&Label::Phishing).unwrap();
        assert_eq!(json, "\"phishing\"");
        let back: Label = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Label::Phishing);
    }

    #[test]
    fn class_indices_follow_the_fixed_convention() {
        assert_eq!(Label::Legitimate.class_index(), 0);
        assert_eq!(Label::Phishing.class_index(), 1);
        assert_eq!(Label::from_class_index(0), Label::Legitimate);
        assert_eq!(Label::from_class_index(1), Label::Phishing);
    }
}
