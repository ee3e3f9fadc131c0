//! Driving feature taxonomy, probability vectors, the per-feature similarity
//! gate and the natural-language feedback derived from it.

mod feedback;
mod similarity;
mod taxonomy;
mod vector;

pub use feedback::{parse_feedback, synthesize_feedback};
pub use similarity::{SimilarityReport, Violation, similarity};
pub use taxonomy::{
    FeatureDescriptor, FeatureId, FeatureKind, FeatureTaxonomy, TAXONOMY_VERSION, ThresholdConfig,
    default_taxonomy,
};
pub use vector::FeatureVector;

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Which way a violated feature is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Present in the real video, weaker or absent in simulation (gap < 0).
    MissingInSim,
    /// Stronger in simulation than in the real video (gap > 0).
    ExtraInSim,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricError {
    DimensionMismatch { expected: usize, found: usize },
    ProbabilityOutOfRange { index: usize, value: f64 },
    InvalidThreshold { feature: FeatureId, value: f64 },
    EmptyViolations,
    TaxonomyVersion { found: String },
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::DimensionMismatch { expected, found } => {
                write!(f, "feature vector has {found} components, expected {expected}")
            }
            MetricError::ProbabilityOutOfRange { index, value } => {
                write!(f, "component {index} = {value} is not a probability in [0, 1]")
            }
            MetricError::InvalidThreshold { feature, value } => {
                write!(f, "threshold for `{}` must lie in (0, 1], got {value}", feature.as_str())
            }
            MetricError::EmptyViolations => f.write_str("feedback requires at least one violation"),
            MetricError::TaxonomyVersion { found } => {
                write!(f, "feature vector uses taxonomy `{found}`, expected `{TAXONOMY_VERSION}`")
            }
        }
    }
}

impl core::error::Error for MetricError {}
