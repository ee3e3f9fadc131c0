//! Pure, allocation-only building blocks for turning dashcam crash footage
//! into simulator scenarios.
//!
//! - [`scenic`]: lexer, parser, validator and canonical printer for the
//!   supported SCENIC dialect, plus syntactic feature hints and the
//!   feature-level tree edits used by the deterministic mock model.
//! - [`features`]: the ten-entry driving feature taxonomy, feature vectors,
//!   the thresholded similarity gate and feedback sentences.
//! - [`sampling`]: uniform frame index selection.
//!
//! Nothing in this crate touches the filesystem, the network or a clock.
#![no_std]

extern crate alloc;

pub mod features;
pub mod sampling;
pub mod scenic;

pub use features::{
    Direction, FeatureDescriptor, FeatureId, FeatureKind, FeatureTaxonomy, FeatureVector,
    MetricError, SimilarityReport, ThresholdConfig, Violation,
};
pub use scenic::{Catalog, Diagnostic, ScenarioTree, ScenicScript, Severity, Span};
