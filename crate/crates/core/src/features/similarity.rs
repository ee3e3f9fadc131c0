use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Direction, FeatureId, FeatureVector, MetricError, ThresholdConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub feature: FeatureId,
    pub gap: f64,
    pub threshold: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    /// `sim - real` per feature, taxonomy order.
    pub gaps: Vec<f64>,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

impl SimilarityReport {
    pub fn violated_features(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.violations.iter().map(|v| v.feature)
    }
}

/// Gaps are `sim - real`, so a feature the simulation lacks comes out
/// negative. A component violates when `|gap| > threshold`; equality passes.
pub fn similarity(
    real: &FeatureVector,
    sim: &FeatureVector,
    cfg: &ThresholdConfig,
) -> Result<SimilarityReport, MetricError> {
    let expected = cfg.taxonomy().len();
    for v in [real, sim] {
        if v.len() != expected {
            return Err(MetricError::DimensionMismatch { expected, found: v.len() });
        }
    }

    let mut gaps = Vec::with_capacity(expected);
    let mut violations = Vec::new();
    for id in FeatureId::ALL {
        let gap = sim.get(id) - real.get(id);
        let threshold = cfg.threshold(id);
        if gap.abs() > threshold {
            let direction = if gap < 0.0 { Direction::MissingInSim } else { Direction::ExtraInSim };
            violations.push(Violation { feature: id, gap, threshold, direction });
        }
        gaps.push(gap);
    }
    let passed = violations.is_empty();
    Ok(SimilarityReport { gaps, violations, passed })
}
