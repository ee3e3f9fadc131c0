use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FeatureId, MetricError, TAXONOMY_VERSION};

/// One probability per taxonomy entry, in taxonomy order. Serialized as
/// `{"taxonomy_version": .., "values": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVector", into = "RawVector")]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricError> {
        if values.len() != FeatureId::COUNT {
            return Err(MetricError::DimensionMismatch {
                expected: FeatureId::COUNT,
                found: values.len(),
            });
        }
        if let Some((index, &value)) =
            values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(MetricError::ProbabilityOutOfRange { index, value });
        }
        Ok(FeatureVector { values })
    }

    /// 1.0 for every feature in `present`, 0.0 elsewhere.
    pub fn indicator(present: &BTreeSet<FeatureId>) -> Self {
        let values = FeatureId::ALL
            .iter()
            .map(|id| if present.contains(id) { 1.0 } else { 0.0 })
            .collect();
        FeatureVector { values }
    }

    pub fn get(&self, id: FeatureId) -> f64 {
        self.values[id.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVector {
    taxonomy_version: String,
    values: Vec<f64>,
}

impl TryFrom<RawVector> for FeatureVector {
    type Error = MetricError;

    fn try_from(raw: RawVector) -> Result<Self, Self::Error> {
        if raw.taxonomy_version != TAXONOMY_VERSION {
            return Err(MetricError::TaxonomyVersion { found: raw.taxonomy_version });
        }
        FeatureVector::new(raw.values)
    }
}

impl From<FeatureVector> for RawVector {
    fn from(v: FeatureVector) -> Self {
        RawVector { taxonomy_version: TAXONOMY_VERSION.into(), values: v.values }
    }
}
