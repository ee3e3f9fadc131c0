use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Identifier of one predefined driving feature. Declaration order is the
/// taxonomy order and therefore the vector component order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    SunnyRainy,
    UrbanHighway,
    RandomObjectOnRoad,
    LeadingVehicleCruising,
    LeadingVehicleStopped,
    ParallelVehicleCuttingIn,
    ParallelVehicleCruising,
    ParallelVehicleStopped,
    BehindVehicleOvertaking,
    OppositeVehicleTurning,
}

impl FeatureId {
    pub const COUNT: usize = 10;

    pub const ALL: [FeatureId; Self::COUNT] = [
        FeatureId::SunnyRainy,
        FeatureId::UrbanHighway,
        FeatureId::RandomObjectOnRoad,
        FeatureId::LeadingVehicleCruising,
        FeatureId::LeadingVehicleStopped,
        FeatureId::ParallelVehicleCuttingIn,
        FeatureId::ParallelVehicleCruising,
        FeatureId::ParallelVehicleStopped,
        FeatureId::BehindVehicleOvertaking,
        FeatureId::OppositeVehicleTurning,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureId::SunnyRainy => "sunny_rainy",
            FeatureId::UrbanHighway => "urban_highway",
            FeatureId::RandomObjectOnRoad => "random_object_on_road",
            FeatureId::LeadingVehicleCruising => "leading_vehicle_cruising",
            FeatureId::LeadingVehicleStopped => "leading_vehicle_stopped",
            FeatureId::ParallelVehicleCuttingIn => "parallel_vehicle_cutting_in",
            FeatureId::ParallelVehicleCruising => "parallel_vehicle_cruising",
            FeatureId::ParallelVehicleStopped => "parallel_vehicle_stopped",
            FeatureId::BehindVehicleOvertaking => "behind_vehicle_overtaking",
            FeatureId::OppositeVehicleTurning => "opposite_vehicle_turning",
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFeature;

impl FromStr for FeatureId {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureId::ALL.into_iter().find(|id| id.as_str() == s).ok_or(UnknownFeature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Environment,
    Behavior,
}

impl FeatureKind {
    /// Noun used in feedback sentences.
    pub fn noun(self) -> &'static str {
        match self {
            FeatureKind::Environment => "condition",
            FeatureKind::Behavior => "behavior",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub id: FeatureId,
    pub display_name: String,
    pub threshold: f64,
    pub kind: FeatureKind,
    /// For two-label features such as "Sunny / Rainy": the label a value of
    /// 1.0 stands for, then the label 0.0 stands for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTaxonomy {
    pub version: String,
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureTaxonomy {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, id: FeatureId) -> &FeatureDescriptor {
        &self.features[id.index()]
    }

    /// Case-insensitive lookup by display name.
    pub fn by_display_name(&self, name: &str) -> Option<&FeatureDescriptor> {
        self.features.iter().find(|d| d.display_name.eq_ignore_ascii_case(name))
    }
}

pub const TAXONOMY_VERSION: &str = "driving-10/v1";

const ENVIRONMENT_THRESHOLD: f64 = 0.3;
const BEHAVIOR_THRESHOLD: f64 = 0.2;

/// The ten predefined driving features with their default gap thresholds.
pub fn default_taxonomy() -> FeatureTaxonomy {
    let rows: [(FeatureId, &str, Option<(&str, &str)>); FeatureId::COUNT] = [
        (FeatureId::SunnyRainy, "Sunny / Rainy", Some(("Sunny", "Rainy"))),
        (FeatureId::UrbanHighway, "Urban / Highway", Some(("Urban", "Highway"))),
        (FeatureId::RandomObjectOnRoad, "Random Object on Road", None),
        (FeatureId::LeadingVehicleCruising, "Leading Vehicle Cruising", None),
        (FeatureId::LeadingVehicleStopped, "Leading Vehicle Stopped", None),
        (FeatureId::ParallelVehicleCuttingIn, "Parallel Vehicle Cutting in", None),
        (FeatureId::ParallelVehicleCruising, "Parallel Vehicle Cruising", None),
        (FeatureId::ParallelVehicleStopped, "Parallel Vehicle Stopped", None),
        (FeatureId::BehindVehicleOvertaking, "Behind Vehicle Overtaking", None),
        (FeatureId::OppositeVehicleTurning, "Opposite Vehicle Turning", None),
    ];
    let features = rows
        .into_iter()
        .map(|(id, name, polarity)| {
            let kind = if polarity.is_some() { FeatureKind::Environment } else { FeatureKind::Behavior };
            FeatureDescriptor {
                id,
                display_name: name.into(),
                threshold: match kind {
                    FeatureKind::Environment => ENVIRONMENT_THRESHOLD,
                    FeatureKind::Behavior => BEHAVIOR_THRESHOLD,
                },
                kind,
                polarity: polarity.map(|(a, b)| (a.into(), b.into())),
            }
        })
        .collect();
    FeatureTaxonomy { version: TAXONOMY_VERSION.into(), features }
}

/// Per-feature gap thresholds: taxonomy defaults plus validated overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConfig {
    taxonomy: FeatureTaxonomy,
    overrides: BTreeMap<FeatureId, f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { taxonomy: default_taxonomy(), overrides: BTreeMap::new() }
    }
}

impl ThresholdConfig {
    pub fn with_overrides(overrides: BTreeMap<FeatureId, f64>) -> Result<Self, MetricError> {
        for (&feature, &value) in &overrides {
            // NaN fails both comparisons
            if !(value > 0.0 && value <= 1.0) {
                return Err(MetricError::InvalidThreshold { feature, value });
            }
        }
        Ok(ThresholdConfig { taxonomy: default_taxonomy(), overrides })
    }

    pub fn threshold(&self, id: FeatureId) -> f64 {
        self.overrides.get(&id).copied().unwrap_or(self.taxonomy.get(id).threshold)
    }

    pub fn overrides(&self) -> &BTreeMap<FeatureId, f64> {
        &self.overrides
    }

    pub fn taxonomy(&self) -> &FeatureTaxonomy {
        &self.taxonomy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_follow_declaration_order() {
        for (i, id) in FeatureId::ALL.iter().enumerate() {
            assert_eq!(id.index(), i);
            assert_eq!(id.as_str().parse::<FeatureId>(), Ok(*id));
        }
    }

    #[test]
    fn override_bounds() {
        let mut o = BTreeMap::new();
        o.insert(FeatureId::SunnyRainy, 0.0);
        assert!(ThresholdConfig::with_overrides(o.clone()).is_err());
        o.insert(FeatureId::SunnyRainy, 1.0);
        let cfg = ThresholdConfig::with_overrides(o).unwrap();
        assert_eq!(cfg.threshold(FeatureId::SunnyRainy), 1.0);
        assert_eq!(cfg.threshold(FeatureId::UrbanHighway), 0.3);
        let mut o = BTreeMap::new();
        o.insert(FeatureId::LeadingVehicleStopped, f64::NAN);
        assert!(ThresholdConfig::with_overrides(o).is_err());
    }
}
