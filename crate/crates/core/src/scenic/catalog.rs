use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

/// What the target simulator supports. Lookups are case-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCatalog")]
pub struct Catalog {
    pub object_classes: BTreeSet<String>,
    /// Built-in behaviors and actions with the largest number of arguments
    /// each accepts.
    pub builtin_behaviors: BTreeMap<String, usize>,
    pub weather_values: BTreeSet<String>,
    pub param_names: BTreeSet<String>,
    pub specifier_kinds: BTreeSet<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    object_classes: BTreeSet<String>,
    builtin_behaviors: BTreeMap<String, usize>,
    weather_values: BTreeSet<String>,
    param_names: BTreeSet<String>,
    specifier_kinds: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyCatalogField(pub &'static str);

impl fmt::Display for EmptyCatalogField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "catalog field `{}` must not be empty", self.0)
    }
}

impl core::error::Error for EmptyCatalogField {}

impl TryFrom<RawCatalog> for Catalog {
    type Error = EmptyCatalogField;

    fn try_from(raw: RawCatalog) -> Result<Self, Self::Error> {
        Catalog::new(
            raw.object_classes,
            raw.builtin_behaviors,
            raw.weather_values,
            raw.param_names,
            raw.specifier_kinds,
        )
    }
}

impl Catalog {
    pub fn new(
        object_classes: BTreeSet<String>,
        builtin_behaviors: BTreeMap<String, usize>,
        weather_values: BTreeSet<String>,
        param_names: BTreeSet<String>,
        specifier_kinds: BTreeSet<String>,
    ) -> Result<Self, EmptyCatalogField> {
        let checks = [
            ("object_classes", object_classes.is_empty()),
            ("builtin_behaviors", builtin_behaviors.is_empty()),
            ("weather_values", weather_values.is_empty()),
            ("param_names", param_names.is_empty()),
            ("specifier_kinds", specifier_kinds.is_empty()),
        ];
        if let Some((field, _)) = checks.iter().find(|(_, empty)| *empty) {
            return Err(EmptyCatalogField(field));
        }
        Ok(Catalog { object_classes, builtin_behaviors, weather_values, param_names, specifier_kinds })
    }

    pub fn has_class(&self, name: &str) -> bool {
        self.object_classes.contains(name)
    }

    pub fn builtin_arity(&self, name: &str) -> Option<usize> {
        self.builtin_behaviors.get(name).copied()
    }
}
