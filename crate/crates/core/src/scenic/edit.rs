//! Feature-level edits on a scenario tree.
//!
//! [`set_feature`] makes the syntactic evidence for exactly one feature
//! present or absent and leaves every other hinted feature as it was. Added
//! evidence is a dedicated object; removed evidence deletes the objects that
//! carry it (and anything placed relative to them), then re-adds dedicated
//! objects for any other feature that went missing along the way.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::ast::*;
use super::hints::{object_features, replace_town, static_feature_hints};
use super::span::Spanned;
use crate::features::FeatureId;

pub const SUNNY_WEATHER: &str = "ClearNoon";
pub const RAINY_WEATHER: &str = "HardRainNoon";
pub const URBAN_TOWN: &str = "Town05";
pub const HIGHWAY_TOWN: &str = "Town04";

pub fn set_feature(tree: &ScenarioTree, feature: FeatureId, present: bool) -> ScenarioTree {
    let mut out = tree.clone();
    if static_feature_hints(tree).contains(&feature) == present {
        return out;
    }
    match feature {
        FeatureId::SunnyRainy => {
            let w = if present { SUNNY_WEATHER } else { RAINY_WEATHER };
            set_param(&mut out, "weather", Expr::string(w));
        }
        FeatureId::UrbanHighway => {
            let town = if present { URBAN_TOWN } else { HIGHWAY_TOWN };
            set_param(&mut out, "carla_map", Expr::string(town));
            if let Some(p) = out.params.iter_mut().find(|p| p.name.as_str() == "map") {
                retown(&mut p.value, town);
            }
        }
        f if present => add_evidence(&mut out, f),
        f => {
            let before = static_feature_hints(tree);
            let doomed: BTreeSet<String> = out
                .objects
                .iter()
                .filter(|o| o.name.as_str() != EGO && object_features(&out, o).contains(&f))
                .map(|o| o.name.value.clone())
                .collect();
            remove_objects(&mut out, doomed);
            let after = static_feature_hints(&out);
            for lost in before.difference(&after).filter(|g| **g != f) {
                add_evidence(&mut out, *lost);
            }
        }
    }
    out
}

/// Applies several edits in order.
pub fn set_features(
    tree: &ScenarioTree,
    edits: impl IntoIterator<Item = (FeatureId, bool)>,
) -> ScenarioTree {
    edits.into_iter().fold(tree.clone(), |t, (f, p)| set_feature(&t, f, p))
}

/// Replaces object classes for which `map` returns a substitute.
pub fn substitute_classes(tree: &ScenarioTree, map: impl Fn(&str) -> Option<String>) -> ScenarioTree {
    let mut out = tree.clone();
    for o in &mut out.objects {
        if let Some(c) = map(o.class.as_str()) {
            o.class = Spanned::new(c, o.class.span);
        }
    }
    out
}

fn set_param(tree: &mut ScenarioTree, name: &str, value: Expr) {
    match tree.params.iter_mut().find(|p| p.name.as_str() == name) {
        Some(p) => p.value = value,
        None => tree.params.push(ParamDecl { name: Spanned::bare(name.into()), value }),
    }
}

fn retown(e: &mut Expr, town: &str) {
    match e {
        Expr::Str(s) => {
            if let Some(v) = replace_town(&s.value, town) {
                s.value = v;
            }
        }
        Expr::Call { args, .. } => {
            for a in args {
                retown(&mut a.value, town);
            }
        }
        _ => {}
    }
}

fn fresh_name(tree: &ScenarioTree, base: &str) -> String {
    let taken = |n: &str| tree.object(n).is_some() || tree.behavior(n).is_some() || tree.param(n).is_some();
    if !taken(base) {
        return base.into();
    }
    (2..).map(|i| format!("{base}_{i}")).find(|n| !taken(n)).unwrap()
}

fn spec(kind: SpecifierKind, target: Expr, distance: Option<&str>) -> Specifier {
    Specifier { kind: Spanned::bare(kind), target, distance: distance.map(Expr::number) }
}

fn attr(base: Expr, name: &str) -> Expr {
    Expr::Attr { base: Box::new(base), attr: Spanned::bare(name.into()) }
}

fn kw_call(callee: &str, key: &str, value: Expr) -> Expr {
    Expr::Call {
        callee: Box::new(Expr::name(callee)),
        args: vec![Arg { name: Some(Spanned::bare(key.into())), value }],
    }
}

/// Dedicated object that evidences exactly `feature`.
fn add_evidence(tree: &mut ScenarioTree, feature: FeatureId) {
    use SpecifierKind::*;
    let ego = || Expr::name(EGO);
    let (base, class, specifiers, behavior) = match feature {
        FeatureId::RandomObjectOnRoad => ("debris", "Trash", vec![spec(AheadOf, ego(), Some("25"))], None),
        FeatureId::LeadingVehicleCruising => (
            "lead_car",
            "Car",
            vec![spec(AheadOf, ego(), Some("15"))],
            Some(Expr::call("FollowLaneBehavior", vec![Expr::number("8")])),
        ),
        FeatureId::LeadingVehicleStopped => ("stopped_car", "Car", vec![spec(AheadOf, ego(), Some("30"))], None),
        FeatureId::ParallelVehicleCuttingIn => (
            "cut_in_car",
            "Car",
            vec![spec(RightOf, ego(), Some("3.5"))],
            Some(kw_call("LaneChangeBehavior", "laneSectionToSwitch", attr(ego(), "laneSection"))),
        ),
        FeatureId::ParallelVehicleCruising => (
            "side_car",
            "Car",
            vec![spec(LeftOf, ego(), Some("3.5"))],
            Some(Expr::call("FollowLaneBehavior", vec![Expr::number("10")])),
        ),
        FeatureId::ParallelVehicleStopped => ("parked_car", "Car", vec![spec(RightOf, ego(), Some("3.5"))], None),
        FeatureId::BehindVehicleOvertaking => (
            "overtaker",
            "Car",
            vec![spec(Behind, ego(), Some("10"))],
            Some(kw_call(
                "LaneChangeBehavior",
                "laneSectionToSwitch",
                attr(attr(ego(), "laneSection"), "laneToLeft"),
            )),
        ),
        FeatureId::OppositeVehicleTurning => (
            "oncoming_car",
            "Car",
            vec![spec(AheadOf, ego(), Some("40")), spec(FacingToward, ego(), None)],
            Some(Expr::call("LeftTurnBehavior", vec![])),
        ),
        FeatureId::SunnyRainy | FeatureId::UrbanHighway => return,
    };
    let name = fresh_name(tree, base);
    let properties = behavior
        .map(|value| vec![Property { name: Spanned::bare("behavior".into()), value }])
        .unwrap_or_default();
    tree.objects.push(ObjectDecl {
        name: Spanned::bare(name),
        class: Spanned::bare(class.into()),
        specifiers,
        properties,
    });
}

fn object_mentions(o: &ObjectDecl, names: &BTreeSet<String>) -> bool {
    let hit = |e: &Expr| names.iter().any(|n| e.mentions(n));
    o.specifiers.iter().any(|s| hit(&s.target) || s.distance.as_ref().is_some_and(hit))
        || o.properties.iter().any(|p| hit(&p.value))
}

/// Deletes `names` and, transitively, every non-ego object placed or
/// parameterized relative to them. Ego keeps its declaration but loses the
/// offending specifiers and properties. Requirements and terminations that
/// mention a deleted name are dropped.
fn remove_objects(tree: &mut ScenarioTree, mut names: BTreeSet<String>) {
    loop {
        let more: Vec<String> = tree
            .objects
            .iter()
            .filter(|o| o.name.as_str() != EGO && !names.contains(&o.name.value))
            .filter(|o| object_mentions(o, &names))
            .map(|o| o.name.value.clone())
            .collect();
        if more.is_empty() {
            break;
        }
        names.extend(more);
    }
    tree.objects.retain(|o| !names.contains(&o.name.value));
    let hit = |e: &Expr| names.iter().any(|n| e.mentions(n));
    if let Some(ego) = tree.objects.iter_mut().find(|o| o.name.as_str() == EGO) {
        ego.specifiers.retain(|s| !(hit(&s.target) || s.distance.as_ref().is_some_and(hit)));
        ego.properties.retain(|p| !hit(&p.value));
    }
    tree.requirements.retain(|r| !hit(r));
    tree.terminations.retain(|t| match t {
        Termination::When(e) => !hit(e),
        Termination::After { amount, .. } => !hit(amount),
    });
}
