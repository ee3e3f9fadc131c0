//! Syntactic evidence for taxonomy features.
//!
//! Non-ego vehicles get a role from how they are placed relative to `ego`
//! (`facing toward ego` makes a vehicle oncoming; otherwise the first of
//! `ahead of` / `behind` / `left of` / `right of` anchored on `ego` decides),
//! and a motion from the built-ins their behavior reaches. Any non-vehicle
//! object counts as an object on the road. Weather and map parameters decide
//! the two environment features, which are reported when the first-named
//! label holds (sunny, urban).

use alloc::collections::BTreeSet;
use alloc::string::String;

use super::ast::*;
use crate::features::FeatureId;

pub const VEHICLE_CLASSES: &[&str] =
    &["Car", "Truck", "Van", "Bus", "Motorcycle", "Bicycle", "NPCCar", "Vehicle"];

const FOLLOW: &[&str] = &[
    "FollowLaneBehavior",
    "FollowTrajectoryBehavior",
    "DriveAvoidingCollisions",
    "AccelerateForwardBehavior",
    "ConstantThrottleBehavior",
];
const LANE_CHANGE: &[&str] = &["LaneChangeBehavior"];
const TURN: &[&str] = &["TurnBehavior", "LeftTurnBehavior", "RightTurnBehavior"];
const STOP: &[&str] = &["Idle", "SetBrakeAction", "SetHandBrakeAction"];

const HIGHWAY_TOWNS: &[&str] = &["Town04", "Town06"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Motion {
    pub follow: bool,
    pub lane_change: bool,
    pub turn: bool,
    pub stop: bool,
}

impl Motion {
    fn union(self, o: Motion) -> Motion {
        Motion {
            follow: self.follow | o.follow,
            lane_change: self.lane_change | o.lane_change,
            turn: self.turn | o.turn,
            stop: self.stop | o.stop,
        }
    }

    fn of_builtin(name: &str) -> Motion {
        Motion {
            follow: FOLLOW.contains(&name),
            lane_change: LANE_CHANGE.contains(&name),
            turn: TURN.contains(&name),
            stop: STOP.contains(&name),
        }
    }

    /// Nothing that moves the vehicle: a parked or braking car.
    pub fn is_stationary(self) -> bool {
        self.stop || !(self.follow || self.lane_change || self.turn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Leading,
    Parallel,
    Behind,
    Opposite,
}

pub fn is_vehicle(class: &str) -> bool {
    VEHICLE_CLASSES.contains(&class)
}

fn anchored_on_ego(s: &Specifier) -> bool {
    s.anchor().is_some_and(|a| a.as_str() == EGO)
}

pub fn role(o: &ObjectDecl) -> Option<Role> {
    if o.specifiers.iter().any(|s| s.kind.value == SpecifierKind::FacingToward && anchored_on_ego(s)) {
        return Some(Role::Opposite);
    }
    o.specifiers.iter().filter(|s| anchored_on_ego(s)).find_map(|s| match s.kind.value {
        SpecifierKind::AheadOf => Some(Role::Leading),
        SpecifierKind::Behind => Some(Role::Behind),
        SpecifierKind::LeftOf | SpecifierKind::RightOf => Some(Role::Parallel),
        _ => None,
    })
}

/// Motion reachable from a behavior reference, following user behaviors.
pub fn motion(tree: &ScenarioTree, behavior: &Expr) -> Motion {
    let mut visiting = BTreeSet::new();
    motion_of(tree, behavior, &mut visiting)
}

fn motion_of(tree: &ScenarioTree, e: &Expr, visiting: &mut BTreeSet<String>) -> Motion {
    let Some(name) = e.callee_name() else { return Motion::default() };
    let Some(b) = tree.behavior(name.as_str()) else {
        return Motion::of_builtin(name.as_str());
    };
    if !visiting.insert(name.value.clone()) {
        return Motion::default();
    }
    let mut m = Motion::default();
    for s in &b.body {
        s.walk(&mut |s| match s {
            Stmt::Do { call, .. } => m = m.union(motion_of(tree, call, visiting)),
            Stmt::Take(actions) => {
                for a in actions {
                    if let Some(n) = a.callee_name() {
                        m = m.union(Motion::of_builtin(n.as_str()));
                    }
                }
            }
            _ => {}
        });
    }
    visiting.remove(&name.value);
    m
}

/// Features evidenced by one object declaration.
pub fn object_features(tree: &ScenarioTree, o: &ObjectDecl) -> BTreeSet<FeatureId> {
    let mut out = BTreeSet::new();
    if o.name.as_str() == EGO {
        return out;
    }
    if !is_vehicle(o.class.as_str()) {
        out.insert(FeatureId::RandomObjectOnRoad);
        return out;
    }
    let m = o.behavior().map(|b| motion(tree, b)).unwrap_or_default();
    let stationary = m.is_stationary();
    match role(o) {
        Some(Role::Leading) => {
            if m.follow {
                out.insert(FeatureId::LeadingVehicleCruising);
            }
            if stationary {
                out.insert(FeatureId::LeadingVehicleStopped);
            }
        }
        Some(Role::Parallel) => {
            if m.lane_change {
                out.insert(FeatureId::ParallelVehicleCuttingIn);
            }
            if m.follow {
                out.insert(FeatureId::ParallelVehicleCruising);
            }
            if stationary {
                out.insert(FeatureId::ParallelVehicleStopped);
            }
        }
        Some(Role::Behind) => {
            if m.lane_change {
                out.insert(FeatureId::BehindVehicleOvertaking);
            }
        }
        Some(Role::Opposite) => {
            if m.turn {
                out.insert(FeatureId::OppositeVehicleTurning);
            }
        }
        None => {}
    }
    out
}

fn first_string(e: &Expr) -> Option<&str> {
    let mut found = None;
    e.walk(&mut |e| {
        if let (None, Expr::Str(s)) = (&found, e) {
            found = Some(s.value.as_str());
        }
    });
    found
}

pub fn is_rainy_weather(name: &str) -> bool {
    name.contains("Rain")
}

fn town_of(s: &str) -> Option<&str> {
    let i = s.find("Town")?;
    let digits = s[i + 4..].bytes().take_while(u8::is_ascii_digit).count();
    (digits > 0).then(|| &s[i..i + 4 + digits])
}

pub fn static_feature_hints(tree: &ScenarioTree) -> BTreeSet<FeatureId> {
    let mut out = BTreeSet::new();
    if let Some(Expr::Str(s)) = tree.param("weather").map(|p| &p.value) {
        if !is_rainy_weather(&s.value) {
            out.insert(FeatureId::SunnyRainy);
        }
    }
    let town = ["carla_map", "map"]
        .iter()
        .filter_map(|n| tree.param(n))
        .find_map(|p| first_string(&p.value).and_then(town_of));
    if let Some(town) = town {
        if !HIGHWAY_TOWNS.contains(&town) {
            out.insert(FeatureId::UrbanHighway);
        }
    }
    for o in &tree.objects {
        out.extend(object_features(tree, o));
    }
    out
}

pub(crate) fn replace_town(s: &str, town: &str) -> Option<String> {
    let old = town_of(s)?;
    Some(s.replacen(old, town, 1))
}
