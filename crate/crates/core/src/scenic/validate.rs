//! Catalog and cross-reference checks on a parsed script.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ScenicScript;
use super::ast::*;
use super::catalog::Catalog;
use super::diagnostic::{Diagnostic, codes};
use super::parser::closest;
use super::span::{Ident, Span};

pub fn validate(script: &ScenicScript, catalog: &Catalog) -> Vec<Diagnostic> {
    let mut v = Validator { src: &script.source, tree: &script.tree, catalog, out: Vec::new() };
    v.run();
    let mut out = v.out;
    out.sort_by_key(|d| (d.span.start, d.span.end));
    out
}

struct Validator<'a> {
    src: &'a str,
    tree: &'a ScenarioTree,
    catalog: &'a Catalog,
    out: Vec<Diagnostic>,
}

impl<'a> Validator<'a> {
    fn push(&mut self, code: &str, span: Span, msg: String, hint: Option<String>) {
        let mut d = Diagnostic::error(code, span, msg, self.src);
        d.hint = hint;
        self.out.push(d);
    }

    fn suggest(word: &str, pool: impl Iterator<Item = &'a String>) -> Option<String> {
        let pool: Vec<&str> = pool.map(String::as_str).collect();
        closest(word, &pool).map(|s| format!("did you mean `{s}`?"))
    }

    fn run(&mut self) {
        let tree = self.tree;
        let catalog = self.catalog;

        for p in &tree.params {
            if !catalog.param_names.contains(p.name.as_str()) {
                let hint = Self::suggest(p.name.as_str(), catalog.param_names.iter());
                self.push(
                    codes::CATALOG_UNKNOWN_PARAM,
                    p.name.span,
                    format!("unknown scenario parameter `{}`", p.name.value),
                    hint,
                );
            }
            if p.name.as_str() == "weather" {
                p.value.walk(&mut |e| {
                    if let Expr::Str(s) = e {
                        if !catalog.weather_values.contains(&s.value) {
                            let hint = Self::suggest(&s.value, catalog.weather_values.iter());
                            self.push(
                                codes::CATALOG_UNKNOWN_WEATHER,
                                s.span,
                                format!("unknown weather `{}`", s.value),
                                hint,
                            );
                        }
                    }
                });
            }
        }

        for b in &tree.behaviors {
            for s in &b.body {
                s.walk(&mut |s| match s {
                    Stmt::Do { call, .. } => self.behavior_ref(call, "behavior"),
                    Stmt::Take(actions) => {
                        for a in actions {
                            self.behavior_ref(a, "action");
                        }
                    }
                    _ => {}
                });
            }
        }

        let mut declared: BTreeSet<&str> = BTreeSet::new();
        for o in &tree.objects {
            if !catalog.has_class(o.class.as_str()) {
                let hint = Self::suggest(o.class.as_str(), catalog.object_classes.iter());
                self.push(
                    codes::CATALOG_UNKNOWN_CLASS,
                    o.class.span,
                    format!("object class `{}` is not available in the simulator", o.class.value),
                    hint,
                );
            }
            for s in &o.specifiers {
                let kind = s.kind.value;
                if !catalog.specifier_kinds.contains(kind.as_str()) {
                    self.push(
                        codes::CATALOG_UNKNOWN_SPECIFIER,
                        s.kind.span,
                        format!("specifier `{}` is not supported", kind.keyword()),
                        None,
                    );
                }
                if kind.takes_distance() || kind == SpecifierKind::FacingToward {
                    if let Some(anchor) = s.anchor() {
                        self.anchor(anchor, &declared, &o.name);
                    }
                }
            }
            if let Some(b) = o.behavior() {
                self.behavior_ref(b, "behavior");
            }
            declared.insert(o.name.as_str());
        }
    }

    fn anchor(&mut self, anchor: &Ident, declared: &BTreeSet<&str>, owner: &Ident) {
        if declared.contains(anchor.as_str()) {
            return;
        }
        let msg = if anchor.as_str() == owner.as_str() {
            format!("`{}` is positioned relative to itself", owner.value)
        } else if self.tree.object(anchor.as_str()).is_some() {
            format!("`{}` is used before it is declared", anchor.value)
        } else {
            format!("no object named `{}`", anchor.value)
        };
        self.push(codes::UNRESOLVED_NAME, anchor.span, msg, None);
    }

    fn behavior_ref(&mut self, e: &Expr, what: &str) {
        let Some(name) = e.callee_name() else { return };
        let given = e.arg_count();
        let (min, max) = if let Some(b) = self.tree.behavior(name.as_str()) {
            (b.params.iter().filter(|p| p.default.is_none()).count(), b.params.len())
        } else if let Some(max) = self.catalog.builtin_arity(name.as_str()) {
            (0, max)
        } else {
            let mut pool: Vec<&String> = self.catalog.builtin_behaviors.keys().collect();
            let user: Vec<String> = self.tree.behaviors.iter().map(|b| b.name.value.clone()).collect();
            pool.extend(user.iter());
            let names: Vec<&str> = pool.iter().map(|s| s.as_str()).collect();
            let hint = closest(name.as_str(), &names).map(|s| format!("did you mean `{s}`?"));
            self.push(
                codes::CATALOG_UNKNOWN_BEHAVIOR,
                name.span,
                format!("unknown {what} `{}`", name.value),
                hint,
            );
            return;
        };
        if given < min || given > max {
            let expected = if min == max { format!("{max}") } else { format!("{min} to {max}") };
            self.push(
                codes::BEHAVIOR_ARITY,
                name.span,
                format!("`{}` takes {expected} arguments, {given} given", name.value),
                None,
            );
        }
    }
}
