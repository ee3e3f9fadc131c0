//! The supported SCENIC dialect: parameters, one `model` line, behavior
//! definitions (`do` / `take` / `wait` / `try`-`interrupt when` / `while` /
//! `if`), object declarations with spatial specifiers, `require`, and
//! `terminate when` / `terminate after`.

pub mod ast;
mod catalog;
mod diagnostic;
pub mod edit;
pub mod hints;
mod lexer;
mod parser;
mod render;
mod span;
mod validate;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

pub use ast::ScenarioTree;
pub use catalog::{Catalog, EmptyCatalogField};
pub use diagnostic::{Diagnostic, Severity, codes};
pub use render::expr as render_expr;
pub use span::{Ident, LineIndex, Span, Spanned};

use crate::features::FeatureId;

/// Source text together with its syntax tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenicScript {
    pub source: String,
    pub tree: ScenarioTree,
    /// Non-blank lines in `source`.
    pub line_count: usize,
}

impl ScenicScript {
    /// Parses `source`. On failure every diagnostic is an error with a span
    /// inside the source.
    pub fn parse(source: &str) -> Result<Self, Vec<Diagnostic>> {
        let tree = parser::parse_tree(source)?;
        Ok(ScenicScript { source: source.into(), line_count: count_lines(source), tree })
    }

    /// A script whose source is the canonical rendering of `tree`.
    pub fn from_tree(tree: ScenarioTree) -> Self {
        let source = render::render_tree(&tree);
        ScenicScript { line_count: count_lines(&source), source, tree }
    }

    pub fn render(&self) -> String {
        render::render_tree(&self.tree)
    }

    /// Catalog and cross-reference diagnostics; empty when the script only
    /// uses what the catalog provides.
    pub fn validate(&self, catalog: &Catalog) -> Vec<Diagnostic> {
        validate::validate(self, catalog)
    }

    pub fn static_feature_hints(&self) -> BTreeSet<FeatureId> {
        hints::static_feature_hints(&self.tree)
    }
}

pub fn parse(source: &str) -> Result<ScenicScript, Vec<Diagnostic>> {
    ScenicScript::parse(source)
}

pub fn render(script: &ScenicScript) -> String {
    script.render()
}

pub fn validate(script: &ScenicScript, catalog: &Catalog) -> Vec<Diagnostic> {
    script.validate(catalog)
}

pub fn static_feature_hints(script: &ScenicScript) -> BTreeSet<FeatureId> {
    script.static_feature_hints()
}

fn count_lines(source: &str) -> usize {
    source.lines().filter(|l| !l.trim().is_empty()).count()
}
