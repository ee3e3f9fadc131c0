use alloc::string::String;
use alloc::vec::Vec;

use super::{Direction, FeatureId, FeatureTaxonomy, MetricError, Violation};

const SUFFIX: &str = ", please improve on that";
const SHOULD: &str = "there should be a ";
const SHOULD_NOT: &str = "there shouldn't be a ";

/// One sentence per violation, newline separated, in taxonomy order.
pub fn synthesize_feedback(
    violations: &[Violation],
    taxonomy: &FeatureTaxonomy,
) -> Result<String, MetricError> {
    if violations.is_empty() {
        return Err(MetricError::EmptyViolations);
    }
    let mut ordered: Vec<&Violation> = violations.iter().collect();
    ordered.sort_by_key(|v| v.feature.index());

    let lines: Vec<String> = ordered
        .into_iter()
        .map(|v| {
            let descriptor = taxonomy.get(v.feature);
            let lead = match v.direction {
                Direction::MissingInSim => SHOULD,
                Direction::ExtraInSim => SHOULD_NOT,
            };
            let mut line = String::from(lead);
            line.push_str(&descriptor.display_name.to_lowercase());
            line.push(' ');
            line.push_str(descriptor.kind.noun());
            line.push_str(SUFFIX);
            line
        })
        .collect();
    Ok(lines.join("\n"))
}

/// Inverse of [`synthesize_feedback`]: recovers `(feature, direction)` from
/// every line that matches a feedback sentence. Other lines are skipped.
pub fn parse_feedback(text: &str, taxonomy: &FeatureTaxonomy) -> Vec<(FeatureId, Direction)> {
    let mut out = Vec::new();
    for line in text.lines().map(str::trim) {
        let Some(body) = line.strip_suffix(SUFFIX) else { continue };
        let (direction, rest) = if let Some(rest) = body.strip_prefix(SHOULD_NOT) {
            (Direction::ExtraInSim, rest)
        } else if let Some(rest) = body.strip_prefix(SHOULD) {
            (Direction::MissingInSim, rest)
        } else {
            continue;
        };
        let name = rest
            .strip_suffix(" behavior")
            .or_else(|| rest.strip_suffix(" condition"))
            .unwrap_or(rest);
        if let Some(d) = taxonomy.by_display_name(name) {
            out.push((d.id, direction));
        }
    }
    out
}
