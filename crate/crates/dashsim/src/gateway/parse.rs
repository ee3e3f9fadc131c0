use dashsim_core::{FeatureId, FeatureVector};
use serde_json::{Map, Value};

use super::{ErrorKind, GatewayError};

const CLAMP_SLACK: f64 = 0.05;

/// Candidate script text from a model reply: the body of the first fenced
/// block if there is one, otherwise the whole reply trimmed.
pub fn extract_script(reply: &str) -> String {
    let body = match reply.find("```") {
        Some(open) => {
            let after = &reply[open + 3..];
            // Skip the info string (` scenic`, `python`, ...).
            let after = after.split_once('\n').map_or("", |(_, rest)| rest);
            match after.find("```") {
                Some(close) => &after[..close],
                None => after,
            }
        }
        None => reply.trim(),
    };
    let mut s = body.trim_matches(|c| c == '\n' || c == '\r').trim_end().to_string();
    s.push('\n');
    s
}

// Every JSON object that starts somewhere in `text`, outermost first.
fn objects(text: &str) -> impl Iterator<Item = Map<String, Value>> + '_ {
    text.char_indices().filter(|(_, c)| *c == '{').filter_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(m))) => Some(m),
            _ => None,
        }
    })
}

/// Reads a feature vector from a reply holding a JSON object keyed by
/// feature id. The first object carrying every id is used. Unknown keys are
/// ignored and values up to 0.05 outside `[0, 1]` are clamped, each with a
/// warning.
pub fn parse_features(reply: &str) -> Result<(FeatureVector, Vec<String>), GatewayError> {
    let malformed = |detail: String| GatewayError::new(ErrorKind::MalformedResponse, detail);
    let mut first_missing: Option<&'static str> = None;
    let mut chosen = None;
    for obj in objects(reply) {
        match FeatureId::ALL.iter().find(|f| !obj.contains_key(f.as_str())) {
            None => {
                chosen = Some(obj);
                break;
            }
            Some(f) => {
                first_missing.get_or_insert(f.as_str());
            }
        }
    }
    let Some(obj) = chosen else {
        return Err(malformed(match first_missing {
            Some(key) => format!("feature object is missing `{key}`"),
            None => "no JSON object in the response".into(),
        }));
    };

    let mut warnings = Vec::new();
    for key in obj.keys() {
        if key.parse::<FeatureId>().is_err() {
            warnings.push(format!("ignored unknown key `{key}`"));
        }
    }
    let mut values = Vec::with_capacity(FeatureId::COUNT);
    for f in FeatureId::ALL {
        let raw = &obj[f.as_str()];
        let v = raw.as_f64().ok_or_else(|| malformed(format!("`{}` is not a number: {raw}", f.as_str())))?;
        let clamped = v.clamp(0.0, 1.0);
        if clamped != v {
            if (v - clamped).abs() > CLAMP_SLACK {
                return Err(malformed(format!("`{}` = {v} is outside [0, 1]", f.as_str())));
            }
            warnings.push(format!("clamped `{}` from {v} to {clamped}", f.as_str()));
        }
        values.push(clamped);
    }
    let vector = FeatureVector::new(values).map_err(|e| malformed(e.to_string()))?;
    Ok((vector, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_keys(v: f64) -> String {
        let body: Vec<String> = FeatureId::ALL.iter().map(|f| format!("\"{}\": {v}", f.as_str())).collect();
        format!("{{{}}}", body.join(", "))
    }

    #[test]
    fn fences_are_stripped() {
        let reply = "Here you go:\n```scenic\nego = new Car\n```\nHope it helps.";
        assert_eq!(extract_script(reply), "ego = new Car\n");
        assert_eq!(extract_script("  ego = new Car  \n\n"), "ego = new Car\n");
        assert_eq!(extract_script("```\nego = new Car\n"), "ego = new Car\n");
    }

    #[test]
    fn parses_object_inside_prose() {
        let (v, w) = parse_features(&format!("Sure: {} done", all_keys(0.5))).unwrap();
        assert_eq!(v.values(), &[0.5; 10]);
        assert!(w.is_empty());
    }

    #[test]
    fn missing_key_is_malformed() {
        let text = all_keys(0.5).replace("\"opposite_vehicle_turning\": 0.5", "\"other\": 1");
        let e = parse_features(&text).unwrap_err();
        assert_eq!(e.kind, ErrorKind::MalformedResponse);
        assert!(e.detail.contains("opposite_vehicle_turning"));
        assert!(!e.retryable);
    }

    #[test]
    fn clamp_rule() {
        let (v, w) = parse_features(&all_keys(1.04)).unwrap();
        assert_eq!(v.values(), &[1.0; 10]);
        assert_eq!(w.len(), 10);
        let (v, _) = parse_features(&all_keys(-0.05)).unwrap();
        assert_eq!(v.values(), &[0.0; 10]);
        assert!(parse_features(&all_keys(1.06)).is_err());
        assert!(parse_features(&all_keys(-0.2)).is_err());
    }

    #[test]
    fn extra_keys_warn() {
        let text = all_keys(0.0).replacen('{', "{\"confidence\": 0.9, ", 1);
        let (_, w) = parse_features(&text).unwrap();
        assert_eq!(w, ["ignored unknown key `confidence`"]);
    }

    #[test]
    fn nested_object_is_found() {
        let text = format!("{{\"features\": {}}}", all_keys(0.25));
        assert_eq!(parse_features(&text).unwrap().0.values(), &[0.25; 10]);
    }
}
