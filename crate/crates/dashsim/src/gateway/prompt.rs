use base64::Engine;
use base64::engine::general_purpose::STANDARD;
use dashsim_core::features::default_taxonomy;
use dashsim_core::{Diagnostic, FeatureKind};
use serde_json::{Value, json};

use super::{Capabilities, PromptPayload, REPAIR_PREFIX, Role};
use crate::frames::FramePack;

pub const SCRIPT_SYSTEM: &str = "\
You turn dashcam crash videos into SCENIC scenario scripts for the CARLA simulator.
Each video arrives as frames sampled at even intervals, in playback order.
Write a script that reproduces the road, the weather and what every traffic participant does.
Use only: `param` lines (map, carla_map, weather), the line `model scenic.simulators.carla.model`,
`behavior` definitions built from do/take/wait/try-interrupt/while/if, object declarations
(`name = new Class <specifiers>`) with exactly one object named `ego` for the camera car,
`require` lines and `terminate when` / `terminate after` lines.
Use CARLA object classes and built-in behaviors only. Reply with the script alone.";

pub const FEATURE_SYSTEM_HEADER: &str = "\
You rate dashcam videos. For the video in the last message give, for every feature below,
the probability from 0 to 1 that it holds. Reply with one JSON object whose keys are exactly these ids:";

pub fn feature_system_text() -> String {
    let mut s = String::from(FEATURE_SYSTEM_HEADER);
    for d in default_taxonomy().features {
        s.push_str("\n- ");
        s.push_str(d.id.as_str());
        s.push_str(": ");
        match (&d.polarity, d.kind) {
            (Some((first, second)), FeatureKind::Environment) => {
                s.push_str(&format!("{} (1 = {first}, 0 = {second})", d.display_name));
            }
            _ => s.push_str(&d.display_name),
        }
    }
    s
}

/// Feedback text for a script that failed validation.
pub fn validation_feedback(diagnostics: &[Diagnostic]) -> String {
    let items: Vec<String> = diagnostics
        .iter()
        .filter(|d| d.is_error())
        .map(|d| format!("line {}:{} {} {}", d.line, d.col, d.code, d.message))
        .collect();
    format!("{REPAIR_PREFIX}{}; fix only these issues", items.join("; "))
}

fn text_part(text: &str) -> Value {
    json!({"type": "text", "text": text})
}

fn image_parts(frames: &FramePack) -> impl Iterator<Item = Value> + '_ {
    frames.images.iter().map(|img| {
        let url = format!("data:image/{};base64,{}", img.format, STANDARD.encode(&img.bytes));
        json!({"type": "image_url", "image_url": {"url": url}})
    })
}

fn user(parts: Vec<Value>) -> Value {
    json!({"role": "user", "content": parts})
}

/// Chat-completions request body. Equal inputs give equal bytes.
pub fn request_body(payload: &PromptPayload, model: &str, temperature: f64, caps: Capabilities) -> Vec<u8> {
    let mut messages = vec![json!({"role": "system", "content": payload.system_text})];
    for ex in payload.examples_within(caps) {
        let mut parts = vec![text_part(&format!("Example video `{}`:", ex.label))];
        parts.extend(image_parts(&ex.frames));
        messages.push(user(parts));
        messages.push(json!({"role": "assistant", "content": ex.payload.text()}));
    }

    let mut parts = vec![text_part("Video:")];
    parts.extend(image_parts(&payload.query_frames));
    match (&payload.feedback, &payload.prior_script) {
        (Some(feedback), Some(prior)) => {
            parts.push(text_part(&format!("Your previous script for this video:\n```scenic\n{}\n```", prior.trim_end())));
            parts.push(text_part(&format!(
                "Feedback:\n{feedback}\nRevise the previous script to address the feedback and keep everything else."
            )));
        }
        _ => parts.push(text_part(match payload.role {
            Role::Script => "Write the SCENIC script for this video.",
            Role::Feature => "Reply with the JSON object for this video.",
        })),
    }
    messages.push(user(parts));

    let body = json!({"model": model, "temperature": temperature, "messages": messages});
    serde_json::to_vec(&body).expect("request body serializes")
}
