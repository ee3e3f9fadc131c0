mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::stub::{Reply, Stub};
use dashsim::frames::FramePack;
use dashsim::gateway::{
    Capabilities, ErrorKind, ExamplePayload, FewShotRegistry, Gateway, HttpBackend, HttpConfig, InFlightLimit,
    request_body,
};
use dashsim_core::FeatureId;
use serde_json::Value;

const KEY: &str = "sk-test-not-a-real-key";

fn http(stub: &Stub, retry_cap: u32, deadline: Duration) -> HttpConfig {
    HttpConfig {
        endpoint: stub.url.clone(),
        model: "stub-model".into(),
        temperature: 0.2,
        api_key: KEY.into(),
        retry_cap,
        deadline,
        backoff_base: Duration::from_millis(5),
        backoff_max: Duration::from_millis(40),
        capabilities: Capabilities::default(),
    }
}

fn registry() -> FewShotRegistry {
    FewShotRegistry::load(&common::root().join("fixtures")).unwrap()
}

fn gateway(cfg: HttpConfig) -> Gateway {
    let backend = Arc::new(HttpBackend::new(cfg, InFlightLimit::new(4)).unwrap());
    Gateway::new(backend.clone(), backend, &registry())
}

fn query() -> FramePack {
    FramePack::load(&common::root().join("fixtures/script/ped_crossing/frames")).unwrap()
}

fn feature_json(v: f64) -> String {
    let body: Vec<String> = FeatureId::ALL.iter().map(|f| format!("\"{}\": {v}", f.as_str())).collect();
    format!("{{{}}}", body.join(", "))
}

#[test]
fn rate_limits_are_retried() {
    let stub = Stub::start(vec![
        Reply::status(429),
        Reply::status(429),
        Reply::content("Sure.\n```scenic\nego = new Car\n```\nDone."),
    ]);
    let reply = gateway(http(&stub, 3, Duration::from_secs(10))).generate_script(&query(), None, None).unwrap();
    assert_eq!(reply.text, "ego = new Car\n");
    assert_eq!(reply.call.attempts, 3);
    let reqs = stub.requests();
    assert_eq!(reqs.len(), 3);
    assert!(reqs.iter().all(|r| r.body == reqs[0].body), "retries resend identical bytes");
    assert_eq!(reqs[0].header("authorization"), Some(&*format!("Bearer {KEY}")));
    assert!(reqs[0].request_line.starts_with("POST /v1/chat/completions"));
    assert!(!String::from_utf8_lossy(&reqs[0].body).contains(KEY));
}

#[test]
fn retry_cap_bounds_attempts() {
    let stub = Stub::start(vec![Reply::status(503)]);
    let err = gateway(http(&stub, 2, Duration::from_secs(10))).generate_script(&query(), None, None).unwrap_err();
    assert_eq!(err.error.kind, ErrorKind::Transport);
    assert_eq!(err.error.attempts, 3);
    assert_eq!(err.call.attempts, 3);
    assert_eq!(stub.requests().len(), 3);
}

#[test]
fn deadline_is_enforced_per_attempt() {
    let stub = Stub::start(vec![Reply::content("too late").delayed(Duration::from_secs(3))]);
    let start = Instant::now();
    let err =
        gateway(http(&stub, 1, Duration::from_millis(300))).generate_script(&query(), None, None).unwrap_err();
    let elapsed = start.elapsed();
    assert_eq!(err.error.kind, ErrorKind::Deadline);
    assert!(err.error.retryable);
    assert_eq!(err.error.attempts, 2);
    assert!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    assert_eq!(stub.requests().len(), 2);
}

#[test]
fn refusals_are_not_retried() {
    let stub = Stub::start(vec![Reply::status(400)]);
    let err = gateway(http(&stub, 3, Duration::from_secs(10))).generate_script(&query(), None, None).unwrap_err();
    assert_eq!(err.error.kind, ErrorKind::Refusal);
    assert!(!err.error.retryable);
    assert_eq!(stub.requests().len(), 1);

    let refused = Reply {
        body: r#"{"choices":[{"message":{"role":"assistant","content":null,"refusal":"I can't help"}}]}"#.into(),
        ..Reply::status(200)
    };
    let stub = Stub::start(vec![refused]);
    let err = gateway(http(&stub, 3, Duration::from_secs(10))).generate_script(&query(), None, None).unwrap_err();
    assert_eq!(err.error.kind, ErrorKind::Refusal);
    assert_eq!(stub.requests().len(), 1);
}

#[test]
fn request_body_is_deterministic_and_ordered() {
    let reg = registry();
    let backend = Arc::new(
        HttpBackend::new(http(&Stub::start(vec![Reply::status(500)]), 0, Duration::from_secs(1)), InFlightLimit::new(1))
            .unwrap(),
    );
    let gw = Gateway::new(backend.clone(), backend, &reg);
    let payload = gw.script_payload(&query(), Some("there should be a rain"), Some("ego = new Car\n")).unwrap();
    let caps = Capabilities::default();
    let a = request_body(&payload, "m", 0.2, caps);
    let b = request_body(&gw.script_payload(&query(), Some("there should be a rain"), Some("ego = new Car\n")).unwrap(), "m", 0.2, caps);
    assert_eq!(a, b);

    let body: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(body["model"], "m");
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 2 + 2 * reg.script.len());
    assert_eq!(messages[0]["role"], "system");
    let mut labels = Vec::new();
    for (i, ex) in reg.script.iter().enumerate() {
        let user = &messages[1 + 2 * i];
        let assistant = &messages[2 + 2 * i];
        assert_eq!(user["role"], "user");
        let parts = user["content"].as_array().unwrap();
        assert_eq!(parts.len(), 1 + ex.frames.images.len());
        assert!(parts[1]["image_url"]["url"].as_str().unwrap().starts_with("data:image/jpeg;base64,"));
        assert_eq!(assistant["role"], "assistant");
        let ExamplePayload::Script(script) = &ex.payload else { panic!("script example expected") };
        assert_eq!(assistant["content"].as_str().unwrap(), script);
        labels.push(ex.label.clone());
    }
    let mut sorted = labels.clone();
    sorted.sort();
    assert_eq!(labels, sorted);

    let last = messages.last().unwrap()["content"].as_array().unwrap();
    let texts: Vec<&str> = last.iter().filter_map(|p| p["text"].as_str()).collect();
    assert!(texts.iter().any(|t| t.contains("```scenic\nego = new Car\n```")));
    assert!(texts.iter().any(|t| t.contains("there should be a rain")));
}

#[test]
fn capabilities_trim_examples() {
    let reg = registry();
    let backend = Arc::new(
        HttpBackend::new(http(&Stub::start(vec![Reply::status(500)]), 0, Duration::from_secs(1)), InFlightLimit::new(1))
            .unwrap(),
    );
    let gw = Gateway::new(backend.clone(), backend, &reg);
    let payload = gw.script_payload(&query(), None, None).unwrap();
    let body = |caps| -> usize {
        let v: Value = serde_json::from_slice(&request_body(&payload, "m", 0.0, caps)).unwrap();
        (v["messages"].as_array().unwrap().len() - 2) / 2
    };
    assert_eq!(body(Capabilities { max_examples: 3, max_images: 256 }), 3);
    assert_eq!(body(Capabilities { max_examples: 20, max_images: 45 }), 3);
    assert_eq!(body(Capabilities { max_examples: 20, max_images: 10 }), 0);
}

#[test]
fn feature_replies_are_parsed_and_clamped() {
    let text = format!("The ratings are:\n```json\n{}\n```", feature_json(0.5).replacen("0.5", "1.03", 1));
    let stub = Stub::start(vec![Reply::content(&text)]);
    let reply = gateway(http(&stub, 0, Duration::from_secs(10))).extract_features(&query()).unwrap();
    assert_eq!(reply.vector.get(FeatureId::ALL[0]), 1.0);
    assert_eq!(reply.vector.get(FeatureId::ALL[1]), 0.5);
    assert_eq!(reply.call.warnings.len(), 1);

    let body: Value = serde_json::from_slice(&stub.requests()[0].body).unwrap();
    let system = body["messages"][0]["content"].as_str().unwrap();
    for f in FeatureId::ALL {
        assert!(system.contains(f.as_str()));
    }
}

#[test]
fn incomplete_or_out_of_range_features_are_malformed() {
    let missing = feature_json(0.5).replace("\"opposite_vehicle_turning\": 0.5", "\"opposite_vehicle\": 0.5");
    let stub = Stub::start(vec![Reply::content(&missing)]);
    let err = gateway(http(&stub, 3, Duration::from_secs(10))).extract_features(&query()).unwrap_err();
    assert_eq!(err.error.kind, ErrorKind::MalformedResponse);
    assert!(err.error.detail.contains("opposite_vehicle_turning"));
    assert_eq!(stub.requests().len(), 1);

    let far = feature_json(0.5).replacen("0.5", "1.2", 1);
    let stub = Stub::start(vec![Reply::content(&far)]);
    let err = gateway(http(&stub, 3, Duration::from_secs(10))).extract_features(&query()).unwrap_err();
    assert_eq!(err.error.kind, ErrorKind::MalformedResponse);
}
