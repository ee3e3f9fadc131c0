//! One PASS/FAIL line per acceptance criterion. Exits non-zero on any FAIL.

mod common;

use std::fs;
use std::ops::ControlFlow;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::stub::{Reply, Stub};
use dashsim::engine::{Outcome, RunState, percent, report};
use dashsim::frames::FramePack;
use dashsim::gateway::{
    Capabilities, ErrorKind, FewShotRegistry, Gateway, HttpBackend, HttpConfig, InFlightLimit, MockMode, request_body,
};
use dashsim_core::features::{
    Direction, FeatureKind, Violation, default_taxonomy, similarity, synthesize_feedback,
};
use dashsim_core::sampling::sample_indices;
use dashsim_core::{Catalog, FeatureId, FeatureVector, ScenicScript, ThresholdConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_vector(rng: &mut StdRng) -> FeatureVector {
    // Mix in exact grid values so ties with the thresholds occur.
    let values = (0..FeatureId::COUNT)
        .map(|_| if rng.random_bool(0.3) { f64::from(rng.random_range(0..=20u8)) / 20.0 } else { rng.random() })
        .collect();
    FeatureVector::new(values).unwrap()
}

fn similarity_oracle() -> Check {
    let start = Instant::now();
    let cfg = ThresholdConfig::default();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for _ in 0..1000 {
        let (real, sim) = (random_vector(&mut rng), random_vector(&mut rng));
        let r = similarity(&real, &sim, &cfg).map_err(|e| e.to_string())?;
        let mut brute = Vec::new();
        for (i, f) in FeatureId::ALL.iter().enumerate() {
            let gap = sim.values()[i] - real.values()[i];
            if gap.abs() > cfg.threshold(*f) {
                brute.push((*f, if gap < 0.0 { Direction::MissingInSim } else { Direction::ExtraInSim }));
            }
        }
        let got: Vec<_> = r.violations.iter().map(|v| (v.feature, v.direction)).collect();
        ensure!(got == brute, "violations {got:?} differ from brute force {brute:?}");
        ensure!(r.passed == brute.is_empty(), "passed flag disagrees");

        let back = similarity(&sim, &real, &cfg).map_err(|e| e.to_string())?;
        let same_set = back.violated_features().eq(r.violated_features());
        let flipped = back.violations.iter().zip(&r.violations).all(|(a, b)| a.direction != b.direction);
        let negated = back.gaps.iter().zip(&r.gaps).all(|(a, b)| *a == -*b);
        ensure!(same_set && flipped && negated, "antisymmetry fails");
        let zero = similarity(&real, &real, &cfg).map_err(|e| e.to_string())?;
        ensure!(zero.passed && zero.gaps.iter().all(|g| *g == 0.0), "zero property fails");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(())
}

fn taxonomy_table() -> Check {
    use FeatureKind::*;
    let expected = [
        ("sunny_rainy", "Sunny / Rainy", Environment, 0.3),
        ("urban_highway", "Urban / Highway", Environment, 0.3),
        ("random_object_on_road", "Random Object on Road", Behavior, 0.2),
        ("leading_vehicle_cruising", "Leading Vehicle Cruising", Behavior, 0.2),
        ("leading_vehicle_stopped", "Leading Vehicle Stopped", Behavior, 0.2),
        ("parallel_vehicle_cutting_in", "Parallel Vehicle Cutting in", Behavior, 0.2),
        ("parallel_vehicle_cruising", "Parallel Vehicle Cruising", Behavior, 0.2),
        ("parallel_vehicle_stopped", "Parallel Vehicle Stopped", Behavior, 0.2),
        ("behind_vehicle_overtaking", "Behind Vehicle Overtaking", Behavior, 0.2),
        ("opposite_vehicle_turning", "Opposite Vehicle Turning", Behavior, 0.2),
    ];
    let tax = default_taxonomy();
    ensure!(tax.len() == expected.len(), "taxonomy has {} rows", tax.len());
    for (d, (id, name, kind, tau)) in tax.features.iter().zip(expected) {
        ensure!(
            d.id.as_str() == id && d.display_name == name && d.kind == kind && d.threshold == tau,
            "row {id} is {d:?}"
        );
    }
    // A 0.25 gap passes a 0.3 threshold and violates a 0.2 one.
    let cfg = ThresholdConfig::default();
    let real = FeatureVector::new(vec![0.5; 10]).unwrap();
    for sim_value in [0.75, 0.25] {
        let sim = FeatureVector::new(vec![sim_value; 10]).unwrap();
        let r = similarity(&real, &sim, &cfg).map_err(|e| e.to_string())?;
        let violated: Vec<_> = r.violated_features().collect();
        ensure!(violated == FeatureId::ALL[2..], "gap 0.25 violated {violated:?}");
    }
    Ok(())
}

fn feedback_templates() -> Check {
    let tax = default_taxonomy();
    let violation = |feature, direction| Violation { feature, gap: 0.0, threshold: 0.2, direction };
    let vs = [
        violation(FeatureId::ParallelVehicleCuttingIn, Direction::MissingInSim),
        violation(FeatureId::SunnyRainy, Direction::ExtraInSim),
        violation(FeatureId::OppositeVehicleTurning, Direction::ExtraInSim),
    ];
    let text = synthesize_feedback(&vs, &tax).map_err(|e| e.to_string())?;
    let expected = "there shouldn't be a sunny / rainy condition, please improve on that\n\
                    there should be a parallel vehicle cutting in behavior, please improve on that\n\
                    there shouldn't be a opposite vehicle turning behavior, please improve on that";
    ensure!(text == expected, "got {text:?}");
    for _ in 0..10 {
        ensure!(synthesize_feedback(&vs, &tax).map_err(|e| e.to_string())? == text, "feedback is not stable");
    }
    ensure!(synthesize_feedback(&[], &tax).is_err(), "empty violations must be rejected");
    Ok(())
}

fn parser_corpus() -> Check {
    let root = common::root();
    let catalog: Catalog =
        serde_json::from_str(&fs::read_to_string(root.join("data/catalog.json")).unwrap()).map_err(|e| e.to_string())?;
    let names = common::corpus_names();
    ensure!(names.len() == 20, "corpus has {} scripts", names.len());
    for name in &names {
        let src = common::corpus_script(name);
        let s = ScenicScript::parse(&src).map_err(|d| format!("{name}: {d:?}"))?;
        let diags = s.validate(&catalog);
        ensure!(diags.is_empty(), "{name}: {diags:?}");
        let again = ScenicScript::parse(&s.render()).map_err(|d| format!("{name} re-parse: {d:?}"))?;
        ensure!(again.tree == s.tree, "{name}: round trip changed the tree");
    }
    let mut negatives = 0;
    let mut stems = std::collections::BTreeSet::new();
    for entry in fs::read_dir(root.join("crates/core/tests/negative")).unwrap() {
        let path = entry.unwrap().path();
        let src = fs::read_to_string(&path).unwrap();
        let header = src.lines().next().and_then(|l| l.strip_prefix("# expect:")).ok_or("missing header")?;
        let (code, line) = header.split_once('@').ok_or("bad header")?;
        let (code, line) = (code.trim(), line.trim().parse::<usize>().map_err(|e| e.to_string())?);
        let diags = match ScenicScript::parse(&src) {
            Ok(s) => s.validate(&catalog),
            Err(d) => d,
        };
        ensure!(
            diags.iter().any(|d| d.code == code && d.line == line),
            "{}: expected {code} @ {line}, got {diags:?}",
            path.display()
        );
        negatives += 1;
        stems.insert(path.file_stem().unwrap().to_string_lossy().into_owned());
    }
    ensure!(negatives >= 10, "only {negatives} negative scripts");
    for stem in ["unknown_class", "unknown_behavior", "missing_ego", "bad_specifier"] {
        ensure!(stems.contains(stem), "no negative script {stem}.scenic");
    }
    Ok(())
}

fn convergence() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let faithful = common::mock_setup(MockMode::Faithful, 6);
    let names = common::corpus_names();
    let mut rng = StdRng::seed_from_u64(7);
    for case in 0..25 {
        let k = 1 + case % 5;
        let mut features = FeatureId::ALL.to_vec();
        for i in 0..features.len() {
            features.swap(i, rng.random_range(i..FeatureId::COUNT));
        }
        let flips = &features[..k];
        let fixture = &names[rng.random_range(0..names.len())];
        let video = common::fixture_video(dir.path(), &format!("c{case}"), fixture, flips);
        let (_, st) = faithful.engine.start(&video, &dir.path().join("runs")).map_err(|e| e.to_string())?;
        ensure!(st.outcome == Some(Outcome::Accepted), "{fixture} with {flips:?}: {:?}", st.outcome);
        ensure!(st.iterations.len() <= k + 1, "{fixture} with {flips:?}: {} iterations", st.iterations.len());
    }

    let stall = common::mock_setup(MockMode::Stall, 5);
    let video = common::fixture_video(dir.path(), "stall", "highway_cruising", &[FeatureId::LeadingVehicleStopped]);
    let (_, st) = stall.engine.start(&video, &dir.path().join("runs")).map_err(|e| e.to_string())?;
    ensure!(
        st.outcome == Some(Outcome::BudgetExhausted) && st.iterations.len() == 5,
        "stalling run ended {:?} after {} iterations",
        st.outcome,
        st.iterations.len()
    );

    let one = common::mock_setup(MockMode::OneAtATime, 5);
    let flips = [FeatureId::SunnyRainy, FeatureId::ParallelVehicleCuttingIn];
    let video = common::fixture_video(dir.path(), "resume", "highway_cruising", &flips);
    let (_, reference) = one.engine.start(&video, &dir.path().join("ref")).map_err(|e| e.to_string())?;
    let mut seen = 0;
    let mut kill = |_: &RunState, _| {
        seen += 1;
        if seen == 5 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
    };
    let (run, partial) = one.engine.start_with(&video, &dir.path().join("cut"), &mut kill).map_err(|e| e.to_string())?;
    ensure!(partial.outcome.is_none(), "run was not interrupted");
    let resumed = one.engine.resume(&run).map_err(|e| e.to_string())?;
    let scripts = |s: &RunState| s.iterations.iter().map(|i| i.script.clone()).collect::<Vec<_>>();
    ensure!(
        resumed.outcome == reference.outcome && scripts(&resumed) == scripts(&reference),
        "resumed run differs from the uninterrupted one"
    );
    Ok(())
}

fn report_fixture() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let videos = common::mixed_videos(dir.path(), 15, 17, 18);
    let s = common::mock_setup(MockMode::Faithful, 5);
    let mut dirs = Vec::new();
    for r in s.engine.batch(&videos, &dir.path().join("runs"), 4) {
        dirs.push(r.map_err(|e| e.to_string())?.0);
    }
    let rep = report(&dirs).map_err(|e| e.to_string())?;
    let (auto, refine) = (percent(rep.accepted_rate), percent(rep.refinement_rate));
    ensure!(rep.total_runs == 50 && rep.accepted == 32 && rep.refined_runs == 17, "{rep:?}");
    ensure!(auto == "64.0%" && refine == "34.0%", "rates {auto} and {refine}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(())
}

fn gateway_transport() -> Check {
    let registry = FewShotRegistry::load(&common::root().join("fixtures")).map_err(|e| e.to_string())?;
    let frames = FramePack::load(&common::root().join("fixtures/script/ped_crossing/frames")).map_err(|e| e.to_string())?;
    let cfg = |stub: &Stub, retry_cap, deadline| HttpConfig {
        endpoint: stub.url.clone(),
        model: "stub".into(),
        temperature: 0.0,
        api_key: "test".into(),
        retry_cap,
        deadline,
        backoff_base: Duration::from_millis(5),
        backoff_max: Duration::from_millis(20),
        capabilities: Capabilities::default(),
    };
    let gateway = |c: HttpConfig| {
        let b = Arc::new(HttpBackend::new(c, InFlightLimit::new(2)).unwrap());
        Gateway::new(b.clone(), b, &registry)
    };

    let stub = Stub::start(vec![Reply::status(429), Reply::status(429), Reply::content("```\nego = new Car\n```")]);
    let reply = gateway(cfg(&stub, 3, Duration::from_secs(10)))
        .generate_script(&frames, None, None)
        .map_err(|f| f.error.to_string())?;
    let reqs = stub.requests();
    ensure!(reply.call.attempts == 3 && reqs.len() == 3, "{} attempts, {} requests", reply.call.attempts, reqs.len());
    ensure!(reqs.iter().all(|r| r.body == reqs[0].body), "retried bodies differ");
    let g = gateway(cfg(&stub, 0, Duration::from_secs(1)));
    let payload = g.script_payload(&frames, None, None).map_err(|e| e.to_string())?;
    ensure!(
        request_body(&payload, "m", 0.2, Capabilities::default()) == request_body(&payload, "m", 0.2, Capabilities::default()),
        "request body is not deterministic"
    );

    let slow = Stub::start(vec![Reply::content("late").delayed(Duration::from_secs(3))]);
    let t = Instant::now();
    let err = gateway(cfg(&slow, 1, Duration::from_millis(250)))
        .generate_script(&frames, None, None)
        .err()
        .ok_or("slow server did not fail")?;
    ensure!(
        err.error.kind == ErrorKind::Deadline && err.error.attempts == 2 && t.elapsed() < Duration::from_secs(2),
        "deadline: {} in {:?}",
        err.error,
        t.elapsed()
    );

    let keys = |v: &str| FeatureId::ALL.iter().map(|f| format!("\"{}\": {v}", f.as_str())).collect::<Vec<_>>();
    let mut k = keys("0.4");
    k[0] = format!("\"{}\": 1.04", FeatureId::ALL[0].as_str());
    let stub = Stub::start(vec![Reply::content(&format!("{{{}}}", k.join(", ")))]);
    let r = gateway(cfg(&stub, 0, Duration::from_secs(10))).extract_features(&frames).map_err(|f| f.error.to_string())?;
    ensure!(r.vector.values()[0] == 1.0 && r.call.warnings.len() == 1, "clamping: {:?}", r.vector);
    k[0] = format!("\"{}\": 1.2", FeatureId::ALL[0].as_str());
    let stub = Stub::start(vec![Reply::content(&format!("{{{}}}", k.join(", ")))]);
    let e = gateway(cfg(&stub, 0, Duration::from_secs(10))).extract_features(&frames).err().ok_or("1.2 accepted")?;
    ensure!(e.error.kind == ErrorKind::MalformedResponse, "out of range: {}", e.error);
    let nine = keys("0.4")[..9].join(", ");
    let stub = Stub::start(vec![Reply::content(&format!("{{{nine}}}"))]);
    let e = gateway(cfg(&stub, 0, Duration::from_secs(10))).extract_features(&frames).err().ok_or("nine keys accepted")?;
    ensure!(e.error.kind == ErrorKind::MalformedResponse, "missing key: {}", e.error);
    Ok(())
}

fn frame_sampling() -> Check {
    let got = sample_indices(300, 10).map_err(|e| e.to_string())?;
    ensure!(got == [0, 33, 66, 99, 132, 166, 199, 232, 265, 299], "sample_indices(300, 10) = {got:?}");
    let mut rng = StdRng::seed_from_u64(300);
    for _ in 0..1000 {
        let frames = rng.random_range(1..100_000usize);
        let n = rng.random_range(1..=frames.min(64));
        let idx = sample_indices(frames, n).map_err(|e| e.to_string())?;
        ensure!(idx.len() == n && idx[0] == 0, "({frames}, {n}) -> {idx:?}");
        ensure!(n == 1 || idx[n - 1] == frames - 1, "({frames}, {n}) misses the last frame");
        ensure!(idx.windows(2).all(|w| w[0] < w[1]), "({frames}, {n}) is not increasing");
    }
    // The same indices come out of a real frame pack.
    let dir = tempfile::tempdir().unwrap();
    let video = common::write_video(dir.path(), "clip", &dashsim::mockvid::MockVideo::new(300, 30.0));
    let pack = dashsim::frames::build_frame_pack(
        &dashsim::frames::SyntheticFrameSource,
        &video,
        &dashsim::frames::FrameSettings::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure!(pack.indices == got, "frame pack indices {:?}", pack.indices);
    Ok(())
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check); 8] = [
        ("similarity oracle equivalence", similarity_oracle),
        ("taxonomy table fidelity", taxonomy_table),
        ("feedback templates", feedback_templates),
        ("parser corpus and negatives", parser_corpus),
        ("convergence, stall and resume", convergence),
        ("report fixture", report_fixture),
        ("gateway transport", gateway_transport),
        ("frame sampling", frame_sampling),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let t = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match result {
            Ok(()) => println!("PASS {name} ({:.2}s)", t.elapsed().as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
