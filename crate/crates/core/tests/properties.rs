use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use dashsim_core::features::{parse_feedback, similarity, synthesize_feedback};
use dashsim_core::sampling::sample_indices;
use dashsim_core::scenic::{self, Catalog, ScenarioTree, ScenicScript, edit};
use dashsim_core::{Direction, FeatureId, FeatureVector, ThresholdConfig};
use proptest::prelude::*;

fn vector() -> impl Strategy<Value = FeatureVector> {
    proptest::collection::vec(0.0f64..=1.0, 10).prop_map(|v| FeatureVector::new(v).unwrap())
}

fn thresholds() -> impl Strategy<Value = ThresholdConfig> {
    proptest::collection::vec(0.01f64..=1.0, 10).prop_map(|t| {
        let map: BTreeMap<_, _> = FeatureId::ALL.into_iter().zip(t).collect();
        ThresholdConfig::with_overrides(map).unwrap()
    })
}

fn corpus() -> Vec<ScenicScript> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/script");
    let mut paths: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| ScenicScript::parse(&fs::read_to_string(p.join("script.scenic")).unwrap()).unwrap())
        .collect()
}

fn catalog() -> Catalog {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/catalog.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn catalog_unknown(script: &ScenicScript, cat: &Catalog) -> BTreeSet<(String, String)> {
    script
        .validate(cat)
        .into_iter()
        .filter(|d| d.code.starts_with("CATALOG_UNKNOWN"))
        .map(|d| (d.code, d.message))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn similarity_matches_naive_loop(real in vector(), sim in vector(), cfg in thresholds()) {
        let report = similarity(&real, &sim, &cfg).unwrap();
        let mut naive = Vec::new();
        for (i, f) in FeatureId::ALL.into_iter().enumerate() {
            let gap = sim.values()[i] - real.values()[i];
            if gap.abs() > cfg.threshold(f) {
                naive.push((f, gap));
            }
        }
        let got: Vec<_> = report.violations.iter().map(|v| (v.feature, v.gap)).collect();
        prop_assert_eq!(got, naive.clone());
        prop_assert_eq!(report.passed, naive.is_empty());
        for v in &report.violations {
            let expected = if v.gap < 0.0 { Direction::MissingInSim } else { Direction::ExtraInSim };
            prop_assert_eq!(v.direction, expected);
        }
    }

    #[test]
    fn similarity_is_antisymmetric(a in vector(), b in vector(), cfg in thresholds()) {
        let ab = similarity(&a, &b, &cfg).unwrap();
        let ba = similarity(&b, &a, &cfg).unwrap();
        for (x, y) in ab.gaps.iter().zip(&ba.gaps) {
            prop_assert_eq!(*x, -*y);
        }
        let fa: Vec<_> = ab.violated_features().collect();
        let fb: Vec<_> = ba.violated_features().collect();
        prop_assert_eq!(fa, fb);
    }

    #[test]
    fn identical_vectors_pass(a in vector(), cfg in thresholds()) {
        let r = similarity(&a, &a, &cfg).unwrap();
        prop_assert!(r.passed);
        prop_assert!(r.gaps.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn raising_thresholds_never_adds_violations(
        a in vector(),
        b in vector(),
        lo in proptest::collection::vec(0.01f64..=0.5, 10),
        bump in proptest::collection::vec(0.0f64..=0.5, 10),
    ) {
        let low: BTreeMap<_, _> = FeatureId::ALL.into_iter().zip(lo.iter().copied()).collect();
        let high: BTreeMap<_, _> = FeatureId::ALL
            .into_iter()
            .zip(lo.iter().zip(&bump).map(|(l, d)| l + d))
            .collect();
        let before: BTreeSet<_> = similarity(&a, &b, &ThresholdConfig::with_overrides(low).unwrap())
            .unwrap().violated_features().collect();
        let after: BTreeSet<_> = similarity(&a, &b, &ThresholdConfig::with_overrides(high).unwrap())
            .unwrap().violated_features().collect();
        prop_assert!(after.is_subset(&before));
    }

    #[test]
    fn feedback_is_deterministic_and_invertible(real in vector(), sim in vector()) {
        let cfg = ThresholdConfig::default();
        let report = similarity(&real, &sim, &cfg).unwrap();
        prop_assume!(!report.passed);
        let text = synthesize_feedback(&report.violations, cfg.taxonomy()).unwrap();
        let mut reversed = report.violations.clone();
        reversed.reverse();
        prop_assert_eq!(&text, &synthesize_feedback(&reversed, cfg.taxonomy()).unwrap());
        prop_assert_eq!(text.lines().count(), report.violations.len());
        let parsed = parse_feedback(&text, cfg.taxonomy());
        let expected: Vec<_> = report.violations.iter().map(|v| (v.feature, v.direction)).collect();
        prop_assert_eq!(parsed, expected);
    }

    #[test]
    fn sampling_endpoints_and_monotonicity(frame_count in 1usize..100_000, n_seed in 1usize..64) {
        let n = n_seed.min(frame_count);
        let idx = sample_indices(frame_count, n).unwrap();
        prop_assert_eq!(idx.len(), n);
        prop_assert_eq!(idx[0], 0);
        if n >= 2 {
            prop_assert_eq!(*idx.last().unwrap(), frame_count - 1);
        }
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < frame_count));
    }
}

#[test]
fn sampling_oracle() {
    assert_eq!(
        sample_indices(300, 10).unwrap(),
        [0, 33, 66, 99, 132, 166, 199, 232, 265, 299]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // Edits on corpus trees give valid scripts that round-trip and carry
    // exactly the requested change in hints.
    #[test]
    fn set_feature_touches_only_its_feature(
        pick in 0usize..20,
        edits in proptest::collection::vec((0usize..10, any::<bool>()), 1..5),
    ) {
        let cat = catalog();
        let script = &corpus()[pick];
        let mut tree: ScenarioTree = script.tree.clone();
        for (i, present) in edits {
            let f = FeatureId::ALL[i];
            let before = scenic::static_feature_hints(&ScenicScript::from_tree(tree.clone()));
            tree = edit::set_feature(&tree, f, present);
            let after = ScenicScript::from_tree(tree.clone());
            let hints = after.static_feature_hints();
            prop_assert_eq!(hints.contains(&f), present);
            for g in FeatureId::ALL.into_iter().filter(|g| *g != f) {
                prop_assert_eq!(hints.contains(&g), before.contains(&g), "{} changed", g);
            }
            let diags = after.validate(&cat);
            prop_assert!(diags.is_empty(), "{:#?}\n{}", diags, after.source);
            let reparsed = ScenicScript::parse(&after.source).unwrap();
            prop_assert_eq!(&reparsed.tree, &tree);
            prop_assert_eq!(reparsed.render(), after.source.clone());
        }
    }

    #[test]
    fn removing_declarations_adds_no_catalog_errors(
        pick in 0usize..20,
        which in 0usize..4,
        at in any::<prop::sample::Index>(),
    ) {
        let cat = catalog();
        let script = &corpus()[pick];
        let before = catalog_unknown(script, &cat);
        let mut tree = script.tree.clone();
        match which {
            0 if !tree.params.is_empty() => { let i = at.index(tree.params.len()); tree.params.remove(i); }
            1 if !tree.objects.is_empty() => { let i = at.index(tree.objects.len()); tree.objects.remove(i); }
            2 if !tree.requirements.is_empty() => { let i = at.index(tree.requirements.len()); tree.requirements.remove(i); }
            3 if !tree.terminations.is_empty() => { let i = at.index(tree.terminations.len()); tree.terminations.remove(i); }
            _ => {}
        }
        let after = catalog_unknown(&ScenicScript::from_tree(tree), &cat);
        prop_assert!(after.is_subset(&before), "{:?}", after);
    }
}

#[test]
fn hints_are_a_function_of_the_tree() {
    for script in corpus() {
        let rendered = ScenicScript::parse(&script.render()).unwrap();
        assert_eq!(script.static_feature_hints(), rendered.static_feature_hints());
    }
}

#[test]
fn minimal_script_render_is_a_fixpoint() {
    let src = "param weather = 'ClearNoon'\nego = new Car at (0,0)";
    let once = ScenicScript::parse(src).unwrap().render();
    let twice = ScenicScript::parse(&once).unwrap().render();
    assert_eq!(once, twice);
}

#[test]
fn hint_examples() {
    let hints = |s: &str| ScenicScript::parse(s).unwrap().static_feature_hints();
    assert!(hints("ego = new Car").is_empty());
    assert!(!hints("param weather = 'HardRainNoon'\nego = new Car").contains(&FeatureId::SunnyRainy));
    assert!(hints("param weather = 'ClearNoon'\nego = new Car").contains(&FeatureId::SunnyRainy));
    let stopped = "ego = new Car on road\nlead = new Car ahead of ego by 10, with behavior Idle()";
    assert_eq!(hints(stopped), BTreeSet::from([FeatureId::LeadingVehicleStopped]));
}
