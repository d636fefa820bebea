mod common;

use common::*;
use rha_core::model::validate_model;
use rha_core::region::build_region_rsm;
use rha_core::rsm::compute_summaries;
use rha_core::testgen::{random_model, GenParams};

#[test]
fn hand_models_agree_with_explicit_search() {
    for text in [DB, FRACS, VALREC] {
        let m = model(text);
        let n = compare_all(&m);
        assert_eq!(n, node_targets(&m).len(), "{}", m.name);
    }
}

#[test]
fn fracs_targets() {
    let m = model(FRACS);
    let rrsm = build_region_rsm(&m).unwrap();
    let reach = |t: &str| rrsm.reach(&m, m.resolve_location(t).unwrap(), false).reachable;
    assert!(reach("Main.ok"));
    assert!(reach("Main.late"));
    assert!(!reach("Main.never"));
    assert!(reach("Main.e"));
}

#[test]
fn random_glitch_free_models_agree_with_explicit_search() {
    let mut r = rng(61);
    let mut compared = 0;
    for _ in 0..25 {
        let p = GenParams {
            nvars: 2,
            components: 2,
            nodes: 3,
            extra_edges: 2,
            by_value: false,
            cmax: 1,
            ..GenParams::default()
        };
        let m = random_model(&mut picker(&mut r), &p);
        assert!(validate_model(&m).class.glitch_free);
        compared += compare_all(&m);
    }
    assert!(compared >= 100, "only {compared} targets compared");
}

#[test]
fn saturation_is_idempotent() {
    for text in [DB, FRACS, VALREC] {
        let m = model(text);
        let rrsm = build_region_rsm(&m).unwrap();
        let a = compute_summaries(&rrsm.rsm);
        let b = compute_summaries(&rrsm.rsm);
        assert_eq!(a, b);
        assert!(a.total() > 0);
    }
}

#[test]
fn rejects_models_outside_the_class() {
    let m = model(REFNOCNT);
    assert!(build_region_rsm(&m).is_err(), "one clock is not a two-stopwatch model");
}
