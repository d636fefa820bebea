mod common;

use common::*;
use rha_core::model::ModelKind;
use rha_core::semantics::{initial_configuration, validate_run};
use rha_core::tbreach::{decide_tb_reach, TbQuery};
use rha_core::testgen::{random_model, GenParams};
use rha_core::Rational;

#[test]
fn unbounded_context_example_with_two_frames() {
    let m = model(REFNOCNT);
    let target = m.resolve_location("B1.ex1").unwrap();
    let res = tb_query(&m, target, "1", 2, 12, 1);
    assert!(res.reachable);
    let w = res.witness.unwrap();
    validate_run(&m, &w).unwrap();
    assert_eq!(w.duration(), Rational::one());
    assert!(w.last().context.is_empty());
    assert!(!tb_query(&m, target, "1/2", 2, 12, 1).reachable);
    assert!(tb_query(&m, target, "1/2", 2, 12, 1).complete);
}

#[test]
fn unbounded_context_example_agrees_with_explicit_search() {
    let m = model(REFNOCNT);
    for (name, loc) in node_targets(&m) {
        for bound in ["1/2", "1", "3/2"] {
            for k in [1, 2, 3] {
                assert!(tb_agree(&m, &name, loc, bound, k, 10));
            }
        }
    }
}

#[test]
fn random_by_reference_models_agree_with_explicit_search() {
    let mut r = rng(17);
    let mut conclusive = 0;
    let mut reachable_and_unreachable = (0, 0);
    for i in 0..24 {
        let mut pick = picker(&mut r);
        let p = GenParams {
            nvars: 1 + i % 2,
            kind: if i % 3 == 0 { ModelKind::Clock } else { ModelKind::Stopwatch },
            components: 2,
            extra_edges: 2,
            cmax: 1 + (i % 2) as i64,
            ..GenParams::default()
        };
        let m = random_model(&mut pick, &p);
        let bound = ["1", "2", "1/2"][i % 3];
        for (name, loc) in node_targets(&m) {
            if tb_agree(&m, &name, loc, bound, 2, 7) {
                conclusive += 1;
                let reach = tb_query(&m, loc, bound, 2, 7, 1).reachable;
                if reach {
                    reachable_and_unreachable.0 += 1;
                } else {
                    reachable_and_unreachable.1 += 1;
                }
            }
        }
    }
    assert!(conclusive >= 100, "only {conclusive} conclusive comparisons");
    assert!(reachable_and_unreachable.0 > 10 && reachable_and_unreachable.1 > 10, "{reachable_and_unreachable:?}");
}

#[test]
fn verdict_and_witness_do_not_depend_on_jobs() {
    let m = model(REFNOCNT);
    let target = m.resolve_location("B1.ex1").unwrap();
    let a = tb_query(&m, target, "1", 2, 12, 1);
    let b = tb_query(&m, target, "1", 2, 12, 4);
    assert_eq!(a.reachable, b.reachable);
    assert_eq!(a.witness.map(|w| w.steps), b.witness.map(|w| w.steps));
    assert_eq!(a.skeletons_checked, b.skeletons_checked);
}

#[test]
fn by_value_models_are_rejected() {
    let m = model(VALREC);
    let q = TbQuery {
        target: m.resolve_location("Main.m2").unwrap(),
        bound: Rational::one(),
        context: 2,
        max_len: 5,
        jobs: 1,
    };
    assert!(decide_tb_reach(&m, &initial_configuration(&m), &q).is_err());
}
