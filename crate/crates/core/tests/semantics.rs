mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rha_core::gadgets::{compile_cm, Encoding};
use rha_core::model::{validate_model, AtomicConstraint, ModelKind, RateVector, Relation, Valuation, VarId};
use rha_core::parser::{parse_model, serialize_model};
use rha_core::semantics::{
    initial_configuration, simulate, step, validate_run, Configuration, EarliestOracle, Run, StepKind,
};
use rha_core::testgen::{random_model, random_run, GenParams};
use rha_core::trace::{read_trace, write_trace};
use rha_core::{Location, Rational, RectConstraint, RhaModel};

fn random_models(seed: u64, count: usize, p: &GenParams) -> Vec<RhaModel> {
    let mut r = rng(seed);
    (0..count).map(|_| random_model(&mut picker(&mut r), p)).collect()
}

fn runs_of(m: &RhaModel, seed: u64, count: usize) -> Vec<Run> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| random_run(m, initial_configuration(m), &mut picker(&mut r), 30, 4, None))
        .collect()
}

#[test]
fn corpus_models_round_trip() {
    let cm = rha_core::cm::parse_cm("0: inc c goto 1\n1: ifz c goto 3 else 2\n2: dec c goto 1\n3: halt").unwrap();
    let mut texts: Vec<String> = [REFNOCNT, DB, FRACS, VALREC].iter().map(|s| s.to_string()).collect();
    for enc in Encoding::ALL {
        texts.push(serialize_model(&compile_cm(&cm, enc).model));
    }
    for text in texts {
        let m = parse_model(&text).unwrap();
        let again = parse_model(&serialize_model(&m)).unwrap();
        assert_eq!(m, again, "{}", m.name);
        assert_eq!(serialize_model(&again), serialize_model(&m));
    }
}

#[test]
fn random_models_round_trip_and_validate() {
    let p = GenParams {
        by_value: true,
        nvars: 3,
        ..GenParams::default()
    };
    for m in random_models(3, 100, &p) {
        assert!(validate_model(&m).is_ok());
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }
}

#[test]
fn glitch_free_matches_a_brute_scan() {
    let p = GenParams {
        by_value: true,
        components: 3,
        ..GenParams::default()
    };
    for m in random_models(4, 200, &p) {
        let brute = m.boxes.iter().all(|b| {
            let n = b.by_value.len();
            n == 0 || (n == m.nvars() && (0..m.nvars()).all(|i| b.by_value.contains(&VarId(i))))
        });
        assert_eq!(validate_model(&m).class.glitch_free, brute);
    }
}

#[test]
fn random_runs_replay_and_round_trip() {
    for (i, m) in random_models(8, 40, &GenParams::default()).iter().enumerate() {
        for run in runs_of(m, i as u64, 3) {
            validate_run(m, &run).unwrap();
            let back = read_trace(m, &write_trace(m, &run)).unwrap();
            assert_eq!(back.init, run.init);
            assert_eq!(back.steps.len(), run.steps.len());
            for (a, b) in back.steps.iter().zip(&run.steps) {
                assert_eq!((&a.delay, &a.to), (&b.delay, &b.to));
            }
            validate_run(m, &back).unwrap();
        }
    }
}

#[test]
fn duration_is_the_sum_of_delays() {
    for m in random_models(9, 30, &GenParams::default()) {
        let out = simulate(&m, &EarliestOracle, 40).unwrap();
        let sum: Rational = out.run.steps.iter().map(|s| s.delay.clone()).sum();
        assert_eq!(out.run.duration(), sum);
        for run in runs_of(&m, 1, 2) {
            let mut acc = Rational::zero();
            for s in &run.steps {
                acc += &s.delay;
            }
            assert_eq!(run.duration(), acc);
        }
    }
}

/// Checks call/return matching and by-value restore with an explicit stack.
fn check_frames(m: &RhaModel, run: &Run) {
    let mut stack: Vec<(rha_core::BoxId, Valuation)> = Vec::new();
    for i in 0..run.len() {
        let (from, s) = (run.config(i), &run.steps[i]);
        match s.kind {
            StepKind::Call => {
                let Location::Call(b, _) = from.loc else { panic!("call from {:?}", from.loc) };
                assert!(s.delay.is_zero());
                stack.push((b, from.val.clone()));
            }
            StepKind::Return => {
                let (b, saved) = stack.pop().expect("return on an empty context");
                let Location::Return(rb, _) = s.to.loc else { panic!("return to {:?}", s.to.loc) };
                assert_eq!(rb, b, "frame popped by a different box");
                for x in &m.box_decl(b).by_value {
                    assert_eq!(s.to.val.get(*x), saved.get(*x), "by-value variable not restored");
                }
                for x in (0..m.nvars()).map(VarId).filter(|x| !m.box_decl(b).by_value.contains(x)) {
                    assert_eq!(s.to.val.get(x), from.val.get(x), "by-reference variable changed on return");
                }
            }
            StepKind::Edge(_) => {}
        }
        assert_eq!(stack.len(), s.to.context.len());
    }
}

#[test]
fn frames_match_and_by_value_variables_are_restored() {
    let p = GenParams {
        by_value: true,
        components: 3,
        ..GenParams::default()
    };
    let mut returns = 0;
    for (i, m) in random_models(10, 60, &p).iter().enumerate() {
        for run in runs_of(m, 100 + i as u64, 4) {
            check_frames(m, &run);
            returns += run.steps.iter().filter(|s| s.kind == StepKind::Return).count();
        }
    }
    assert!(returns > 20, "only {returns} returns exercised");
}

#[test]
fn valrec_restores_frozen_values() {
    let m = model(VALREC);
    let init = initial_configuration(&m);
    let target = m.resolve_location("Main.m2").unwrap();
    let lim = Limits {
        depth: 20,
        stack: 3,
        time_cap: None,
        states: 100_000,
    };
    let w = explicit_reach(&m, &init, target, &lim).witness.expect("m2 reachable");
    validate_run(&m, &w).unwrap();
    check_frames(&m, &w);
}

/// A single edge out of a node carrying `inv` with rates `r`.
fn inv_model(inv: RectConstraint, r: RateVector) -> RhaModel {
    let mut m = RhaModel::new("inv", &["x", "y"], ModelKind::General);
    let c = m.add_component("A");
    let a = m.add_node(c, "a", r, inv);
    let b = m.add_node(c, "b", RateVector::uniform(2, 1), RectConstraint::top());
    m.components[c].entries.push(a);
    m.components[c].exits.push(b);
    m.add_edge(Location::Node(a), Location::Node(b), RectConstraint::top(), BTreeSet::new(), None);
    m
}

#[test]
fn endpoint_invariant_check_matches_dense_sampling() {
    let mut r = rng(77);
    let rels = [Relation::Lt, Relation::Le, Relation::Eq, Relation::Ge, Relation::Gt];
    for _ in 0..1000 {
        let atoms = (0..r.gen_range(1..=3))
            .map(|_| AtomicConstraint::new(VarId(r.gen_range(0..2)), rels[r.gen_range(0..5)], r.gen_range(0..4)))
            .collect();
        let inv = RectConstraint::new(atoms);
        let rates = RateVector(vec![r.gen_range(0..3), r.gen_range(0..3)]);
        let m = inv_model(inv.clone(), rates.clone());
        let v = Valuation::from_values(vec![Rational::new(r.gen_range(0..12), 4), Rational::new(r.gen_range(0..12), 4)]);
        let t = Rational::new(r.gen_range(0..12), r.gen_range(1..5));
        let cfg = Configuration::new(Location::Node(rha_core::NodeId(0)), v.clone());
        let accepted = step(&m, &cfg, &t, StepKind::Edge(rha_core::EdgeId(0))).is_ok();
        let sampled = (0..=64).all(|k| {
            let s = &t * Rational::new(k, 64);
            inv.eval(&v.evolve_and_reset(&rates, &s, &BTreeSet::new()).unwrap())
        });
        assert_eq!(accepted, sampled, "inv {inv:?} rates {rates:?} v {v:?} t {t}");
    }
}

fn rational() -> impl Strategy<Value = Rational> {
    (-1000i64..1000, 1i64..200).prop_map(|(n, d)| Rational::new(n, d))
}

proptest! {
    #[test]
    fn rationals_round_trip(a in rational(), b in rational()) {
        prop_assert_eq!(a.to_string().parse::<Rational>().unwrap(), a.clone());
        prop_assert_eq!(a.to_fraction_string().parse::<Rational>().unwrap(), a.clone());
        prop_assert_eq!(&(&a + &b) - &b, a);
    }

    #[test]
    fn evolution_is_additive(
        v in prop::collection::vec(rational(), 3),
        r in prop::collection::vec(0u32..3, 3),
        t1 in (0i64..50, 1i64..9),
        t2 in (0i64..50, 1i64..9),
    ) {
        let v = Valuation::from_values(v);
        let r = RateVector(r);
        let (t1, t2) = (Rational::new(t1.0, t1.1), Rational::new(t2.0, t2.1));
        let none = BTreeSet::new();
        let two = v.evolve_and_reset(&r, &t1, &none).unwrap().evolve_and_reset(&r, &t2, &none).unwrap();
        prop_assert_eq!(two, v.evolve_and_reset(&r, &(&t1 + &t2), &none).unwrap());
    }

    #[test]
    fn parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_model(&text);
    }

    #[test]
    fn parser_never_panics_on_keyword_soup(words in prop::collection::vec(
        prop::sample::select(vec![
            "model", "m", "vars", "x", "y", "kind", "clock", "component", "A", "B", "entry", "exit",
            "node", "n", "box", "b", ":", "byvalue", "*", "{x}", "port", "b.en", "edge", "->", "guard",
            "x<1", "y=2", "&", "reset", "{y}", "init", "A.en", "x=1/2", "rate", "x:0", "inv", "\n", "#",
        ]),
        0..60,
    )) {
        let _ = parse_model(&words.join(" "));
    }
}
