//! One PASS/FAIL line per acceptance criterion, with wall-clock limits.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use num_bigint::BigUint;
use rha_core::cm::cm_run;
use rha_core::contraction::{bound_c_alpha, cnt_star, ContractRun};
use rha_core::gadgets::{compile_cm, probe_bundle, run_bundle, Encoding, Probe};
use rha_core::model::{AtomicConstraint, ModelKind, Relation, Valuation, VarId};
use rha_core::region::{enumerate_regions, region_of, representative, satisfies, successor_chain, Region};
use rha_core::semantics::validate_run;
use rha_core::testgen::{random_model, GenParams};
use rha_core::{Rational, RectConstraint};

fn gadget_arithmetic() -> String {
    let db = probe_bundle(Encoding::TwoSw, Probe::Double).unwrap();
    let hf = probe_bundle(Encoding::TwoSw, Probe::Halve).unwrap();
    let mut n = 0;
    for c in 0..=4u32 {
        for d in 0..=(4 - c) {
            let x = enc23(c, d);
            let xy = |a: Rational, b: Rational| Valuation::from_values(vec![a, b]);
            let two_x = &x * Rational::from_int(2);
            if two_x < Rational::one() {
                assert_eq!(db.run(xy(x.clone(), Rational::zero())).unwrap().val, xy(Rational::zero(), two_x));
                n += 1;
            }
            let half = &x * Rational::new(1, 2);
            assert_eq!(hf.run(xy(x.clone(), Rational::zero())).unwrap().val, xy(Rational::zero(), half));
            n += 1;
        }
    }
    format!("{n} exact gadget runs")
}

fn zero_check() -> String {
    let po2 = probe_bundle(Encoding::TwoSw, Probe::PowerOf2).unwrap();
    for c in 0..=3u32 {
        for d in 0..=3u32 {
            let v = Valuation::from_values(vec![enc23(c, d), Rational::zero()]);
            assert_eq!(po2.run(v).unwrap().yes, d == 0, "c={c} d={d}");
        }
    }
    "16 values".into()
}

fn halting_equivalence() -> String {
    let mut n = 0;
    for enc in [Encoding::TwoSw, Encoding::ThreeSwGf] {
        for text in HALTING.iter().chain(LOOPING.iter()) {
            let cm = machine(text);
            let reference = cm_run(&cm, 200).unwrap();
            let b = compile_cm(&cm, enc);
            let out = run_bundle(&b, 200).unwrap();
            assert_eq!(out.halted, reference.halted, "{enc:?} {text}");
            if reference.halted {
                assert!(reference.trace.len() <= 26);
                assert!(out.agrees_with(&reference));
            }
            check_encoding(&b, &out, &reference);
            n += 1;
        }
    }
    format!("{n} program/encoding pairs")
}

fn time_bounded_gadgets() -> String {
    let mut longest = Rational::zero();
    for enc in [Encoding::FiveClkTb, Encoding::FourteenSwTb] {
        for text in HALTING {
            let cm = machine(text);
            let reference = cm_run(&cm, 200).unwrap();
            let b = compile_cm(&cm, enc);
            let out = run_bundle(&b, 200).unwrap();
            assert!(out.halted && out.agrees_with(&reference), "{enc:?} {text}");
            for (k, t) in out.instr_durations.iter().enumerate() {
                assert!(*t <= Rational::from_int(9) * pow(Rational::new(1, 2), k as u64), "{enc:?} instr {k}: {t}");
            }
            assert!(out.duration < Rational::from_int(18));
            longest = longest.max(out.duration.clone());
        }
    }
    // Up_2^Z with β = 1/2^k takes 5β/2.
    let p = probe_bundle(Encoding::FourteenSwTb, Probe::UpZ).unwrap();
    for k in 1..=4u64 {
        let mut v = Valuation::zero(p.model.nvars());
        for (i, name) in p.model.vars.iter().enumerate() {
            if matches!(name.as_bytes()[0], b'x' | b'y' | b'z') {
                v.set(VarId(i), gap(k));
            }
        }
        let beta = pow(Rational::new(1, 2), k);
        assert_eq!(p.run(v).unwrap().duration, Rational::new(5, 2) * beta);
    }
    format!("longest total {longest}")
}

fn region_correctness() -> String {
    let rates_all = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let rels = [Relation::Lt, Relation::Le, Relation::Eq, Relation::Ge, Relation::Gt];
    let mut n = 0;
    for cmax in [1, 2] {
        let regions = enumerate_regions(cmax);
        for r in &regions {
            for rates in rates_all {
                let chain = successor_chain(r, rates, cmax);
                for k in 0..5 {
                    let p = representative(r, cmax, k);
                    assert!(contains(r, &p.0, &p.1, cmax));
                    assert_eq!(flow_regions(&p, rates, cmax), chain, "{r:?} {rates:?}");
                    n += 1;
                }
            }
        }
        let grid: Vec<Rational> = (0..=(cmax + 2) * 12).map(|k| Rational::new(k, 12)).collect();
        let mut hit: BTreeSet<Region> = BTreeSet::new();
        for x in &grid {
            for y in &grid {
                let owners: Vec<&Region> = regions.iter().filter(|r| contains(r, x, y, cmax)).collect();
                assert_eq!(owners.len(), 1);
                assert_eq!(*owners[0], region_of(x, y, cmax));
                hit.insert(*owners[0]);
                for var in [VarId(0), VarId(1)] {
                    for rel in rels {
                        for c in 0..=cmax {
                            let g = RectConstraint::new(vec![AtomicConstraint::new(var, rel, c)]);
                            let v = Valuation::from_values(vec![x.clone(), y.clone()]);
                            assert_eq!(g.eval(&v), satisfies(owners[0], &g, cmax));
                        }
                    }
                }
            }
        }
        assert_eq!(hit.len(), regions.len());
    }
    format!("{n} sampled flows")
}

fn region_rsm_vs_concrete() -> String {
    let mut n = 0;
    for text in [DB, FRACS, VALREC] {
        let m = model(text);
        let compared = compare_all(&m);
        assert_eq!(compared, node_targets(&m).len());
        n += compared;
    }
    let mut r = rng(61);
    for _ in 0..8 {
        let p = GenParams {
            nvars: 2,
            components: 2,
            nodes: 3,
            extra_edges: 2,
            cmax: 1,
            ..GenParams::default()
        };
        n += compare_all(&random_model(&mut picker(&mut r), &p));
    }
    format!("{n} targets on 11 models")
}

fn contraction_suite() -> String {
    let s = suite(31, 100);
    assert!(s.contracted_steps > 0);
    let keys: Vec<char> = "abcdaebf".chars().collect();
    let seq = ContractRun {
        steps: vec![(); keys.len() - 1],
        delays: vec![Rational::new(1, 8); keys.len()],
        keys,
    };
    assert_eq!(cnt_star(&seq), seq);
    let m = model(REFNOCNT);
    let deep = deep_run(&m);
    validate_run(&m, &deep).unwrap();
    let whole = whole_run(&m, &deep);
    assert_eq!(cnt_star(&whole), whole);
    format!("{} runs, {} steps removed", s.runs, s.contracted_steps)
}

fn tb_decision() -> String {
    let m = model(REFNOCNT);
    let target = m.resolve_location("B1.ex1").unwrap();
    let res = tb_query(&m, target, "1", 2, 12, 2);
    assert!(res.reachable);
    assert_eq!(res.witness.unwrap().duration(), Rational::one());
    let (mut n, mut models) = (0, 1);
    for (name, loc) in node_targets(&m) {
        assert!(tb_agree(&m, &name, loc, "1", 2, 10));
        n += 1;
    }
    let mut r = rng(17);
    for i in 0..6 {
        let p = GenParams {
            nvars: 1 + i % 2,
            kind: if i % 3 == 0 { ModelKind::Clock } else { ModelKind::Stopwatch },
            components: 2,
            extra_edges: 2,
            cmax: 1 + (i % 2) as i64,
            ..GenParams::default()
        };
        let rm = random_model(&mut picker(&mut r), &p);
        let before = n;
        for (name, loc) in node_targets(&rm) {
            n += tb_agree(&rm, &name, loc, ["1", "2", "1/2"][i % 3], 2, 7) as usize;
        }
        models += (n > before) as usize;
    }
    assert!(models >= 3, "only {models} models compared");
    assert_eq!(bound_c_alpha(1, 1, 1, &BigUint::from(2u32), 3, 1), BigUint::from(15552u32));
    format!("{n} conclusive comparisons on {models} models, bound 15552")
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> String); 8] = [
        ("gadget arithmetic", 1, gadget_arithmetic),
        ("zero check", 1, zero_check),
        ("halting equivalence", 30, halting_equivalence),
        ("time-bounded gadgets", 60, time_bounded_gadgets),
        ("region correctness", 60, region_correctness),
        ("region RSM vs concrete search", 60, region_rsm_vs_concrete),
        ("contraction suite", 120, contraction_suite),
        ("time-bounded decision", 60, tb_decision),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let within = elapsed <= Duration::from_secs(limit);
        let (ok, detail) = match outcome {
            Ok(d) if within => (true, d),
            Ok(d) => (false, format!("{d}; over the time limit")),
            Err(e) => (
                false,
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default(),
            ),
        };
        failed += !ok as usize;
        println!(
            "{} {}. {name} ({:.2}s, limit {limit}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
