//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rha_core::cm::{parse_cm, CmRun, CounterMachine};
use num_bigint::BigUint;
use rha_core::contraction::{annotate_run, cnt_star, contract_run, split_pipeline, type3_bound, ContractKey, ContractRun};
use rha_core::gadgets::{Encoding, GadgetBundle, GadgetRun};
use rha_core::model::{Valuation, VarId};
use rha_core::parser::parse_model;
use rha_core::region::build_region_rsm;
use rha_core::region::{region_of, Interval, Order, Region};
use rha_core::semantics::{forced_step, initial_configuration, step, validate_run, Configuration, Run, Step, StepKind};
use rha_core::tbreach::{decide_tb_reach, Skeleton, TbQuery, TbResult};
use rha_core::testgen::{random_model, random_run, GenParams};
use rha_core::{Location, Rational, RhaModel};

pub const REFNOCNT: &str = include_str!("../../../../models/refnocnt.rha");
pub const DB: &str = include_str!("../../../../models/db.rha");

/// Non-recursive two-stopwatch model whose targets depend on the order of
/// fractional parts: `late` needs y to overtake x after x stops.
pub const FRACS: &str = "\
model fracs
vars x y
kind stopwatch
component Main
entry s
node a rate x:1,y:1
node b rate x:0,y:1
node ok
node late
node never
exit e
edge s -> a
edge a -> b guard x<1 & x>0 reset {y}
edge b -> ok guard y=1 & x<1
edge b -> late guard y>1 & x<1
edge a -> never guard x>1 & y<1
edge ok -> e
init Main.s x=0 y=0
";

/// Recursion through a by-value box: P calls itself with x frozen.
pub const VALREC: &str = "\
model valrec
vars x y
kind stopwatch
component Main
entry m0
node m1 rate x:1,y:1
exit m2
box p : P byvalue *
edge m0 -> m1
edge m1 -> p.pin guard x<1
edge p.pout -> m2 guard y<1
component P
entry pin
node run rate x:0,y:1
node deep rate x:1,y:0
exit pout
box q : P byvalue *
edge pin -> run reset {y}
edge run -> q.pin guard y=1 reset {y}
edge q.pout -> deep guard y=0
edge deep -> pout guard x>=1
edge run -> pout guard y<1
init Main.m0 x=0 y=0
";

pub fn model(text: &str) -> RhaModel {
    parse_model(text).unwrap_or_else(|e| panic!("{e}"))
}

pub fn q(s: &str) -> Rational {
    s.parse().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A uniform draw from `0..n` usable as a `testgen` pick.
pub fn picker(rng: &mut ChaCha8Rng) -> impl FnMut(usize) -> usize + '_ {
    move |n| rng.gen_range(0..n.max(1))
}

/// Delays at which some ticking variable meets an integer or another
/// variable's fractional part, with midpoints, one point past the last
/// boundary and the remaining time `cap` when given.
pub fn boundary_delays(model: &RhaModel, cfg: &Configuration, cap: Option<&Rational>) -> Vec<Rational> {
    let rates = model.rates(cfg.loc);
    let horizon = model.cmax() + 1;
    let mut marks: BTreeSet<Rational> = BTreeSet::new();
    marks.insert(Rational::zero());
    let vals: Vec<&Rational> = cfg.val.iter().collect();
    let fracs: Vec<Rational> = vals.iter().map(|v| v.fract()).collect();
    for (i, v) in vals.iter().enumerate() {
        let r = rates.0[i];
        if r == 0 {
            continue;
        }
        for n in 0..=horizon {
            let mut levels = vec![Rational::zero()];
            levels.extend(fracs.iter().cloned());
            for f in levels {
                let t = (Rational::from_int(n) + f - *v) / Rational::from_int(r as i64);
                if !t.is_negative() {
                    marks.insert(t);
                }
            }
        }
    }
    if let Some(c) = cap {
        if !c.is_negative() {
            marks.insert(c.clone());
        }
    }
    let sorted: Vec<Rational> = marks.into_iter().collect();
    let mut out = sorted.clone();
    for w in sorted.windows(2) {
        out.push((&w[0] + &w[1]) / Rational::from_int(2));
    }
    if rates.0.iter().any(|&r| r > 0) {
        out.push(sorted.last().unwrap() + Rational::one());
    }
    if let Some(c) = cap {
        out.retain(|t| t <= c);
    }
    out.sort();
    out.dedup();
    out
}

pub struct Limits {
    pub depth: usize,
    pub stack: usize,
    pub time_cap: Option<Rational>,
    pub states: usize,
}

pub struct SearchResult {
    pub witness: Option<Run>,
    /// The state budget ran out before the depth bound was exhausted.
    pub truncated: bool,
}

/// Breadth-first search over concrete configurations with boundary delays.
pub fn explicit_reach(model: &RhaModel, init: &Configuration, target: Location, lim: &Limits) -> SearchResult {
    struct Node {
        cfg: Configuration,
        elapsed: Rational,
        depth: usize,
        parent: Option<(usize, Step)>,
    }
    let rebuild = |nodes: &[Node], mut i: usize| {
        let mut steps = Vec::new();
        while let Some((p, s)) = &nodes[i].parent {
            steps.push(s.clone());
            i = *p;
        }
        steps.reverse();
        let mut run = Run::new(init.clone());
        run.steps = steps;
        run
    };
    let mut nodes = vec![Node {
        cfg: init.clone(),
        elapsed: Rational::zero(),
        depth: 0,
        parent: None,
    }];
    let mut seen: HashSet<(Configuration, Option<Rational>)> = HashSet::new();
    let tag = |c: &Configuration, e: &Rational| (c.clone(), lim.time_cap.as_ref().map(|_| e.clone()));
    seen.insert(tag(init, &Rational::zero()));
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        if nodes[i].cfg.loc == target {
            return SearchResult {
                witness: Some(rebuild(&nodes, i)),
                truncated: false,
            };
        }
        if nodes[i].depth == lim.depth {
            continue;
        }
        if nodes.len() > lim.states {
            return SearchResult {
                witness: None,
                truncated: true,
            };
        }
        let cfg = nodes[i].cfg.clone();
        let elapsed = nodes[i].elapsed.clone();
        let mut succs: Vec<(Rational, StepKind)> = Vec::new();
        match forced_step(model, &cfg) {
            Some(StepKind::Call) if cfg.context.len() >= lim.stack => {}
            Some(k) => succs.push((Rational::zero(), k)),
            None => {
                let left = lim.time_cap.as_ref().map(|c| c - &elapsed);
                for t in boundary_delays(model, &cfg, left.as_ref()) {
                    for e in model.outgoing(cfg.loc) {
                        succs.push((t.clone(), StepKind::Edge(e)));
                    }
                }
            }
        }
        for (t, kind) in succs {
            let Ok(to) = step(model, &cfg, &t, kind) else { continue };
            let el = &elapsed + &t;
            if !seen.insert(tag(&to, &el)) {
                continue;
            }
            nodes.push(Node {
                cfg: to.clone(),
                elapsed: el,
                depth: nodes[i].depth + 1,
                parent: Some((i, Step { delay: t, kind, to })),
            });
            queue.push_back(nodes.len() - 1);
        }
    }
    SearchResult {
        witness: None,
        truncated: false,
    }
}

/// Node locations of a model, as qualified names.
pub fn node_targets(model: &RhaModel) -> Vec<(String, Location)> {
    model
        .all_locations()
        .into_iter()
        .filter(|l| matches!(l, Location::Node(_)))
        .map(|l| (model.qualified_loc_name(l), l))
        .collect()
}

// Regions.

pub fn int(n: i64) -> Rational {
    Rational::from_int(n)
}

pub fn in_interval(v: &Rational, iv: Interval, cmax: i64) -> bool {
    match iv {
        Interval::Point(c) => *v == int(c),
        Interval::Open(c) => *v > int(c) && *v < int(c + 1),
        Interval::Above => *v > int(cmax),
    }
}

/// Membership written from the definition, independently of `region_of`.
pub fn contains(r: &Region, x: &Rational, y: &Rational, cmax: i64) -> bool {
    if !in_interval(x, r.ix, cmax) || !in_interval(y, r.iy, cmax) {
        return false;
    }
    let (fx, fy) = (x - x.floor(), y - y.floor());
    match r.order {
        Order::XLeY => fx < fy,
        Order::YLeX => fy < fx,
        Order::Equal => fx == fy,
        Order::None => !(r.ix.is_open_bounded() && r.iy.is_open_bounded()),
    }
}

/// Regions visited when flowing `p` at constant `rates`, from crossing times
/// of integers and of the other variable's fractional part.
pub fn flow_regions(p: &(Rational, Rational), rates: (u32, u32), cmax: i64) -> Vec<Region> {
    let (x, y) = p;
    let rx = int(rates.0 as i64);
    let ry = int(rates.1 as i64);
    let mut times: BTreeSet<Rational> = BTreeSet::new();
    times.insert(Rational::zero());
    for n in 0..=cmax + 2 {
        if rates.0 == 1 {
            times.insert(int(n) - x);
        }
        if rates.1 == 1 {
            times.insert(int(n) - y);
        }
        if rates.0 != rates.1 {
            // x(t) - y(t) = n or -n
            let diff = x - y;
            let slope = &rx - &ry;
            times.insert((int(n) - &diff) / &slope);
            times.insert((int(-n) - &diff) / &slope);
        }
    }
    let times: Vec<Rational> = times.into_iter().filter(|t| !t.is_negative()).collect();
    let mut samples = times.clone();
    for w in times.windows(2) {
        samples.push((&w[0] + &w[1]) / int(2));
    }
    samples.push(times.last().unwrap() + Rational::one());
    samples.sort();
    let mut seen: Vec<Region> = Vec::new();
    for t in samples {
        let r = region_of(&(x + &rx * &t), &(y + &ry * &t), cmax);
        if seen.last() != Some(&r) {
            seen.push(r);
        }
    }
    seen.remove(0);
    seen
}

// Contraction.

/// Independent witness search: some `i < j` with equal pair and outgoing
/// step such that every pair strictly between occurs somewhere before `i`.
pub fn has_witness<K: Eq, E: Eq>(r: &ContractRun<K, E>) -> bool {
    let n = r.steps.len();
    (0..n).any(|j| {
        (0..j).any(|i| {
            r.keys[i] == r.keys[j]
                && r.steps[i] == r.steps[j]
                && (i + 1..j).all(|p| (0..i).any(|q| r.keys[q] == r.keys[p]))
        })
    })
}

pub fn whole_run(m: &RhaModel, run: &Run) -> ContractRun<ContractKey, StepKind> {
    let ann = annotate_run(m, run, m.cmax()).unwrap();
    let mut delays: Vec<Rational> = run.steps.iter().map(|s| s.delay.clone()).collect();
    delays.push(Rational::zero());
    ContractRun {
        keys: ann.keys,
        steps: run.steps.iter().map(|s| s.kind).collect(),
        delays,
    }
}

pub fn fragment(cr: &ContractRun<ContractKey, StepKind>, start: usize, end: usize) -> ContractRun<ContractKey, StepKind> {
    let mut delays = cr.delays[start..end].to_vec();
    delays.push(Rational::zero());
    ContractRun {
        keys: cr.keys[start..=end].to_vec(),
        steps: cr.steps[start..end].to_vec(),
        delays,
    }
}

/// The deep run of the two mutually recursive components: five nested calls
/// 1/10 apart, then one long delay and a cascade of returns.
pub fn deep_run(m: &RhaModel) -> Run {
    let mut run = Run::new(initial_configuration(m));
    let mut calls = 0;
    loop {
        let cur = run.last().clone();
        let (delay, kind) = match forced_step(m, &cur) {
            Some(k) => {
                calls += (k == StepKind::Call) as usize;
                (Rational::zero(), k)
            }
            None => {
                let out = m.outgoing(cur.loc);
                if out.is_empty() {
                    break;
                }
                let to_call = out.iter().find(|e| matches!(m.edge(**e).dst, Location::Call(..)));
                match (cur.loc, to_call) {
                    (Location::Node(_), Some(e)) if calls < 5 => (q("1/10"), StepKind::Edge(*e)),
                    (Location::Node(_), _) => {
                        let e = out.iter().find(|e| !matches!(m.edge(**e).dst, Location::Call(..))).unwrap();
                        (q("1/2"), StepKind::Edge(*e))
                    }
                    _ => (Rational::zero(), StepKind::Edge(out[0])),
                }
            }
        };
        let to = step(m, &cur, &delay, kind).unwrap();
        run.steps.push(Step { delay, kind, to });
    }
    run
}

pub struct Suite {
    pub runs: usize,
    pub contracted_steps: usize,
}

/// Random runs through the whole contraction pipeline, checking every
/// fragment and the certified result.
pub fn suite(seed: u64, count: usize) -> Suite {
    let mut r = rng(seed);
    let mut s = Suite {
        runs: 0,
        contracted_steps: 0,
    };
    while s.runs < count {
        let mut pick = picker(&mut r);
        let k = 1 + pick(3);
        let p = GenParams {
            nvars: 1 + pick(2),
            components: 1 + pick(3),
            extra_edges: 2 + pick(3),
            cmax: 1 + pick(2) as i64,
            ..GenParams::default()
        };
        let m = random_model(&mut pick, &p);
        let run = random_run(&m, initial_configuration(&m), &mut pick, 40, k, None);
        if run.len() < 2 {
            continue;
        }
        assert!(run.len() <= 40);
        validate_run(&m, &run).unwrap();
        s.runs += 1;

        // Each type-3 fragment: fixpoint, idempotent, endpoints, duration, length.
        let bound = run.duration();
        let ann = annotate_run(&m, &run, m.cmax()).unwrap();
        let split = split_pipeline(&m, &ann, &bound, m.rmax()).unwrap();
        let whole = whole_run(&m, &run);
        let nlocs = m.all_locations().len() as u64;
        let t3 = type3_bound(m.boxes.len() as u64, k as u64, nlocs, m.cmax() as u64, m.nvars() as u64);
        let frags = split.fragments();
        assert_eq!(frags.first().map(|f| f.start), Some(0));
        assert_eq!(frags.last().map(|f| f.end), Some(run.len()));
        for f in &frags {
            let piece = fragment(&whole, f.start, f.end);
            let c = cnt_star(&piece);
            assert!(!has_witness(&c));
            assert_eq!(cnt_star(&c), c);
            assert_eq!(c.keys.first(), piece.keys.first());
            assert_eq!(c.keys.last(), piece.keys.last());
            assert_eq!(c.duration(), piece.duration());
            assert!(BigUint::from(c.len()) <= t3);
        }

        // Whole pipeline: certified run with the same endpoints and duration.
        let out = contract_run(&m, &run, &bound, k).unwrap();
        assert!(BigUint::from(out.skeleton.len()) <= out.bound_c);
        let cert = out.certified.unwrap_or_else(|| panic!("not certified: {}", rha_core::parser::serialize_model(&m)));
        validate_run(&m, &cert).unwrap();
        assert_eq!(cert.duration(), run.duration());
        assert_eq!(cert.init, run.init);
        assert_eq!(Skeleton::of_run(&cert), out.skeleton);
        let (a, b) = (cert.last(), run.last());
        assert_eq!((a.boxes(), a.loc), (b.boxes(), b.loc));
        assert!(cert.len() <= run.len());
        s.contracted_steps += run.len() - cert.len();
    }
    s
}

// Time-bounded reachability.

pub fn tb_query(m: &RhaModel, target: Location, bound: &str, k: usize, len: usize, jobs: usize) -> TbResult {
    let q = TbQuery {
        target,
        bound: q(bound),
        context: k,
        max_len: len,
        jobs,
    };
    decide_tb_reach(m, &initial_configuration(m), &q).unwrap()
}

/// Checks the witness and compares with the explicit search at the same
/// depth; returns whether the explicit search was conclusive.
pub fn tb_agree(m: &RhaModel, name: &str, target: Location, bound: &str, k: usize, len: usize) -> bool {
    let res = tb_query(m, target, bound, k, len, 2);
    if let Some(w) = &res.witness {
        validate_run(m, w).unwrap();
        assert!(w.duration() <= q(bound));
        assert_eq!(w.last().loc, target);
        assert!((0..=w.len()).all(|i| w.config(i).context.len() <= k));
    }
    let lim = Limits {
        depth: len,
        stack: k,
        time_cap: Some(q(bound)),
        states: 150_000,
    };
    let oracle = explicit_reach(m, &initial_configuration(m), target, &lim);
    if oracle.truncated {
        return false;
    }
    assert_eq!(
        res.reachable,
        oracle.witness.is_some(),
        "{}: {name} within {bound}, K={k}\n{}",
        m.name,
        rha_core::parser::serialize_model(m)
    );
    true
}

// Region RSM.

pub const RSM_LIMITS: Limits = Limits {
    depth: 14,
    stack: 4,
    time_cap: None,
    states: 200_000,
};

/// Compares every node target; returns the number of compared targets.
pub fn compare_all(m: &RhaModel) -> usize {
    let rrsm = build_region_rsm(m).unwrap();
    let init = initial_configuration(m);
    let mut compared = 0;
    for (name, loc) in node_targets(m) {
        let res = rrsm.reach(m, loc, false);
        if let Some(w) = &res.witness {
            assert!(rrsm.rsm.replay(w), "{}: witness for {name} does not replay", m.name);
        }
        let oracle = explicit_reach(m, &init, loc, &RSM_LIMITS);
        if oracle.truncated && oracle.witness.is_none() {
            continue;
        }
        assert_eq!(
            res.reachable,
            oracle.witness.is_some(),
            "{}: {name} (rsm {}, explicit {})\n{}",
            m.name,
            res.reachable,
            oracle.witness.is_some(),
            rha_core::parser::serialize_model(m)
        );
        compared += 1;
    }
    compared
}

// Gadgets.

pub fn pow(base: Rational, e: u64) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * &base)
}

/// 1/(2^c·3^d).
pub fn enc23(c: u32, d: u32) -> Rational {
    pow(Rational::new(1, 2), c as u64) * pow(Rational::new(1, 3), d as u64)
}

/// 1 - 1/2^e.
pub fn gap(e: u64) -> Rational {
    Rational::one() - pow(Rational::new(1, 2), e)
}

pub fn start_val(enc: Encoding, x: Rational) -> Valuation {
    let n = if enc == Encoding::TwoSw { 2 } else { 3 };
    let mut v = vec![Rational::zero(); n];
    v[0] = x;
    Valuation::from_values(v)
}

/// Where a scaling gadget leaves its result: `y` for two stopwatches, `x` otherwise.
pub fn result_val(enc: Encoding, r: Rational) -> Valuation {
    let n = if enc == Encoding::TwoSw { 2 } else { 3 };
    let mut v = vec![Rational::zero(); n];
    v[if enc == Encoding::TwoSw { 1 } else { 0 }] = r;
    Valuation::from_values(v)
}

pub const HALTING: [&str; 10] = [
    "0: halt",
    "0: inc c goto 1\n1: halt",
    "0: inc c goto 1\n1: inc c goto 2\n2: dec c goto 3\n3: halt",
    include_str!("../../../../models/count.cm"),
    "0: inc d goto 1\n1: inc d goto 2\n2: ifz d goto 5 else 3\n3: dec d goto 4\n4: inc c goto 2\n5: halt",
    "0: ifz c goto 2 else 1\n1: inc d goto 2\n2: halt",
    "0: inc c goto 1\n1: inc c goto 2\n2: inc c goto 3\n3: ifz c goto 5 else 4\n4: dec c goto 3\n5: halt",
    "0: inc c goto 1\n1: ifz c goto 5 else 2\n2: dec c goto 3\n3: inc d goto 4\n4: inc d goto 1\n5: halt",
    "0: inc d goto 1\n1: ifz d goto 4 else 2\n2: dec d goto 3\n3: inc c goto 1\n4: ifz c goto 6 else 5\n5: dec c goto 4\n6: halt",
    "0: inc c goto 1\n1: inc d goto 2\n2: inc c goto 3\n3: dec d goto 4\n4: ifz d goto 6 else 5\n5: dec c goto 4\n6: halt",
];

pub const LOOPING: [&str; 3] = [
    include_str!("../../../../models/loop.cm"),
    "0: inc c goto 1\n1: dec c goto 0\n2: halt",
    "0: inc c goto 1\n1: inc d goto 0\n2: halt",
];

pub fn machine(text: &str) -> CounterMachine {
    parse_cm(text).unwrap_or_else(|e| panic!("{e}"))
}

/// Main-component configurations at which an instruction starts.
pub fn instruction_starts<'a>(b: &GadgetBundle, run: &'a GadgetRun) -> Vec<(&'a Configuration, usize, Option<VarId>)> {
    (0..=run.run.len())
        .map(|i| run.run.config(i))
        .filter(|c| c.context.is_empty())
        .filter_map(|c| match c.loc {
            Location::Node(n) => b.descriptor.main_nodes.get(&n).map(|(pc, h)| (c, *pc, *h)),
            _ => None,
        })
        .collect()
}

/// Checks the variable contents at each instruction start against the
/// interpreter's counters.
pub fn check_encoding(b: &GadgetBundle, run: &GadgetRun, cm: &CmRun) {
    let starts = instruction_starts(b, run);
    // A bounded run may stop on the start of one extra instruction.
    assert!(starts.len() == cm.trace.len() || (!cm.halted && starts.len() == cm.trace.len() + 1));
    let m = &b.model;
    for (k, ((cfg, pc, holder), want)) in starts.iter().zip(&cm.trace).enumerate() {
        assert_eq!(*pc, want.pc);
        for (i, name) in m.vars.iter().enumerate() {
            let v = cfg.val.get(VarId(i));
            let expected = match b.encoding {
                Encoding::TwoSw | Encoding::ThreeSwGf => {
                    let h = holder.unwrap_or(VarId(0));
                    if h.0 == i {
                        enc23(want.c as u32, want.d as u32)
                    } else {
                        Rational::zero()
                    }
                }
                _ => match name.as_bytes()[0] {
                    b'x' => gap(want.c + k as u64),
                    b'y' => gap(want.d + k as u64),
                    b'z' => gap(k as u64),
                    _ => Rational::zero(),
                },
            };
            assert_eq!(v, &expected, "{:?} instruction {k}: {name}", b.encoding);
        }
    }
}
