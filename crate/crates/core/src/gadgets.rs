//! Compilers from two-counter machines to RHA gadget encodings, with exact
//! delay oracles that drive the compiled models through their unique
//! accepting runs.
//!
//! | encoding  | variables                   | main-entry invariant                          |
//! |-----------|-----------------------------|-----------------------------------------------|
//! | `2sw`     | stopwatches `x y`           | one of `x`,`y` is `1/(2^c 3^d)`, the other 0  |
//! | `3sw-gf`  | stopwatches `x y z`         | `x = 1/(2^c 3^d)`, `y = z = 0`                |
//! | `5clk-tb` | clocks `x y z1 z2 b`        | `x = 1-2^-(c+k)`, `y = 1-2^-(d+k)`, `z1 = z2 = 1-2^-k`, `b = 0` |
//! | `14sw-tb` | stopwatches `x1..x5 y1..y5 z1..z3 b` | as `5clk-tb`, copies equal           |

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::cm::{CmRun, CounterMachine, Instr};
use crate::model::{
    AtomicConstraint, InitDecl, Location, ModelKind, NodeId, RateVector, RectConstraint, Relation, RhaModel,
    Valuation, VarId, BoxId,
};
use crate::rational::Rational;
use crate::semantics::{
    edge_delay_interval, simulate_from, Configuration, DelayOracle, EarliestOracle, Run, SimError, StopReason,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Encoding {
    TwoSw,
    ThreeSwGf,
    FiveClkTb,
    FourteenSwTb,
}

impl Encoding {
    pub const ALL: [Encoding; 4] = [
        Encoding::TwoSw,
        Encoding::ThreeSwGf,
        Encoding::FiveClkTb,
        Encoding::FourteenSwTb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Encoding::TwoSw => "2sw",
            Encoding::ThreeSwGf => "3sw-gf",
            Encoding::FiveClkTb => "5clk-tb",
            Encoding::FourteenSwTb => "14sw-tb",
        }
    }

    /// Whether the encoding tracks the instruction count `k` in its variables.
    pub fn is_time_bounded(self) -> bool {
        matches!(self, Encoding::FiveClkTb | Encoding::FourteenSwTb)
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown encoding `{0}` (expected 2sw, 3sw-gf, 5clk-tb or 14sw-tb)")]
pub struct UnknownEncoding(pub String);

impl FromStr for Encoding {
    type Err = UnknownEncoding;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Encoding::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| UnknownEncoding(s.to_string()))
    }
}

/// `t = constant + Σ coeff·v`, evaluated on the valuation at the moment of choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayRule {
    pub constant: Rational,
    pub terms: Vec<(VarId, Rational)>,
}

impl DelayRule {
    pub fn new(constant: Rational, terms: Vec<(VarId, Rational)>) -> Self {
        DelayRule { constant, terms }
    }

    pub fn eval(&self, v: &Valuation) -> Rational {
        let mut t = self.constant.clone();
        for (x, c) in &self.terms {
            t += c * v.get(*x);
        }
        t
    }
}

/// Delay rules keyed by node and, optionally, the box on top of the context.
/// Nodes without a rule fall back to [`EarliestOracle`]. Once a delay is
/// fixed, the first outgoing edge enabled after it is taken.
#[derive(Debug, Clone, Default)]
pub struct RuleOracle {
    rules: HashMap<NodeId, Vec<(Option<BoxId>, DelayRule)>>,
}

impl RuleOracle {
    pub fn add(&mut self, node: NodeId, caller: Option<BoxId>, rule: DelayRule) {
        self.rules.entry(node).or_default().push((caller, rule));
    }

    pub fn len(&self) -> usize {
        self.rules.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The rule for `config`: a caller-specific one first, then a wildcard.
    pub fn rule_for(&self, config: &Configuration) -> Option<&DelayRule> {
        let Location::Node(n) = config.loc else { return None };
        let rules = self.rules.get(&n)?;
        let top = config.top_box();
        rules
            .iter()
            .find(|(b, _)| b.is_some() && *b == top)
            .or_else(|| rules.iter().find(|(b, _)| b.is_none()))
            .map(|(_, r)| r)
    }

    /// All rules, for display.
    pub fn rules(&self) -> impl Iterator<Item = (NodeId, Option<BoxId>, &DelayRule)> {
        self.rules
            .iter()
            .flat_map(|(n, v)| v.iter().map(move |(b, r)| (*n, *b, r)))
    }
}

impl DelayOracle for RuleOracle {
    fn choose(&self, model: &RhaModel, config: &Configuration) -> Option<(Rational, crate::model::EdgeId)> {
        let Some(rule) = self.rule_for(config) else {
            return EarliestOracle.choose(model, config);
        };
        let t = rule.eval(&config.val);
        if t.is_negative() {
            return None;
        }
        model
            .outgoing(config.loc)
            .into_iter()
            .find(|e| edge_delay_interval(model, config, *e).contains(&t))
            .map(|e| (t, e))
    }
}

/// How counter values sit in the variables at main-component locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descriptor {
    pub encoding: Encoding,
    /// Main-component nodes at which an instruction starts, with its index and,
    /// for `2sw`, the variable currently holding the encoded value.
    pub main_nodes: BTreeMap<NodeId, (usize, Option<VarId>)>,
    pub halt: NodeId,
    pub halt_instrs: BTreeSet<usize>,
}

/// Counter values read off a main-component configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub pc: usize,
    pub c: u64,
    pub d: u64,
    /// Instruction count; read from the variables for time-bounded encodings.
    pub k: u64,
    pub time: Rational,
}

/// `(c, d)` with `v = 1/(2^c 3^d)`.
pub fn decode_2_3(v: &Rational) -> Option<(u64, u64)> {
    if !v.numer().is_one() {
        return None;
    }
    let mut den = v.denom().clone();
    let c = den.trailing_zeros().unwrap_or(0);
    den >>= c;
    let three = BigInt::from(3);
    let mut d = 0;
    while (&den % &three).is_zero() {
        den /= &three;
        d += 1;
    }
    den.is_one().then_some((c, d))
}

/// `e` with `1 - v = 1/2^e`.
pub fn decode_pow2_gap(v: &Rational) -> Option<u64> {
    let gap = Rational::one() - v;
    if !gap.is_positive() || !gap.numer().is_one() {
        return None;
    }
    let den = gap.denom();
    let e = den.trailing_zeros().unwrap_or(0);
    (den >> e).is_one().then_some(e)
}

pub fn pow2_recip(e: u64) -> Rational {
    Rational::from_big(BigInt::one(), BigInt::one() << e)
}

pub fn value_2_3(c: u64, d: u64) -> Rational {
    Rational::from_big(BigInt::one(), (BigInt::one() << c) * BigInt::from(3).pow(d as u32))
}

impl Descriptor {
    /// One line per variable group, for reports.
    pub fn describe(&self) -> &'static str {
        match self.encoding {
            Encoding::TwoSw => "at Main.L<i>x: x = 1/(2^c*3^d), y = 0; at Main.L<i>y: y = 1/(2^c*3^d), x = 0",
            Encoding::ThreeSwGf => "at Main.L<i>: x = 1/(2^c*3^d), y = z = 0",
            Encoding::FiveClkTb => "at Main.L<i>: x = 1-1/2^(c+k), y = 1-1/2^(d+k), z1 = z2 = 1-1/2^k, b = 0",
            Encoding::FourteenSwTb => {
                "at Main.L<i>: x1..x5 = 1-1/2^(c+k), y1..y5 = 1-1/2^(d+k), z1..z3 = 1-1/2^k, b = 0"
            }
        }
    }

    /// Valuation encoding `(c, d, k)`; for `2sw` the value is placed in `x`.
    pub fn encode(&self, model: &RhaModel, c: u64, d: u64, k: u64) -> Valuation {
        let mut v = Valuation::zero(model.nvars());
        let gap = |e: u64| Rational::one() - pow2_recip(e);
        for (i, name) in model.vars.iter().enumerate() {
            let val = match (self.encoding, name.as_bytes()[0]) {
                (Encoding::TwoSw | Encoding::ThreeSwGf, _) if name == "x" => value_2_3(c, d),
                (Encoding::TwoSw | Encoding::ThreeSwGf, _) => Rational::zero(),
                (_, b'x') => gap(c + k),
                (_, b'y') => gap(d + k),
                (_, b'z') => gap(k),
                _ => Rational::zero(),
            };
            v.set(VarId(i), val);
        }
        v
    }

    /// Reads `(pc, c, d, k)` at a main-component node; `Ok(None)` elsewhere.
    pub fn decode(&self, model: &RhaModel, config: &Configuration, k: u64) -> Result<Option<Decoded>, String> {
        if !config.context.is_empty() {
            return Ok(None);
        }
        let Location::Node(n) = config.loc else { return Ok(None) };
        let Some(&(pc, holder)) = self.main_nodes.get(&n) else { return Ok(None) };
        let val = &config.val;
        let get = |name: &str| val.get(model.var(name).expect("encoding variable"));
        let shown = || model.format_valuation(val);
        let (c, d, k) = match self.encoding {
            Encoding::TwoSw | Encoding::ThreeSwGf => {
                let holder = holder.unwrap_or(model.var("x").expect("x"));
                let others_zero = (0..model.nvars()).filter(|i| *i != holder.0).all(|i| val.0[i].is_zero());
                if !others_zero {
                    return Err(format!("auxiliary variables not zero: {}", shown()));
                }
                let (c, d) = decode_2_3(val.get(holder))
                    .ok_or_else(|| format!("{} is not 1/(2^c*3^d): {}", model.var_name(holder), shown()))?;
                (c, d, k)
            }
            Encoding::FiveClkTb | Encoding::FourteenSwTb => {
                let groups: &[(&str, &[&str])] = if self.encoding == Encoding::FiveClkTb {
                    &[("x", &["x"]), ("y", &["y"]), ("z", &["z1", "z2"])]
                } else {
                    &[
                        ("x", &["x1", "x2", "x3", "x4", "x5"]),
                        ("y", &["y1", "y2", "y3", "y4", "y5"]),
                        ("z", &["z1", "z2", "z3"]),
                    ]
                };
                let mut exps = Vec::new();
                for (g, names) in groups {
                    let first = get(names[0]);
                    if names.iter().any(|n| get(n) != first) {
                        return Err(format!("copies of {g} differ: {}", shown()));
                    }
                    exps.push(
                        decode_pow2_gap(first).ok_or_else(|| format!("{g} is not 1-1/2^e: {}", shown()))?,
                    );
                }
                if !get("b").is_zero() {
                    return Err(format!("b is not 0: {}", shown()));
                }
                let k = exps[2];
                if exps[0] < k || exps[1] < k {
                    return Err(format!("counter exponent below k: {}", shown()));
                }
                (exps[0] - k, exps[1] - k, k)
            }
        };
        Ok(Some(Decoded {
            pc,
            c,
            d,
            k,
            time: Rational::zero(),
        }))
    }
}

#[derive(Debug, Clone)]
pub struct GadgetBundle {
    pub model: RhaModel,
    pub encoding: Encoding,
    pub oracle: RuleOracle,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, Error)]
pub enum GadgetError {
    #[error(transparent)]
    Oracle(#[from] SimError),
    #[error("deadlock in the compiled model at {0}")]
    Deadlock(String),
    #[error("encoding invariant broken at instruction {pc}: {detail}")]
    Invariant { pc: usize, detail: String },
}

#[derive(Debug, Clone)]
pub struct GadgetRun {
    pub halted: bool,
    pub reason: StopReason,
    pub duration: Rational,
    /// One entry per instruction started in the main component.
    pub decoded: Vec<Decoded>,
    /// Time spent simulating instruction `i` (complete instructions only).
    pub instr_durations: Vec<Rational>,
    pub run: Run,
}

impl GadgetRun {
    /// Whether the decoded `(pc, c, d)` sequence and the halting verdict
    /// coincide with the interpreter's.
    pub fn agrees_with(&self, cm: &CmRun) -> bool {
        self.halted == cm.halted
            && self.decoded.len() == cm.trace.len()
            && self
                .decoded
                .iter()
                .zip(&cm.trace)
                .all(|(g, c)| (g.pc, g.c, g.d) == (c.pc, c.c, c.d))
    }
}

fn atom(v: VarId, rel: Relation, k: i64) -> AtomicConstraint {
    AtomicConstraint::new(v, rel, k)
}

fn eq(v: VarId, k: i64) -> AtomicConstraint {
    atom(v, Relation::Eq, k)
}

fn lt(v: VarId, k: i64) -> AtomicConstraint {
    atom(v, Relation::Lt, k)
}

fn gt(v: VarId, k: i64) -> AtomicConstraint {
    atom(v, Relation::Gt, k)
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// Model construction with component-prefixed names.
struct Builder {
    m: RhaModel,
    comps: HashMap<String, usize>,
    oracle: RuleOracle,
}

impl Builder {
    fn new(name: &str, vars: &[&str], kind: ModelKind) -> Self {
        Builder {
            m: RhaModel::new(name, vars, kind),
            comps: HashMap::new(),
            oracle: RuleOracle::default(),
        }
    }

    fn v(&self, name: &str) -> VarId {
        self.m.var(name).expect("declared variable")
    }

    fn comp(&mut self, name: &str) -> usize {
        let c = self.m.add_component(name);
        self.comps.insert(name.to_string(), c);
        c
    }

    fn rates(&self, ticking: &[VarId]) -> RateVector {
        let mut r = RateVector::uniform(self.m.nvars(), 0);
        for x in ticking {
            r.0[x.0] = 1;
        }
        r
    }

    fn all(&self) -> BTreeSet<VarId> {
        self.m.all_vars()
    }

    fn all_but(&self, vs: &[VarId]) -> BTreeSet<VarId> {
        self.m.all_vars().into_iter().filter(|x| !vs.contains(x)).collect()
    }

    fn node(&mut self, c: usize, local: &str, rates: RateVector, inv: Vec<AtomicConstraint>) -> NodeId {
        let name = format!("{}_{}", self.m.components[c].name, local);
        self.m.add_node(c, &name, rates, RectConstraint::new(inv))
    }

    /// A node with the model's default rates.
    fn plain(&mut self, c: usize, local: &str, inv: Vec<AtomicConstraint>) -> NodeId {
        let r = self.m.default_rates();
        self.node(c, local, r, inv)
    }

    fn entry(&mut self, c: usize, n: NodeId) {
        self.m.components[c].entries.push(n);
    }

    fn exit(&mut self, c: usize, n: NodeId) {
        self.m.components[c].exits.push(n);
    }

    fn bx(&mut self, c: usize, local: &str, callee: usize, by_value: BTreeSet<VarId>) -> BoxId {
        let name = format!("{}_{}", self.m.components[c].name, local);
        self.m.add_box(c, &name, callee, by_value)
    }

    fn call(&self, b: BoxId) -> Location {
        let callee = self.m.box_decl(b).callee;
        Location::Call(b, self.m.components[callee].entries[0])
    }

    fn ret(&self, b: BoxId, exit: usize) -> Location {
        let callee = self.m.box_decl(b).callee;
        Location::Return(b, self.m.components[callee].exits[exit])
    }

    fn edge(&mut self, src: Location, dst: Location, guard: Vec<AtomicConstraint>, reset: &[VarId]) {
        self.m.add_edge(
            src,
            dst,
            RectConstraint::new(guard),
            reset.iter().copied().collect(),
            None,
        );
    }

    fn rule(&mut self, n: NodeId, caller: Option<BoxId>, constant: Rational, terms: Vec<(VarId, Rational)>) {
        self.oracle.add(n, caller, DelayRule::new(constant, terms));
    }

    fn init(&mut self, comp: usize, node: NodeId, val: Valuation) {
        self.m.init = Some(InitDecl {
            component: comp,
            node,
            valuation: val,
        });
    }
}

/// Scaling operations on the encoded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scale {
    Mul(i64),
    Div(i64),
}

impl Scale {
    fn of(i: Instr) -> Option<Scale> {
        use crate::cm::Counter::{C, D};
        match i {
            Instr::Inc(C, _) => Some(Scale::Div(2)),
            Instr::Dec(C, _) => Some(Scale::Mul(2)),
            Instr::Inc(D, _) => Some(Scale::Div(3)),
            Instr::Dec(D, _) => Some(Scale::Mul(3)),
            _ => None,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Scale::Mul(2) => "DB",
            Scale::Div(2) => "HF",
            Scale::Mul(3) => "TR",
            Scale::Div(3) => "TH",
            _ => unreachable!("only 2 and 3 are used"),
        }
    }
}

// ---- 2 stopwatches, unrestricted passing -------------------------------------

/// The value sits in `a`; `b` is 0 at component entries. Primed components
/// (suffix `p`) swap the roles of `x` and `y`.
struct TwoSw {
    b: Builder,
}

impl TwoSw {
    fn new(name: &str) -> Self {
        TwoSw {
            b: Builder::new(name, &["x", "y"], ModelKind::Stopwatch),
        }
    }

    fn roles(&self, primed: bool) -> (VarId, VarId, &'static str) {
        let (x, y) = (self.b.v("x"), self.b.v("y"));
        if primed {
            (y, x, "p")
        } else {
            (x, y, "")
        }
    }

    fn get(&self, name: &str) -> Option<usize> {
        self.b.comps.get(name).copied()
    }

    /// `M1` lets both tick until `a = 1`; `M2` until `b = 1`.
    fn mini(&mut self, which: u8, primed: bool) -> usize {
        let (a, b, s) = self.roles(primed);
        let name = format!("M{which}{s}");
        if let Some(c) = self.get(&name) {
            return c;
        }
        let c = self.b.comp(&name);
        let r = self.b.rates(&[a, b]);
        let en = self.b.node(c, "en", r, vec![]);
        let ex = self.b.plain(c, "ex", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, ex);
        let g = if which == 1 { eq(a, 1) } else { eq(b, 1) };
        self.b.edge(Location::Node(en), Location::Node(ex), vec![g], &[]);
        c
    }

    /// Checks `b = n·a` (Mul) or `b = a/n` (Div) through `n` calls of a mini component.
    fn check(&mut self, op: Scale, primed: bool) -> usize {
        let (a, b, s) = self.roles(primed);
        let name = format!("C_{}{s}", op.tag());
        if let Some(c) = self.get(&name) {
            return c;
        }
        let (n, mini, keep, exit_guard) = match op {
            Scale::Mul(n) => (n, 1, a, eq(b, n)),
            Scale::Div(n) => (n, 2, b, eq(a, n)),
        };
        let m = self.mini(mini, primed);
        let c = self.b.comp(&name);
        let en = self.b.plain(c, "en", vec![]);
        let ex = self.b.plain(c, "ex", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, ex);
        let first = if op == Scale::Div(2) { 5 } else { 2 };
        let mut cur = Location::Node(en);
        for i in 0..n {
            let bx = self.b.bx(c, &format!("B{}", first + i), m, [keep].into());
            let call = self.b.call(bx);
            self.b.edge(cur, call, vec![], &[]);
            cur = self.b.ret(bx, 0);
        }
        self.b.edge(cur, Location::Node(ex), vec![exit_guard], &[]);
        c
    }

    /// `(a, 0) → (0, op(a))`: `b` grows alone by the guessed amount, which
    /// the check component confirms.
    fn scale(&mut self, op: Scale, primed: bool) -> usize {
        let (a, b, s) = self.roles(primed);
        let name = format!("{}{s}", op.tag());
        if let Some(c) = self.get(&name) {
            return c;
        }
        let chk = self.check(op, primed);
        let c = self.b.comp(&name);
        let r = self.b.rates(&[b]);
        let en = self.b.node(c, "en", r, vec![]);
        let ex = self.b.plain(c, "ex", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, ex);
        let label = if op == Scale::Div(2) { "B4" } else { "B1" };
        let all = self.b.all();
        let bx = self.b.bx(c, label, chk, all);
        let call = self.b.call(bx);
        let ret = self.b.ret(bx, 0);
        self.b.edge(Location::Node(en), call, vec![gt(b, 0)], &[]);
        self.b.edge(ret, Location::Node(ex), vec![], &[a]);
        let coeff = match op {
            Scale::Mul(n) => Rational::from_int(n),
            Scale::Div(n) => q(1, n),
        };
        self.b.rule(en, None, Rational::zero(), vec![(a, coeff)]);
        c
    }

    /// Exits `ex5` iff the value is `1/n^i`, else `ex5n`; multiplies by `n`
    /// alternately in `a` and `b` until the value reaches 1.
    fn power(&mut self, n: i64, primed: bool) -> usize {
        let (a, b, s) = self.roles(primed);
        let name = format!("PO{n}{s}");
        if let Some(c) = self.get(&name) {
            return c;
        }
        let fwd = self.scale(Scale::Mul(n), primed);
        let back = self.scale(Scale::Mul(n), !primed);
        let c = self.b.comp(&name);
        let en = self.b.plain(c, "en5", vec![]);
        let yes = self.b.plain(c, "ex5", vec![]);
        let no = self.b.plain(c, "ex5n", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, yes);
        self.b.exit(c, no);
        let b7 = self.b.bx(c, "B7", fwd, BTreeSet::new());
        let b8 = self.b.bx(c, "B8", back, BTreeSet::new());
        let (yes, no) = (Location::Node(yes), Location::Node(no));
        let tests = [
            (Location::Node(en), a, self.b.call(b7)),
            (self.b.ret(b7, 0), b, self.b.call(b8)),
            (self.b.ret(b8, 0), a, self.b.call(b7)),
        ];
        for (src, v, again) in tests {
            self.b.edge(src, yes, vec![eq(v, 1)], &[]);
            self.b.edge(src, no, vec![gt(v, 1)], &[]);
            self.b.edge(src, again, vec![lt(v, 1)], &[]);
        }
        c
    }

    /// Zero test run on a copy of the variables.
    fn zero_check(&mut self, n: i64, primed: bool) -> usize {
        let (_, b, s) = self.roles(primed);
        let name = format!("ZC{n}{s}");
        if let Some(c) = self.get(&name) {
            return c;
        }
        let po = self.power(n, primed);
        let c = self.b.comp(&name);
        let en = self.b.plain(c, "en", vec![]);
        let ex = self.b.plain(c, "ex", vec![]);
        let exn = self.b.plain(c, "exn", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, ex);
        self.b.exit(c, exn);
        let all = self.b.all();
        let bx = self.b.bx(c, "B1", po, all);
        let call = self.b.call(bx);
        self.b.edge(Location::Node(en), call, vec![eq(b, 0)], &[]);
        let (r0, r1) = (self.b.ret(bx, 0), self.b.ret(bx, 1));
        self.b.edge(r0, Location::Node(ex), vec![eq(b, 0)], &[]);
        self.b.edge(r1, Location::Node(exn), vec![eq(b, 0)], &[]);
        c
    }
}

fn compile_2sw(cm: &CounterMachine) -> GadgetBundle {
    let mut g = TwoSw::new("cm_2sw");
    let main = g.b.comp("Main");
    let n = cm.len();
    let mut l = Vec::new();
    for i in 0..n {
        let lx = g.b.plain(main, &format!("L{i}x"), vec![]);
        let ly = g.b.plain(main, &format!("L{i}y"), vec![]);
        l.push([lx, ly]);
    }
    let halt = g.b.plain(main, "Halt", vec![]);
    g.b.entry(main, l[0][0]);
    g.b.exit(main, halt);
    let mut main_nodes = BTreeMap::new();
    let mut halt_instrs = BTreeSet::new();
    for (i, ins) in cm.instrs.iter().enumerate() {
        for side in 0..2 {
            let primed = side == 1;
            let (a, _, s) = g.roles(primed);
            main_nodes.insert(l[i][side], (i, Some(a)));
            let src = Location::Node(l[i][side]);
            match *ins {
                Instr::Halt => {
                    halt_instrs.insert(i);
                    g.b.edge(src, Location::Node(halt), vec![], &[]);
                }
                Instr::Inc(_, k) | Instr::Dec(_, k) => {
                    let op = Scale::of(*ins).expect("scaling instruction");
                    let callee = g.scale(op, primed);
                    let bx = g.b.bx(main, &format!("I{i}{s}"), callee, BTreeSet::new());
                    let (call, ret) = (g.b.call(bx), g.b.ret(bx, 0));
                    g.b.edge(src, call, vec![], &[]);
                    g.b.edge(ret, Location::Node(l[k][1 - side]), vec![], &[]);
                }
                Instr::Ifz(ctr, z, nz) => {
                    let base = if ctr == crate::cm::Counter::C { 3 } else { 2 };
                    let callee = g.zero_check(base, primed);
                    let bx = g.b.bx(main, &format!("I{i}{s}"), callee, BTreeSet::new());
                    let call = g.b.call(bx);
                    g.b.edge(src, call, vec![], &[]);
                    let (r0, r1) = (g.b.ret(bx, 0), g.b.ret(bx, 1));
                    g.b.edge(r0, Location::Node(l[z][side]), vec![], &[]);
                    g.b.edge(r1, Location::Node(l[nz][side]), vec![], &[]);
                }
            }
        }
    }
    let descriptor = Descriptor {
        encoding: Encoding::TwoSw,
        main_nodes,
        halt,
        halt_instrs,
    };
    let init = descriptor.encode(&g.b.m, 0, 0, 0);
    g.b.init(main, l[0][0], init);
    GadgetBundle {
        model: g.b.m,
        encoding: Encoding::TwoSw,
        oracle: g.b.oracle,
        descriptor,
    }
}

// ---- 3 stopwatches, glitch-free ----------------------------------------------

/// Everything is passed by value, so value changes happen inline in the
/// caller and the called components only check a guessed delay.
struct ThreeSw {
    b: Builder,
}

impl ThreeSw {
    fn new(name: &str) -> Self {
        ThreeSw {
            b: Builder::new(name, &["x", "y", "z"], ModelKind::Stopwatch),
        }
    }

    /// `C_<tag>`: with `x = t`, `y = 1 - v`, `z = 0` on entry, the exit is
    /// reachable iff `t = n·v` (Mul) or `t = v/n` (Div).
    fn check(&mut self, op: Scale) -> usize {
        let name = format!("C_{}", op.tag());
        if let Some(c) = self.b.comps.get(&name) {
            return *c;
        }
        let [x, y, z] = [self.b.v("x"), self.b.v("y"), self.b.v("z")];
        let c = self.b.comp(&name);
        let (n, p_ticks, p_var, q_guard) = match op {
            Scale::Mul(n) => (n, [y, z], y, eq(x, n)),
            Scale::Div(n) => (n, [x, z], x, eq(y, 1)),
        };
        let mut prev: Option<NodeId> = None;
        for i in 1..=n {
            let pr = self.b.rates(&p_ticks);
            let p = self.b.node(c, &format!("p{i}"), pr, vec![]);
            let qr = self.b.rates(&[x, y, z]);
            let qn = self.b.node(c, &format!("q{i}"), qr, vec![]);
            match prev {
                None => self.b.entry(c, p),
                Some(last) => self.b.edge(Location::Node(last), Location::Node(p), vec![eq(z, 1)], &[z]),
            }
            self.b.edge(Location::Node(p), Location::Node(qn), vec![eq(p_var, 1)], &[p_var]);
            prev = Some(qn);
        }
        let ex = self.b.plain(c, "ex", vec![]);
        self.b.exit(c, ex);
        let last = prev.expect("n >= 1");
        self.b.edge(Location::Node(last), Location::Node(ex), vec![eq(z, 1), q_guard], &[]);
        c
    }

    /// Inline `x := op(x)` from `from` (taken under `guard`) to `to`.
    fn inline_scale(&mut self, comp: usize, prefix: &str, op: Scale, from: Location, guard: Vec<AtomicConstraint>, to: Location) -> NodeId {
        let [x, y] = [self.b.v("x"), self.b.v("y")];
        let chk = self.check(op);
        let r1 = self.b.rates(&[x, y]);
        let en = self.b.node(comp, &format!("{prefix}_en"), r1, vec![]);
        let r2 = self.b.rates(&[x]);
        let guess = self.b.node(comp, &format!("{prefix}_l"), r2, vec![]);
        let all = self.b.all();
        let bx = self.b.bx(comp, &format!("{prefix}_A"), chk, all);
        self.b.edge(from, Location::Node(en), guard, &[]);
        self.b.edge(Location::Node(en), Location::Node(guess), vec![eq(x, 1)], &[x]);
        let call = self.b.call(bx);
        self.b.edge(Location::Node(guess), call, vec![gt(x, 0)], &[]);
        let ret = self.b.ret(bx, 0);
        self.b.edge(ret, to, vec![], &[y]);
        // y = 1 - v at the guess node.
        let (c0, cy) = match op {
            Scale::Mul(n) => (Rational::from_int(n), Rational::from_int(-n)),
            Scale::Div(n) => (q(1, n), q(-1, n)),
        };
        self.b.rule(guess, None, c0, vec![(y, cy)]);
        en
    }

    /// Exits `ex5` iff `x = 1/n^i`.
    fn power(&mut self, n: i64) -> usize {
        let name = format!("PO{n}");
        if let Some(c) = self.b.comps.get(&name) {
            return *c;
        }
        let x = self.b.v("x");
        let c = self.b.comp(&name);
        let en = self.b.plain(c, "en5", vec![]);
        let test = self.b.plain(c, "t", vec![]);
        let yes = self.b.plain(c, "ex5", vec![]);
        let no = self.b.plain(c, "ex5n", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, yes);
        self.b.exit(c, no);
        let loop_en = self.inline_scale(c, "d", Scale::Mul(n), Location::Node(en), vec![lt(x, 1)], Location::Node(test));
        for src in [en, test] {
            self.b.edge(Location::Node(src), Location::Node(yes), vec![eq(x, 1)], &[]);
            self.b.edge(Location::Node(src), Location::Node(no), vec![gt(x, 1)], &[]);
        }
        self.b.edge(Location::Node(test), Location::Node(loop_en), vec![lt(x, 1)], &[]);
        c
    }
}

fn compile_3sw(cm: &CounterMachine) -> GadgetBundle {
    let mut g = ThreeSw::new("cm_3sw_gf");
    let main = g.b.comp("Main");
    let l: Vec<NodeId> = (0..cm.len()).map(|i| g.b.plain(main, &format!("L{i}"), vec![])).collect();
    let halt = g.b.plain(main, "Halt", vec![]);
    g.b.entry(main, l[0]);
    g.b.exit(main, halt);
    let mut main_nodes = BTreeMap::new();
    let mut halt_instrs = BTreeSet::new();
    for (i, ins) in cm.instrs.iter().enumerate() {
        main_nodes.insert(l[i], (i, None));
        let src = Location::Node(l[i]);
        match *ins {
            Instr::Halt => {
                halt_instrs.insert(i);
                g.b.edge(src, Location::Node(halt), vec![], &[]);
            }
            Instr::Inc(_, k) | Instr::Dec(_, k) => {
                let op = Scale::of(*ins).expect("scaling instruction");
                g.inline_scale(main, &format!("I{i}"), op, src, vec![], Location::Node(l[k]));
            }
            Instr::Ifz(ctr, z, nz) => {
                let base = if ctr == crate::cm::Counter::C { 3 } else { 2 };
                let po = g.power(base);
                let all = g.b.all();
                let bx = g.b.bx(main, &format!("I{i}_Z"), po, all);
                let call = g.b.call(bx);
                g.b.edge(src, call, vec![], &[]);
                let (r0, r1) = (g.b.ret(bx, 0), g.b.ret(bx, 1));
                g.b.edge(r0, Location::Node(l[z]), vec![], &[]);
                g.b.edge(r1, Location::Node(l[nz]), vec![], &[]);
            }
        }
    }
    let descriptor = Descriptor {
        encoding: Encoding::ThreeSwGf,
        main_nodes,
        halt,
        halt_instrs,
    };
    let init = descriptor.encode(&g.b.m, 0, 0, 0);
    g.b.init(main, l[0], init);
    GadgetBundle {
        model: g.b.m,
        encoding: Encoding::ThreeSwGf,
        oracle: g.b.oracle,
        descriptor,
    }
}

// ---- 5 clocks, time-bounded ----------------------------------------------------

/// Subcomponent applied to the encoding during one instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Up {
    /// `a := 1 - (1-a)/n` for the counter group `a` (`"x"` or `"y"`).
    Counter(i64, &'static str),
    /// `Z := 1 - (1-Z)/2`.
    Z,
}

/// Subcomponents per instruction, and the counter tested at the end, if any.
fn up_sequence(ins: Instr, z_first: bool) -> (Vec<Up>, Option<&'static str>) {
    use crate::cm::Counter::{C, D};
    let (mut ups, test) = match ins {
        Instr::Inc(C, _) => (vec![Up::Counter(2, "y"), Up::Counter(4, "x")], None),
        Instr::Dec(C, _) => (vec![Up::Counter(2, "y")], None),
        Instr::Inc(D, _) => (vec![Up::Counter(4, "y"), Up::Counter(2, "x")], None),
        Instr::Dec(D, _) => (vec![Up::Counter(2, "x")], None),
        Instr::Ifz(C, ..) => (vec![Up::Counter(2, "y"), Up::Counter(2, "x")], Some("x")),
        Instr::Ifz(D, ..) => (vec![Up::Counter(2, "y"), Up::Counter(2, "x")], Some("y")),
        Instr::Halt => (vec![], None),
    };
    if ins != Instr::Halt {
        if z_first {
            ups.insert(0, Up::Z);
        } else {
            ups.push(Up::Z);
        }
    }
    (ups, test)
}

/// Clocks `x y z1 z2 b`; `b = 0` is the urgency invariant. Time passes only
/// inside callees that receive `b` by value.
struct FiveClk {
    b: Builder,
}

impl FiveClk {
    fn new(name: &str) -> Self {
        FiveClk {
            b: Builder::new(name, &["x", "y", "z1", "z2", "b"], ModelKind::Clock),
        }
    }

    fn urgent(&self) -> Vec<AtomicConstraint> {
        vec![eq(self.b.v("b"), 0)]
    }

    fn cached(&self, name: &str) -> Option<usize> {
        self.b.comps.get(name).copied()
    }

    fn simple(&mut self, name: &str, exits: &[(&str, Vec<AtomicConstraint>)]) -> usize {
        let c = self.b.comp(name);
        let en = self.b.plain(c, "en", vec![]);
        self.b.entry(c, en);
        for (local, guard) in exits {
            let ex = self.b.plain(c, local, vec![]);
            self.b.exit(c, ex);
            self.b.edge(Location::Node(en), Location::Node(ex), guard.clone(), &[]);
        }
        c
    }

    /// Lets an arbitrary amount of time pass.
    fn delay(&mut self) -> usize {
        self.cached("D").unwrap_or_else(|| self.simple("D", &[("ex", vec![])]))
    }

    /// `CEQ_a`: waits until `a = 1` and `z2 = 1` together.
    fn ceq(&mut self, a: &str) -> usize {
        let name = format!("CEQ_{a}");
        if let Some(c) = self.cached(&name) {
            return c;
        }
        let (va, z2) = (self.b.v(a), self.b.v("z2"));
        self.simple(&name, &[("ex", vec![eq(va, 1), eq(z2, 1)])])
    }

    fn mini(&mut self, a: &str) -> usize {
        let name = format!("M_{a}");
        if let Some(c) = self.cached(&name) {
            return c;
        }
        let va = self.b.v(a);
        self.simple(&name, &[("ex", vec![eq(va, 1)])])
    }

    /// Calls `M_a` `n` times with `z2` by reference; exits when `z2 = 1`.
    fn chk(&mut self, n: i64, a: &str) -> usize {
        let name = format!("CHK{n}_{a}");
        if let Some(c) = self.cached(&name) {
            return c;
        }
        let m = self.mini(a);
        let z2 = self.b.v("z2");
        let c = self.b.comp(&name);
        let urgent = self.urgent();
        let en = self.b.plain(c, "en", urgent);
        let ex = self.b.plain(c, "ex", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, ex);
        let mut cur = Location::Node(en);
        for i in 1..=n {
            let by_value = self.b.all_but(&[z2]);
            let bx = self.b.bx(c, &format!("B{i}"), m, by_value);
            self.make_ports_urgent(bx);
            let call = self.b.call(bx);
            self.b.edge(cur, call, vec![], &[]);
            cur = self.b.ret(bx, 0);
        }
        self.b.edge(cur, Location::Node(ex), vec![eq(z2, 1)], &[]);
        c
    }

    fn make_ports_urgent(&mut self, bx: BoxId) {
        let r = self.b.m.default_rates();
        let callee = self.b.m.box_decl(bx).callee;
        let exits = self.b.m.components[callee].exits.clone();
        let call = self.b.call(bx);
        let inv = RectConstraint::new(self.urgent());
        self.b.m.set_port(call, r.clone(), inv.clone());
        for ex in exits {
            self.b.m.set_port(Location::Return(bx, ex), r.clone(), inv.clone());
        }
    }

    /// Chain of boxes inside a fresh component `name` with an urgent entry.
    fn chain(&mut self, name: &str, parts: Vec<(&str, usize, BTreeSet<VarId>)>) -> (usize, Vec<BoxId>) {
        let c = self.b.comp(name);
        let urgent = self.urgent();
        let en = self.b.plain(c, "en", urgent);
        let ex = self.b.plain(c, "ex", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, ex);
        let mut cur = Location::Node(en);
        let mut boxes = Vec::new();
        for (local, callee, by_value) in parts {
            let bx = self.b.bx(c, local, callee, by_value);
            self.make_ports_urgent(bx);
            let call = self.b.call(bx);
            self.b.edge(cur, call, vec![], &[]);
            cur = self.b.ret(bx, 0);
            boxes.push(bx);
        }
        self.b.edge(cur, Location::Node(ex), vec![], &[]);
        (c, boxes)
    }

    fn up(&mut self, up: Up) -> usize {
        let name = match up {
            Up::Counter(n, a) => format!("UP{n}_{a}"),
            Up::Z => "UPZ".to_string(),
        };
        if let Some(c) = self.cached(&name) {
            return c;
        }
        let d = self.delay();
        let [z1, z2] = [self.b.v("z1"), self.b.v("z2")];
        let all = self.b.all();
        let d_en = self.b.m.components[d].entries[0];
        match up {
            Up::Counter(n, a) => {
                let va = self.b.v(a);
                let ceq = self.ceq(a);
                let chk = self.chk(n, a);
                let parts = vec![
                    ("D1", d, self.b.all_but(&[z2])),
                    ("E", ceq, all.clone()),
                    ("D2", d, self.b.all_but(&[va])),
                    ("K", chk, all),
                ];
                let (c, boxes) = self.chain(&name, parts);
                // z2 catches up with a, then a moves (n-1)/n of its gap to 1.
                self.b.rule(d_en, Some(boxes[0]), Rational::zero(), vec![(va, q(1, 1)), (z1, q(-1, 1))]);
                self.b.rule(d_en, Some(boxes[2]), q(n - 1, n), vec![(va, q(-(n - 1), n))]);
                c
            }
            Up::Z => {
                let chk = self.chk(2, "z1");
                let ceq = self.ceq("z1");
                let parts = vec![
                    ("D1", d, self.b.all_but(&[z1])),
                    ("K", chk, all.clone()),
                    ("D2", d, self.b.all_but(&[z2])),
                    ("E", ceq, all),
                ];
                let (c, boxes) = self.chain(&name, parts);
                self.b.rule(d_en, Some(boxes[0]), q(1, 2), vec![(z1, q(-1, 2))]);
                self.b.rule(d_en, Some(boxes[2]), Rational::zero(), vec![(z1, q(1, 1)), (z2, q(-1, 1))]);
                c
            }
        }
    }

    fn zero_check(&mut self, a: &str) -> usize {
        let name = format!("ZC_{a}");
        if let Some(c) = self.cached(&name) {
            return c;
        }
        let (va, z1) = (self.b.v(a), self.b.v("z1"));
        self.simple(&name, &[("ex", vec![eq(z1, 1), eq(va, 1)]), ("exn", vec![eq(z1, 1), gt(va, 1)])])
    }
}

fn compile_5clk(cm: &CounterMachine) -> GadgetBundle {
    let mut g = FiveClk::new("cm_5clk_tb");
    let main = g.b.comp("Main");
    let urgent = g.urgent();
    let l: Vec<NodeId> = (0..cm.len())
        .map(|i| g.b.plain(main, &format!("L{i}"), urgent.clone()))
        .collect();
    let halt = g.b.plain(main, "Halt", vec![]);
    g.b.entry(main, l[0]);
    g.b.exit(main, halt);
    let mut main_nodes = BTreeMap::new();
    let mut halt_instrs = BTreeSet::new();
    for (i, ins) in cm.instrs.iter().enumerate() {
        main_nodes.insert(l[i], (i, None));
        let mut cur = Location::Node(l[i]);
        let (ups, test) = up_sequence(*ins, false);
        for (j, up) in ups.into_iter().enumerate() {
            let callee = g.up(up);
            let by_ref = match up {
                Up::Counter(_, a) => vec![g.b.v(a)],
                Up::Z => vec![g.b.v("z1"), g.b.v("z2")],
            };
            let by_value = g.b.all_but(&by_ref);
            let bx = g.b.bx(main, &format!("I{i}_{j}"), callee, by_value);
            g.make_ports_urgent(bx);
            let call = g.b.call(bx);
            g.b.edge(cur, call, vec![], &[]);
            cur = g.b.ret(bx, 0);
        }
        match *ins {
            Instr::Halt => {
                halt_instrs.insert(i);
                g.b.edge(cur, Location::Node(halt), vec![], &[]);
            }
            Instr::Inc(_, k) | Instr::Dec(_, k) => g.b.edge(cur, Location::Node(l[k]), vec![], &[]),
            Instr::Ifz(_, z, nz) => {
                let zc = g.zero_check(test.expect("zero test"));
                let all = g.b.all();
                let bx = g.b.bx(main, &format!("I{i}_Z"), zc, all);
                g.make_ports_urgent(bx);
                let call = g.b.call(bx);
                g.b.edge(cur, call, vec![], &[]);
                let (r0, r1) = (g.b.ret(bx, 0), g.b.ret(bx, 1));
                g.b.edge(r0, Location::Node(l[z]), vec![], &[]);
                g.b.edge(r1, Location::Node(l[nz]), vec![], &[]);
            }
        }
    }
    let descriptor = Descriptor {
        encoding: Encoding::FiveClkTb,
        main_nodes,
        halt,
        halt_instrs,
    };
    let init = descriptor.encode(&g.b.m, 0, 0, 0);
    g.b.init(main, l[0], init);
    GadgetBundle {
        model: g.b.m,
        encoding: Encoding::FiveClkTb,
        oracle: g.b.oracle,
        descriptor,
    }
}

// ---- 14 stopwatches, glitch-free, time-bounded ---------------------------------

const FOURTEEN: [&str; 14] = [
    "x1", "x2", "x3", "x4", "x5", "y1", "y2", "y3", "y4", "y5", "z1", "z2", "z3", "b",
];

/// Copies `X = x1..x5`, `Y = y1..y5`, `Z = z1..z3` and the urgency stopwatch
/// `b`, which ticks everywhere; every box passes everything by value.
struct FourteenSw {
    b: Builder,
}

impl FourteenSw {
    fn new(name: &str) -> Self {
        FourteenSw {
            b: Builder::new(name, &FOURTEEN, ModelKind::Stopwatch),
        }
    }

    fn group(&self, g: &str) -> Vec<VarId> {
        let n = if g == "z" { 3 } else { 5 };
        (1..=n).map(|i| self.b.v(&format!("{g}{i}"))).collect()
    }

    /// Rates with `b` plus `ticking`.
    fn with_b(&self, ticking: &[VarId]) -> RateVector {
        let mut v = ticking.to_vec();
        v.push(self.b.v("b"));
        self.b.rates(&v)
    }

    fn urgent_node(&mut self, c: usize, local: &str) -> NodeId {
        let r = self.with_b(&[]);
        let b = self.b.v("b");
        self.b.node(c, local, r, vec![eq(b, 0)])
    }

    fn ports(&mut self, bx: BoxId) {
        let r = self.with_b(&[]);
        let inv = RectConstraint::new(vec![eq(self.b.v("b"), 0)]);
        let callee = self.b.m.box_decl(bx).callee;
        let exits = self.b.m.components[callee].exits.clone();
        let call = self.b.call(bx);
        self.b.m.set_port(call, r.clone(), inv.clone());
        for ex in exits {
            self.b.m.set_port(Location::Return(bx, ex), r.clone(), inv.clone());
        }
    }

    /// `CHK{n}_g`: locations `h_1, h_3..h_{n+1}`, each ticking `a_2` and `a_i`
    /// until `a_i = 1`; the last exit also requires `a_2 = 1`.
    fn chk(&mut self, n: usize, g: &str) -> usize {
        let name = format!("CHK{n}_{g}");
        if let Some(c) = self.b.comps.get(&name) {
            return *c;
        }
        let a = self.group(g);
        let c = self.b.comp(&name);
        let en = self.urgent_node(c, "en");
        self.b.entry(c, en);
        let mut cur = Location::Node(en);
        let mut guard = vec![];
        for i in std::iter::once(1).chain(3..=n + 1) {
            let r = self.with_b(&[a[1], a[i - 1]]);
            let h = self.b.node(c, &format!("h{i}"), r, vec![]);
            self.b.edge(cur, Location::Node(h), guard, &[]);
            cur = Location::Node(h);
            guard = vec![eq(a[i - 1], 1)];
        }
        guard.push(eq(a[1], 1));
        let ex = self.b.plain(c, "ex", vec![]);
        self.b.exit(c, ex);
        self.b.edge(cur, Location::Node(ex), guard, &[]);
        c
    }

    /// `CHKEQ_g`: `a_1` and `a_2` tick until both equal 1.
    fn chk_eq(&mut self, g: &str) -> usize {
        let name = format!("CHKEQ_{g}");
        if let Some(c) = self.b.comps.get(&name) {
            return *c;
        }
        let a = self.group(g);
        let c = self.b.comp(&name);
        let r = self.with_b(&[a[0], a[1]]);
        let en = self.b.node(c, "en", r, vec![]);
        let ex = self.b.plain(c, "ex", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, ex);
        self.b.edge(Location::Node(en), Location::Node(ex), vec![eq(a[0], 1), eq(a[1], 1)], &[]);
        c
    }

    fn zero_check(&mut self, g: &str) -> usize {
        let name = format!("ZC_{g}");
        if let Some(c) = self.b.comps.get(&name) {
            return *c;
        }
        let (a1, z1) = (self.group(g)[0], self.b.v("z1"));
        let c = self.b.comp(&name);
        let r = self.with_b(&[z1, a1]);
        let en = self.b.node(c, "en", r, vec![]);
        let ex = self.b.plain(c, "ex", vec![]);
        let exn = self.b.plain(c, "exn", vec![]);
        self.b.entry(c, en);
        self.b.exit(c, ex);
        self.b.exit(c, exn);
        self.b.edge(Location::Node(en), Location::Node(ex), vec![eq(z1, 1), eq(a1, 1)], &[]);
        self.b.edge(Location::Node(en), Location::Node(exn), vec![eq(z1, 1), gt(a1, 1)], &[]);
        c
    }

    /// Inlines `Up_n^g` after `from`; returns the location reached at its end.
    fn inline_up(&mut self, comp: usize, prefix: &str, n: usize, g: &str, from: Location) -> Location {
        let a = self.group(g);
        let b = self.b.v("b");
        let first: Vec<VarId> = std::iter::once(a[0]).chain(a[2..=n].iter().copied()).collect();
        let rest: Vec<VarId> = a.iter().copied().filter(|v| !first.contains(v)).collect();
        let p0 = self.urgent_node(comp, &format!("{prefix}_p0"));
        let r1 = self.with_b(&first);
        let m1 = self.b.node(comp, &format!("{prefix}_m1"), r1, vec![]);
        let r2 = self.with_b(&rest);
        let m2 = self.b.node(comp, &format!("{prefix}_m2"), r2, vec![]);
        let chk = self.chk(n, g);
        let eqc = self.chk_eq(g);
        let all = self.b.all();
        let k = self.b.bx(comp, &format!("{prefix}_K"), chk, all.clone());
        let e = self.b.bx(comp, &format!("{prefix}_E"), eqc, all);
        self.ports(k);
        self.ports(e);
        self.b.edge(from, Location::Node(p0), vec![], &[b]);
        self.b.edge(Location::Node(p0), Location::Node(m1), vec![], &[]);
        let (kc, kr) = (self.b.call(k), self.b.ret(k, 0));
        self.b.edge(Location::Node(m1), kc, vec![], &[b]);
        self.b.edge(kr, Location::Node(m2), vec![], &[]);
        let ec = self.b.call(e);
        self.b.edge(Location::Node(m2), ec, vec![], &[b]);
        let nn = n as i64;
        self.b.rule(m1, None, q(nn - 1, nn), vec![(a[0], q(-(nn - 1), nn))]);
        self.b.rule(m2, None, Rational::zero(), vec![(a[0], q(1, 1)), (a[1], q(-1, 1))]);
        self.b.ret(e, 0)
    }
}

fn compile_14sw(cm: &CounterMachine) -> GadgetBundle {
    let mut g = FourteenSw::new("cm_14sw_tb");
    let main = g.b.comp("Main");
    let b = g.b.v("b");
    let l: Vec<NodeId> = (0..cm.len()).map(|i| g.urgent_node(main, &format!("L{i}"))).collect();
    let halt = g.b.plain(main, "Halt", vec![]);
    g.b.entry(main, l[0]);
    g.b.exit(main, halt);
    let mut main_nodes = BTreeMap::new();
    let mut halt_instrs = BTreeSet::new();
    for (i, ins) in cm.instrs.iter().enumerate() {
        main_nodes.insert(l[i], (i, None));
        let mut cur = Location::Node(l[i]);
        let (ups, test) = up_sequence(*ins, true);
        for (j, up) in ups.into_iter().enumerate() {
            let (n, grp) = match up {
                Up::Counter(n, a) => (n as usize, a),
                Up::Z => (2, "z"),
            };
            cur = g.inline_up(main, &format!("I{i}_{j}"), n, grp, cur);
        }
        match *ins {
            Instr::Halt => {
                halt_instrs.insert(i);
                g.b.edge(cur, Location::Node(halt), vec![], &[b]);
            }
            Instr::Inc(_, k) | Instr::Dec(_, k) => g.b.edge(cur, Location::Node(l[k]), vec![], &[b]),
            Instr::Ifz(_, z, nz) => {
                let zc = g.zero_check(test.expect("zero test"));
                let all = g.b.all();
                let bx = g.b.bx(main, &format!("I{i}_Z"), zc, all);
                g.ports(bx);
                let call = g.b.call(bx);
                g.b.edge(cur, call, vec![], &[b]);
                let (r0, r1) = (g.b.ret(bx, 0), g.b.ret(bx, 1));
                g.b.edge(r0, Location::Node(l[z]), vec![], &[b]);
                g.b.edge(r1, Location::Node(l[nz]), vec![], &[b]);
            }
        }
    }
    let descriptor = Descriptor {
        encoding: Encoding::FourteenSwTb,
        main_nodes,
        halt,
        halt_instrs,
    };
    let init = descriptor.encode(&g.b.m, 0, 0, 0);
    g.b.init(main, l[0], init);
    GadgetBundle {
        model: g.b.m,
        encoding: Encoding::FourteenSwTb,
        oracle: g.b.oracle,
        descriptor,
    }
}

pub fn compile_cm(cm: &CounterMachine, encoding: Encoding) -> GadgetBundle {
    match encoding {
        Encoding::TwoSw => compile_2sw(cm),
        Encoding::ThreeSwGf => compile_3sw(cm),
        Encoding::FiveClkTb => compile_5clk(cm),
        Encoding::FourteenSwTb => compile_14sw(cm),
    }
}

/// Simulates `bundle` under its oracle until `Halt`, or until more than
/// `step_bound` instructions have been started.
pub fn run_bundle(bundle: &GadgetBundle, step_bound: usize) -> Result<GadgetRun, GadgetError> {
    let model = &bundle.model;
    let desc = &bundle.descriptor;
    let started = Cell::new(0usize);
    let stopped_by_bound = Cell::new(false);
    let target = |c: &Configuration| {
        if !c.context.is_empty() {
            return false;
        }
        let Location::Node(n) = c.loc else { return false };
        if n == desc.halt {
            return true;
        }
        if let Some((pc, _)) = desc.main_nodes.get(&n) {
            started.set(started.get() + 1);
            if started.get() > step_bound + 1 && !desc.halt_instrs.contains(pc) {
                stopped_by_bound.set(true);
                return true;
            }
        }
        false
    };
    let init = crate::semantics::initial_configuration(model);
    let out = simulate_from(model, init, &bundle.oracle, usize::MAX, &target)?;
    let last = out.run.last().clone();
    let halted = !stopped_by_bound.get() && last.context.is_empty() && last.loc == Location::Node(desc.halt);
    let reason = match out.reason {
        StopReason::Target if halted => StopReason::Target,
        StopReason::Target => StopReason::BoundExhausted,
        StopReason::Deadlock => return Err(GadgetError::Deadlock(model.format_valuation(&last.val))),
        other => other,
    };
    let mut decoded = Vec::new();
    let mut time = Rational::zero();
    for i in 0..=out.run.len() {
        if i > 0 {
            time += &out.run.steps[i - 1].delay;
        }
        let cfg = out.run.config(i);
        if stopped_by_bound.get() && i == out.run.len() {
            break;
        }
        let k = decoded.len() as u64;
        match desc.decode(model, cfg, k) {
            Ok(Some(mut d)) => {
                if bundle.encoding.is_time_bounded() && d.k != k {
                    return Err(GadgetError::Invariant {
                        pc: d.pc,
                        detail: format!("k reads {} after {k} instructions", d.k),
                    });
                }
                d.time = time.clone();
                decoded.push(d);
            }
            Ok(None) => {}
            Err(detail) => {
                let pc = match cfg.loc {
                    Location::Node(n) => desc.main_nodes.get(&n).map(|p| p.0).unwrap_or(0),
                    _ => 0,
                };
                return Err(GadgetError::Invariant { pc, detail });
            }
        }
    }
    let mut instr_durations: Vec<Rational> = decoded.windows(2).map(|w| &w[1].time - &w[0].time).collect();
    if halted {
        if let Some(last) = decoded.last() {
            instr_durations.push(out.run.duration() - &last.time);
        }
    }
    Ok(GadgetRun {
        halted,
        reason,
        duration: out.run.duration(),
        decoded,
        instr_durations,
        run: out.run,
    })
}

pub fn simulate_gadget(cm: &CounterMachine, encoding: Encoding, step_bound: usize) -> Result<GadgetRun, GadgetError> {
    run_bundle(&compile_cm(cm, encoding), step_bound)
}

// ---- probes: single gadgets behind a trivial main component --------------------

/// A single gadget exercised on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Probe {
    Double,
    Halve,
    Triple,
    Third,
    /// Zero test for `d`: exits `yes` iff the value is a power of 1/2.
    PowerOf2,
    /// Zero test for `c`: exits `yes` iff the value is a power of 1/3.
    PowerOf3,
    /// `Z := 1 - (1-Z)/2` (time-bounded encodings).
    UpZ,
}

#[derive(Debug, Clone)]
pub struct ProbeBundle {
    pub model: RhaModel,
    pub oracle: RuleOracle,
    pub start: NodeId,
    pub yes: NodeId,
    pub no: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeOutcome {
    /// Valuation at the exit reached.
    pub val: Valuation,
    /// True at `yes`, false at `no`.
    pub yes: bool,
    pub duration: Rational,
}

fn probe_main(b: &mut Builder) -> (usize, NodeId, NodeId, NodeId) {
    let c = b.comp("Main");
    let start = b.plain(c, "start", vec![]);
    let yes = b.plain(c, "yes", vec![]);
    let no = b.plain(c, "no", vec![]);
    b.entry(c, start);
    b.exit(c, yes);
    b.exit(c, no);
    (c, start, yes, no)
}

/// `None` if the gadget does not exist in that encoding.
pub fn probe_bundle(encoding: Encoding, probe: Probe) -> Option<ProbeBundle> {
    let scale = match probe {
        Probe::Double => Some(Scale::Mul(2)),
        Probe::Halve => Some(Scale::Div(2)),
        Probe::Triple => Some(Scale::Mul(3)),
        Probe::Third => Some(Scale::Div(3)),
        _ => None,
    };
    let base = match probe {
        Probe::PowerOf2 => Some(2),
        Probe::PowerOf3 => Some(3),
        _ => None,
    };
    let (b, start, yes, no) = match encoding {
        Encoding::TwoSw => {
            let mut g = TwoSw::new("probe_2sw");
            let (c, start, yes, no) = probe_main(&mut g.b);
            let callee = match (scale, base) {
                (Some(op), _) => g.scale(op, false),
                (_, Some(n)) => g.zero_check(n, false),
                _ => return None,
            };
            let bx = g.b.bx(c, "G", callee, BTreeSet::new());
            let call = g.b.call(bx);
            g.b.edge(Location::Node(start), call, vec![], &[]);
            let r0 = g.b.ret(bx, 0);
            g.b.edge(r0, Location::Node(yes), vec![], &[]);
            if base.is_some() {
                let r1 = g.b.ret(bx, 1);
                g.b.edge(r1, Location::Node(no), vec![], &[]);
            }
            (g.b, start, yes, no)
        }
        Encoding::ThreeSwGf => {
            let mut g = ThreeSw::new("probe_3sw_gf");
            let (c, start, yes, no) = probe_main(&mut g.b);
            match (scale, base) {
                (Some(op), _) => {
                    g.inline_scale(c, "G", op, Location::Node(start), vec![], Location::Node(yes));
                }
                (_, Some(n)) => {
                    let po = g.power(n);
                    let all = g.b.all();
                    let bx = g.b.bx(c, "G", po, all);
                    let call = g.b.call(bx);
                    g.b.edge(Location::Node(start), call, vec![], &[]);
                    let (r0, r1) = (g.b.ret(bx, 0), g.b.ret(bx, 1));
                    g.b.edge(r0, Location::Node(yes), vec![], &[]);
                    g.b.edge(r1, Location::Node(no), vec![], &[]);
                }
                _ => return None,
            }
            (g.b, start, yes, no)
        }
        Encoding::FiveClkTb => {
            if probe != Probe::UpZ {
                return None;
            }
            let mut g = FiveClk::new("probe_5clk_tb");
            let (c, start, yes, no) = probe_main(&mut g.b);
            let up = g.up(Up::Z);
            let by_value = g.b.all_but(&[g.b.v("z1"), g.b.v("z2")]);
            let bx = g.b.bx(c, "G", up, by_value);
            let call = g.b.call(bx);
            g.b.edge(Location::Node(start), call, vec![], &[]);
            let r0 = g.b.ret(bx, 0);
            g.b.edge(r0, Location::Node(yes), vec![], &[]);
            (g.b, start, yes, no)
        }
        Encoding::FourteenSwTb => {
            if probe != Probe::UpZ {
                return None;
            }
            let mut g = FourteenSw::new("probe_14sw_tb");
            let (c, start, yes, no) = probe_main(&mut g.b);
            let end = g.inline_up(c, "G", 2, "z", Location::Node(start));
            g.b.edge(end, Location::Node(yes), vec![], &[]);
            (g.b, start, yes, no)
        }
    };
    let has_no = base.is_some();
    Some(ProbeBundle {
        model: b.m,
        oracle: b.oracle,
        start,
        yes,
        no: has_no.then_some(no),
    })
}

impl ProbeBundle {
    /// Runs from `start` with valuation `val` until an exit of the main component.
    pub fn run(&self, val: Valuation) -> Result<ProbeOutcome, GadgetError> {
        let init = Configuration::new(Location::Node(self.start), val);
        let out = simulate_from(&self.model, init, &self.oracle, 1_000_000, &|_| false)?;
        let last = out.run.last();
        let at = |n: NodeId| last.context.is_empty() && last.loc == Location::Node(n);
        if out.reason != StopReason::Terminated || !(at(self.yes) || self.no.map(at).unwrap_or(false)) {
            return Err(GadgetError::Deadlock(self.model.format_valuation(&last.val)));
        }
        Ok(ProbeOutcome {
            val: last.val.clone(),
            yes: at(self.yes),
            duration: out.run.duration(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cm::{cm_run, parse_cm};
    use crate::model::validate_model;
    use crate::semantics::validate_run;

    fn xy(x: Rational, y: Rational) -> Valuation {
        Valuation::from_values(vec![x, y])
    }

    #[test]
    fn decode_roundtrip() {
        assert_eq!(decode_2_3(&value_2_3(3, 2)), Some((3, 2)));
        assert_eq!(decode_2_3(&q(2, 3)), None);
        assert_eq!(decode_2_3(&q(1, 10)), None);
        assert_eq!(decode_pow2_gap(&q(7, 8)), Some(3));
        assert_eq!(decode_pow2_gap(&Rational::zero()), Some(0));
        assert_eq!(decode_pow2_gap(&q(2, 3)), None);
    }

    #[test]
    fn double_from_one_sixth() {
        let p = probe_bundle(Encoding::TwoSw, Probe::Double).unwrap();
        let out = p.run(xy(q(1, 6), Rational::zero())).unwrap();
        assert_eq!(out.val, xy(Rational::zero(), q(1, 3)));
    }

    #[test]
    fn halve_and_third() {
        let p = probe_bundle(Encoding::TwoSw, Probe::Halve).unwrap();
        assert_eq!(p.run(xy(q(1, 3), Rational::zero())).unwrap().val, xy(Rational::zero(), q(1, 6)));
        let p = probe_bundle(Encoding::TwoSw, Probe::Third).unwrap();
        assert_eq!(p.run(xy(q(1, 2), Rational::zero())).unwrap().val, xy(Rational::zero(), q(1, 6)));
    }

    #[test]
    fn power_of_two_test() {
        let p = probe_bundle(Encoding::TwoSw, Probe::PowerOf2).unwrap();
        assert!(p.run(xy(q(1, 4), Rational::zero())).unwrap().yes);
        assert!(!p.run(xy(q(1, 12), Rational::zero())).unwrap().yes);
        let out = p.run(xy(q(1, 4), Rational::zero())).unwrap();
        assert_eq!(out.val, xy(q(1, 4), Rational::zero()));
    }

    #[test]
    fn up_z_takes_five_halves_beta() {
        for enc in [Encoding::FiveClkTb, Encoding::FourteenSwTb] {
            let p = probe_bundle(enc, Probe::UpZ).unwrap();
            let d = Descriptor {
                encoding: enc,
                main_nodes: BTreeMap::new(),
                halt: p.start,
                halt_instrs: BTreeSet::new(),
            };
            let init = d.encode(&p.model, 1, 2, 3);
            let out = p.run(init).unwrap();
            assert_eq!(out.duration, q(5, 16), "{enc}");
            assert_eq!(out.val, d.encode(&p.model, 0, 1, 4), "{enc}");
        }
    }

    #[test]
    fn compiled_models_validate_and_agree() {
        let cm = parse_cm("inc c goto 1; inc d goto 2; ifz c goto 5 else 3; dec c goto 4; dec d goto 2; halt").unwrap();
        let reference = cm_run(&cm, 100).unwrap();
        assert!(reference.halted);
        for enc in Encoding::ALL {
            let b = compile_cm(&cm, enc);
            let v = validate_model(&b.model);
            assert!(v.is_ok(), "{enc}: {:?}", v.diagnostics);
            let glitch_free = matches!(enc, Encoding::ThreeSwGf | Encoding::FourteenSwTb);
            assert_eq!(v.class.glitch_free, glitch_free, "{enc}");
            let r = run_bundle(&b, 100).unwrap();
            assert!(r.agrees_with(&reference), "{enc}: {:?}", r.decoded);
            validate_run(&b.model, &r.run).unwrap();
        }
    }

    #[test]
    fn looping_program_exhausts_bound() {
        let cm = parse_cm("inc c goto 1; dec c goto 0; halt").unwrap();
        for enc in Encoding::ALL {
            let r = simulate_gadget(&cm, enc, 6).unwrap();
            assert!(!r.halted);
            assert_eq!(r.reason, StopReason::BoundExhausted);
            assert!(r.agrees_with(&cm_run(&cm, 6).unwrap()), "{enc}");
        }
    }
}
