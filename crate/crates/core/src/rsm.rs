//! Finite recursive state machines: summary saturation, reachability,
//! termination and witness extraction.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RsmLoc {
    Node(usize),
    /// (box index, callee entry node index)
    Call(usize, usize),
    /// (box index, callee exit node index)
    Ret(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsmBox {
    pub name: String,
    pub callee: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsmEdge {
    pub src: RsmLoc,
    pub dst: RsmLoc,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RsmComponent {
    pub name: String,
    pub nodes: Vec<String>,
    pub entries: Vec<usize>,
    pub exits: Vec<usize>,
    pub boxes: Vec<RsmBox>,
    pub edges: Vec<RsmEdge>,
}

impl RsmComponent {
    pub fn new(name: &str) -> Self {
        RsmComponent {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn add_node(&mut self, name: &str) -> usize {
        self.nodes.push(name.to_string());
        self.nodes.len() - 1
    }

    pub fn add_box(&mut self, name: &str, callee: usize) -> usize {
        self.boxes.push(RsmBox {
            name: name.to_string(),
            callee,
        });
        self.boxes.len() - 1
    }

    pub fn add_edge(&mut self, src: RsmLoc, dst: RsmLoc, label: &str) {
        self.edges.push(RsmEdge {
            src,
            dst,
            label: label.to_string(),
        });
    }

    pub fn is_exit(&self, n: usize) -> bool {
        self.exits.contains(&n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Rsm {
    pub components: Vec<RsmComponent>,
}

/// A location qualified by its component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QLoc {
    pub comp: usize,
    pub loc: RsmLoc,
}

/// A configuration of the RSM semantics: stack of (caller component, box).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RsmConfig {
    pub stack: Vec<(usize, usize)>,
    pub at: QLoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RsmError {
    #[error("unknown location {0:?}")]
    UnknownLocation(QLoc),
}

impl Rsm {
    pub fn loc_exists(&self, q: QLoc) -> bool {
        let Some(c) = self.components.get(q.comp) else { return false };
        match q.loc {
            RsmLoc::Node(n) => n < c.nodes.len(),
            RsmLoc::Call(b, en) => c
                .boxes
                .get(b)
                .map(|bx| self.components[bx.callee].entries.contains(&en))
                .unwrap_or(false),
            RsmLoc::Ret(b, ex) => c
                .boxes
                .get(b)
                .map(|bx| self.components[bx.callee].exits.contains(&ex))
                .unwrap_or(false),
        }
    }

    pub fn loc_name(&self, q: QLoc) -> String {
        let c = &self.components[q.comp];
        match q.loc {
            RsmLoc::Node(n) => format!("{}.{}", c.name, c.nodes[n]),
            RsmLoc::Call(b, n) | RsmLoc::Ret(b, n) => {
                let bx = &c.boxes[b];
                format!("{}.{}.{}", c.name, bx.name, self.components[bx.callee].nodes[n])
            }
        }
    }

    fn adjacency(&self) -> Vec<HashMap<RsmLoc, Vec<usize>>> {
        self.components
            .iter()
            .map(|c| {
                let mut m: HashMap<RsmLoc, Vec<usize>> = HashMap::new();
                for (i, e) in c.edges.iter().enumerate() {
                    m.entry(e.src).or_default().push(i);
                }
                m
            })
            .collect()
    }

    /// One step of the RSM semantics.
    pub fn successors(&self, cfg: &RsmConfig) -> Vec<RsmConfig> {
        let c = &self.components[cfg.at.comp];
        match cfg.at.loc {
            RsmLoc::Call(b, en) => {
                let mut stack = cfg.stack.clone();
                stack.push((cfg.at.comp, b));
                vec![RsmConfig {
                    stack,
                    at: QLoc {
                        comp: c.boxes[b].callee,
                        loc: RsmLoc::Node(en),
                    },
                }]
            }
            RsmLoc::Node(n) if c.is_exit(n) => {
                let mut stack = cfg.stack.clone();
                match stack.pop() {
                    Some((caller, b)) => vec![RsmConfig {
                        stack,
                        at: QLoc {
                            comp: caller,
                            loc: RsmLoc::Ret(b, n),
                        },
                    }],
                    None => Vec::new(),
                }
            }
            loc => c
                .edges
                .iter()
                .filter(|e| e.src == loc)
                .map(|e| RsmConfig {
                    stack: cfg.stack.clone(),
                    at: QLoc {
                        comp: cfg.at.comp,
                        loc: e.dst,
                    },
                })
                .collect(),
        }
    }

    /// Checks that consecutive configurations are related by the step relation.
    pub fn replay(&self, witness: &[RsmConfig]) -> bool {
        witness
            .windows(2)
            .all(|w| self.successors(&w[0]).contains(&w[1]))
    }
}

/// Entry–exit pairs per component realizable with balanced calls.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SummaryTable {
    pub per_component: Vec<BTreeSet<(usize, usize)>>,
}

impl SummaryTable {
    pub fn contains(&self, comp: usize, en: usize, ex: usize) -> bool {
        self.per_component
            .get(comp)
            .map(|s| s.contains(&(en, ex)))
            .unwrap_or(false)
    }

    pub fn total(&self) -> usize {
        self.per_component.iter().map(|s| s.len()).sum()
    }
}

/// `(component, source, location)`: `location` is reachable from `source` in
/// the same frame with balanced calls.
type Fact = (usize, RsmLoc, RsmLoc);

#[derive(Debug, Clone)]
enum Pred {
    Start,
    Edge(Fact),
    /// Through a callee: the call-port fact and the callee's exit fact.
    Summary(Fact, Fact),
}

struct Saturation<'a> {
    rsm: &'a Rsm,
    adj: Vec<HashMap<RsmLoc, Vec<usize>>>,
    pred: HashMap<Fact, Pred>,
    order: Vec<Fact>,
    queue: VecDeque<Fact>,
    summaries: Vec<BTreeSet<(usize, usize)>>,
    waiters: HashMap<(usize, usize), Vec<Fact>>,
}

impl<'a> Saturation<'a> {
    fn new(rsm: &'a Rsm) -> Self {
        Saturation {
            rsm,
            adj: rsm.adjacency(),
            pred: HashMap::new(),
            order: Vec::new(),
            queue: VecDeque::new(),
            summaries: vec![BTreeSet::new(); rsm.components.len()],
            waiters: HashMap::new(),
        }
    }

    fn add(&mut self, f: Fact, p: Pred) {
        if !self.pred.contains_key(&f) {
            self.pred.insert(f, p);
            self.order.push(f);
            self.queue.push_back(f);
        }
    }

    fn seed_entry(&mut self, comp: usize, en: usize) {
        self.add((comp, RsmLoc::Node(en), RsmLoc::Node(en)), Pred::Start);
    }

    fn run(&mut self) {
        while let Some(f) = self.queue.pop_front() {
            let (c, src, q) = f;
            let comp = &self.rsm.components[c];
            match q {
                RsmLoc::Node(n) if comp.is_exit(n) => {
                    if let RsmLoc::Node(en) = src {
                        if comp.entries.contains(&en) && self.summaries[c].insert((en, n)) {
                            let ws = self.waiters.get(&(c, en)).cloned().unwrap_or_default();
                            for w in ws {
                                if let RsmLoc::Call(b, _) = w.2 {
                                    self.add((w.0, w.1, RsmLoc::Ret(b, n)), Pred::Summary(w, f));
                                }
                            }
                        }
                    }
                }
                RsmLoc::Call(b, en) => {
                    let callee = comp.boxes[b].callee;
                    self.waiters.entry((callee, en)).or_default().push(f);
                    self.seed_entry(callee, en);
                    let known: Vec<usize> = self.summaries[callee]
                        .iter()
                        .filter(|(e, _)| *e == en)
                        .map(|(_, x)| *x)
                        .collect();
                    for ex in known {
                        let exit_fact = (callee, RsmLoc::Node(en), RsmLoc::Node(ex));
                        self.add((c, src, RsmLoc::Ret(b, ex)), Pred::Summary(f, exit_fact));
                    }
                }
                _ => {
                    let dsts: Vec<RsmLoc> = self.adj[c]
                        .get(&q)
                        .map(|es| es.iter().map(|&ei| comp.edges[ei].dst).collect())
                        .unwrap_or_default();
                    for dst in dsts {
                        self.add((c, src, dst), Pred::Edge(f));
                    }
                }
            }
        }
    }

    /// Path of configurations realizing `f`, with `stack` below its frame.
    fn expand(&self, f: Fact, stack: &[(usize, usize)], out: &mut Vec<RsmConfig>) {
        // Iterative over same-frame predecessors, recursive into callees.
        let mut chain = vec![f];
        let mut cur = f;
        while let Some(p) = self.pred.get(&cur) {
            match p {
                Pred::Start => break,
                Pred::Edge(prev) | Pred::Summary(prev, _) => {
                    chain.push(*prev);
                    cur = *prev;
                }
            }
        }
        chain.reverse();
        for g in chain {
            if let Some(Pred::Summary(call_fact, exit_fact)) = self.pred.get(&g) {
                let RsmLoc::Call(b, _) = call_fact.2 else { unreachable!() };
                let mut inner = stack.to_vec();
                inner.push((call_fact.0, b));
                self.expand(*exit_fact, &inner, out);
            }
            out.push(RsmConfig {
                stack: stack.to_vec(),
                at: QLoc { comp: g.0, loc: g.2 },
            });
        }
    }
}

/// Least fixpoint of entry–exit summaries, seeding every entry.
pub fn compute_summaries(rsm: &Rsm) -> SummaryTable {
    let mut s = Saturation::new(rsm);
    for (c, comp) in rsm.components.iter().enumerate() {
        for &en in &comp.entries {
            s.seed_entry(c, en);
        }
    }
    s.run();
    SummaryTable {
        per_component: s.summaries,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachResult {
    pub reachable: bool,
    pub witness: Option<Vec<RsmConfig>>,
    pub summaries: SummaryTable,
}

/// Reachability of any target (any context), or, with `termination_only`,
/// of a target exit of the initial component with empty context.
pub fn reachable(rsm: &Rsm, init: QLoc, targets: &[QLoc], termination_only: bool) -> Result<ReachResult, RsmError> {
    if !rsm.loc_exists(init) {
        return Err(RsmError::UnknownLocation(init));
    }
    if let Some(t) = targets.iter().find(|t| !rsm.loc_exists(**t)) {
        return Err(RsmError::UnknownLocation(*t));
    }
    let tset: BTreeSet<QLoc> = targets.iter().copied().collect();
    let mut s = Saturation::new(rsm);
    s.add((init.comp, init.loc, init.loc), Pred::Start);
    s.run();
    let hit = s.order.iter().copied().find(|f| {
        let q = QLoc { comp: f.0, loc: f.2 };
        if !tset.contains(&q) {
            return false;
        }
        if termination_only {
            f.0 == init.comp
                && f.1 == init.loc
                && matches!(f.2, RsmLoc::Node(n) if rsm.components[f.0].is_exit(n))
        } else {
            true
        }
    });
    let witness = hit.map(|f| s.witness_to(f, init));
    Ok(ReachResult {
        reachable: hit.is_some(),
        witness,
        summaries: SummaryTable {
            per_component: s.summaries.clone(),
        },
    })
}

impl<'a> Saturation<'a> {
    /// Full run from `init` to fact `f`, which may live in a nested frame.
    /// Each frame is entered through the earliest discovered call fact, so
    /// the walk only moves to strictly older facts.
    fn witness_to(&self, f: Fact, init: QLoc) -> Vec<RsmConfig> {
        let mut frames: Vec<Fact> = Vec::new();
        let mut cur = f;
        while !(cur.0 == init.comp && cur.1 == init.loc) {
            let RsmLoc::Node(en) = cur.1 else { unreachable!("frame sources are entries") };
            let call = self
                .order
                .iter()
                .copied()
                .find(|w| {
                    matches!(w.2, RsmLoc::Call(b, e) if e == en && self.rsm.components[w.0].boxes[b].callee == cur.0)
                })
                .expect("every seeded entry has a discovered caller");
            frames.push(call);
            cur = call;
        }
        frames.reverse();
        let mut out = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for call in &frames {
            self.expand(*call, &stack, &mut out);
            let RsmLoc::Call(b, _) = call.2 else { unreachable!() };
            stack.push((call.0, b));
        }
        self.expand(f, &stack, &mut out);
        out
    }
}
