//! Structural data model for recursive hybrid automata.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Clock,
    Stopwatch,
    General,
}

impl ModelKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Clock => "clock",
            ModelKind::Stopwatch => "stopwatch",
            ModelKind::General => "general",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
        }
    }
}

/// `var ⋈ bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomicConstraint {
    pub var: VarId,
    pub rel: Relation,
    pub bound: i64,
}

impl AtomicConstraint {
    pub fn new(var: VarId, rel: Relation, bound: i64) -> Self {
        AtomicConstraint { var, rel, bound }
    }

    pub fn holds(&self, v: &Valuation) -> bool {
        self.rel.holds(v.get(self.var), &Rational::from_int(self.bound))
    }
}

/// Conjunction of atoms; the empty conjunction is ⊤.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RectConstraint {
    pub atoms: Vec<AtomicConstraint>,
}

impl RectConstraint {
    pub fn top() -> Self {
        RectConstraint { atoms: Vec::new() }
    }

    pub fn new(atoms: Vec<AtomicConstraint>) -> Self {
        RectConstraint { atoms }
    }

    pub fn is_top(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn and(mut self, other: &RectConstraint) -> Self {
        self.atoms.extend(other.atoms.iter().cloned());
        self
    }

    pub fn eval(&self, v: &Valuation) -> bool {
        self.atoms.iter().all(|a| a.holds(v))
    }

    pub fn max_constant(&self) -> i64 {
        self.atoms.iter().map(|a| a.bound).max().unwrap_or(0)
    }
}

pub fn eval_constraint(c: &RectConstraint, v: &Valuation) -> bool {
    c.eval(v)
}

/// A valuation indexed by variable id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Valuation(pub Vec<Rational>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvolveError {
    #[error("negative delay {0}")]
    NegativeDelay(Rational),
}

impl Valuation {
    pub fn zero(n: usize) -> Self {
        Valuation(vec![Rational::zero(); n])
    }

    pub fn from_values(vals: Vec<Rational>) -> Self {
        Valuation(vals)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, x: VarId) -> &Rational {
        &self.0[x.0]
    }

    pub fn set(&mut self, x: VarId, v: Rational) {
        self.0[x.0] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Rational> {
        self.0.iter()
    }

    /// `(ν + r·t)[reset := 0]`.
    pub fn evolve_and_reset(
        &self,
        rates: &RateVector,
        t: &Rational,
        reset: &BTreeSet<VarId>,
    ) -> Result<Valuation, EvolveError> {
        if t.is_negative() {
            return Err(EvolveError::NegativeDelay(t.clone()));
        }
        Ok(self.evolve_unchecked(rates, t, reset))
    }

    pub(crate) fn evolve_unchecked(
        &self,
        rates: &RateVector,
        t: &Rational,
        reset: &BTreeSet<VarId>,
    ) -> Valuation {
        Valuation(
            self.0
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if reset.contains(&VarId(i)) {
                        Rational::zero()
                    } else {
                        v + Rational::from(rates.0[i] as u64) * t
                    }
                })
                .collect(),
        )
    }
}

pub fn evolve_and_reset(
    v: &Valuation,
    rates: &RateVector,
    t: &Rational,
    reset: &BTreeSet<VarId>,
) -> Result<Valuation, EvolveError> {
    v.evolve_and_reset(rates, t, reset)
}

/// Per-variable natural rates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RateVector(pub Vec<u32>);

impl RateVector {
    pub fn uniform(n: usize, r: u32) -> Self {
        RateVector(vec![r; n])
    }

    pub fn get(&self, x: VarId) -> u32 {
        self.0[x.0]
    }

    pub fn max(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// A location: node, call port `(b, en)` or return port `(b, ex)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Location {
    Node(NodeId),
    Call(BoxId, NodeId),
    Return(BoxId, NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub component: usize,
    pub rates: RateVector,
    pub inv: RectConstraint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxDecl {
    pub name: String,
    pub owner: usize,
    pub callee: usize,
    pub by_value: BTreeSet<VarId>,
}

/// Rates and invariant attached to a port location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortAttr {
    pub rates: RateVector,
    pub inv: RectConstraint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub component: usize,
    pub src: Location,
    pub dst: Location,
    pub guard: RectConstraint,
    pub reset: BTreeSet<VarId>,
    pub action: Option<String>,
}

impl Edge {
    pub fn label(&self) -> &str {
        self.action.as_deref().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Component {
    pub name: String,
    pub nodes: Vec<NodeId>,
    pub entries: Vec<NodeId>,
    pub exits: Vec<NodeId>,
    pub boxes: Vec<BoxId>,
    pub edges: Vec<EdgeId>,
    pub ports: BTreeMap<Location, PortAttr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitDecl {
    pub component: usize,
    pub node: NodeId,
    pub valuation: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RhaModel {
    pub name: String,
    pub vars: Vec<String>,
    pub kind: ModelKind,
    pub cmax_override: Option<i64>,
    pub components: Vec<Component>,
    pub nodes: Vec<Node>,
    pub boxes: Vec<BoxDecl>,
    pub edges: Vec<Edge>,
    pub init: Option<InitDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ModelClass {
    pub clocks_only: bool,
    pub stopwatches_only: bool,
    pub glitch_free: bool,
    pub by_reference_only: bool,
    /// Set when the call graph contains a cycle (genuine recursion).
    pub hierarchical_unknown: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub diagnostics: Vec<String>,
    pub class: ModelClass,
    pub cmax: i64,
    pub rmax: u32,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

impl RhaModel {
    pub fn new(name: &str, vars: &[&str], kind: ModelKind) -> Self {
        RhaModel {
            name: name.to_string(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            kind,
            cmax_override: None,
            components: Vec::new(),
            nodes: Vec::new(),
            boxes: Vec::new(),
            edges: Vec::new(),
            init: None,
        }
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v == name).map(VarId)
    }

    pub fn var_name(&self, x: VarId) -> &str {
        &self.vars[x.0]
    }

    pub fn all_vars(&self) -> BTreeSet<VarId> {
        (0..self.nvars()).map(VarId).collect()
    }

    pub fn default_rate(&self) -> u32 {
        if self.kind == ModelKind::Clock {
            1
        } else {
            0
        }
    }

    pub fn default_rates(&self) -> RateVector {
        RateVector::uniform(self.nvars(), self.default_rate())
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn box_by_name(&self, name: &str) -> Option<BoxId> {
        self.boxes.iter().position(|b| b.name == name).map(BoxId)
    }

    pub fn node(&self, n: NodeId) -> &Node {
        &self.nodes[n.0]
    }

    pub fn box_decl(&self, b: BoxId) -> &BoxDecl {
        &self.boxes[b.0]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    // ---- construction helpers -------------------------------------------------

    pub fn add_component(&mut self, name: &str) -> usize {
        self.components.push(Component {
            name: name.to_string(),
            ..Default::default()
        });
        self.components.len() - 1
    }

    /// Adds a node with the given non-default rates (by variable name) and invariant.
    pub fn add_node(&mut self, comp: usize, name: &str, rates: RateVector, inv: RectConstraint) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            name: name.to_string(),
            component: comp,
            rates,
            inv,
        });
        self.components[comp].nodes.push(id);
        id
    }

    pub fn add_box(&mut self, comp: usize, name: &str, callee: usize, by_value: BTreeSet<VarId>) -> BoxId {
        let id = BoxId(self.boxes.len());
        self.boxes.push(BoxDecl {
            name: name.to_string(),
            owner: comp,
            callee,
            by_value,
        });
        self.components[comp].boxes.push(id);
        id
    }

    pub fn add_edge(
        &mut self,
        src: Location,
        dst: Location,
        guard: RectConstraint,
        reset: BTreeSet<VarId>,
        action: Option<&str>,
    ) -> EdgeId {
        let comp = self.owner_of(src);
        let id = EdgeId(self.edges.len());
        self.edges.push(Edge {
            component: comp,
            src,
            dst,
            guard,
            reset,
            action: action.map(|s| s.to_string()),
        });
        self.components[comp].edges.push(id);
        id
    }

    pub fn set_port(&mut self, loc: Location, rates: RateVector, inv: RectConstraint) {
        let comp = self.owner_of(loc);
        self.components[comp].ports.insert(loc, PortAttr { rates, inv });
    }

    // ---- queries ---------------------------------------------------------------

    /// The component whose location set contains `loc`.
    pub fn owner_of(&self, loc: Location) -> usize {
        match loc {
            Location::Node(n) => self.nodes[n.0].component,
            Location::Call(b, _) | Location::Return(b, _) => self.boxes[b.0].owner,
        }
    }

    pub fn is_entry(&self, n: NodeId) -> bool {
        let c = &self.components[self.nodes[n.0].component];
        c.entries.contains(&n)
    }

    pub fn is_exit(&self, n: NodeId) -> bool {
        let c = &self.components[self.nodes[n.0].component];
        c.exits.contains(&n)
    }

    pub fn rates(&self, loc: Location) -> RateVector {
        match loc {
            Location::Node(n) => self.nodes[n.0].rates.clone(),
            _ => self.components[self.owner_of(loc)]
                .ports
                .get(&loc)
                .map(|p| p.rates.clone())
                .unwrap_or_else(|| self.default_rates()),
        }
    }

    pub fn inv(&self, loc: Location) -> RectConstraint {
        match loc {
            Location::Node(n) => self.nodes[n.0].inv.clone(),
            _ => self.components[self.owner_of(loc)]
                .ports
                .get(&loc)
                .map(|p| p.inv.clone())
                .unwrap_or_default(),
        }
    }

    pub fn outgoing(&self, loc: Location) -> Vec<EdgeId> {
        let comp = self.owner_of(loc);
        self.components[comp]
            .edges
            .iter()
            .copied()
            .filter(|e| self.edges[e.0].src == loc)
            .collect()
    }

    /// All locations `Q_i = N_i ∪ Call_i ∪ Ret_i` of a component.
    pub fn locations(&self, comp: usize) -> Vec<Location> {
        let c = &self.components[comp];
        let mut out: Vec<Location> = c.nodes.iter().map(|n| Location::Node(*n)).collect();
        for b in &c.boxes {
            let callee = self.boxes[b.0].callee;
            if let Some(cc) = self.components.get(callee) {
                out.extend(cc.entries.iter().map(|en| Location::Call(*b, *en)));
                out.extend(cc.exits.iter().map(|ex| Location::Return(*b, *ex)));
            }
        }
        out
    }

    pub fn all_locations(&self) -> Vec<Location> {
        (0..self.components.len()).flat_map(|c| self.locations(c)).collect()
    }

    /// Short name within the component: `n`, `b.en`, `b.ex`.
    pub fn loc_name(&self, loc: Location) -> String {
        match loc {
            Location::Node(n) => self.nodes[n.0].name.clone(),
            Location::Call(b, n) | Location::Return(b, n) => {
                format!("{}.{}", self.boxes[b.0].name, self.nodes[n.0].name)
            }
        }
    }

    /// Name qualified by the owning component: `C.n`, `C.b.en`.
    pub fn qualified_loc_name(&self, loc: Location) -> String {
        format!("{}.{}", self.components[self.owner_of(loc)].name, self.loc_name(loc))
    }

    /// Resolves `n`, `b.en`/`b.ex`, optionally prefixed by `C.`.
    pub fn resolve_location(&self, text: &str) -> Option<Location> {
        let parts: Vec<&str> = text.split('.').collect();
        let (comp, rest): (Option<usize>, &[&str]) = match parts.len() {
            3 => (Some(self.component_index(parts[0])?), &parts[1..]),
            2 => {
                if let Some(c) = self.component_index(parts[0]) {
                    if self.node_by_name(parts[1]).map(|n| self.nodes[n.0].component) == Some(c) {
                        (Some(c), &parts[1..])
                    } else {
                        (None, &parts[..])
                    }
                } else {
                    (None, &parts[..])
                }
            }
            1 => (None, &parts[..]),
            _ => return None,
        };
        let loc = match rest {
            [n] => Location::Node(self.node_by_name(n)?),
            [b, n] => {
                let bid = self.box_by_name(b)?;
                let nid = self.node_by_name(n)?;
                let callee = &self.components[self.boxes[bid.0].callee];
                if callee.entries.contains(&nid) {
                    Location::Call(bid, nid)
                } else if callee.exits.contains(&nid) {
                    Location::Return(bid, nid)
                } else {
                    return None;
                }
            }
            _ => return None,
        };
        match comp {
            Some(c) if self.owner_of(loc) != c => None,
            _ => Some(loc),
        }
    }

    pub fn computed_cmax(&self) -> i64 {
        let mut m = 0;
        for n in &self.nodes {
            m = m.max(n.inv.max_constant());
        }
        for e in &self.edges {
            m = m.max(e.guard.max_constant());
        }
        for c in &self.components {
            for p in c.ports.values() {
                m = m.max(p.inv.max_constant());
            }
        }
        m
    }

    pub fn cmax(&self) -> i64 {
        let c = self.computed_cmax();
        match self.cmax_override {
            Some(o) if o > c => o,
            _ => c,
        }
    }

    pub fn rmax(&self) -> u32 {
        let mut r = self.nodes.iter().map(|n| n.rates.max()).max().unwrap_or(0);
        for c in &self.components {
            for p in c.ports.values() {
                r = r.max(p.rates.max());
            }
        }
        if self.has_default_ports() {
            r = r.max(self.default_rate());
        }
        r
    }

    fn has_default_ports(&self) -> bool {
        self.components.iter().enumerate().any(|(i, c)| {
            self.locations(i)
                .iter()
                .any(|l| !matches!(l, Location::Node(_)) && !c.ports.contains_key(l))
        })
    }

    fn all_rate_vectors(&self) -> Vec<RateVector> {
        let mut out: Vec<RateVector> = self.nodes.iter().map(|n| n.rates.clone()).collect();
        for (i, c) in self.components.iter().enumerate() {
            for l in self.locations(i) {
                if !matches!(l, Location::Node(_)) {
                    out.push(c.ports.get(&l).map(|p| p.rates.clone()).unwrap_or_else(|| self.default_rates()));
                }
            }
        }
        out
    }

    pub fn classify(&self) -> ModelClass {
        let rates = self.all_rate_vectors();
        let clocks_only = rates.iter().all(|r| r.0.iter().all(|&x| x == 1));
        let stopwatches_only = rates.iter().all(|r| r.0.iter().all(|&x| x <= 1));
        let all = self.all_vars();
        let glitch_free = self
            .boxes
            .iter()
            .all(|b| b.by_value.is_empty() || b.by_value == all);
        let by_reference_only = self.boxes.iter().all(|b| b.by_value.is_empty());
        ModelClass {
            clocks_only,
            stopwatches_only,
            glitch_free,
            by_reference_only,
            hierarchical_unknown: self.call_graph_has_cycle(),
        }
    }

    fn call_graph_has_cycle(&self) -> bool {
        let n = self.components.len();
        let mut adj = vec![Vec::new(); n];
        for b in &self.boxes {
            if b.owner < n && b.callee < n {
                adj[b.owner].push(b.callee);
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        fn dfs(u: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
            state[u] = 1;
            for &v in &adj[u] {
                if state[v] == 1 || (state[v] == 0 && dfs(v, adj, state)) {
                    return true;
                }
            }
            state[u] = 2;
            false
        }
        (0..n).any(|u| state[u] == 0 && dfs(u, &adj, &mut state))
    }

    pub fn initial_location(&self) -> Option<Location> {
        self.init.as_ref().map(|i| Location::Node(i.node))
    }

    pub fn initial_valuation(&self) -> Valuation {
        self.init
            .as_ref()
            .map(|i| i.valuation.clone())
            .unwrap_or_else(|| Valuation::zero(self.nvars()))
    }

    pub fn format_valuation(&self, v: &Valuation) -> String {
        let parts: Vec<String> = self
            .vars
            .iter()
            .zip(v.iter())
            .map(|(n, x)| format!("{n}={x}"))
            .collect();
        format!("({})", parts.join(", "))
    }
}

fn check_constraint(model: &RhaModel, c: &RectConstraint, what: &str, diags: &mut Vec<String>) {
    for a in &c.atoms {
        if a.var.0 >= model.nvars() {
            diags.push(format!("{what}: unknown variable index {}", a.var.0));
        }
        if a.bound < 0 {
            diags.push(format!("{what}: negative constant {}", a.bound));
        }
    }
}

/// Structural well-formedness check and classification.
pub fn validate_model(model: &RhaModel) -> Validation {
    let mut diags = Vec::new();
    let nc = model.components.len();

    let mut seen = HashSet::new();
    for v in &model.vars {
        if !seen.insert(v.as_str()) {
            diags.push(format!("duplicate id: variable `{v}`"));
        }
    }
    let mut seen = HashSet::new();
    for c in &model.components {
        if !seen.insert(c.name.as_str()) {
            diags.push(format!("duplicate id: component `{}`", c.name));
        }
    }
    let mut seen: HashMap<&str, &str> = HashMap::new();
    for n in &model.nodes {
        if seen.insert(n.name.as_str(), "node").is_some() {
            diags.push(format!("duplicate id: node `{}`", n.name));
        }
    }
    for b in &model.boxes {
        if let Some(kind) = seen.insert(b.name.as_str(), "box") {
            diags.push(format!("duplicate id: box `{}` clashes with {kind}", b.name));
        }
    }

    for n in &model.nodes {
        if n.component >= nc {
            diags.push(format!("node `{}` belongs to missing component", n.name));
        }
        if n.rates.0.len() != model.nvars() {
            diags.push(format!("node `{}`: rate vector has wrong arity", n.name));
        }
        check_constraint(model, &n.inv, &format!("invariant of `{}`", n.name), &mut diags);
    }
    for b in &model.boxes {
        if b.callee >= nc {
            diags.push(format!("dangling box target: box `{}` maps to component #{}", b.name, b.callee));
        }
        if b.by_value.iter().any(|x| x.0 >= model.nvars()) {
            diags.push(format!("box `{}`: unknown variable in pass-by-value set", b.name));
        }
    }
    for c in &model.components {
        for en in &c.entries {
            if c.exits.contains(en) {
                diags.push(format!(
                    "component `{}`: node `{}` is both entry and exit",
                    c.name, model.nodes[en.0].name
                ));
            }
        }
        for (loc, p) in &c.ports {
            check_constraint(model, &p.inv, "port invariant", &mut diags);
            if p.rates.0.len() != model.nvars() {
                diags.push(format!("port in `{}`: rate vector has wrong arity", c.name));
            }
            if let Location::Node(_) = loc {
                diags.push(format!("port table of `{}` contains a node", c.name));
            }
        }
    }

    let port_ok = |b: BoxId, n: NodeId, entry: bool| -> bool {
        let Some(bd) = model.boxes.get(b.0) else { return false };
        let Some(callee) = model.components.get(bd.callee) else { return false };
        if entry {
            callee.entries.contains(&n)
        } else {
            callee.exits.contains(&n)
        }
    };
    for (i, e) in model.edges.iter().enumerate() {
        let tag = format!("edge #{i}");
        for loc in [e.src, e.dst] {
            match loc {
                Location::Node(n) if n.0 >= model.nodes.len() => diags.push(format!("{tag}: unknown node")),
                Location::Call(b, n) if !port_ok(b, n, true) => {
                    diags.push(format!("{tag}: call port does not name an entry of the callee"))
                }
                Location::Return(b, n) if !port_ok(b, n, false) => {
                    diags.push(format!("{tag}: return port does not name an exit of the callee"))
                }
                _ => {}
            }
        }
        match e.src {
            Location::Call(..) => diags.push(format!("{tag}: outgoing from call port")),
            Location::Node(n) if n.0 < model.nodes.len() && model.is_exit(n) => {
                diags.push(format!("{tag}: outgoing from exit `{}`", model.nodes[n.0].name))
            }
            _ => {}
        }
        let owners_ok = [e.src, e.dst].iter().all(|l| match l {
            Location::Node(n) => model.nodes.get(n.0).map(|x| x.component) == Some(e.component),
            Location::Call(b, _) | Location::Return(b, _) => {
                model.boxes.get(b.0).map(|x| x.owner) == Some(e.component)
            }
        });
        if !owners_ok {
            diags.push(format!("{tag}: endpoints lie in different components"));
        }
        check_constraint(model, &e.guard, &format!("{tag} guard"), &mut diags);
    }

    if let Some(init) = &model.init {
        if init.valuation.len() != model.nvars() {
            diags.push("init: valuation has wrong arity".to_string());
        }
        if init.valuation.iter().any(|v| v.is_negative()) {
            diags.push("init: negative value".to_string());
        }
    }

    let computed = model.computed_cmax();
    if let Some(o) = model.cmax_override {
        if o < computed {
            diags.push(format!("cmax override {o} is below the largest constant {computed}"));
        }
    }

    let class = if diags.is_empty() { model.classify() } else { ModelClass::default() };
    if diags.is_empty() {
        match model.kind {
            ModelKind::Clock if !class.clocks_only => {
                diags.push("kind clock but some rate differs from 1".to_string())
            }
            ModelKind::Stopwatch if !class.stopwatches_only => {
                diags.push("kind stopwatch but some rate is not in {0,1}".to_string())
            }
            _ => {}
        }
    }
    Validation {
        diagnostics: diags,
        class,
        cmax: model.cmax(),
        rmax: model.rmax(),
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Node(n) => write!(f, "n{}", n.0),
            Location::Call(b, n) => write!(f, "call(b{},n{})", b.0, n.0),
            Location::Return(b, n) => write!(f, "ret(b{},n{})", b.0, n.0),
        }
    }
}

/// Builds a constraint from `(var, rel, bound)` triples; panics on unknown names.
pub fn constraint(model: &RhaModel, atoms: &[(&str, Relation, i64)]) -> RectConstraint {
    RectConstraint::new(
        atoms
            .iter()
            .map(|(v, r, b)| AtomicConstraint::new(model.var(v).expect("unknown variable"), *r, *b))
            .collect(),
    )
}

pub fn var_set(model: &RhaModel, names: &[&str]) -> BTreeSet<VarId> {
    names.iter().map(|n| model.var(n).expect("unknown variable")).collect()
}

pub fn rates_of(model: &RhaModel, ticking: &[&str]) -> RateVector {
    let mut r = RateVector::uniform(model.nvars(), 0);
    for n in ticking {
        r.0[model.var(n).expect("unknown variable").0] = 1;
    }
    r
}
