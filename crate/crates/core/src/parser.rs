//! The line-oriented `.rha` model language.
//!
//! ```text
//! model NAME
//! vars x y
//! kind clock|stopwatch|general
//! cmax N
//! component C
//! node n rate x:1,y:0 inv x<=2
//! entry n
//! exit m
//! box b : C2 byvalue {x,y}|{}|*
//! port b.en rate x:0,y:1 inv y<=1
//! edge n -> b.en guard x=1 & y<2 reset {x} action a
//! init C.n x=1 y=1/2
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{
    AtomicConstraint, InitDecl, Location, ModelKind, NodeId, RateVector, RectConstraint, Relation, RhaModel,
    Valuation, VarId,
};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SourceDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SourceDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

const RESERVED: &[&str] = &[
    "model", "vars", "kind", "cmax", "component", "entry", "exit", "node", "box", "port", "edge", "init", "rate",
    "inv", "guard", "reset", "action", "byvalue", "true",
];

/// Labels used by traces for the implicit call and return steps.
pub const CALL_LABEL: &str = "call";
pub const RETURN_LABEL: &str = "return";

struct Line<'a> {
    no: usize,
    text: &'a str,
}

impl<'a> Line<'a> {
    fn err(&self, needle: &str, message: impl Into<String>) -> SourceDiagnostic {
        let column = if needle.is_empty() {
            1
        } else {
            self.text.find(needle).map(|c| c + 1).unwrap_or(1)
        };
        SourceDiagnostic {
            line: self.no,
            column,
            message: message.into(),
        }
    }

    fn words(&self) -> Vec<&'a str> {
        self.text.split_whitespace().collect()
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

fn check_name(line: &Line, name: &str, what: &str) -> Result<(), SourceDiagnostic> {
    if !is_ident(name) {
        return Err(line.err(name, format!("invalid {what} name `{name}`")));
    }
    if RESERVED.contains(&name) {
        return Err(line.err(name, format!("`{name}` is a reserved word")));
    }
    Ok(())
}

/// Splits `words` into a head (before the first keyword) and keyword sections.
fn sections<'a>(words: &[&'a str], keywords: &[&str]) -> (Vec<&'a str>, Vec<(&'a str, String)>) {
    let mut head = Vec::new();
    let mut out: Vec<(&str, String)> = Vec::new();
    for w in words {
        if keywords.contains(w) {
            out.push((w, String::new()));
        } else if let Some(last) = out.last_mut() {
            last.1.push_str(w);
        } else {
            head.push(*w);
        }
    }
    (head, out)
}

fn parse_var(line: &Line, vars: &[String], name: &str) -> Result<VarId, SourceDiagnostic> {
    vars.iter()
        .position(|v| v == name)
        .map(VarId)
        .ok_or_else(|| line.err(name, format!("unknown variable `{name}`")))
}

fn parse_expr(line: &Line, vars: &[String], text: &str) -> Result<RectConstraint, SourceDiagnostic> {
    if text.is_empty() {
        return Err(line.err("", "empty constraint"));
    }
    if text == "true" {
        return Ok(RectConstraint::top());
    }
    let mut atoms = Vec::new();
    for atom in text.split('&') {
        let pos = atom
            .find(['<', '>', '='])
            .ok_or_else(|| line.err(atom, format!("malformed atom `{atom}`")))?;
        let (lhs, rest) = atom.split_at(pos);
        let (rel, rhs) = if let Some(r) = rest.strip_prefix("<=") {
            (Relation::Le, r)
        } else if let Some(r) = rest.strip_prefix(">=") {
            (Relation::Ge, r)
        } else if let Some(r) = rest.strip_prefix("==") {
            (Relation::Eq, r)
        } else if let Some(r) = rest.strip_prefix('<') {
            (Relation::Lt, r)
        } else if let Some(r) = rest.strip_prefix('>') {
            (Relation::Gt, r)
        } else if let Some(r) = rest.strip_prefix('=') {
            (Relation::Eq, r)
        } else {
            return Err(line.err(atom, format!("malformed atom `{atom}`")));
        };
        let var = parse_var(line, vars, lhs)?;
        let bound: i64 = rhs
            .parse()
            .map_err(|_| line.err(rhs, format!("malformed constant `{rhs}` (natural number expected)")))?;
        if bound < 0 {
            return Err(line.err(rhs, format!("negative constant {bound}")));
        }
        atoms.push(AtomicConstraint::new(var, rel, bound));
    }
    Ok(RectConstraint::new(atoms))
}

fn parse_rates(line: &Line, vars: &[String], text: &str, default: u32) -> Result<RateVector, SourceDiagnostic> {
    let mut r = RateVector::uniform(vars.len(), default);
    if text.is_empty() {
        return Ok(r);
    }
    for part in text.split(',') {
        let (v, k) = part
            .split_once(':')
            .ok_or_else(|| line.err(part, format!("malformed rate `{part}`")))?;
        let x = parse_var(line, vars, v)?;
        r.0[x.0] = k
            .parse()
            .map_err(|_| line.err(part, format!("malformed rate value `{k}`")))?;
    }
    Ok(r)
}

fn parse_var_set(line: &Line, vars: &[String], text: &str) -> Result<BTreeSet<VarId>, SourceDiagnostic> {
    if text == "*" {
        return Ok((0..vars.len()).map(VarId).collect());
    }
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| line.err(text, format!("expected `{{...}}` or `*`, found `{text}`")))?;
    inner
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|v| parse_var(line, vars, v))
        .collect()
}

struct NodeAttrs {
    rates: RateVector,
    inv: RectConstraint,
}

fn parse_attrs(line: &Line, vars: &[String], secs: &[(&str, String)], default: u32) -> Result<NodeAttrs, SourceDiagnostic> {
    let mut rates = RateVector::uniform(vars.len(), default);
    let mut inv = RectConstraint::top();
    for (k, v) in secs {
        match *k {
            "rate" => rates = parse_rates(line, vars, v, default)?,
            "inv" => inv = parse_expr(line, vars, v)?,
            other => return Err(line.err(other, format!("unexpected `{other}`"))),
        }
    }
    Ok(NodeAttrs { rates, inv })
}

/// Parses a model; reports the first error with its position.
pub fn parse_model(text: &str) -> Result<RhaModel, SourceDiagnostic> {
    let lines: Vec<Line> = text
        .lines()
        .enumerate()
        .map(|(i, l)| Line {
            no: i + 1,
            text: l.split('#').next().unwrap_or(""),
        })
        .filter(|l| !l.text.trim().is_empty())
        .collect();

    let mut model = RhaModel::new("", &[], ModelKind::General);
    let mut saw_model = false;

    // Pass 0: header and component names.
    let mut comp_of_line: Vec<Option<usize>> = Vec::with_capacity(lines.len());
    let mut current: Option<usize> = None;
    for line in &lines {
        let w = line.words();
        match w[0] {
            "model" => {
                if w.len() != 2 {
                    return Err(line.err("model", "expected `model NAME`"));
                }
                if saw_model {
                    return Err(line.err("model", "duplicate `model` line"));
                }
                saw_model = true;
                model.name = w[1].to_string();
            }
            "vars" => {
                if !model.vars.is_empty() {
                    return Err(line.err("vars", "duplicate `vars` line"));
                }
                for v in &w[1..] {
                    check_name(line, v, "variable")?;
                    if model.vars.iter().any(|x| x == v) {
                        return Err(line.err(v, format!("duplicate variable `{v}`")));
                    }
                    model.vars.push(v.to_string());
                }
            }
            "kind" => {
                model.kind = match w.get(1).copied() {
                    Some("clock") => ModelKind::Clock,
                    Some("stopwatch") => ModelKind::Stopwatch,
                    Some("general") => ModelKind::General,
                    _ => return Err(line.err("kind", "expected `kind clock|stopwatch|general`")),
                }
            }
            "cmax" => {
                let n: i64 = w
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .filter(|n| *n >= 0)
                    .ok_or_else(|| line.err("cmax", "expected `cmax N` with N a natural number"))?;
                model.cmax_override = Some(n);
            }
            "component" => {
                if w.len() != 2 {
                    return Err(line.err("component", "expected `component NAME`"));
                }
                check_name(line, w[1], "component")?;
                if model.component_index(w[1]).is_some() {
                    return Err(line.err(w[1], format!("duplicate component `{}`", w[1])));
                }
                current = Some(model.add_component(w[1]));
            }
            "entry" | "exit" | "node" | "box" | "port" | "edge" => {
                if current.is_none() {
                    return Err(line.err(w[0], format!("`{}` outside a component", w[0])));
                }
            }
            "init" => {}
            other => return Err(line.err(other, format!("unknown directive `{other}`"))),
        }
        comp_of_line.push(current);
    }
    if !saw_model {
        return Err(SourceDiagnostic {
            line: 1,
            column: 1,
            message: "missing `model` line".into(),
        });
    }
    let vars = model.vars.clone();
    let default = model.default_rate();

    let mut names: HashMap<String, &str> = HashMap::new();
    let mut claim = |line: &Line, name: &str, what: &'static str| -> Result<(), SourceDiagnostic> {
        check_name(line, name, what)?;
        if let Some(prev) = names.insert(name.to_string(), what) {
            return Err(line.err(name, format!("duplicate id `{name}` (already a {prev})")));
        }
        Ok(())
    };

    // Pass 1: explicit nodes.
    for (line, comp) in lines.iter().zip(&comp_of_line) {
        let w = line.words();
        if w[0] != "node" {
            continue;
        }
        let comp = comp.expect("checked in pass 0");
        let (head, secs) = sections(&w[1..], &["rate", "inv"]);
        if head.len() != 1 {
            return Err(line.err("node", "expected `node NAME [rate ...] [inv ...]`"));
        }
        claim(line, head[0], "node")?;
        let a = parse_attrs(line, &vars, &secs, default)?;
        model.add_node(comp, head[0], a.rates, a.inv);
    }
    // Pass 2: entries and exits (creating nodes on demand), then boxes.
    for (line, comp) in lines.iter().zip(&comp_of_line) {
        let w = line.words();
        if w[0] != "entry" && w[0] != "exit" {
            continue;
        }
        let comp = comp.expect("checked in pass 0");
        let (head, secs) = sections(&w[1..], &["rate", "inv"]);
        if head.len() != 1 {
            return Err(line.err(w[0], format!("expected `{} NAME`", w[0])));
        }
        let id = match model.node_by_name(head[0]) {
            Some(id) => {
                if model.node(id).component != comp {
                    return Err(line.err(head[0], format!("node `{}` belongs to another component", head[0])));
                }
                if !secs.is_empty() {
                    return Err(line.err(head[0], "attributes belong on the `node` line"));
                }
                id
            }
            None => {
                claim(line, head[0], "node")?;
                let a = parse_attrs(line, &vars, &secs, default)?;
                model.add_node(comp, head[0], a.rates, a.inv)
            }
        };
        let c = &mut model.components[comp];
        if c.entries.contains(&id) || c.exits.contains(&id) {
            return Err(line.err(head[0], format!("node `{}` declared twice as a port node", head[0])));
        }
        if w[0] == "entry" {
            c.entries.push(id);
        } else {
            c.exits.push(id);
        }
    }
    for (line, comp) in lines.iter().zip(&comp_of_line) {
        let w = line.words();
        if w[0] != "box" {
            continue;
        }
        let comp = comp.expect("checked in pass 0");
        let rest: String = w[1..].concat();
        let (name, rest) = rest
            .split_once(':')
            .ok_or_else(|| line.err("box", "expected `box NAME : COMPONENT [byvalue SET]`"))?;
        let (callee, set) = match rest.split_once("byvalue") {
            Some((c, s)) => (c, s),
            None => (rest, "{}"),
        };
        claim(line, name, "box")?;
        let callee_idx = model
            .component_index(callee)
            .ok_or_else(|| line.err(callee, format!("unknown component `{callee}`")))?;
        let by_value = parse_var_set(line, &vars, set)?;
        model.add_box(comp, name, callee_idx, by_value);
    }

    // Pass 3: ports, edges, init.
    for (line, comp) in lines.iter().zip(&comp_of_line) {
        let w = line.words();
        match w[0] {
            "port" => {
                let comp = comp.expect("checked in pass 0");
                let (head, secs) = sections(&w[1..], &["rate", "inv"]);
                if head.len() != 1 {
                    return Err(line.err("port", "expected `port BOX.NODE [rate ...] [inv ...]`"));
                }
                let loc = resolve_ref(line, &model, comp, head[0])?;
                if matches!(loc, Location::Node(_)) {
                    return Err(line.err(head[0], "`port` expects a box port `b.en` or `b.ex`"));
                }
                let a = parse_attrs(line, &vars, &secs, default)?;
                if model.components[comp].ports.contains_key(&loc) {
                    return Err(line.err(head[0], "duplicate port declaration"));
                }
                model.set_port(loc, a.rates, a.inv);
            }
            "edge" => {
                let comp = comp.expect("checked in pass 0");
                let (head, secs) = sections(&w[1..], &["guard", "reset", "action"]);
                let joined = head.concat();
                let (src, dst) = joined
                    .split_once("->")
                    .ok_or_else(|| line.err("edge", "expected `edge SRC -> DST ...`"))?;
                let src = resolve_ref(line, &model, comp, src)?;
                let dst = resolve_ref(line, &model, comp, dst)?;
                let mut guard = RectConstraint::top();
                let mut reset = BTreeSet::new();
                let mut action = None;
                for (k, v) in &secs {
                    match *k {
                        "guard" => guard = parse_expr(line, &vars, v)?,
                        "reset" => reset = parse_var_set(line, &vars, v)?,
                        "action" => {
                            if !is_ident(v) {
                                return Err(line.err(v, format!("invalid action label `{v}`")));
                            }
                            if v == CALL_LABEL || v == RETURN_LABEL {
                                return Err(line.err(v, format!("`{v}` is reserved for implicit steps")));
                            }
                            action = Some(v.as_str());
                        }
                        _ => unreachable!(),
                    }
                }
                model.add_edge(src, dst, guard, reset, action);
            }
            "init" => {
                if model.init.is_some() {
                    return Err(line.err("init", "duplicate `init` line"));
                }
                let target = w.get(1).ok_or_else(|| line.err("init", "expected `init C.node ...`"))?;
                let (c, n) = target
                    .split_once('.')
                    .ok_or_else(|| line.err(target, "expected `C.node`"))?;
                let ci = model
                    .component_index(c)
                    .ok_or_else(|| line.err(c, format!("unknown component `{c}`")))?;
                let node = model
                    .node_by_name(n)
                    .filter(|id| model.node(*id).component == ci)
                    .ok_or_else(|| line.err(n, format!("unknown node `{n}` in `{c}`")))?;
                let mut val = Valuation::zero(vars.len());
                for a in &w[2..] {
                    let (v, q) = a
                        .split_once('=')
                        .ok_or_else(|| line.err(a, format!("expected `var=value`, found `{a}`")))?;
                    let x = parse_var(line, &vars, v)?;
                    let q: Rational = q.parse().map_err(|_| line.err(a, format!("malformed rational `{q}`")))?;
                    val.set(x, q);
                }
                model.init = Some(InitDecl {
                    component: ci,
                    node,
                    valuation: val,
                });
            }
            _ => {}
        }
    }
    model.canonicalize();
    Ok(model)
}

fn resolve_ref(line: &Line, model: &RhaModel, comp: usize, text: &str) -> Result<Location, SourceDiagnostic> {
    if let Some((b, n)) = text.split_once('.') {
        let bid = model
            .box_by_name(b)
            .filter(|id| model.box_decl(*id).owner == comp)
            .ok_or_else(|| line.err(b, format!("unknown box `{b}` in this component")))?;
        let nid = model
            .node_by_name(n)
            .ok_or_else(|| line.err(n, format!("unknown node `{n}`")))?;
        let callee = &model.components[model.box_decl(bid).callee];
        if callee.entries.contains(&nid) {
            Ok(Location::Call(bid, nid))
        } else if callee.exits.contains(&nid) {
            Ok(Location::Return(bid, nid))
        } else {
            Err(line.err(n, format!("`{n}` is neither an entry nor an exit of `{}`", callee.name)))
        }
    } else {
        model
            .node_by_name(text)
            .filter(|id| model.node(*id).component == comp)
            .map(Location::Node)
            .ok_or_else(|| line.err(text, format!("unknown node `{text}` in this component")))
    }
}

fn fmt_constraint(model: &RhaModel, c: &RectConstraint) -> String {
    c.atoms
        .iter()
        .map(|a| format!("{}{}{}", model.var_name(a.var), a.rel.symbol(), a.bound))
        .collect::<Vec<_>>()
        .join(" & ")
}

fn fmt_rates(model: &RhaModel, r: &RateVector) -> String {
    model
        .vars
        .iter()
        .zip(&r.0)
        .map(|(v, k)| format!("{v}:{k}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_attrs(model: &RhaModel, r: &RateVector, inv: &RectConstraint) -> String {
    let mut s = String::new();
    if model.nvars() > 0 {
        write!(s, " rate {}", fmt_rates(model, r)).unwrap();
    }
    if !inv.is_top() {
        write!(s, " inv {}", fmt_constraint(model, inv)).unwrap();
    }
    s
}

fn fmt_set(model: &RhaModel, set: &BTreeSet<VarId>) -> String {
    let names: Vec<&str> = set.iter().map(|x| model.var_name(*x)).collect();
    format!("{{{}}}", names.join(","))
}

/// Canonical text; `parse_model` of the output equals the (canonicalized) input.
pub fn serialize_model(model: &RhaModel) -> String {
    let mut m = model.clone();
    m.canonicalize();
    let model = &m;
    let mut out = String::new();
    writeln!(out, "model {}", model.name).unwrap();
    if model.nvars() > 0 {
        writeln!(out, "vars {}", model.vars.join(" ")).unwrap();
    }
    writeln!(out, "kind {}", model.kind.keyword()).unwrap();
    if let Some(c) = model.cmax_override {
        writeln!(out, "cmax {c}").unwrap();
    }
    for c in &model.components {
        writeln!(out, "\ncomponent {}", c.name).unwrap();
        for n in &c.nodes {
            let node = model.node(*n);
            writeln!(out, "node {}{}", node.name, fmt_attrs(model, &node.rates, &node.inv)).unwrap();
        }
        for n in &c.entries {
            writeln!(out, "entry {}", model.node(*n).name).unwrap();
        }
        for n in &c.exits {
            writeln!(out, "exit {}", model.node(*n).name).unwrap();
        }
        for b in &c.boxes {
            let bd = model.box_decl(*b);
            let set = if bd.by_value.is_empty() {
                "{}".to_string()
            } else if bd.by_value.len() == model.nvars() {
                "*".to_string()
            } else {
                fmt_set(model, &bd.by_value)
            };
            writeln!(out, "box {} : {} byvalue {}", bd.name, model.components[bd.callee].name, set).unwrap();
        }
        for (loc, p) in &c.ports {
            writeln!(out, "port {}{}", model.loc_name(*loc), fmt_attrs(model, &p.rates, &p.inv)).unwrap();
        }
        for e in &c.edges {
            let e = model.edge(*e);
            write!(out, "edge {} -> {}", model.loc_name(e.src), model.loc_name(e.dst)).unwrap();
            if !e.guard.is_top() {
                write!(out, " guard {}", fmt_constraint(model, &e.guard)).unwrap();
            }
            if !e.reset.is_empty() {
                write!(out, " reset {}", fmt_set(model, &e.reset)).unwrap();
            }
            if let Some(a) = &e.action {
                write!(out, " action {a}").unwrap();
            }
            out.push('\n');
        }
    }
    if let Some(init) = &model.init {
        write!(
            out,
            "\ninit {}.{}",
            model.components[init.component].name,
            model.node(init.node).name
        )
        .unwrap();
        for (v, q) in model.vars.iter().zip(init.valuation.iter()) {
            write!(out, " {v}={q}").unwrap();
        }
        out.push('\n');
    }
    out
}

impl RhaModel {
    /// Renumbers nodes, boxes and edges component by component, keeping the
    /// relative order inside each component.
    pub fn canonicalize(&mut self) {
        let mut node_map = vec![NodeId(0); self.nodes.len()];
        let mut box_map = vec![crate::model::BoxId(0); self.boxes.len()];
        let mut new_nodes = Vec::with_capacity(self.nodes.len());
        let mut new_boxes = Vec::with_capacity(self.boxes.len());
        let mut new_edges = Vec::with_capacity(self.edges.len());
        for c in &self.components {
            for n in &c.nodes {
                node_map[n.0] = NodeId(new_nodes.len());
                new_nodes.push(self.nodes[n.0].clone());
            }
            for b in &c.boxes {
                box_map[b.0] = crate::model::BoxId(new_boxes.len());
                new_boxes.push(self.boxes[b.0].clone());
            }
        }
        let remap = |l: Location| match l {
            Location::Node(n) => Location::Node(node_map[n.0]),
            Location::Call(b, n) => Location::Call(box_map[b.0], node_map[n.0]),
            Location::Return(b, n) => Location::Return(box_map[b.0], node_map[n.0]),
        };
        for c in &mut self.components {
            let mut ids = Vec::new();
            for e in &c.edges {
                let mut edge = self.edges[e.0].clone();
                edge.src = remap(edge.src);
                edge.dst = remap(edge.dst);
                ids.push(crate::model::EdgeId(new_edges.len()));
                new_edges.push(edge);
            }
            c.edges = ids;
            c.nodes = c.nodes.iter().map(|n| node_map[n.0]).collect();
            c.entries = c.entries.iter().map(|n| node_map[n.0]).collect();
            c.exits = c.exits.iter().map(|n| node_map[n.0]).collect();
            c.boxes = c.boxes.iter().map(|b| box_map[b.0]).collect();
            c.ports = std::mem::take(&mut c.ports)
                .into_iter()
                .map(|(l, p)| (remap(l), p))
                .collect();
        }
        if let Some(init) = &mut self.init {
            init.node = node_map[init.node.0];
        }
        self.nodes = new_nodes;
        self.boxes = new_boxes;
        self.edges = new_edges;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    const MINIMAL: &str = "model m\nvars x\nkind clock\ncomponent A\nentry en\nexit ex\nedge en -> ex guard x=1\ninit A.en x=0\n";

    #[test]
    fn minimal_model() {
        let m = parse_model(MINIMAL).unwrap();
        assert_eq!(m.components.len(), 1);
        assert_eq!(m.nodes.len(), 2);
        assert_eq!(m.edges.len(), 1);
        assert!(validate_model(&m).is_ok());
    }

    #[test]
    fn round_trip_minimal() {
        let m = parse_model(MINIMAL).unwrap();
        let again = parse_model(&serialize_model(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn edge_from_call_port_parses_but_fails_validation() {
        let text = "model m\nvars x\ncomponent A\nentry en\nexit ex\nbox b : B\nedge en -> b.i\nedge b.i -> ex\n\
                    component B\nentry i\nexit o\nedge i -> o\n";
        let m = parse_model(text).unwrap();
        let v = validate_model(&m);
        assert!(v.diagnostics.iter().any(|d| d.contains("outgoing from call port")), "{v:?}");
    }

    #[test]
    fn reports_position() {
        let text = "model m\nvars x\ncomponent A\nentry en\nedge en -> nowhere\n";
        let e = parse_model(text).unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.message.contains("nowhere"));
        assert_eq!(e.column, 12);
    }

    #[test]
    fn rejects_negative_constant() {
        let text = "model m\nvars x\ncomponent A\nentry en\nexit ex\nedge en -> ex guard x>=-1\n";
        assert!(parse_model(text).is_err());
    }

    #[test]
    fn cmax_override_preserved() {
        let text = "model m\nvars x\ncmax 5\ncomponent A\nentry en\nexit ex\nedge en -> ex guard x=1\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.cmax(), 5);
        assert!(serialize_model(&m).contains("cmax 5"));
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn empty_variable_model_has_no_vars_or_rates() {
        let text = "model r\ncomponent A\nentry en\nexit ex\nedge en -> ex\n";
        let m = parse_model(text).unwrap();
        let s = serialize_model(&m);
        assert!(!s.contains("vars"));
        assert!(!s.contains("rate"));
    }

    #[test]
    fn by_value_forms() {
        let text = "model m\nvars x y\ncomponent A\nentry en\nexit ex\nbox b1 : A byvalue *\nbox b2 : A byvalue {}\n\
                    box b3 : A byvalue {y}\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.boxes[0].by_value.len(), 2);
        assert!(m.boxes[1].by_value.is_empty());
        assert_eq!(m.boxes[2].by_value.iter().copied().collect::<Vec<_>>(), vec![VarId(1)]);
    }
}
