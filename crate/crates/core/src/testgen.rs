//! Random models and runs for randomized checks.
//!
//! Randomness comes from the caller as `pick(n)`, a uniform draw from `0..n`,
//! so any seeded generator can drive it.

use std::collections::BTreeSet;

use crate::model::{
    AtomicConstraint, InitDecl, Location, ModelKind, NodeId, RateVector, RectConstraint, Relation, RhaModel,
    Valuation, VarId,
};
use crate::rational::Rational;
use crate::semantics::{edge_delay_interval, forced_step, is_terminal, step, Configuration, Run, Step, StepKind};

pub type Pick<'a> = &'a mut dyn FnMut(usize) -> usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenParams {
    pub nvars: usize,
    pub components: usize,
    /// Nodes per component, entry and exit included (at least 2).
    pub nodes: usize,
    /// Extra random edges per component on top of the entry-to-exit chain.
    pub extra_edges: usize,
    /// Pass-by-value sets are drawn at random when set; otherwise all boxes
    /// pass by reference.
    pub by_value: bool,
    pub cmax: i64,
    pub kind: ModelKind,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            nvars: 2,
            components: 2,
            nodes: 3,
            extra_edges: 3,
            by_value: false,
            cmax: 2,
            kind: ModelKind::Stopwatch,
        }
    }
}

fn coin(pick: Pick, num: usize, den: usize) -> bool {
    pick(den) < num
}

fn random_guard(pick: Pick, vars: &[VarId], cmax: i64) -> RectConstraint {
    let rels = [Relation::Lt, Relation::Le, Relation::Eq, Relation::Ge, Relation::Gt];
    let mut atoms = Vec::new();
    for &v in vars {
        if coin(pick, 1, 3) {
            let rel = rels[pick(rels.len())];
            let k = pick(cmax as usize + 1) as i64;
            atoms.push(AtomicConstraint::new(v, rel, k));
        }
    }
    RectConstraint::new(atoms)
}

fn random_subset(pick: Pick, vars: &[VarId], num: usize, den: usize) -> BTreeSet<VarId> {
    vars.iter().copied().filter(|_| coin(pick, num, den)).collect()
}

/// A valid model with `Main` = component 0 and initial location its entry
/// with all variables 0. Boxes may call any component, including their owner.
pub fn random_model(pick: Pick, p: &GenParams) -> RhaModel {
    let names: Vec<String> = (0..p.nvars).map(|i| ["x", "y", "z", "w"][i % 4].to_string()).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut m = RhaModel::new("random", &name_refs, p.kind);
    let vars: Vec<VarId> = (0..p.nvars).map(VarId).collect();
    let nodes = p.nodes.max(2);
    for c in 0..p.components {
        m.add_component(&format!("C{c}"));
    }
    let mut ids: Vec<Vec<NodeId>> = Vec::new();
    for c in 0..p.components {
        let mut ns = Vec::new();
        for j in 0..nodes {
            let rates = match p.kind {
                ModelKind::Clock => RateVector::uniform(p.nvars, 1),
                _ => RateVector(vars.iter().map(|_| pick(2) as u32).collect()),
            };
            ns.push(m.add_node(c, &format!("c{c}n{j}"), rates, RectConstraint::top()));
        }
        m.components[c].entries.push(ns[0]);
        m.components[c].exits.push(ns[nodes - 1]);
        ids.push(ns);
    }
    for c in 0..p.components {
        let callee = pick(p.components);
        let by_value = if p.by_value {
            random_subset(pick, &vars, 1, 2)
        } else {
            BTreeSet::new()
        };
        let b = m.add_box(c, &format!("c{c}b"), callee, by_value);
        let en = m.components[callee].entries[0];
        let ex = m.components[callee].exits[0];
        let ns = ids[c].clone();
        // Chain n0 -> n1 -> ... -> exit, with one hop optionally through the box.
        let through_box = nodes >= 3 && coin(pick, 1, 2);
        for j in 0..nodes - 1 {
            let (src, dst) = (Location::Node(ns[j]), Location::Node(ns[j + 1]));
            let guard = random_guard(pick, &vars, p.cmax);
            let reset = random_subset(pick, &vars, 1, 3);
            if through_box && j == 0 {
                m.add_edge(src, Location::Call(b, en), guard, reset, None);
                let g2 = random_guard(pick, &vars, p.cmax);
                m.add_edge(Location::Return(b, ex), dst, g2, BTreeSet::new(), None);
            } else {
                m.add_edge(src, dst, guard, reset, None);
            }
        }
        // Sources: every non-exit node plus the return port; targets: any node or the call port.
        let mut srcs: Vec<Location> = ns[..nodes - 1].iter().map(|n| Location::Node(*n)).collect();
        srcs.push(Location::Return(b, ex));
        let mut dsts: Vec<Location> = ns.iter().map(|n| Location::Node(*n)).collect();
        dsts.push(Location::Call(b, en));
        for _ in 0..p.extra_edges {
            let src = srcs[pick(srcs.len())];
            let dst = dsts[pick(dsts.len())];
            let guard = random_guard(pick, &vars, p.cmax);
            let reset = random_subset(pick, &vars, 1, 3);
            m.add_edge(src, dst, guard, reset, None);
        }
    }
    m.init = Some(InitDecl {
        component: 0,
        node: ids[0][0],
        valuation: Valuation::zero(p.nvars),
    });
    m
}

/// Candidate delays inside `[lo, hi]`: closed endpoints, the midpoint, and
/// points past an unbounded lower end.
fn candidate_delays(model: &RhaModel, cfg: &Configuration, e: crate::model::EdgeId) -> Vec<Rational> {
    let iv = edge_delay_interval(model, cfg, e);
    if iv.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    if !iv.lo.strict {
        out.push(iv.lo.value.clone());
    }
    match &iv.hi {
        Some(h) => {
            out.push((&iv.lo.value + &h.value) / Rational::from_int(2));
            if !h.strict {
                out.push(h.value.clone());
            }
        }
        None => {
            out.push(&iv.lo.value + Rational::new(1, 2));
            out.push(&iv.lo.value + Rational::one());
        }
    }
    out.retain(|t| iv.contains(t));
    out.dedup();
    out
}

/// A random run of at most `max_len` steps, contexts of length at most
/// `max_context`, and total duration at most `time_cap` when given.
pub fn random_run(
    model: &RhaModel,
    init: Configuration,
    pick: Pick,
    max_len: usize,
    max_context: usize,
    time_cap: Option<&Rational>,
) -> Run {
    let mut run = Run::new(init);
    let mut elapsed = Rational::zero();
    while run.len() < max_len {
        let cur = run.last().clone();
        if is_terminal(model, &cur) {
            break;
        }
        let (delay, kind) = match forced_step(model, &cur) {
            Some(k) => (Rational::zero(), k),
            None => {
                let mut options = Vec::new();
                for e in model.outgoing(cur.loc) {
                    let dst = model.edge(e).dst;
                    if matches!(dst, Location::Call(..)) && cur.context.len() >= max_context {
                        continue;
                    }
                    for t in candidate_delays(model, &cur, e) {
                        if time_cap.map(|cap| &elapsed + &t <= *cap).unwrap_or(true) {
                            options.push((t, e));
                        }
                    }
                }
                if options.is_empty() {
                    break;
                }
                let (t, e) = options.swap_remove(pick(options.len()));
                (t, StepKind::Edge(e))
            }
        };
        let Ok(to) = step(model, &cur, &delay, kind) else { break };
        elapsed += &delay;
        run.steps.push(Step { delay, kind, to });
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;
    use crate::semantics::{initial_configuration, validate_run};

    /// Small deterministic generator for the unit test.
    fn lcg(seed: u64) -> impl FnMut(usize) -> usize {
        let mut s = seed;
        move |n| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as usize) % n.max(1)
        }
    }

    #[test]
    fn generated_models_validate_and_runs_replay() {
        let mut pick = lcg(7);
        for _ in 0..20 {
            let m = random_model(&mut pick, &GenParams::default());
            assert!(validate_model(&m).is_ok());
            let run = random_run(&m, initial_configuration(&m), &mut pick, 30, 3, None);
            validate_run(&m, &run).unwrap();
            assert!(run.steps.iter().all(|s| s.to.context.len() <= 3));
        }
    }
}
