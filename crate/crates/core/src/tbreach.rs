//! Time-bounded reachability for bounded-context pass-by-reference models:
//! skeleton enumeration plus exact linear feasibility.

use num_bigint::BigUint;
use rayon::prelude::*;
use thiserror::Error;

use crate::contraction::bound_c;
use crate::feasibility::{solve_with_hint, Affine, Cmp, LinearSystem};
use crate::model::{AtomicConstraint, BoxId, Location, RectConstraint, Relation, RhaModel, Valuation};
use crate::rational::Rational;
use crate::semantics::{step, validate_run, Configuration, Frame, Run, Step, StepKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TbError {
    #[error("model has pass-by-value box `{0}`; only pass-by-reference models are supported")]
    ByValue(String),
    #[error("context bound must be at least 1")]
    ZeroContext,
    #[error("negative time bound {0}")]
    NegativeBound(Rational),
    #[error("witness failed replay: {0}")]
    Replay(String),
}

/// A discrete configuration: context as a box sequence plus a location.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SkelState {
    pub context: Vec<BoxId>,
    pub loc: Location,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub init: SkelState,
    pub steps: Vec<(StepKind, SkelState)>,
}

impl Skeleton {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> &SkelState {
        self.steps.last().map(|s| &s.1).unwrap_or(&self.init)
    }

    pub fn state(&self, i: usize) -> &SkelState {
        if i == 0 {
            &self.init
        } else {
            &self.steps[i - 1].1
        }
    }

    /// The discrete shadow of a concrete run.
    pub fn of_run(run: &Run) -> Self {
        let st = |c: &Configuration| SkelState {
            context: c.boxes(),
            loc: c.loc,
        };
        Skeleton {
            init: st(&run.init),
            steps: run.steps.iter().map(|s| (s.kind, st(&s.to))).collect(),
        }
    }
}

/// Discrete successors in a fixed order: forced call/return, else edges by id.
pub fn skeleton_successors(model: &RhaModel, s: &SkelState, k: usize) -> Vec<(StepKind, SkelState)> {
    match s.loc {
        Location::Call(b, en) => {
            if s.context.len() >= k {
                return Vec::new();
            }
            let mut context = s.context.clone();
            context.push(b);
            vec![(StepKind::Call, SkelState { context, loc: Location::Node(en) })]
        }
        Location::Node(ex) if model.is_exit(ex) => {
            let mut context = s.context.clone();
            match context.pop() {
                Some(b) if model.box_decl(b).callee == model.node(ex).component => vec![(
                    StepKind::Return,
                    SkelState {
                        context,
                        loc: Location::Return(b, ex),
                    },
                )],
                _ => Vec::new(),
            }
        }
        loc => {
            let mut out: Vec<_> = model
                .outgoing(loc)
                .into_iter()
                .map(|e| {
                    (
                        StepKind::Edge(e),
                        SkelState {
                            context: s.context.clone(),
                            loc: model.edge(e).dst,
                        },
                    )
                })
                .collect();
            out.sort_by_key(|(k, _)| *k);
            out
        }
    }
}

fn check_by_reference(model: &RhaModel) -> Result<(), TbError> {
    match model.boxes.iter().find(|b| !b.by_value.is_empty()) {
        Some(b) => Err(TbError::ByValue(b.name.clone())),
        None => Ok(()),
    }
}

/// All structurally valid skeletons of length 1..=max_len from `init`, in
/// length-lexicographic order; with a target, only those ending there.
pub fn enumerate_skeletons(
    model: &RhaModel,
    init: &SkelState,
    target: Option<Location>,
    k: usize,
    max_len: usize,
) -> Result<Vec<Skeleton>, TbError> {
    check_by_reference(model)?;
    if k == 0 {
        return Err(TbError::ZeroContext);
    }
    let mut out = Vec::new();
    let mut level = vec![Skeleton {
        init: init.clone(),
        steps: Vec::new(),
    }];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for sk in &level {
            for succ in skeleton_successors(model, sk.last(), k) {
                let mut s = sk.clone();
                s.steps.push(succ);
                next.push(s);
            }
        }
        out.extend(next.iter().filter(|s| target.map(|t| s.last().loc == t).unwrap_or(true)).cloned());
        level = next;
    }
    Ok(out)
}

fn atom_constraint(sys: &mut LinearSystem, e: &Affine, a: &AtomicConstraint) {
    let k = Affine::constant(Rational::from_int(a.bound));
    match a.rel {
        Relation::Lt => sys.add(e, Cmp::Lt, &k),
        Relation::Le => sys.add(e, Cmp::Le, &k),
        Relation::Eq => sys.add(e, Cmp::Eq, &k),
        Relation::Ge => sys.add(&k, Cmp::Le, e),
        Relation::Gt => sys.add(&k, Cmp::Lt, e),
    }
}

fn rect_constraint(sys: &mut LinearSystem, val: &[Affine], c: &RectConstraint) {
    for a in &c.atoms {
        atom_constraint(sys, &val[a.var.0], a);
    }
}

/// Constraint on the total duration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeBound {
    AtMost(Rational),
    Exactly(Rational),
}

/// The system of a skeleton: one delay variable per edge step; valuations
/// are affine terms in the delays. Returns the system and, per step, the
/// index of its delay variable.
pub fn skeleton_system(model: &RhaModel, skel: &Skeleton, bound: &TimeBound, init_val: &Valuation) -> (LinearSystem, Vec<Option<usize>>) {
    let mut sys = LinearSystem::new();
    let mut val: Vec<Affine> = init_val.iter().map(|q| Affine::constant(q.clone())).collect();
    rect_constraint(&mut sys, &val, &model.inv(skel.init.loc));
    // Saved valuations of the pending calls, for by-value restoration.
    let mut saved: Vec<Vec<Affine>> = skel.init.context.iter().map(|_| val.clone()).collect();
    let mut delay_vars = Vec::with_capacity(skel.len());
    let mut total = Affine::default();
    for (i, (kind, to)) in skel.steps.iter().enumerate() {
        let from = skel.state(i).loc;
        match kind {
            StepKind::Call => {
                saved.push(val.clone());
                delay_vars.push(None);
            }
            StepKind::Return => {
                let frame = saved.pop();
                if let (Some(f), Location::Return(b, _)) = (frame, to.loc) {
                    for x in &model.box_decl(b).by_value {
                        val[x.0] = f[x.0].clone();
                    }
                }
                delay_vars.push(None);
            }
            StepKind::Edge(e) => {
                let t = sys.add_var(&format!("t{}", i + 1));
                delay_vars.push(Some(t));
                sys.add(&Affine::constant(Rational::zero()), Cmp::Le, &Affine::var(t));
                total.add_term(t, Rational::one());
                let rates = model.rates(from);
                let inv = model.inv(from);
                rect_constraint(&mut sys, &val, &inv);
                for (x, v) in val.iter_mut().enumerate() {
                    let r = rates.0[x];
                    if r != 0 {
                        v.add_term(t, Rational::from_int(r as i64));
                    }
                }
                rect_constraint(&mut sys, &val, &inv);
                let edge = model.edge(*e);
                rect_constraint(&mut sys, &val, &edge.guard);
                for x in &edge.reset {
                    val[x.0] = Affine::constant(Rational::zero());
                }
            }
        }
        rect_constraint(&mut sys, &val, &model.inv(to.loc));
    }
    match bound {
        TimeBound::AtMost(t) => sys.add(&total, Cmp::Le, &Affine::constant(t.clone())),
        TimeBound::Exactly(t) => sys.add(&total, Cmp::Eq, &Affine::constant(t.clone())),
    }
    (sys, delay_vars)
}

/// Replays a skeleton with the given per-step delays.
pub fn replay_skeleton(model: &RhaModel, skel: &Skeleton, init_val: &Valuation, delays: &[Rational]) -> Result<Run, TbError> {
    let init = Configuration {
        context: skel
            .init
            .context
            .iter()
            .map(|b| Frame {
                box_id: *b,
                saved: init_val.clone(),
            })
            .collect(),
        loc: skel.init.loc,
        val: init_val.clone(),
    };
    let mut run = Run::new(init);
    for (i, ((kind, _), d)) in skel.steps.iter().zip(delays).enumerate() {
        let to = step(model, run.last(), d, *kind).map_err(|e| TbError::Replay(format!("step {}: {e}", i + 1)))?;
        run.steps.push(Step {
            delay: d.clone(),
            kind: *kind,
            to,
        });
    }
    Ok(run)
}

/// Feasibility of a skeleton within total time `bound`; on success, a
/// witness run. `hint` holds candidate per-step delays, tried first.
pub fn lp_feasible_with_hint(
    model: &RhaModel,
    skel: &Skeleton,
    bound: &TimeBound,
    init_val: &Valuation,
    hint: Option<&[Rational]>,
) -> Option<Run> {
    let (sys, vars) = skeleton_system(model, skel, bound, init_val);
    let hint_vec: Option<Vec<Rational>> = hint.map(|h| {
        let mut x = vec![Rational::zero(); sys.nvars()];
        for (v, d) in vars.iter().zip(h) {
            if let Some(v) = v {
                x[*v] = d.clone();
            }
        }
        x
    });
    let sol = solve_with_hint(&sys, hint_vec.as_deref())?;
    let delays: Vec<Rational> = vars
        .iter()
        .map(|v| v.map(|i| sol[i].clone()).unwrap_or_else(Rational::zero))
        .collect();
    let run = replay_skeleton(model, skel, init_val, &delays).ok()?;
    debug_assert!(validate_run(model, &run).is_ok());
    Some(run)
}

pub fn lp_feasible(model: &RhaModel, skel: &Skeleton, bound: &Rational, init_val: &Valuation) -> Option<Run> {
    lp_feasible_with_hint(model, skel, &TimeBound::AtMost(bound.clone()), init_val, None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TbQuery {
    pub target: Location,
    pub bound: Rational,
    pub context: usize,
    pub max_len: usize,
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct TbResult {
    pub reachable: bool,
    pub witness: Option<Run>,
    /// Theoretical length bound for the model and query.
    pub bound_c: BigUint,
    /// min(max_len, bound_c).
    pub effective_len: usize,
    /// `false` means an unreachable verdict holds only up to `effective_len`.
    pub complete: bool,
    pub skeletons_checked: usize,
}

/// Decides whether `target` is reachable within time `bound` with contexts
/// of length at most `context`. Prefixes that are already infeasible are
/// pruned; within a length level, the first feasible skeleton in
/// lexicographic order is reported regardless of `jobs`.
pub fn decide_tb_reach(model: &RhaModel, init: &Configuration, q: &TbQuery) -> Result<TbResult, TbError> {
    check_by_reference(model)?;
    if q.context == 0 {
        return Err(TbError::ZeroContext);
    }
    if q.bound.is_negative() {
        return Err(TbError::NegativeBound(q.bound.clone()));
    }
    let t_ceil = q.bound.ceil().max(Rational::zero()).floor_i64().unwrap_or(0) as u64;
    let c = bound_c(
        t_ceil,
        model.rmax() as u64,
        model.nvars() as u64,
        model.boxes.len() as u64,
        q.context as u64,
        model.nodes.len() as u64,
        model.cmax() as u64,
    );
    let effective_len = if BigUint::from(q.max_len) < c {
        q.max_len
    } else {
        usize::try_from(&c).unwrap_or(q.max_len)
    };
    let complete = BigUint::from(effective_len) >= c;
    let mut result = TbResult {
        reachable: false,
        witness: None,
        bound_c: c,
        effective_len,
        complete,
        skeletons_checked: 0,
    };
    let root = Skeleton {
        init: SkelState {
            context: init.boxes(),
            loc: init.loc,
        },
        steps: Vec::new(),
    };
    if init.loc == q.target && model.inv(init.loc).eval(&init.val) {
        result.reachable = true;
        result.witness = Some(Run::new(init.clone()));
        return Ok(result);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(q.jobs.max(1))
        .build()
        .map_err(|e| TbError::Replay(e.to_string()))?;
    let mut level: Vec<Skeleton> = vec![root];
    for _ in 0..effective_len {
        let mut cands = Vec::new();
        for sk in &level {
            for succ in skeleton_successors(model, sk.last(), q.context) {
                let mut s = sk.clone();
                s.steps.push(succ);
                cands.push(s);
            }
        }
        result.skeletons_checked += cands.len();
        let checked: Vec<Option<Run>> = pool.install(|| {
            cands
                .par_iter()
                .map(|s| lp_feasible(model, s, &q.bound, &init.val))
                .collect()
        });
        let mut next = Vec::new();
        for (s, r) in cands.into_iter().zip(checked) {
            if let Some(run) = r {
                if s.last().loc == q.target {
                    validate_run(model, &run).map_err(|v| TbError::Replay(v.to_string()))?;
                    result.reachable = true;
                    result.witness = Some(run);
                    return Ok(result);
                }
                next.push(s);
            }
        }
        if next.is_empty() {
            result.complete = true;
            break;
        }
        level = next;
    }
    Ok(result)
}
