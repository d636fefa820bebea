//! Operational semantics: configurations, the step relation, run replay and
//! oracle-driven simulation.

use std::fmt;

use thiserror::Error;

use crate::model::{BoxId, EdgeId, Location, RateVector, RectConstraint, Relation, RhaModel, Valuation};
use crate::parser::{CALL_LABEL, RETURN_LABEL};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    pub box_id: BoxId,
    pub saved: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub context: Vec<Frame>,
    pub loc: Location,
    pub val: Valuation,
}

impl Configuration {
    pub fn new(loc: Location, val: Valuation) -> Self {
        Configuration {
            context: Vec::new(),
            loc,
            val,
        }
    }

    pub fn boxes(&self) -> Vec<BoxId> {
        self.context.iter().map(|f| f.box_id).collect()
    }

    pub fn top_box(&self) -> Option<BoxId> {
        self.context.last().map(|f| f.box_id)
    }
}

/// The discrete part of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StepKind {
    Edge(EdgeId),
    Call,
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub delay: Rational,
    pub kind: StepKind,
    pub to: Configuration,
}

impl Step {
    pub fn action<'a>(&self, model: &'a RhaModel) -> &'a str {
        match self.kind {
            StepKind::Edge(e) => model.edge(e).label(),
            StepKind::Call => CALL_LABEL,
            StepKind::Return => RETURN_LABEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub init: Configuration,
    pub steps: Vec<Step>,
}

impl Run {
    pub fn new(init: Configuration) -> Self {
        Run { init, steps: Vec::new() }
    }

    pub fn duration(&self) -> Rational {
        self.steps.iter().map(|s| &s.delay).sum()
    }

    pub fn last(&self) -> &Configuration {
        self.steps.last().map(|s| &s.to).unwrap_or(&self.init)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Configuration `i`, with 0 the initial one.
    pub fn config(&self, i: usize) -> &Configuration {
        if i == 0 {
            &self.init
        } else {
            &self.steps[i - 1].to
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("negative delay {0}")]
    NegativeDelay(Rational),
    #[error("nonzero delay {0} at a call port or exit")]
    DelayAtPort(Rational),
    #[error("invariant of the source location violated during the delay")]
    SourceInvariant,
    #[error("invariant of the target location violated")]
    TargetInvariant,
    #[error("guard unsatisfied")]
    Guard,
    #[error("pop on empty context")]
    EmptyContext,
    #[error("edge does not leave the current location")]
    NotOutgoing,
    #[error("call/entry mismatch: {0}")]
    CallEntryMismatch(String),
    #[error("step kind not allowed at this location")]
    WrongKind,
}

/// The location reached after popping frame `b` at exit `ex`, or after calling.
fn check_target(model: &RhaModel, loc: Location, val: &Valuation) -> Result<(), StepError> {
    if model.inv(loc).eval(val) {
        Ok(())
    } else {
        Err(StepError::TargetInvariant)
    }
}

/// One transition of the LTS. The action is given by `kind`.
pub fn step(model: &RhaModel, config: &Configuration, delay: &Rational, kind: StepKind) -> Result<Configuration, StepError> {
    if delay.is_negative() {
        return Err(StepError::NegativeDelay(delay.clone()));
    }
    match (config.loc, kind) {
        (Location::Call(b, en), StepKind::Call) => {
            if !delay.is_zero() {
                return Err(StepError::DelayAtPort(delay.clone()));
            }
            let mut context = config.context.clone();
            context.push(Frame {
                box_id: b,
                saved: config.val.clone(),
            });
            let loc = Location::Node(en);
            check_target(model, loc, &config.val)?;
            Ok(Configuration {
                context,
                loc,
                val: config.val.clone(),
            })
        }
        (Location::Node(ex), StepKind::Return) if model.is_exit(ex) => {
            if !delay.is_zero() {
                return Err(StepError::DelayAtPort(delay.clone()));
            }
            let mut context = config.context.clone();
            let frame = context.pop().ok_or(StepError::EmptyContext)?;
            let bd = model.box_decl(frame.box_id);
            if bd.callee != model.node(ex).component {
                return Err(StepError::CallEntryMismatch(format!(
                    "frame box `{}` does not call the component of `{}`",
                    bd.name,
                    model.node(ex).name
                )));
            }
            let mut val = config.val.clone();
            for x in &bd.by_value {
                val.set(*x, frame.saved.get(*x).clone());
            }
            let loc = Location::Return(frame.box_id, ex);
            check_target(model, loc, &val)?;
            Ok(Configuration { context, loc, val })
        }
        (Location::Call(..), _) => Err(StepError::WrongKind),
        (Location::Node(n), _) if model.is_exit(n) => Err(StepError::WrongKind),
        (loc, StepKind::Edge(e)) => {
            let edge = model.edge(e);
            if edge.src != loc {
                return Err(StepError::NotOutgoing);
            }
            let rates = model.rates(loc);
            let inv = model.inv(loc);
            let empty = Default::default();
            let after = config.val.evolve_unchecked(&rates, delay, &empty);
            if !inv.eval(&config.val) || !inv.eval(&after) {
                return Err(StepError::SourceInvariant);
            }
            if !edge.guard.eval(&after) {
                return Err(StepError::Guard);
            }
            let val = after.evolve_unchecked(&rates, &Rational::zero(), &edge.reset);
            check_target(model, edge.dst, &val)?;
            Ok(Configuration {
                context: config.context.clone(),
                loc: edge.dst,
                val,
            })
        }
        _ => Err(StepError::WrongKind),
    }
}

/// The discrete step forced at call ports and at exits with a pending frame.
pub fn forced_step(model: &RhaModel, config: &Configuration) -> Option<StepKind> {
    match config.loc {
        Location::Call(..) => Some(StepKind::Call),
        Location::Node(n) if model.is_exit(n) && !config.context.is_empty() => Some(StepKind::Return),
        _ => None,
    }
}

/// Termination configuration: an exit reached with empty context.
pub fn is_terminal(model: &RhaModel, config: &Configuration) -> bool {
    matches!(config.loc, Location::Node(n) if model.is_exit(n)) && config.context.is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {index}: {reason}")]
pub struct RunViolation {
    /// 1-based index of the offending step; 0 refers to the initial configuration.
    pub index: usize,
    pub reason: String,
}

/// Checks that the context is a legal call stack ending in the component of `loc`.
pub fn check_context(model: &RhaModel, config: &Configuration) -> Result<(), String> {
    let mut comp = None;
    for f in &config.context {
        let bd = model
            .boxes
            .get(f.box_id.0)
            .ok_or_else(|| "unknown box in context".to_string())?;
        if let Some(c) = comp {
            if bd.owner != c {
                return Err(format!("call/entry mismatch: box `{}` is not inside the caller", bd.name));
            }
        }
        if f.saved.len() != model.nvars() {
            return Err("malformed frame: saved valuation has wrong arity".into());
        }
        comp = Some(bd.callee);
    }
    if let Some(c) = comp {
        if model.owner_of(config.loc) != c {
            return Err("call/entry mismatch: location is not in the called component".into());
        }
    }
    Ok(())
}

/// Replays every step; reports the first mismatch.
pub fn validate_run(model: &RhaModel, run: &Run) -> Result<(), RunViolation> {
    let v0 = |reason: String| RunViolation { index: 0, reason };
    if run.init.val.len() != model.nvars() {
        return Err(v0("initial valuation has wrong arity".into()));
    }
    check_context(model, &run.init).map_err(v0)?;
    if !model.inv(run.init.loc).eval(&run.init.val) {
        return Err(v0("initial configuration violates its invariant".into()));
    }
    let mut cur = run.init.clone();
    for (i, s) in run.steps.iter().enumerate() {
        let index = i + 1;
        let next = step(model, &cur, &s.delay, s.kind).map_err(|e| RunViolation {
            index,
            reason: e.to_string(),
        })?;
        if next.context.len() != s.to.context.len() || next.boxes() != s.to.boxes() {
            return Err(RunViolation {
                index,
                reason: "call/entry mismatch: context differs from the replayed one".into(),
            });
        }
        if next.context != s.to.context {
            return Err(RunViolation {
                index,
                reason: "frame restore mismatch: saved valuation differs".into(),
            });
        }
        if next.loc != s.to.loc {
            return Err(RunViolation {
                index,
                reason: "location differs from the replayed one".into(),
            });
        }
        if next.val != s.to.val {
            return Err(RunViolation {
                index,
                reason: "valuation differs from the replayed one".into(),
            });
        }
        cur = next;
    }
    Ok(())
}

/// Chooses a delay and an edge in a configuration that is not forced.
pub trait DelayOracle {
    fn choose(&self, model: &RhaModel, config: &Configuration) -> Option<(Rational, EdgeId)>;
}

impl<F> DelayOracle for F
where
    F: Fn(&RhaModel, &Configuration) -> Option<(Rational, EdgeId)>,
{
    fn choose(&self, model: &RhaModel, config: &Configuration) -> Option<(Rational, EdgeId)> {
        self(model, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Target,
    Terminated,
    Deadlock,
    BoundExhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Target => "target reached",
            StopReason::Terminated => "terminated",
            StopReason::Deadlock => "deadlock",
            StopReason::BoundExhausted => "bound exhausted",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub run: Run,
    pub reason: StopReason,
}

#[derive(Debug, Clone, Error)]
#[error("illegal oracle choice at {config:?}: {error}")]
pub struct SimError {
    pub config: Configuration,
    pub error: StepError,
}

/// Runs the LTS from `init`, taking forced steps automatically and asking
/// `oracle` otherwise. Stops when `target` holds, at termination, on deadlock,
/// or after `max_steps` steps.
pub fn simulate_from(
    model: &RhaModel,
    init: Configuration,
    oracle: &dyn DelayOracle,
    max_steps: usize,
    target: &dyn Fn(&Configuration) -> bool,
) -> Result<SimOutcome, SimError> {
    let mut run = Run::new(init);
    loop {
        let cur = run.last().clone();
        if target(&cur) {
            return Ok(SimOutcome {
                run,
                reason: StopReason::Target,
            });
        }
        if is_terminal(model, &cur) {
            return Ok(SimOutcome {
                run,
                reason: StopReason::Terminated,
            });
        }
        if run.steps.len() >= max_steps {
            return Ok(SimOutcome {
                run,
                reason: StopReason::BoundExhausted,
            });
        }
        let (delay, kind) = match forced_step(model, &cur) {
            Some(k) => (Rational::zero(), k),
            None => match oracle.choose(model, &cur) {
                Some((t, e)) => (t, StepKind::Edge(e)),
                None => {
                    return Ok(SimOutcome {
                        run,
                        reason: StopReason::Deadlock,
                    })
                }
            },
        };
        let to = step(model, &cur, &delay, kind).map_err(|error| SimError {
            config: cur.clone(),
            error,
        })?;
        run.steps.push(Step { delay, kind, to });
    }
}

/// Simulation from the model's declared initial configuration.
pub fn simulate(model: &RhaModel, oracle: &dyn DelayOracle, max_steps: usize) -> Result<SimOutcome, SimError> {
    let init = initial_configuration(model);
    simulate_from(model, init, oracle, max_steps, &|_| false)
}

pub fn initial_configuration(model: &RhaModel) -> Configuration {
    let loc = model
        .initial_location()
        .or_else(|| {
            model
                .components
                .first()
                .and_then(|c| c.entries.first())
                .map(|n| Location::Node(*n))
        })
        .expect("model has no initial location");
    Configuration::new(loc, model.initial_valuation())
}

/// One end of a delay interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub value: Rational,
    pub strict: bool,
}

/// The set of delays `t ≥ 0` satisfying some constraints; `hi = None` means unbounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayInterval {
    pub lo: Bound,
    pub hi: Option<Bound>,
}

impl DelayInterval {
    pub fn all() -> Self {
        DelayInterval {
            lo: Bound {
                value: Rational::zero(),
                strict: false,
            },
            hi: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        match &self.hi {
            None => false,
            Some(h) => h.value < self.lo.value || (h.value == self.lo.value && (h.strict || self.lo.strict)),
        }
    }

    pub fn contains(&self, t: &Rational) -> bool {
        let lo_ok = if self.lo.strict { *t > self.lo.value } else { *t >= self.lo.value };
        let hi_ok = match &self.hi {
            None => true,
            Some(h) => {
                if h.strict {
                    *t < h.value
                } else {
                    *t <= h.value
                }
            }
        };
        lo_ok && hi_ok
    }

    fn raise_lo(&mut self, value: Rational, strict: bool) {
        if value > self.lo.value || (value == self.lo.value && strict) {
            self.lo = Bound { value, strict };
        }
    }

    fn lower_hi(&mut self, value: Rational, strict: bool) {
        let replace = match &self.hi {
            None => true,
            Some(h) => value < h.value || (value == h.value && strict),
        };
        if replace {
            self.hi = Some(Bound { value, strict });
        }
    }

    pub fn make_empty(&mut self) {
        self.lo = Bound {
            value: Rational::one(),
            strict: false,
        };
        self.hi = Some(Bound {
            value: Rational::zero(),
            strict: false,
        });
    }

    /// Intersects with `{t | (v + r·t) ⋈ k}` for one atom.
    pub fn restrict_atom(&mut self, v: &Rational, r: u32, rel: Relation, k: i64) {
        let k = Rational::from_int(k);
        if r == 0 {
            if !rel.holds(v, &k) {
                self.make_empty();
            }
            return;
        }
        let b = (&k - v) / Rational::from(r as u64);
        match rel {
            Relation::Lt => self.lower_hi(b, true),
            Relation::Le => self.lower_hi(b, false),
            Relation::Eq => {
                self.raise_lo(b.clone(), false);
                self.lower_hi(b, false);
            }
            Relation::Ge => self.raise_lo(b, false),
            Relation::Gt => self.raise_lo(b, true),
        }
    }

    pub fn restrict(&mut self, val: &Valuation, rates: &RateVector, c: &RectConstraint) {
        for a in &c.atoms {
            self.restrict_atom(val.get(a.var), rates.get(a.var), a.rel, a.bound);
        }
    }

    /// Smallest member if the lower end is closed, otherwise an interior point.
    pub fn pick(&self) -> Option<Rational> {
        if self.is_empty() {
            return None;
        }
        if !self.lo.strict {
            return Some(self.lo.value.clone());
        }
        Some(match &self.hi {
            Some(h) => (&self.lo.value + &h.value) / Rational::from_int(2),
            None => &self.lo.value + Rational::one(),
        })
    }
}

/// Delays after which `edge` may be taken from `config` (source invariant at
/// both ends, guard, target invariant after reset).
pub fn edge_delay_interval(model: &RhaModel, config: &Configuration, edge: EdgeId) -> DelayInterval {
    let e = model.edge(edge);
    let rates = model.rates(config.loc);
    let mut iv = DelayInterval::all();
    let inv = model.inv(config.loc);
    if !inv.eval(&config.val) {
        iv.make_empty();
        return iv;
    }
    iv.restrict(&config.val, &rates, &inv);
    iv.restrict(&config.val, &rates, &e.guard);
    // Target invariant: reset variables become 0, others follow the flow.
    for a in &model.inv(e.dst).atoms {
        if e.reset.contains(&a.var) {
            if !a.rel.holds(&Rational::zero(), &Rational::from_int(a.bound)) {
                iv.make_empty();
            }
        } else {
            iv.restrict_atom(config.val.get(a.var), rates.get(a.var), a.rel, a.bound);
        }
    }
    iv
}

/// Takes the earliest possible edge; among equal delays, the first declared.
pub struct EarliestOracle;

impl DelayOracle for EarliestOracle {
    fn choose(&self, model: &RhaModel, config: &Configuration) -> Option<(Rational, EdgeId)> {
        let mut best: Option<(Rational, EdgeId)> = None;
        for e in model.outgoing(config.loc) {
            if let Some(t) = edge_delay_interval(model, config, e).pick() {
                if best.as_ref().map(|(bt, _)| t < *bt).unwrap_or(true) {
                    best = Some((t, e));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;

    const TOY: &str = "model toy\nvars x y\nkind stopwatch\n\
        component Main\nnode en rate x:0,y:1\nentry en\nexit ex\nbox b : Sub byvalue {x}\n\
        edge en -> b.s guard y>=0\nedge b.t -> ex\n\
        component Sub\nnode s rate x:1,y:1\nentry s\nexit t\nedge s -> t guard x=1\n\
        init Main.en x=1/4 y=0\n";

    #[test]
    fn by_value_restore_on_return() {
        let m = parse_model(TOY).unwrap();
        let out = simulate(&m, &EarliestOracle, 10).unwrap();
        assert_eq!(out.reason, StopReason::Terminated);
        let last = out.run.last();
        assert_eq!(last.val.0, vec![Rational::new(1, 4), Rational::new(3, 4)]);
        validate_run(&m, &out.run).unwrap();
        assert_eq!(out.run.duration(), Rational::new(3, 4));
    }

    #[test]
    fn negative_delay_rejected() {
        let m = parse_model(TOY).unwrap();
        let c = initial_configuration(&m);
        let e = m.outgoing(c.loc)[0];
        assert_eq!(
            step(&m, &c, &Rational::new(-1, 2), StepKind::Edge(e)),
            Err(StepError::NegativeDelay(Rational::new(-1, 2)))
        );
    }

    #[test]
    fn deleting_a_frame_is_detected() {
        let m = parse_model(TOY).unwrap();
        let mut run = simulate(&m, &EarliestOracle, 10).unwrap().run;
        let i = run.steps.iter().position(|s| !s.to.context.is_empty()).unwrap();
        run.steps[i].to.context.clear();
        let err = validate_run(&m, &run).unwrap_err();
        assert_eq!(err.index, i + 1);
        assert!(err.reason.contains("call/entry mismatch"));
    }

    #[test]
    fn zero_steps() {
        let m = parse_model(TOY).unwrap();
        let out = simulate(&m, &EarliestOracle, 0).unwrap();
        assert!(out.run.steps.is_empty());
        assert_eq!(out.reason, StopReason::BoundExhausted);
    }
}
