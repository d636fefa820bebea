//! Run splitting into type-1/2/3 fragments and context-sensitive
//! contraction for pass-by-reference runs.

use num_bigint::BigUint;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{BoxId, Location, RhaModel};
use crate::rational::Rational;
use crate::semantics::{Run, StepKind};
use crate::tbreach::{lp_feasible_with_hint, SkelState, Skeleton, TimeBound};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractionError {
    #[error("model has pass-by-value box `{0}`; contraction needs pass-by-reference contexts")]
    ByValue(String),
    #[error("run duration {duration} exceeds the bound {bound}")]
    DurationExceeds { duration: Rational, bound: Rational },
    #[error("invalid contraction witness: {0}")]
    InvalidWitness(String),
}

/// Per-variable region with the special zero classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoarseRegion {
    /// 0 and stays 0 until the next discrete step.
    ZeroStay,
    /// 0 and becomes positive before the next discrete step.
    ZeroLeave,
    /// `[a, a]`, 1 ≤ a ≤ cmax.
    Point(i64),
    /// `(a−1, a)`, 1 ≤ a ≤ cmax.
    Open(i64),
    /// `(cmax, ∞)`.
    Top,
}

impl CoarseRegion {
    /// `leaving` is true when the variable grows during the following delay.
    pub fn of(v: &Rational, leaving: bool, cmax: i64) -> Self {
        if v.is_zero() {
            if leaving {
                CoarseRegion::ZeroLeave
            } else {
                CoarseRegion::ZeroStay
            }
        } else if *v > cmax {
            CoarseRegion::Top
        } else if v.is_integer() {
            CoarseRegion::Point(v.floor_i64().expect("bounded by cmax"))
        } else {
            CoarseRegion::Open(v.ceil().floor_i64().expect("bounded by cmax"))
        }
    }

    /// The coarser class used for type-2 cuts: everything in `[0, 1)` is one class.
    fn coarse(self) -> CoarseRegion {
        match self {
            CoarseRegion::ZeroStay | CoarseRegion::ZeroLeave | CoarseRegion::Open(1) => CoarseRegion::ZeroStay,
            r => r,
        }
    }
}

/// Matching key of a configuration: context, location and regions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContractKey {
    pub context: Vec<BoxId>,
    pub loc: Location,
    pub regions: Vec<CoarseRegion>,
}

#[derive(Debug, Clone)]
pub struct AnnotatedRun {
    pub run: Run,
    pub keys: Vec<ContractKey>,
}

fn check_by_reference(model: &RhaModel) -> Result<(), ContractionError> {
    match model.boxes.iter().find(|b| !b.by_value.is_empty()) {
        Some(b) => Err(ContractionError::ByValue(b.name.clone())),
        None => Ok(()),
    }
}

pub fn annotate_run(model: &RhaModel, run: &Run, cmax: i64) -> Result<AnnotatedRun, ContractionError> {
    check_by_reference(model)?;
    let keys = (0..=run.len())
        .map(|i| {
            let c = run.config(i);
            let rates = model.rates(c.loc);
            let delay = run.steps.get(i).map(|s| s.delay.clone()).unwrap_or_else(Rational::zero);
            let regions = c
                .val
                .iter()
                .enumerate()
                .map(|(x, v)| CoarseRegion::of(v, rates.0[x] > 0 && delay.is_positive(), cmax))
                .collect();
            ContractKey {
                context: c.boxes(),
                loc: c.loc,
                regions,
            }
        })
        .collect();
    Ok(AnnotatedRun { run: run.clone(), keys })
}

/// Configurations `start..=end` of the run; consecutive fragments share
/// their boundary configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fragment {
    pub start: usize,
    pub end: usize,
}

impl Fragment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, Default)]
pub struct SplitReport {
    pub type1: Vec<Fragment>,
    /// Per type-1 fragment, its type-2 pieces.
    pub type2: Vec<Vec<Fragment>>,
    /// Per type-2 fragment (flattened in order), its type-3 pieces.
    pub type3: Vec<Vec<Fragment>>,
}

impl SplitReport {
    pub fn fragments(&self) -> Vec<Fragment> {
        self.type3.iter().flatten().copied().collect()
    }
}

fn cut(f: Fragment, mut points: Vec<usize>) -> Vec<Fragment> {
    points.retain(|p| *p > f.start && *p < f.end);
    points.sort_unstable();
    points.dedup();
    let mut out = Vec::with_capacity(points.len() + 1);
    let mut s = f.start;
    for p in points {
        out.push(Fragment { start: s, end: p });
        s = p;
    }
    out.push(Fragment { start: s, end: f.end });
    out
}

/// Type-1: steps grouped by `⌈end time · rmax⌉`, so there are at most
/// `T·rmax + 1` groups. A fragment exceeds `1/rmax` only when a single
/// delay straddles a multiple of `1/rmax`.
fn split_type1(run: &Run, rmax: u32) -> Vec<Fragment> {
    let whole = Fragment { start: 0, end: run.len() };
    if rmax == 0 || run.is_empty() {
        return vec![whole];
    }
    let r = Rational::from_int(rmax as i64);
    let mut now = Rational::zero();
    let mut group = Vec::with_capacity(run.len());
    for s in &run.steps {
        now += &s.delay;
        group.push((&now * &r).ceil().floor_i64().unwrap_or(i64::MAX).max(1));
    }
    let points = (1..run.len()).filter(|k| group[k - 1] != group[*k]).collect();
    cut(whole, points)
}

/// Type-2: cut wherever some variable changes its coarse region.
fn split_type2(keys: &[ContractKey], f: Fragment) -> Vec<Fragment> {
    let points = (f.start + 1..f.end)
        .filter(|&p| {
            keys[p - 1]
                .regions
                .iter()
                .zip(&keys[p].regions)
                .any(|(a, b)| a.coarse() != b.coarse())
        })
        .collect();
    cut(f, points)
}

/// Type-3: cut before the first and after the last reset of each variable.
fn split_type3(model: &RhaModel, run: &Run, f: Fragment) -> Vec<Fragment> {
    let mut points = Vec::new();
    for x in 0..model.nvars() {
        let resets: Vec<usize> = (f.start..f.end)
            .filter(|&k| match run.steps[k].kind {
                StepKind::Edge(e) => model.edge(e).reset.iter().any(|v| v.0 == x),
                _ => false,
            })
            .collect();
        if let (Some(first), Some(last)) = (resets.first(), resets.last()) {
            points.push(*first);
            points.push(last + 1);
        }
    }
    cut(f, points)
}

pub fn split_pipeline(model: &RhaModel, ann: &AnnotatedRun, bound: &Rational, rmax: u32) -> Result<SplitReport, ContractionError> {
    let duration = ann.run.duration();
    if duration > *bound {
        return Err(ContractionError::DurationExceeds {
            duration,
            bound: bound.clone(),
        });
    }
    let type1 = split_type1(&ann.run, rmax);
    let type2: Vec<Vec<Fragment>> = type1.iter().map(|f| split_type2(&ann.keys, *f)).collect();
    let type3 = type2
        .iter()
        .flatten()
        .map(|f| split_type3(model, &ann.run, *f))
        .collect();
    Ok(SplitReport { type1, type2, type3 })
}

/// A run reduced to its matching keys, outgoing steps and delays:
/// `delays[k]` is the time spent in configuration `k` before `steps[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractRun<K, E> {
    pub keys: Vec<K>,
    pub steps: Vec<E>,
    pub delays: Vec<Rational>,
}

impl<K: Clone + Eq, E: Clone + Eq> ContractRun<K, E> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn duration(&self) -> Rational {
        self.delays.iter().sum()
    }
}

/// Positions `i < j` with `h` defined on `i < p < j`, given as `(p, h(p))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionWitness {
    pub i: usize,
    pub j: usize,
    pub h: Vec<(usize, usize)>,
}

/// The witness with smallest `j`, then largest `i`, then smallest `h`.
pub fn find_witness<K: Clone + Eq, E: Clone + Eq>(r: &ContractRun<K, E>) -> Option<ContractionWitness> {
    let n = r.len();
    let first: Vec<usize> = (0..r.keys.len())
        .map(|p| r.keys.iter().position(|k| *k == r.keys[p]).expect("present"))
        .collect();
    for j in 1..n {
        for i in (0..j).rev() {
            if r.keys[i] != r.keys[j] || r.steps[i] != r.steps[j] {
                continue;
            }
            if (i + 1..j).all(|p| first[p] < i) {
                return Some(ContractionWitness {
                    i,
                    j,
                    h: (i + 1..j).map(|p| (p, first[p])).collect(),
                });
            }
        }
    }
    None
}

pub fn cnt<K: Clone + Eq, E: Clone + Eq>(r: &ContractRun<K, E>, w: &ContractionWitness) -> Result<ContractRun<K, E>, ContractionError> {
    let bad = |m: &str| Err(ContractionError::InvalidWitness(m.to_string()));
    let (i, j) = (w.i, w.j);
    if !(i < j && j < r.len()) {
        return bad("positions must satisfy i < j < n");
    }
    if r.keys[i] != r.keys[j] {
        return bad("pairs at i and j differ");
    }
    if r.steps[i] != r.steps[j] {
        return bad("outgoing steps at i and j differ");
    }
    let domain: Vec<usize> = w.h.iter().map(|(p, _)| *p).collect();
    if domain != (i + 1..j).collect::<Vec<_>>() {
        return bad("h must be defined exactly on i < p < j");
    }
    if w.h.iter().any(|(p, q)| *q >= i || r.keys[*p] != r.keys[*q]) {
        return bad("h must map to an earlier equal pair before i");
    }
    let mut delays: Vec<Rational> = r.delays[..=i].to_vec();
    for (p, q) in &w.h {
        delays[*q] += &r.delays[*p];
    }
    delays[i] += &r.delays[j];
    delays.extend(r.delays[j + 1..].iter().cloned());
    let mut keys = r.keys[..=i].to_vec();
    keys.extend(r.keys[j + 1..].iter().cloned());
    let mut steps = r.steps[..i].to_vec();
    steps.extend(r.steps[j..].iter().cloned());
    Ok(ContractRun { keys, steps, delays })
}

pub fn cnt_star<K: Clone + Eq, E: Clone + Eq>(r: &ContractRun<K, E>) -> ContractRun<K, E> {
    let mut cur = r.clone();
    while let Some(w) = find_witness(&cur) {
        cur = cnt(&cur, &w).expect("found witnesses are valid");
    }
    cur
}

/// `Σ_{i=1..K} n^i`.
pub fn alpha(n_boxes: u64, k: u64) -> BigUint {
    let n = BigUint::from(n_boxes);
    (1..=k).map(|i| n.pow(i as u32)).sum()
}

/// `24·(T·rmax+1)·|X|²·(α·|Q|)²·(2cmax+1)^{2|X|}` with α computed from
/// `n_boxes` and `k`. A variable-free model counts as one variable.
pub fn bound_c(t: u64, rmax: u64, nvars: u64, n_boxes: u64, k: u64, nlocs: u64, cmax: u64) -> BigUint {
    bound_c_alpha(t, rmax, nvars, &alpha(n_boxes, k), nlocs, cmax)
}

pub fn bound_c_alpha(t: u64, rmax: u64, nvars: u64, alpha: &BigUint, nlocs: u64, cmax: u64) -> BigUint {
    let nv = nvars.max(1);
    let al = alpha * BigUint::from(nlocs);
    BigUint::from(24u32)
        * BigUint::from(t * rmax + 1)
        * BigUint::from(nv * nv)
        * &al
        * &al
        * BigUint::from(2 * cmax + 1).pow((2 * nv) as u32)
}

/// `(α·|Q|·(2cmax+1)^{|X|})² + 1`.
pub fn type3_bound(n_boxes: u64, k: u64, nlocs: u64, cmax: u64, nvars: u64) -> BigUint {
    let m = alpha(n_boxes, k) * BigUint::from(nlocs) * BigUint::from(2 * cmax + 1).pow(nvars as u32);
    &m * &m + BigUint::from(1u32)
}

fn fragment_run(ann: &AnnotatedRun, f: Fragment) -> ContractRun<ContractKey, StepKind> {
    ContractRun {
        keys: ann.keys[f.start..=f.end].to_vec(),
        steps: ann.run.steps[f.start..f.end].iter().map(|s| s.kind).collect(),
        delays: (f.start..=f.end)
            .map(|k| if k < f.end { ann.run.steps[k].delay.clone() } else { Rational::zero() })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct ContractionOutcome {
    pub skeleton: Skeleton,
    /// Per-step delays after folding; they may not replay on their own.
    pub delays: Vec<Rational>,
    pub split: SplitReport,
    pub bound_c: BigUint,
    pub type3_bound: BigUint,
    /// A run with the contracted skeleton, the same start valuation and the
    /// same exact duration, if one exists.
    pub certified: Option<Run>,
}

/// Split, contract each type-3 fragment to its fixpoint and concatenate.
pub fn contract_run(model: &RhaModel, run: &Run, bound: &Rational, k: usize) -> Result<ContractionOutcome, ContractionError> {
    let cmax = model.cmax();
    let rmax = model.rmax();
    let ann = annotate_run(model, run, cmax)?;
    let split = split_pipeline(model, &ann, bound, rmax)?;
    let pieces: Vec<ContractRun<ContractKey, StepKind>> = split
        .fragments()
        .par_iter()
        .map(|f| cnt_star(&fragment_run(&ann, *f)))
        .collect();
    let state = |key: &ContractKey| SkelState {
        context: key.context.clone(),
        loc: key.loc,
    };
    let mut skeleton = Skeleton {
        init: state(&ann.keys[0]),
        steps: Vec::new(),
    };
    let mut delays = Vec::new();
    for p in &pieces {
        for (s, key) in p.steps.iter().zip(&p.keys[1..]) {
            skeleton.steps.push((*s, state(key)));
        }
        delays.extend(p.delays[..p.len()].iter().cloned());
    }
    // The delay spent in a fragment's last configuration belongs to the next fragment.
    let mut carry = Rational::zero();
    for p in &pieces {
        carry += &p.delays[p.len()];
    }
    debug_assert!(carry.is_zero());
    let nlocs = model.all_locations().len() as u64;
    let t_ceil = bound.ceil().max(Rational::zero()).floor_i64().unwrap_or(0) as u64;
    let bound_c = bound_c(
        t_ceil,
        rmax as u64,
        model.nvars() as u64,
        model.boxes.len() as u64,
        k as u64,
        nlocs,
        cmax as u64,
    );
    let type3_bound = type3_bound(model.boxes.len() as u64, k as u64, nlocs, cmax as u64, model.nvars() as u64);
    let certified = lp_feasible_with_hint(
        model,
        &skeleton,
        &TimeBound::Exactly(run.duration()),
        &run.init.val,
        Some(&delays),
    );
    Ok(ContractionOutcome {
        skeleton,
        delays,
        split,
        bound_c,
        type3_bound,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(keys: &str) -> ContractRun<char, char> {
        let keys: Vec<char> = keys.chars().collect();
        let n = keys.len() - 1;
        ContractRun {
            steps: keys[..n].iter().map(|k| k.to_ascii_uppercase()).collect(),
            delays: (0..=n).map(|k| Rational::from_int(k as i64 + 1)).collect(),
            keys,
        }
    }

    #[test]
    fn abab_contracts_to_aba() {
        let r = toy("ababa");
        let w = find_witness(&r).unwrap();
        assert_eq!(w, ContractionWitness { i: 1, j: 3, h: vec![(2, 0)] });
        let c = cnt(&r, &w).unwrap();
        assert_eq!(c.keys, vec!['a', 'b', 'a']);
        assert_eq!(c.duration(), r.duration());
    }

    #[test]
    fn six_pair_sequence_is_a_fixpoint() {
        let r = toy("abcdaebf");
        assert!(find_witness(&r).is_none());
        assert_eq!(cnt_star(&r), r);
    }

    #[test]
    fn alpha_and_bound() {
        assert_eq!(alpha(2, 2), BigUint::from(6u32));
        assert_eq!(alpha(5, 0), BigUint::from(0u32));
        assert_eq!(bound_c_alpha(1, 1, 1, &BigUint::from(2u32), 3, 1), BigUint::from(15552u32));
    }

    #[test]
    fn coarse_regions() {
        let q = |s: &str| s.parse::<Rational>().unwrap();
        assert_eq!(CoarseRegion::of(&q("3/2"), true, 2), CoarseRegion::Open(2));
        assert_eq!(CoarseRegion::of(&q("0"), false, 2), CoarseRegion::ZeroStay);
        assert_eq!(CoarseRegion::of(&q("0"), true, 2), CoarseRegion::ZeroLeave);
        assert_eq!(CoarseRegion::of(&q("2"), true, 2), CoarseRegion::Point(2));
        assert_eq!(CoarseRegion::of(&q("5/2"), true, 2), CoarseRegion::Top);
    }
}
