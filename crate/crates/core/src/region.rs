//! Regions for two stopwatches, closest successors, the flat region automaton
//! and the region-augmented RSM of a glitch-free two-stopwatch RHA.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::model::{validate_model, BoxId, Location, NodeId, RateVector, RectConstraint, RhaModel, Valuation, VarId};
use crate::rational::Rational;
use crate::rsm::{reachable, QLoc, ReachResult, Rsm, RsmComponent, RsmLoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Interval {
    /// `[c]`
    Point(i64),
    /// `(c, c+1)` with `c < cmax`
    Open(i64),
    /// `(cmax, ∞)`
    Above,
}

impl Interval {
    pub fn of(v: &Rational, cmax: i64) -> Interval {
        if *v > cmax {
            Interval::Above
        } else if v.is_integer() {
            Interval::Point(v.floor_i64().expect("small"))
        } else {
            Interval::Open(v.floor_i64().expect("small"))
        }
    }

    pub fn all(cmax: i64) -> Vec<Interval> {
        let mut out = Vec::new();
        for c in 0..=cmax {
            out.push(Interval::Point(c));
            if c < cmax {
                out.push(Interval::Open(c));
            }
        }
        out.push(Interval::Above);
        out
    }

    pub fn is_open_bounded(self) -> bool {
        matches!(self, Interval::Open(_))
    }

    fn fmt_with(self, cmax: i64) -> String {
        match self {
            Interval::Point(c) => format!("[{c}]"),
            Interval::Open(c) => format!("({c},{})", c + 1),
            Interval::Above => format!("({cmax},inf)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    /// `frac(x) < frac(y)`
    XLeY,
    /// `frac(y) < frac(x)`
    YLeX,
    Equal,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    pub ix: Interval,
    pub iy: Interval,
    pub order: Order,
}

impl Region {
    pub fn new(ix: Interval, iy: Interval, order: Order) -> Self {
        Region { ix, iy, order }
    }

    pub fn display(&self, cmax: i64) -> String {
        let o = match self.order {
            Order::XLeY => ",xLEy",
            Order::YLeX => ",yLEx",
            Order::Equal => ",equal",
            Order::None => "",
        };
        format!("({},{}{})", self.ix.fmt_with(cmax), self.iy.fmt_with(cmax), o)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

pub fn region_of(x: &Rational, y: &Rational, cmax: i64) -> Region {
    let ix = Interval::of(x, cmax);
    let iy = Interval::of(y, cmax);
    let order = if ix.is_open_bounded() && iy.is_open_bounded() {
        let (fx, fy) = (x.fract(), y.fract());
        match fx.cmp(&fy) {
            std::cmp::Ordering::Less => Order::XLeY,
            std::cmp::Ordering::Greater => Order::YLeX,
            std::cmp::Ordering::Equal => Order::Equal,
        }
    } else {
        Order::None
    };
    Region { ix, iy, order }
}

pub fn region_of_valuation(v: &Valuation, cmax: i64) -> Region {
    region_of(&v.0[0], &v.0[1], cmax)
}

pub fn enumerate_regions(cmax: i64) -> Vec<Region> {
    let ivs = Interval::all(cmax);
    let mut out = Vec::new();
    for &ix in &ivs {
        for &iy in &ivs {
            if ix.is_open_bounded() && iy.is_open_bounded() {
                for o in [Order::XLeY, Order::Equal, Order::YLeX] {
                    out.push(Region::new(ix, iy, o));
                }
            } else {
                out.push(Region::new(ix, iy, Order::None));
            }
        }
    }
    out
}

/// `(2·cmax+2)² + 2·cmax²`: interval pairs, plus two extra orders for each pair
/// of bounded open intervals.
pub fn region_count(cmax: i64) -> usize {
    let n = (2 * cmax + 2) as usize;
    n * n + 2 * (cmax * cmax) as usize
}

fn coord(iv: Interval, frac: &Rational, cmax: i64) -> Rational {
    match iv {
        Interval::Point(c) => Rational::from_int(c),
        Interval::Open(c) => Rational::from_int(c) + frac,
        Interval::Above => Rational::from_int(cmax) + Rational::new(1, 2),
    }
}

/// Fraction pairs used for sample points, per order; index 0 is canonical.
const FRACS_LT: [(i64, i64, i64, i64); 6] = [(1, 3, 2, 3), (1, 7, 2, 7), (1, 5, 4, 5), (2, 5, 3, 5), (1, 11, 10, 11), (5, 13, 6, 13)];
const FRACS_EQ: [(i64, i64); 6] = [(1, 2), (1, 3), (1, 7), (5, 6), (2, 9), (12, 13)];

/// The `k`-th representative of `r` (k = 0 is the canonical one).
pub fn representative(r: &Region, cmax: i64, k: usize) -> (Rational, Rational) {
    let (fx, fy) = match r.order {
        Order::XLeY => {
            let (a, b, c, d) = FRACS_LT[k % FRACS_LT.len()];
            (Rational::new(a, b), Rational::new(c, d))
        }
        Order::YLeX => {
            let (a, b, c, d) = FRACS_LT[k % FRACS_LT.len()];
            (Rational::new(c, d), Rational::new(a, b))
        }
        Order::Equal | Order::None => {
            let (a, b) = FRACS_EQ[k % FRACS_EQ.len()];
            (Rational::new(a, b), Rational::new(a, b))
        }
    };
    let above = |k: usize| Rational::from_int(cmax) + Rational::new(1 + 3 * k as i64, 2);
    let x = match r.ix {
        Interval::Above => above(k),
        iv => coord(iv, &fx, cmax),
    };
    let y = match r.iy {
        Interval::Above => above(k + 1),
        iv => coord(iv, &fy, cmax),
    };
    (x, y)
}

pub fn canonical(r: &Region, cmax: i64) -> (Rational, Rational) {
    representative(r, cmax, 0)
}

fn flow(p: &(Rational, Rational), rates: (u32, u32), t: &Rational) -> (Rational, Rational) {
    (
        &p.0 + Rational::from(rates.0 as u64) * t,
        &p.1 + Rational::from(rates.1 as u64) * t,
    )
}

/// The first region different from the current one entered by flowing `p`,
/// or the current region if it is never left.
pub fn successor_from_point(p: &(Rational, Rational), rates: (u32, u32), cmax: i64) -> Region {
    let r0 = region_of(&p.0, &p.1, cmax);
    let vals = [&p.0, &p.1];
    let rs = [rates.0, rates.1];
    let mut events: Vec<Rational> = Vec::new();
    for i in 0..2 {
        if rs[i] == 1 && *vals[i] <= cmax {
            let next = vals[i].floor() + Rational::one();
            events.push(next - vals[i]);
        }
    }
    // With a single mover, fractional parts can cross while both stay bounded.
    if rs[0] != rs[1] && *vals[0] <= cmax && *vals[1] <= cmax {
        let (mover, other) = if rs[0] == 1 { (0, 1) } else { (1, 0) };
        let d = (vals[other].fract() - vals[mover].fract() + Rational::one()).fract();
        if d.is_positive() {
            events.push(d);
        }
    }
    let tmin = events.iter().cloned().reduce(Rational::min);
    let eps = match &tmin {
        Some(t) => t / Rational::from_int(2),
        None => Rational::one(),
    };
    let q = flow(p, rates, &eps);
    let r_eps = region_of(&q.0, &q.1, cmax);
    if r_eps != r0 {
        return r_eps;
    }
    match tmin {
        None => r0,
        Some(t) => {
            let q = flow(p, rates, &t);
            region_of(&q.0, &q.1, cmax)
        }
    }
}

pub fn closest_successor(r: &Region, rates: (u32, u32), cmax: i64) -> Region {
    successor_from_point(&canonical(r, cmax), rates, cmax)
}

/// Regions visited after `r` under constant rates, in order, excluding `r`.
pub fn successor_chain(r: &Region, rates: (u32, u32), cmax: i64) -> Vec<Region> {
    let mut out = Vec::new();
    let mut cur = *r;
    let cap = region_count(cmax) + 1;
    loop {
        let next = closest_successor(&cur, rates, cmax);
        if next == cur {
            break;
        }
        out.push(next);
        cur = next;
        assert!(out.len() <= cap, "successor chain does not stabilize");
    }
    out
}

/// The successor given by the four-case characterization. Returns
/// `None` where that table is silent (no point interval and no open variable).
pub fn case_successor(r: &Region, rates: (u32, u32), cmax: i64) -> Option<Region> {
    let iv = [r.ix, r.iy];
    let rs = [rates.0, rates.1];
    let in_z = |i: usize| matches!(iv[i], Interval::Point(_));
    let z_nonempty = in_z(0) || in_z(1);
    let leave_point = |c: i64| if c < cmax { Interval::Open(c) } else { Interval::Above };
    let next_int = |i: Interval| match i {
        Interval::Open(c) => Interval::Point(c + 1),
        other => other,
    };
    let mut out = [iv[0], iv[1]];
    let mut order = Order::None;
    if z_nonempty && rs == [1, 1] {
        for i in 0..2 {
            if let Interval::Point(c) = iv[i] {
                out[i] = leave_point(c);
            }
        }
        if out[0].is_open_bounded() && out[1].is_open_bounded() {
            order = match (in_z(0), in_z(1)) {
                (true, true) => Order::Equal,
                (true, false) => Order::XLeY,
                (false, true) => Order::YLeX,
                _ => Order::None,
            };
        }
    } else if z_nonempty {
        for i in 0..2 {
            if rs[i] == 0 {
                continue;
            }
            out[i] = match iv[i] {
                Interval::Point(c) => leave_point(c),
                other => next_int(other),
            };
        }
        if out[0].is_open_bounded() && out[1].is_open_bounded() {
            if rs[0] == 1 && in_z(0) && !in_z(1) {
                order = Order::XLeY;
            } else if rs[1] == 1 && in_z(1) && !in_z(0) {
                order = Order::YLeX;
            } else if rs == [0, 0] {
                order = r.order;
            }
        }
    } else if rs == [1, 1] {
        // M: open variables of maximal fractional part.
        let open: Vec<usize> = (0..2).filter(|&i| iv[i].is_open_bounded()).collect();
        if open.is_empty() {
            return None;
        }
        let m: Vec<usize> = if open.len() == 2 {
            match r.order {
                Order::XLeY => vec![1],
                Order::YLeX => vec![0],
                _ => vec![0, 1],
            }
        } else {
            open
        };
        for i in m {
            out[i] = next_int(iv[i]);
        }
    } else {
        for i in 0..2 {
            if rs[i] == 1 {
                out[i] = next_int(iv[i]);
            }
        }
        if rs == [0, 0] {
            order = r.order;
        }
    }
    Some(Region::new(out[0], out[1], order))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegionError {
    #[error("guard constant {0} exceeds cmax {1}")]
    ConstantAboveCmax(i64, i64),
    #[error("model has boxes; use build_region_rsm")]
    HasBoxes,
    #[error("model is not a glitch-free two-stopwatch RHA: {0}")]
    NotGlitchFree2sw(String),
    #[error("model is invalid: {0}")]
    Invalid(String),
    #[error("edge into a return port is not supported by the region abstraction")]
    EdgeIntoReturn,
    #[error("unknown target location `{0}`")]
    UnknownTarget(String),
}

/// `res(R)` and whether every valuation of `R` satisfies `guard`.
pub fn region_reset_and_guard(
    r: &Region,
    reset: &BTreeSet<VarId>,
    guard: &RectConstraint,
    cmax: i64,
) -> Result<(Region, bool), RegionError> {
    if let Some(a) = guard.atoms.iter().find(|a| a.bound > cmax) {
        return Err(RegionError::ConstantAboveCmax(a.bound, cmax));
    }
    Ok((reset_region(r, reset), satisfies(r, guard, cmax)))
}

pub fn reset_region(r: &Region, reset: &BTreeSet<VarId>) -> Region {
    let mut out = *r;
    if reset.contains(&VarId(0)) {
        out.ix = Interval::Point(0);
    }
    if reset.contains(&VarId(1)) {
        out.iy = Interval::Point(0);
    }
    if !(out.ix.is_open_bounded() && out.iy.is_open_bounded()) {
        out.order = Order::None;
    }
    out
}

pub fn satisfies(r: &Region, c: &RectConstraint, cmax: i64) -> bool {
    let (x, y) = canonical(r, cmax);
    c.eval(&Valuation(vec![x, y]))
}

fn rate_pair(r: &RateVector) -> (u32, u32) {
    (r.0[0], r.0[1])
}

/// Region of `R^0 = r, R^1, ...` hops admissible under `inv`: the prefix of the
/// chain along which the invariant keeps holding.
fn admissible_hops(r: &Region, rates: (u32, u32), inv: &RectConstraint, cmax: i64) -> Vec<Region> {
    let mut out = Vec::new();
    if !satisfies(r, inv, cmax) {
        return out;
    }
    out.push(*r);
    for s in successor_chain(r, rates, cmax) {
        if !satisfies(&s, inv, cmax) {
            break;
        }
        out.push(s);
    }
    out
}

/// Finite graph over `(location, region)` states of a box-free model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGraph {
    pub states: Vec<(Location, Region)>,
    pub edges: Vec<(usize, usize, String)>,
    pub index: HashMap<(Location, Region), usize>,
}

impl RegionGraph {
    pub fn reachable_from(&self, start: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for (a, b, _) in &self.edges {
            adj.entry(*a).or_default().push(*b);
        }
        while let Some(u) = stack.pop() {
            for &v in adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen
    }
}

fn check_2sw(model: &RhaModel, need_glitch_free: bool) -> Result<i64, RegionError> {
    let v = validate_model(model);
    if !v.is_ok() {
        return Err(RegionError::Invalid(v.diagnostics.join("; ")));
    }
    if model.nvars() != 2 {
        return Err(RegionError::NotGlitchFree2sw(format!("{} variables", model.nvars())));
    }
    if !v.class.stopwatches_only {
        return Err(RegionError::NotGlitchFree2sw("some rate is not in {0,1}".into()));
    }
    if need_glitch_free && !v.class.glitch_free {
        return Err(RegionError::NotGlitchFree2sw("a box passes a proper subset by value".into()));
    }
    if model.edges.iter().any(|e| matches!(e.dst, Location::Return(..))) {
        return Err(RegionError::EdgeIntoReturn);
    }
    Ok(v.cmax)
}

/// Discrete successors `(edge label, target location, target region)` of a
/// state with effective region `r`.
fn region_moves(model: &RhaModel, loc: Location, r: &Region, cmax: i64) -> Vec<(String, Location, Region)> {
    let rates = rate_pair(&model.rates(loc));
    let hops = admissible_hops(r, rates, &model.inv(loc), cmax);
    let mut out = Vec::new();
    for e in model.outgoing(loc) {
        let edge = model.edge(e);
        for (h, rh) in hops.iter().enumerate() {
            if !satisfies(rh, &edge.guard, cmax) {
                continue;
            }
            let r2 = reset_region(rh, &edge.reset);
            if !satisfies(&r2, &model.inv(edge.dst), cmax) {
                continue;
            }
            let label = format!("h{h}:{}", edge.action.clone().unwrap_or_else(|| format!("e{}", e.0)));
            out.push((label, edge.dst, r2));
        }
    }
    out
}

/// Region automaton of a flat (box-free) two-stopwatch model.
pub fn build_region_automaton(model: &RhaModel) -> Result<RegionGraph, RegionError> {
    if !model.boxes.is_empty() {
        return Err(RegionError::HasBoxes);
    }
    let cmax = check_2sw(model, false)?;
    let regions = enumerate_regions(cmax);
    let mut g = RegionGraph {
        states: Vec::new(),
        edges: Vec::new(),
        index: HashMap::new(),
    };
    for n in 0..model.nodes.len() {
        let loc = Location::Node(NodeId(n));
        for r in &regions {
            if satisfies(r, &model.inv(loc), cmax) {
                g.index.insert((loc, *r), g.states.len());
                g.states.push((loc, *r));
            }
        }
    }
    for (i, (loc, r)) in g.states.clone().into_iter().enumerate() {
        for (label, dst, r2) in region_moves(model, loc, &r, cmax) {
            if let Some(&j) = g.index.get(&(dst, r2)) {
                g.edges.push((i, j, label));
            }
        }
    }
    Ok(g)
}

/// The region-augmented RSM `H^RG` plus the maps back to the RHA.
#[derive(Debug, Clone)]
pub struct RegionRsm {
    pub rsm: Rsm,
    pub cmax: i64,
    /// RSM node index of `(n, R)` (component is that of `n`).
    pub node_index: HashMap<(NodeId, Region), usize>,
    /// RSM box index of `(b, R)` (component is the owner of `b`).
    pub box_index: HashMap<(BoxId, Region), usize>,
}

impl RegionRsm {
    /// Every RSM location standing for the RHA location `loc`.
    pub fn locations_of(&self, model: &RhaModel, loc: Location) -> Vec<QLoc> {
        let regions = enumerate_regions(self.cmax);
        let comp = model.owner_of(loc);
        let mut out = Vec::new();
        match loc {
            Location::Node(n) => {
                for r in &regions {
                    if let Some(&i) = self.node_index.get(&(n, *r)) {
                        out.push(QLoc {
                            comp,
                            loc: RsmLoc::Node(i),
                        });
                    }
                }
            }
            Location::Call(b, en) => {
                for r in &regions {
                    if let (Some(&bi), Some(&ni)) = (self.box_index.get(&(b, *r)), self.node_index.get(&(en, *r))) {
                        out.push(QLoc {
                            comp,
                            loc: RsmLoc::Call(bi, ni),
                        });
                    }
                }
            }
            Location::Return(b, ex) => {
                let by_value = !model.box_decl(b).by_value.is_empty();
                let inv = model.inv(loc);
                for r_old in &regions {
                    let Some(&bi) = self.box_index.get(&(b, *r_old)) else { continue };
                    for r_now in &regions {
                        let Some(&ni) = self.node_index.get(&(ex, *r_now)) else { continue };
                        let eff = if by_value { r_old } else { r_now };
                        if satisfies(eff, &inv, self.cmax) {
                            out.push(QLoc {
                                comp,
                                loc: RsmLoc::Ret(bi, ni),
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Reachability of `target` from the model's initial configuration.
    pub fn reach(&self, model: &RhaModel, target: Location, termination_only: bool) -> ReachResult {
        let init_loc = model.initial_location().expect("model has an initial location");
        let v = model.initial_valuation();
        let r0 = region_of_valuation(&v, self.cmax);
        let Location::Node(n0) = init_loc else { unreachable!() };
        let Some(&i0) = self.node_index.get(&(n0, r0)) else {
            return ReachResult {
                reachable: false,
                witness: None,
                summaries: Default::default(),
            };
        };
        let init = QLoc {
            comp: model.owner_of(init_loc),
            loc: RsmLoc::Node(i0),
        };
        let targets = self.locations_of(model, target);
        reachable(&self.rsm, init, &targets, termination_only).expect("locations exist")
    }
}

/// Builds `H^RG` for a glitch-free two-stopwatch RHA.
pub fn build_region_rsm(model: &RhaModel) -> Result<RegionRsm, RegionError> {
    let cmax = check_2sw(model, true)?;
    let regions = enumerate_regions(cmax);
    let mut rsm = Rsm::default();
    let mut node_index = HashMap::new();
    let mut box_index = HashMap::new();
    for c in &model.components {
        let mut rc = RsmComponent::new(&c.name);
        for &n in &c.nodes {
            let loc = Location::Node(n);
            for r in &regions {
                if satisfies(r, &model.inv(loc), cmax) {
                    let i = rc.add_node(&format!("{}@{}", model.node(n).name, r.display(cmax)));
                    node_index.insert((n, *r), i);
                    if c.entries.contains(&n) {
                        rc.entries.push(i);
                    }
                    if c.exits.contains(&n) {
                        rc.exits.push(i);
                    }
                }
            }
        }
        for &b in &c.boxes {
            for r in &regions {
                let i = rc.add_box(
                    &format!("{}@{}", model.box_decl(b).name, r.display(cmax)),
                    model.box_decl(b).callee,
                );
                box_index.insert((b, *r), i);
            }
        }
        rsm.components.push(rc);
    }

    let target_of = |dst: Location, r2: Region| -> Option<RsmLoc> {
        match dst {
            Location::Node(n) => node_index.get(&(n, r2)).map(|&i| RsmLoc::Node(i)),
            Location::Call(b, en) => {
                if !satisfies(&r2, &model.inv(dst), cmax) {
                    return None;
                }
                match (box_index.get(&(b, r2)), node_index.get(&(en, r2))) {
                    (Some(&bi), Some(&ni)) => Some(RsmLoc::Call(bi, ni)),
                    _ => None,
                }
            }
            Location::Return(..) => None,
        }
    };

    for (ci, c) in model.components.iter().enumerate() {
        let mut new_edges = Vec::new();
        for &n in &c.nodes {
            let loc = Location::Node(n);
            for r in &regions {
                let Some(&src) = node_index.get(&(n, *r)) else { continue };
                for (label, dst, r2) in region_moves(model, loc, r, cmax) {
                    if let Some(d) = target_of(dst, r2) {
                        new_edges.push((RsmLoc::Node(src), d, label));
                    }
                }
            }
        }
        for &b in &c.boxes {
            let bd = model.box_decl(b);
            let by_value = !bd.by_value.is_empty();
            for &ex in &model.components[bd.callee].exits {
                let loc = Location::Return(b, ex);
                if model.outgoing(loc).is_empty() {
                    continue;
                }
                for r_old in &regions {
                    let bi = box_index[&(b, *r_old)];
                    for r_now in &regions {
                        let Some(&ni) = node_index.get(&(ex, *r_now)) else { continue };
                        let eff = if by_value { r_old } else { r_now };
                        if !satisfies(eff, &model.inv(loc), cmax) {
                            continue;
                        }
                        for (label, dst, r2) in region_moves(model, loc, eff, cmax) {
                            if let Some(d) = target_of(dst, r2) {
                                new_edges.push((RsmLoc::Ret(bi, ni), d, label));
                            }
                        }
                    }
                }
            }
        }
        for (s, d, l) in new_edges {
            rsm.components[ci].add_edge(s, d, &l);
        }
    }
    Ok(RegionRsm {
        rsm,
        cmax,
        node_index,
        box_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(ix: Interval, iy: Interval, o: Order) -> Region {
        Region::new(ix, iy, o)
    }
    use Interval::*;

    #[test]
    fn counts() {
        assert_eq!(enumerate_regions(0).len(), 4);
        assert_eq!(enumerate_regions(1).len(), region_count(1));
        assert_eq!(enumerate_regions(2).len(), region_count(2));
        assert_eq!(region_count(1), 18);
    }

    #[test]
    fn region_of_examples() {
        assert_eq!(region_of(&Rational::one(), &Rational::new(3, 2), 1), r(Point(1), Above, Order::None));
        assert_eq!(region_of(&Rational::new(1, 3), &Rational::new(2, 3), 2), r(Open(0), Open(0), Order::XLeY));
        assert_eq!(region_of(&Rational::zero(), &Rational::zero(), 1), r(Point(0), Point(0), Order::None));
        assert_eq!(region_of(&Rational::new(1, 2), &Rational::new(1, 2), 1), r(Open(0), Open(0), Order::Equal));
    }

    #[test]
    fn closest_successor_examples() {
        assert_eq!(
            closest_successor(&r(Point(0), Open(0), Order::None), (1, 1), 1),
            r(Open(0), Open(0), Order::XLeY)
        );
        assert_eq!(
            closest_successor(&r(Open(0), Open(0), Order::XLeY), (0, 1), 1),
            r(Open(0), Point(1), Order::None)
        );
        let top = r(Above, Above, Order::None);
        for rates in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(closest_successor(&top, rates, 2), top);
        }
    }

    #[test]
    fn chain_examples() {
        assert_eq!(
            successor_chain(&r(Point(0), Point(0), Order::None), (1, 1), 1),
            vec![
                r(Open(0), Open(0), Order::Equal),
                r(Point(1), Point(1), Order::None),
                r(Above, Above, Order::None)
            ]
        );
        assert_eq!(
            successor_chain(&r(Point(0), Open(0), Order::None), (1, 0), 1),
            vec![
                r(Open(0), Open(0), Order::XLeY),
                r(Open(0), Open(0), Order::Equal),
                r(Open(0), Open(0), Order::YLeX),
                r(Point(1), Open(0), Order::None),
                r(Above, Open(0), Order::None)
            ]
        );
        for reg in enumerate_regions(2) {
            assert!(successor_chain(&reg, (0, 0), 2).is_empty());
        }
    }

    #[test]
    fn reset_and_guard_examples() {
        let x = BTreeSet::from([VarId(0)]);
        let none = BTreeSet::new();
        let c = |atoms: Vec<(usize, crate::model::Relation, i64)>| {
            RectConstraint::new(
                atoms
                    .into_iter()
                    .map(|(v, rel, k)| crate::model::AtomicConstraint::new(VarId(v), rel, k))
                    .collect(),
            )
        };
        use crate::model::Relation::*;
        let (res, _) = region_reset_and_guard(&r(Open(0), Open(0), Order::XLeY), &x, &RectConstraint::top(), 1).unwrap();
        assert_eq!(res, r(Point(0), Open(0), Order::None));
        let (_, g) = region_reset_and_guard(&r(Point(1), Open(0), Order::None), &none, &c(vec![(0, Eq, 1)]), 1).unwrap();
        assert!(g);
        let (_, g) =
            region_reset_and_guard(&r(Open(0), Open(0), Order::Equal), &none, &c(vec![(0, Lt, 1), (1, Lt, 1)]), 1).unwrap();
        assert!(g);
        assert!(region_reset_and_guard(&r(Open(0), Open(0), Order::Equal), &none, &c(vec![(0, Lt, 3)]), 1).is_err());
    }
}
