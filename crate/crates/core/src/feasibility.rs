//! Exact feasibility of affine systems with strict and non-strict
//! inequalities, by equality substitution and Fourier–Motzkin elimination.

use std::collections::HashMap;

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Le,
    Lt,
    Eq,
}

/// `Σ coeffs[i]·v_i  cmp  rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinConstraint {
    pub coeffs: Vec<Rational>,
    pub cmp: Cmp,
    pub rhs: Rational,
}

impl LinConstraint {
    pub fn holds(&self, x: &[Rational]) -> bool {
        let lhs: Rational = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        match self.cmp {
            Cmp::Le => lhs <= self.rhs,
            Cmp::Lt => lhs < self.rhs,
            Cmp::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearSystem {
    pub names: Vec<String>,
    pub constraints: Vec<LinConstraint>,
}

/// Sparse affine expression over system variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Affine {
    pub terms: Vec<(usize, Rational)>,
    pub constant: Rational,
}

impl Affine {
    pub fn constant(c: Rational) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(i: usize) -> Self {
        Affine {
            terms: vec![(i, Rational::one())],
            constant: Rational::zero(),
        }
    }

    pub fn add_term(&mut self, i: usize, c: Rational) {
        if let Some(t) = self.terms.iter_mut().find(|(j, _)| *j == i) {
            t.1 += c;
        } else {
            self.terms.push((i, c));
        }
    }
}

impl LinearSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: &str) -> usize {
        self.names.push(name.to_string());
        for c in &mut self.constraints {
            c.coeffs.push(Rational::zero());
        }
        self.names.len() - 1
    }

    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    /// Adds `lhs cmp rhs` for affine sides.
    pub fn add(&mut self, lhs: &Affine, cmp: Cmp, rhs: &Affine) {
        let mut coeffs = vec![Rational::zero(); self.nvars()];
        for (i, c) in &lhs.terms {
            coeffs[*i] += c;
        }
        for (i, c) in &rhs.terms {
            coeffs[*i] -= c;
        }
        self.constraints.push(LinConstraint {
            coeffs,
            cmp,
            rhs: &rhs.constant - &lhs.constant,
        });
    }

    /// `lhs ≥ rhs` / `lhs > rhs` helpers.
    pub fn add_ge(&mut self, lhs: &Affine, strict: bool, rhs: &Affine) {
        self.add(rhs, if strict { Cmp::Lt } else { Cmp::Le }, lhs);
    }

    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        x.len() == self.nvars() && self.constraints.iter().all(|c| c.holds(x))
    }
}

/// Row used during elimination: `Σ a_i v_i (< | ≤) b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Row {
    a: Vec<Rational>,
    b: Rational,
    strict: bool,
}

impl Row {
    fn is_constant(&self) -> bool {
        self.a.iter().all(|c| c.is_zero())
    }

    fn constant_ok(&self) -> bool {
        if self.strict {
            Rational::zero() < self.b
        } else {
            Rational::zero() <= self.b
        }
    }

    /// Scales so the first nonzero coefficient has absolute value 1.
    fn normalize(mut self) -> Row {
        if let Some(p) = self.a.iter().find(|c| !c.is_zero()).map(|c| c.abs()) {
            for c in &mut self.a {
                *c = &*c / &p;
            }
            self.b = &self.b / &p;
        }
        self
    }
}

/// Keeps, per coefficient vector, only the tightest right-hand side.
fn dedupe(rows: Vec<Row>) -> Result<Vec<Row>, ()> {
    let mut best: HashMap<Vec<Rational>, (Rational, bool)> = HashMap::new();
    let mut order: Vec<Vec<Rational>> = Vec::new();
    for r in rows {
        let r = r.normalize();
        if r.is_constant() {
            if !r.constant_ok() {
                return Err(());
            }
            continue;
        }
        match best.get_mut(&r.a) {
            Some(cur) => {
                if r.b < cur.0 || (r.b == cur.0 && r.strict) {
                    *cur = (r.b, r.strict);
                }
            }
            None => {
                order.push(r.a.clone());
                best.insert(r.a, (r.b, r.strict));
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|a| {
            let (b, strict) = best.remove(&a).expect("present");
            Row { a, b, strict }
        })
        .collect())
}

enum Elim {
    /// `v = (b − Σ_{j≠v} a_j x_j) / a_v`
    Subst { var: usize, row: Vec<Rational>, rhs: Rational },
    /// Bounds on `var` in terms of variables eliminated later.
    Fm { var: usize, rows: Vec<Row> },
}

fn eval_row(a: &[Rational], x: &[Rational], skip: usize) -> Rational {
    a.iter()
        .zip(x)
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, (c, v))| c * v)
        .sum()
}

/// A satisfying assignment, or `None` if the system is infeasible.
pub fn solve(sys: &LinearSystem) -> Option<Vec<Rational>> {
    let n = sys.nvars();
    let mut ineq: Vec<Row> = Vec::new();
    let mut eqs: Vec<(Vec<Rational>, Rational)> = Vec::new();
    for c in &sys.constraints {
        match c.cmp {
            Cmp::Eq => eqs.push((c.coeffs.clone(), c.rhs.clone())),
            Cmp::Le | Cmp::Lt => ineq.push(Row {
                a: c.coeffs.clone(),
                b: c.rhs.clone(),
                strict: c.cmp == Cmp::Lt,
            }),
        }
    }
    let mut steps: Vec<Elim> = Vec::new();

    // Gaussian substitution of equalities.
    while let Some((a, b)) = eqs.pop() {
        let Some(v) = a.iter().position(|c| !c.is_zero()) else {
            if !b.is_zero() {
                return None;
            }
            continue;
        };
        let av = a[v].clone();
        let substitute = |row: &mut Vec<Rational>, rhs: &mut Rational| {
            let f = &row[v] / &av;
            if f.is_zero() {
                return;
            }
            for (rc, ac) in row.iter_mut().zip(&a) {
                *rc = &*rc - &f * ac;
            }
            *rhs = &*rhs - &f * &b;
        };
        for (ra, rb) in &mut eqs {
            substitute(ra, rb);
        }
        for r in &mut ineq {
            substitute(&mut r.a, &mut r.b);
        }
        steps.push(Elim::Subst { var: v, row: a, rhs: b });
    }

    let mut rows = dedupe(ineq).ok()?;
    loop {
        // Pick the variable with the fewest generated combinations.
        let mut best: Option<(usize, usize)> = None;
        for v in 0..n {
            let pos = rows.iter().filter(|r| r.a[v].is_positive()).count();
            let neg = rows.iter().filter(|r| r.a[v].is_negative()).count();
            if pos + neg == 0 {
                continue;
            }
            let cost = pos * neg;
            if best.map(|(_, c)| cost < c).unwrap_or(true) {
                best = Some((v, cost));
            }
        }
        let Some((v, _)) = best else { break };
        let (with, without): (Vec<Row>, Vec<Row>) = rows.into_iter().partition(|r| !r.a[v].is_zero());
        let mut next = without;
        let pos: Vec<&Row> = with.iter().filter(|r| r.a[v].is_positive()).collect();
        let neg: Vec<&Row> = with.iter().filter(|r| r.a[v].is_negative()).collect();
        for p in &pos {
            for q in &neg {
                let fp = q.a[v].abs();
                let fq = p.a[v].clone();
                let a: Vec<Rational> = p.a.iter().zip(&q.a).map(|(x, y)| x * &fp + y * &fq).collect();
                let b = &p.b * &fp + &q.b * &fq;
                next.push(Row {
                    a,
                    b,
                    strict: p.strict || q.strict,
                });
            }
        }
        steps.push(Elim::Fm { var: v, rows: with });
        rows = dedupe(next).ok()?;
    }
    if rows.iter().any(|r| !r.constant_ok()) {
        return None;
    }

    // Back-substitution.
    let mut x = vec![Rational::zero(); n];
    for s in steps.iter().rev() {
        match s {
            Elim::Fm { var, rows } => {
                let mut lo: Option<(Rational, bool)> = None;
                let mut hi: Option<(Rational, bool)> = None;
                for r in rows {
                    let rest = eval_row(&r.a, &x, *var);
                    let bound = (&r.b - rest) / &r.a[*var];
                    if r.a[*var].is_positive() {
                        if hi.as_ref().map(|h| bound < h.0 || (bound == h.0 && r.strict)).unwrap_or(true) {
                            hi = Some((bound, r.strict));
                        }
                    } else if lo.as_ref().map(|l| bound > l.0 || (bound == l.0 && r.strict)).unwrap_or(true) {
                        lo = Some((bound, r.strict));
                    }
                }
                x[*var] = match (lo, hi) {
                    (None, None) => Rational::zero(),
                    (Some((l, false)), _) => l,
                    (Some((l, true)), None) => l + Rational::one(),
                    (Some((l, true)), Some((h, _))) => (l + h) / Rational::from_int(2),
                    (None, Some((h, false))) => h,
                    (None, Some((h, true))) => h - Rational::one(),
                };
            }
            Elim::Subst { var, row, rhs } => {
                let rest = eval_row(row, &x, *var);
                x[*var] = (rhs - rest) / &row[*var];
            }
        }
    }
    debug_assert!(sys.satisfied_by(&x), "back-substitution produced a non-solution");
    if sys.satisfied_by(&x) {
        Some(x)
    } else {
        None
    }
}

/// `solve`, but first tries a candidate assignment.
pub fn solve_with_hint(sys: &LinearSystem, hint: Option<&[Rational]>) -> Option<Vec<Rational>> {
    if let Some(h) = hint {
        if sys.satisfied_by(h) {
            return Some(h.to_vec());
        }
    }
    solve(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from_int(n)
    }

    #[test]
    fn strict_pair_is_infeasible() {
        let mut s = LinearSystem::new();
        let x = s.add_var("x");
        s.add(&Affine::var(x), Cmp::Lt, &Affine::constant(r(1)));
        s.add_ge(&Affine::var(x), false, &Affine::constant(r(1)));
        assert!(solve(&s).is_none());
    }

    #[test]
    fn open_interval_has_interior_witness() {
        let mut s = LinearSystem::new();
        let x = s.add_var("x");
        let y = s.add_var("y");
        s.add_ge(&Affine::var(x), true, &Affine::constant(r(0)));
        s.add(&Affine::var(x), Cmp::Lt, &Affine::var(y));
        s.add(&Affine::var(y), Cmp::Lt, &Affine::constant(r(1)));
        let sol = solve(&s).unwrap();
        assert!(s.satisfied_by(&sol));
    }

    #[test]
    fn equalities_substitute() {
        let mut s = LinearSystem::new();
        let x = s.add_var("x");
        let y = s.add_var("y");
        let mut e = Affine::var(x);
        e.add_term(y, r(1));
        s.add(&e, Cmp::Eq, &Affine::constant(r(3)));
        s.add(&Affine::var(x), Cmp::Eq, &Affine::constant(r(1)));
        assert_eq!(solve(&s).unwrap(), vec![r(1), r(2)]);
    }
}
