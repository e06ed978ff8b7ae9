//! Gadget factory: arithmetic constraints compiled to clauses by truth-table
//! enumeration, little-endian counters, and the independent-set gadgets
//! (variable, clause and counting gadgets).

use std::ops::Range;

use crate::error::{Error, Result};
use crate::instances::{Clause, Literal, UGraph};

/// Default cap on the number of variables a single constraint may range over.
pub const DEFAULT_SCOPE_CAP: usize = 24;

/// Smallest `m` with `2^m >= n + 1`, i.e. the bit width needed to count to `n`.
pub fn bits_for(n: u64) -> usize {
    (64 - n.leading_zeros()) as usize
}

/// Ordered little-endian group of boolean variables: bit `j` weighs `2^j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarGroup {
    pub bits: Vec<usize>,
    pub role: String,
}

impl VarGroup {
    pub fn new(bits: Vec<usize>, role: impl Into<String>) -> Self {
        VarGroup {
            bits,
            role: role.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn value(&self, assignment: &[bool]) -> u64 {
        little_endian(self.bits.iter().map(|&v| assignment[v]))
    }
}

pub fn little_endian(bits: impl IntoIterator<Item = bool>) -> u64 {
    bits.into_iter()
        .enumerate()
        .fold(0, |acc, (j, b)| acc | (u64::from(b) << j))
}

/// Relation a constraint enforces. Operands are little-endian variable lists.
#[derive(Debug, Clone)]
pub enum Predicate {
    /// `(sum) = (left) + scale * (right)`.
    EqSum {
        sum: Vec<usize>,
        left: Vec<usize>,
        right: Vec<usize>,
        scale: u64,
    },
    /// `(target) = (source)`; a shorter operand reads as zero-padded.
    Eq { target: Vec<usize>, source: Vec<usize> },
    /// `(bits) >= bound`.
    AtLeast { bits: Vec<usize>, bound: u64 },
    /// `(left) + (right) <= bound`.
    SumAtMost {
        left: Vec<usize>,
        right: Vec<usize>,
        bound: u64,
    },
    /// Arbitrary relation; `accept[r]` for the row whose little-endian code
    /// over `scope` is `r`.
    Table { scope: Vec<usize>, accept: Vec<bool> },
}

/// A constraint ready for compilation.
#[derive(Debug, Clone)]
pub struct ConstraintSpec {
    pub predicate: Predicate,
}

impl ConstraintSpec {
    pub fn eq_sum(sum: &[usize], left: &[usize], right: &[usize]) -> Self {
        Self::eq_sum_scaled(sum, left, right, 1)
    }

    pub fn eq_sum_scaled(sum: &[usize], left: &[usize], right: &[usize], scale: u64) -> Self {
        ConstraintSpec {
            predicate: Predicate::EqSum {
                sum: sum.to_vec(),
                left: left.to_vec(),
                right: right.to_vec(),
                scale,
            },
        }
    }

    pub fn eq(target: &[usize], source: &[usize]) -> Self {
        ConstraintSpec {
            predicate: Predicate::Eq {
                target: target.to_vec(),
                source: source.to_vec(),
            },
        }
    }

    pub fn at_least(bits: &[usize], bound: u64) -> Self {
        ConstraintSpec {
            predicate: Predicate::AtLeast {
                bits: bits.to_vec(),
                bound,
            },
        }
    }

    pub fn sum_at_most(left: &[usize], right: &[usize], bound: u64) -> Self {
        ConstraintSpec {
            predicate: Predicate::SumAtMost {
                left: left.to_vec(),
                right: right.to_vec(),
                bound,
            },
        }
    }

    /// Relation given by a function over the values of `scope`, in order.
    pub fn from_fn(scope: &[usize], f: impl Fn(&[bool]) -> bool) -> Self {
        let n = scope.len();
        let mut row = vec![false; n];
        let accept = (0..1u64 << n)
            .map(|r| {
                for (j, b) in row.iter_mut().enumerate() {
                    *b = r >> j & 1 == 1;
                }
                f(&row)
            })
            .collect();
        ConstraintSpec {
            predicate: Predicate::Table {
                scope: scope.to_vec(),
                accept,
            },
        }
    }

    /// Variables the constraint ranges over, in a fixed order.
    pub fn scope(&self) -> Vec<usize> {
        match &self.predicate {
            Predicate::EqSum {
                sum, left, right, ..
            } => [left.as_slice(), right, sum].concat(),
            Predicate::Eq { target, source } => [source.as_slice(), target].concat(),
            Predicate::AtLeast { bits, .. } => bits.clone(),
            Predicate::SumAtMost { left, right, .. } => [left.as_slice(), right].concat(),
            Predicate::Table { scope, .. } => scope.clone(),
        }
    }

    /// Truth value under a full assignment indexed by variable.
    pub fn holds(&self, assignment: &[bool]) -> bool {
        let val = |bits: &[usize]| little_endian(bits.iter().map(|&v| assignment[v]));
        match &self.predicate {
            Predicate::EqSum {
                sum,
                left,
                right,
                scale,
            } => val(sum) == val(left) + scale * val(right),
            Predicate::Eq { target, source } => val(target) == val(source),
            Predicate::AtLeast { bits, bound } => val(bits) >= *bound,
            Predicate::SumAtMost { left, right, bound } => val(left) + val(right) <= *bound,
            Predicate::Table { scope, accept } => accept[val(scope) as usize],
        }
    }

    /// For functional relations: (inputs, outputs, output value as a function of inputs).
    fn functional(&self) -> Option<(Vec<usize>, Vec<usize>, Box<dyn Fn(u64) -> u64 + '_>)> {
        match &self.predicate {
            Predicate::EqSum {
                sum,
                left,
                right,
                scale,
            } => {
                let nl = left.len();
                let mask = (1u64 << nl) - 1;
                let scale = *scale;
                Some((
                    [left.as_slice(), right].concat(),
                    sum.clone(),
                    Box::new(move |row| (row & mask) + scale * (row >> nl)),
                ))
            }
            Predicate::Eq { target, source } => {
                Some((source.clone(), target.clone(), Box::new(|row| row)))
            }
            _ => None,
        }
    }
}

fn row_blocker(vars: &[usize], row: u64) -> Vec<Literal> {
    vars.iter()
        .enumerate()
        .map(|(j, &v)| Literal::new(v, row >> j & 1 == 0))
        .collect()
}

pub fn compile_constraint(spec: &ConstraintSpec) -> Result<Vec<Clause>> {
    compile_constraint_with_cap(spec, DEFAULT_SCOPE_CAP)
}

/// Compiles a constraint to clauses over its scope by truth-table enumeration.
///
/// Functional relations (`EqSum`, `Eq`) emit, for every input row, one clause
/// per output bit fixing that bit, and a blocking clause over the inputs when
/// the row has no representable output. Other relations emit one blocking
/// clause per falsifying row of the whole scope.
pub fn compile_constraint_with_cap(spec: &ConstraintSpec, cap: usize) -> Result<Vec<Clause>> {
    let scope = spec.scope();
    if scope.len() > cap {
        return Err(Error::ScopeTooLarge {
            scope: scope.len(),
            cap,
        });
    }
    let mut sorted = scope.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Gadget(format!(
            "constraint scope repeats a variable: {scope:?}"
        )));
    }
    let mut clauses = Vec::new();
    if let Some((inputs, outputs, f)) = spec.functional() {
        let limit = 1u64 << outputs.len();
        for row in 0..1u64 << inputs.len() {
            let blocker = row_blocker(&inputs, row);
            let out = f(row);
            if out >= limit {
                clauses.push(Clause::new(blocker));
                continue;
            }
            for (j, &o) in outputs.iter().enumerate() {
                let mut lits = blocker.clone();
                lits.push(Literal::new(o, out >> j & 1 == 1));
                clauses.push(Clause::new(lits));
            }
        }
    } else {
        let mut assignment = vec![false; sorted.last().map_or(0, |&v| v + 1)];
        for row in 0..1u64 << scope.len() {
            for (j, &v) in scope.iter().enumerate() {
                assignment[v] = row >> j & 1 == 1;
            }
            if !spec.holds(&assignment) {
                clauses.push(Clause::new(row_blocker(&scope, row)));
            }
        }
    }
    Ok(clauses)
}

/// Counts of gadgets added; their sum is the independent-set target.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Census {
    pub variable: usize,
    pub clause: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.variable + self.clause
    }
}

impl std::ops::Sub for Census {
    type Output = Census;
    fn sub(self, o: Census) -> Census {
        Census {
            variable: self.variable - o.variable,
            clause: self.clause - o.clause,
        }
    }
}

/// Two adjacent vertices; selecting `pos` means true, `neg` means false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarGadget {
    pub pos: usize,
    pub neg: usize,
}

impl VarGadget {
    /// Vertex whose selection makes the literal with this polarity true.
    pub fn port(self, positive: bool) -> usize {
        if positive {
            self.pos
        } else {
            self.neg
        }
    }
}

/// A literal over a variable gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortLit {
    pub gadget: VarGadget,
    pub positive: bool,
}

impl PortLit {
    pub fn new(gadget: VarGadget, positive: bool) -> Self {
        PortLit { gadget, positive }
    }

    /// The vertex a clause-gadget vertex for this literal is joined to.
    pub fn complement(self) -> usize {
        self.gadget.port(!self.positive)
    }
}

/// What one builder call added.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub vertices: Range<usize>,
    pub edges: usize,
    pub census: Census,
    /// Vertex sets of the clause gadgets added.
    pub clauses: Vec<Vec<usize>>,
}

/// One layer of a counting gadget: the watched-copy bit `y` and the running
/// count `s` before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingLayer {
    pub y: VarGadget,
    pub count: Vec<VarGadget>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingGadget {
    pub layers: Vec<CountingLayer>,
    /// Unit clause gadgets zeroing the first count.
    pub units: Vec<Vec<usize>>,
    /// Adder clause gadgets between layer `a` and the next one.
    pub adders: Vec<Vec<Vec<usize>>>,
    /// Final count; its value bounds the number of selected watched vertices.
    pub last: Vec<VarGadget>,
    pub fragment: Fragment,
}

/// Incrementally builds an independent-set instance out of gadgets. Every
/// gadget is a clique, so the gadgets partition the vertex set into cliques.
#[derive(Debug, Clone, Default)]
pub struct IsBuilder {
    graph: UGraph,
    census: Census,
    is_var_vertex: Vec<bool>,
    parts: Vec<Vec<usize>>,
    scope_cap: Option<usize>,
}

/// Finished independent-set instance plus its gadget partition.
#[derive(Debug, Clone)]
pub struct IsInstance {
    pub graph: UGraph,
    pub census: Census,
    /// One clique per gadget, in creation order.
    pub parts: Vec<Vec<usize>>,
    /// Whether each part is a variable gadget (else a clause gadget).
    pub variable_part: Vec<bool>,
}

impl IsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_scope_cap(mut self, cap: usize) -> Self {
        self.scope_cap = Some(cap);
        self
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices
    }

    pub fn census(&self) -> Census {
        self.census
    }

    pub fn graph(&self) -> &UGraph {
        &self.graph
    }

    fn mark(&self) -> (usize, usize, Census) {
        (self.graph.num_vertices, self.graph.num_edges(), self.census)
    }

    fn fragment(&self, mark: (usize, usize, Census)) -> Fragment {
        let clauses = self
            .parts
            .iter()
            .rev()
            .take_while(|p| p[0] >= mark.0)
            .filter(|p| !self.is_var_vertex[p[0]])
            .cloned()
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        Fragment {
            vertices: mark.0..self.graph.num_vertices,
            edges: self.graph.num_edges() - mark.1,
            census: self.census - mark.2,
            clauses,
        }
    }

    fn vertex(&mut self, var_side: bool) -> usize {
        self.is_var_vertex.push(var_side);
        self.graph.add_vertex()
    }

    pub fn edge(&mut self, u: usize, v: usize) -> Result<()> {
        self.graph.add_edge(u, v).map(|_| ())
    }

    pub fn variable_gadget(&mut self) -> VarGadget {
        let pos = self.vertex(true);
        let neg = self.vertex(true);
        self.graph.add_edge(pos, neg).expect("fresh vertices");
        self.census.variable += 1;
        self.parts.push(vec![pos, neg]);
        VarGadget { pos, neg }
    }

    /// `d`-clique whose `t`-th vertex is adjacent to the complement port of literal `t`.
    pub fn clause_gadget(&mut self, lits: &[PortLit]) -> Result<Fragment> {
        if lits.is_empty() {
            return Err(Error::Gadget("clause gadget needs at least one literal".into()));
        }
        for l in lits {
            for v in [l.gadget.pos, l.gadget.neg] {
                if !self.is_var_vertex.get(v).copied().unwrap_or(false) {
                    return Err(Error::Gadget(format!(
                        "port {v} is not a variable-gadget vertex"
                    )));
                }
            }
            if !self.graph.has_edge(l.gadget.pos, l.gadget.neg) {
                return Err(Error::Gadget(format!(
                    "ports {} and {} do not form a variable gadget",
                    l.gadget.pos, l.gadget.neg
                )));
            }
        }
        let mark = self.mark();
        let cs: Vec<usize> = lits.iter().map(|_| self.vertex(false)).collect();
        for (i, &a) in cs.iter().enumerate() {
            for &b in &cs[i + 1..] {
                self.graph.add_edge(a, b)?;
            }
        }
        for (&c, l) in cs.iter().zip(lits) {
            self.graph.add_edge(c, l.complement())?;
        }
        self.census.clause += 1;
        self.parts.push(cs);
        Ok(self.fragment(mark))
    }

    /// Realizes a constraint over variable gadgets as clause gadgets, one per
    /// compiled clause. Scope variables of `spec` index into `gadgets`.
    pub fn constraint(&mut self, spec: &ConstraintSpec, gadgets: &[VarGadget]) -> Result<Fragment> {
        let clauses = compile_constraint_with_cap(spec, self.scope_cap.unwrap_or(DEFAULT_SCOPE_CAP))?;
        let mark = self.mark();
        for c in clauses {
            let lits: Vec<PortLit> = c
                .lits
                .iter()
                .map(|l| {
                    gadgets
                        .get(l.var)
                        .map(|&g| PortLit::new(g, !l.negated))
                        .ok_or_else(|| Error::Gadget(format!("constraint names unknown gadget {}", l.var)))
                })
                .collect::<Result<_>>()?;
            self.clause_gadget(&lits)?;
        }
        Ok(self.fragment(mark))
    }

    /// Counting gadget over watched vertices `u_1..u_d` with `m`-bit counters.
    ///
    /// Layer `a` holds `y_a` and the running count `s_a`; unit clause gadgets
    /// force `s_1 = 0`, adder constraints force `s_{a+1} = s_a + y_a`, and an
    /// edge `u_a - neg(y_a)` forces `y_a` whenever `u_a` is selected.
    pub fn counting_gadget(&mut self, watched: &[usize], m: usize) -> Result<CountingGadget> {
        let d = watched.len();
        if bits_for(d as u64) > m {
            return Err(Error::Gadget(format!(
                "{m}-bit counter cannot count to {d}"
            )));
        }
        if let Some(&u) = watched.iter().find(|&&u| u >= self.graph.num_vertices) {
            return Err(Error::UnknownVertex(u));
        }
        let mark = self.mark();
        let mut layers = Vec::with_capacity(d);
        let mut first: Option<Vec<VarGadget>> = None;
        for &u in watched {
            let y = self.variable_gadget();
            let count: Vec<VarGadget> = (0..m).map(|_| self.variable_gadget()).collect();
            if first.is_none() {
                first = Some(count.clone());
            }
            self.graph.add_edge(u, y.neg)?;
            layers.push(CountingLayer { y, count });
        }
        let last: Vec<VarGadget> = (0..m).map(|_| self.variable_gadget()).collect();
        let mut units = Vec::with_capacity(m);
        for g in first.as_ref().unwrap_or(&last).clone() {
            units.extend(self.clause_gadget(&[PortLit::new(g, false)])?.clauses);
        }
        let mut adders = Vec::with_capacity(d);
        for a in 0..d {
            let next = layers.get(a + 1).map_or(&last, |l| &l.count).clone();
            let mut local: Vec<VarGadget> = layers[a].count.clone();
            local.push(layers[a].y);
            local.extend(next);
            let s: Vec<usize> = (0..m).collect();
            let sum: Vec<usize> = (m + 1..2 * m + 1).collect();
            adders.push(
                self.constraint(&ConstraintSpec::eq_sum(&sum, &s, &[m]), &local)?
                    .clauses,
            );
        }
        Ok(CountingGadget {
            layers,
            units,
            adders,
            last,
            fragment: self.fragment(mark),
        })
    }

    pub fn finish(self) -> IsInstance {
        let k = self.census.total() as u64;
        let variable_part = self.parts.iter().map(|p| self.is_var_vertex[p[0]]).collect();
        IsInstance {
            graph: self.graph.with_target(k),
            census: self.census,
            parts: self.parts,
            variable_part,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn clause_set(cs: &[Clause]) -> BTreeSet<Vec<i64>> {
        cs.iter()
            .map(|c| {
                let mut v: Vec<i64> = c.lits.iter().map(|l| l.to_dimacs()).collect();
                v.sort_unstable();
                v
            })
            .collect()
    }

    fn satisfied(cs: &[Clause], a: &[bool]) -> bool {
        cs.iter().all(|c| c.is_satisfied(a))
    }

    #[test]
    fn eq_two_clauses() {
        let cs = compile_constraint(&ConstraintSpec::eq(&[0], &[1])).unwrap();
        assert_eq!(clause_set(&cs), BTreeSet::from([vec![-2, 1], vec![-1, 2]]));
    }

    #[test]
    fn geq_one_is_unit() {
        let cs = compile_constraint(&ConstraintSpec::at_least(&[0], 1)).unwrap();
        assert_eq!(clause_set(&cs), BTreeSet::from([vec![1]]));
    }

    #[test]
    fn eq_sum_two_bits_exhaustive() {
        let spec = ConstraintSpec::eq_sum(&[4, 5], &[0, 1], &[2, 3]);
        let cs = compile_constraint(&spec).unwrap();
        assert!(cs.len() <= 64);
        let mut sat_rows = 0;
        for row in 0u32..64 {
            let a: Vec<bool> = (0..6).map(|j| row >> j & 1 == 1).collect();
            let l = u32::from(a[0]) + 2 * u32::from(a[1]);
            let r = u32::from(a[2]) + 2 * u32::from(a[3]);
            let s = u32::from(a[4]) + 2 * u32::from(a[5]);
            let truth = s == l + r;
            sat_rows += usize::from(truth);
            assert_eq!(satisfied(&cs, &a), truth, "row {row:06b}");
        }
        assert_eq!(sat_rows, 10);
    }

    #[test]
    fn scope_cap_and_duplicates() {
        let bits: Vec<usize> = (0..25).collect();
        assert_eq!(
            compile_constraint(&ConstraintSpec::at_least(&bits, 1)).unwrap_err(),
            Error::ScopeTooLarge { scope: 25, cap: 24 }
        );
        assert!(compile_constraint(&ConstraintSpec::eq(&[0], &[0])).is_err());
    }

    fn spec_strategy() -> impl Strategy<Value = ConstraintSpec> {
        let perm = Just((0..12usize).collect::<Vec<_>>()).prop_shuffle();
        (0usize..5, 1usize..4, 0u64..16, perm, any::<u64>()).prop_map(|(kind, m, bound, vars, seed)| {
            let a = &vars[..m];
            let b = &vars[m..2 * m];
            let c = &vars[2 * m..3 * m + 1];
            match kind {
                0 => ConstraintSpec::eq_sum(c, a, b),
                1 => ConstraintSpec::eq(b, a),
                2 => ConstraintSpec::at_least(a, bound),
                3 => ConstraintSpec::sum_at_most(a, b, bound),
                _ => ConstraintSpec::from_fn(&vars[..2 * m], |row| {
                    let r = little_endian(row.iter().copied());
                    seed >> (r % 64) & 1 == 1
                }),
            }
        })
    }

    proptest! {
        #[test]
        fn compile_roundtrip(spec in spec_strategy()) {
            let cs = compile_constraint(&spec).unwrap();
            let scope = spec.scope();
            prop_assert!(cs.len() <= 1 << scope.len());
            for c in &cs {
                prop_assert!(c.lits.iter().all(|l| scope.contains(&l.var)));
            }
            let mut a = vec![false; 12];
            for row in 0u64..1 << scope.len() {
                for (j, &v) in scope.iter().enumerate() {
                    a[v] = row >> j & 1 == 1;
                }
                prop_assert_eq!(satisfied(&cs, &a), spec.holds(&a));
            }
        }
    }

    #[test]
    fn variable_gadgets_are_disjoint() {
        let mut b = IsBuilder::new();
        let g = b.variable_gadget();
        let h = b.variable_gadget();
        assert_ne!(g.pos, g.neg);
        assert!(b.graph().has_edge(g.pos, g.neg));
        let all: BTreeSet<usize> = [g.pos, g.neg, h.pos, h.neg].into();
        assert_eq!(all.len(), 4);
        assert_eq!(b.census(), Census { variable: 2, clause: 0 });
    }

    #[test]
    fn clause_gadget_wiring() {
        let mut b = IsBuilder::new();
        let x: Vec<VarGadget> = (0..3).map(|_| b.variable_gadget()).collect();
        let f = b
            .clause_gadget(&[
                PortLit::new(x[0], false),
                PortLit::new(x[1], true),
                PortLit::new(x[2], true),
            ])
            .unwrap();
        let c: Vec<usize> = f.vertices.clone().collect();
        assert_eq!(c.len(), 3);
        assert_eq!(f.census, Census { variable: 0, clause: 1 });
        assert_eq!(f.edges, 6);
        assert!(b.graph().has_edge(c[0], x[0].pos));
        assert!(b.graph().has_edge(c[1], x[1].neg));
        assert!(b.graph().has_edge(c[2], x[2].neg));
        assert!(b.graph().has_edge(c[0], c[2]));
    }

    #[test]
    fn clause_gadget_rejects_dangling_ports() {
        let mut b = IsBuilder::new();
        let fake = VarGadget { pos: 0, neg: 1 };
        assert!(b.clause_gadget(&[PortLit::new(fake, true)]).is_err());
        let g = b.variable_gadget();
        b.clause_gadget(&[PortLit::new(g, true)]).unwrap();
        let clause_vertex = 2;
        let bad = VarGadget { pos: g.pos, neg: clause_vertex };
        assert!(b.clause_gadget(&[PortLit::new(bad, true)]).is_err());
        assert!(b.clause_gadget(&[]).is_err());
    }

    #[test]
    fn counting_gadget_shape() {
        let mut b = IsBuilder::new();
        let cg = b.counting_gadget(&[], 2).unwrap();
        assert!(cg.layers.is_empty());
        assert_eq!(cg.last.len(), 2);
        assert_eq!(cg.fragment.census, Census { variable: 2, clause: 2 });
        assert!(b.counting_gadget(&[0, 1, 2, 3], 2).is_err());
    }
}
