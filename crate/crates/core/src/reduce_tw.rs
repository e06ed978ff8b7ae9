//! Tree-width preserving reductions between Max 2-SAT, SAT, 3-SAT and
//! Independent Set. Each returns the target instance together with a width
//! certificate built from an explicit elimination schedule.

use std::collections::BTreeMap;
use std::fmt;

use crate::decomp::{td_from_schedule, EliminationSchedule, EliminationStep, PathSweep};
use crate::error::{Error, Result};
use crate::gadgets::{
    bits_for, compile_constraint, Census, ConstraintSpec, CountingGadget, Fragment, IsBuilder,
    PortLit, VarGadget,
};
use crate::instances::{
    primal_graph, validate_decomposition, validate_nice, Clause, CnfInstance, Literal, NiceTarget,
    NodeKind, TreeDecomposition, UGraph,
};

/// Reduced instance.
#[derive(Debug, Clone)]
pub enum Target {
    Cnf(CnfInstance),
    Graph(UGraph),
}

impl Target {
    /// Graph the certificate must decompose: the primal graph or the graph itself.
    pub fn structure(&self) -> UGraph {
        match self {
            Target::Cnf(c) => primal_graph(c),
            Target::Graph(g) => g.clone(),
        }
    }

    pub fn as_cnf(&self) -> Option<&CnfInstance> {
        match self {
            Target::Cnf(c) => Some(c),
            Target::Graph(_) => None,
        }
    }

    pub fn as_graph(&self) -> Option<&UGraph> {
        match self {
            Target::Graph(g) => Some(g),
            Target::Cnf(_) => None,
        }
    }
}

/// Claimed certificate width `input_width + c * log_term + additive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WidthBound {
    pub formula: &'static str,
    pub input_width: usize,
    pub log_term: usize,
    pub c: usize,
    pub additive: usize,
}

impl WidthBound {
    pub fn value(&self) -> usize {
        self.input_width + self.c * self.log_term + self.additive
    }
}

impl fmt::Display for WidthBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {} + {}*{} + {} = {}",
            self.formula,
            self.input_width,
            self.c,
            self.log_term,
            self.additive,
            self.value()
        )
    }
}

/// How the source answer reads off the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerMap {
    /// Some assignment satisfies clauses of weight >= k iff the target is satisfiable.
    MaxAtLeastIffSat { k: u64 },
    /// Source and target are equisatisfiable.
    Equisatisfiable,
    /// Source satisfiable iff the target graph has an independent set of size k.
    SatIffIndependentSet { k: u64 },
    /// Source graph has an independent set of size k iff weight >= k' is reachable.
    IndependentSetIffMaxAtLeast { k: u64, k_prime: u64 },
    /// Source graph has an independent set of size k iff the target is satisfiable.
    IndependentSetIffSat { k: u64 },
    /// Some certificate makes the machine accept iff the target is satisfiable.
    AcceptIffSat,
}

impl fmt::Display for AnswerMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerMap::MaxAtLeastIffSat { k } => {
                write!(f, "source satisfies >= {k} clauses <=> target satisfiable")
            }
            AnswerMap::Equisatisfiable => write!(f, "source satisfiable <=> target satisfiable"),
            AnswerMap::SatIffIndependentSet { k } => {
                write!(f, "source satisfiable <=> target has an independent set of size {k}")
            }
            AnswerMap::IndependentSetIffMaxAtLeast { k, k_prime } => write!(
                f,
                "source has an independent set of size {k} <=> target satisfies >= {k_prime} clauses"
            ),
            AnswerMap::IndependentSetIffSat { k } => write!(
                f,
                "source has an independent set of size {k} <=> target satisfiable"
            ),
            AnswerMap::AcceptIffSat => write!(f, "some certificate is accepted <=> target satisfiable"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReductionOutput {
    pub instance: Target,
    pub certificate: TreeDecomposition,
    pub bound: WidthBound,
    /// Present when the input decomposition was a path.
    pub path_certificate: Option<TreeDecomposition>,
    pub path_bound: Option<WidthBound>,
    pub answer_map: AnswerMap,
    pub schedule: EliminationSchedule,
    /// Deterministic `{node}:{role}:{index}` name per target variable or vertex.
    pub names: Vec<String>,
    pub census: Option<Census>,
    /// Clique partition (one part per gadget) for independent-set targets.
    pub parts: Vec<Vec<usize>>,
}

impl ReductionOutput {
    pub fn realized_width(&self) -> usize {
        self.certificate.width()
    }

    pub fn target_k(&self) -> Option<u64> {
        match self.answer_map {
            AnswerMap::MaxAtLeastIffSat { .. }
            | AnswerMap::Equisatisfiable
            | AnswerMap::IndependentSetIffSat { .. }
            | AnswerMap::AcceptIffSat => None,
            AnswerMap::SatIffIndependentSet { k } => Some(k),
            AnswerMap::IndependentSetIffMaxAtLeast { k_prime, .. } => Some(k_prime),
        }
    }
}

/// Accumulates variables (with names) and clauses.
#[derive(Debug, Default)]
pub(crate) struct CnfBuilder {
    names: Vec<String>,
    clauses: Vec<Clause>,
}

impl CnfBuilder {
    pub(crate) fn var(&mut self, name: String) -> usize {
        self.names.push(name);
        self.names.len() - 1
    }

    fn vars(&mut self, node: usize, role: &str, count: usize) -> Vec<usize> {
        (0..count)
            .map(|j| self.var(format!("{node}:{role}:{j}")))
            .collect()
    }

    pub(crate) fn clause(&mut self, lits: Vec<Literal>) {
        self.clauses.push(Clause::new(lits));
    }

    pub(crate) fn constraint(&mut self, spec: &ConstraintSpec) -> Result<()> {
        self.clauses.extend(compile_constraint(spec)?);
        Ok(())
    }

    pub(crate) fn equal(&mut self, a: usize, b: usize) {
        self.clause(vec![Literal::neg(a), Literal::pos(b)]);
        self.clause(vec![Literal::pos(a), Literal::neg(b)]);
    }

    pub(crate) fn finish(self) -> (CnfInstance, Vec<String>) {
        (CnfInstance::new(self.names.len(), self.clauses), self.names)
    }
}

fn require_nice(src: &CnfInstance, ntd: &TreeDecomposition) -> Result<()> {
    src.validate_clauses()?;
    let report = validate_nice(NiceTarget::Cnf(src), ntd);
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::InvalidDecomposition(format!(
            "not a nice decomposition of the primal graph: {}",
            report.violations[0]
        )))
    }
}

fn is_path_shaped(td: &TreeDecomposition) -> bool {
    td.nodes.iter().all(|n| n.children.len() <= 1)
}

pub(crate) fn certify(structure: &UGraph, schedule: &EliminationSchedule, tail: &TreeDecomposition) -> Result<TreeDecomposition> {
    let td = td_from_schedule(structure, schedule, tail)?;
    debug_assert!(validate_decomposition(structure, &td).is_valid());
    Ok(td)
}

/// Max 2-SAT (clauses of length 1 or 2, target `k`) to SAT.
///
/// Every node `i` of the nice decomposition gets copies `x_i` of its bag
/// variables, an `M`-bit counter `s_i` holding the weight satisfied inside
/// the subtree, and at clause-introducing nodes an indicator `w_i` of that
/// clause. Copies agree along arcs; the root counter must reach `k`.
/// `M` is the bit width of the total multiplicity; a clause of multiplicity
/// `mu` adds `mu * w_i` to the counter.
pub fn max2sat_to_sat(src: &CnfInstance, ntd: &TreeDecomposition) -> Result<ReductionOutput> {
    if let Some((ci, c)) = src.clauses.iter().enumerate().find(|(_, c)| c.len() > 2) {
        return Err(Error::InvalidInstance(format!(
            "clause {ci} has {} literals; Max 2-SAT allows at most 2",
            c.len()
        )));
    }
    let k = src
        .target
        .ok_or_else(|| Error::InvalidInstance("Max 2-SAT instance needs a target k".into()))?;
    require_nice(src, ntd)?;
    let width = ntd.width();
    let m = bits_for(src.total_weight()).max(1);
    let parents = ntd.parents();
    let order = ntd.post_order();

    let mut b = CnfBuilder::default();
    let mut copies: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); ntd.nodes.len()];
    let mut counters: Vec<Vec<usize>> = vec![Vec::new(); ntd.nodes.len()];
    let mut indicator: Vec<Option<usize>> = vec![None; ntd.nodes.len()];
    for &i in &order {
        let node = &ntd.nodes[i];
        for &x in &node.bag {
            let v = b.var(format!("{i}:x:{x}"));
            copies[i].insert(x, v);
        }
        counters[i] = b.vars(i, "s", m);
        if let NodeKind::IntroduceClause(_) = node.kind {
            indicator[i] = Some(b.var(format!("{i}:w:0")));
        }
        for &c in &node.children {
            for (x, &vc) in &copies[c] {
                if let Some(&vi) = copies[i].get(x) {
                    b.equal(vc, vi);
                }
            }
        }
        let s = counters[i].clone();
        match node.kind {
            NodeKind::Leaf => {
                for &bit in &s {
                    b.clause(vec![Literal::neg(bit)]);
                }
            }
            NodeKind::IntroduceVertex(_) | NodeKind::Forget(_) => {
                b.constraint(&ConstraintSpec::eq(&s, &counters[node.children[0]]))?;
            }
            NodeKind::IntroduceClause(ci) => {
                let clause = &src.clauses[ci];
                let w = indicator[i].expect("created above");
                let mut scope = vec![w];
                for x in clause.vars() {
                    scope.push(copies[i][&x]);
                }
                let lits: Vec<(usize, bool)> = clause
                    .lits
                    .iter()
                    .map(|l| (scope.iter().position(|&v| v == copies[i][&l.var]).unwrap(), l.negated))
                    .collect();
                b.constraint(&ConstraintSpec::from_fn(&scope, |row| {
                    row[0] == lits.iter().any(|&(pos, neg)| row[pos] != neg)
                }))?;
                b.constraint(&ConstraintSpec::eq_sum_scaled(
                    &s,
                    &counters[node.children[0]],
                    &[w],
                    clause.multiplicity,
                ))?;
            }
            NodeKind::Join => {
                b.constraint(&ConstraintSpec::eq_sum(
                    &s,
                    &counters[node.children[0]],
                    &counters[node.children[1]],
                ))?;
            }
            NodeKind::Plain => unreachable!("validated nice"),
        }
    }
    b.constraint(&ConstraintSpec::at_least(&counters[ntd.root], k))?;
    let (cnf, names) = b.finish();

    let bound = WidthBound {
        formula: "w + c*M",
        input_width: width,
        log_term: m,
        c: 3,
        additive: 1,
    };
    let claimed = bound.value();
    let mut schedule = EliminationSchedule::new();
    for &i in &order {
        let own: Vec<usize> = copies[i].values().copied().collect();
        let mut state = counters[i].clone();
        state.extend(indicator[i]);
        match parents[i] {
            Some(p) => {
                let up: Vec<usize> = copies[p].values().copied().collect();
                schedule.push(EliminationStep::matching(own, up, claimed));
                schedule.push(EliminationStep::subset(state, claimed));
            }
            None => {
                state.extend(own);
                schedule.push(EliminationStep::subset(state, claimed));
            }
        }
    }
    let structure = primal_graph(&cnf);
    let certificate = certify(&structure, &schedule, &TreeDecomposition::single_bag(vec![]))?;

    let (path_certificate, path_bound) = if is_path_shaped(ntd) {
        let mut sw = PathSweep::new();
        for &i in &order {
            let node = &ntd.nodes[i];
            sw.introduce_all(counters[i].iter().copied());
            sw.introduce_all(indicator[i]);
            match node.children.first() {
                Some(&c) => {
                    for (x, &v) in &copies[c] {
                        if !copies[i].contains_key(x) {
                            sw.forget(v);
                        }
                    }
                    for (x, &v) in &copies[i] {
                        sw.introduce(v);
                        if let Some(&old) = copies[c].get(x) {
                            sw.forget(old);
                        }
                    }
                    sw.forget_all(counters[c].iter().copied());
                    sw.forget_all(indicator[c]);
                }
                None => sw.introduce_all(copies[i].values().copied()),
            }
        }
        let pc = sw.finish();
        debug_assert!(validate_decomposition(&structure, &pc).is_valid());
        let pb = WidthBound {
            formula: "w + c*M",
            input_width: width,
            log_term: m,
            c: 2,
            additive: 3,
        };
        (Some(pc), Some(pb))
    } else {
        (None, None)
    };

    Ok(ReductionOutput {
        instance: Target::Cnf(cnf),
        certificate,
        bound,
        path_certificate,
        path_bound,
        answer_map: AnswerMap::MaxAtLeastIffSat { k },
        schedule,
        names,
        census: None,
        parts: Vec::new(),
    })
}

/// SAT to 3-SAT by chaining: `(l1 v l2 v y1), (-y1 v l3 v y2), ..., (-y_{r-3} v l_{r-1} v l_r)`
/// for every clause of length `r > 3`, with fresh `y` variables numbered after
/// the originals. `td` is any decomposition of the source primal graph; the
/// certificate eliminates each chain as a layered step on top of it.
pub fn sat_to_3sat(src: &CnfInstance, td: &TreeDecomposition) -> Result<ReductionOutput> {
    src.validate()?;
    let report = validate_decomposition(&primal_graph(src), td);
    if !report.is_valid() {
        return Err(Error::InvalidDecomposition(format!(
            "not a decomposition of the primal graph: {}",
            report.violations[0]
        )));
    }
    let width = td.width();
    let mut names: Vec<String> = (0..src.num_vars).map(|v| format!("x:{v}")).collect();
    let mut clauses = Vec::new();
    let mut chains: Vec<(usize, Vec<usize>)> = Vec::new();
    for (ci, c) in src.clauses.iter().enumerate() {
        if c.len() <= 3 {
            clauses.push(c.clone());
            continue;
        }
        let r = c.len();
        let ys: Vec<usize> = (0..r - 3)
            .map(|j| {
                names.push(format!("c{ci}:y:{j}"));
                names.len() - 1
            })
            .collect();
        let l = &c.lits;
        clauses.push(Clause::weighted(vec![l[0], l[1], Literal::pos(ys[0])], c.multiplicity));
        for j in 1..r - 3 {
            clauses.push(Clause::weighted(
                vec![Literal::neg(ys[j - 1]), l[j + 1], Literal::pos(ys[j])],
                c.multiplicity,
            ));
        }
        clauses.push(Clause::weighted(
            vec![Literal::neg(ys[r - 4]), l[r - 2], l[r - 1]],
            c.multiplicity,
        ));
        chains.push((ci, ys));
    }
    let mut cnf = CnfInstance::new(names.len(), clauses).with_max_clause_len(3);
    cnf.target = src.target;

    let bound = WidthBound {
        formula: "w + 2",
        input_width: width,
        log_term: 0,
        c: 0,
        additive: 2,
    };
    let mut schedule = EliminationSchedule::new();
    for (_, ys) in &chains {
        schedule.push(EliminationStep::layered(
            ys.iter().map(|&y| vec![y]).collect(),
            bound.value(),
        ));
    }
    let structure = primal_graph(&cnf);
    let mut tail = td.clone();
    for n in &mut tail.nodes {
        n.kind = NodeKind::Plain;
    }
    tail.is_nice = false;
    let certificate = certify(&structure, &schedule, &tail)?;

    let (path_certificate, path_bound) = if is_path_shaped(td) {
        // Each chain sweeps alongside the first bag holding its clause.
        let order = path_order(td);
        let mut host: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (idx, (ci, _)) in chains.iter().enumerate() {
            let vars = src.clauses[*ci].vars();
            let at = order
                .iter()
                .copied()
                .find(|&i| vars.iter().all(|&v| td.nodes[i].contains(v)))
                .ok_or_else(|| Error::InvalidDecomposition(format!("clause {ci} fits no bag")))?;
            host.entry(at).or_default().push(idx);
        }
        let mut sw = PathSweep::new();
        for (pos, &i) in order.iter().enumerate() {
            sw.introduce_all(td.nodes[i].bag.iter().copied());
            for &idx in host.get(&i).into_iter().flatten() {
                let ys = &chains[idx].1;
                sw.introduce(ys[0]);
                for w in ys.windows(2) {
                    sw.introduce(w[1]);
                    sw.forget(w[0]);
                }
                sw.forget(*ys.last().expect("non-empty chain"));
            }
            let next = order.get(pos + 1).map(|&n| &td.nodes[n]);
            for &v in &td.nodes[i].bag {
                if next.map_or(true, |n| !n.contains(v)) {
                    sw.forget(v);
                }
            }
        }
        let pc = sw.finish();
        debug_assert!(validate_decomposition(&structure, &pc).is_valid());
        (Some(pc), Some(bound))
    } else {
        (None, None)
    };

    Ok(ReductionOutput {
        instance: Target::Cnf(cnf),
        certificate,
        bound,
        path_certificate,
        path_bound,
        answer_map: AnswerMap::Equisatisfiable,
        schedule,
        names,
        census: None,
        parts: Vec::new(),
    })
}

/// Nodes of a path-shaped decomposition from one end to the other.
pub fn path_order(td: &TreeDecomposition) -> Vec<usize> {
    let mut order = vec![td.root];
    while let Some(&c) = td.nodes[*order.last().expect("non-empty")].children.first() {
        order.push(c);
    }
    order
}

/// Gadgets on the arc from a child `c` to its parent `p`.
#[derive(Debug, Clone)]
pub struct ArcGadgets {
    /// Shared variables `X_c ∩ X_p`, ascending.
    pub shared: Vec<usize>,
    /// Counts the selected true copies `x_c`.
    pub child_count: CountingGadget,
    /// Counts the selected false copies at the parent.
    pub parent_count: CountingGadget,
    /// Clause gadgets bounding the two counts' sum by `|shared|`.
    pub blocking: Fragment,
}

/// Vertex layout of the independent-set instance, per decomposition node.
#[derive(Debug, Clone)]
pub struct IsLayout {
    pub counter_bits: usize,
    /// Variable gadget of each bag variable.
    pub var_gadgets: Vec<BTreeMap<usize, VarGadget>>,
    /// Clause gadget vertices at clause-introducing nodes, one per literal.
    pub clause_gadget: Vec<Option<Vec<usize>>>,
    /// Arc gadgets indexed by the child node.
    pub arcs: Vec<Option<ArcGadgets>>,
}

/// Full result of the 3-SAT to Independent Set construction.
#[derive(Debug, Clone)]
pub struct ThreeSatIs {
    pub output: ReductionOutput,
    pub layout: IsLayout,
}

/// 3-SAT to Independent Set, keeping tree-width within `w + O(log w)`.
///
/// Each node carries a variable gadget per bag variable and, at
/// clause-introducing nodes, a clause gadget. On the arc from `c` to `p`,
/// `neg(x_c)` is adjacent to `pos(x_p)`, so truth propagates downward; two
/// counting gadgets count the true copies below and the false copies above,
/// and blocking gadgets cap their sum at the number of shared variables,
/// which forces the copies to agree. The target size is the gadget census.
pub fn threesat_to_is(src: &CnfInstance, ntd: &TreeDecomposition) -> Result<ReductionOutput> {
    threesat_to_is_layout(src, ntd).map(|r| r.output)
}

pub fn threesat_to_is_layout(src: &CnfInstance, ntd: &TreeDecomposition) -> Result<ThreeSatIs> {
    if let Some((ci, c)) = src.clauses.iter().enumerate().find(|(_, c)| c.len() > 3) {
        return Err(Error::InvalidInstance(format!(
            "clause {ci} has {} literals; 3-SAT allows at most 3",
            c.len()
        )));
    }
    require_nice(src, ntd)?;
    let width = ntd.width();
    let m = bits_for(width as u64 + 1).max(1);
    let n = ntd.nodes.len();
    let order = ntd.post_order();
    let parents = ntd.parents();

    let mut b = IsBuilder::new();
    let mut names: Vec<String> = Vec::new();
    let name_until = |b: &IsBuilder, names: &mut Vec<String>, node: usize, role: &str| {
        let start = names.len();
        for j in 0..b.num_vertices() - start {
            names.push(format!("{node}:{role}:{j}"));
        }
    };
    let mut layout = IsLayout {
        counter_bits: m,
        var_gadgets: vec![BTreeMap::new(); n],
        clause_gadget: vec![None; n],
        arcs: vec![None; n],
    };
    for &i in &order {
        let node = &ntd.nodes[i];
        for &x in &node.bag {
            let g = b.variable_gadget();
            layout.var_gadgets[i].insert(x, g);
        }
        name_until(&b, &mut names, i, "x");
        if let NodeKind::IntroduceClause(ci) = node.kind {
            let lits: Vec<PortLit> = src.clauses[ci]
                .lits
                .iter()
                .map(|l| PortLit::new(layout.var_gadgets[i][&l.var], !l.negated))
                .collect();
            let f = b.clause_gadget(&lits)?;
            layout.clause_gadget[i] = Some(f.vertices.collect());
            name_until(&b, &mut names, i, "c");
        }
        for &c in &node.children {
            let shared: Vec<usize> = node.bag.iter().copied().filter(|&x| ntd.nodes[c].contains(x)).collect();
            for &x in &shared {
                b.edge(layout.var_gadgets[c][&x].neg, layout.var_gadgets[i][&x].pos)?;
            }
            let below: Vec<usize> = shared.iter().map(|x| layout.var_gadgets[c][x].pos).collect();
            let above: Vec<usize> = shared.iter().map(|x| layout.var_gadgets[i][x].neg).collect();
            let child_count = b.counting_gadget(&below, m)?;
            name_until(&b, &mut names, c, "s");
            let parent_count = b.counting_gadget(&above, m)?;
            name_until(&b, &mut names, c, "t");
            let mut local = child_count.last.clone();
            local.extend(parent_count.last.iter().copied());
            let left: Vec<usize> = (0..m).collect();
            let right: Vec<usize> = (m..2 * m).collect();
            let blocking = b.constraint(
                &ConstraintSpec::sum_at_most(&left, &right, shared.len() as u64),
                &local,
            )?;
            name_until(&b, &mut names, c, "b");
            layout.arcs[c] = Some(ArcGadgets {
                shared,
                child_count,
                parent_count,
                blocking,
            });
        }
    }
    let is = b.finish();
    let k = is.census.total() as u64;

    let bound = WidthBound {
        formula: "w + c*ceil(log2(w+2))",
        input_width: width,
        log_term: m,
        c: 8,
        additive: 2,
    };
    let claimed = bound.value();
    let mut schedule = EliminationSchedule::new();
    let source_clauses: std::collections::HashSet<usize> = layout
        .clause_gadget
        .iter()
        .flatten()
        .map(|vs| vs[0])
        .collect();
    for (p, part) in is.parts.iter().enumerate() {
        if !is.variable_part[p] && !source_clauses.contains(&part[0]) {
            schedule.push(EliminationStep::subset(part.clone(), claimed));
        }
    }
    let layers_of = |cg: &CountingGadget| -> Vec<Vec<usize>> {
        cg.layers
            .iter()
            .map(|l| {
                let mut v = vec![l.y.pos, l.y.neg];
                for g in &l.count {
                    v.push(g.pos);
                    v.push(g.neg);
                }
                v
            })
            .collect()
    };
    let sides = |gs: &[VarGadget]| -> Vec<usize> { gs.iter().flat_map(|g| [g.pos, g.neg]).collect() };
    for &i in &order {
        let pos: Vec<usize> = layout.var_gadgets[i].values().map(|g| g.pos).collect();
        let neg: Vec<usize> = layout.var_gadgets[i].values().map(|g| g.neg).collect();
        if let Some(arc) = &layout.arcs[i] {
            schedule.push(EliminationStep::layered(layers_of(&arc.child_count), claimed));
        }
        schedule.push(EliminationStep::matching(pos, neg.clone(), claimed));
        if let Some(cg) = &layout.clause_gadget[i] {
            schedule.push(EliminationStep::subset(cg.clone(), claimed));
        }
        for &c in &ntd.nodes[i].children {
            let arc = layout.arcs[c].as_ref().expect("arc built");
            schedule.push(EliminationStep::layered(layers_of(&arc.parent_count), claimed));
            let mut lasts = sides(&arc.child_count.last);
            lasts.extend(sides(&arc.parent_count.last));
            schedule.push(EliminationStep::subset(lasts, claimed));
        }
        match parents[i] {
            Some(p) => {
                let up: Vec<usize> = layout.var_gadgets[p].values().map(|g| g.pos).collect();
                schedule.push(EliminationStep::matching(neg, up, claimed));
            }
            None => schedule.push(EliminationStep::subset(neg, claimed)),
        }
    }
    let certificate = certify(&is.graph, &schedule, &TreeDecomposition::single_bag(vec![]))?;

    let (path_certificate, path_bound) = if is_path_shaped(ntd) {
        let pc = is_path_sweep(ntd, &order, &layout, &is.graph);
        let pb = WidthBound {
            formula: "w + c*ceil(log2(w+2))",
            input_width: width,
            log_term: m,
            c: 9,
            additive: 6,
        };
        (Some(pc), Some(pb))
    } else {
        (None, None)
    };

    Ok(ThreeSatIs {
        output: ReductionOutput {
            instance: Target::Graph(is.graph),
            certificate,
            bound,
            path_certificate,
            path_bound,
            answer_map: AnswerMap::SatIffIndependentSet { k },
            schedule,
            names,
            census: Some(is.census),
            parts: is.parts,
        },
        layout,
    })
}

fn pass(sw: &mut PathSweep, vs: &[usize]) {
    sw.introduce_all(vs.iter().copied());
    sw.forget_all(vs.iter().copied());
}

fn counting_sweep(sw: &mut PathSweep, cg: &CountingGadget) {
    let layer = |a: usize| -> Vec<usize> {
        match cg.layers.get(a) {
            Some(l) => std::iter::once(l.y)
                .chain(l.count.iter().copied())
                .flat_map(|g| [g.pos, g.neg])
                .collect(),
            None => cg.last.iter().flat_map(|g| [g.pos, g.neg]).collect(),
        }
    };
    sw.introduce_all(layer(0));
    for u in &cg.units {
        pass(sw, u);
    }
    for a in 0..cg.layers.len() {
        sw.introduce_all(layer(a + 1));
        for g in &cg.adders[a] {
            pass(sw, g);
        }
        sw.forget_all(layer(a));
    }
}

/// Path certificate for a path-shaped input: at each node, swap the child's
/// false side for this node's true side, count upward, swap to the false
/// side, then count the child arc from above and close it.
fn is_path_sweep(
    ntd: &TreeDecomposition,
    order: &[usize],
    layout: &IsLayout,
    graph: &UGraph,
) -> TreeDecomposition {
    let mut sw = PathSweep::new();
    let sides = |gs: &[VarGadget]| -> Vec<usize> { gs.iter().flat_map(|g| [g.pos, g.neg]).collect() };
    for &i in order {
        let gadgets = &layout.var_gadgets[i];
        let child = ntd.nodes[i].children.first().copied();
        if let Some(c) = child {
            for (x, g) in &layout.var_gadgets[c] {
                if !gadgets.contains_key(x) {
                    sw.forget(g.neg);
                }
            }
        }
        for (x, g) in gadgets {
            sw.introduce(g.pos);
            if let Some(old) = child.and_then(|c| layout.var_gadgets[c].get(x)) {
                sw.forget(old.neg);
            }
        }
        if let Some(arc) = &layout.arcs[i] {
            counting_sweep(&mut sw, &arc.child_count);
        }
        if let Some(cg) = &layout.clause_gadget[i] {
            sw.introduce_all(cg.iter().copied());
        }
        for g in gadgets.values() {
            sw.introduce(g.neg);
            sw.forget(g.pos);
        }
        if let Some(cg) = &layout.clause_gadget[i] {
            sw.forget_all(cg.iter().copied());
        }
        if let Some(c) = child {
            let arc = layout.arcs[c].as_ref().expect("arc built");
            counting_sweep(&mut sw, &arc.parent_count);
            for g in &arc.blocking.clauses {
                pass(&mut sw, g);
            }
            sw.forget_all(sides(&arc.child_count.last));
            sw.forget_all(sides(&arc.parent_count.last));
        }
        if ntd.root == i {
            sw.forget_all(gadgets.values().map(|g| g.neg));
        }
    }
    let pc = sw.finish();
    debug_assert!(validate_decomposition(graph, &pc).is_valid());
    pc
}

/// Independent Set (target `k`) to Max 2-SAT: a unit clause `(x_v)` per
/// vertex and `(-x_u v -x_v)` with multiplicity `|V| + 1` per edge, with
/// target `|E| (|V| + 1) + k`. The primal graph is the source graph, so any
/// decomposition of it certifies the output unchanged; without one, a single
/// bag holding every vertex is used.
pub fn is_to_max2sat(src: &UGraph, td: Option<&TreeDecomposition>) -> Result<ReductionOutput> {
    let k = src
        .is_target
        .ok_or_else(|| Error::InvalidInstance("independent-set instance needs a target k".into()))?;
    let certificate = match td {
        Some(td) => {
            let report = validate_decomposition(src, td);
            if !report.is_valid() {
                return Err(Error::InvalidDecomposition(format!(
                    "not a decomposition of the graph: {}",
                    report.violations[0]
                )));
            }
            td.clone()
        }
        None => TreeDecomposition::single_bag((0..src.num_vertices).collect()),
    };
    let n = src.num_vertices as u64;
    let mut clauses: Vec<Clause> = (0..src.num_vertices)
        .map(|v| Clause::new(vec![Literal::pos(v)]))
        .collect();
    for (u, v) in src.edges() {
        clauses.push(Clause::weighted(vec![Literal::neg(u), Literal::neg(v)], n + 1));
    }
    let k_prime = src.num_edges() as u64 * (n + 1) + k;
    let cnf = CnfInstance::new(src.num_vertices, clauses)
        .with_target(k_prime)
        .with_max_clause_len(2);
    let bound = WidthBound {
        formula: "w",
        input_width: certificate.width(),
        log_term: 0,
        c: 0,
        additive: 0,
    };
    let path_certificate = is_path_shaped(&certificate).then(|| certificate.clone());
    Ok(ReductionOutput {
        instance: Target::Cnf(cnf),
        path_bound: path_certificate.as_ref().map(|_| bound),
        path_certificate,
        certificate,
        bound,
        answer_map: AnswerMap::IndependentSetIffMaxAtLeast { k, k_prime },
        schedule: EliminationSchedule::new(),
        names: (0..src.num_vertices).map(|v| format!("v:{v}")).collect(),
        census: None,
        parts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{normalize_nice, Shape};
    use crate::oracles::{is_bruteforce, max2sat_bruteforce, sat_bruteforce, sat_decide};

    fn cnf(n: usize, cs: &[&[i64]]) -> CnfInstance {
        CnfInstance::from_dimacs(n, cs).unwrap()
    }

    fn nice_single_bag(f: &CnfInstance) -> TreeDecomposition {
        let td = TreeDecomposition::single_bag((0..f.num_vars).collect());
        normalize_nice(NiceTarget::Cnf(f), &td, Shape::Path).unwrap()
    }

    fn check_certificate(out: &ReductionOutput) {
        let g = out.instance.structure();
        let r = validate_decomposition(&g, &out.certificate);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert!(r.width <= out.bound.value(), "{} > {}", r.width, out.bound);
        if let (Some(pc), Some(pb)) = (&out.path_certificate, &out.path_bound) {
            let r = validate_decomposition(&g, pc);
            assert!(r.is_valid(), "{:?}", r.violations);
            assert!(pc.is_path);
            assert!(r.width <= pb.value(), "path {} > {}", r.width, pb);
        }
    }

    #[test]
    fn max2sat_unit_clause() {
        let f = cnf(1, &[&[1]]);
        for (k, expect) in [(0, true), (1, true), (2, false)] {
            let src = f.clone().with_target(k);
            let out = max2sat_to_sat(&src, &nice_single_bag(&src)).unwrap();
            check_certificate(&out);
            assert_eq!(sat_bruteforce(out.instance.as_cnf().unwrap()).unwrap().is_yes(), expect, "k={k}");
        }
    }

    #[test]
    fn max2sat_rejects_long_clauses_and_missing_target() {
        let f = cnf(3, &[&[1, 2, 3]]).with_target(1);
        assert!(max2sat_to_sat(&f, &nice_single_bag(&f)).is_err());
        let g = cnf(2, &[&[1, 2]]);
        assert!(max2sat_to_sat(&g, &nice_single_bag(&g)).is_err());
    }

    #[test]
    fn max2sat_weighted_and_contradictory() {
        let mut f = cnf(2, &[&[1, 2], &[-1], &[-2]]);
        f.clauses[0].multiplicity = 3;
        let best = max2sat_bruteforce(&f).unwrap().value;
        assert_eq!(best, 4);
        for k in 0..=6 {
            let src = f.clone().with_target(k);
            let out = max2sat_to_sat(&src, &nice_single_bag(&src)).unwrap();
            check_certificate(&out);
            assert_eq!(sat_decide(out.instance.as_cnf().unwrap()).unwrap().is_yes(), best >= k);
        }
    }

    #[test]
    fn chaining_four_literals() {
        let f = cnf(4, &[&[1, 2, 3, 4]]);
        let out = sat_to_3sat(&f, &TreeDecomposition::single_bag(vec![0, 1, 2, 3])).unwrap();
        let t = out.instance.as_cnf().unwrap();
        let got: Vec<Vec<i64>> = t
            .clauses
            .iter()
            .map(|c| c.lits.iter().map(|l| l.to_dimacs()).collect())
            .collect();
        assert_eq!(got, vec![vec![1, 2, 5], vec![-5, 3, 4]]);
        check_certificate(&out);
    }

    #[test]
    fn short_clauses_unchanged() {
        let f = cnf(3, &[&[1, -2, 3], &[2]]);
        let out = sat_to_3sat(&f, &TreeDecomposition::single_bag(vec![0, 1, 2])).unwrap();
        let t = out.instance.as_cnf().unwrap();
        assert_eq!(t.num_vars, 3);
        assert_eq!(t.clauses, f.clauses);
    }

    #[test]
    fn five_clause_width_plus_two() {
        let f = cnf(5, &[&[1, 2, -3, 4, 5]]);
        let out = sat_to_3sat(&f, &TreeDecomposition::single_bag(vec![0, 1, 2, 3, 4])).unwrap();
        check_certificate(&out);
        assert!(out.realized_width() <= 4 + 2);
        assert!(out.path_certificate.is_some());
    }

    #[test]
    fn contradiction_has_no_size_k_set() {
        let f = cnf(1, &[&[1], &[-1]]);
        let out = threesat_to_is(&f, &nice_single_bag(&f)).unwrap();
        check_certificate(&out);
        let g = out.instance.as_graph().unwrap();
        let k = out.target_k().unwrap();
        let census = out.census.unwrap();
        assert_eq!(k as usize, census.total());
        let a = crate::oracles::is_clique_cover_decide(g, &out.parts).unwrap();
        assert!(!a.is_yes());
    }

    #[test]
    fn two_clause_is_satisfiable() {
        let f = cnf(2, &[&[1, 2]]);
        let out = threesat_to_is(&f, &nice_single_bag(&f)).unwrap();
        check_certificate(&out);
        let a = crate::oracles::is_clique_cover_decide(out.instance.as_graph().unwrap(), &out.parts).unwrap();
        assert!(a.is_yes());
    }

    #[test]
    fn census_counts_gadgets() {
        let f = cnf(3, &[&[1, -2, 3], &[-1, 2]]);
        let ntd = nice_single_bag(&f);
        let r = threesat_to_is_layout(&f, &ntd).unwrap();
        let census = r.output.census.unwrap();
        let vars: usize = r.layout.var_gadgets.iter().map(BTreeMap::len).sum();
        let counting_vars: usize = r
            .layout
            .arcs
            .iter()
            .flatten()
            .map(|a| a.child_count.fragment.census.variable + a.parent_count.fragment.census.variable)
            .sum();
        assert_eq!(census.variable, vars + counting_vars);
        assert_eq!(r.output.target_k(), Some(census.total() as u64));
        assert_eq!(r.output.parts.len(), census.total());
    }

    #[test]
    fn k2_to_max2sat() {
        let g = UGraph::from_edges(2, &[(0, 1)]).unwrap().with_target(2);
        let out = is_to_max2sat(&g, None).unwrap();
        let t = out.instance.as_cnf().unwrap();
        assert_eq!(t.target, Some(5));
        assert_eq!(max2sat_bruteforce(t).unwrap().value, 4);
        assert_eq!(primal_graph(t).edge_list(), g.edge_list());
    }

    #[test]
    fn triangle_to_max2sat() {
        let g = UGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap().with_target(1);
        let out = is_to_max2sat(&g, None).unwrap();
        let t = out.instance.as_cnf().unwrap();
        assert_eq!(t.target, Some(13));
        assert!(max2sat_bruteforce(t).unwrap().value >= 13);
        assert_eq!(is_bruteforce(&g).unwrap().value, 1);
        check_certificate(&out);
    }
}
