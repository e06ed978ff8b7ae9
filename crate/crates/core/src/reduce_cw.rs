//! Reductions across clique-width: Independent Set on a clique-width
//! expression to SAT of bounded tree-width, and a synthesizer that turns the
//! 3-SAT to Independent Set construction into a clique-width expression.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::decomp::{EliminationSchedule, EliminationStep};
use crate::error::{Error, Result};
use crate::gadgets::{bits_for, ConstraintSpec, CountingGadget, VarGadget};
use crate::instances::{primal_graph, CnfInstance, Literal, NodeKind, TreeDecomposition, UGraph};
use crate::kexpr::{evaluate_kexpression, CliqueExpression, ExprNode, Label, LabeledGraph};
use crate::reduce_tw::{
    certify, threesat_to_is_layout, AnswerMap, CnfBuilder, IsLayout, ReductionOutput, Target,
    WidthBound,
};

/// Independent Set of size `k` on the graph of `expr` to SAT.
///
/// Every operation `o` gets one variable per label (`o:y:l`, "some selected
/// vertex carries label `l`") and an `M`-bit count `o:s:*` of selected
/// vertices in its subexpression. Joins forbid both joined labels at once,
/// renames merge label flags, unions add counts; the root count must reach
/// `k`. Eliminating each operation's label flags against its parent's and
/// then its count gives width at most `cw + 3M`.
pub fn is_cw_to_sat_tw(expr: &CliqueExpression, k: u64) -> Result<ReductionOutput> {
    let evaluated = evaluate_kexpression(expr)?;
    let n = evaluated.graph.num_vertices;
    let cw = expr.label_budget as usize;
    let m = bits_for(n as u64).max(1);
    let order = expr.reachable_post_order();
    let mut parent: HashMap<usize, usize> = HashMap::new();
    for &o in &order {
        for c in expr.children(o) {
            parent.insert(c, o);
        }
    }

    let mut b = CnfBuilder::default();
    let mut flags: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut counts: HashMap<usize, Vec<usize>> = HashMap::new();
    for &o in &order {
        let y: Vec<usize> = (1..=cw).map(|l| b.var(format!("{o}:y:{l}"))).collect();
        let s: Vec<usize> = (0..m).map(|j| b.var(format!("{o}:s:{j}"))).collect();
        // Label `l` lives at index `l - 1`.
        let flag = |l: Label| (l - 1) as usize;
        match &expr.nodes[o] {
            ExprNode::Create { label, .. } => {
                b.constraint(&ConstraintSpec::eq(&s, &[y[flag(*label)]]))?;
            }
            ExprNode::Union(l, r) => {
                for c in [l, r] {
                    for (&cv, &ov) in flags[c].iter().zip(&y) {
                        b.clause(vec![Literal::neg(cv), Literal::pos(ov)]);
                    }
                }
                b.constraint(&ConstraintSpec::eq_sum(&s, &counts[l], &counts[r]))?;
            }
            ExprNode::Join { a, b: other, child } => {
                for (&cv, &ov) in flags[child].iter().zip(&y) {
                    b.equal(cv, ov);
                }
                b.clause(vec![Literal::neg(y[flag(*a)]), Literal::neg(y[flag(*other)])]);
                b.constraint(&ConstraintSpec::eq(&s, &counts[child]))?;
            }
            ExprNode::Rename { from, to, child } => {
                let c = &flags[child];
                let (i, j) = (flag(*from), flag(*to));
                for l in (0..cw).filter(|&l| from == to || (l != i && l != j)) {
                    b.equal(c[l], y[l]);
                }
                if from != to {
                    b.clause(vec![Literal::neg(y[j]), Literal::pos(c[i]), Literal::pos(c[j])]);
                    b.clause(vec![Literal::pos(y[j]), Literal::neg(c[i])]);
                    b.clause(vec![Literal::pos(y[j]), Literal::neg(c[j])]);
                    b.clause(vec![Literal::neg(y[i])]);
                }
                b.constraint(&ConstraintSpec::eq(&s, &counts[child]))?;
            }
        }
        flags.insert(o, y);
        counts.insert(o, s);
    }
    b.constraint(&ConstraintSpec::at_least(&counts[&expr.root], k))?;
    let (cnf, names) = b.finish();

    let bound = WidthBound {
        formula: "cw + c*ceil(log2(n+1))",
        input_width: cw,
        log_term: m,
        c: 3,
        additive: 0,
    };
    let claimed = bound.value();
    let mut schedule = EliminationSchedule::new();
    for &o in &order {
        match parent.get(&o) {
            Some(p) => {
                schedule.push(EliminationStep::matching(flags[&o].clone(), flags[p].clone(), claimed));
                schedule.push(EliminationStep::subset(counts[&o].clone(), claimed));
            }
            None => {
                let mut rest = flags[&o].clone();
                rest.extend(&counts[&o]);
                schedule.push(EliminationStep::subset(rest, claimed));
            }
        }
    }
    let certificate = certify(&primal_graph(&cnf), &schedule, &TreeDecomposition::single_bag(vec![]))?;
    Ok(ReductionOutput {
        instance: Target::Cnf(cnf),
        certificate,
        bound,
        path_certificate: None,
        path_bound: None,
        answer_map: AnswerMap::IndependentSetIffSat { k },
        schedule,
        names,
        census: None,
        parts: Vec::new(),
    })
}

/// A clique-width expression for the 3-SAT to Independent Set graph.
#[derive(Debug, Clone)]
pub struct CwSynthesis {
    /// The construction being expressed, with its tree-width certificate.
    pub reduction: ReductionOutput,
    pub expression: CliqueExpression,
    /// Claimed label budget; `expression.label_budget` is the realized one.
    pub bound: WidthBound,
    /// Labels reserved for bag-variable colors.
    pub colors: usize,
}

impl CwSynthesis {
    pub fn graph(&self) -> &UGraph {
        self.reduction.instance.as_graph().expect("graph target")
    }

    pub fn target_k(&self) -> u64 {
        self.reduction.target_k().expect("independent-set target")
    }
}

/// Colors variables so that any two sharing a bag differ, using at most
/// `width + 1` colors.
fn color_variables(ntd: &TreeDecomposition) -> BTreeMap<usize, Label> {
    let mut color = BTreeMap::new();
    for i in ntd.pre_order() {
        let bag = &ntd.nodes[i].bag;
        for &x in bag {
            if color.contains_key(&x) {
                continue;
            }
            let used: BTreeSet<Label> = bag.iter().filter_map(|y| color.get(y).copied()).collect();
            let c = (1..).find(|c| !used.contains(c)).expect("unbounded");
            color.insert(x, c);
        }
    }
    color
}

/// Labeled vertices of one subexpression that still miss some edge.
#[derive(Debug, Default)]
struct Frontier {
    expr: Option<usize>,
    label_of: HashMap<usize, Label>,
    class: BTreeMap<Label, Vec<usize>>,
}

/// Emits an expression vertex by vertex. Each vertex is joined to its
/// already-created neighbors when it appears, and a label class retires to
/// the sink label once all its vertices have every neighbor created.
struct Emitter<'a> {
    e: CliqueExpression,
    adj: &'a [Vec<usize>],
    created: Vec<bool>,
    missing: Vec<usize>,
    sink: Label,
    preferred: HashMap<usize, Label>,
}

impl Emitter<'_> {
    fn free_pool_label(&self, fr: &Frontier, avoid: &BTreeMap<Label, Vec<usize>>) -> Label {
        (self.sink + 1..)
            .find(|l| !fr.class.contains_key(l) && !avoid.contains_key(l))
            .expect("unbounded")
    }

    fn attach(&mut self, fr: &mut Frontier, node: usize) {
        fr.expr = Some(match fr.expr {
            Some(cur) => self.e.union(cur, node),
            None => node,
        });
    }

    fn wrap(&mut self, fr: &mut Frontier, op: impl FnOnce(&mut CliqueExpression, usize) -> usize) {
        let cur = fr.expr.expect("non-empty frontier");
        fr.expr = Some(op(&mut self.e, cur));
    }

    fn retire_if_done(&mut self, fr: &mut Frontier, label: Label) {
        let done = fr
            .class
            .get(&label)
            .is_some_and(|vs| vs.iter().all(|&v| self.missing[v] == 0));
        if done {
            for v in fr.class.remove(&label).unwrap_or_default() {
                fr.label_of.remove(&v);
            }
            let sink = self.sink;
            self.wrap(fr, |e, c| e.rename(label, sink, c));
        }
    }

    fn create(&mut self, fr: &mut Frontier, v: usize) -> Result<()> {
        if self.created[v] {
            return Err(Error::Expression(format!("vertex {v} created twice")));
        }
        let label = match self.preferred.get(&v) {
            Some(&l) if !fr.class.contains_key(&l) => l,
            _ => self.free_pool_label(fr, &BTreeMap::new()),
        };
        let node = self.e.create(label, v.to_string());
        self.attach(fr, node);
        self.created[v] = true;
        let mut by_label: BTreeMap<Label, usize> = BTreeMap::new();
        for &u in &self.adj[v] {
            self.missing[u] -= 1;
            if self.created[u] {
                let l = *fr.label_of.get(&u).ok_or_else(|| {
                    Error::Expression(format!("neighbor {u} of {v} is no longer addressable"))
                })?;
                *by_label.entry(l).or_default() += 1;
            }
        }
        for (&l, &count) in &by_label {
            if fr.class[&l].len() != count {
                return Err(Error::Expression(format!(
                    "label {l} mixes neighbors and non-neighbors of {v}"
                )));
            }
            self.wrap(fr, |e, c| e.join(label, l, c));
        }
        fr.class.insert(label, vec![v]);
        fr.label_of.insert(v, label);
        self.retire_if_done(fr, label);
        for l in by_label.into_keys() {
            self.retire_if_done(fr, l);
        }
        Ok(())
    }

    fn create_all(&mut self, fr: &mut Frontier, vs: impl IntoIterator<Item = usize>) -> Result<()> {
        vs.into_iter().try_for_each(|v| self.create(fr, v))
    }

    fn pending(&self, vs: &[usize]) -> BTreeSet<usize> {
        vs.iter()
            .flat_map(|&v| self.adj[v].iter().copied())
            .filter(|&u| !self.created[u])
            .collect()
    }

    /// Disjoint union of two frontiers. Right-hand labels clashing with the
    /// left are renamed to fresh ones, unless both classes await exactly the
    /// same neighbors, in which case they may share the label.
    fn merge(&mut self, mut left: Frontier, mut right: Frontier) -> Frontier {
        let clashes: Vec<Label> = right
            .class
            .keys()
            .copied()
            .filter(|l| left.class.contains_key(l))
            .collect();
        for l in clashes {
            if self.pending(&left.class[&l]) == self.pending(&right.class[&l]) {
                continue;
            }
            let fresh = self.free_pool_label(&right, &left.class);
            let vs = right.class.remove(&l).expect("clash");
            for &v in &vs {
                right.label_of.insert(v, fresh);
            }
            right.class.insert(fresh, vs);
            self.wrap(&mut right, |e, c| e.rename(l, fresh, c));
        }
        match (left.expr, right.expr) {
            (Some(a), Some(b)) => left.expr = Some(self.e.union(a, b)),
            (None, r) => left.expr = r,
            (Some(_), None) => {}
        }
        for (l, vs) in right.class {
            left.class.entry(l).or_default().extend(vs);
        }
        left.label_of.extend(right.label_of);
        left
    }
}

fn gadget_vertices(gs: &[VarGadget]) -> Vec<usize> {
    gs.iter().flat_map(|g| [g.pos, g.neg]).collect()
}

fn counting_layer(cg: &CountingGadget, a: usize) -> Vec<usize> {
    match cg.layers.get(a) {
        Some(l) => {
            let mut v = vec![l.y.pos, l.y.neg];
            v.extend(gadget_vertices(&l.count));
            v
        }
        None => gadget_vertices(&cg.last),
    }
}

/// Opening layer of a counting gadget and its unit clauses.
fn counting_start(em: &mut Emitter<'_>, fr: &mut Frontier, cg: &CountingGadget) -> Result<()> {
    em.create_all(fr, counting_layer(cg, 0))?;
    em.create_all(fr, cg.units.iter().flatten().copied())
}

/// Layer after watched position `a`, with the adders feeding it.
fn counting_step(em: &mut Emitter<'_>, fr: &mut Frontier, cg: &CountingGadget, a: usize) -> Result<()> {
    em.create_all(fr, counting_layer(cg, a + 1))?;
    em.create_all(fr, cg.adders[a].iter().flatten().copied())
}

/// 3-SAT with a nice tree decomposition of width `w` to Independent Set,
/// returned together with a clique-width expression for the output graph.
///
/// Bag variables carry colors (at most `w + 1`) that label the false copies
/// awaiting their parent; everything finished is renamed to a sink label and
/// counting-gadget layers use a small pool of temporary labels, so the label
/// count stays within `w + O(log w)`.
pub fn threesat_tw_to_is_cw(src: &CnfInstance, ntd: &TreeDecomposition) -> Result<CwSynthesis> {
    let built = threesat_to_is_layout(src, ntd)?;
    let graph = built.output.instance.as_graph().expect("graph target").clone();
    if graph.num_vertices == 0 {
        return Err(Error::Unsupported("the construction produced an empty graph".into()));
    }
    let layout: &IsLayout = &built.layout;
    let m = layout.counter_bits;
    let width = ntd.width();
    let color = color_variables(ntd);
    let colors = color.values().copied().max().unwrap_or(0);
    let adj = graph.adjacency();
    let mut preferred = HashMap::new();
    for gadgets in &layout.var_gadgets {
        for (x, g) in gadgets {
            preferred.insert(g.neg, color[x]);
        }
    }
    let mut em = Emitter {
        e: CliqueExpression::new(),
        adj: &adj,
        created: vec![false; graph.num_vertices],
        missing: adj.iter().map(Vec::len).collect(),
        sink: colors + 1,
        preferred,
    };

    let mut frontiers: HashMap<usize, Frontier> = HashMap::new();
    for i in ntd.post_order() {
        let node = &ntd.nodes[i];
        let mut fr = Frontier::default();
        for &c in &node.children {
            let child = frontiers.remove(&c).expect("post-order");
            fr = em.merge(fr, child);
        }
        let own_arc = layout.arcs[i].as_ref();
        if let Some(arc) = own_arc {
            counting_start(&mut em, &mut fr, &arc.child_count)?;
        }
        for &c in &node.children {
            let arc = layout.arcs[c].as_ref().expect("arc built");
            counting_start(&mut em, &mut fr, &arc.parent_count)?;
        }
        for (x, g) in &layout.var_gadgets[i] {
            em.create(&mut fr, g.pos)?;
            em.create(&mut fr, g.neg)?;
            if let Some(arc) = own_arc {
                if let Some(a) = arc.shared.iter().position(|y| y == x) {
                    counting_step(&mut em, &mut fr, &arc.child_count, a)?;
                }
            }
            for &c in &node.children {
                let arc = layout.arcs[c].as_ref().expect("arc built");
                if let Some(a) = arc.shared.iter().position(|y| y == x) {
                    counting_step(&mut em, &mut fr, &arc.parent_count, a)?;
                }
            }
        }
        if let Some(cg) = &layout.clause_gadget[i] {
            debug_assert!(matches!(node.kind, NodeKind::IntroduceClause(_)));
            em.create_all(&mut fr, cg.iter().copied())?;
        }
        for &c in &node.children {
            let arc = layout.arcs[c].as_ref().expect("arc built");
            em.create_all(&mut fr, arc.blocking.vertices.clone())?;
        }
        frontiers.insert(i, fr);
    }
    let root = frontiers.remove(&ntd.root).expect("root processed");
    if let Some(v) = em.created.iter().position(|c| !c) {
        return Err(Error::Expression(format!("vertex {v} never created")));
    }
    if !root.class.is_empty() {
        return Err(Error::Expression("unfinished vertices at the root".into()));
    }
    let mut expression = em.e;
    expression.root = root.expr.expect("non-empty graph");
    let realized = expression.max_label();
    expression.label_budget = realized;

    let bound = WidthBound {
        formula: "w + c*ceil(log2(w+2))",
        input_width: width,
        log_term: m,
        c: 18,
        additive: 22,
    };
    Ok(CwSynthesis {
        reduction: built.output,
        expression,
        bound,
        colors: colors as usize,
    })
}

/// Checks that `evaluated` is `graph` with vertex `v` named `v`.
pub fn same_named_graph(evaluated: &LabeledGraph, graph: &UGraph) -> Result<()> {
    if evaluated.graph.num_vertices != graph.num_vertices {
        return Err(Error::Expression(format!(
            "expression has {} vertices, graph has {}",
            evaluated.graph.num_vertices, graph.num_vertices
        )));
    }
    let ids: Vec<usize> = evaluated
        .names
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| Error::Expression(format!("vertex name {s:?} is not an index"))))
        .collect::<Result<_>>()?;
    let mapped: BTreeSet<(usize, usize)> = evaluated
        .graph
        .edges()
        .map(|(u, v)| (ids[u].min(ids[v]), ids[u].max(ids[v])))
        .collect();
    let want: BTreeSet<(usize, usize)> = graph.edges().map(|(u, v)| (u.min(v), u.max(v))).collect();
    if mapped != want {
        let extra = mapped.difference(&want).next();
        let missing = want.difference(&mapped).next();
        return Err(Error::Expression(format!(
            "edge sets differ: extra {extra:?}, missing {missing:?}"
        )));
    }
    Ok(())
}
