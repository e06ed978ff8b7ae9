//! Formulas, graphs and (nice) tree decompositions, with structural validation.
//!
//! Variables and vertices are dense 0-based indices. Decomposition nodes are
//! indices into [`TreeDecomposition::nodes`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal {
            var,
            negated: false,
        }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, negated: true }
    }

    pub fn new(var: usize, value: bool) -> Self {
        Literal {
            var,
            negated: !value,
        }
    }

    pub fn negate(self) -> Self {
        Literal {
            var: self.var,
            negated: !self.negated,
        }
    }

    /// Truth value of the literal under `assignment`.
    #[inline]
    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var] != self.negated
    }

    /// Signed 1-based DIMACS form.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub lits: Vec<Literal>,
    pub multiplicity: u64,
}

impl Clause {
    pub fn new(lits: Vec<Literal>) -> Self {
        Clause {
            lits,
            multiplicity: 1,
        }
    }

    pub fn weighted(lits: Vec<Literal>, multiplicity: u64) -> Self {
        Clause { lits, multiplicity }
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    #[inline]
    pub fn is_satisfied(&self, assignment: &[bool]) -> bool {
        self.lits.iter().any(|l| l.eval(assignment))
    }

    /// Distinct variables of the clause in ascending order.
    pub fn vars(&self) -> Vec<usize> {
        let mut vs: Vec<usize> = self.lits.iter().map(|l| l.var).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }
}

/// A CNF formula, optionally carrying a Max 2-SAT target and a clause-length cap.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CnfInstance {
    pub num_vars: usize,
    pub clauses: Vec<Clause>,
    pub target: Option<u64>,
    pub max_clause_len: Option<usize>,
}

impl CnfInstance {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Self {
        CnfInstance {
            num_vars,
            clauses,
            target: None,
            max_clause_len: None,
        }
    }

    /// Builds an instance from signed 1-based DIMACS literals.
    pub fn from_dimacs(num_vars: usize, clauses: &[&[i64]]) -> Result<Self> {
        let clauses = clauses
            .iter()
            .map(|c| {
                let lits = c
                    .iter()
                    .map(|&l| {
                        if l == 0 {
                            return Err(Error::InvalidInstance("literal 0".into()));
                        }
                        Ok(Literal::new(l.unsigned_abs() as usize - 1, l > 0))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Clause::new(lits))
            })
            .collect::<Result<Vec<_>>>()?;
        let cnf = CnfInstance::new(num_vars, clauses);
        cnf.validate()?;
        Ok(cnf)
    }

    pub fn with_target(mut self, k: u64) -> Self {
        self.target = Some(k);
        self
    }

    pub fn with_max_clause_len(mut self, len: usize) -> Self {
        self.max_clause_len = Some(len);
        self
    }

    /// Sum of clause multiplicities.
    pub fn total_weight(&self) -> u64 {
        self.clauses.iter().map(|c| c.multiplicity).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_clauses()?;
        if let Some(k) = self.target {
            if k > self.total_weight() {
                return Err(Error::InvalidInstance(format!(
                    "target {k} exceeds total multiplicity {}",
                    self.total_weight()
                )));
            }
        }
        Ok(())
    }

    /// Clause-level checks only; an out-of-range target is allowed.
    pub fn validate_clauses(&self) -> Result<()> {
        for (ci, c) in self.clauses.iter().enumerate() {
            if c.lits.is_empty() {
                return Err(Error::InvalidInstance(format!("clause {ci} is empty")));
            }
            if c.multiplicity == 0 {
                return Err(Error::InvalidInstance(format!(
                    "clause {ci} has multiplicity 0"
                )));
            }
            let mut seen = BTreeSet::new();
            for l in &c.lits {
                if l.var >= self.num_vars {
                    return Err(Error::InvalidInstance(format!(
                        "clause {ci} mentions variable {} of {}",
                        l.var, self.num_vars
                    )));
                }
                if !seen.insert(*l) {
                    return Err(Error::InvalidInstance(format!(
                        "clause {ci} repeats literal {l}"
                    )));
                }
            }
            if let Some(max) = self.max_clause_len {
                if c.lits.len() > max {
                    return Err(Error::InvalidInstance(format!(
                        "clause {ci} has {} literals, cap is {max}",
                        c.lits.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Weighted number of clauses satisfied by `assignment`.
    pub fn satisfied_weight(&self, assignment: &[bool]) -> u64 {
        self.clauses
            .iter()
            .filter(|c| c.is_satisfied(assignment))
            .map(|c| c.multiplicity)
            .sum()
    }

    pub fn is_satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.is_satisfied(assignment))
    }

    pub fn max_len(&self) -> usize {
        self.clauses.iter().map(Clause::len).max().unwrap_or(0)
    }
}

/// Undirected simple graph, optionally carrying an Independent Set target.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UGraph {
    pub num_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
    pub is_target: Option<u64>,
}

impl UGraph {
    pub fn new(num_vertices: usize) -> Self {
        UGraph {
            num_vertices,
            edges: BTreeSet::new(),
            is_target: None,
        }
    }

    pub fn from_edges(num_vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = UGraph::new(num_vertices);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn with_target(mut self, k: u64) -> Self {
        self.is_target = Some(k);
        self
    }

    pub fn add_vertex(&mut self) -> usize {
        self.num_vertices += 1;
        self.num_vertices - 1
    }

    /// Adds `{u, v}`; returns whether the edge is new.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        if u == v {
            return Err(Error::InvalidInstance(format!("self-loop on {u}")));
        }
        if u >= self.num_vertices {
            return Err(Error::UnknownVertex(u));
        }
        if v >= self.num_vertices {
            return Err(Error::UnknownVertex(v));
        }
        Ok(self.edges.insert((u.min(v), u.max(v))))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        self.edges.iter().copied().collect()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    /// `S` is independent in this graph.
    pub fn is_independent(&self, set: &[usize]) -> bool {
        let s: BTreeSet<usize> = set.iter().copied().collect();
        s.iter().all(|&v| v < self.num_vertices)
            && self
                .edges
                .iter()
                .all(|(u, v)| !(s.contains(u) && s.contains(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Leaf,
    IntroduceVertex(usize),
    /// Introduces a clause (CNF) or an edge (graph, by index into the sorted edge list).
    IntroduceClause(usize),
    Forget(usize),
    Join,
    /// Unconstrained node of an ordinary (non-nice) decomposition.
    Plain,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Leaf => write!(f, "Leaf"),
            NodeKind::IntroduceVertex(v) => write!(f, "IntroV({v})"),
            NodeKind::IntroduceClause(c) => write!(f, "IntroC({c})"),
            NodeKind::Forget(v) => write!(f, "Forget({v})"),
            NodeKind::Join => write!(f, "Join"),
            NodeKind::Plain => write!(f, "Plain"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompNode {
    /// Sorted, duplicate-free.
    pub bag: Vec<usize>,
    pub kind: NodeKind,
    pub children: Vec<usize>,
}

impl DecompNode {
    pub fn plain(mut bag: Vec<usize>, children: Vec<usize>) -> Self {
        bag.sort_unstable();
        bag.dedup();
        DecompNode {
            bag,
            kind: NodeKind::Plain,
            children,
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.bag.binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub nodes: Vec<DecompNode>,
    pub root: usize,
    pub is_path: bool,
    pub is_nice: bool,
}

impl TreeDecomposition {
    /// A single bag holding `bag`.
    pub fn single_bag(bag: Vec<usize>) -> Self {
        TreeDecomposition {
            nodes: vec![DecompNode::plain(bag, vec![])],
            root: 0,
            is_path: true,
            is_nice: false,
        }
    }

    /// Path decomposition whose first bag is the root and last bag the leaf end.
    pub fn from_path_bags(bags: Vec<Vec<usize>>) -> Self {
        let n = bags.len();
        let nodes = bags
            .into_iter()
            .enumerate()
            .map(|(i, b)| DecompNode::plain(b, if i + 1 < n { vec![i + 1] } else { vec![] }))
            .collect();
        TreeDecomposition {
            nodes,
            root: 0,
            is_path: true,
            is_nice: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest bag size minus one; 0 when every bag is empty.
    pub fn width(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.bag.len())
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    /// Parent of each node (`None` for the root and for unreachable nodes).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                if c < parent.len() {
                    parent[c] = Some(i);
                }
            }
        }
        parent
    }

    /// Nodes in post-order (children before parents), depth-first from the root.
    pub fn post_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((i, expanded)) = stack.pop() {
            if expanded {
                out.push(i);
            } else {
                stack.push((i, true));
                for &c in self.nodes[i].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Nodes in depth-first pre-order from the root, children visited in stored order.
    pub fn pre_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            out.push(i);
            for &c in self.nodes[i].children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Every element occurring in some bag.
    pub fn elements(&self) -> BTreeSet<usize> {
        self.nodes.iter().flat_map(|n| n.bag.iter().copied()).collect()
    }
}

/// Graph on the variables with an edge between every two variables sharing a clause.
pub fn primal_graph(cnf: &CnfInstance) -> UGraph {
    let mut g = UGraph::new(cnf.num_vars);
    for c in &cnf.clauses {
        let vs = c.vars();
        for (i, &u) in vs.iter().enumerate() {
            for &v in &vs[i + 1..] {
                g.edges.insert((u, v));
            }
        }
    }
    g
}

/// Width of a decomposition; an empty node list is an error.
pub fn decomposition_width(td: &TreeDecomposition) -> Result<usize> {
    if td.nodes.is_empty() {
        return Err(Error::InvalidDecomposition("decomposition has no nodes".into()));
    }
    Ok(td.width())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The node set is not a tree rooted at `root`.
    NotATree(String),
    /// A bag names an element outside the graph.
    UnknownElement { node: usize, element: usize },
    VertexUncovered(usize),
    EdgeUncovered(usize, usize),
    /// The bags containing the vertex do not form a connected subtree.
    SubtreeDisconnected(usize),
    /// A node of a path decomposition has more than one child.
    NotPath { node: usize },
    /// A nice-form rule is violated at `node`.
    NiceRule { node: usize, rule: String },
}

impl Violation {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::NotATree(_) => "E_TREE",
            Violation::UnknownElement { .. } => "E_ELEMENT",
            Violation::VertexUncovered(_) => "E_VERTEX_COVER",
            Violation::EdgeUncovered(..) => "E_EDGE_COVER",
            Violation::SubtreeDisconnected(_) => "E_SUBTREE",
            Violation::NotPath { .. } => "E_PATH",
            Violation::NiceRule { .. } => "E_NICE",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotATree(s) => write!(f, "{}: {s}", self.code()),
            Violation::UnknownElement { node, element } => {
                write!(f, "{}: node {node} holds unknown element {element}", self.code())
            }
            Violation::VertexUncovered(v) => write!(f, "{}: vertex {v} in no bag", self.code()),
            Violation::EdgeUncovered(u, v) => {
                write!(f, "{}: edge {{{u},{v}}} in no bag", self.code())
            }
            Violation::SubtreeDisconnected(v) => {
                write!(f, "{}: bags containing {v} are disconnected", self.code())
            }
            Violation::NotPath { node } => {
                write!(f, "{}: node {node} has more than one child", self.code())
            }
            Violation::NiceRule { node, rule } => write!(f, "{}: node {node}: {rule}", self.code()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub width: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_tree_shape(td: &TreeDecomposition, out: &mut Vec<Violation>) -> bool {
    let n = td.nodes.len();
    if n == 0 {
        out.push(Violation::NotATree("no nodes".into()));
        return false;
    }
    if td.root >= n {
        out.push(Violation::NotATree(format!("root {} out of range", td.root)));
        return false;
    }
    let mut indeg = vec![0usize; n];
    for (i, node) in td.nodes.iter().enumerate() {
        for &c in &node.children {
            if c >= n {
                out.push(Violation::NotATree(format!("node {i} has unknown child {c}")));
                return false;
            }
            indeg[c] += 1;
        }
    }
    if indeg[td.root] != 0 {
        out.push(Violation::NotATree("root has a parent".into()));
        return false;
    }
    if let Some(i) = (0..n).find(|&i| i != td.root && indeg[i] != 1) {
        out.push(Violation::NotATree(format!(
            "node {i} has {} parents",
            indeg[i]
        )));
        return false;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![td.root];
    let mut count = 0;
    while let Some(i) = stack.pop() {
        if seen[i] {
            out.push(Violation::NotATree(format!("node {i} reached twice")));
            return false;
        }
        seen[i] = true;
        count += 1;
        stack.extend(td.nodes[i].children.iter().copied());
    }
    if count != n {
        out.push(Violation::NotATree(format!(
            "{} nodes unreachable from root",
            n - count
        )));
        return false;
    }
    true
}

/// Checks the three tree-decomposition properties of `td` against `graph`.
///
/// Every violated property is reported with a witness; the width is reported
/// regardless of validity.
pub fn validate_decomposition(graph: &UGraph, td: &TreeDecomposition) -> ValidationReport {
    let mut violations = Vec::new();
    let width = td.width();
    if !check_tree_shape(td, &mut violations) {
        return ValidationReport { width, violations };
    }
    if td.is_path {
        for (i, node) in td.nodes.iter().enumerate() {
            if node.children.len() > 1 {
                violations.push(Violation::NotPath { node: i });
            }
        }
    }
    let n = graph.num_vertices;
    let mut count = vec![0usize; n];
    let mut bag_sets: Vec<&[usize]> = Vec::with_capacity(td.nodes.len());
    for (i, node) in td.nodes.iter().enumerate() {
        if node.bag.windows(2).any(|w| w[0] >= w[1]) {
            violations.push(Violation::NotATree(format!("bag of node {i} not sorted/unique")));
        }
        for &v in &node.bag {
            if v >= n {
                violations.push(Violation::UnknownElement { node: i, element: v });
            } else {
                count[v] += 1;
            }
        }
        bag_sets.push(&node.bag);
    }
    for (v, &c) in count.iter().enumerate() {
        if c == 0 {
            violations.push(Violation::VertexUncovered(v));
        }
    }
    // Edge coverage: index bags per vertex, then test the lighter endpoint's bags.
    let mut bags_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in td.nodes.iter().enumerate() {
        for &v in &node.bag {
            if v < n {
                bags_of[v].push(i);
            }
        }
    }
    for (u, v) in graph.edges() {
        let (a, b) = if bags_of[u].len() <= bags_of[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        if !bags_of[a]
            .iter()
            .any(|&i| bag_sets[i].binary_search(&b).is_ok())
        {
            violations.push(Violation::EdgeUncovered(u, v));
        }
    }
    // Connectivity: in a tree, the nodes holding v are connected iff
    // #nodes = #arcs-inside + 1.
    let mut arcs = vec![0usize; n];
    for node in &td.nodes {
        for &c in &node.children {
            let child = &td.nodes[c];
            for &v in &node.bag {
                if v < n && child.contains(v) {
                    arcs[v] += 1;
                }
            }
        }
    }
    for v in 0..n {
        if count[v] > 0 && count[v] != arcs[v] + 1 {
            violations.push(Violation::SubtreeDisconnected(v));
        }
    }
    ValidationReport { width, violations }
}

/// What a nice decomposition decomposes: a CNF (clauses introduced) or a graph
/// (edges introduced as two-element pseudo-clauses).
#[derive(Debug, Clone, Copy)]
pub enum NiceTarget<'a> {
    Cnf(&'a CnfInstance),
    Graph(&'a UGraph),
}

impl<'a> NiceTarget<'a> {
    pub fn num_elements(&self) -> usize {
        match self {
            NiceTarget::Cnf(c) => c.num_vars,
            NiceTarget::Graph(g) => g.num_vertices,
        }
    }

    /// Elements of every clause (CNF) or edge (graph), indexed like `IntroduceClause`.
    pub fn clause_scopes(&self) -> Vec<Vec<usize>> {
        match self {
            NiceTarget::Cnf(c) => c.clauses.iter().map(Clause::vars).collect(),
            NiceTarget::Graph(g) => g.edges().map(|(u, v)| vec![u, v]).collect(),
        }
    }

    pub fn graph(&self) -> UGraph {
        match self {
            NiceTarget::Cnf(c) => primal_graph(c),
            NiceTarget::Graph(g) => (*g).clone(),
        }
    }
}

fn bag_minus(bag: &[usize], v: usize) -> Vec<usize> {
    bag.iter().copied().filter(|&x| x != v).collect()
}

/// Full nice-form validation: decomposition properties plus node-kind rules,
/// empty root, one `Forget` per element and one `IntroduceClause` per clause.
pub fn validate_nice(target: NiceTarget<'_>, td: &TreeDecomposition) -> ValidationReport {
    let graph = target.graph();
    let mut report = validate_decomposition(&graph, td);
    if report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::NotATree(_)))
    {
        return report;
    }
    let scopes = target.clause_scopes();
    let mut rule = |node: usize, msg: String| {
        report.violations.push(Violation::NiceRule { node, rule: msg });
    };
    if !td.nodes[td.root].bag.is_empty() {
        rule(td.root, "root bag is not empty".into());
    }
    let mut forgets: HashMap<usize, usize> = HashMap::new();
    let mut intros: HashMap<usize, usize> = HashMap::new();
    for (i, node) in td.nodes.iter().enumerate() {
        let ch = &node.children;
        let one_child = |what: &str| -> std::result::Result<&DecompNode, String> {
            if ch.len() == 1 {
                Ok(&td.nodes[ch[0]])
            } else {
                Err(format!("{what} needs exactly one child, has {}", ch.len()))
            }
        };
        let res: std::result::Result<(), String> = match node.kind {
            NodeKind::Leaf => {
                if !ch.is_empty() {
                    Err("leaf has children".into())
                } else if !node.bag.is_empty() {
                    Err("leaf bag is not empty".into())
                } else {
                    Ok(())
                }
            }
            NodeKind::IntroduceVertex(v) => one_child("IntroduceVertex").and_then(|c| {
                if c.contains(v) {
                    Err(format!("introduced {v} already in child bag"))
                } else if !node.contains(v) || bag_minus(&node.bag, v) != c.bag {
                    Err(format!("bag is not child bag plus {v}"))
                } else {
                    Ok(())
                }
            }),
            NodeKind::IntroduceClause(ci) => one_child("IntroduceClause").and_then(|c| {
                *intros.entry(ci).or_default() += 1;
                if ci >= scopes.len() {
                    Err(format!("clause {ci} does not exist"))
                } else if c.bag != node.bag {
                    Err("bag differs from child bag".into())
                } else if scopes[ci].iter().any(|&v| !node.contains(v)) {
                    Err(format!("clause {ci} not contained in bag"))
                } else {
                    Ok(())
                }
            }),
            NodeKind::Forget(v) => one_child("Forget").and_then(|c| {
                *forgets.entry(v).or_default() += 1;
                if !c.contains(v) {
                    Err(format!("forgotten {v} not in child bag"))
                } else if bag_minus(&c.bag, v) != node.bag {
                    Err(format!("bag is not child bag minus {v}"))
                } else {
                    Ok(())
                }
            }),
            NodeKind::Join => {
                if ch.len() != 2 {
                    Err(format!("join needs two children, has {}", ch.len()))
                } else if ch.iter().any(|&c| td.nodes[c].bag != node.bag) {
                    Err("join children bags differ".into())
                } else {
                    Ok(())
                }
            }
            NodeKind::Plain => Err("plain node in nice decomposition".into()),
        };
        if let Err(msg) = res {
            rule(i, msg);
        }
    }
    for v in 0..target.num_elements() {
        let c = forgets.get(&v).copied().unwrap_or(0);
        if c != 1 {
            rule(td.root, format!("element {v} forgotten {c} times"));
        }
    }
    for ci in 0..scopes.len() {
        let c = intros.get(&ci).copied().unwrap_or(0);
        if c != 1 {
            rule(td.root, format!("clause {ci} introduced {c} times"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lits(c: &[i64]) -> Vec<Literal> {
        c.iter()
            .map(|&l| Literal::new(l.unsigned_abs() as usize - 1, l > 0))
            .collect()
    }

    #[test]
    fn primal_graph_of_single_clause_is_triangle() {
        let cnf = CnfInstance::new(3, vec![Clause::new(lits(&[1, 2, -3]))]);
        let g = primal_graph(&cnf);
        assert_eq!(g.edge_list(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn primal_graph_isolated_variable() {
        let g = primal_graph(&CnfInstance::new(1, vec![]));
        assert_eq!(g.num_vertices, 1);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn primal_graph_chain() {
        let cnf = CnfInstance::from_dimacs(3, &[&[1, 2], &[2, 3]]).unwrap();
        assert_eq!(primal_graph(&cnf).edge_list(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn instance_validation_rejects_bad_clauses() {
        assert!(CnfInstance::from_dimacs(2, &[&[1, 1]]).is_err());
        assert!(CnfInstance::from_dimacs(1, &[&[2]]).is_err());
        assert!(CnfInstance::new(1, vec![Clause::new(vec![])]).validate().is_err());
        let c = CnfInstance::from_dimacs(2, &[&[1, 2]]).unwrap().with_target(2);
        assert!(c.validate().is_err());
        let c = CnfInstance::from_dimacs(3, &[&[1, 2, 3]])
            .unwrap()
            .with_max_clause_len(2);
        assert!(c.validate().is_err());
    }

    #[test]
    fn triangle_single_bag() {
        let g = UGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let r = validate_decomposition(&g, &TreeDecomposition::single_bag(vec![0, 1, 2]));
        assert!(r.is_valid());
        assert_eq!(r.width, 2);
    }

    #[test]
    fn path_two_bags() {
        let g = UGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let td = TreeDecomposition::from_path_bags(vec![vec![0, 1], vec![1, 2]]);
        let r = validate_decomposition(&g, &td);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.width, 1);
    }

    #[test]
    fn uncovered_edge_reported() {
        let g = UGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let td = TreeDecomposition::from_path_bags(vec![vec![0, 1], vec![2]]);
        let r = validate_decomposition(&g, &td);
        assert_eq!(r.violations, vec![Violation::EdgeUncovered(1, 2)]);
        assert_eq!(r.violations[0].code(), "E_EDGE_COVER");
    }

    #[test]
    fn disconnected_subtree_and_missing_vertex() {
        let g = UGraph::from_edges(3, &[(0, 1)]).unwrap();
        let td = TreeDecomposition::from_path_bags(vec![vec![0, 1], vec![1], vec![0, 1]]);
        let r = validate_decomposition(&g, &td);
        assert!(r.violations.contains(&Violation::SubtreeDisconnected(0)));
        assert!(r.violations.contains(&Violation::VertexUncovered(2)));
    }

    #[test]
    fn width_conventions() {
        assert!(decomposition_width(&TreeDecomposition {
            nodes: vec![],
            root: 0,
            is_path: true,
            is_nice: false
        })
        .is_err());
        assert_eq!(
            decomposition_width(&TreeDecomposition::single_bag(vec![])).unwrap(),
            0
        );
        let td = TreeDecomposition::from_path_bags(vec![vec![0, 1, 2], vec![2, 3]]);
        assert_eq!(decomposition_width(&td).unwrap(), 2);
        for n in 1..8usize {
            let td = TreeDecomposition::single_bag((0..n).collect());
            assert_eq!(decomposition_width(&td).unwrap(), n - 1);
        }
    }

    fn nice_two_var() -> (CnfInstance, TreeDecomposition) {
        // root(∅) <- Forget(y) <- Forget(x) <- IntroC(0) <- IntroV(y) <- IntroV(x) <- Leaf
        let cnf = CnfInstance::from_dimacs(2, &[&[1, 2]]).unwrap();
        let node = |bag: Vec<usize>, kind, children| DecompNode {
            bag,
            kind,
            children,
        };
        let nodes = vec![
            node(vec![], NodeKind::Forget(1), vec![1]),
            node(vec![1], NodeKind::Forget(0), vec![2]),
            node(vec![0, 1], NodeKind::IntroduceClause(0), vec![3]),
            node(vec![0, 1], NodeKind::IntroduceVertex(1), vec![4]),
            node(vec![0], NodeKind::IntroduceVertex(0), vec![5]),
            node(vec![], NodeKind::Leaf, vec![]),
        ];
        let td = TreeDecomposition {
            nodes,
            root: 0,
            is_path: true,
            is_nice: true,
        };
        (cnf, td)
    }

    #[test]
    fn nice_accepts_hand_built() {
        let (cnf, td) = nice_two_var();
        let r = validate_nice(NiceTarget::Cnf(&cnf), &td);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.width, 1);
    }

    #[test]
    fn nice_rejects_duplicate_clause_intro() {
        let (cnf, mut td) = nice_two_var();
        td.nodes[2].children = vec![6];
        td.nodes.push(DecompNode {
            bag: vec![0, 1],
            kind: NodeKind::IntroduceClause(0),
            children: vec![3],
        });
        let r = validate_nice(NiceTarget::Cnf(&cnf), &td);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NiceRule { rule, .. } if rule.contains("introduced 2 times"))));
    }

    #[test]
    fn nice_rejects_nonempty_root() {
        let (cnf, mut td) = nice_two_var();
        td.root = 1;
        td.nodes.remove(0);
        for n in td.nodes.iter_mut() {
            for c in n.children.iter_mut() {
                *c -= 1;
            }
        }
        td.root = 0;
        let r = validate_nice(NiceTarget::Cnf(&cnf), &td);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NiceRule { rule, .. } if rule.contains("root bag"))));
    }
}
