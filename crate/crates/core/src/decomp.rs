//! Constructive decomposition machinery: vertex elimination, decompositions
//! built from elimination schedules, nice normalization and path sweeps.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::instances::{
    validate_decomposition, DecompNode, NiceTarget, NodeKind, TreeDecomposition, UGraph,
};

/// Returns `G/S`: `S` removed and `N(S)` turned into a clique. Survivors keep
/// their identifiers; eliminated vertices become isolated.
///
/// Vertices of `S` are eliminated one by one, which yields the same graph as
/// removing `S` at once and completing its neighborhood restricted to each
/// connected component of `G[S]`.
pub fn eliminate(graph: &UGraph, vertices: &[usize]) -> Result<UGraph> {
    let mut eg = ElimGraph::new(graph);
    for &v in vertices {
        if v >= graph.num_vertices {
            return Err(Error::UnknownVertex(v));
        }
        eg.eliminate(v);
    }
    Ok(eg.to_graph())
}

/// Mutable adjacency structure used while simulating eliminations.
#[derive(Debug, Clone)]
pub struct ElimGraph {
    adj: Vec<BTreeSet<usize>>,
    alive: Vec<bool>,
}

impl ElimGraph {
    pub fn new(graph: &UGraph) -> Self {
        let mut adj = vec![BTreeSet::new(); graph.num_vertices];
        for (u, v) in graph.edges() {
            adj[u].insert(v);
            adj[v].insert(u);
        }
        ElimGraph {
            adj,
            alive: vec![true; graph.num_vertices],
        }
    }

    pub fn is_alive(&self, v: usize) -> bool {
        self.alive[v]
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Removes `v` and cliquifies its neighborhood; returns that neighborhood.
    pub fn eliminate(&mut self, v: usize) -> Vec<usize> {
        let nb: Vec<usize> = std::mem::take(&mut self.adj[v]).into_iter().collect();
        for &u in &nb {
            self.adj[u].remove(&v);
        }
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                self.adj[a].insert(b);
                self.adj[b].insert(a);
            }
        }
        self.alive[v] = false;
        nb
    }

    /// Open neighborhood of a set (alive vertices outside the set).
    pub fn set_neighborhood(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        set.iter()
            .flat_map(|&v| self.adj[v].iter().copied())
            .filter(|u| !set.contains(u))
            .collect()
    }

    pub fn to_graph(&self) -> UGraph {
        let mut g = UGraph::new(self.adj.len());
        for (u, nb) in self.adj.iter().enumerate() {
            for &v in nb {
                if u < v {
                    g.add_edge(u, v).expect("adjacency is simple");
                }
            }
        }
        g
    }
}

/// Which elimination rule justifies a step's degree bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EliminationRule {
    /// One vertex; bound `d(v)`.
    Single,
    /// Any set; bound `|N[S]| - 1`.
    Subset,
    /// `X` = the step's vertices, each with at most one neighbor in `y`; bound `|N[X] \ Y|`.
    Matching { y: Vec<usize> },
    /// Disjoint layers with no edges between non-consecutive layers;
    /// bound `2k + |N(S)| - 1` with `k` the largest layer.
    Layered { layers: Vec<Vec<usize>> },
}

impl EliminationRule {
    pub fn name(&self) -> &'static str {
        match self {
            EliminationRule::Single => "single",
            EliminationRule::Subset => "subset",
            EliminationRule::Matching { .. } => "matching",
            EliminationRule::Layered { .. } => "layered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationStep {
    /// Elimination order within the step. For `Layered` this is ignored in
    /// favour of the layer order.
    pub vertices: Vec<usize>,
    pub rule: EliminationRule,
    pub claimed_degree: usize,
}

impl EliminationStep {
    pub fn single(v: usize, claimed_degree: usize) -> Self {
        EliminationStep {
            vertices: vec![v],
            rule: EliminationRule::Single,
            claimed_degree,
        }
    }

    pub fn subset(vertices: Vec<usize>, claimed_degree: usize) -> Self {
        EliminationStep {
            vertices,
            rule: EliminationRule::Subset,
            claimed_degree,
        }
    }

    pub fn matching(x: Vec<usize>, y: Vec<usize>, claimed_degree: usize) -> Self {
        EliminationStep {
            vertices: x,
            rule: EliminationRule::Matching { y },
            claimed_degree,
        }
    }

    pub fn layered(layers: Vec<Vec<usize>>, claimed_degree: usize) -> Self {
        EliminationStep {
            vertices: layers.iter().flatten().copied().collect(),
            rule: EliminationRule::Layered { layers },
            claimed_degree,
        }
    }

    fn order(&self) -> Vec<usize> {
        match &self.rule {
            EliminationRule::Layered { layers } => layers.iter().flatten().copied().collect(),
            _ => self.vertices.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EliminationSchedule {
    pub steps: Vec<EliminationStep>,
}

impl EliminationSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a step unless its vertex set is empty.
    pub fn push(&mut self, step: EliminationStep) {
        if !step.vertices.is_empty() {
            self.steps.push(step);
        }
    }

    pub fn max_claimed(&self) -> usize {
        self.steps.iter().map(|s| s.claimed_degree).max().unwrap_or(0)
    }
}

/// Result of simulating a schedule.
#[derive(Debug, Clone)]
pub struct ScheduleRun {
    /// Rule bound realized by each step.
    pub step_degrees: Vec<usize>,
    /// Every eliminated vertex with its neighborhood at elimination time, in order.
    pub eliminated: Vec<(usize, Vec<usize>)>,
    pub remaining: ElimGraph,
}

fn step_err(step: usize, rule: &EliminationRule, reason: String) -> Error {
    Error::ScheduleRule {
        step,
        rule: rule.name(),
        reason,
    }
}

/// Simulates `schedule` on `graph`, checking every side condition and that
/// each step's rule bound stays within its claimed degree.
pub fn run_schedule(graph: &UGraph, schedule: &EliminationSchedule) -> Result<ScheduleRun> {
    let mut eg = ElimGraph::new(graph);
    let mut step_degrees = Vec::with_capacity(schedule.steps.len());
    let mut eliminated = Vec::new();
    for (si, step) in schedule.steps.iter().enumerate() {
        let order = step.order();
        let set: BTreeSet<usize> = order.iter().copied().collect();
        if set.len() != order.len() {
            return Err(step_err(si, &step.rule, "repeated vertex".into()));
        }
        for &v in &order {
            if v >= graph.num_vertices {
                return Err(Error::UnknownVertex(v));
            }
            if !eg.is_alive(v) {
                return Err(step_err(si, &step.rule, format!("vertex {v} already eliminated")));
            }
        }
        let bound = match &step.rule {
            EliminationRule::Single => {
                if order.len() != 1 {
                    return Err(step_err(si, &step.rule, "needs exactly one vertex".into()));
                }
                eg.degree(order[0])
            }
            EliminationRule::Subset => set.len() + eg.set_neighborhood(&set).len() - 1,
            EliminationRule::Matching { y } => {
                let ys: BTreeSet<usize> = y.iter().copied().collect();
                if let Some(v) = set.iter().find(|v| ys.contains(v)) {
                    return Err(step_err(si, &step.rule, format!("{v} lies in both X and Y")));
                }
                for &x in &set {
                    let hits = eg.neighbors(x).iter().filter(|u| ys.contains(u)).count();
                    if hits > 1 {
                        return Err(step_err(
                            si,
                            &step.rule,
                            format!("vertex {x} has {hits} neighbors in Y"),
                        ));
                    }
                }
                let nb = eg.set_neighborhood(&set);
                set.len() + nb.iter().filter(|u| !ys.contains(u)).count()
            }
            EliminationRule::Layered { layers } => {
                let mut layer_of = HashMap::new();
                for (li, l) in layers.iter().enumerate() {
                    for &v in l {
                        layer_of.insert(v, li);
                    }
                }
                for (&v, &lv) in &layer_of {
                    for u in eg.neighbors(v) {
                        if let Some(&lu) = layer_of.get(u) {
                            if lu.abs_diff(lv) > 1 {
                                return Err(step_err(
                                    si,
                                    &step.rule,
                                    format!("edge {{{v},{u}}} joins layers {lv} and {lu}"),
                                ));
                            }
                        }
                    }
                }
                let k = layers.iter().map(Vec::len).max().unwrap_or(0);
                (2 * k + eg.set_neighborhood(&set).len()).saturating_sub(1)
            }
        };
        if bound > step.claimed_degree {
            return Err(Error::DegreeOverflow {
                step: si,
                realized: bound,
                claimed: step.claimed_degree,
            });
        }
        for &v in &order {
            let nb = eg.eliminate(v);
            debug_assert!(nb.len() <= bound, "rule bound violated at step {si}");
            eliminated.push((v, nb));
        }
        step_degrees.push(bound);
    }
    Ok(ScheduleRun {
        step_degrees,
        eliminated,
        remaining: eg,
    })
}

/// Per-step rule bounds of `schedule`; fails on a side-condition violation or
/// when a bound exceeds the step's claimed degree.
pub fn check_schedule_degrees(graph: &UGraph, schedule: &EliminationSchedule) -> Result<Vec<usize>> {
    run_schedule(graph, schedule).map(|r| r.step_degrees)
}

/// Builds a tree decomposition of `graph` from a schedule and a decomposition
/// `tail` of the graph left after the schedule.
///
/// Each eliminated vertex `v` gets the bag `N[v]` (neighborhood at elimination
/// time), attached below the bag of the earliest-eliminated member of `N(v)`,
/// or below a tail bag containing `N(v)` when all of `N(v)` survives.
/// The width is at most `max(max step degree, width(tail))`.
pub fn td_from_schedule(
    graph: &UGraph,
    schedule: &EliminationSchedule,
    tail: &TreeDecomposition,
) -> Result<TreeDecomposition> {
    let run = run_schedule(graph, schedule)?;
    let tail = if tail.nodes.is_empty() {
        TreeDecomposition::single_bag(vec![])
    } else {
        tail.clone()
    };
    let n = graph.num_vertices;
    let mut tail_bags_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in tail.nodes.iter().enumerate() {
        for &v in &node.bag {
            if v >= n {
                return Err(Error::InvalidDecomposition(format!(
                    "tail bag {i} names unknown vertex {v}"
                )));
            }
            if !run.remaining.is_alive(v) {
                return Err(Error::InvalidDecomposition(format!(
                    "tail bag {i} holds eliminated vertex {v}"
                )));
            }
            tail_bags_of[v].push(i);
        }
    }
    if let Some(v) = (0..n).find(|&v| run.remaining.is_alive(v) && tail_bags_of[v].is_empty()) {
        return Err(Error::InvalidDecomposition(format!(
            "surviving vertex {v} is not covered by the tail decomposition"
        )));
    }

    let offset = tail.nodes.len();
    let mut nodes: Vec<DecompNode> = tail
        .nodes
        .iter()
        .map(|nd| DecompNode::plain(nd.bag.clone(), nd.children.clone()))
        .collect();
    let mut elim_index = vec![usize::MAX; n];
    for (i, (v, _)) in run.eliminated.iter().enumerate() {
        elim_index[*v] = i;
    }
    for (v, nb) in &run.eliminated {
        let mut bag = nb.clone();
        bag.push(*v);
        nodes.push(DecompNode::plain(bag, vec![]));
    }
    for (i, (v, nb)) in run.eliminated.iter().enumerate() {
        let me = offset + i;
        let first = nb
            .iter()
            .copied()
            .filter(|&u| elim_index[u] != usize::MAX)
            .min_by_key(|&u| elim_index[u]);
        let parent = match first {
            Some(u) => offset + elim_index[u],
            None => {
                if nb.is_empty() {
                    tail.root
                } else {
                    let pivot = nb
                        .iter()
                        .copied()
                        .min_by_key(|&u| tail_bags_of[u].len())
                        .expect("non-empty");
                    tail_bags_of[pivot]
                        .iter()
                        .copied()
                        .find(|&b| nb.iter().all(|&u| tail.nodes[b].contains(u)))
                        .ok_or(Error::AttachmentNotFound(*v))?
                }
            }
        };
        nodes[parent].children.push(me);
    }
    let is_path = nodes.iter().all(|nd| nd.children.len() <= 1);
    Ok(TreeDecomposition {
        nodes,
        root: tail.root,
        is_path,
        is_nice: false,
    })
}

/// Output shape requested from [`normalize_nice`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Tree,
    Path,
}

/// Converts a valid decomposition into nice form of the same width.
///
/// Clauses (or edges) are assigned to the first bag, in depth-first pre-order
/// from the root, that contains all their elements; the `IntroduceClause`
/// nodes sit directly above that bag. Between a child and its parent,
/// forgotten elements (ascending) precede introduced ones (ascending). Nodes
/// with more than two children become a left-leaning chain of joins.
pub fn normalize_nice(
    target: NiceTarget<'_>,
    td: &TreeDecomposition,
    shape: Shape,
) -> Result<TreeDecomposition> {
    let graph = target.graph();
    let report = validate_decomposition(&graph, td);
    if !report.is_valid() {
        return Err(Error::InvalidDecomposition(
            report
                .violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    if shape == Shape::Path && !td.nodes.iter().all(|n| n.children.len() <= 1) {
        return Err(Error::InvalidDecomposition(
            "path shape requested for a branching decomposition".into(),
        ));
    }

    // Clause assignment in pre-order.
    let pre = td.pre_order();
    let mut bags_of: Vec<Vec<usize>> = vec![Vec::new(); target.num_elements()];
    for &i in &pre {
        for &v in &td.nodes[i].bag {
            bags_of[v].push(i);
        }
    }
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); td.nodes.len()];
    for (ci, scope) in target.clause_scopes().iter().enumerate() {
        let pivot = scope
            .iter()
            .copied()
            .min_by_key(|&v| bags_of[v].len())
            .ok_or_else(|| Error::InvalidInstance(format!("clause {ci} has no elements")))?;
        let host = bags_of[pivot]
            .iter()
            .copied()
            .find(|&b| scope.iter().all(|&v| td.nodes[b].contains(v)))
            .ok_or_else(|| {
                Error::InvalidDecomposition(format!("no bag contains all elements of clause {ci}"))
            })?;
        assigned[host].push(ci);
    }

    let mut out: Vec<DecompNode> = Vec::new();
    let push = |out: &mut Vec<DecompNode>, bag: Vec<usize>, kind, children| {
        out.push(DecompNode {
            bag,
            kind,
            children,
        });
        out.len() - 1
    };
    // top[i] = output node whose bag equals td bag i, with everything below built.
    let mut top = vec![usize::MAX; td.nodes.len()];
    for i in td.post_order() {
        let bag = &td.nodes[i].bag;
        let mut tops: Vec<usize> = Vec::new();
        let children = &td.nodes[i].children;
        if children.is_empty() {
            let mut cur = push(&mut out, vec![], NodeKind::Leaf, vec![]);
            let mut cur_bag: Vec<usize> = vec![];
            for &v in bag {
                cur_bag.push(v);
                cur = push(
                    &mut out,
                    cur_bag.clone(),
                    NodeKind::IntroduceVertex(v),
                    vec![cur],
                );
            }
            tops.push(cur);
        }
        for &c in children {
            let mut cur = top[c];
            let mut cur_bag = td.nodes[c].bag.clone();
            for v in td.nodes[c].bag.iter().filter(|v| !td.nodes[i].contains(**v)) {
                cur_bag.retain(|x| x != v);
                cur = push(&mut out, cur_bag.clone(), NodeKind::Forget(*v), vec![cur]);
            }
            for &v in bag.iter().filter(|v| !td.nodes[c].contains(**v)) {
                let pos = cur_bag.binary_search(&v).unwrap_err();
                cur_bag.insert(pos, v);
                cur = push(
                    &mut out,
                    cur_bag.clone(),
                    NodeKind::IntroduceVertex(v),
                    vec![cur],
                );
            }
            tops.push(cur);
        }
        let mut cur = tops[0];
        for &t in &tops[1..] {
            cur = push(&mut out, bag.clone(), NodeKind::Join, vec![cur, t]);
        }
        for &ci in &assigned[i] {
            cur = push(&mut out, bag.clone(), NodeKind::IntroduceClause(ci), vec![cur]);
        }
        top[i] = cur;
    }
    let mut cur = top[td.root];
    let mut cur_bag = td.nodes[td.root].bag.clone();
    for v in td.nodes[td.root].bag.clone() {
        cur_bag.retain(|&x| x != v);
        cur = push(&mut out, cur_bag.clone(), NodeKind::Forget(v), vec![cur]);
    }
    let is_path = out.iter().all(|n| n.children.len() <= 1);
    Ok(TreeDecomposition {
        nodes: out,
        root: cur,
        is_path,
        is_nice: true,
    })
}

/// Builds a path decomposition from a sequence of introduce/forget events;
/// the bag in force just before each forget run is recorded.
#[derive(Debug, Default, Clone)]
pub struct PathSweep {
    current: BTreeSet<usize>,
    bags: Vec<Vec<usize>>,
    dirty: bool,
}

impl PathSweep {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn introduce(&mut self, v: usize) {
        if self.current.insert(v) {
            self.dirty = true;
        }
    }

    pub fn introduce_all(&mut self, vs: impl IntoIterator<Item = usize>) {
        for v in vs {
            self.introduce(v);
        }
    }

    pub fn forget(&mut self, v: usize) {
        if self.dirty {
            self.bags.push(self.current.iter().copied().collect());
            self.dirty = false;
        }
        self.current.remove(&v);
    }

    pub fn forget_all(&mut self, vs: impl IntoIterator<Item = usize>) {
        for v in vs {
            self.forget(v);
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.current.contains(&v)
    }

    pub fn current_len(&self) -> usize {
        self.current.len()
    }

    pub fn finish(mut self) -> TreeDecomposition {
        if self.dirty || self.bags.is_empty() {
            self.bags.push(self.current.iter().copied().collect());
        }
        TreeDecomposition::from_path_bags(self.bags)
    }
}
