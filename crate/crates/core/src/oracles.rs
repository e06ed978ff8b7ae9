//! Ground-truth solvers: exhaustive search at desk scale, a tree-decomposition
//! DP for independent set, and CDCL-backed decision procedures for the large
//! instances reductions emit.

use std::collections::{HashMap, HashSet};

use varisat::{ExtendFormula, Lit, Solver};

use crate::error::{Error, Result};
use crate::instances::{validate_nice, CnfInstance, NiceTarget, NodeKind, TreeDecomposition, UGraph};

/// Default cap on variables (or vertices) for exhaustive search.
pub const DEFAULT_CAP: usize = 26;

/// The cap in force: `WIDTHRED_CAP` when set to an integer, else [`DEFAULT_CAP`].
pub fn configured_cap() -> usize {
    std::env::var("WIDTHRED_CAP")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    SatDecision,
    MaxCount,
    MaxSize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    Assignment(Vec<bool>),
    Vertices(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleAnswer {
    pub kind: OracleKind,
    /// 0/1 for decisions, the optimum otherwise.
    pub value: u64,
    pub witness: Option<Witness>,
}

impl OracleAnswer {
    pub fn decision(yes: bool, witness: Option<Witness>) -> Self {
        OracleAnswer {
            kind: OracleKind::SatDecision,
            value: u64::from(yes),
            witness,
        }
    }

    pub fn is_yes(&self) -> bool {
        self.value != 0
    }
}

fn check_cap(what: &'static str, value: usize, cap: usize) -> Result<()> {
    if value > cap {
        Err(Error::CapExceeded { what, value, cap })
    } else {
        Ok(())
    }
}

/// Walks all assignments in Gray-code order, maintaining per-clause counts of
/// true literals; `visit` sees the assignment and the satisfied weight and
/// returns `true` to stop.
fn gray_walk(cnf: &CnfInstance, mut visit: impl FnMut(&[bool], u64) -> bool) {
    let n = cnf.num_vars;
    let mut occurs: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for (ci, c) in cnf.clauses.iter().enumerate() {
        for l in &c.lits {
            occurs[l.var].push((ci, l.negated));
        }
    }
    let mut assignment = vec![false; n];
    let mut true_lits: Vec<u32> = cnf
        .clauses
        .iter()
        .map(|c| c.lits.iter().filter(|l| l.negated).count() as u32)
        .collect();
    let mut weight: u64 = cnf
        .clauses
        .iter()
        .zip(&true_lits)
        .filter(|(_, &t)| t > 0)
        .map(|(c, _)| c.multiplicity)
        .sum();
    if visit(&assignment, weight) {
        return;
    }
    for step in 1u64..1u64 << n {
        let v = step.trailing_zeros() as usize;
        assignment[v] = !assignment[v];
        for &(ci, negated) in &occurs[v] {
            let now_true = assignment[v] != negated;
            let t = &mut true_lits[ci];
            if now_true {
                *t += 1;
                if *t == 1 {
                    weight += cnf.clauses[ci].multiplicity;
                }
            } else {
                *t -= 1;
                if *t == 0 {
                    weight -= cnf.clauses[ci].multiplicity;
                }
            }
        }
        if visit(&assignment, weight) {
            return;
        }
    }
}

pub fn sat_bruteforce(cnf: &CnfInstance) -> Result<OracleAnswer> {
    sat_bruteforce_with_cap(cnf, configured_cap())
}

pub fn sat_bruteforce_with_cap(cnf: &CnfInstance, cap: usize) -> Result<OracleAnswer> {
    check_cap("variables", cnf.num_vars, cap)?;
    let total = cnf.total_weight();
    let mut found = None;
    gray_walk(cnf, |a, w| {
        if w == total {
            found = Some(a.to_vec());
            true
        } else {
            false
        }
    });
    Ok(OracleAnswer::decision(
        found.is_some(),
        found.map(Witness::Assignment),
    ))
}

/// Maximum total multiplicity of simultaneously satisfied clauses.
pub fn max2sat_bruteforce(cnf: &CnfInstance) -> Result<OracleAnswer> {
    max2sat_bruteforce_with_cap(cnf, configured_cap())
}

pub fn max2sat_bruteforce_with_cap(cnf: &CnfInstance, cap: usize) -> Result<OracleAnswer> {
    check_cap("variables", cnf.num_vars, cap)?;
    let mut best = (0u64, vec![false; cnf.num_vars]);
    let total = cnf.total_weight();
    gray_walk(cnf, |a, w| {
        if w > best.0 || (w == 0 && a.iter().all(|b| !b)) {
            best = (w, a.to_vec());
        }
        w == total
    });
    Ok(OracleAnswer {
        kind: OracleKind::MaxCount,
        value: best.0,
        witness: Some(Witness::Assignment(best.1)),
    })
}

/// Exact maximum independent set by exhaustive branching over vertex bitsets.
pub fn is_bruteforce(graph: &UGraph) -> Result<OracleAnswer> {
    is_bruteforce_with_cap(graph, configured_cap().max(DEFAULT_CAP))
}

pub fn is_bruteforce_with_cap(graph: &UGraph, cap: usize) -> Result<OracleAnswer> {
    check_cap("vertices", graph.num_vertices, cap.min(64))?;
    let n = graph.num_vertices;
    let mut nb = vec![0u64; n];
    for (u, v) in graph.edges() {
        nb[u] |= 1 << v;
        nb[v] |= 1 << u;
    }
    fn search(nb: &[u64], cand: u64, chosen: u64, best: &mut (u32, u64)) {
        if chosen.count_ones() + cand.count_ones() <= best.0 {
            return;
        }
        if cand == 0 {
            *best = (chosen.count_ones(), chosen);
            return;
        }
        let v = cand.trailing_zeros() as usize;
        let rest = cand & !(1 << v);
        search(nb, rest & !nb[v], chosen | 1 << v, best);
        if nb[v] & rest != 0 {
            search(nb, rest, chosen, best);
        }
    }
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = (0u32, 0u64);
    search(&nb, all, 0, &mut best);
    let set: Vec<usize> = (0..n).filter(|&v| best.1 >> v & 1 == 1).collect();
    Ok(OracleAnswer {
        kind: OracleKind::MaxSize,
        value: u64::from(best.0),
        witness: Some(Witness::Vertices(set)),
    })
}

/// Maximum independent set by dynamic programming over a nice decomposition.
/// Tables are keyed by the independent subsets of each bag.
pub fn is_treewidth_dp(graph: &UGraph, ntd: &TreeDecomposition) -> Result<OracleAnswer> {
    let report = validate_nice(NiceTarget::Graph(graph), ntd);
    if !report.is_valid() {
        return Err(Error::InvalidDecomposition(format!(
            "not a nice decomposition of the graph: {}",
            report.violations[0]
        )));
    }
    let adj = graph.adjacency();
    let mut tables: Vec<Option<HashMap<Vec<usize>, u64>>> = vec![None; ntd.nodes.len()];
    for i in ntd.post_order() {
        let node = &ntd.nodes[i];
        let mut take = |c: usize| tables[c].take().expect("child table computed");
        let table = match node.kind {
            NodeKind::Leaf => HashMap::from([(Vec::new(), 0)]),
            NodeKind::IntroduceVertex(v) => {
                let child = take(node.children[0]);
                let mut t = HashMap::with_capacity(child.len() * 2);
                for (set, val) in child {
                    if set.iter().all(|u| adj[v].binary_search(u).is_err()) {
                        let mut with = set.clone();
                        let pos = with.binary_search(&v).unwrap_err();
                        with.insert(pos, v);
                        t.insert(with, val + 1);
                    }
                    t.insert(set, val);
                }
                t
            }
            NodeKind::Forget(v) => {
                let child = take(node.children[0]);
                let mut t: HashMap<Vec<usize>, u64> = HashMap::with_capacity(child.len());
                for (mut set, val) in child {
                    if let Ok(pos) = set.binary_search(&v) {
                        set.remove(pos);
                    }
                    let e = t.entry(set).or_insert(0);
                    *e = (*e).max(val);
                }
                t
            }
            NodeKind::Join => {
                let left = take(node.children[0]);
                let right = take(node.children[1]);
                left.into_iter()
                    .filter_map(|(set, lv)| {
                        let rv = *right.get(&set)?;
                        let shared = set.len() as u64;
                        Some((set, lv + rv - shared))
                    })
                    .collect()
            }
            NodeKind::IntroduceClause(_) => take(node.children[0]),
            NodeKind::Plain => unreachable!("validated nice"),
        };
        tables[i] = Some(table);
    }
    let root = tables[ntd.root].take().unwrap_or_default();
    Ok(OracleAnswer {
        kind: OracleKind::MaxSize,
        value: root.values().copied().max().unwrap_or(0),
        witness: None,
    })
}

fn lit(var: usize, positive: bool) -> Lit {
    Lit::from_index(var, positive)
}

fn cnf_into_solver(solver: &mut Solver<'_>, cnf: &CnfInstance) {
    for c in &cnf.clauses {
        let lits: Vec<Lit> = c.lits.iter().map(|l| lit(l.var, !l.negated)).collect();
        solver.add_clause(&lits);
    }
}

fn solve(solver: &mut Solver<'_>, num_vars: usize) -> Result<Option<Vec<bool>>> {
    let sat = solver
        .solve()
        .map_err(|e| Error::Unsupported(format!("SAT solver failed: {e}")))?;
    if !sat {
        return Ok(None);
    }
    let mut a = vec![false; num_vars];
    for l in solver.model().unwrap_or_default() {
        if l.index() < num_vars {
            a[l.index()] = l.is_positive();
        }
    }
    Ok(Some(a))
}

/// Satisfiability via a CDCL solver, for instances past the exhaustive cap.
/// The returned witness is re-verified before it is reported.
pub fn sat_cdcl(cnf: &CnfInstance) -> Result<OracleAnswer> {
    let mut solver = Solver::new();
    solver.add_clause(&[lit(cnf.num_vars, true)]);
    cnf_into_solver(&mut solver, cnf);
    let model = solve(&mut solver, cnf.num_vars)?;
    if let Some(a) = &model {
        if !cnf.is_satisfied_by(a) {
            return Err(Error::Unsupported("SAT solver model fails re-verification".into()));
        }
    }
    Ok(OracleAnswer::decision(model.is_some(), model.map(Witness::Assignment)))
}

/// Exhaustive search within the cap, CDCL beyond it.
pub fn sat_decide(cnf: &CnfInstance) -> Result<OracleAnswer> {
    if cnf.num_vars <= configured_cap().min(20) {
        sat_bruteforce_with_cap(cnf, usize::MAX)
    } else {
        sat_cdcl(cnf)
    }
}

/// Adds clauses forcing at least `k` of `lits` true (sequential counter).
/// `next_var` is the first free variable index; returns the next free one.
fn at_least(solver: &mut Solver<'_>, lits: &[Lit], k: usize, mut next_var: usize) -> usize {
    if k == 0 {
        return next_var;
    }
    if k > lits.len() {
        solver.add_clause(&[]);
        return next_var;
    }
    // Equivalent: at most n - k of the negations are true.
    let n = lits.len();
    let bound = n - k;
    let neg: Vec<Lit> = lits.iter().map(|&l| !l).collect();
    if bound == 0 {
        for &l in lits {
            solver.add_clause(&[l]);
        }
        return next_var;
    }
    // r[i][j]: at least j+1 of neg[0..=i] are true.
    let mut prev: Vec<Lit> = Vec::new();
    for (i, &x) in neg.iter().enumerate() {
        let width = bound.min(i + 1);
        let cur: Vec<Lit> = (0..width).map(|j| lit(next_var + j, true)).collect();
        next_var += width;
        solver.add_clause(&[!x, cur[0]]);
        for j in 0..width {
            if j < prev.len() {
                solver.add_clause(&[!prev[j], cur[j]]);
            }
            if j > 0 && j - 1 < prev.len() {
                solver.add_clause(&[!x, !prev[j - 1], cur[j]]);
            }
        }
        if prev.len() == bound {
            solver.add_clause(&[!x, !prev[bound - 1]]);
        }
        prev = cur;
    }
    next_var
}

fn ordered(a: Lit, b: Lit) -> (Lit, Lit) {
    if a.code() <= b.code() {
        (a, b)
    } else {
        (b, a)
    }
}

/// When every soft clause is a unit, groups them into cliques of literals
/// that hard binary clauses forbid from holding together.
fn exclusive_groups(units: &[Option<Lit>], excluded: &HashSet<(Lit, Lit)>) -> Option<Vec<Vec<usize>>> {
    let lits: Vec<Lit> = units.iter().copied().collect::<Option<_>>()?;
    let mut by_lit: HashMap<Lit, Vec<usize>> = HashMap::new();
    for (i, &l) in lits.iter().enumerate() {
        by_lit.entry(l).or_default().push(i);
    }
    let mut conflicts = UGraph::new(lits.len());
    for &(a, b) in excluded {
        if let (Some(xs), Some(ys)) = (by_lit.get(&a), by_lit.get(&b)) {
            for &x in xs {
                for &y in ys {
                    if x != y {
                        conflicts.add_edge(x, y).expect("in range");
                    }
                }
            }
        }
    }
    Some(greedy_clique_partition(&conflicts))
}

/// Decides whether some assignment satisfies clauses of total multiplicity at
/// least `target`.
///
/// A clause is hard when losing it alone drops the reachable total below the
/// target. The remaining clauses must all have equal multiplicity; they are
/// relaxed with fresh indicators and counted with a cardinality encoding,
/// or by one clause per group when soft units split into as many mutually
/// exclusive groups as must hold.
/// Instances within the exhaustive cap are searched exhaustively instead.
pub fn max2sat_decide(cnf: &CnfInstance, target: u64) -> Result<OracleAnswer> {
    if cnf.num_vars <= configured_cap().min(20) {
        let best = max2sat_bruteforce_with_cap(cnf, usize::MAX)?;
        let yes = best.value >= target;
        return Ok(OracleAnswer::decision(yes, if yes { best.witness } else { None }));
    }
    let total = cnf.total_weight();
    if target > total {
        return Ok(OracleAnswer::decision(false, None));
    }
    let mut solver = Solver::new();
    let n = cnf.num_vars;
    let mut next_var = n;
    let mut hard_weight = 0u64;
    let mut soft: Vec<Lit> = Vec::new();
    let mut soft_weight = None;
    let mut soft_units: Vec<Option<Lit>> = Vec::new();
    let mut hard_pairs: HashSet<(Lit, Lit)> = HashSet::new();
    for c in &cnf.clauses {
        let mut lits: Vec<Lit> = c.lits.iter().map(|l| lit(l.var, !l.negated)).collect();
        if total - c.multiplicity < target {
            hard_weight += c.multiplicity;
            if let [a, b] = lits[..] {
                hard_pairs.insert(ordered(!a, !b));
            }
            solver.add_clause(&lits);
            continue;
        }
        soft_units.push(if let [a] = lits[..] { Some(a) } else { None });
        match soft_weight {
            None => soft_weight = Some(c.multiplicity),
            Some(w) if w != c.multiplicity => {
                return Err(Error::Unsupported(
                    "weighted instance beyond the exhaustive cap needs uniform soft weights".into(),
                ))
            }
            _ => {}
        }
        let r = lit(next_var, true);
        next_var += 1;
        lits.push(!r);
        solver.add_clause(&lits);
        soft.push(r);
    }
    let need = target.saturating_sub(hard_weight);
    let per = soft_weight.unwrap_or(1).max(1);
    let count = need.div_ceil(per) as usize;
    match exclusive_groups(&soft_units, &hard_pairs) {
        // Each group holds at most one true soft literal.
        Some(groups) if groups.len() < count => return Ok(OracleAnswer::decision(false, None)),
        Some(groups) if groups.len() == count => {
            for g in groups {
                let any: Vec<Lit> = g.iter().map(|&i| soft[i]).collect();
                solver.add_clause(&any);
            }
        }
        _ => next_var = at_least(&mut solver, &soft, count, next_var),
    }
    solver.add_clause(&[lit(next_var, true)]);
    let model = solve(&mut solver, n)?;
    if let Some(a) = &model {
        if cnf.satisfied_weight(a) < target {
            return Err(Error::Unsupported("SAT solver model fails re-verification".into()));
        }
    }
    Ok(OracleAnswer::decision(model.is_some(), model.map(Witness::Assignment)))
}

/// Decides whether `graph` has an independent set of size at least `k`:
/// exhaustively within the cap. Beyond it a greedy clique cover settles the
/// question when it has at most `k` parts; otherwise a cardinality encoding
/// is solved.
pub fn is_decide(graph: &UGraph, k: u64) -> Result<OracleAnswer> {
    let n = graph.num_vertices;
    if n <= configured_cap().min(20) {
        let best = is_bruteforce_with_cap(graph, usize::MAX)?;
        let yes = best.value >= k;
        return Ok(OracleAnswer::decision(yes, if yes { best.witness } else { None }));
    }
    if k > n as u64 {
        return Ok(OracleAnswer::decision(false, None));
    }
    let parts = greedy_clique_partition(graph);
    match (parts.len() as u64).cmp(&k) {
        std::cmp::Ordering::Less => return Ok(OracleAnswer::decision(false, None)),
        std::cmp::Ordering::Equal => return is_clique_cover_decide(graph, &parts),
        std::cmp::Ordering::Greater => {}
    }
    let mut solver = Solver::new();
    for (u, v) in graph.edges() {
        solver.add_clause(&[lit(u, false), lit(v, false)]);
    }
    let chosen: Vec<Lit> = (0..n).map(|v| lit(v, true)).collect();
    let next_var = at_least(&mut solver, &chosen, k as usize, n);
    solver.add_clause(&[lit(next_var, true)]);
    let model = solve(&mut solver, n)?;
    let witness = model.map(|a| (0..n).filter(|&v| a[v]).collect::<Vec<_>>());
    if let Some(set) = &witness {
        if (set.len() as u64) < k || !graph.is_independent(set) {
            return Err(Error::Unsupported("SAT solver model fails re-verification".into()));
        }
    }
    Ok(OracleAnswer::decision(witness.is_some(), witness.map(Witness::Vertices)))
}

/// Decides whether `graph` has an independent set of size `parts.len()`,
/// where `parts` partitions the vertices into cliques (so no larger set
/// exists and any such set takes exactly one vertex per part).
pub fn is_clique_cover_decide(graph: &UGraph, parts: &[Vec<usize>]) -> Result<OracleAnswer> {
    check_clique_partition(graph, parts)?;
    let mut solver = Solver::new();
    solver.add_clause(&[lit(graph.num_vertices, true)]);
    for p in parts {
        let lits: Vec<Lit> = p.iter().map(|&v| lit(v, true)).collect();
        solver.add_clause(&lits);
    }
    for (u, v) in graph.edges() {
        solver.add_clause(&[lit(u, false), lit(v, false)]);
    }
    let model = solve(&mut solver, graph.num_vertices)?;
    let witness = model.map(|a| (0..a.len()).filter(|&v| a[v]).collect::<Vec<_>>());
    if let Some(set) = &witness {
        if set.len() != parts.len() || !graph.is_independent(set) {
            return Err(Error::Unsupported("SAT solver model fails re-verification".into()));
        }
    }
    Ok(OracleAnswer::decision(witness.is_some(), witness.map(Witness::Vertices)))
}

/// Covers the vertices by cliques greedily: each uncovered vertex (in id
/// order) starts a clique that absorbs every later uncovered vertex adjacent
/// to all its members. Any clique partition bounds the independence number.
pub fn greedy_clique_partition(graph: &UGraph) -> Vec<Vec<usize>> {
    let adj = graph.adjacency();
    let mut covered = vec![false; graph.num_vertices];
    let mut parts = Vec::new();
    for v in 0..graph.num_vertices {
        if covered[v] {
            continue;
        }
        covered[v] = true;
        let mut part = vec![v];
        for &u in &adj[v] {
            if !covered[u] && part.iter().all(|&w| graph.has_edge(u, w)) {
                covered[u] = true;
                part.push(u);
            }
        }
        parts.push(part);
    }
    parts
}

pub fn check_clique_partition(graph: &UGraph, parts: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; graph.num_vertices];
    for (pi, p) in parts.iter().enumerate() {
        for (i, &u) in p.iter().enumerate() {
            if u >= graph.num_vertices {
                return Err(Error::UnknownVertex(u));
            }
            if std::mem::replace(&mut seen[u], true) {
                return Err(Error::InvalidInstance(format!("vertex {u} lies in two parts")));
            }
            if let Some(&v) = p[i + 1..].iter().find(|&&v| !graph.has_edge(u, v)) {
                return Err(Error::InvalidInstance(format!(
                    "part {pi} is not a clique: {u} and {v} are not adjacent"
                )));
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(v) => Err(Error::InvalidInstance(format!("vertex {v} lies in no part"))),
        None => Ok(()),
    }
}

/// Calls `visit` on every independent set that takes exactly one vertex from
/// each part of a clique partition; stops early when `visit` returns `true`.
pub fn for_each_transversal_is(
    graph: &UGraph,
    parts: &[Vec<usize>],
    mut visit: impl FnMut(&[usize]) -> bool,
) -> Result<()> {
    check_clique_partition(graph, parts)?;
    struct Search<'a> {
        parts: &'a [Vec<usize>],
        adj: Vec<Vec<usize>>,
        blocked: Vec<u32>,
        done: Vec<bool>,
        chosen: Vec<usize>,
    }
    impl Search<'_> {
        fn open(&self, part: usize) -> usize {
            self.parts[part].iter().filter(|&&v| self.blocked[v] == 0).count()
        }

        // Branches on the open part with the fewest free vertices, so a part
        // that has been blocked out is noticed as soon as it happens.
        fn rec(&mut self, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
            let mut best: Option<(usize, usize)> = None;
            for p in (0..self.parts.len()).filter(|&p| !self.done[p]) {
                let free = self.open(p);
                if free == 0 {
                    return false;
                }
                if best.map_or(true, |(_, f)| free < f) {
                    best = Some((p, free));
                }
            }
            let Some((p, _)) = best else {
                return visit(&self.chosen);
            };
            self.done[p] = true;
            let mut stop = false;
            for i in 0..self.parts[p].len() {
                let v = self.parts[p][i];
                if self.blocked[v] > 0 {
                    continue;
                }
                for &u in &self.adj[v] {
                    self.blocked[u] += 1;
                }
                self.chosen.push(v);
                stop = self.rec(visit);
                self.chosen.pop();
                for &u in &self.adj[v] {
                    self.blocked[u] -= 1;
                }
                if stop {
                    break;
                }
            }
            self.done[p] = false;
            stop
        }
    }
    let mut search = Search {
        parts,
        adj: graph.adjacency(),
        blocked: vec![0; graph.num_vertices],
        done: vec![false; parts.len()],
        chosen: Vec::with_capacity(parts.len()),
    };
    search.rec(&mut visit);
    Ok(())
}
