//! Text formats: DIMACS CNF (with Max 2-SAT extensions), PACE graphs and
//! PACE tree decompositions (with node-kind annotations).
//!
//! All element identifiers are 1-based on disk and 0-based in memory.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instances::{
    Clause, CnfInstance, DecompNode, Literal, NodeKind, TreeDecomposition, UGraph,
};

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("expected a number, found `{tok}`")))
}

/// Parses DIMACS CNF. Recognized extensions: `c m2s target <k>`,
/// `c kcnf <len>` and the clause prefix `w <multiplicity>`.
pub fn parse_dimacs(text: &str) -> Result<CnfInstance> {
    let mut header: Option<(usize, usize)> = None;
    let mut target = None;
    let mut max_len = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut mult: Option<u64> = None;
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] == "c" {
            match toks.get(1..) {
                Some(["m2s", "target", k]) => target = Some(parse_num(k, ln)?),
                Some(["kcnf", k]) => max_len = Some(parse_num(k, ln)?),
                _ => {}
            }
            continue;
        }
        if toks[0] == "p" {
            if toks.len() != 4 || toks[1] != "cnf" {
                return Err(Error::parse(ln, "expected `p cnf <vars> <clauses>`"));
            }
            header = Some((parse_num(toks[2], ln)?, parse_num(toks[3], ln)?));
            continue;
        }
        let (nvars, _) = header.ok_or_else(|| Error::parse(ln, "clause before header"))?;
        let mut it = toks.iter();
        while let Some(tok) = it.next() {
            if *tok == "w" {
                if !current.is_empty() || mult.is_some() {
                    return Err(Error::parse(ln, "`w` must start a clause"));
                }
                let m = it
                    .next()
                    .ok_or_else(|| Error::parse(ln, "`w` without multiplicity"))?;
                mult = Some(parse_num(m, ln)?);
                continue;
            }
            let l: i64 = parse_num(tok, ln)?;
            if l == 0 {
                clauses.push(Clause::weighted(
                    std::mem::take(&mut current),
                    mult.take().unwrap_or(1),
                ));
            } else {
                let v = l.unsigned_abs() as usize;
                if v > nvars {
                    return Err(Error::parse(ln, format!("variable {v} exceeds {nvars}")));
                }
                current.push(Literal::new(v - 1, l > 0));
            }
        }
    }
    if !current.is_empty() {
        return Err(Error::parse(text.lines().count(), "unterminated clause"));
    }
    let (nvars, nclauses) = header.ok_or_else(|| Error::parse(0, "missing header"))?;
    if nclauses != clauses.len() {
        return Err(Error::parse(
            0,
            format!("header declares {nclauses} clauses, found {}", clauses.len()),
        ));
    }
    let cnf = CnfInstance {
        num_vars: nvars,
        clauses,
        target,
        max_clause_len: max_len,
    };
    cnf.validate()?;
    Ok(cnf)
}

pub fn write_dimacs(cnf: &CnfInstance) -> String {
    let mut s = String::new();
    if let Some(k) = cnf.target {
        writeln!(s, "c m2s target {k}").unwrap();
    }
    if let Some(k) = cnf.max_clause_len {
        writeln!(s, "c kcnf {k}").unwrap();
    }
    writeln!(s, "p cnf {} {}", cnf.num_vars, cnf.clauses.len()).unwrap();
    for c in &cnf.clauses {
        if c.multiplicity != 1 {
            write!(s, "w {} ", c.multiplicity).unwrap();
        }
        for l in &c.lits {
            write!(s, "{} ", l.to_dimacs()).unwrap();
        }
        s.push_str("0\n");
    }
    s
}

/// Parses a PACE `.gr` graph, with the extension header `c is target <k>`.
pub fn parse_graph(text: &str) -> Result<UGraph> {
    let mut g: Option<UGraph> = None;
    let mut declared = 0;
    let mut target = None;
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["c", "is", "target", k] => target = Some(parse_num(k, ln)?),
            ["c", ..] => {}
            ["p", "tw", n, m] => {
                g = Some(UGraph::new(parse_num(n, ln)?));
                declared = parse_num(m, ln)?;
            }
            [u, v] => {
                let g = g
                    .as_mut()
                    .ok_or_else(|| Error::parse(ln, "edge before header"))?;
                let u: usize = parse_num(u, ln)?;
                let v: usize = parse_num(v, ln)?;
                if u == 0 || v == 0 || u > g.num_vertices || v > g.num_vertices {
                    return Err(Error::parse(ln, "vertex out of range"));
                }
                g.add_edge(u - 1, v - 1)
                    .map_err(|e| Error::parse(ln, e.to_string()))?;
            }
            _ => return Err(Error::parse(ln, format!("unrecognized line `{line}`"))),
        }
    }
    let mut g = g.ok_or_else(|| Error::parse(0, "missing `p tw` header"))?;
    if g.num_edges() != declared {
        return Err(Error::parse(
            0,
            format!("header declares {declared} edges, found {}", g.num_edges()),
        ));
    }
    g.is_target = target;
    Ok(g)
}

pub fn write_graph(g: &UGraph) -> String {
    let mut s = String::new();
    if let Some(k) = g.is_target {
        writeln!(s, "c is target {k}").unwrap();
    }
    writeln!(s, "p tw {} {}", g.num_vertices, g.num_edges()).unwrap();
    for (u, v) in g.edges() {
        writeln!(s, "{} {}", u + 1, v + 1).unwrap();
    }
    s
}

fn parse_kind(toks: &[&str], ln: usize) -> Result<NodeKind> {
    let arg = |i: usize| -> Result<usize> {
        let v: usize = parse_num(
            toks.get(i)
                .ok_or_else(|| Error::parse(ln, "missing kind argument"))?,
            ln,
        )?;
        v.checked_sub(1)
            .ok_or_else(|| Error::parse(ln, "identifiers are 1-based"))
    };
    Ok(match toks.first().copied() {
        Some("Leaf") => NodeKind::Leaf,
        Some("IntroV") => NodeKind::IntroduceVertex(arg(1)?),
        Some("IntroC") => NodeKind::IntroduceClause(arg(1)?),
        Some("Forget") => NodeKind::Forget(arg(1)?),
        Some("Join") => NodeKind::Join,
        Some("Plain") => NodeKind::Plain,
        other => return Err(Error::parse(ln, format!("unknown node kind {other:?}"))),
    })
}

/// Parses a PACE `.td` file. Extensions: `c root <id>` and
/// `c kind <id> <Leaf|IntroV v|IntroC c|Forget v|Join|Plain>`.
///
/// Arcs are oriented away from the root (bag 1 unless `c root` says otherwise);
/// children keep the order in which their arcs appear.
pub fn parse_td(text: &str) -> Result<TreeDecomposition> {
    let mut nbags = None;
    let mut bags: Vec<Option<Vec<usize>>> = Vec::new();
    let mut kinds: Vec<Option<NodeKind>> = Vec::new();
    let mut root = 0usize;
    let mut arcs: Vec<(usize, usize)> = Vec::new();
    let mut pending_kinds = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["c", "root", id] => {
                let id: usize = parse_num(id, ln)?;
                root = id
                    .checked_sub(1)
                    .ok_or_else(|| Error::parse(ln, "bag ids are 1-based"))?;
            }
            ["c", "kind", id, rest @ ..] => {
                let id: usize = parse_num(id, ln)?;
                let id = id
                    .checked_sub(1)
                    .ok_or_else(|| Error::parse(ln, "bag ids are 1-based"))?;
                pending_kinds.push((id, parse_kind(rest, ln)?));
            }
            ["c", ..] => {}
            ["s", "td", b, _w, _n] => {
                let b: usize = parse_num(b, ln)?;
                nbags = Some(b);
                bags = vec![None; b];
                kinds = vec![None; b];
            }
            ["b", id, vs @ ..] => {
                let n = nbags.ok_or_else(|| Error::parse(ln, "bag before header"))?;
                let id: usize = parse_num(id, ln)?;
                if id == 0 || id > n {
                    return Err(Error::parse(ln, format!("bag id {id} out of range")));
                }
                let mut bag = vs
                    .iter()
                    .map(|t| {
                        let v: usize = parse_num(t, ln)?;
                        v.checked_sub(1)
                            .ok_or_else(|| Error::parse(ln, "vertices are 1-based"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                bag.sort_unstable();
                bag.dedup();
                bags[id - 1] = Some(bag);
            }
            [a, b] => {
                let a: usize = parse_num(a, ln)?;
                let b: usize = parse_num(b, ln)?;
                if a == 0 || b == 0 {
                    return Err(Error::parse(ln, "bag ids are 1-based"));
                }
                arcs.push((a - 1, b - 1));
            }
            _ => return Err(Error::parse(ln, format!("unrecognized line `{line}`"))),
        }
    }
    let n = nbags.ok_or_else(|| Error::parse(0, "missing `s td` header"))?;
    for (id, k) in pending_kinds {
        if id >= n {
            return Err(Error::parse(0, format!("kind for unknown bag {}", id + 1)));
        }
        kinds[id] = Some(k);
    }
    if n > 0 && root >= n {
        return Err(Error::parse(0, "root out of range"));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &arcs {
        if a >= n || b >= n {
            return Err(Error::parse(0, "arc references unknown bag"));
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    if n > 0 {
        seen[root] = true;
        queue.push_back(root);
    }
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                children[i].push(j);
                queue.push_back(j);
            }
        }
    }
    if arcs.len() + 1 != n.max(1) || seen.iter().any(|s| !s) {
        return Err(Error::InvalidDecomposition(
            "arcs do not form a spanning tree".into(),
        ));
    }
    let annotated = kinds.iter().any(Option::is_some);
    let nodes: Vec<DecompNode> = (0..n)
        .map(|i| {
            Ok(DecompNode {
                bag: bags[i]
                    .clone()
                    .ok_or_else(|| Error::parse(0, format!("bag {} missing", i + 1)))?,
                kind: kinds[i].unwrap_or(NodeKind::Plain),
                children: std::mem::take(&mut children[i]),
            })
        })
        .collect::<Result<_>>()?;
    let is_path = nodes.iter().all(|nd| nd.children.len() <= 1);
    let is_nice = annotated && nodes.iter().all(|nd| nd.kind != NodeKind::Plain);
    Ok(TreeDecomposition {
        nodes,
        root,
        is_path,
        is_nice,
    })
}

/// Writes `td` in PACE form; `num_elements` fills the header's vertex count.
pub fn write_td(td: &TreeDecomposition, num_elements: usize) -> String {
    let mut s = String::new();
    writeln!(s, "c root {}", td.root + 1).unwrap();
    if td.is_nice || td.nodes.iter().any(|n| n.kind != NodeKind::Plain) {
        for (i, node) in td.nodes.iter().enumerate() {
            let kind = match node.kind {
                NodeKind::Leaf => "Leaf".to_string(),
                NodeKind::IntroduceVertex(v) => format!("IntroV {}", v + 1),
                NodeKind::IntroduceClause(c) => format!("IntroC {}", c + 1),
                NodeKind::Forget(v) => format!("Forget {}", v + 1),
                NodeKind::Join => "Join".to_string(),
                NodeKind::Plain => "Plain".to_string(),
            };
            writeln!(s, "c kind {} {kind}", i + 1).unwrap();
        }
    }
    let width1 = td.nodes.iter().map(|n| n.bag.len()).max().unwrap_or(0);
    writeln!(s, "s td {} {} {}", td.nodes.len(), width1, num_elements).unwrap();
    for (i, node) in td.nodes.iter().enumerate() {
        write!(s, "b {}", i + 1).unwrap();
        for v in &node.bag {
            write!(s, " {}", v + 1).unwrap();
        }
        s.push('\n');
    }
    for i in td.pre_order() {
        for &c in &td.nodes[i].children {
            writeln!(s, "{} {}", i + 1, c + 1).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimacs_with_extensions() {
        let text = "c m2s target 3\np cnf 3 3\n1 -2 0\nw 4 -1 -3 0\n2 0\n";
        let cnf = parse_dimacs(text).unwrap();
        assert_eq!(cnf.target, Some(3));
        assert_eq!(cnf.clauses[1].multiplicity, 4);
        assert_eq!(cnf.clauses[1].lits, vec![Literal::neg(0), Literal::neg(2)]);
        assert_eq!(write_dimacs(&cnf), text);
    }

    #[test]
    fn dimacs_errors() {
        assert!(parse_dimacs("p cnf 2 1\n1 3 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 2\n1 2 0\n").is_err());
        assert!(parse_dimacs("1 2 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 2\n").is_err());
    }

    #[test]
    fn graph_roundtrip() {
        let text = "c is target 2\np tw 4 3\n1 2\n2 3\n3 4\n";
        let g = parse_graph(text).unwrap();
        assert_eq!(g.is_target, Some(2));
        assert_eq!(g.edge_list(), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(write_graph(&g), text);
        assert!(parse_graph("p tw 2 1\n1 1\n").is_err());
    }

    #[test]
    fn td_parse_orients_from_root() {
        let text = "c root 2\ns td 3 2 3\nb 1 1 2\nb 2 2 3\nb 3 3\n1 2\n2 3\n";
        let td = parse_td(text).unwrap();
        assert_eq!(td.root, 1);
        assert_eq!(td.nodes[1].children, vec![0, 2]);
        assert!(!td.is_path);
        assert!(!td.is_nice);
        let again = parse_td(&write_td(&td, 3)).unwrap();
        assert_eq!(again, td);
    }

    #[test]
    fn td_rejects_cycles() {
        let text = "s td 3 2 3\nb 1 1\nb 2 2\nb 3 3\n1 2\n2 3\n3 1\n";
        assert!(parse_td(text).is_err());
    }
}
