//! Seeded instance generators and simple decompositions for them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::{td_from_schedule, EliminationSchedule, EliminationStep, ElimGraph};
use crate::instances::{Clause, CnfInstance, Literal, TreeDecomposition, UGraph};
use crate::kexpr::{CliqueExpression, Label};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `m` clauses over `n` variables, lengths uniform in `min_len..=max_len`
/// (capped by `n`), distinct variables within a clause.
pub fn random_cnf(rng: &mut impl Rng, n: usize, m: usize, min_len: usize, max_len: usize) -> CnfInstance {
    let vars: Vec<usize> = (0..n).collect();
    let clauses = (0..m)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len).clamp(1, n.max(1));
            let lits = vars
                .choose_multiple(rng, len)
                .map(|&v| Literal::new(v, rng.gen_bool(0.5)))
                .collect();
            Clause::new(lits)
        })
        .collect();
    CnfInstance::new(n, clauses)
}

/// Max 2-SAT instance with multiplicities in `1..=max_mult` and no target.
pub fn random_max2sat(rng: &mut impl Rng, n: usize, m: usize, max_mult: u64) -> CnfInstance {
    let mut f = random_cnf(rng, n, m, 1, 2);
    for c in &mut f.clauses {
        c.multiplicity = rng.gen_range(1..=max_mult);
    }
    f.with_max_clause_len(2)
}

/// Erdős–Rényi graph `G(n, p)`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> UGraph {
    let mut g = UGraph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                g.add_edge(u, v).expect("in range");
            }
        }
    }
    g
}

/// Graph with exactly `m` distinct edges (capped at the complete graph).
pub fn random_graph_edges(rng: &mut impl Rng, n: usize, m: usize) -> UGraph {
    let mut all: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    all.shuffle(rng);
    all.truncate(m);
    UGraph::from_edges(n, &all).expect("in range")
}

/// Random expression over `n >= 1` vertices and labels `1..=k` (`k >= 2`):
/// singletons are merged pairwise, with random joins and renames sprinkled
/// over the partial results.
pub fn random_kexpression(rng: &mut impl Rng, n: usize, k: Label) -> CliqueExpression {
    let mut e = CliqueExpression::new();
    let mut pool: Vec<usize> = (0..n).map(|v| e.create(rng.gen_range(1..=k), format!("v{v}"))).collect();
    let decorate = |e: &mut CliqueExpression, rng: &mut dyn rand::RngCore, mut cur: usize| {
        for _ in 0..rng.gen_range(0..3) {
            let a = rng.gen_range(1..=k);
            let b = (a + rng.gen_range(1..k) - 1) % k + 1;
            cur = if rng.gen_bool(0.7) { e.join(a, b, cur) } else { e.rename(a, b, cur) };
        }
        cur
    };
    while pool.len() > 1 {
        let i = rng.gen_range(0..pool.len());
        let a = pool.swap_remove(i);
        let j = rng.gen_range(0..pool.len());
        let b = pool.swap_remove(j);
        let u = e.union(a, b);
        let u = decorate(&mut e, rng, u);
        pool.push(u);
    }
    e.root = pool[0];
    e.with_budget(k)
}

/// Greedy minimum-degree elimination order (ties by identifier).
pub fn min_degree_order(graph: &UGraph) -> Vec<usize> {
    let mut eg = ElimGraph::new(graph);
    let mut order = Vec::with_capacity(graph.num_vertices);
    for _ in 0..graph.num_vertices {
        let v = (0..graph.num_vertices)
            .filter(|&v| eg.is_alive(v))
            .min_by_key(|&v| (eg.degree(v), v))
            .expect("alive vertex");
        eg.eliminate(v);
        order.push(v);
    }
    order
}

/// Tree decomposition from the minimum-degree order.
pub fn min_degree_decomposition(graph: &UGraph) -> TreeDecomposition {
    let mut schedule = EliminationSchedule::new();
    for v in min_degree_order(graph) {
        schedule.push(EliminationStep::single(v, graph.num_vertices));
    }
    td_from_schedule(graph, &schedule, &TreeDecomposition::single_bag(vec![]))
        .expect("full elimination always attaches")
}

/// Path decomposition along a vertex order: bag `i` holds `v_i` and every
/// earlier vertex with a neighbor at or after position `i`.
pub fn path_decomposition(graph: &UGraph, order: &[usize]) -> TreeDecomposition {
    let n = graph.num_vertices;
    let mut pos = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let adj = graph.adjacency();
    let last_need: Vec<usize> = (0..n)
        .map(|v| adj[v].iter().map(|&u| pos[u]).max().unwrap_or(0).max(pos[v]))
        .collect();
    let bags: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut bag: Vec<usize> = order[..i]
                .iter()
                .copied()
                .filter(|&u| last_need[u] >= i)
                .collect();
            bag.push(order[i]);
            bag
        })
        .collect();
    if bags.is_empty() {
        TreeDecomposition::single_bag(vec![])
    } else {
        TreeDecomposition::from_path_bags(bags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{primal_graph, validate_decomposition};

    #[test]
    fn generators_are_seed_deterministic() {
        let a = random_cnf(&mut rng(7), 6, 10, 1, 4);
        let b = random_cnf(&mut rng(7), 6, 10, 1, 4);
        assert_eq!(a, b);
        assert!(a.validate().is_ok());
        let g = random_graph(&mut rng(3), 8, 0.4);
        assert_eq!(g, random_graph(&mut rng(3), 8, 0.4));
    }

    #[test]
    fn decompositions_validate() {
        for seed in 0..30 {
            let mut r = rng(seed);
            let f = random_cnf(&mut r, 8, 12, 1, 3);
            let g = primal_graph(&f);
            assert!(validate_decomposition(&g, &min_degree_decomposition(&g)).is_valid());
            let order = min_degree_order(&g);
            let pd = path_decomposition(&g, &order);
            let rep = validate_decomposition(&g, &pd);
            assert!(rep.is_valid(), "{:?}", rep.violations);
            assert!(pd.is_path);
        }
        let empty = UGraph::new(0);
        assert!(validate_decomposition(&empty, &path_decomposition(&empty, &[])).is_valid());
    }
}
