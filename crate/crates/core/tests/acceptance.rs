//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its own PASS/FAIL line; the process fails if any does.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use widthred::corpus::{
    min_degree_decomposition, min_degree_order, path_decomposition, random_cnf, random_graph,
    random_kexpression, random_max2sat, rng,
};
use widthred::decomp::{normalize_nice, Shape};
use widthred::epnl::{
    compile_tm_to_sat, cycle_certificate, digraph3_input, hamilton3_machine, permcheck_machine, simulate,
    unary_input, Outcome, TmSpec,
};
use widthred::equivalence::{check_equivalence, Claim, EquivalenceReport, Source};
use widthred::gadgets::{little_endian, IsBuilder, IsInstance};
use widthred::instances::{
    primal_graph, validate_decomposition, Clause, CnfInstance, Literal, NiceTarget, TreeDecomposition,
};
use widthred::kexpr::{evaluate_kexpression, parse_cwe, P4_EXPRESSION};
use widthred::oracles::{
    for_each_transversal_is, is_bruteforce, is_treewidth_dp, max2sat_decide, sat_decide,
};
use widthred::reduce_cw::{is_cw_to_sat_tw, same_named_graph, threesat_tw_to_is_cw};
use widthred::reduce_tw::{is_to_max2sat, max2sat_to_sat, sat_to_3sat, threesat_to_is, ReductionOutput, WidthBound};

const PER_REDUCTION: u64 = 200;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn nice_for(f: &CnfInstance, path: bool) -> TreeDecomposition {
    let g = primal_graph(f);
    if path {
        normalize_nice(NiceTarget::Cnf(f), &path_decomposition(&g, &min_degree_order(&g)), Shape::Path).unwrap()
    } else {
        normalize_nice(NiceTarget::Cnf(f), &min_degree_decomposition(&g), Shape::Tree).unwrap()
    }
}

/// Per-reduction tallies shared by criteria 1 and 2.
#[derive(Default)]
struct Tally {
    instances: u64,
    checks: u64,
    wrong_answers: Vec<String>,
    bad_certificates: Vec<String>,
    /// Every (formula, constant, additive) seen; stability means one entry.
    constants: BTreeSet<(&'static str, usize, usize)>,
    max_width_slack: Option<i64>,
}

impl Tally {
    fn record(&mut self, tag: String, out: &ReductionOutput, rep: &EquivalenceReport) {
        self.checks += 1;
        if !rep.answers_agree() {
            self.wrong_answers.push(tag.clone());
        }
        if !rep.violations.is_empty() {
            self.bad_certificates.push(format!("{tag}: {}", rep.violations[0]));
        }
        self.note_bound(&out.bound);
        let slack = out.bound.value() as i64 - out.realized_width() as i64;
        self.max_width_slack = Some(self.max_width_slack.map_or(slack, |s| s.min(slack)));
    }

    fn note_bound(&mut self, b: &WidthBound) {
        self.constants.insert((b.formula, b.c, b.additive));
    }
}

struct Corpus {
    tallies: BTreeMap<&'static str, Tally>,
    label_budget_violations: Vec<String>,
    label_constants: BTreeSet<(&'static str, usize, usize)>,
    seconds: f64,
}

fn run_corpus() -> Corpus {
    let t0 = Instant::now();
    let mut tallies: BTreeMap<&'static str, Tally> = BTreeMap::new();
    let mut label_budget_violations = Vec::new();
    let mut label_constants = BTreeSet::new();

    let t = tallies.entry("max2sat_to_sat").or_default();
    for seed in 0..PER_REDUCTION {
        let mut r = rng(seed);
        let n = 2 + seed as usize % 5;
        let f = random_max2sat(&mut r, n, 1 + seed as usize % 10, 2);
        t.instances += 1;
        for k in 0..=f.total_weight() + 1 {
            let src = f.clone().with_target(k);
            let out = max2sat_to_sat(&src, &nice_for(&src, seed % 2 == 1)).unwrap();
            let rep = check_equivalence(Source::Formula(&src), &Claim::from(&out)).unwrap();
            t.record(format!("seed {seed} k {k}"), &out, &rep);
        }
    }

    let t = tallies.entry("sat_to_3sat").or_default();
    for seed in 0..PER_REDUCTION {
        let mut r = rng(10_000 + seed);
        let f = random_cnf(&mut r, 1 + seed as usize % 8, 2 + seed as usize % 9, 1, 6);
        let g = primal_graph(&f);
        let td = if seed % 2 == 0 { min_degree_decomposition(&g) } else { path_decomposition(&g, &min_degree_order(&g)) };
        let out = sat_to_3sat(&f, &td).unwrap();
        let rep = check_equivalence(Source::Formula(&f), &Claim::from(&out)).unwrap();
        t.instances += 1;
        t.record(format!("seed {seed}"), &out, &rep);
        if out.realized_width() > td.width() + 2 {
            t.bad_certificates.push(format!("seed {seed}: width above w + 2"));
        }
    }

    let t = tallies.entry("threesat_to_is").or_default();
    for seed in 0..PER_REDUCTION {
        let mut r = rng(20_000 + seed);
        let f = random_cnf(&mut r, 2 + seed as usize % 7, 2 + seed as usize % 8, 1, 3);
        let out = threesat_to_is(&f, &nice_for(&f, seed % 2 == 1)).unwrap();
        let rep = check_equivalence(Source::Formula(&f), &Claim::from(&out)).unwrap();
        t.instances += 1;
        t.record(format!("seed {seed}"), &out, &rep);
    }

    let t = tallies.entry("is_to_max2sat").or_default();
    for seed in 0..PER_REDUCTION {
        let mut r = rng(30_000 + seed);
        let g = random_graph(&mut r, 1 + seed as usize % 8, 0.2 + 0.1 * (seed % 5) as f64);
        let td = if seed % 2 == 0 { min_degree_decomposition(&g) } else { path_decomposition(&g, &min_degree_order(&g)) };
        t.instances += 1;
        for k in 0..=g.num_vertices as u64 + 1 {
            let src = g.clone().with_target(k);
            let out = is_to_max2sat(&src, Some(&td)).unwrap();
            let rep = check_equivalence(Source::Graph(&src), &Claim::from(&out)).unwrap();
            t.record(format!("seed {seed} k {k}"), &out, &rep);
            if out.realized_width() != td.width() {
                t.bad_certificates.push(format!("seed {seed}: width changed"));
            }
        }
    }

    let t = tallies.entry("is_cw_to_sat_tw").or_default();
    for seed in 0..PER_REDUCTION {
        let mut r = rng(40_000 + seed);
        let n = 1 + seed as usize % 8;
        let expr = random_kexpression(&mut r, n, 2 + (seed % 3) as u32);
        let g = evaluate_kexpression(&expr).unwrap().graph;
        t.instances += 1;
        for k in 0..=n as u64 + 1 {
            let out = is_cw_to_sat_tw(&expr, k).unwrap();
            let rep = check_equivalence(Source::Graph(&g), &Claim::from(&out)).unwrap();
            t.record(format!("seed {seed} k {k}"), &out, &rep);
        }
    }

    let t = tallies.entry("threesat_tw_to_is_cw").or_default();
    for seed in 0..PER_REDUCTION {
        let mut r = rng(50_000 + seed);
        let f = random_cnf(&mut r, 2 + seed as usize % 7, 2 + seed as usize % 8, 1, 3);
        let syn = threesat_tw_to_is_cw(&f, &nice_for(&f, false)).unwrap();
        let rep = check_equivalence(Source::Formula(&f), &Claim::from(&syn.reduction)).unwrap();
        t.instances += 1;
        t.record(format!("seed {seed}"), &syn.reduction, &rep);
        let evaluated = evaluate_kexpression(&syn.expression).unwrap();
        if let Err(e) = same_named_graph(&evaluated, syn.graph()) {
            t.wrong_answers.push(format!("seed {seed}: expression builds another graph: {e}"));
        }
        label_constants.insert((syn.bound.formula, syn.bound.c, syn.bound.additive));
        if syn.expression.label_budget as usize > syn.bound.value() {
            label_budget_violations.push(format!(
                "seed {seed}: {} labels > {}",
                syn.expression.label_budget,
                syn.bound.value()
            ));
        }
    }

    Corpus {
        tallies,
        label_budget_violations,
        label_constants,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn criterion_equisatisfiability(corpus: &Corpus) -> Verdict {
    let mut summary = Vec::new();
    for (name, t) in &corpus.tallies {
        ensure(t.instances >= PER_REDUCTION, || format!("{name}: only {} instances", t.instances))?;
        ensure(t.wrong_answers.is_empty(), || format!("{name}: answers differ at {:?}", &t.wrong_answers[..t.wrong_answers.len().min(3)]))?;
        summary.push(format!("{name} {}/{}", t.instances, t.checks));
    }
    ensure(corpus.seconds < 300.0, || format!("took {:.0}s", corpus.seconds))?;
    Ok(format!("instances/checks: {} in {:.1}s", summary.join(", "), corpus.seconds))
}

fn criterion_width_certificates(corpus: &Corpus) -> Verdict {
    let mut summary = Vec::new();
    for (name, t) in &corpus.tallies {
        ensure(t.bad_certificates.is_empty(), || format!("{name}: {}", t.bad_certificates[0]))?;
        ensure(t.constants.len() == 1, || format!("{name}: constants vary: {:?}", t.constants))?;
        let (formula, c, add) = t.constants.iter().next().unwrap();
        summary.push(format!("{name} [{formula}, c={c}, +{add}, min slack {}]", t.max_width_slack.unwrap_or(0)));
    }
    ensure(corpus.label_budget_violations.is_empty(), || corpus.label_budget_violations[0].clone())?;
    ensure(corpus.label_constants.len() == 1, || format!("label constants vary: {:?}", corpus.label_constants))?;
    let (formula, c, add) = corpus.label_constants.iter().next().unwrap();
    summary.push(format!("labels [{formula}, c={c}, +{add}]"));
    Ok(summary.join("; "))
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn criterion_golden_expressions() -> Verdict {
    let p4 = parse_cwe(P4_EXPRESSION).map_err(|e| e.to_string())?;
    let lg = evaluate_kexpression(&p4).map_err(|e| e.to_string())?;
    ensure(p4.label_budget <= 3, || format!("P4 uses {} labels", p4.label_budget))?;
    let mut edges: Vec<(String, String)> = lg
        .graph
        .edges()
        .map(|(u, v)| {
            let (a, b) = (lg.names[u].clone(), lg.names[v].clone());
            if a < b { (a, b) } else { (b, a) }
        })
        .collect();
    edges.sort();
    let path: Vec<(String, String)> = [("a", "b"), ("b", "c"), ("c", "d")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    ensure(lg.graph.num_vertices == 4 && edges == path, || format!("P4 evaluates to {edges:?}"))?;
    let shipped = std::fs::read_to_string(data_dir().join("cwe/p4.cwe")).map_err(|e| e.to_string())?;
    ensure(evaluate_kexpression(&parse_cwe(&shipped).map_err(|e| e.to_string())?).map_err(|e| e.to_string())? == lg, || {
        "shipped p4.cwe differs".into()
    })?;
    for n in 1..=8usize {
        let text = std::fs::read_to_string(data_dir().join(format!("cwe/k{n}.cwe"))).map_err(|e| e.to_string())?;
        let expr = parse_cwe(&text).map_err(|e| e.to_string())?;
        let g = evaluate_kexpression(&expr).map_err(|e| e.to_string())?.graph;
        ensure(expr.label_budget <= 2, || format!("K{n} uses {} labels", expr.label_budget))?;
        let complete = (0..n).all(|u| (u + 1..n).all(|v| g.has_edge(u, v)));
        ensure(g.num_vertices == n && complete, || format!("k{n}.cwe is not K{n}"))?;
    }
    Ok("P4 is the path a-b-c-d with 3 labels; shipped K1..K8 evaluate to complete graphs with 2 labels".into())
}

/// One variable per vertex: edges exclude, every part needs a vertex.
fn transversal_cnf(inst: &IsInstance) -> Vec<Clause> {
    let mut clauses: Vec<Clause> =
        inst.graph.edges().map(|(u, v)| Clause::new(vec![Literal::neg(u), Literal::neg(v)])).collect();
    clauses.extend(inst.parts.iter().map(|p| Clause::new(p.iter().map(|&v| Literal::pos(v)).collect())));
    clauses
}

fn criterion_counting_gadget() -> Verdict {
    const M: usize = 2;
    let mut fragments = 0;
    let mut queries = 0;
    let mut enumerated = 0u64;
    for d in 0..=3usize {
        for polarity in [true, false] {
            let mut b = IsBuilder::new();
            let sources: Vec<_> = (0..d).map(|_| b.variable_gadget()).collect();
            let watched: Vec<usize> = sources.iter().map(|g| g.port(polarity)).collect();
            let cg = b.counting_gadget(&watched, M).map_err(|e| e.to_string())?;
            let inst = b.finish();
            let last: Vec<usize> = cg.last.iter().map(|g| g.pos).collect();
            let base = transversal_cnf(&inst);

            // Fix which watched vertices are selected and, optionally, the last layer.
            let mut feasible = |hit: usize, value: Option<u64>| -> Result<bool, String> {
                let mut clauses = base.clone();
                for (i, &u) in watched.iter().enumerate() {
                    clauses.push(Clause::new(vec![Literal::new(u, hit >> i & 1 == 1)]));
                }
                if let Some(value) = value {
                    for (j, &x) in last.iter().enumerate() {
                        clauses.push(Clause::new(vec![Literal::new(x, value >> j & 1 == 1)]));
                    }
                }
                queries += 1;
                let cnf = CnfInstance::new(inst.graph.num_vertices, clauses);
                Ok(sat_decide(&cnf).map_err(|e| e.to_string())?.is_yes())
            };
            for hit in 0..1usize << d {
                let size = hit.count_ones() as u64;
                ensure(feasible(hit, None)?, || format!("d {d}: watched subset {hit:#b} not realizable"))?;
                for value in 0..size.min(1 << last.len()) {
                    ensure(!feasible(hit, Some(value))?, || {
                        format!("d {d}: last layer {value} with {size} watched vertices selected")
                    })?;
                }
            }

            // Small fragments are also enumerated outright.
            if d <= 1 {
                let mut bad = None;
                for_each_transversal_is(&inst.graph, &inst.parts, |s| {
                    enumerated += 1;
                    let hit = watched.iter().filter(|u| s.contains(u)).count() as u64;
                    let value = little_endian(last.iter().map(|x| s.contains(x)));
                    if value < hit {
                        bad = Some(format!("d {d}: enumerated set with last layer {value} < {hit}"));
                    }
                    bad.is_some()
                })
                .map_err(|e| e.to_string())?;
                if let Some(why) = bad {
                    return Err(why);
                }
            }
            fragments += 1;
        }
    }
    Ok(format!(
        "{fragments} fragments (d <= 3, M = {M}); {queries} SAT queries show last layer >= |U n S| and every watched subset realizable; {enumerated} sets enumerated for d <= 1"
    ))
}

fn criterion_tableau() -> Verdict {
    let permcheck3 = permcheck_machine(3, 4);
    let permcheck2 = permcheck_machine(2, 3);
    let hamilton = hamilton3_machine();
    let mut pairs: Vec<(&str, &TmSpec, Vec<bool>, usize)> = Vec::new();
    for r in 0..=4 {
        pairs.push(("permcheck k=3", &permcheck3, unary_input(r), 2 * r));
    }
    pairs.push(("permcheck k=2", &permcheck2, unary_input(2), 2));
    pairs.push(("permcheck k=2", &permcheck2, unary_input(3), 3));
    let cycle = digraph3_input(&[(0, 1), (1, 2), (2, 0)]);
    let broken = digraph3_input(&[(0, 1), (1, 2)]);
    for x in [cycle.clone(), broken.clone(), digraph3_input(&[(0, 2), (2, 1), (1, 0), (0, 1)])] {
        pairs.push(("hamilton3", &hamilton, x, 9));
    }
    let accepted = simulate(&hamilton, &cycle, &cycle_certificate(&[0, 1, 2])).map_err(|e| e.to_string())?;
    ensure(accepted.outcome == Outcome::Accept, || "cycle order rejected".into())?;
    for order in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let run = simulate(&hamilton, &broken, &cycle_certificate(&order)).map_err(|e| e.to_string())?;
        ensure(run.outcome == Outcome::Reject, || format!("broken digraph accepted order {order:?}"))?;
    }
    let (mut yes, mut no) = (0, 0);
    let mut worst = String::new();
    for (name, tm, x, cert_len) in &pairs {
        let out = compile_tm_to_sat(tm, x).map_err(|e| e.to_string())?;
        let source = Source::Machine { tm, input: x, cert_len: *cert_len };
        let rep = check_equivalence(source, &Claim::from(&out)).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("{name} on {x:?}: {rep:?}"))?;
        let pd = out.path_certificate.as_ref().ok_or("no path certificate")?;
        ensure(pd.is_path, || "certificate not path-shaped".into())?;
        if rep.source_yes {
            yes += 1;
        } else {
            no += 1;
        }
        worst = format!("{} <= {}", pd.width(), out.path_bound.unwrap_or(out.bound));
    }
    ensure(yes > 0 && no > 0, || "need accepting and rejecting pairs".into())?;
    Ok(format!("{} pairs ({yes} accepting, {no} rejecting); last path width {worst}", pairs.len()))
}

fn criterion_chain() -> Verdict {
    let mut path_variants = 0;
    for seed in 0..50u64 {
        let path = seed % 2 == 1;
        let mut r = rng(60_000 + seed);
        let src = random_cnf(&mut r, 2 + seed as usize % 5, 2 + seed as usize % 6, 1, 4);
        let g = primal_graph(&src);
        let td = if path { path_decomposition(&g, &min_degree_order(&g)) } else { min_degree_decomposition(&g) };
        let shape = if path { Shape::Path } else { Shape::Tree };
        let pick = |out: &ReductionOutput| -> Result<TreeDecomposition, String> {
            let cert = if path {
                out.path_certificate.clone().ok_or_else(|| format!("seed {seed}: no path certificate"))?
            } else {
                out.certificate.clone()
            };
            let rep = validate_decomposition(&out.instance.structure(), &cert);
            ensure(rep.is_valid(), || format!("seed {seed}: {:?}", rep.violations.first()))?;
            ensure(!path || cert.is_path, || format!("seed {seed}: not path-shaped"))?;
            Ok(cert)
        };
        let a = sat_to_3sat(&src, &td).map_err(|e| e.to_string())?;
        let three = a.instance.as_cnf().unwrap().clone();
        let ntd = normalize_nice(NiceTarget::Cnf(&three), &pick(&a)?, shape).map_err(|e| e.to_string())?;
        let b = threesat_to_is(&three, &ntd).map_err(|e| e.to_string())?;
        let k = b.target_k().unwrap();
        let graph = b.instance.as_graph().unwrap().clone().with_target(k);
        let c = is_to_max2sat(&graph, Some(&pick(&b)?)).map_err(|e| e.to_string())?;
        pick(&c)?;
        let f = c.instance.as_cnf().unwrap();
        let end = max2sat_decide(f, f.target.unwrap()).map_err(|e| e.to_string())?.is_yes();
        let start = sat_decide(&src).map_err(|e| e.to_string())?.is_yes();
        ensure(start == end, || format!("seed {seed}: source {start}, end of chain {end}"))?;
        if path {
            path_variants += 1;
        }
    }
    Ok(format!("50 chains agree end to end; {path_variants} path variants keep path-shaped certificates"))
}

fn criterion_cross_oracle() -> Verdict {
    for seed in 0..50u64 {
        let mut r = rng(70_000 + seed);
        let g = random_graph(&mut r, 1 + seed as usize % 10, 0.15 + 0.05 * (seed % 8) as f64);
        let td = if seed % 2 == 0 { min_degree_decomposition(&g) } else { path_decomposition(&g, &min_degree_order(&g)) };
        let ntd = normalize_nice(NiceTarget::Graph(&g), &td, Shape::Tree).map_err(|e| e.to_string())?;
        let dp = is_treewidth_dp(&g, &ntd).map_err(|e| e.to_string())?.value;
        let bf = is_bruteforce(&g).map_err(|e| e.to_string())?.value;
        ensure(dp == bf, || format!("seed {seed}: dp {dp} vs exhaustive {bf}"))?;
    }
    Ok("50 (graph, decomposition) pairs with n <= 10 agree exactly".into())
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        // `cargo test -- --list` support: nothing to enumerate individually.
        println!("acceptance: test");
        return;
    }
    // Numeric arguments select criteria; the corpus is shared by 1 and 2.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let corpus = std::cell::OnceCell::new();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("equisatisfiability suites", Box::new(|| criterion_equisatisfiability(corpus.get_or_init(run_corpus)))),
        ("width certificates", Box::new(|| criterion_width_certificates(corpus.get_or_init(run_corpus)))),
        ("golden k-expressions", Box::new(criterion_golden_expressions)),
        ("counting-gadget soundness", Box::new(criterion_counting_gadget)),
        ("verifier tableau", Box::new(criterion_tableau)),
        ("composition chain", Box::new(criterion_chain)),
        ("cross-oracle consistency", Box::new(criterion_cross_oracle)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let t0 = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
