use std::path::{Path, PathBuf};

use clap::ValueEnum;

use widthred::corpus::{random_cnf, random_graph_edges, rng};
use widthred::decomp::{normalize_nice, Shape};
use widthred::epnl::{compile_tm_to_sat, parse_bits, parse_tm, pw_certificate_for};
use widthred::equivalence::{check_equivalence, Claim, EquivalenceReport, Source};
use widthred::formats::{parse_dimacs, parse_graph, parse_td, write_dimacs, write_graph, write_td};
use widthred::instances::{
    validate_decomposition, validate_nice, CnfInstance, NiceTarget, TreeDecomposition, UGraph,
};
use widthred::kexpr::{evaluate_kexpression, parse_cwe};
use widthred::oracles::{
    configured_cap, is_bruteforce_with_cap, is_treewidth_dp, max2sat_bruteforce_with_cap,
    sat_bruteforce_with_cap, OracleAnswer, Witness,
};
use widthred::reduce_cw::{is_cw_to_sat_tw, threesat_tw_to_is_cw};
use widthred::reduce_tw::{
    is_to_max2sat, max2sat_to_sat, sat_to_3sat, threesat_to_is, AnswerMap, ReductionOutput, Target,
};

use crate::outcome::{Failure, Outcome, Report};
use crate::{Cli, Command, GenKind, OracleChoice, ReductionName, SourceKind, TargetKind};

pub fn run(cli: &Cli, report: &mut Report) -> Outcome {
    let cap = cli.cap.unwrap_or_else(configured_cap);
    match &cli.command {
        Command::Reduce { from, to, input, td, pd, k, output, emit_td, emit_cwe } => {
            report.put("command", "reduce");
            let decomposition = match (td, pd) {
                (Some(p), _) => Some((p.as_path(), Shape::Tree)),
                (_, Some(p)) => Some((p.as_path(), Shape::Path)),
                _ => None,
            };
            let request = ReduceRequest {
                from: *from,
                to: *to,
                input,
                decomposition,
                k: *k,
                output,
                emit_td: emit_td.as_deref(),
                emit_cwe: emit_cwe.as_deref(),
            };
            reduce(&request, report)
        }
        Command::Validate { input, td, nice } => {
            report.put("command", "validate");
            validate(input, td, *nice, report)
        }
        Command::Solve { oracle, input, td } => {
            report.put("command", "solve");
            solve(*oracle, input, td.as_deref(), cap, report)
        }
        Command::EvalCwe { expr, output } => {
            report.put("command", "eval-cwe");
            let expr = parse_cwe(&read(expr)?)?;
            let lg = evaluate_kexpression(&expr)?;
            report.put("vertices", lg.graph.num_vertices);
            report.put("edges", lg.graph.num_edges());
            report.put("labels", expr.label_budget);
            report.put("live_labels", lg.max_live_labels);
            if let Some(out) = output {
                write(out, &write_graph(&lg.graph))?;
            }
            Ok(())
        }
        Command::CompileTm { tm, input, output, emit_pd } => {
            report.put("command", "compile-tm");
            let machine = parse_tm(&read(tm)?)?;
            let bits = parse_bits(input)?;
            let out = compile_tm_to_sat(&machine, &bits)?;
            report.put("states", machine.states.len());
            report.put("time", machine.time);
            report.put("space", machine.space);
            report.put("k", machine.k);
            describe(&out, report);
            write(output, &write_dimacs(out.instance.as_cnf().expect("CNF target")))?;
            if let Some(path) = emit_pd {
                let pd = pw_certificate_for(&out)?;
                report.put("emitted_width", pd.width());
                report.put("emitted_bound", out.path_bound.unwrap_or(out.bound).value());
                write(path, &write_td(&pd, out.instance.structure().num_vertices))?;
            }
            Ok(())
        }
        Command::Check { source, reduced, reduction, td, bound, k, input, cert_len } => {
            report.put("command", "check");
            report.put("reduction", cli_name(*reduction));
            let certificate = td.as_deref().map(read_td).transpose()?;
            let request = CheckRequest {
                source,
                reduced,
                certificate: certificate.as_ref(),
                bound: *bound,
                k: *k,
                input,
                cert_len: *cert_len,
            };
            check(*reduction, &request, report)
        }
        Command::Gen { kind, seed, vars, clauses, min_len, max_len, vertices, edges, target, output } => {
            report.put("command", "gen");
            report.put("seed", seed);
            let mut r = rng(*seed);
            let text = match kind {
                GenKind::RandomCnf => {
                    if *min_len == 0 || min_len > max_len {
                        return Err(Failure::usage("need 1 <= --min-len <= --max-len"));
                    }
                    let mut f = random_cnf(&mut r, *vars, *clauses, *min_len, *max_len);
                    f.target = *target;
                    report.put("vars", f.num_vars);
                    report.put("clauses", f.clauses.len());
                    write_dimacs(&f)
                }
                GenKind::RandomGraph => {
                    let mut g = random_graph_edges(&mut r, *vertices, *edges);
                    g.is_target = *target;
                    report.put("vertices", g.num_vertices);
                    report.put("edges", g.num_edges());
                    write_graph(&g)
                }
            };
            write(output, &text)
        }
    }
}

fn cli_name(value: impl ValueEnum) -> String {
    value.to_possible_value().expect("no skipped variants").get_name().to_string()
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn read_cnf(path: &Path) -> Result<CnfInstance, Failure> {
    Ok(parse_dimacs(&read(path)?)?)
}

fn read_graph(path: &Path) -> Result<UGraph, Failure> {
    Ok(parse_graph(&read(path)?)?)
}

fn read_td(path: &Path) -> Result<TreeDecomposition, Failure> {
    Ok(parse_td(&read(path)?)?)
}

enum Structure {
    Cnf(CnfInstance),
    Graph(UGraph),
}

/// Tells DIMACS CNF from PACE graphs by the problem line.
fn read_structure(path: &Path) -> Result<Structure, Failure> {
    let text = read(path)?;
    let problem = text.lines().map(str::trim).find(|l| l.starts_with("p "));
    match problem.and_then(|l| l.split_whitespace().nth(1)) {
        Some("cnf") => Ok(Structure::Cnf(parse_dimacs(&text)?)),
        Some("tw") => Ok(Structure::Graph(parse_graph(&text)?)),
        _ => Err(Failure::usage(format!(
            "{}: expected a `p cnf` or `p tw` header",
            path.display()
        ))),
    }
}

fn witness_text(w: &Witness) -> String {
    match w {
        Witness::Assignment(a) => a
            .iter()
            .enumerate()
            .map(|(v, &b)| if b { format!("{}", v + 1) } else { format!("-{}", v + 1) })
            .collect::<Vec<_>>()
            .join(" "),
        Witness::Vertices(vs) => vs.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join(" "),
    }
}

fn describe(out: &ReductionOutput, report: &mut Report) {
    match &out.instance {
        Target::Cnf(c) => {
            report.put("target_vars", c.num_vars);
            report.put("target_clauses", c.clauses.len());
        }
        Target::Graph(g) => {
            report.put("target_vertices", g.num_vertices);
            report.put("target_edges", g.num_edges());
        }
    }
    report.put("realized_width", out.realized_width());
    report.put("bound", out.bound.value());
    report.put("bound_formula", out.bound);
    if let (Some(pd), Some(pb)) = (&out.path_certificate, out.path_bound) {
        report.put("path_width", pd.width());
        report.put("path_bound", pb.value());
    }
    report.put("answer_map", out.answer_map);
    if let Some(census) = &out.census {
        report.put("census_variable", census.variable);
        report.put("census_clause", census.clause);
    }
}

struct ReduceRequest<'a> {
    from: SourceKind,
    to: TargetKind,
    input: &'a Path,
    decomposition: Option<(&'a Path, Shape)>,
    k: Option<u64>,
    output: &'a Path,
    emit_td: Option<&'a Path>,
    emit_cwe: Option<&'a Path>,
}

fn target_of(from: SourceKind) -> TargetKind {
    match from {
        SourceKind::Max2sat => TargetKind::Sat,
        SourceKind::Sat => TargetKind::ThreeSat,
        SourceKind::ThreeSat | SourceKind::ThreeSatToCw => TargetKind::Is,
        SourceKind::Is => TargetKind::Max2sat,
        SourceKind::IsCw => TargetKind::Sat,
    }
}

fn reduce(req: &ReduceRequest<'_>, report: &mut Report) -> Outcome {
    let expected = target_of(req.from);
    if req.to != expected {
        return Err(Failure::usage(format!(
            "no reduction from {} to {}; it reduces to {}",
            cli_name(req.from),
            cli_name(req.to),
            cli_name(expected)
        )));
    }
    let needs_decomposition = !matches!(req.from, SourceKind::Is | SourceKind::IsCw);
    let decomposition = match req.decomposition {
        Some((path, shape)) => Some((read_td(path)?, shape)),
        None if needs_decomposition => {
            return Err(Failure::usage(format!("--from {} needs --td or --pd", cli_name(req.from))))
        }
        None => None,
    };
    if req.from == SourceKind::IsCw && decomposition.is_some() {
        return Err(Failure::usage("--from is-cw takes a k-expression, not a decomposition"));
    }
    if req.emit_cwe.is_some() && req.from != SourceKind::ThreeSatToCw {
        return Err(Failure::usage("--emit-cwe only applies to --from 3sat-to-cw"));
    }
    let shape = decomposition.as_ref().map_or(Shape::Tree, |d| d.1);
    let out = match req.from {
        SourceKind::Max2sat | SourceKind::Sat | SourceKind::ThreeSat | SourceKind::ThreeSatToCw => {
            let mut src = read_cnf(req.input)?;
            if let Some(k) = req.k {
                src.target = Some(k);
            }
            let td = &decomposition.as_ref().expect("checked above").0;
            match req.from {
                SourceKind::Sat => sat_to_3sat(&src, td)?,
                SourceKind::Max2sat => max2sat_to_sat(&src, &normalize_nice(NiceTarget::Cnf(&src), td, shape)?)?,
                SourceKind::ThreeSat => threesat_to_is(&src, &normalize_nice(NiceTarget::Cnf(&src), td, shape)?)?,
                _ => {
                    let ntd = normalize_nice(NiceTarget::Cnf(&src), td, Shape::Tree)?;
                    let syn = threesat_tw_to_is_cw(&src, &ntd)?;
                    report.put("labels", syn.expression.label_budget);
                    report.put("label_bound", syn.bound.value());
                    report.put("label_bound_formula", syn.bound);
                    if let Some(path) = req.emit_cwe {
                        write(path, &syn.expression.to_text())?;
                    }
                    syn.reduction
                }
            }
        }
        SourceKind::Is => {
            let mut g = read_graph(req.input)?;
            if let Some(k) = req.k {
                g.is_target = Some(k);
            }
            is_to_max2sat(&g, decomposition.as_ref().map(|d| &d.0))?
        }
        SourceKind::IsCw => {
            let expr = parse_cwe(&read(req.input)?)?;
            let k = req.k.ok_or_else(|| Failure::usage("--from is-cw needs --k"))?;
            is_cw_to_sat_tw(&expr, k)?
        }
    };
    let structure = out.instance.structure();
    let certificate = if shape == Shape::Path && req.decomposition.is_some() {
        pw_certificate_for(&out)?
    } else {
        out.certificate.clone()
    };
    let check = validate_decomposition(&structure, &certificate);
    if let Some(v) = check.violations.first() {
        return Err(Failure::invalid(format!("emitted certificate is invalid: {v}")));
    }
    describe(&out, report);
    if req.emit_td.is_some() {
        let bound = if certificate.is_path && req.decomposition.is_some_and(|d| d.1 == Shape::Path) {
            out.path_bound.unwrap_or(out.bound)
        } else {
            out.bound
        };
        report.put("emitted_width", certificate.width());
        report.put("emitted_bound", bound.value());
    }
    let text = match &out.instance {
        Target::Cnf(c) => write_dimacs(c),
        Target::Graph(g) => {
            let mut g = g.clone();
            g.is_target = out.target_k();
            write_graph(&g)
        }
    };
    write(req.output, &text)?;
    if let Some(path) = req.emit_td {
        write(path, &write_td(&certificate, structure.num_vertices))?;
    }
    Ok(())
}

fn validate(input: &Path, td: &Path, nice: bool, report: &mut Report) -> Outcome {
    let structure = read_structure(input)?;
    let td = read_td(td)?;
    let result = match (&structure, nice) {
        (Structure::Cnf(c), true) => validate_nice(NiceTarget::Cnf(c), &td),
        (Structure::Graph(g), true) => validate_nice(NiceTarget::Graph(g), &td),
        (Structure::Cnf(c), false) => validate_decomposition(&widthred::instances::primal_graph(c), &td),
        (Structure::Graph(g), false) => validate_decomposition(g, &td),
    };
    report.put("bags", td.len());
    report.put("width", td.width());
    report.put("path_shaped", td.is_path);
    report.put("valid", result.is_valid());
    for v in &result.violations {
        report.put("violation", v);
    }
    if result.is_valid() {
        Ok(())
    } else {
        Err(Failure::invalid(format!("{} violation(s)", result.violations.len())))
    }
}

fn solve(oracle: OracleChoice, input: &Path, td: Option<&Path>, cap: usize, report: &mut Report) -> Outcome {
    report.put("oracle", cli_name(oracle));
    let answer: OracleAnswer = match oracle {
        OracleChoice::Sat => {
            let a = sat_bruteforce_with_cap(&read_cnf(input)?, cap)?;
            report.put("satisfiable", a.is_yes());
            a
        }
        OracleChoice::Max2sat => {
            let f = read_cnf(input)?;
            let a = max2sat_bruteforce_with_cap(&f, cap)?;
            report.put("max_weight", a.value);
            if let Some(k) = f.target {
                report.put("meets_target", a.value >= k);
            }
            a
        }
        OracleChoice::Is | OracleChoice::IsDp => {
            let g = read_graph(input)?;
            let a = if oracle == OracleChoice::Is {
                is_bruteforce_with_cap(&g, cap)?
            } else {
                let td = td.ok_or_else(|| Failure::usage("--oracle is-dp needs --td"))?;
                let ntd = normalize_nice(NiceTarget::Graph(&g), &read_td(td)?, Shape::Tree)?;
                is_treewidth_dp(&g, &ntd)?
            };
            report.put("independence_number", a.value);
            if let Some(k) = g.is_target {
                report.put("meets_target", a.value >= k);
            }
            a
        }
    };
    if let Some(w) = &answer.witness {
        report.put("witness", witness_text(w));
    }
    Ok(())
}

struct CheckRequest<'a> {
    source: &'a PathBuf,
    reduced: &'a PathBuf,
    certificate: Option<&'a TreeDecomposition>,
    bound: Option<usize>,
    k: Option<u64>,
    input: &'a str,
    cert_len: usize,
}

fn need_k(k: Option<u64>, what: &str) -> Result<u64, Failure> {
    k.ok_or_else(|| Failure::usage(format!("{what} target unknown: pass --k or store it in the file header")))
}

fn check(reduction: ReductionName, req: &CheckRequest<'_>, report: &mut Report) -> Outcome {
    let claim_for = |target: &Target, map: AnswerMap, source: Source<'_>| -> Result<EquivalenceReport, Failure> {
        let claim = Claim {
            instance: target,
            answer_map: map,
            certificate: req.certificate.map(|td| (td, req.bound.unwrap_or(usize::MAX))),
            path_certificate: None,
            parts: &[],
        };
        Ok(check_equivalence(source, &claim)?)
    };
    let rep = match reduction {
        ReductionName::Max2satToSat | ReductionName::SatTo3sat => {
            let src = read_cnf(req.source)?;
            let target = Target::Cnf(read_cnf(req.reduced)?);
            let map = if reduction == ReductionName::SatTo3sat {
                AnswerMap::Equisatisfiable
            } else {
                AnswerMap::MaxAtLeastIffSat { k: need_k(req.k.or(src.target), "Max 2-SAT")? }
            };
            claim_for(&target, map, Source::Formula(&src))?
        }
        ReductionName::ThreeSatToIs | ReductionName::ThreeSatToCw => {
            let src = read_cnf(req.source)?;
            let g = read_graph(req.reduced)?;
            let k = need_k(req.k.or(g.is_target), "independent-set")?;
            claim_for(&Target::Graph(g), AnswerMap::SatIffIndependentSet { k }, Source::Formula(&src))?
        }
        ReductionName::IsToMax2sat => {
            let g = read_graph(req.source)?;
            let f = read_cnf(req.reduced)?;
            let k = need_k(req.k.or(g.is_target), "independent-set")?;
            let k_prime = need_k(f.target, "Max 2-SAT")?;
            let map = AnswerMap::IndependentSetIffMaxAtLeast { k, k_prime };
            claim_for(&Target::Cnf(f), map, Source::Graph(&g))?
        }
        ReductionName::IsCwToSat => {
            let g = evaluate_kexpression(&parse_cwe(&read(req.source)?)?)?.graph;
            let k = need_k(req.k, "independent-set")?;
            let target = Target::Cnf(read_cnf(req.reduced)?);
            claim_for(&target, AnswerMap::IndependentSetIffSat { k }, Source::Graph(&g))?
        }
        ReductionName::TmToSat => {
            let tm = parse_tm(&read(req.source)?)?;
            let input = parse_bits(req.input)?;
            let target = Target::Cnf(read_cnf(req.reduced)?);
            let source = Source::Machine { tm: &tm, input: &input, cert_len: req.cert_len };
            claim_for(&target, AnswerMap::AcceptIffSat, source)?
        }
    };
    report.put("source_answer", rep.source_yes);
    report.put("target_answer", rep.target_yes);
    report.put("answers_agree", rep.answers_agree());
    if let Some(w) = rep.realized_width {
        report.put("realized_width", w);
    }
    if let Some(b) = req.bound {
        report.put("bound", b);
    }
    for v in &rep.violations {
        report.put("violation", v);
    }
    if let Some((side, w)) = &rep.witness {
        report.put("witness_side", side);
        report.put("witness", witness_text(w));
    }
    if rep.passed() {
        Ok(())
    } else if !rep.answers_agree() {
        Err(Failure::invalid("answers differ under the answer map"))
    } else {
        Err(Failure::invalid("certificate rejected"))
    }
}
