//! End-to-end check of a reduction output: both sides are decided by the
//! oracles, the answers are compared through the answer map, and the width
//! certificates are validated against the claimed bounds.

use crate::epnl::{exists_accepting_certificate, TmSpec};
use crate::error::{Error, Result};
use crate::instances::{validate_decomposition, CnfInstance, TreeDecomposition, UGraph};
use crate::oracles::{
    check_clique_partition, is_clique_cover_decide, is_decide, max2sat_decide, sat_decide, OracleAnswer, Witness,
};
use crate::reduce_tw::{AnswerMap, ReductionOutput, Target};

/// The instance a reduction started from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Formula(&'a CnfInstance),
    Graph(&'a UGraph),
    /// Accepting runs are searched over all certificates of `cert_len` bits.
    Machine {
        tm: &'a TmSpec,
        input: &'a [bool],
        cert_len: usize,
    },
}

/// What a reduction claims about its output.
#[derive(Debug, Clone)]
pub struct Claim<'a> {
    pub instance: &'a Target,
    pub answer_map: AnswerMap,
    /// Certificate with its claimed width bound.
    pub certificate: Option<(&'a TreeDecomposition, usize)>,
    pub path_certificate: Option<(&'a TreeDecomposition, usize)>,
    /// Clique partition of an independent-set target, when known.
    pub parts: &'a [Vec<usize>],
}

impl<'a> From<&'a ReductionOutput> for Claim<'a> {
    fn from(out: &'a ReductionOutput) -> Self {
        Claim {
            instance: &out.instance,
            answer_map: out.answer_map,
            certificate: Some((&out.certificate, out.bound.value())),
            path_certificate: out
                .path_certificate
                .as_ref()
                .zip(out.path_bound.map(|b| b.value())),
            parts: &out.parts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub source_yes: bool,
    pub target_yes: bool,
    pub realized_width: Option<usize>,
    pub bound: Option<usize>,
    /// Certificate problems, one line each.
    pub violations: Vec<String>,
    /// On disagreement, the witness of whichever side answered yes.
    pub witness: Option<(&'static str, Witness)>,
}

impl EquivalenceReport {
    pub fn answers_agree(&self) -> bool {
        self.source_yes == self.target_yes
    }

    pub fn passed(&self) -> bool {
        self.answers_agree() && self.violations.is_empty()
    }
}

fn mismatch(map: AnswerMap, side: &str) -> Error {
    Error::Unsupported(format!("answer map `{map}` does not fit the {side} instance"))
}

fn decide_source(source: Source<'_>, map: AnswerMap) -> Result<OracleAnswer> {
    match (source, map) {
        (Source::Formula(f), AnswerMap::MaxAtLeastIffSat { k }) => max2sat_decide(f, k),
        (Source::Formula(f), AnswerMap::Equisatisfiable | AnswerMap::SatIffIndependentSet { .. }) => {
            sat_decide(f)
        }
        (Source::Graph(g), AnswerMap::IndependentSetIffMaxAtLeast { k, .. } | AnswerMap::IndependentSetIffSat { k }) => {
            is_decide(g, k)
        }
        (Source::Machine { tm, input, cert_len }, AnswerMap::AcceptIffSat) => {
            let cert = exists_accepting_certificate(tm, input, cert_len)?;
            let yes = cert.is_some();
            Ok(OracleAnswer::decision(yes, cert.map(Witness::Assignment)))
        }
        _ => Err(mismatch(map, "source")),
    }
}

fn decide_target(claim: &Claim<'_>) -> Result<OracleAnswer> {
    match (claim.instance, claim.answer_map) {
        (Target::Cnf(c), AnswerMap::IndependentSetIffMaxAtLeast { k_prime, .. }) => max2sat_decide(c, k_prime),
        (
            Target::Cnf(c),
            AnswerMap::MaxAtLeastIffSat { .. }
            | AnswerMap::Equisatisfiable
            | AnswerMap::IndependentSetIffSat { .. }
            | AnswerMap::AcceptIffSat,
        ) => sat_decide(c),
        (Target::Graph(g), AnswerMap::SatIffIndependentSet { k }) => {
            if claim.parts.len() as u64 == k && check_clique_partition(g, claim.parts).is_ok() {
                is_clique_cover_decide(g, claim.parts)
            } else {
                is_decide(g, k)
            }
        }
        _ => Err(mismatch(claim.answer_map, "target")),
    }
}

fn check_certificate(
    structure: &UGraph,
    what: &str,
    (td, bound): (&TreeDecomposition, usize),
    violations: &mut Vec<String>,
) -> usize {
    let report = validate_decomposition(structure, td);
    violations.extend(report.violations.iter().map(|v| format!("{what}: {v}")));
    let width = td.width();
    if width > bound {
        violations.push(format!("{what}: width {width} exceeds the claimed bound {bound}"));
    }
    width
}

/// Decides both sides, compares them through the answer map and validates
/// the certificates. Oracle failures (caps, mismatched kinds) are errors;
/// a wrong answer or a bad certificate is a failing report.
pub fn check_equivalence(source: Source<'_>, claim: &Claim<'_>) -> Result<EquivalenceReport> {
    let src = decide_source(source, claim.answer_map)?;
    let dst = decide_target(claim)?;
    let structure = claim.instance.structure();
    let mut violations = Vec::new();
    let realized_width = claim
        .certificate
        .map(|c| check_certificate(&structure, "certificate", c, &mut violations));
    if let Some(p) = claim.path_certificate {
        check_certificate(&structure, "path certificate", p, &mut violations);
        if !p.0.is_path {
            violations.push("path certificate: not path-shaped".into());
        }
    }
    let (source_yes, target_yes) = (src.is_yes(), dst.is_yes());
    let witness = match (source_yes, target_yes) {
        (true, false) => src.witness.map(|w| ("source", w)),
        (false, true) => dst.witness.map(|w| ("target", w)),
        _ => None,
    };
    Ok(EquivalenceReport {
        source_yes,
        target_yes,
        realized_width,
        bound: claim.certificate.map(|c| c.1),
        violations,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{min_degree_decomposition, random_cnf, rng};
    use crate::decomp::{normalize_nice, Shape};
    use crate::instances::{primal_graph, NiceTarget};
    use crate::reduce_tw::{sat_to_3sat, threesat_to_is};

    fn unsat_formula() -> CnfInstance {
        CnfInstance::from_dimacs(3, &[&[1, 2], &[-1, 2], &[1, -2], &[-1, -2, 3], &[-3]]).unwrap()
    }

    #[test]
    fn honest_outputs_pass() {
        for seed in 0..10 {
            let f = random_cnf(&mut rng(seed), 5, 9, 1, 3);
            let td = min_degree_decomposition(&primal_graph(&f));
            let out = sat_to_3sat(&f, &td).unwrap();
            let rep = check_equivalence(Source::Formula(&f), &Claim::from(&out)).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn dropping_a_clause_is_caught_with_a_witness() {
        let f = unsat_formula();
        let td = min_degree_decomposition(&primal_graph(&f));
        let out = sat_to_3sat(&f, &td).unwrap();
        let Target::Cnf(cnf) = &out.instance else { unreachable!() };
        let mut caught = 0;
        for drop in 0..cnf.clauses.len() {
            let mut mutated = out.clone();
            let mut c = cnf.clone();
            c.clauses.remove(drop);
            mutated.instance = Target::Cnf(c.clone());
            let rep = check_equivalence(Source::Formula(&f), &Claim::from(&mutated)).unwrap();
            if !rep.answers_agree() {
                caught += 1;
                let Some(("target", Witness::Assignment(a))) = &rep.witness else {
                    panic!("missing witness: {rep:?}")
                };
                assert!(c.is_satisfied_by(a));
                assert!(!rep.passed());
            }
        }
        assert!(caught > 0);
    }

    #[test]
    fn inflated_bag_is_caught() {
        let f = random_cnf(&mut rng(4), 5, 9, 3, 3);
        let ntd = normalize_nice(NiceTarget::Cnf(&f), &min_degree_decomposition(&primal_graph(&f)), Shape::Tree).unwrap();
        let mut out = threesat_to_is(&f, &ntd).unwrap();
        let n = out.instance.structure().num_vertices;
        let widest = (0..out.certificate.len())
            .max_by_key(|&i| out.certificate.nodes[i].bag.len())
            .unwrap();
        out.certificate.nodes[widest].bag = (0..n).collect();
        let rep = check_equivalence(Source::Formula(&f), &Claim::from(&out)).unwrap();
        assert!(rep.answers_agree());
        assert!(!rep.passed());
        assert!(rep.violations.iter().any(|v| v.contains("exceeds")), "{:?}", rep.violations);
    }

    #[test]
    fn mismatched_source_is_an_error() {
        let g = UGraph::new(2);
        let f = unsat_formula();
        let out = sat_to_3sat(&f, &min_degree_decomposition(&primal_graph(&f))).unwrap();
        assert!(check_equivalence(Source::Graph(&g), &Claim::from(&out)).is_err());
    }
}
