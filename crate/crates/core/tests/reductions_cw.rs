use widthred::corpus::{min_degree_decomposition, random_cnf, random_kexpression, rng};
use widthred::decomp::{normalize_nice, Shape};
use widthred::instances::{primal_graph, validate_decomposition, NiceTarget};
use widthred::kexpr::{evaluate_kexpression, parse_cwe};
use widthred::oracles::{is_bruteforce, is_clique_cover_decide, sat_bruteforce, sat_decide};
use widthred::reduce_cw::{is_cw_to_sat_tw, same_named_graph, threesat_tw_to_is_cw};

#[test]
fn is_cw_to_sat_tw_random_all_targets() {
    for seed in 0..40 {
        let mut r = rng(seed);
        let n = 1 + seed as usize % 7;
        let k = 2 + (seed % 3) as u32;
        let expr = random_kexpression(&mut r, n, k);
        let g = evaluate_kexpression(&expr).unwrap();
        let alpha = is_bruteforce(&g.graph).unwrap().value;
        for target in 0..=n as u64 + 1 {
            let out = is_cw_to_sat_tw(&expr, target).unwrap();
            let structure = out.instance.structure();
            assert!(validate_decomposition(&structure, &out.certificate).is_valid());
            assert!(out.realized_width() <= out.bound.value(), "seed {seed}");
            let sat = sat_decide(out.instance.as_cnf().unwrap()).unwrap().is_yes();
            assert_eq!(sat, alpha >= target, "seed {seed} target {target}");
        }
    }
}

#[test]
fn text_roundtrip_of_random_expressions() {
    for seed in 0..30 {
        let expr = random_kexpression(&mut rng(seed), 6, 3);
        let back = parse_cwe(&expr.to_text()).unwrap();
        assert_eq!(evaluate_kexpression(&expr).unwrap(), evaluate_kexpression(&back).unwrap());
    }
}

#[test]
fn threesat_tw_to_is_cw_random() {
    for seed in 0..30 {
        let mut r = rng(1000 + seed);
        let n = 3 + seed as usize % 4;
        let f = random_cnf(&mut r, n, n + 1 + seed as usize % 3, 1, 3);
        let g = primal_graph(&f);
        let ntd = normalize_nice(NiceTarget::Cnf(&f), &min_degree_decomposition(&g), Shape::Tree).unwrap();
        let syn = threesat_tw_to_is_cw(&f, &ntd).unwrap();
        let ev = evaluate_kexpression(&syn.expression).unwrap();
        same_named_graph(&ev, syn.graph()).unwrap();
        let budget = syn.expression.label_budget as usize;
        println!(
            "seed {seed}: w = {}, vertices = {}, labels = {budget}, claimed = {}",
            ntd.width(),
            syn.graph().num_vertices,
            syn.bound.value()
        );
        assert!(budget <= syn.bound.value(), "seed {seed}: {budget} labels");
        assert!(syn.colors <= ntd.width() + 1);
        let sat = sat_bruteforce(&f).unwrap().is_yes();
        let is = is_clique_cover_decide(syn.graph(), &syn.reduction.parts).unwrap().is_yes();
        assert_eq!(sat, is, "seed {seed}");
    }
}
