use widthred::corpus::{min_degree_decomposition, min_degree_order, path_decomposition, random_cnf, random_graph, random_max2sat, rng};
use widthred::decomp::{normalize_nice, Shape};
use widthred::instances::{primal_graph, validate_decomposition, NiceTarget, TreeDecomposition};
use widthred::oracles::{is_bruteforce, is_clique_cover_decide, max2sat_bruteforce, max2sat_decide, sat_bruteforce, sat_decide};
use widthred::reduce_tw::{is_to_max2sat, max2sat_to_sat, sat_to_3sat, threesat_to_is, ReductionOutput};

fn certificate_ok(out: &ReductionOutput) {
    let g = out.instance.structure();
    let r = validate_decomposition(&g, &out.certificate);
    assert!(r.is_valid(), "{:?}", r.violations);
    assert!(r.width <= out.bound.value(), "{} > {}", r.width, out.bound);
    if let (Some(pc), Some(pb)) = (&out.path_certificate, &out.path_bound) {
        let r = validate_decomposition(&g, pc);
        assert!(r.is_valid() && pc.is_path, "{:?}", r.violations);
        assert!(r.width <= pb.value(), "path {} > {}", r.width, pb);
    }
}

fn nice_for(f: &widthred::instances::CnfInstance, path: bool) -> TreeDecomposition {
    let g = primal_graph(f);
    let (td, shape) = if path {
        (path_decomposition(&g, &min_degree_order(&g)), Shape::Path)
    } else {
        (min_degree_decomposition(&g), Shape::Tree)
    };
    normalize_nice(NiceTarget::Cnf(f), &td, shape).unwrap()
}

#[test]
fn max2sat_random_all_targets() {
    for seed in 0..40 {
        let mut r = rng(seed);
        let n = 2 + seed as usize % 5;
        let f = random_max2sat(&mut r, n, 1 + seed as usize % 10, 2);
        let best = max2sat_bruteforce(&f).unwrap().value;
        for k in 0..=f.total_weight() {
            let src = f.clone().with_target(k);
            let out = max2sat_to_sat(&src, &nice_for(&src, seed % 2 == 0)).unwrap();
            certificate_ok(&out);
            assert_eq!(sat_decide(out.instance.as_cnf().unwrap()).unwrap().is_yes(), best >= k, "seed {seed} k {k}");
        }
    }
}

#[test]
fn sat_to_3sat_random() {
    for seed in 0..60 {
        let mut r = rng(seed);
        let f = random_cnf(&mut r, 8, 4 + seed as usize % 6, 1, 6);
        let g = primal_graph(&f);
        let td = if seed % 2 == 0 { min_degree_decomposition(&g) } else { path_decomposition(&g, &min_degree_order(&g)) };
        let out = sat_to_3sat(&f, &td).unwrap();
        certificate_ok(&out);
        assert!(out.realized_width() <= td.width() + 2);
        assert_eq!(sat_bruteforce(&f).unwrap().is_yes(), sat_bruteforce(out.instance.as_cnf().unwrap()).unwrap().is_yes());
    }
}

#[test]
fn threesat_to_is_random() {
    for seed in 0..30 {
        let mut r = rng(seed);
        let f = random_cnf(&mut r, 2 + seed as usize % 5, 2 + seed as usize % 7, 1, 3);
        let out = threesat_to_is(&f, &nice_for(&f, seed % 2 == 1)).unwrap();
        certificate_ok(&out);
        let g = out.instance.as_graph().unwrap();
        let yes = is_clique_cover_decide(g, &out.parts).unwrap().is_yes();
        assert_eq!(sat_bruteforce(&f).unwrap().is_yes(), yes, "seed {seed}");
        eprintln!("seed {seed}: |V|={} w={} realized={} bound={}", g.num_vertices, out.bound.input_width, out.realized_width(), out.bound.value());
    }
}

#[test]
fn is_to_max2sat_random() {
    for seed in 0..40 {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 1 + seed as usize % 8, 0.4);
        let alpha = is_bruteforce(&g).unwrap().value;
        for k in 0..=g.num_vertices as u64 {
            let src = g.clone().with_target(k);
            let out = is_to_max2sat(&src, Some(&min_degree_decomposition(&g))).unwrap();
            certificate_ok(&out);
            let t = out.instance.as_cnf().unwrap();
            assert_eq!(max2sat_decide(t, t.target.unwrap()).unwrap().is_yes(), alpha >= k);
        }
    }
}
