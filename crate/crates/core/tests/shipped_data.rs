//! The files under `data/` are generated by the library; this keeps them in
//! sync. Run with `WIDTHRED_BLESS=1` to rewrite them.

use std::path::PathBuf;

use widthred::epnl::{hamilton3_machine, parse_tm, permcheck_machine};
use widthred::kexpr::{complete_graph_expression, evaluate_kexpression, parse_cwe, P4_EXPRESSION};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn shipped() -> Vec<(String, String)> {
    let mut files = vec![
        ("machines/permcheck.tm".to_string(), permcheck_machine(3, 4).to_text()),
        ("machines/hamilton3.tm".to_string(), hamilton3_machine().to_text()),
        ("cwe/p4.cwe".to_string(), format!("% the path a-b-c-d with three labels\n{P4_EXPRESSION}\n")),
    ];
    for n in 1..=8 {
        files.push((format!("cwe/k{n}.cwe"), complete_graph_expression(n).to_text()));
    }
    files
}

#[test]
fn shipped_files_match_the_generators() {
    let bless = std::env::var_os("WIDTHRED_BLESS").is_some();
    for (rel, text) in shipped() {
        let path = data_dir().join(&rel);
        if bless {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &text).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{rel}: {e}"));
        assert_eq!(on_disk, text, "{rel} is stale; rerun with WIDTHRED_BLESS=1");
    }
}

#[test]
fn shipped_files_parse() {
    let dir = data_dir();
    for name in ["permcheck.tm", "hamilton3.tm"] {
        let text = std::fs::read_to_string(dir.join("machines").join(name)).unwrap();
        parse_tm(&text).unwrap().validate().unwrap();
    }
    for n in 1..=8 {
        let text = std::fs::read_to_string(dir.join(format!("cwe/k{n}.cwe"))).unwrap();
        let expr = parse_cwe(&text).unwrap();
        let lg = evaluate_kexpression(&expr).unwrap();
        assert_eq!(lg.graph.num_edges(), n * (n - 1) / 2);
        assert!(expr.label_budget <= 2);
    }
}
