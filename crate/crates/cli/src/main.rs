mod commands;
mod outcome;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use outcome::{Failure, Report};

/// Width-preserving reductions with certificates, oracles and a verifier
/// compiler.
#[derive(Debug, Parser)]
#[command(name = "widthred", version)]
pub struct Cli {
    /// Also write the `key value` report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,

    /// Exhaustive-search cap (overrides WIDTHRED_CAP).
    #[arg(long, global = true)]
    pub cap: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    Max2sat,
    Sat,
    #[value(name = "3sat")]
    ThreeSat,
    Is,
    /// Independent set given by a k-expression.
    IsCw,
    /// 3-SAT to independent set, also emitting a k-expression.
    #[value(name = "3sat-to-cw")]
    ThreeSatToCw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetKind {
    Sat,
    #[value(name = "3sat")]
    ThreeSat,
    Is,
    Max2sat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleChoice {
    Sat,
    Max2sat,
    Is,
    IsDp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReductionName {
    Max2satToSat,
    #[value(name = "sat-to-3sat")]
    SatTo3sat,
    #[value(name = "3sat-to-is")]
    ThreeSatToIs,
    IsToMax2sat,
    IsCwToSat,
    #[value(name = "3sat-to-cw")]
    ThreeSatToCw,
    TmToSat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    RandomCnf,
    RandomGraph,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce an instance and write the target with its width certificate.
    Reduce {
        #[arg(long, value_enum)]
        from: SourceKind,
        #[arg(long, value_enum)]
        to: TargetKind,
        input: PathBuf,
        /// Tree decomposition of the input.
        #[arg(long, conflicts_with = "pd")]
        td: Option<PathBuf>,
        /// Path decomposition of the input; the output then carries a path certificate.
        #[arg(long)]
        pd: Option<PathBuf>,
        /// Independent-set target for `--from is-cw` (or to override the file's).
        #[arg(long)]
        k: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        emit_td: Option<PathBuf>,
        /// For `--from 3sat-to-cw`: where to write the k-expression.
        #[arg(long)]
        emit_cwe: Option<PathBuf>,
    },
    /// Check a decomposition of a CNF primal graph or a graph.
    Validate {
        input: PathBuf,
        td: PathBuf,
        /// Also require a nice decomposition with an empty root.
        #[arg(long)]
        nice: bool,
    },
    /// Run one oracle.
    Solve {
        #[arg(long, value_enum)]
        oracle: OracleChoice,
        input: PathBuf,
        /// Decomposition for `is-dp`.
        #[arg(long)]
        td: Option<PathBuf>,
    },
    /// Evaluate a k-expression into a graph.
    EvalCwe {
        expr: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compile a verifier machine on an input into CNF.
    CompileTm {
        tm: PathBuf,
        /// Input bits, e.g. `1110`.
        #[arg(long, default_value = "")]
        input: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Write the path certificate.
        #[arg(long)]
        emit_pd: Option<PathBuf>,
    },
    /// Decide both sides of a reduction and validate its certificate.
    Check {
        source: PathBuf,
        reduced: PathBuf,
        #[arg(long, value_enum)]
        reduction: ReductionName,
        /// Certificate of the reduced instance.
        #[arg(long)]
        td: Option<PathBuf>,
        /// Claimed width bound for the certificate.
        #[arg(long)]
        bound: Option<usize>,
        /// Independent-set target when the files do not carry one.
        #[arg(long)]
        k: Option<u64>,
        /// Machine input for `tm-to-sat`.
        #[arg(long, default_value = "")]
        input: String,
        /// Certificate length searched for `tm-to-sat`.
        #[arg(long, default_value_t = 0)]
        cert_len: usize,
    },
    /// Generate a seeded random instance.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        vars: usize,
        #[arg(long, default_value_t = 10)]
        clauses: usize,
        #[arg(long, default_value_t = 1)]
        min_len: usize,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        #[arg(long, default_value_t = 8)]
        vertices: usize,
        #[arg(long, default_value_t = 10)]
        edges: usize,
        /// Target stored in the header (`c m2s target` or `c is target`).
        #[arg(long)]
        target: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { outcome::EXIT_USAGE } else { outcome::EXIT_PASS });
        }
    };
    let mut report = Report::default();
    let result = commands::run(&cli, &mut report);
    let code = match &result {
        Ok(()) => outcome::EXIT_PASS,
        Err(f) => f.code,
    };
    report.put("status", if code == outcome::EXIT_PASS { "pass" } else { "fail" });
    report.put("exit", code);
    if let Err(f) = &result {
        report.put("error", f);
        eprintln!("error: {f}");
    }
    let text = report.render();
    print!("{text}");
    if let Some(path) = &cli.report {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("error: {}", Failure::io(path, e));
            return ExitCode::from(outcome::EXIT_USAGE);
        }
    }
    ExitCode::from(code)
}
