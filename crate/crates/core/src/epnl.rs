//! Verifier machines with a read-only input tape, a read-once certificate
//! tape, a `k`-bit work tape and a small logspace work tape; a deterministic
//! simulator; and the tableau compiler to SAT with its path decomposition.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::decomp::PathSweep;
use crate::error::{Error, Result};
use crate::gadgets::{bits_for, ConstraintSpec};
use crate::instances::{primal_graph, validate_decomposition, Literal, TreeDecomposition};
use crate::reduce_tw::{AnswerMap, CnfBuilder, ReductionOutput, Target, WidthBound};

/// Tape indices inside per-transition arrays.
pub const INPUT: usize = 0;
pub const KBIT: usize = 1;
pub const LOG: usize = 2;
pub const CERT: usize = 3;

/// One table entry. Reads of `None` match either symbol; writes of `None`
/// keep the symbol read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: usize,
    /// Symbols under the input, `k`-bit, logspace and certificate heads.
    pub read: [Option<bool>; 4],
    pub to: usize,
    pub write_k: Option<bool>,
    pub write_l: Option<bool>,
    /// Head moves, same tape order; the certificate move is 0 or 1.
    pub moves: [i8; 4],
}

impl Transition {
    pub fn matches(&self, state: usize, symbols: [bool; 4]) -> bool {
        self.from == state && self.read.iter().zip(symbols).all(|(r, s)| r.is_none_or(|r| r == s))
    }

    fn overlaps(&self, other: &Transition) -> bool {
        self.from == other.from
            && self
                .read
                .iter()
                .zip(&other.read)
                .all(|(a, b)| a.is_none() || b.is_none() || a == b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmSpec {
    pub states: Vec<String>,
    pub start: usize,
    pub accept: usize,
    /// Length of the `k`-bit tape.
    pub k: usize,
    /// Number of configurations in a run (the tableau height).
    pub time: usize,
    /// Length of the logspace tape.
    pub space: usize,
    pub transitions: Vec<Transition>,
}

impl TmSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Machine(msg));
        if self.states.is_empty() {
            return bad("no states".into());
        }
        if self.k == 0 || self.time == 0 || self.space == 0 {
            return bad("k, time and space must be positive".into());
        }
        let n = self.states.len();
        if self.start >= n || self.accept >= n {
            return bad("start or accept state out of range".into());
        }
        for (ti, t) in self.transitions.iter().enumerate() {
            if t.from >= n || t.to >= n {
                return bad(format!("transition {ti} names an unknown state"));
            }
            if t.moves.iter().any(|d| !(-1..=1).contains(d)) {
                return bad(format!("transition {ti} moves a head by more than one cell"));
            }
            if t.moves[CERT] < 0 {
                return bad(format!("transition {ti} moves the read-once certificate head left"));
            }
        }
        for (a, ta) in self.transitions.iter().enumerate() {
            for (b, tb) in self.transitions.iter().enumerate().skip(a + 1) {
                if ta.overlaps(tb) {
                    return bad(format!("transitions {a} and {b} both apply in state {}", self.states[ta.from]));
                }
            }
        }
        Ok(())
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// The transition applicable to `state` reading `symbols`, if any.
    pub fn step(&self, state: usize, symbols: [bool; 4]) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.matches(state, symbols))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "states: {}", self.states.join(" "));
        let _ = writeln!(out, "start: {}", self.states[self.start]);
        let _ = writeln!(out, "accept: {}", self.states[self.accept]);
        let _ = writeln!(out, "k: {}", self.k);
        let _ = writeln!(out, "time: {}", self.time);
        let _ = writeln!(out, "space: {}", self.space);
        out.push_str("trans:\n");
        let sym = |s: Option<bool>, wild: &'static str| match s {
            Some(true) => "1",
            Some(false) => "0",
            None => wild,
        };
        for t in &self.transitions {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {} {} {} {}",
                self.states[t.from],
                sym(t.read[INPUT], "*"),
                sym(t.read[KBIT], "*"),
                sym(t.read[LOG], "*"),
                sym(t.read[CERT], "*"),
                self.states[t.to],
                sym(t.write_k, "="),
                sym(t.write_l, "="),
                t.moves[INPUT],
                t.moves[KBIT],
                t.moves[LOG],
                t.moves[CERT],
            );
        }
        out
    }
}

/// Parses the `.tm` format: header lines `states:`, `start:`, `accept:`,
/// `k:`, `time:`, `space:`, then `trans:` followed by one line per entry
/// `q cI cK cL cC q' wK wL dI dK dL dC`. `*` matches any symbol read, `=`
/// writes back the symbol read, `#` starts a comment.
pub fn parse_tm(text: &str) -> Result<TmSpec> {
    let mut header: HashMap<&str, (usize, String)> = HashMap::new();
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut in_trans = false;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if in_trans {
            rows.push((line_no, line.split_whitespace().collect()));
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(line_no, format!("expected `key: value`, found {line:?}")))?;
        let key = key.trim();
        match key {
            "states" | "start" | "accept" | "k" | "time" | "space" => {
                if header.insert(key, (line_no, value.trim().to_string())).is_some() {
                    return Err(Error::parse(line_no, format!("duplicate `{key}:`")));
                }
            }
            "trans" => {
                in_trans = true;
                if !value.trim().is_empty() {
                    return Err(Error::parse(line_no, "transitions start on the next line"));
                }
            }
            other => return Err(Error::parse(line_no, format!("unknown section `{other}`"))),
        }
    }
    let get = |key: &str| -> Result<&(usize, String)> {
        header
            .get(key)
            .ok_or_else(|| Error::parse(0, format!("missing `{key}:`")))
    };
    let states: Vec<String> = get("states")?.1.split_whitespace().map(String::from).collect();
    let index: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != states.len() {
        return Err(Error::parse(get("states")?.0, "duplicate state name"));
    }
    let state = |(line, name): &(usize, String)| -> Result<usize> {
        index
            .get(name.as_str())
            .copied()
            .ok_or_else(|| Error::parse(*line, format!("unknown state {name:?}")))
    };
    let number = |key: &str| -> Result<usize> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| Error::parse(*line, format!("`{key}:` needs a non-negative integer, found {v:?}")))
    };
    let mut transitions = Vec::new();
    for (line, f) in rows {
        if f.len() != 12 {
            return Err(Error::parse(line, format!("transition needs 12 fields, found {}", f.len())));
        }
        let st = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::parse(line, format!("unknown state {name:?}")))
        };
        let sym = |s: &str, wild: &str| match s {
            "0" => Ok(Some(false)),
            "1" => Ok(Some(true)),
            w if w == wild => Ok(None),
            other => Err(Error::parse(line, format!("bad symbol {other:?}"))),
        };
        let mv = |s: &str| -> Result<i8> {
            s.trim_start_matches('+')
                .parse::<i8>()
                .map_err(|_| Error::parse(line, format!("bad head move {s:?}")))
        };
        transitions.push(Transition {
            from: st(f[0])?,
            read: [sym(f[1], "*")?, sym(f[2], "*")?, sym(f[3], "*")?, sym(f[4], "*")?],
            to: st(f[5])?,
            write_k: sym(f[6], "=")?,
            write_l: sym(f[7], "=")?,
            moves: [mv(f[8])?, mv(f[9])?, mv(f[10])?, mv(f[11])?],
        });
    }
    let tm = TmSpec {
        start: state(get("start")?)?,
        accept: state(get("accept")?)?,
        k: number("k")?,
        time: number("time")?,
        space: number("space")?,
        states,
        transitions,
    };
    tm.validate()?;
    Ok(tm)
}

/// Snapshot of a run. The certificate head counts cells consumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub state: usize,
    pub heads: [usize; 4],
    pub tape_k: Vec<bool>,
    pub tape_l: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Accept,
    Reject,
    /// A head left its tape.
    ResourceViolation(String),
}

#[derive(Debug, Clone)]
pub struct Run {
    pub outcome: Outcome,
    /// Configurations visited, `time` of them unless a violation stopped the run.
    pub trace: Vec<Config>,
}

/// Input tape contents: `x`, or a single 0 cell when `x` is empty.
fn input_tape(input: &[bool]) -> Vec<bool> {
    if input.is_empty() {
        vec![false]
    } else {
        input.to_vec()
    }
}

/// Runs `tm` for `time - 1` transitions. A configuration without an
/// applicable transition repeats unchanged. Certificate cells past the end
/// of `certificate` read as 0.
pub fn simulate(tm: &TmSpec, input: &[bool], certificate: &[bool]) -> Result<Run> {
    tm.validate()?;
    let x = input_tape(input);
    let mut cfg = Config {
        state: tm.start,
        heads: [0; 4],
        tape_k: vec![false; tm.k],
        tape_l: vec![false; tm.space],
    };
    let limits = [x.len() as i64, tm.k as i64, tm.space as i64, i64::MAX];
    let mut trace = vec![cfg.clone()];
    for _ in 1..tm.time {
        let symbols = [
            x[cfg.heads[INPUT]],
            cfg.tape_k[cfg.heads[KBIT]],
            cfg.tape_l[cfg.heads[LOG]],
            certificate.get(cfg.heads[CERT]).copied().unwrap_or(false),
        ];
        if let Some(t) = tm.step(cfg.state, symbols) {
            let (hk, hl) = (cfg.heads[KBIT], cfg.heads[LOG]);
            cfg.tape_k[hk] = t.write_k.unwrap_or(symbols[KBIT]);
            cfg.tape_l[hl] = t.write_l.unwrap_or(symbols[LOG]);
            for tape in 0..4 {
                let next = cfg.heads[tape] as i64 + t.moves[tape] as i64;
                if next < 0 || next >= limits[tape] {
                    return Ok(Run {
                        outcome: Outcome::ResourceViolation(format!(
                            "head {tape} moved to {next} in state {}",
                            tm.states[cfg.state]
                        )),
                        trace,
                    });
                }
                cfg.heads[tape] = next as usize;
            }
            cfg.state = t.to;
        }
        trace.push(cfg.clone());
    }
    let outcome = if cfg.state == tm.accept {
        Outcome::Accept
    } else {
        Outcome::Reject
    };
    Ok(Run { outcome, trace })
}

/// Whether some certificate of `len` bits is accepted, with the first one found.
pub fn exists_accepting_certificate(tm: &TmSpec, input: &[bool], len: usize) -> Result<Option<Vec<bool>>> {
    if len > 24 {
        return Err(Error::CapExceeded {
            what: "certificate bits",
            value: len,
            cap: 24,
        });
    }
    for code in 0..1u64 << len {
        let cert: Vec<bool> = (0..len).map(|j| code >> j & 1 == 1).collect();
        if simulate(tm, input, &cert)?.outcome == Outcome::Accept {
            return Ok(Some(cert));
        }
    }
    Ok(None)
}

/// Variables of one tableau row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepVars {
    pub state: Vec<usize>,
    /// Little-endian head counters for the input, `k`-bit and logspace tapes.
    pub head_i: Vec<usize>,
    pub head_k: Vec<usize>,
    pub head_l: Vec<usize>,
    pub tape_l: Vec<usize>,
    pub cert: usize,
    pub tape_k: Vec<usize>,
}

impl StepVars {
    /// Everything except the `k`-bit tape cells.
    pub fn control(&self) -> Vec<usize> {
        let mut v = self.state.clone();
        v.extend(&self.head_i);
        v.extend(&self.head_k);
        v.extend(&self.head_l);
        v.extend(&self.tape_l);
        v.push(self.cert);
        v
    }
}

#[derive(Debug, Clone)]
pub struct Tableau {
    pub steps: Vec<StepVars>,
    pub input_len: usize,
}

impl Tableau {
    /// Configurations read off a model. The certificate head is recovered
    /// from the transitions the model takes.
    pub fn decode(&self, tm: &TmSpec, input: &[bool], model: &[bool]) -> Vec<Config> {
        let x = input_tape(input);
        let val = |bits: &[usize]| bits.iter().enumerate().fold(0usize, |acc, (j, &v)| acc | (model[v] as usize) << j);
        let mut out: Vec<Config> = Vec::new();
        for sv in &self.steps {
            let state = sv.state.iter().position(|&v| model[v]).unwrap_or(usize::MAX);
            let mut cfg = Config {
                state,
                heads: [val(&sv.head_i), val(&sv.head_k), val(&sv.head_l), 0],
                tape_k: sv.tape_k.iter().map(|&v| model[v]).collect(),
                tape_l: sv.tape_l.iter().map(|&v| model[v]).collect(),
            };
            if let (Some(prev), Some(prev_vars)) = (out.last(), self.steps.get(out.len().wrapping_sub(1))) {
                let symbols = [
                    x[prev.heads[INPUT]],
                    prev.tape_k[prev.heads[KBIT]],
                    prev.tape_l[prev.heads[LOG]],
                    model[prev_vars.cert],
                ];
                let moved = tm.step(prev.state, symbols).map_or(0, |t| t.moves[CERT] as usize);
                cfg.heads[CERT] = prev.heads[CERT] + moved;
            }
            out.push(cfg);
        }
        out
    }

    /// Certificate bits a model commits to: the symbol seen when each cell
    /// first comes under the head.
    pub fn certificate(&self, tm: &TmSpec, input: &[bool], model: &[bool]) -> Vec<bool> {
        let configs = self.decode(tm, input, model);
        let mut cert = Vec::new();
        for (cfg, sv) in configs.iter().zip(&self.steps) {
            if cfg.heads[CERT] == cert.len() {
                cert.push(model[sv.cert]);
            }
        }
        cert
    }
}

/// Output of the tableau compiler.
#[derive(Debug, Clone)]
pub struct TmCompilation {
    pub output: ReductionOutput,
    pub tableau: Tableau,
}

/// Little-endian literals asserting `bits != value`.
fn differs(bits: &[usize], value: usize) -> Vec<Literal> {
    bits.iter()
        .enumerate()
        .map(|(j, &v)| Literal::new(v, value >> j & 1 == 0))
        .collect()
}

fn compile_err(what: &str, value: usize, width: usize) -> Error {
    Error::Machine(format!("{what} {value} does not fit in {width} counter bits"))
}

/// Table entries plus the implicit halting entries: wherever no transition
/// applies, the configuration repeats.
fn effective_rules(tm: &TmSpec) -> Vec<Transition> {
    // Patterns over (cK, cL, cC), most general first.
    let mut cubes: Vec<[Option<bool>; 3]> = Vec::new();
    for code in 0..27u32 {
        let pick = |d: u32| match code / 3u32.pow(d) % 3 {
            0 => None,
            1 => Some(false),
            _ => Some(true),
        };
        cubes.push([pick(0), pick(1), pick(2)]);
    }
    cubes.sort_by_key(|c| c.iter().filter(|x| x.is_some()).count());
    let points = |cube: &[Option<bool>; 3]| -> Vec<[bool; 3]> {
        (0..8u8)
            .map(|r| [r & 1 == 1, r & 2 == 2, r & 4 == 4])
            .filter(|p| cube.iter().zip(p).all(|(c, &x)| c.is_none_or(|c| c == x)))
            .collect()
    };
    let mut rules = tm.transitions.clone();
    for q in 0..tm.states.len() {
        for ci in [false, true] {
            let halted = |p: &[bool; 3]| tm.step(q, [ci, p[0], p[1], p[2]]).is_none();
            let mut covered: Vec<[bool; 3]> = Vec::new();
            for cube in &cubes {
                let pts = points(cube);
                if pts.iter().all(halted) && pts.iter().any(|p| !covered.contains(p)) {
                    covered.extend(pts);
                    rules.push(Transition {
                        from: q,
                        read: [Some(ci), cube[0], cube[1], cube[2]],
                        to: q,
                        write_k: None,
                        write_l: None,
                        moves: [0; 4],
                    });
                }
            }
        }
    }
    rules
}

pub fn compile_tm_to_sat(tm: &TmSpec, input: &[bool]) -> Result<ReductionOutput> {
    compile_tm_tableau(tm, input).map(|c| c.output)
}

/// Tableau encoding of all runs of `tm` on `input`: satisfiable iff some
/// certificate makes the run end in the accepting state.
///
/// Row `i` holds one-hot state flags, binary head counters, the logspace
/// and `k`-bit tape cells, and the certificate symbol under the head.
/// Clauses fix the first row and the final state, keep states exclusive,
/// freeze cells away from the heads, and for every rule and head position
/// pin the next row. Rule guards read the input symbol at compile time.
pub fn compile_tm_tableau(tm: &TmSpec, input: &[bool]) -> Result<TmCompilation> {
    tm.validate()?;
    let x = input_tape(input);
    let (n, k, s) = (x.len(), tm.k, tm.space);
    let widths = [bits_for(n as u64 - 1), bits_for(k as u64 - 1), bits_for(s as u64 - 1)];

    let mut b = CnfBuilder::default();
    let mut steps = Vec::with_capacity(tm.time);
    for i in 0..tm.time {
        let mut vars = |role: &str, count: usize| -> Vec<usize> {
            (0..count).map(|j| b.var(format!("{i}:{role}:{j}"))).collect()
        };
        let state = vars("q", tm.states.len());
        let head_i = vars("hi", widths[0]);
        let head_k = vars("hk", widths[1]);
        let head_l = vars("hl", widths[2]);
        let tape_l = vars("tl", s);
        let cert = vars("tc", 1)[0];
        let tape_k = vars("tk", k);
        steps.push(StepVars {
            state,
            head_i,
            head_k,
            head_l,
            tape_l,
            cert,
            tape_k,
        });
    }
    let first = &steps[0];
    b.clause(vec![Literal::pos(first.state[tm.start])]);
    for &v in first.head_i.iter().chain(&first.head_k).chain(&first.head_l).chain(&first.tape_k).chain(&first.tape_l) {
        b.clause(vec![Literal::neg(v)]);
    }
    b.clause(vec![Literal::pos(steps[tm.time - 1].state[tm.accept])]);
    for sv in &steps {
        for (a, &qa) in sv.state.iter().enumerate() {
            for &qb in &sv.state[a + 1..] {
                b.clause(vec![Literal::neg(qa), Literal::neg(qb)]);
            }
        }
    }

    let rules = effective_rules(tm);
    for i in 0..tm.time - 1 {
        let (cur, next) = (&steps[i], &steps[i + 1]);
        let framed = [
            (&cur.tape_k, &next.tape_k, &cur.head_k),
            (&cur.tape_l, &next.tape_l, &cur.head_l),
        ];
        for (tape, next_tape, head) in framed {
            for h in 0..tape.len() {
                let mut scope = vec![tape[h], next_tape[h]];
                scope.extend(head);
                let hb = head.len();
                b.constraint(&ConstraintSpec::from_fn(&scope, |row| {
                    let at = (0..hb).fold(0usize, |acc, j| acc | (row[2 + j] as usize) << j);
                    row[0] == row[1] || at == h
                }))?;
            }
        }
        for rule in &rules {
            for hi in (0..n).filter(|&h| rule.read[INPUT].is_none_or(|c| c == x[h])) {
                for hk in 0..k {
                    for hl in 0..s {
                        let mut guard = vec![Literal::neg(cur.state[rule.from])];
                        guard.extend(differs(&cur.head_i, hi));
                        guard.extend(differs(&cur.head_k, hk));
                        guard.extend(differs(&cur.head_l, hl));
                        let cells = [(KBIT, cur.tape_k[hk]), (LOG, cur.tape_l[hl]), (CERT, cur.cert)];
                        for (tape, v) in cells {
                            if let Some(c) = rule.read[tape] {
                                guard.push(Literal::new(v, !c));
                            }
                        }
                        let mut implies = |lits: Vec<Literal>| {
                            let mut c = guard.clone();
                            c.extend(lits);
                            b.clause(c);
                        };
                        let heads = [hi as i64, hk as i64, hl as i64];
                        let limits = [n, k, s];
                        let out_of_range = (0..3).any(|t| {
                            let to = heads[t] + rule.moves[t] as i64;
                            to < 0 || to >= limits[t] as i64
                        });
                        if out_of_range {
                            implies(vec![]);
                            continue;
                        }
                        implies(vec![Literal::pos(next.state[rule.to])]);
                        let writes = [
                            (KBIT, rule.write_k, cur.tape_k[hk], next.tape_k[hk]),
                            (LOG, rule.write_l, cur.tape_l[hl], next.tape_l[hl]),
                        ];
                        for (tape, write, old, new) in writes {
                            match write.or(rule.read[tape]) {
                                Some(c) => implies(vec![Literal::new(new, c)]),
                                None => {
                                    implies(vec![Literal::neg(old), Literal::pos(new)]);
                                    implies(vec![Literal::pos(old), Literal::neg(new)]);
                                }
                            }
                        }
                        let counters = [&next.head_i, &next.head_k, &next.head_l];
                        for t in 0..3 {
                            let to = (heads[t] + rule.moves[t] as i64) as usize;
                            if to >> counters[t].len() != 0 {
                                return Err(compile_err("head position", to, counters[t].len()));
                            }
                            for (j, &v) in counters[t].iter().enumerate() {
                                implies(vec![Literal::new(v, to >> j & 1 == 1)]);
                            }
                        }
                        if rule.moves[CERT] == 0 {
                            match rule.read[CERT] {
                                Some(c) => implies(vec![Literal::new(next.cert, c)]),
                                None => {
                                    implies(vec![Literal::neg(cur.cert), Literal::pos(next.cert)]);
                                    implies(vec![Literal::pos(cur.cert), Literal::neg(next.cert)]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let (cnf, names) = b.finish();

    // Sweep: introduce row i+1's control, trade tape cells one at a time,
    // then drop row i's control.
    let mut sw = PathSweep::new();
    sw.introduce_all(steps[0].control());
    sw.introduce_all(steps[0].tape_k.iter().copied());
    for i in 0..tm.time - 1 {
        sw.introduce_all(steps[i + 1].control());
        for h in 0..k {
            sw.introduce(steps[i + 1].tape_k[h]);
            sw.forget(steps[i].tape_k[h]);
        }
        sw.forget_all(steps[i].control());
    }
    let certificate = sw.finish();
    debug_assert!(validate_decomposition(&primal_graph(&cnf), &certificate).is_valid());
    let control = steps[0].control().len();
    let bound = WidthBound {
        formula: "k + c*|row control|",
        input_width: k,
        log_term: control,
        c: 2,
        additive: 0,
    };
    Ok(TmCompilation {
        output: ReductionOutput {
            instance: Target::Cnf(cnf),
            certificate: certificate.clone(),
            bound,
            path_certificate: Some(certificate),
            path_bound: Some(bound),
            answer_map: AnswerMap::AcceptIffSat,
            schedule: Default::default(),
            names,
            census: None,
            parts: Vec::new(),
        },
        tableau: Tableau {
            steps,
            input_len: n,
        },
    })
}

/// Path certificate of a reduction run on a path decomposition.
pub fn pw_certificate_for(output: &ReductionOutput) -> Result<TreeDecomposition> {
    output.path_certificate.clone().ok_or_else(|| {
        Error::InvalidDecomposition("the reduction did not receive a path decomposition".into())
    })
}

/// Builds machines from named states.
#[derive(Debug, Default)]
struct MachineBuilder {
    states: Vec<String>,
    index: BTreeMap<String, usize>,
    transitions: Vec<Transition>,
}

impl MachineBuilder {
    fn state(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.states.push(name.to_string());
        self.index.insert(name.to_string(), self.states.len() - 1);
        self.states.len() - 1
    }

    #[allow(clippy::too_many_arguments)]
    fn rule(&mut self, from: &str, read: [Option<bool>; 4], to: &str, write_k: Option<bool>, write_l: Option<bool>, moves: [i8; 4]) {
        let (from, to) = (self.state(from), self.state(to));
        self.transitions.push(Transition {
            from,
            read,
            to,
            write_k,
            write_l,
            moves,
        });
    }

    fn finish(mut self, start: &str, accept: &str, k: usize, time: usize, space: usize) -> TmSpec {
        let (start, accept) = (self.state(start), self.state(accept));
        TmSpec {
            states: self.states,
            start,
            accept,
            k,
            time,
            space,
            transitions: self.transitions,
        }
    }
}

/// Index width used by the bundled machines' certificates.
fn index_bits(k: usize) -> usize {
    bits_for(k as u64 - 1).max(1)
}

/// Reads one index from the certificate (little-endian) and hands it to
/// `then`; values `>= k` have no transition, so the run rejects.
fn read_index(mb: &mut MachineBuilder, prefix: &str, k: usize, input: Option<bool>, then: &dyn Fn(usize) -> String) {
    let bits = index_bits(k);
    for level in 0..bits {
        for partial in 0..1usize << level {
            let from = if level == 0 { prefix.to_string() } else { format!("{prefix}.r{level}.{partial}") };
            for bit in [false, true] {
                let value = partial | (bit as usize) << level;
                let to = if level + 1 == bits {
                    if value >= k {
                        continue;
                    }
                    then(value)
                } else {
                    format!("{prefix}.r{}.{value}", level + 1)
                };
                let read_input = if level == 0 { input } else { None };
                mb.rule(&from, [read_input, None, None, Some(bit)], &to, None, None, [0, 0, 0, 1]);
            }
        }
    }
}

/// Moves the `k`-bit head from 0 to `v`, requires an unmarked cell, marks
/// it and returns to 0, moving the input head by `input_move` at the end.
fn mark_cell(mb: &mut MachineBuilder, prefix: &str, v: usize, input_move: i8, then: &str) {
    for j in 0..v {
        mb.rule(&format!("{prefix}.go{j}"), [None; 4], &format!("{prefix}.go{}", j + 1), None, None, [0, 1, 0, 0]);
    }
    let mark = format!("{prefix}.go{v}");
    if v == 0 {
        mb.rule(&mark, [None, Some(false), None, None], then, Some(true), None, [input_move, 0, 0, 0]);
        return;
    }
    mb.rule(&mark, [None, Some(false), None, None], &format!("{prefix}.back{}", v - 1), Some(true), None, [0, -1, 0, 0]);
    for j in (0..v).rev() {
        let from = format!("{prefix}.back{j}");
        if j == 0 {
            mb.rule(&from, [None; 4], then, None, None, [input_move, 0, 0, 0]);
        } else {
            mb.rule(&from, [None; 4], &format!("{prefix}.back{}", j - 1), None, None, [0, -1, 0, 0]);
        }
    }
}

/// Permutation checker on a `k`-bit tape. The input is `1^r 0`; the
/// certificate lists `r` cell indices. Each index marks its cell with a 1,
/// a revisited cell rejects, and reaching the 0 accepts. So inputs with
/// `r <= k` have accepting certificates and `r > k` has none.
pub fn permcheck_machine(k: usize, max_indices: usize) -> TmSpec {
    let mut mb = MachineBuilder::default();
    mb.state("read");
    mb.state("accept");
    read_index(&mut mb, "read", k, Some(true), &|v| format!("mark{v}.go0"));
    mb.rule("read", [Some(false), None, None, None], "accept", None, None, [0; 4]);
    for v in 0..k {
        mark_cell(&mut mb, &format!("mark{v}"), v, 1, "read");
    }
    let per_index = index_bits(k) + 2 * (k - 1) + 1;
    mb.finish("read", "accept", k, max_indices * per_index + 2, 1)
}

/// Directed Hamiltonicity on three vertices. The input is the row-major
/// adjacency matrix (bit `3u + v` for the arc `u -> v`). The certificate
/// names the successor of each vertex as a one-hot row, so the input and
/// certificate heads advance together over the matrix. Each successor is
/// marked on the 3-bit tape; a second visit to a cell, a missing arc, an
/// empty row or a fixed point rejects. A fixed-point-free permutation of
/// three vertices is a single 3-cycle.
pub fn hamilton3_machine() -> TmSpec {
    const N: usize = 3;
    let mut mb = MachineBuilder::default();
    let cell = |u: usize, v: usize, found: bool| format!("s{u}.{v}.{}", found as u8);
    mb.state(&cell(0, 0, false));
    mb.state("accept");
    for u in 0..N {
        for v in 0..N {
            let last_cell = u + 1 == N && v + 1 == N;
            let input_move = if last_cell { 0 } else { 1 };
            let next = |found: bool| {
                if v + 1 < N {
                    cell(u, v + 1, found)
                } else if !found {
                    "reject".to_string()
                } else if u + 1 == N {
                    "accept".to_string()
                } else {
                    format!("rewind{}", u + 1)
                }
            };
            let k_move = if v + 1 < N { 1 } else { 0 };
            for found in [false, true] {
                let here = cell(u, v, found);
                if found && v == 0 {
                    continue;
                }
                // Not the successor: pass over.
                if !(v + 1 == N && !found) {
                    mb.rule(&here, [None, None, None, Some(false)], &next(found), None, None, [input_move, k_move, 0, 1]);
                }
                // The successor: needs an arc, a fresh cell and no earlier hit.
                if !found && v != u {
                    mb.rule(&here, [Some(true), Some(false), None, Some(true)], &next(true), Some(true), None, [input_move, k_move, 0, 1]);
                }
            }
        }
        if u + 1 < N {
            let r = format!("rewind{}", u + 1);
            mb.rule(&r, [None; 4], &format!("{r}.1"), None, None, [0, -1, 0, 0]);
            mb.rule(&format!("{r}.1"), [None; 4], &cell(u + 1, 0, false), None, None, [0, -1, 0, 0]);
        }
    }
    let time = N * N + 2 * (N - 1) + 1;
    mb.finish(&cell(0, 0, false), "accept", N, time, 1)
}

/// One-hot successor rows describing the cycle that visits `order`.
pub fn cycle_certificate(order: &[usize]) -> Vec<bool> {
    let n = order.len();
    let mut succ = vec![0; n];
    for (j, &v) in order.iter().enumerate() {
        succ[v] = order[(j + 1) % n];
    }
    succ.iter().flat_map(|&s| (0..n).map(move |v| v == s)).collect()
}

/// Adjacency-matrix input for a digraph on three vertices.
pub fn digraph3_input(arcs: &[(usize, usize)]) -> Vec<bool> {
    let mut x = vec![false; 9];
    for &(u, v) in arcs {
        x[3 * u + v] = true;
    }
    x
}

/// Certificate listing indices in `bits`-bit little-endian form.
pub fn index_certificate(indices: &[usize], bits: usize) -> Vec<bool> {
    indices
        .iter()
        .flat_map(|&v| (0..bits).map(move |j| v >> j & 1 == 1))
        .collect()
}

/// `1^r 0`.
pub fn unary_input(r: usize) -> Vec<bool> {
    let mut x = vec![true; r];
    x.push(false);
    x
}

pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::parse(1, format!("expected a bit, found {other:?}"))),
        })
        .collect()
}
