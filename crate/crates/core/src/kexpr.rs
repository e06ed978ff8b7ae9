//! Clique-width expressions: an arena-backed AST over create, disjoint union,
//! join and rename, its `.cwe` text form, and evaluation to labeled graphs.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instances::UGraph;

/// Labels are positive integers.
pub type Label = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprNode {
    Create { label: Label, name: String },
    Union(usize, usize),
    Join { a: Label, b: Label, child: usize },
    Rename { from: Label, to: Label, child: usize },
}

/// An expression tree stored bottom-up: children precede their parents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CliqueExpression {
    pub nodes: Vec<ExprNode>,
    pub root: usize,
    /// Declared number of labels; every label must lie in `1..=label_budget`.
    pub label_budget: Label,
}

impl CliqueExpression {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, node: ExprNode) -> usize {
        self.nodes.push(node);
        self.root = self.nodes.len() - 1;
        self.root
    }

    pub fn create(&mut self, label: Label, name: impl Into<String>) -> usize {
        self.push(ExprNode::Create {
            label,
            name: name.into(),
        })
    }

    pub fn union(&mut self, left: usize, right: usize) -> usize {
        self.push(ExprNode::Union(left, right))
    }

    pub fn join(&mut self, a: Label, b: Label, child: usize) -> usize {
        self.push(ExprNode::Join { a, b, child })
    }

    pub fn rename(&mut self, from: Label, to: Label, child: usize) -> usize {
        self.push(ExprNode::Rename { from, to, child })
    }

    pub fn with_budget(mut self, budget: Label) -> Self {
        self.label_budget = budget;
        self
    }

    /// Largest label mentioned anywhere.
    pub fn max_label(&self) -> Label {
        self.nodes
            .iter()
            .map(|n| match n {
                ExprNode::Create { label, .. } => *label,
                ExprNode::Union(..) => 0,
                ExprNode::Join { a, b, .. } => (*a).max(*b),
                ExprNode::Rename { from, to, .. } => (*from).max(*to),
            })
            .max()
            .unwrap_or(0)
    }

    pub fn num_creates(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, ExprNode::Create { .. }))
            .count()
    }

    pub(crate) fn children(&self, i: usize) -> Vec<usize> {
        match &self.nodes[i] {
            ExprNode::Create { .. } => vec![],
            ExprNode::Union(a, b) => vec![*a, *b],
            ExprNode::Join { child, .. } | ExprNode::Rename { child, .. } => vec![*child],
        }
    }

    /// Checks the arena is a tree rooted at `root` with children before parents.
    pub fn check_shape(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        if self.root >= self.nodes.len() {
            return Err(Error::Expression(format!("root {} out of range", self.root)));
        }
        let mut used = vec![false; self.nodes.len()];
        for i in 0..self.nodes.len() {
            for c in self.children(i) {
                if c >= i {
                    return Err(Error::Expression(format!(
                        "node {i} refers to later node {c}"
                    )));
                }
                if std::mem::replace(&mut used[c], true) {
                    return Err(Error::Expression(format!("node {c} is shared")));
                }
            }
            match &self.nodes[i] {
                ExprNode::Join { a, b, .. } if a == b => {
                    return Err(Error::Expression(format!("join needs two labels, got {a},{a}")));
                }
                ExprNode::Create { label: 0, .. }
                | ExprNode::Join { a: 0, .. }
                | ExprNode::Join { b: 0, .. }
                | ExprNode::Rename { from: 0, .. }
                | ExprNode::Rename { to: 0, .. } => {
                    return Err(Error::Expression("labels start at 1".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Nodes reachable from the root, each listed once, children first.
    pub(crate) fn reachable_post_order(&self) -> Vec<usize> {
        let mut order = Vec::new();
        let mut stack = vec![(self.root, false)];
        while let Some((i, expanded)) = stack.pop() {
            if expanded {
                order.push(i);
                continue;
            }
            stack.push((i, true));
            for c in self.children(i).into_iter().rev() {
                stack.push((c, false));
            }
        }
        order
    }

    /// Text form: `eta(i,j,E)`, `rho(i,j,E)`, `union(E,E)`, `v(i,name)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.label_budget > 0 {
            let _ = writeln!(out, "labels {}", self.label_budget);
        }
        enum Item {
            Node(usize),
            Text(&'static str),
        }
        let mut stack = vec![Item::Node(self.root)];
        while let Some(item) = stack.pop() {
            match item {
                Item::Text(t) => out.push_str(t),
                Item::Node(i) => match &self.nodes[i] {
                    ExprNode::Create { label, name } => {
                        let _ = write!(out, "v({label},{name})");
                    }
                    ExprNode::Union(a, b) => {
                        out.push_str("union(");
                        stack.push(Item::Text(")"));
                        stack.push(Item::Node(*b));
                        stack.push(Item::Text(","));
                        stack.push(Item::Node(*a));
                    }
                    ExprNode::Join { a, b, child } => {
                        let _ = write!(out, "eta({a},{b},");
                        stack.push(Item::Text(")"));
                        stack.push(Item::Node(*child));
                    }
                    ExprNode::Rename { from, to, child } => {
                        let _ = write!(out, "rho({from},{to},");
                        stack.push(Item::Text(")"));
                        stack.push(Item::Node(*child));
                    }
                },
            }
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Open,
    Close,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>> {
    let mut tokens = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = line.trim();
        if line.starts_with('%') || line.starts_with("//") {
            continue;
        }
        let mut word = String::new();
        for ch in line.chars() {
            let t = match ch {
                '(' => Some(Token::Open),
                ')' => Some(Token::Close),
                ',' => Some(Token::Comma),
                c if c.is_whitespace() => None,
                c if c.is_alphanumeric() || "_:.-#'".contains(c) => {
                    word.push(c);
                    continue;
                }
                c => return Err(Error::parse(line_no, format!("unexpected character {c:?}"))),
            };
            if !word.is_empty() {
                tokens.push((Token::Word(std::mem::take(&mut word)), line_no));
            }
            if let Some(t) = t {
                tokens.push((t, line_no));
            }
        }
        if !word.is_empty() {
            tokens.push((Token::Word(word), line_no));
        }
    }
    Ok(tokens)
}

/// Parses the `.cwe` text form; an optional leading `labels <k>` fixes the
/// budget, which otherwise defaults to the largest label used.
pub fn parse_cwe(text: &str) -> Result<CliqueExpression> {
    let tokens = tokenize(text)?;
    let mut pos = 0;
    let mut budget = None;
    if let Some((Token::Word(w), line)) = tokens.first() {
        if w == "labels" {
            match tokens.get(1) {
                Some((Token::Word(k), _)) => {
                    budget = Some(k.parse::<Label>().map_err(|_| Error::parse(*line, format!("bad label budget {k:?}")))?);
                    pos = 2;
                }
                _ => return Err(Error::parse(*line, "labels needs a count")),
            }
        }
    }

    // Explicit stack: each frame is an operator awaiting its arguments.
    struct Frame {
        op: String,
        line: usize,
        nums: Vec<Label>,
        subs: Vec<usize>,
        name: Option<String>,
    }
    let mut expr = CliqueExpression::new();
    let mut frames: Vec<Frame> = Vec::new();
    let mut result: Option<usize> = None;
    let line_of = |i: usize| tokens.get(i).map_or(0, |t| t.1);
    let number = |s: &str, line: usize| -> Result<Label> {
        s.parse::<Label>()
            .map_err(|_| Error::parse(line, format!("expected a label, found {s:?}")))
    };
    while pos < tokens.len() {
        let (tok, line) = &tokens[pos];
        let line = *line;
        match tok {
            Token::Word(w) => {
                let is_op = matches!(tokens.get(pos + 1), Some((Token::Open, _)))
                    && ["eta", "rho", "union", "v"].contains(&w.as_str());
                if is_op {
                    if result.is_some() && frames.is_empty() {
                        return Err(Error::parse(line, "trailing input after expression"));
                    }
                    frames.push(Frame {
                        op: w.clone(),
                        line,
                        nums: vec![],
                        subs: vec![],
                        name: None,
                    });
                    pos += 2;
                    continue;
                }
                let f = frames
                    .last_mut()
                    .ok_or_else(|| Error::parse(line, format!("unexpected {w:?}")))?;
                match f.op.as_str() {
                    "v" if f.nums.is_empty() => f.nums.push(number(w, line)?),
                    "v" if f.name.is_none() => f.name = Some(w.clone()),
                    "eta" | "rho" if f.nums.len() < 2 => f.nums.push(number(w, line)?),
                    _ => return Err(Error::parse(line, format!("unexpected {w:?} in {}", f.op))),
                }
            }
            Token::Comma => {}
            Token::Open => return Err(Error::parse(line, "unexpected '('")),
            Token::Close => {
                let f = frames
                    .pop()
                    .ok_or_else(|| Error::parse(line, "unbalanced ')'"))?;
                let node = match f.op.as_str() {
                    "v" => match (f.nums.as_slice(), f.name) {
                        ([l], Some(name)) => expr.create(*l, name),
                        _ => return Err(Error::parse(f.line, "v needs a label and a name")),
                    },
                    "union" => match f.subs.as_slice() {
                        [a, b] => expr.union(*a, *b),
                        _ => return Err(Error::parse(f.line, "union needs two operands")),
                    },
                    "eta" => match (f.nums.as_slice(), f.subs.as_slice()) {
                        ([a, b], [c]) => {
                            if a == b {
                                return Err(Error::parse(f.line, "eta needs distinct labels"));
                            }
                            expr.join(*a, *b, *c)
                        }
                        _ => return Err(Error::parse(f.line, "eta needs two labels and an operand")),
                    },
                    _ => match (f.nums.as_slice(), f.subs.as_slice()) {
                        ([a, b], [c]) => expr.rename(*a, *b, *c),
                        _ => return Err(Error::parse(f.line, "rho needs two labels and an operand")),
                    },
                };
                match frames.last_mut() {
                    Some(parent) => {
                        let ok = match parent.op.as_str() {
                            "union" => parent.subs.len() < 2,
                            "eta" | "rho" => parent.nums.len() == 2 && parent.subs.is_empty(),
                            _ => false,
                        };
                        if !ok {
                            return Err(Error::parse(line, format!("misplaced operand in {}", parent.op)));
                        }
                        parent.subs.push(node);
                    }
                    None => result = Some(node),
                }
            }
        }
        pos += 1;
    }
    if let Some(f) = frames.last() {
        return Err(Error::parse(f.line, format!("unclosed {}", f.op)));
    }
    let root = result.ok_or_else(|| Error::parse(line_of(pos), "no expression"))?;
    expr.root = root;
    expr.label_budget = budget.unwrap_or_else(|| expr.max_label());
    expr.check_shape()?;
    Ok(expr)
}

/// Graph defined by an expression, with final labels and creation names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub graph: UGraph,
    pub labels: Vec<Label>,
    pub names: Vec<String>,
    /// Most labels carried by vertices of one subexpression at once.
    pub max_live_labels: usize,
}

/// Evaluates bottom-up; the left operand of a union receives the smaller
/// vertex identifiers.
pub fn evaluate_kexpression(expr: &CliqueExpression) -> Result<LabeledGraph> {
    expr.check_shape()?;
    let budget = expr.label_budget;
    let order = expr.reachable_post_order();
    // Vertex identifiers follow the left-to-right order of create nodes.
    let mut vid: HashMap<usize, usize> = HashMap::new();
    let mut names = Vec::new();
    for &i in &order {
        if let ExprNode::Create { name, .. } = &expr.nodes[i] {
            vid.insert(i, names.len());
            names.push(name.clone());
        }
    }
    let check = |l: Label| -> Result<()> {
        if l == 0 || l > budget {
            Err(Error::Expression(format!("label {l} outside 1..={budget}")))
        } else {
            Ok(())
        }
    };
    let mut graph = UGraph::new(names.len());
    let mut labels = vec![0; names.len()];
    let mut states: HashMap<usize, HashMap<Label, Vec<usize>>> = HashMap::new();
    let mut max_live = 0;
    for &i in &order {
        let state = match &expr.nodes[i] {
            ExprNode::Create { label, .. } => {
                check(*label)?;
                HashMap::from([(*label, vec![vid[&i]])])
            }
            ExprNode::Union(a, b) => {
                let mut x = states.remove(a).expect("child evaluated");
                let mut y = states.remove(b).expect("child evaluated");
                if x.values().map(Vec::len).sum::<usize>() < y.values().map(Vec::len).sum::<usize>() {
                    std::mem::swap(&mut x, &mut y);
                }
                for (l, vs) in y {
                    x.entry(l).or_default().extend(vs);
                }
                x
            }
            ExprNode::Join { a, b, child } => {
                check(*a)?;
                check(*b)?;
                let s = states.remove(child).expect("child evaluated");
                if let (Some(xs), Some(ys)) = (s.get(a), s.get(b)) {
                    for &u in xs {
                        for &v in ys {
                            graph.add_edge(u, v)?;
                        }
                    }
                }
                s
            }
            ExprNode::Rename { from, to, child } => {
                check(*from)?;
                check(*to)?;
                let mut s = states.remove(child).expect("child evaluated");
                if from != to {
                    if let Some(vs) = s.remove(from) {
                        s.entry(*to).or_default().extend(vs);
                    }
                }
                s
            }
        };
        max_live = max_live.max(state.len());
        states.insert(i, state);
    }
    for (l, vs) in states.remove(&expr.root).unwrap_or_default() {
        for v in vs {
            labels[v] = l;
        }
    }
    Ok(LabeledGraph {
        graph,
        labels,
        names,
        max_live_labels: max_live,
    })
}

/// The four-vertex path `a-b-c-d` with three labels.
pub const P4_EXPRESSION: &str = "eta(3,2,union(v(3,d),rho(3,2,rho(2,1,eta(3,2,union(v(3,c),eta(2,1,union(v(2,b),v(1,a)))))))))";

/// Two-label expression for the complete graph on `n >= 1` vertices.
pub fn complete_graph_expression(n: usize) -> CliqueExpression {
    let mut e = CliqueExpression::new();
    let mut cur = e.create(1, "k0");
    for j in 1..n {
        let v = e.create(2, format!("k{j}"));
        let u = e.union(cur, v);
        let joined = e.join(1, 2, u);
        cur = e.rename(2, 1, joined);
    }
    e.root = cur;
    e.with_budget(2)
}
