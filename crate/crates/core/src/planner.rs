//! Project-join trees: construction by bucket elimination, validation, width,
//! and the `.jt` text format.
//!
//! Leaves map one-to-one onto clauses. Each internal node carries a set of
//! projected variables `π(v)`; these sets partition the formula's variables,
//! and every clause mentioning `x ∈ π(v)` must sit below `v`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::formula::{Formula, Var};

pub type NodeIx = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Leaf { clause: usize },
    Internal { pi: Vec<Var> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PjtNode {
    pub kind: NodeKind,
    pub children: Vec<NodeIx>,
}

impl PjtNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    /// `π(v)`; empty for leaves.
    pub fn pi(&self) -> &[Var] {
        match &self.kind {
            NodeKind::Internal { pi } => pi,
            NodeKind::Leaf { .. } => &[],
        }
    }
}

/// A rooted tree stored in an arena. Leaves come first, in clause order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectJoinTree {
    nodes: Vec<PjtNode>,
    root: NodeIx,
}

impl ProjectJoinTree {
    /// Assembles a tree from raw parts without checking it; use
    /// [`validate`] before trusting the result.
    pub fn from_parts(nodes: Vec<PjtNode>, root: NodeIx) -> Self {
        ProjectJoinTree { nodes, root }
    }

    pub fn nodes(&self) -> &[PjtNode] {
        &self.nodes
    }

    pub fn node(&self, ix: NodeIx) -> &PjtNode {
        &self.nodes[ix]
    }

    pub fn node_mut(&mut self, ix: NodeIx) -> &mut PjtNode {
        &mut self.nodes[ix]
    }

    pub fn root(&self) -> NodeIx {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `vars(v)` for every node: clause variables at leaves, and the union
    /// of the children's sets minus `π(v)` at internal nodes.
    pub fn node_vars(&self, formula: &Formula) -> Vec<BTreeSet<Var>> {
        let mut out = vec![BTreeSet::new(); self.nodes.len()];
        for ix in self.post_order() {
            let node = &self.nodes[ix];
            let vars = match &node.kind {
                NodeKind::Leaf { clause } => formula
                    .clauses()
                    .get(*clause)
                    .map(|c| c.vars().collect())
                    .unwrap_or_default(),
                NodeKind::Internal { pi } => {
                    let mut set: BTreeSet<Var> = node
                        .children
                        .iter()
                        .flat_map(|&c| out[c].iter().copied())
                        .collect();
                    for x in pi {
                        set.remove(x);
                    }
                    set
                }
            };
            out[ix] = vars;
        }
        out
    }

    /// Children before parents, starting from the root. Nodes unreachable
    /// from the root are skipped; a node is emitted at most once.
    pub fn post_order(&self) -> Vec<NodeIx> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(self.root, false)];
        while let Some((ix, expanded)) = stack.pop() {
            if expanded {
                out.push(ix);
                continue;
            }
            if ix >= self.nodes.len() || seen[ix] {
                continue;
            }
            seen[ix] = true;
            stack.push((ix, true));
            for &c in self.nodes[ix].children.iter().rev() {
                stack.push((c, false));
            }
        }
        out
    }

    /// Maximum over nodes of `|vars(v)|` (leaves) or `|vars(v) ∪ π(v)|`
    /// (internal nodes).
    pub fn width(&self, formula: &Formula) -> usize {
        let vars = self.node_vars(formula);
        self.post_order()
            .into_iter()
            .map(|ix| vars[ix].len() + self.nodes[ix].pi().len())
            .max()
            .unwrap_or(0)
    }

    /// Serializes in the `.jt` format. Leaves are numbered `1..=clauses`
    /// by clause index; internal nodes follow in arena order and the root
    /// is the last line.
    pub fn to_jt(&self, formula: &Formula) -> String {
        let mut ids = vec![0usize; self.nodes.len()];
        let mut next = formula.clauses().len() + 1;
        let mut internals = Vec::new();
        for (ix, node) in self.nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Leaf { clause } => ids[ix] = clause + 1,
                NodeKind::Internal { .. } if ix != self.root => {
                    ids[ix] = next;
                    next += 1;
                    internals.push(ix);
                }
                NodeKind::Internal { .. } => {}
            }
        }
        ids[self.root] = next;
        internals.push(self.root);

        let mut out = String::new();
        writeln!(
            out,
            "p jt {} {} {}",
            formula.var_count(),
            formula.clauses().len(),
            next
        )
        .unwrap();
        for ix in internals {
            let node = &self.nodes[ix];
            write!(out, "{}", ids[ix]).unwrap();
            for &c in &node.children {
                write!(out, " {}", ids[c]).unwrap();
            }
            out.push_str(" e");
            for x in node.pi() {
                write!(out, " {}", x.index()).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses the `.jt` format written by [`ProjectJoinTree::to_jt`].
    pub fn from_jt(text: &str) -> Result<Self, JtError> {
        let mut header: Option<(u32, usize, usize)> = None;
        let mut nodes: Vec<Option<PjtNode>> = Vec::new();
        let mut last = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line == "c" || line.starts_with("c ") {
                continue;
            }
            let bad = |msg: &str| JtError {
                line: line_no,
                message: msg.to_string(),
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens[0] == "p" {
                if tokens.len() != 5 || tokens[1] != "jt" || header.is_some() {
                    return Err(bad("malformed header"));
                }
                let parse = |t: &str| t.parse::<usize>().map_err(|_| bad("non-numeric header"));
                let (v, c, n) = (parse(tokens[2])?, parse(tokens[3])?, parse(tokens[4])?);
                if n < c {
                    return Err(bad("fewer nodes than clauses"));
                }
                header = Some((v as u32, c, n));
                nodes = (0..n).map(|_| None).collect();
                for (clause, slot) in nodes.iter_mut().take(c).enumerate() {
                    *slot = Some(PjtNode {
                        kind: NodeKind::Leaf { clause },
                        children: Vec::new(),
                    });
                }
                continue;
            }
            let (var_count, clauses, count) = header.ok_or_else(|| bad("missing header"))?;
            let e = tokens
                .iter()
                .position(|&t| t == "e")
                .ok_or_else(|| bad("missing `e` separator"))?;
            let num = |t: &str| t.parse::<usize>().map_err(|_| bad("non-numeric token"));
            let id = num(tokens[0])?;
            if id <= clauses || id > count {
                return Err(bad("internal node id out of range"));
            }
            let children = tokens[1..e]
                .iter()
                .map(|t| {
                    let c = num(t)?;
                    if c == 0 || c > count {
                        Err(bad("child id out of range"))
                    } else {
                        Ok(c - 1)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let pi = tokens[e + 1..]
                .iter()
                .map(|t| {
                    let x = num(t)?;
                    if x == 0 || x > var_count as usize {
                        Err(bad("variable out of range"))
                    } else {
                        Ok(Var::new(x as u32))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            if nodes[id - 1].is_some() {
                return Err(bad("node defined twice"));
            }
            nodes[id - 1] = Some(PjtNode {
                kind: NodeKind::Internal { pi },
                children,
            });
            last = Some(id - 1);
        }
        let (_, clauses, _) = header.ok_or(JtError {
            line: 0,
            message: "missing header".into(),
        })?;
        let root = match last {
            Some(r) => r,
            None => {
                return Err(JtError {
                    line: 0,
                    message: format!("no internal nodes for {clauses} clauses"),
                })
            }
        };
        let nodes = nodes
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                n.ok_or(JtError {
                    line: 0,
                    message: format!("node {} never defined", i + 1),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProjectJoinTree { nodes, root })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct JtError {
    pub line: usize,
    pub message: String,
}

/// Greedy elimination-order heuristics on the primal graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Heuristic {
    MinDegree,
    #[default]
    MinFill,
    Lexicographic,
}

/// A permutation of the formula's variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder(Vec<Var>);

impl EliminationOrder {
    pub fn new(order: Vec<Var>) -> Self {
        EliminationOrder(order)
    }

    pub fn identity(var_count: u32) -> Self {
        EliminationOrder((1..=var_count).map(Var::new).collect())
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

/// Primal graph: vertices are variables, with an edge whenever two
/// variables share a clause.
fn primal_graph(formula: &Formula) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); formula.var_count() as usize];
    for clause in formula.clauses() {
        let vars: Vec<usize> = clause.vars().map(Var::pos).collect();
        for &a in &vars {
            for &b in &vars {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    adj
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nbrs: Vec<usize> = adj[v].iter().copied().collect();
    let mut missing = 0;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !adj[a].contains(&b) {
                missing += 1;
            }
        }
    }
    missing
}

/// Computes an elimination order greedily, eliminating one vertex at a time
/// and turning its neighbourhood into a clique. Ties go to the smallest
/// variable index.
pub fn heuristic_order(formula: &Formula, heuristic: Heuristic) -> EliminationOrder {
    let n = formula.var_count() as usize;
    if heuristic == Heuristic::Lexicographic {
        return EliminationOrder::identity(n as u32);
    }
    let mut adj = primal_graph(formula);
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let score = |v: usize| match heuristic {
            Heuristic::MinDegree => adj[v].len(),
            Heuristic::MinFill => fill_in(&adj, v),
            Heuristic::Lexicographic => unreachable!(),
        };
        let best = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (score(v), v))
            .expect("a live vertex remains");
        let nbrs: Vec<usize> = adj[best].iter().copied().collect();
        for &a in &nbrs {
            adj[a].remove(&best);
            for &b in &nbrs {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[best].clear();
        alive[best] = false;
        order.push(Var::from_pos(best));
    }
    EliminationOrder(order)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("elimination order is not a permutation of the formula's {0} variables")]
    NotAPermutation(u32),
}

/// Bucket elimination. Starts with one leaf per clause; for each variable
/// in order, every live subtree mentioning it becomes a child of a new
/// internal node projecting that variable. A final root with the remaining
/// subtrees as children projects the variables whose bucket was empty.
pub fn plan(formula: &Formula, order: &EliminationOrder) -> Result<ProjectJoinTree, PlanError> {
    let n = formula.var_count();
    let mut seen = vec![false; n as usize];
    if order.0.len() != n as usize {
        return Err(PlanError::NotAPermutation(n));
    }
    for x in &order.0 {
        match seen.get_mut(x.pos()) {
            Some(s) if !*s => *s = true,
            _ => return Err(PlanError::NotAPermutation(n)),
        }
    }

    let mut nodes: Vec<PjtNode> = Vec::new();
    // Live subtrees in construction order, with their variable sets.
    let mut live: Vec<(NodeIx, BTreeSet<Var>)> = Vec::new();
    for (i, clause) in formula.clauses().iter().enumerate() {
        nodes.push(PjtNode {
            kind: NodeKind::Leaf { clause: i },
            children: Vec::new(),
        });
        live.push((i, clause.vars().collect()));
    }

    let mut root_pi = Vec::new();
    for &x in &order.0 {
        let (bucket, rest): (Vec<_>, Vec<_>) =
            live.into_iter().partition(|(_, vars)| vars.contains(&x));
        live = rest;
        if bucket.is_empty() {
            root_pi.push(x);
            continue;
        }
        let mut vars = BTreeSet::new();
        let mut children = Vec::with_capacity(bucket.len());
        for (ix, set) in bucket {
            children.push(ix);
            vars.extend(set);
        }
        vars.remove(&x);
        let ix = nodes.len();
        nodes.push(PjtNode {
            kind: NodeKind::Internal { pi: vec![x] },
            children,
        });
        live.push((ix, vars));
    }

    root_pi.sort();
    let root = nodes.len();
    nodes.push(PjtNode {
        kind: NodeKind::Internal { pi: root_pi },
        children: live.into_iter().map(|(ix, _)| ix).collect(),
    });
    Ok(ProjectJoinTree { nodes, root })
}

/// The first way a tree fails to be a project-join tree for a formula.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("node {0} does not exist")]
    MissingNode(NodeIx),
    #[error("node {node} is reached more than once or lies on a cycle")]
    NotATree { node: NodeIx },
    #[error("node {node} is not reachable from the root")]
    Unreachable { node: NodeIx },
    #[error("leaf {node} has children")]
    LeafWithChildren { node: NodeIx },
    #[error("non-root internal node {node} has no children")]
    ChildlessInternal { node: NodeIx },
    #[error("the root is a leaf")]
    LeafRoot,
    #[error("leaf {node} refers to clause {clause}, which does not exist")]
    UnknownClause { node: NodeIx, clause: usize },
    #[error("clause {clause} is the image of more than one leaf")]
    ClauseReused { clause: usize },
    #[error("clause {clause} has no leaf")]
    ClauseMissing { clause: usize },
    #[error("variable {var} is not projected by any node")]
    PartitionMissing { var: Var },
    #[error("variable {var} is projected by both node {first} and node {second}")]
    PartitionDuplicate {
        var: Var,
        first: NodeIx,
        second: NodeIx,
    },
    #[error("node {node} projects {var}, which is outside the formula")]
    PartitionForeign { node: NodeIx, var: Var },
    #[error("node {node} projects {var} but the leaf of clause {clause} is not below it")]
    Descendant {
        node: NodeIx,
        var: Var,
        clause: usize,
    },
}

/// Checks the tree shape, that γ is a bijection between leaves and clauses,
/// that the π sets partition the variables, and the descendant criterion.
pub fn validate(tree: &ProjectJoinTree, formula: &Formula) -> Result<(), Violation> {
    let nodes = &tree.nodes;
    if tree.root >= nodes.len() {
        return Err(Violation::MissingNode(tree.root));
    }
    if nodes[tree.root].is_leaf() {
        return Err(Violation::LeafRoot);
    }

    // Shape: every node reached exactly once from the root.
    let mut reached = vec![false; nodes.len()];
    let mut stack = vec![tree.root];
    while let Some(ix) = stack.pop() {
        if reached[ix] {
            return Err(Violation::NotATree { node: ix });
        }
        reached[ix] = true;
        let node = &nodes[ix];
        if node.is_leaf() && !node.children.is_empty() {
            return Err(Violation::LeafWithChildren { node: ix });
        }
        if !node.is_leaf() && node.children.is_empty() && ix != tree.root {
            return Err(Violation::ChildlessInternal { node: ix });
        }
        for &c in &node.children {
            if c >= nodes.len() {
                return Err(Violation::MissingNode(c));
            }
            stack.push(c);
        }
    }
    if let Some(ix) = reached.iter().position(|r| !r) {
        return Err(Violation::Unreachable { node: ix });
    }

    // γ bijection.
    let clause_count = formula.clauses().len();
    let mut leaf_of = vec![None; clause_count];
    for (ix, node) in nodes.iter().enumerate() {
        if let NodeKind::Leaf { clause } = node.kind {
            let slot = leaf_of
                .get_mut(clause)
                .ok_or(Violation::UnknownClause { node: ix, clause })?;
            if slot.is_some() {
                return Err(Violation::ClauseReused { clause });
            }
            *slot = Some(ix);
        }
    }
    if let Some(clause) = leaf_of.iter().position(Option::is_none) {
        return Err(Violation::ClauseMissing { clause });
    }

    // π partition.
    let mut owner: Vec<Option<NodeIx>> = vec![None; formula.var_count() as usize];
    for (ix, node) in nodes.iter().enumerate() {
        for &x in node.pi() {
            let slot = owner
                .get_mut(x.pos())
                .ok_or(Violation::PartitionForeign { node: ix, var: x })?;
            if let Some(first) = *slot {
                return Err(Violation::PartitionDuplicate {
                    var: x,
                    first,
                    second: ix,
                });
            }
            *slot = Some(ix);
        }
    }
    if let Some(pos) = owner.iter().position(Option::is_none) {
        return Err(Violation::PartitionMissing {
            var: Var::from_pos(pos),
        });
    }

    // Descendant criterion: collect the clauses below each node.
    let mut below: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for ix in tree.post_order() {
        let node = &nodes[ix];
        let mut set = match node.kind {
            NodeKind::Leaf { clause } => vec![clause],
            NodeKind::Internal { .. } => Vec::new(),
        };
        for &c in &node.children {
            set.extend_from_slice(&below[c]);
        }
        below[ix] = set;
    }
    for (ix, node) in nodes.iter().enumerate() {
        if node.pi().is_empty() {
            continue;
        }
        let mut under = vec![false; clause_count];
        for &c in &below[ix] {
            under[c] = true;
        }
        for &x in node.pi() {
            for (ci, clause) in formula.clauses().iter().enumerate() {
                if !under[ci] && clause.vars().any(|y| y == x) {
                    return Err(Violation::Descendant {
                        node: ix,
                        var: x,
                        clause: ci,
                    });
                }
            }
        }
    }
    Ok(())
}
