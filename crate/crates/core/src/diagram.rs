//! Algebraic decision diagrams.
//!
//! A [`Manager`] owns every node. Nodes are hash-consed through a unique
//! table keyed by `(level, low, high)`, terminals are deduplicated by the
//! exact bit pattern of their value, and no node has `low == high`. Under a
//! fixed variable order this makes the representation canonical: two
//! functions built in the same manager are pointwise equal iff their roots
//! are the same node.
//!
//! [`Function`] is a small `Copy` handle (manager id plus root). Every
//! operation goes through `&mut Manager`, which rejects handles that belong
//! to a different manager.
//!
//! Terminals hold either plain reals ([`ValueMode::Linear`]) or base-10
//! logarithms ([`ValueMode::Log10`]). In log mode the multiplicative join
//! adds terminals, Boolean functions map `{0, 1}` to `{-inf, 0}`, and
//! existential projection is still a pointwise max.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::formula::{Assignment, Clause, ClauseKind, Var};

pub type NodeId = u32;

const TERMINAL: u32 = u32::MAX;

static NEXT_MANAGER_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    level: u32,
    low: NodeId,
    high: NodeId,
}

impl Node {
    fn terminal(value: f64) -> Self {
        let bits = value.to_bits();
        Node {
            level: TERMINAL,
            low: bits as u32,
            high: (bits >> 32) as u32,
        }
    }

    fn is_terminal(self) -> bool {
        self.level == TERMINAL
    }

    fn value(self) -> f64 {
        debug_assert!(self.is_terminal());
        f64::from_bits(u64::from(self.low) | (u64::from(self.high) << 32))
    }
}

/// How terminal values are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueMode {
    #[default]
    Linear,
    Log10,
}

impl ValueMode {
    /// Multiplicative identity (also "true" for Boolean functions).
    pub fn one(self) -> f64 {
        match self {
            ValueMode::Linear => 1.0,
            ValueMode::Log10 => 0.0,
        }
    }

    /// Multiplicative annihilator (also "false").
    pub fn zero(self) -> f64 {
        match self {
            ValueMode::Linear => 0.0,
            ValueMode::Log10 => f64::NEG_INFINITY,
        }
    }

    /// Maps a nonnegative real weight into this mode.
    pub fn encode(self, weight: f64) -> f64 {
        match self {
            ValueMode::Linear => weight,
            ValueMode::Log10 => weight.log10(),
        }
    }

    /// Maps a stored value back to a real.
    pub fn decode(self, value: f64) -> f64 {
        match self {
            ValueMode::Linear => value,
            ValueMode::Log10 => 10f64.powf(value),
        }
    }

    fn mul(self, a: f64, b: f64) -> f64 {
        match self {
            // 0 annihilates even an overflowed operand.
            ValueMode::Linear if a == 0.0 || b == 0.0 => 0.0,
            ValueMode::Linear => a * b,
            ValueMode::Log10 => a + b,
        }
    }

    fn add(self, a: f64, b: f64) -> f64 {
        match self {
            ValueMode::Linear => a + b,
            ValueMode::Log10 => {
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                if lo == f64::NEG_INFINITY {
                    hi
                } else {
                    hi + (1.0 + 10f64.powf(lo - hi)).log10()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    Mul,
    Add,
    Max,
    Ge,
    Restrict0,
    Restrict1,
    Exists,
    Sum,
}

impl Op {
    fn commutative(self) -> bool {
        matches!(self, Op::Mul | Op::Add | Op::Max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    op: Op,
    a: NodeId,
    b: u32,
}

/// A pseudo-Boolean function: a root node inside one [`Manager`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Function {
    manager: u64,
    root: NodeId,
}

impl Function {
    pub fn root(self) -> NodeId {
        self.root
    }
}

/// `dsgn_x f`: a 0/1-valued function over `vars(f) \ {x}` that is 1 exactly
/// where `f(τ ∪ {x ↦ 1}) ≥ f(τ ∪ {x ↦ 0})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivativeSign {
    pub var: Var,
    pub condition: Function,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagramError {
    #[error("function belongs to a different diagram manager")]
    ManagerMismatch,
    #[error("variable {0} is outside the manager's variable range")]
    VariableOutOfRange(Var),
    #[error("weight {0} is not a finite nonnegative number")]
    NegativeWeight(f64),
    #[error("variable {0} is on the evaluation path but unbound")]
    Unbound(Var),
    #[error("variable order is not a permutation of 1..={0}")]
    BadOrder(u32),
}

pub type Result<T> = std::result::Result<T, DiagramError>;

/// Owner of all diagram nodes, with the unique table and operation cache.
#[derive(Debug)]
pub struct Manager {
    id: u64,
    mode: ValueMode,
    level_of: Vec<u32>,
    var_at: Vec<Var>,
    nodes: Vec<Node>,
    unique: FxHashMap<Node, NodeId>,
    terminals: FxHashMap<u64, NodeId>,
    cache: FxHashMap<CacheKey, NodeId>,
}

impl Manager {
    /// A manager over variables `1..=var_count` ordered by ascending index.
    pub fn new(var_count: u32, mode: ValueMode) -> Self {
        let order: Vec<Var> = (1..=var_count).map(Var::new).collect();
        Self::with_order(&order, mode).expect("identity order is a permutation")
    }

    /// A manager whose levels follow `order` (top level first).
    pub fn with_order(order: &[Var], mode: ValueMode) -> Result<Self> {
        let n = order.len() as u32;
        let mut level_of = vec![u32::MAX; order.len()];
        for (level, var) in order.iter().enumerate() {
            let slot = level_of
                .get_mut(var.pos())
                .ok_or(DiagramError::BadOrder(n))?;
            if *slot != u32::MAX {
                return Err(DiagramError::BadOrder(n));
            }
            *slot = level as u32;
        }
        Ok(Manager {
            id: NEXT_MANAGER_ID.fetch_add(1, Ordering::Relaxed),
            mode,
            level_of,
            var_at: order.to_vec(),
            nodes: Vec::new(),
            unique: FxHashMap::default(),
            terminals: FxHashMap::default(),
            cache: FxHashMap::default(),
        })
    }

    pub fn mode(&self) -> ValueMode {
        self.mode
    }

    pub fn var_count(&self) -> u32 {
        self.var_at.len() as u32
    }

    /// Number of nodes ever allocated (there is no garbage collection).
    pub fn allocated_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn handle(&self, root: NodeId) -> Function {
        Function {
            manager: self.id,
            root,
        }
    }

    fn check(&self, f: Function) -> Result<NodeId> {
        if f.manager == self.id {
            Ok(f.root)
        } else {
            Err(DiagramError::ManagerMismatch)
        }
    }

    fn level(&self, var: Var) -> Result<u32> {
        self.level_of
            .get(var.pos())
            .copied()
            .ok_or(DiagramError::VariableOutOfRange(var))
    }

    fn terminal(&mut self, value: f64) -> NodeId {
        debug_assert!(!value.is_nan(), "NaN terminal");
        // -0.0 and 0.0 are the same value.
        let value = if value == 0.0 { 0.0 } else { value };
        let bits = value.to_bits();
        if let Some(&id) = self.terminals.get(&bits) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node::terminal(value));
        self.terminals.insert(bits, id);
        id
    }

    fn mk(&mut self, level: u32, low: NodeId, high: NodeId) -> NodeId {
        if low == high {
            return low;
        }
        let node = Node { level, low, high };
        if let Some(&id) = self.unique.get(&node) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(node);
        self.unique.insert(node, id);
        id
    }

    /// A constant function whose stored value is exactly `value`.
    pub fn constant(&mut self, value: f64) -> Function {
        let id = self.terminal(value);
        self.handle(id)
    }

    /// The multiplicative identity of the current mode.
    pub fn one(&mut self) -> Function {
        self.constant(self.mode.one())
    }

    /// The annihilator of the current mode.
    pub fn zero(&mut self) -> Function {
        self.constant(self.mode.zero())
    }

    /// `W_x`: `w_neg` when `x = 0` and `w_pos` when `x = 1`, encoded in the
    /// manager's mode.
    pub fn literal_weight(&mut self, x: Var, w_neg: f64, w_pos: f64) -> Result<Function> {
        for w in [w_neg, w_pos] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(DiagramError::NegativeWeight(w));
            }
        }
        let level = self.level(x)?;
        let low = self.terminal(self.mode.encode(w_neg));
        let high = self.terminal(self.mode.encode(w_pos));
        let id = self.mk(level, low, high);
        Ok(self.handle(id))
    }

    /// The Boolean function of a clause, built bottom-up along the order.
    pub fn from_clause(&mut self, clause: &Clause) -> Result<Function> {
        let mut lits = clause
            .lits()
            .iter()
            .map(|&l| Ok((self.level(l.var())?, l)))
            .collect::<Result<Vec<_>>>()?;
        lits.sort_by_key(|&(level, _)| std::cmp::Reverse(level));
        let one = self.terminal(self.mode.one());
        let zero = self.terminal(self.mode.zero());
        let root = match clause.kind() {
            ClauseKind::Disjunction => {
                let mut rest = zero;
                for (level, lit) in lits {
                    rest = if lit.is_positive() {
                        self.mk(level, rest, one)
                    } else {
                        self.mk(level, one, rest)
                    };
                }
                rest
            }
            ClauseKind::Xor => {
                // parity[p]: true iff p plus the number of satisfied deeper
                // literals is odd.
                let mut parity = [zero, one];
                for (level, lit) in lits {
                    let flip_hi = usize::from(lit.eval(true));
                    let flip_lo = usize::from(lit.eval(false));
                    let next = [0, 1].map(|p| {
                        let lo = parity[(p + flip_lo) % 2];
                        let hi = parity[(p + flip_hi) % 2];
                        (lo, hi)
                    });
                    parity = [
                        self.mk(level, next[0].0, next[0].1),
                        self.mk(level, next[1].0, next[1].1),
                    ];
                }
                parity[0]
            }
        };
        Ok(self.handle(root))
    }

    /// Builds the function over `vars` whose value at the assignment encoded
    /// by `bits` (bit `i` is the value of `vars[i]`) is `table(bits)`.
    pub fn from_fn(&mut self, vars: &[Var], mut table: impl FnMut(u64) -> f64) -> Result<Function> {
        assert!(vars.len() < 64, "too many variables for a table");
        let mut by_level = vars
            .iter()
            .enumerate()
            .map(|(bit, &v)| Ok((self.level(v)?, bit)))
            .collect::<Result<Vec<_>>>()?;
        by_level.sort_unstable();
        let root = self.build_table(&by_level, 0, &mut table);
        Ok(self.handle(root))
    }

    fn build_table(
        &mut self,
        levels: &[(u32, usize)],
        bits: u64,
        table: &mut impl FnMut(u64) -> f64,
    ) -> NodeId {
        match levels.split_first() {
            None => {
                let value = table(bits);
                self.terminal(value)
            }
            Some((&(level, bit), rest)) => {
                let low = self.build_table(rest, bits, table);
                let high = self.build_table(rest, bits | (1 << bit), table);
                self.mk(level, low, high)
            }
        }
    }

    /// Multiplicative join `f · g`.
    pub fn join(&mut self, f: Function, g: Function) -> Result<Function> {
        let (a, b) = (self.check(f)?, self.check(g)?);
        let r = self.apply(Op::Mul, a, b);
        Ok(self.handle(r))
    }

    /// Pointwise sum `f + g`.
    pub fn additive_join(&mut self, f: Function, g: Function) -> Result<Function> {
        let (a, b) = (self.check(f)?, self.check(g)?);
        let r = self.apply(Op::Add, a, b);
        Ok(self.handle(r))
    }

    /// Pointwise maximum.
    pub fn max(&mut self, f: Function, g: Function) -> Result<Function> {
        let (a, b) = (self.check(f)?, self.check(g)?);
        let r = self.apply(Op::Max, a, b);
        Ok(self.handle(r))
    }

    /// The 0/1 function that is 1 where `f ≥ g`.
    pub fn greater_equal(&mut self, f: Function, g: Function) -> Result<Function> {
        let (a, b) = (self.check(f)?, self.check(g)?);
        let r = self.apply(Op::Ge, a, b);
        Ok(self.handle(r))
    }

    /// Cofactor `f(τ ∪ {x ↦ value})`. Returns `f` when `x ∉ vars(f)`.
    pub fn restrict(&mut self, f: Function, x: Var, value: bool) -> Result<Function> {
        let a = self.check(f)?;
        let level = self.level(x)?;
        let op = if value { Op::Restrict1 } else { Op::Restrict0 };
        let r = self.unary(op, a, level);
        Ok(self.handle(r))
    }

    /// `∃_x f`: pointwise max of the two cofactors.
    pub fn exists_project(&mut self, f: Function, x: Var) -> Result<Function> {
        let a = self.check(f)?;
        let level = self.level(x)?;
        let r = self.unary(Op::Exists, a, level);
        Ok(self.handle(r))
    }

    /// `Σ_x f`: pointwise sum of the two cofactors. For `x ∉ vars(f)` this
    /// is `f + f`.
    pub fn add_project(&mut self, f: Function, x: Var) -> Result<Function> {
        let a = self.check(f)?;
        let level = self.level(x)?;
        let r = self.unary(Op::Sum, a, level);
        Ok(self.handle(r))
    }

    pub fn exists_project_all(
        &mut self,
        mut f: Function,
        vars: impl IntoIterator<Item = Var>,
    ) -> Result<Function> {
        for x in vars {
            f = self.exists_project(f, x)?;
        }
        Ok(f)
    }

    pub fn add_project_all(
        &mut self,
        mut f: Function,
        vars: impl IntoIterator<Item = Var>,
    ) -> Result<Function> {
        for x in vars {
            f = self.add_project(f, x)?;
        }
        Ok(f)
    }

    /// `dsgn_x f`, built by one `≥` comparison of the two cofactors. Ties
    /// select `x ↦ 1`.
    pub fn derivative_sign(&mut self, f: Function, x: Var) -> Result<DerivativeSign> {
        let high = self.restrict(f, x, true)?;
        let low = self.restrict(f, x, false)?;
        let condition = self.greater_equal(high, low)?;
        Ok(DerivativeSign { var: x, condition })
    }

    /// Follows one root-to-terminal path. Only variables on that path need
    /// to be bound.
    pub fn evaluate(&self, f: Function, assignment: &Assignment) -> Result<f64> {
        let mut id = self.check(f)?;
        loop {
            let node = self.nodes[id as usize];
            if node.is_terminal() {
                return Ok(node.value());
            }
            let var = self.var_at[node.level as usize];
            let value = assignment.get(var).ok_or(DiagramError::Unbound(var))?;
            id = if value { node.high } else { node.low };
        }
    }

    /// Evaluates a derivative sign at `τ` restricted to its domain and
    /// returns the chosen value of its variable.
    pub fn choose(&self, sign: &DerivativeSign, assignment: &Assignment) -> Result<bool> {
        Ok(self.evaluate(sign.condition, assignment)? != 0.0)
    }

    /// The stored value of a constant function, or `None`.
    pub fn constant_value(&self, f: Function) -> Result<Option<f64>> {
        let node = self.nodes[self.check(f)? as usize];
        Ok(node.is_terminal().then(|| node.value()))
    }

    /// `vars(f)`, sorted by index.
    pub fn support(&self, f: Function) -> Result<Vec<Var>> {
        let root = self.check(f)?;
        let mut levels = FxHashSet::default();
        self.visit(root, |node| {
            levels.insert(node.level);
        });
        let mut vars: Vec<Var> = levels
            .into_iter()
            .map(|l| self.var_at[l as usize])
            .collect();
        vars.sort_unstable();
        Ok(vars)
    }

    /// Reachable nodes, terminals included.
    pub fn node_count(&self, f: Function) -> Result<usize> {
        let root = self.check(f)?;
        let mut count = 0;
        self.visit_all(root, |_| count += 1);
        Ok(count)
    }

    /// Reachable non-terminal nodes.
    pub fn internal_node_count(&self, f: Function) -> Result<usize> {
        let root = self.check(f)?;
        let mut count = 0;
        self.visit(root, |_| count += 1);
        Ok(count)
    }

    /// Checks the reduction and ordering invariants on every node reachable
    /// from `f`.
    pub fn is_reduced(&self, f: Function) -> Result<bool> {
        let root = self.check(f)?;
        let mut ok = true;
        self.visit(root, |node| {
            let child_level = |id: NodeId| self.nodes[id as usize].level;
            ok &= node.low != node.high
                && child_level(node.low) > node.level
                && child_level(node.high) > node.level
                && self.unique.contains_key(&node);
        });
        Ok(ok)
    }

    fn visit(&self, root: NodeId, mut on_internal: impl FnMut(Node)) {
        self.visit_all(root, |node| {
            if !node.is_terminal() {
                on_internal(node)
            }
        });
    }

    fn visit_all(&self, root: NodeId, mut on_node: impl FnMut(Node)) {
        let mut seen = FxHashSet::default();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let node = self.nodes[id as usize];
            on_node(node);
            if !node.is_terminal() {
                stack.push(node.low);
                stack.push(node.high);
            }
        }
    }

    /// Graphviz rendering: solid edges for `x ↦ 1`, dashed for `x ↦ 0`.
    pub fn to_dot(&self, f: Function) -> Result<String> {
        let root = self.check(f)?;
        let mut ids = Vec::new();
        let mut seen = FxHashSet::default();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if seen.insert(id) {
                ids.push(id);
                let node = self.nodes[id as usize];
                if !node.is_terminal() {
                    stack.push(node.high);
                    stack.push(node.low);
                }
            }
        }
        ids.sort_unstable();
        let mut out = String::from("digraph add {\n");
        for &id in &ids {
            let node = self.nodes[id as usize];
            if node.is_terminal() {
                writeln!(out, "  n{id} [shape=box,label=\"{}\"];", node.value()).unwrap();
            } else {
                let var = self.var_at[node.level as usize];
                writeln!(out, "  n{id} [shape=ellipse,label=\"{var}\"];").unwrap();
                writeln!(out, "  n{id} -> n{} [style=solid];", node.high).unwrap();
                writeln!(out, "  n{id} -> n{} [style=dashed];", node.low).unwrap();
            }
        }
        out.push_str("}\n");
        Ok(out)
    }

    fn terminal_apply(&self, op: Op, x: f64, y: f64) -> f64 {
        match op {
            Op::Mul => self.mode.mul(x, y),
            Op::Add => self.mode.add(x, y),
            Op::Max => x.max(y),
            Op::Ge => f64::from(u8::from(x >= y)),
            _ => unreachable!("not a binary operation"),
        }
    }

    fn shortcut(&mut self, op: Op, a: NodeId, b: NodeId) -> Option<NodeId> {
        let (na, nb) = (self.nodes[a as usize], self.nodes[b as usize]);
        if na.is_terminal() && nb.is_terminal() {
            let v = self.terminal_apply(op, na.value(), nb.value());
            return Some(self.terminal(v));
        }
        let value = |n: Node| n.is_terminal().then(|| n.value());
        let (one, zero) = (self.mode.one(), self.mode.zero());
        match op {
            Op::Mul => {
                for (t, other) in [(value(na), b), (value(nb), a)] {
                    match t {
                        Some(v) if v == zero => return Some(self.terminal(zero)),
                        Some(v) if v == one => return Some(other),
                        _ => {}
                    }
                }
                None
            }
            Op::Add => {
                for (t, other) in [(value(na), b), (value(nb), a)] {
                    if t == Some(zero) {
                        return Some(other);
                    }
                }
                None
            }
            Op::Max if a == b => Some(a),
            Op::Ge if a == b => Some(self.terminal(1.0)),
            _ => None,
        }
    }

    fn apply(&mut self, op: Op, a: NodeId, b: NodeId) -> NodeId {
        if let Some(r) = self.shortcut(op, a, b) {
            return r;
        }
        let (a, b) = if op.commutative() && a > b {
            (b, a)
        } else {
            (a, b)
        };
        let key = CacheKey { op, a, b };
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let (na, nb) = (self.nodes[a as usize], self.nodes[b as usize]);
        let level = na.level.min(nb.level);
        let (a0, a1) = if na.level == level {
            (na.low, na.high)
        } else {
            (a, a)
        };
        let (b0, b1) = if nb.level == level {
            (nb.low, nb.high)
        } else {
            (b, b)
        };
        let low = self.apply(op, a0, b0);
        let high = self.apply(op, a1, b1);
        let r = self.mk(level, low, high);
        self.cache.insert(key, r);
        r
    }

    fn unary(&mut self, op: Op, a: NodeId, level: u32) -> NodeId {
        let node = self.nodes[a as usize];
        // Terminals have the largest level, so this also covers them. A
        // path that skips `level` does not depend on the variable, and its
        // two cofactors coincide.
        if node.level > level {
            return match op {
                Op::Sum => self.apply(Op::Add, a, a),
                _ => a,
            };
        }
        if node.level == level {
            return match op {
                Op::Restrict0 => node.low,
                Op::Restrict1 => node.high,
                Op::Exists => self.apply(Op::Max, node.low, node.high),
                Op::Sum => self.apply(Op::Add, node.low, node.high),
                _ => unreachable!("not a unary operation"),
            };
        }
        let key = CacheKey { op, a, b: level };
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let low = self.unary(op, node.low, level);
        let high = self.unary(op, node.high, level);
        let r = self.mk(node.level, low, high);
        self.cache.insert(key, r);
        r
    }
}
