//! Valuation of project-join trees, maximizer reconstruction, weighted model
//! counting, and an enumeration-backed checkpoint verifier.
//!
//! For every projected variable `x` the valuator joins `W_x` into the
//! current function `g`, pushes `dsgn_x g`, and replaces the function by
//! `∃_x g`. Popping the stack afterwards assigns variables in reverse
//! elimination order, each sign being read at the partial assignment built
//! so far.

use std::fmt;
use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::diagram::{DerivativeSign, DiagramError, Function, Manager, ValueMode};
use crate::formula::{Assignment, Instance, Lit, Var};
use crate::planner::{validate, NodeIx, NodeKind, ProjectJoinTree, Violation};

/// Largest variable count accepted by [`solve_monolithic`].
pub const MONOLITHIC_LIMIT: u32 = 24;
/// Largest variable count accepted by [`verify_checkpoints`].
pub const VERIFY_LIMIT: u32 = 16;

const CACHE_SOFT_LIMIT: usize = 1 << 22;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("invalid project-join tree: {0}")]
    InvalidTree(#[from] Violation),
    #[error("monolithic limit exceeded: {vars} variables, limit {limit}")]
    MonolithicLimit { vars: u32, limit: u32 },
    #[error("enumeration limit exceeded: {vars} variables, limit {limit}")]
    EnumerationLimit { vars: u32, limit: u32 },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("checkpoint failed: {0}")]
    Checkpoint(Box<CheckpointFailure>),
}

pub type Result<T> = std::result::Result<T, ExecError>;

/// Derivative signs in push order. A variable is pushed at most once.
#[derive(Debug, Clone, Default)]
pub struct SignStack {
    entries: Vec<DerivativeSign>,
    pushed: Vec<bool>,
}

impl SignStack {
    pub fn new() -> Self {
        SignStack::default()
    }

    pub fn push(&mut self, sign: DerivativeSign) -> Result<()> {
        let pos = sign.var.pos();
        if pos >= self.pushed.len() {
            self.pushed.resize(pos + 1, false);
        }
        if self.pushed[pos] {
            return Err(ExecError::Invariant(format!(
                "variable {} pushed twice",
                sign.var
            )));
        }
        self.pushed[pos] = true;
        self.entries.push(sign);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<DerivativeSign> {
        self.entries.pop()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Bottom to top.
    pub fn iter(&self) -> impl Iterator<Item = &DerivativeSign> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Width of the tree that was valuated (the variable count for the
    /// monolithic path).
    pub width: usize,
    /// Node count of the largest intermediate diagram.
    pub peak_nodes: usize,
    /// Nodes allocated by the manager over the whole run.
    pub allocated_nodes: usize,
    /// The root valuation as computed by the diagrams, before it is
    /// replaced by the maximizer's directly computed weight.
    pub valuation: f64,
    pub valuate_time: Duration,
    pub reconstruct_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// The maximum, stored as in `mode` (a log10 value in log mode). This
    /// is the weight of `maximizer` by direct product (or sum of log10
    /// weights), which the valuation must match to within tolerance.
    pub maximum: f64,
    pub mode: ValueMode,
    /// A total assignment over the formula's variables attaining the maximum.
    pub maximizer: Assignment,
    pub stats: SolveStats,
}

impl SolveResult {
    /// The maximum as a real number; overflows to infinity in log mode when
    /// the value is out of range.
    pub fn maximum_linear(&self) -> f64 {
        self.mode.decode(self.maximum)
    }

    /// True when no assignment has nonzero weight, which includes every
    /// unsatisfiable formula.
    pub fn no_positive_model(&self) -> bool {
        self.maximum == self.mode.zero()
    }
}

/// Seeded defects for checking that the verifier notices them.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Omit the first `W_x` join.
    SkipWeightJoin,
    /// Project before taking the derivative sign.
    SwapPushProject,
    /// Break ties toward `x ↦ 0`.
    WrongTieBreak,
}

/// Places where the verifier compares the run against enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checkpoint {
    Precondition { node: NodeIx },
    JoinCondition { node: NodeIx },
    SignDefinition { node: NodeIx, var: Var },
    ProjectCondition { node: NodeIx, var: Var },
    PushMaximizer { node: NodeIx, var: Var },
    PostCondition { node: NodeIx },
    RootMaximizer,
    PopMaximizer { var: Var },
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Checkpoint::Precondition { node } => write!(f, "pre-condition at node {node}"),
            Checkpoint::JoinCondition { node } => write!(f, "join-condition at node {node}"),
            Checkpoint::SignDefinition { node, var } => {
                write!(f, "sign definition for {var} at node {node}")
            }
            Checkpoint::ProjectCondition { node, var } => {
                write!(f, "project-condition for {var} at node {node}")
            }
            Checkpoint::PushMaximizer { node, var } => {
                write!(f, "maximizer extension for {var} at node {node}")
            }
            Checkpoint::PostCondition { node } => write!(f, "post-condition at node {node}"),
            Checkpoint::RootMaximizer => write!(f, "empty maximizer at the root"),
            Checkpoint::PopMaximizer { var } => write!(f, "maximizer after popping {var}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointFailure {
    pub checkpoint: Checkpoint,
    /// Packed values of `1..=n` at the first mismatch.
    pub bits: u64,
    pub expected: f64,
    pub actual: f64,
}

impl fmt::Display for CheckpointFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (assignment bits {:#b}: expected {}, got {})",
            self.checkpoint, self.bits, self.expected, self.actual
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verification {
    Pass { checks: usize },
    Fail(CheckpointFailure),
}

impl Verification {
    pub fn passed(&self) -> bool {
        matches!(self, Verification::Pass { .. })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Executor {
    mode: ValueMode,
    mutation: Option<Mutation>,
}

impl Executor {
    pub fn new(mode: ValueMode) -> Self {
        Executor {
            mode,
            mutation: None,
        }
    }

    #[doc(hidden)]
    pub fn with_mutation(mut self, mutation: Mutation) -> Self {
        self.mutation = Some(mutation);
        self
    }

    pub fn mode(&self) -> ValueMode {
        self.mode
    }

    pub fn solve(&self, instance: &Instance, tree: &ProjectJoinTree) -> Result<SolveResult> {
        validate(tree, &instance.formula)?;
        let mut mgr = Manager::new(instance.var_count(), self.mode);
        let mut signs = SignStack::new();
        let start = Instant::now();
        let mut run = Run::new(&mut mgr, instance, Projection::Max, self.mutation, None)?;
        let root = run.valuate(tree, tree.root(), &mut signs)?;
        let peak_nodes = run.peak_nodes;
        let valuate_time = start.elapsed();
        let maximum = root_value(&mgr, root)?;
        expect_all_pushed(&signs, instance.var_count())?;

        let start = Instant::now();
        let maximizer = reconstruct(&mgr, &mut signs, None)?;
        Ok(SolveResult {
            maximum: witness_weight(instance, self.mode, maximum, &maximizer)?,
            mode: self.mode,
            maximizer,
            stats: SolveStats {
                width: tree.width(&instance.formula),
                peak_nodes,
                allocated_nodes: mgr.allocated_nodes(),
                valuation: maximum,
                valuate_time,
                reconstruct_time: start.elapsed(),
            },
        })
    }

    /// Joins every clause and weight into one diagram, then eliminates
    /// `x_n, …, x_1` in turn.
    pub fn solve_monolithic(&self, instance: &Instance) -> Result<SolveResult> {
        let n = instance.var_count();
        if n > MONOLITHIC_LIMIT {
            return Err(ExecError::MonolithicLimit {
                vars: n,
                limit: MONOLITHIC_LIMIT,
            });
        }
        let mut mgr = Manager::new(n, self.mode);
        let start = Instant::now();
        let mut f = mgr.one();
        for clause in instance.formula.clauses() {
            let c = mgr.from_clause(clause)?;
            f = mgr.join(f, c)?;
        }
        for x in instance.formula.vars() {
            let (w0, w1) = instance.weights.get(x);
            let w = mgr.literal_weight(x, w0, w1)?;
            f = mgr.join(f, w)?;
        }
        let mut peak_nodes = mgr.node_count(f)?;
        let mut signs = SignStack::new();
        for x in (1..=n).rev().map(Var::new) {
            signs.push(mgr.derivative_sign(f, x)?)?;
            f = mgr.exists_project(f, x)?;
            peak_nodes = peak_nodes.max(mgr.node_count(f)?);
        }
        let maximum = root_value(&mgr, f)?;
        let valuate_time = start.elapsed();

        let start = Instant::now();
        let maximizer = reconstruct(&mgr, &mut signs, None)?;
        Ok(SolveResult {
            maximum: witness_weight(instance, self.mode, maximum, &maximizer)?,
            mode: self.mode,
            maximizer,
            stats: SolveStats {
                width: n as usize,
                peak_nodes,
                allocated_nodes: mgr.allocated_nodes(),
                valuation: maximum,
                valuate_time,
                reconstruct_time: start.elapsed(),
            },
        })
    }

    /// Runs the linear-mode solve while checking every checkpoint against
    /// exhaustive enumeration. Stops at the first failure.
    pub fn verify(&self, instance: &Instance, tree: &ProjectJoinTree) -> Result<Verification> {
        let n = instance.var_count();
        if n > VERIFY_LIMIT {
            return Err(ExecError::EnumerationLimit {
                vars: n,
                limit: VERIFY_LIMIT,
            });
        }
        validate(tree, &instance.formula)?;
        let mut mgr = Manager::new(n, ValueMode::Linear);
        let mut verifier = Verifier::new(instance);
        let outcome = (|| {
            let mut signs = SignStack::new();
            let mut run = Run::new(
                &mut mgr,
                instance,
                Projection::Max,
                self.mutation,
                Some(&mut verifier),
            )?;
            let root = run.valuate(tree, tree.root(), &mut signs)?;
            root_value(&mgr, root)?;
            verifier.root_maximizer()?;
            reconstruct(&mgr, &mut signs, Some(&mut verifier))?;
            Ok(())
        })();
        match outcome {
            Ok(()) => Ok(Verification::Pass {
                checks: verifier.checks,
            }),
            Err(ExecError::Checkpoint(failure)) => Ok(Verification::Fail(*failure)),
            Err(e) => Err(e),
        }
    }
}

/// Solves in linear mode.
pub fn solve(instance: &Instance, tree: &ProjectJoinTree) -> Result<SolveResult> {
    Executor::new(ValueMode::Linear).solve(instance, tree)
}

/// Solves in linear mode without a tree. Refuses more than
/// [`MONOLITHIC_LIMIT`] variables.
pub fn solve_monolithic(instance: &Instance) -> Result<SolveResult> {
    Executor::new(ValueMode::Linear).solve_monolithic(instance)
}

/// Checks a linear-mode solve; see [`Executor::verify`].
pub fn verify_checkpoints(instance: &Instance, tree: &ProjectJoinTree) -> Result<Verification> {
    Executor::new(ValueMode::Linear).verify(instance, tree)
}

/// The weighted model count, by the same valuation with additive
/// projection. Linear mode only.
pub fn count(instance: &Instance, tree: &ProjectJoinTree) -> Result<f64> {
    validate(tree, &instance.formula)?;
    let mut mgr = Manager::new(instance.var_count(), ValueMode::Linear);
    let mut signs = SignStack::new();
    let mut run = Run::new(&mut mgr, instance, Projection::Sum, None, None)?;
    let root = run.valuate(tree, tree.root(), &mut signs)?;
    root_value(&mgr, root)
}

/// The valuation of the subtree at `v`, pushing one sign per projected
/// variable below it. `tree` must be valid for `instance.formula` and
/// `mgr` must cover its variables.
pub fn valuate(
    mgr: &mut Manager,
    instance: &Instance,
    tree: &ProjectJoinTree,
    v: NodeIx,
    signs: &mut SignStack,
) -> Result<Function> {
    let mut run = Run::new(mgr, instance, Projection::Max, None, None)?;
    run.valuate(tree, v, signs)
}

fn root_value(mgr: &Manager, f: Function) -> Result<f64> {
    mgr.constant_value(f)?
        .ok_or_else(|| ExecError::Invariant("root valuation is not constant".into()))
}

/// The weight of `tau` in `mode`, after checking it against the valuation:
/// relative 1e-9 in linear mode, absolute 1e-6 in log mode.
fn witness_weight(
    instance: &Instance,
    mode: ValueMode,
    valuation: f64,
    tau: &Assignment,
) -> Result<f64> {
    let unbound = |e: crate::formula::UnboundVariable| {
        ExecError::Invariant(format!("maximizer leaves {} unassigned", e.0))
    };
    let weight = match mode {
        ValueMode::Linear => instance.evaluate(tau).map_err(unbound)?,
        ValueMode::Log10 => {
            if instance.formula.evaluate(tau).map_err(unbound)? {
                instance
                    .formula
                    .vars()
                    .map(|x| {
                        instance
                            .weights
                            .weight(Lit::new(x, tau.get(x).unwrap_or(false)))
                            .log10()
                    })
                    .sum()
            } else {
                f64::NEG_INFINITY
            }
        }
    };
    let agrees = match mode {
        ValueMode::Linear => close(weight, valuation),
        ValueMode::Log10 => weight == valuation || (weight - valuation).abs() <= 1e-6,
    };
    if !agrees {
        return Err(ExecError::Invariant(format!(
            "valuation {valuation} disagrees with the maximizer's weight {weight}"
        )));
    }
    Ok(weight)
}

fn expect_all_pushed(signs: &SignStack, n: u32) -> Result<()> {
    if signs.len() != n as usize {
        return Err(ExecError::Invariant(format!(
            "{} signs pushed for {n} variables",
            signs.len()
        )));
    }
    Ok(())
}

/// Pops every sign, extending `τ` by the value its condition selects.
fn reconstruct(
    mgr: &Manager,
    signs: &mut SignStack,
    mut verifier: Option<&mut Verifier>,
) -> Result<Assignment> {
    let mut tau = Assignment::new();
    while let Some(sign) = signs.pop() {
        if tau.get(sign.var).is_some() {
            return Err(ExecError::Invariant(format!(
                "{} popped after being assigned",
                sign.var
            )));
        }
        let value = mgr.choose(&sign, &tau).map_err(|e| match e {
            DiagramError::Unbound(x) => {
                ExecError::Invariant(format!("sign for {} reads unassigned {x}", sign.var))
            }
            e => e.into(),
        })?;
        tau.set(sign.var, value);
        if let Some(v) = verifier.as_deref_mut() {
            v.pop_maximizer(sign.var, &tau)?;
        }
    }
    Ok(tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Projection {
    Max,
    Sum,
}

struct Run<'a> {
    mgr: &'a mut Manager,
    instance: &'a Instance,
    projection: Projection,
    mutation: Option<Mutation>,
    verifier: Option<&'a mut Verifier>,
    weights: Vec<Function>,
    skipped: bool,
    peak_nodes: usize,
}

impl<'a> Run<'a> {
    fn new(
        mgr: &'a mut Manager,
        instance: &'a Instance,
        projection: Projection,
        mutation: Option<Mutation>,
        mut verifier: Option<&'a mut Verifier>,
    ) -> Result<Self> {
        let mut weights = Vec::with_capacity(instance.var_count() as usize);
        for x in instance.formula.vars() {
            let (w0, w1) = instance.weights.get(x);
            weights.push(mgr.literal_weight(x, w0, w1)?);
        }
        if let Some(v) = verifier.as_deref_mut() {
            for clause in instance.formula.clauses() {
                let c = mgr.from_clause(clause)?;
                v.insert(mgr, c)?;
            }
            for &w in &weights {
                v.insert(mgr, w)?;
            }
        }
        Ok(Run {
            mgr,
            instance,
            projection,
            mutation,
            verifier,
            weights,
            skipped: false,
            peak_nodes: 0,
        })
    }

    fn note_size(&mut self, f: Function) -> Result<()> {
        self.peak_nodes = self.peak_nodes.max(self.mgr.node_count(f)?);
        Ok(())
    }

    fn valuate(
        &mut self,
        tree: &ProjectJoinTree,
        v: NodeIx,
        signs: &mut SignStack,
    ) -> Result<Function> {
        if v >= tree.len() {
            return Err(ExecError::Invariant(format!("node {v} does not exist")));
        }
        let mut acc: Vec<Option<Function>> = vec![None; tree.len()];
        let mut stack = vec![(v, None, false)];
        let mut result = None;
        while let Some((ix, parent, expanded)) = stack.pop() {
            let node = tree.node(ix);
            if !expanded {
                if let Some(ver) = self.verifier.as_deref_mut() {
                    ver.check_active(self.mgr, Checkpoint::Precondition { node: ix })?;
                }
                if !node.is_leaf() {
                    let one = self.mgr.one();
                    acc[ix] = Some(one);
                    if let Some(ver) = self.verifier.as_deref_mut() {
                        ver.insert(self.mgr, one)?;
                    }
                }
                stack.push((ix, parent, true));
                for &c in node.children.iter().rev() {
                    stack.push((c, Some(ix), false));
                }
                continue;
            }

            let f = match &node.kind {
                NodeKind::Leaf { clause } => {
                    let clause = &self.instance.formula.clauses()[*clause];
                    self.mgr.from_clause(clause)?
                }
                NodeKind::Internal { pi } => {
                    let f = acc[ix].take().expect("accumulator set on entry");
                    if let Some(ver) = self.verifier.as_deref_mut() {
                        ver.check_active(self.mgr, Checkpoint::JoinCondition { node: ix })?;
                    }
                    self.note_size(f)?;
                    let mut pi = pi.clone();
                    pi.sort_unstable();
                    self.project(ix, f, &pi, signs)?
                }
            };
            if let Some(ver) = self.verifier.as_deref_mut() {
                ver.check_active(self.mgr, Checkpoint::PostCondition { node: ix })?;
            }

            match parent {
                Some(p) => {
                    let before = acc[p].expect("parent accumulator set on entry");
                    let after = self.mgr.join(before, f)?;
                    acc[p] = Some(after);
                    if let Some(ver) = self.verifier.as_deref_mut() {
                        ver.remove(f)?;
                        ver.remove(before)?;
                        ver.insert(self.mgr, after)?;
                    }
                }
                None => result = Some(f),
            }
            if self.mgr.cache_len() > CACHE_SOFT_LIMIT {
                self.mgr.clear_cache();
            }
        }
        result.ok_or_else(|| ExecError::Invariant("traversal produced no value".into()))
    }

    fn project(
        &mut self,
        node: NodeIx,
        mut f: Function,
        pi: &[Var],
        signs: &mut SignStack,
    ) -> Result<Function> {
        for &x in pi {
            let w = *self
                .weights
                .get(x.pos())
                .ok_or_else(|| ExecError::Invariant(format!("no weight for {x}")))?;
            let skip = self.mutation == Some(Mutation::SkipWeightJoin) && !self.skipped;
            self.skipped |= skip;
            let g = if skip { f } else { self.mgr.join(f, w)? };
            self.note_size(g)?;
            let projected = match self.projection {
                Projection::Max => {
                    let projected = self.mgr.exists_project(g, x)?;
                    let sign = match self.mutation {
                        Some(Mutation::SwapPushProject) => {
                            self.mgr.derivative_sign(projected, x)?
                        }
                        Some(Mutation::WrongTieBreak) => strict_sign(self.mgr, g, x)?,
                        _ => self.mgr.derivative_sign(g, x)?,
                    };
                    signs.push(sign)?;
                    if let Some(ver) = self.verifier.as_deref_mut() {
                        ver.check_sign(self.mgr, node, g, &sign)?;
                        ver.remove(f)?;
                        ver.remove(w)?;
                        ver.insert(self.mgr, projected)?;
                        ver.eliminate(x);
                        ver.check_active(self.mgr, Checkpoint::ProjectCondition { node, var: x })?;
                        ver.check_push(self.mgr, node, &sign)?;
                    }
                    projected
                }
                Projection::Sum => self.mgr.add_project(g, x)?,
            };
            f = projected;
        }
        Ok(f)
    }
}

/// `dsgn_x g` with ties sent to `x ↦ 0`.
fn strict_sign(mgr: &mut Manager, g: Function, x: Var) -> Result<DerivativeSign> {
    let high = mgr.restrict(g, x, true)?;
    let low = mgr.restrict(g, x, false)?;
    let low_wins = mgr.greater_equal(low, high)?;
    let half = mgr.constant(0.5);
    let condition = mgr.greater_equal(half, low_wins)?;
    Ok(DerivativeSign { var: x, condition })
}

/// Enumeration state mirroring the run: the eliminated set `E`, the active
/// multiset `A`, and the table of `∃_E(⟦φ⟧·W)` over all `2^n` assignments.
struct Verifier {
    n: u32,
    full: Vec<f64>,
    eliminated: Vec<bool>,
    reference: Vec<f64>,
    maximum: f64,
    active: Vec<Function>,
    tables: FxHashMap<Function, Vec<f64>>,
    checks: usize,
}

impl Verifier {
    fn new(instance: &Instance) -> Self {
        let n = instance.var_count();
        let full: Vec<f64> = (0..1u64 << n)
            .map(|bits| {
                instance
                    .evaluate(&Assignment::from_bits(n, bits))
                    .expect("total assignment")
            })
            .collect();
        let maximum = full.iter().copied().fold(0.0, f64::max);
        Verifier {
            n,
            reference: full.clone(),
            full,
            eliminated: vec![false; n as usize],
            maximum,
            active: Vec::new(),
            tables: FxHashMap::default(),
            checks: 0,
        }
    }

    fn table(&mut self, mgr: &Manager, f: Function) -> Result<&[f64]> {
        if !self.tables.contains_key(&f) {
            let t = enumerate(mgr, f, self.n)?;
            self.tables.insert(f, t);
        }
        Ok(&self.tables[&f])
    }

    fn insert(&mut self, mgr: &Manager, f: Function) -> Result<()> {
        self.table(mgr, f)?;
        self.active.push(f);
        Ok(())
    }

    fn remove(&mut self, f: Function) -> Result<()> {
        let at = self
            .active
            .iter()
            .position(|&g| g == f)
            .ok_or_else(|| ExecError::Invariant("removed an inactive function".into()))?;
        self.active.swap_remove(at);
        Ok(())
    }

    fn eliminate(&mut self, x: Var) {
        self.eliminated[x.pos()] = true;
        max_out(&mut self.reference, x);
    }

    fn fail(&self, checkpoint: Checkpoint, bits: u64, expected: f64, actual: f64) -> ExecError {
        ExecError::Checkpoint(Box::new(CheckpointFailure {
            checkpoint,
            bits,
            expected,
            actual,
        }))
    }

    /// `⟦A⟧ = ∃_E(⟦φ⟧·W)` pointwise.
    fn check_active(&mut self, mgr: &Manager, checkpoint: Checkpoint) -> Result<()> {
        self.checks += 1;
        let mut product = vec![1.0; self.full.len()];
        for f in self.active.clone() {
            let t = self.table(mgr, f)?;
            for (p, &v) in product.iter_mut().zip(t) {
                *p *= v;
            }
        }
        for (bits, (&got, &want)) in product.iter().zip(&self.reference).enumerate() {
            if !close(got, want) {
                return Err(self.fail(checkpoint, bits as u64, want, got));
            }
        }
        Ok(())
    }

    /// The pushed condition is 1 exactly where `g` prefers or ties at
    /// `x ↦ 1`.
    fn check_sign(
        &mut self,
        mgr: &Manager,
        node: NodeIx,
        g: Function,
        sign: &DerivativeSign,
    ) -> Result<()> {
        self.checks += 1;
        let checkpoint = Checkpoint::SignDefinition {
            node,
            var: sign.var,
        };
        let bit = 1u64 << sign.var.pos();
        let g = self.table(mgr, g)?.to_vec();
        let mut free = self.eliminated.clone();
        free[sign.var.pos()] = true;
        for bits in 0..1u64 << self.n {
            if bits & bit != 0 {
                continue;
            }
            let want = g[(bits | bit) as usize] >= g[bits as usize];
            let got = self.read_sign(mgr, sign, bits, &free, checkpoint)?;
            if want != got {
                return Err(self.fail(checkpoint, bits, want as u8 as f64, got as u8 as f64));
            }
        }
        Ok(())
    }

    /// Extending any maximizer of `∃_{E ∪ {x}}` by the sign gives a
    /// maximizer of `∃_E`. Runs after `x` joined `E`.
    fn check_push(&mut self, mgr: &Manager, node: NodeIx, sign: &DerivativeSign) -> Result<()> {
        self.checks += 1;
        let x = sign.var;
        let checkpoint = Checkpoint::PushMaximizer { node, var: x };
        let bit = 1u64 << x.pos();
        self.eliminated[x.pos()] = false;
        let before = self.reference_for(&self.eliminated);
        self.eliminated[x.pos()] = true;
        let after = &self.reference;
        let mut free = self.eliminated.clone();
        free[x.pos()] = true;
        for bits in 0..1u64 << self.n {
            if bits & bit != 0 || after[bits as usize] != self.maximum {
                continue;
            }
            let choice = self.read_sign(mgr, sign, bits, &free, checkpoint)?;
            let extended = if choice { bits | bit } else { bits };
            let value = before[extended as usize];
            if value != self.maximum {
                return Err(self.fail(checkpoint, extended, self.maximum, value));
            }
        }
        Ok(())
    }

    fn root_maximizer(&mut self) -> Result<()> {
        self.checks += 1;
        if self.eliminated.iter().any(|&e| !e) || self.reference[0] != self.maximum {
            return Err(self.fail(
                Checkpoint::RootMaximizer,
                0,
                self.maximum,
                self.reference[0],
            ));
        }
        Ok(())
    }

    fn pop_maximizer(&mut self, x: Var, tau: &Assignment) -> Result<()> {
        self.checks += 1;
        self.eliminated[x.pos()] = false;
        let reference = self.reference_for(&self.eliminated);
        let bits = tau.to_bits(self.n);
        let value = reference[bits as usize];
        if value != self.maximum {
            return Err(self.fail(
                Checkpoint::PopMaximizer { var: x },
                bits,
                self.maximum,
                value,
            ));
        }
        Ok(())
    }

    fn reference_for(&self, eliminated: &[bool]) -> Vec<f64> {
        let mut t = self.full.clone();
        for (pos, &e) in eliminated.iter().enumerate() {
            if e {
                max_out(&mut t, Var::from_pos(pos));
            }
        }
        t
    }

    /// Reads a sign with only the non-eliminated variables bound.
    fn read_sign(
        &self,
        mgr: &Manager,
        sign: &DerivativeSign,
        bits: u64,
        free: &[bool],
        checkpoint: Checkpoint,
    ) -> Result<bool> {
        let tau = Assignment::from_pairs(
            (0..self.n as usize)
                .filter(|&pos| !free[pos])
                .map(|pos| (Var::from_pos(pos), bits >> pos & 1 == 1)),
        );
        mgr.choose(sign, &tau).map_err(|e| match e {
            DiagramError::Unbound(_) => self.fail(checkpoint, bits, 0.0, f64::NAN),
            e => e.into(),
        })
    }
}

fn enumerate(mgr: &Manager, f: Function, n: u32) -> Result<Vec<f64>> {
    let mut tau = Assignment::from_bits(n, 0);
    let mut out = Vec::with_capacity(1 << n);
    for bits in 0..1u64 << n {
        for pos in 0..n as usize {
            tau.set(Var::from_pos(pos), bits >> pos & 1 == 1);
        }
        out.push(mgr.evaluate(f, &tau)?);
    }
    Ok(out)
}

/// Replaces both halves of every `x`-pair by their maximum.
fn max_out(table: &mut [f64], x: Var) {
    let bit = 1usize << x.pos();
    for i in 0..table.len() {
        if i & bit == 0 {
            let m = table[i].max(table[i | bit]);
            table[i] = m;
            table[i | bit] = m;
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}
