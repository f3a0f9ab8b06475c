//! XOR-CNF formulas, literal weights, and the line-oriented text format.
//!
//! The format is DIMACS CNF with two extensions: a clause line starting with
//! `x` is an XOR clause (CryptoMiniSat style), and a line `w <lit> <weight>`
//! sets the weight of one polarity of a variable.
//!
//! ```text
//! c example
//! p cnf 3 2
//! 1 -2 0
//! x 2 3 0
//! w 1 0.25
//! w -1 0.75
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A 1-based variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    /// Panics on `0`; variables are 1-based.
    pub fn new(index: u32) -> Self {
        assert!(index >= 1, "variables are 1-based");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based position, for indexing dense tables.
    pub fn pos(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_pos(pos: usize) -> Self {
        Var(pos as u32 + 1)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    var: Var,
    positive: bool,
}

impl Lit {
    pub fn new(var: Var, positive: bool) -> Self {
        Lit { var, positive }
    }

    pub fn pos(var: Var) -> Self {
        Lit::new(var, true)
    }

    pub fn neg(var: Var) -> Self {
        Lit::new(var, false)
    }

    /// Builds a literal from a nonzero DIMACS integer.
    pub fn from_dimacs(value: i64) -> Self {
        assert!(value != 0, "DIMACS literal must be nonzero");
        Lit::new(Var::new(value.unsigned_abs() as u32), value > 0)
    }

    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var.0);
        if self.positive {
            v
        } else {
            -v
        }
    }

    pub fn var(self) -> Var {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// Truth value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value == self.positive
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit::new(self.var, !self.positive)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseKind {
    Disjunction,
    Xor,
}

/// A disjunction or XOR of literals over pairwise distinct variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    kind: ClauseKind,
    lits: Vec<Lit>,
}

impl Clause {
    /// Fails if `lits` is empty or mentions a variable twice.
    pub fn new(kind: ClauseKind, lits: Vec<Lit>) -> Result<Self, ClauseError> {
        if lits.is_empty() {
            return Err(ClauseError::Empty);
        }
        for (i, a) in lits.iter().enumerate() {
            if lits[..i].iter().any(|b| b.var() == a.var()) {
                return Err(ClauseError::RepeatedVariable(a.var()));
            }
        }
        Ok(Clause { kind, lits })
    }

    pub fn disjunction(lits: Vec<Lit>) -> Result<Self, ClauseError> {
        Clause::new(ClauseKind::Disjunction, lits)
    }

    pub fn xor(lits: Vec<Lit>) -> Result<Self, ClauseError> {
        Clause::new(ClauseKind::Xor, lits)
    }

    pub fn kind(&self) -> ClauseKind {
        self.kind
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.lits.iter().map(|l| l.var())
    }

    /// Disjunction: some literal holds. Xor: an odd number of literals hold.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, UnboundVariable> {
        let mut satisfied = 0usize;
        for lit in &self.lits {
            let value = assignment
                .get(lit.var())
                .ok_or(UnboundVariable(lit.var()))?;
            if lit.eval(value) {
                satisfied += 1;
            }
        }
        Ok(match self.kind {
            ClauseKind::Disjunction => satisfied > 0,
            ClauseKind::Xor => satisfied % 2 == 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClauseError {
    #[error("empty clause")]
    Empty,
    #[error("variable {0} occurs more than once in a clause")]
    RepeatedVariable(Var),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("variable {0} is not bound by the assignment")]
pub struct UnboundVariable(pub Var);

/// A conjunction of clauses over variables `1..=var_count`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Formula {
    var_count: u32,
    clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(var_count: u32) -> Self {
        Formula {
            var_count,
            clauses: Vec::new(),
        }
    }

    pub fn with_clauses(var_count: u32, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        let mut formula = Formula::new(var_count);
        for clause in clauses {
            formula.push(clause)?;
        }
        Ok(formula)
    }

    pub fn push(&mut self, clause: Clause) -> Result<(), FormulaError> {
        if let Some(v) = clause.vars().find(|v| v.index() > self.var_count) {
            return Err(FormulaError::VariableOutOfRange {
                var: v,
                var_count: self.var_count,
            });
        }
        self.clauses.push(clause);
        Ok(())
    }

    pub fn var_count(&self) -> u32 {
        self.var_count
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (1..=self.var_count).map(Var)
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// True iff every clause holds. Empty formulas are constant true.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, UnboundVariable> {
        for clause in &self.clauses {
            if !clause.evaluate(assignment)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("variable {var} exceeds the declared variable count {var_count}")]
    VariableOutOfRange { var: Var, var_count: u32 },
}

/// Per-variable weights `(w_neg, w_pos)` for assigning a variable 0 and 1.
/// Unlisted variables weigh `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    weights: Vec<(f64, f64)>,
}

impl WeightFunction {
    pub fn uniform(var_count: u32) -> Self {
        WeightFunction {
            weights: vec![(1.0, 1.0); var_count as usize],
        }
    }

    pub fn var_count(&self) -> u32 {
        self.weights.len() as u32
    }

    /// Returns `(w_neg, w_pos)`.
    pub fn get(&self, var: Var) -> (f64, f64) {
        self.weights.get(var.pos()).copied().unwrap_or((1.0, 1.0))
    }

    pub fn weight(&self, lit: Lit) -> f64 {
        let (neg, pos) = self.get(lit.var());
        if lit.is_positive() {
            pos
        } else {
            neg
        }
    }

    pub fn set(&mut self, var: Var, w_neg: f64, w_pos: f64) -> Result<(), WeightError> {
        check_weight(w_neg)?;
        check_weight(w_pos)?;
        if var.pos() >= self.weights.len() {
            self.weights.resize(var.pos() + 1, (1.0, 1.0));
        }
        self.weights[var.pos()] = (w_neg, w_pos);
        Ok(())
    }

    pub fn set_lit(&mut self, lit: Lit, weight: f64) -> Result<(), WeightError> {
        let (neg, pos) = self.get(lit.var());
        if lit.is_positive() {
            self.set(lit.var(), neg, weight)
        } else {
            self.set(lit.var(), weight, pos)
        }
    }

    /// Product of `W_x(τ(x))` over the variables of this weight function.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<f64, UnboundVariable> {
        let mut product = 1.0;
        for (pos, &(neg, pos_w)) in self.weights.iter().enumerate() {
            let var = Var::from_pos(pos);
            let value = assignment.get(var).ok_or(UnboundVariable(var))?;
            product *= if value { pos_w } else { neg };
        }
        Ok(product)
    }
}

fn check_weight(w: f64) -> Result<(), WeightError> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(WeightError(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("weight {0} is not a finite nonnegative number")]
pub struct WeightError(pub f64);

/// A partial map from variables to truth values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    /// The total assignment over `1..=var_count` whose bit `i` is the value
    /// of variable `i + 1`.
    pub fn from_bits(var_count: u32, bits: u64) -> Self {
        Assignment {
            values: (0..var_count).map(|i| Some(bits >> i & 1 == 1)).collect(),
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, bool)>) -> Self {
        let mut a = Assignment::new();
        for (var, value) in pairs {
            a.set(var, value);
        }
        a
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.values.get(var.pos()).copied().flatten()
    }

    pub fn set(&mut self, var: Var, value: bool) {
        if var.pos() >= self.values.len() {
            self.values.resize(var.pos() + 1, None);
        }
        self.values[var.pos()] = Some(value);
    }

    pub fn unset(&mut self, var: Var) {
        if let Some(slot) = self.values.get_mut(var.pos()) {
            *slot = None;
        }
    }

    pub fn len(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (Var::from_pos(i), b)))
    }

    /// True iff exactly the variables `1..=var_count` are bound.
    pub fn is_total_for(&self, var_count: u32) -> bool {
        self.iter().all(|(v, _)| v.index() <= var_count)
            && (1..=var_count).all(|i| self.get(Var(i)).is_some())
    }

    /// Packs the values of `1..=var_count` into bits (unbound reads as 0).
    pub fn to_bits(&self, var_count: u32) -> u64 {
        (0..var_count).fold(0u64, |acc, i| {
            acc | (u64::from(self.get(Var(i + 1)).unwrap_or(false)) << i)
        })
    }

    /// DIMACS-style literal list in variable order.
    pub fn to_lits(&self) -> Vec<Lit> {
        self.iter().map(|(v, b)| Lit::new(v, b)).collect()
    }
}

/// An error while reading the text format, tagged with a 1-based line number.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("duplicate header")]
    DuplicateHeader,
    #[error("non-numeric token `{0}`")]
    NonNumeric(String),
    #[error("literal {lit} out of range for {var_count} variables")]
    LiteralOutOfRange { lit: i64, var_count: u32 },
    #[error("variable {0} occurs more than once in a clause")]
    DuplicateVariable(Var),
    #[error("clause is not terminated by 0")]
    UnterminatedClause,
    #[error("empty clause")]
    EmptyClause,
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("weight {0} is not finite")]
    NonFiniteWeight(f64),
    #[error("malformed weight line")]
    MalformedWeight,
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
}

/// A formula together with its literal weights, as read from one file.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub formula: Formula,
    pub weights: WeightFunction,
}

impl Instance {
    pub fn new(formula: Formula, weights: WeightFunction) -> Self {
        Instance { formula, weights }
    }

    pub fn var_count(&self) -> u32 {
        self.formula.var_count()
    }

    /// `⟦φ⟧(τ) · W(τ)` for a total assignment, as a direct product.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<f64, UnboundVariable> {
        if !self.formula.evaluate(assignment)? {
            return Ok(0.0);
        }
        let mut product = 1.0;
        for var in self.formula.vars() {
            let value = assignment.get(var).ok_or(UnboundVariable(var))?;
            product *= self.weights.weight(Lit::new(var, value));
        }
        Ok(product)
    }
}

impl FromStr for Instance {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn parse_int(line: usize, token: &str) -> Result<i64, ParseError> {
    token
        .parse::<i64>()
        .map_err(|_| err(line, ParseErrorKind::NonNumeric(token.to_string())))
}

/// Parses the text format into a formula and its weight function.
pub fn parse(text: &str) -> Result<Instance, ParseError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut weights = WeightFunction::uniform(0);

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line == "c" || line.starts_with("c ") || line.starts_with("c\t") {
            continue;
        }

        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(err(line_no, ParseErrorKind::DuplicateHeader));
            }
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            let malformed = || err(line_no, ParseErrorKind::MalformedHeader(line.to_string()));
            if tokens.len() != 3 || tokens[0] != "cnf" {
                return Err(malformed());
            }
            let vars = tokens[1].parse::<u32>().map_err(|_| malformed())?;
            let count = tokens[2].parse::<usize>().map_err(|_| malformed())?;
            header = Some((vars, count));
            weights = WeightFunction::uniform(vars);
            continue;
        }

        let (var_count, _) = header.ok_or_else(|| err(line_no, ParseErrorKind::MissingHeader))?;

        if let Some(rest) = line.strip_prefix('w') {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            if tokens.len() < 2 {
                return Err(err(line_no, ParseErrorKind::MalformedWeight));
            }
            let lit = parse_int(line_no, tokens[0])?;
            check_lit(line_no, lit, var_count)?;
            let weight = tokens[1]
                .parse::<f64>()
                .map_err(|_| err(line_no, ParseErrorKind::NonNumeric(tokens[1].to_string())))?;
            if !weight.is_finite() {
                return Err(err(line_no, ParseErrorKind::NonFiniteWeight(weight)));
            }
            if weight < 0.0 {
                return Err(err(line_no, ParseErrorKind::NegativeWeight(weight)));
            }
            // An optional trailing `0` terminator is tolerated.
            if tokens.len() > 3 || (tokens.len() == 3 && tokens[2] != "0") {
                return Err(err(line_no, ParseErrorKind::MalformedWeight));
            }
            weights
                .set_lit(Lit::from_dimacs(lit), weight)
                .expect("weight already validated");
            continue;
        }

        let (kind, body) = match line.strip_prefix('x') {
            Some(rest) => (ClauseKind::Xor, rest),
            None => (ClauseKind::Disjunction, line),
        };
        let mut lits = Vec::new();
        let mut terminated = false;
        for token in body.split_whitespace() {
            if terminated {
                // Tokens after the terminating 0.
                return Err(err(line_no, ParseErrorKind::UnterminatedClause));
            }
            let value = parse_int(line_no, token)?;
            if value == 0 {
                terminated = true;
                continue;
            }
            check_lit(line_no, value, var_count)?;
            lits.push(Lit::from_dimacs(value));
        }
        if !terminated {
            return Err(err(line_no, ParseErrorKind::UnterminatedClause));
        }
        let clause = Clause::new(kind, lits).map_err(|e| match e {
            ClauseError::Empty => err(line_no, ParseErrorKind::EmptyClause),
            ClauseError::RepeatedVariable(v) => err(line_no, ParseErrorKind::DuplicateVariable(v)),
        })?;
        clauses.push(clause);
    }

    let total_lines = text.lines().count().max(1);
    let (var_count, declared) =
        header.ok_or_else(|| err(total_lines, ParseErrorKind::MissingHeader))?;
    if declared != clauses.len() {
        return Err(err(
            total_lines,
            ParseErrorKind::ClauseCountMismatch {
                declared,
                found: clauses.len(),
            },
        ));
    }
    let formula = Formula { var_count, clauses };
    Ok(Instance::new(formula, weights))
}

fn check_lit(line: usize, lit: i64, var_count: u32) -> Result<(), ParseError> {
    if lit == 0 || lit.unsigned_abs() > u64::from(var_count) {
        return Err(err(
            line,
            ParseErrorKind::LiteralOutOfRange { lit, var_count },
        ));
    }
    Ok(())
}

/// Prints an instance in the text format: header, clauses in order, then
/// every weight that differs from 1, sorted by variable with the negative
/// literal first.
pub fn print(instance: &Instance) -> String {
    use std::fmt::Write;

    let formula = &instance.formula;
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", formula.var_count, formula.clauses.len()).unwrap();
    for clause in &formula.clauses {
        if clause.kind == ClauseKind::Xor {
            out.push_str("x ");
        }
        for lit in &clause.lits {
            write!(out, "{lit} ").unwrap();
        }
        out.push_str("0\n");
    }
    for var in formula.vars() {
        let (neg, pos) = instance.weights.get(var);
        if neg != 1.0 {
            writeln!(out, "w -{} {}", var.index(), neg).unwrap();
        }
        if pos != 1.0 {
            writeln!(out, "w {} {}", var.index(), pos).unwrap();
        }
    }
    out
}
