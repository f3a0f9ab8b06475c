//! Export to weighted partial MaxSAT in the old `p wcnf` format.
//!
//! Clauses of the formula become hard clauses, XOR clauses via a Tseitin
//! chain over fresh variables numbered after the originals. Each literal
//! `l` of weight `w > 0` becomes a soft unit `l` of weight `round(K · ln w)`;
//! a literal of weight 0 becomes the hard unit `¬l`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::diagram::ValueMode;
use crate::executor::{ExecError, Executor};
use crate::formula::{ClauseKind, Instance, Lit, Var};
use crate::planner::{heuristic_order, plan, Heuristic};

pub const DEFAULT_SCALE: f64 = 10_000.0;

#[derive(Debug, Error)]
pub enum WcnfError {
    #[error("scale must be a positive finite number, got {0}")]
    BadScale(f64),
    #[error("no assignment has nonzero weight; refusing to export")]
    NoPositiveModel,
    #[error("soft weights overflow: {0}")]
    Overflow(String),
    #[error(transparent)]
    Solver(#[from] ExecError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wcnf {
    /// Originals first, then Tseitin auxiliaries.
    pub var_count: u32,
    pub original_vars: u32,
    pub top: u64,
    pub hard: Vec<Vec<Lit>>,
    pub soft: Vec<(u64, Lit)>,
    pub stats: WcnfStats,
}

/// Sizes before Tseitin expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WcnfStats {
    pub vars: u32,
    pub hard_clauses: usize,
    pub soft_clauses: usize,
    /// Hard units added for zero-weight literals.
    pub zero_weight_units: usize,
}

impl Wcnf {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = self.stats;
        let _ = writeln!(
            out,
            "c original: {} variables, {} hard clauses, {} soft clauses",
            s.vars, s.hard_clauses, s.soft_clauses
        );
        let _ = writeln!(
            out,
            "p wcnf {} {} {}",
            self.var_count,
            self.hard.len() + self.soft.len(),
            self.top
        );
        for clause in &self.hard {
            let _ = write!(out, "{}", self.top);
            for lit in clause {
                let _ = write!(out, " {lit}");
            }
            out.push_str(" 0\n");
        }
        for (w, lit) in &self.soft {
            let _ = writeln!(out, "{w} {lit} 0");
        }
        out
    }

    /// True iff every hard clause holds under `value`.
    pub fn hard_satisfied(&self, value: impl Fn(Var) -> bool) -> bool {
        self.hard
            .iter()
            .all(|c| c.iter().any(|l| l.eval(value(l.var()))))
    }

    /// Sum of the weights of satisfied soft clauses.
    pub fn soft_sum(&self, value: impl Fn(Var) -> bool) -> u64 {
        self.soft
            .iter()
            .filter(|(_, l)| l.eval(value(l.var())))
            .map(|&(w, _)| w)
            .sum()
    }
}

/// Builds the export with scale `K`. Refuses instances whose maximum is 0,
/// checked with a log-mode solve.
pub fn export(instance: &Instance, scale: f64) -> Result<Wcnf, WcnfError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(WcnfError::BadScale(scale));
    }
    let order = heuristic_order(&instance.formula, Heuristic::MinFill);
    let tree = plan(&instance.formula, &order).expect("heuristic orders are permutations");
    if Executor::new(ValueMode::Log10)
        .solve(instance, &tree)?
        .no_positive_model()
    {
        return Err(WcnfError::NoPositiveModel);
    }

    let n = instance.var_count();
    let mut next = n;
    let mut fresh = || {
        next += 1;
        Var::new(next)
    };
    let mut hard = Vec::new();
    for clause in instance.formula.clauses() {
        match clause.kind() {
            ClauseKind::Disjunction => hard.push(clause.lits().to_vec()),
            ClauseKind::Xor => tseitin_xor(clause.lits(), &mut hard, &mut fresh),
        }
    }
    let var_count = next;

    let mut soft = Vec::new();
    let mut zero_weight_units = 0;
    for x in instance.formula.vars() {
        let (w0, w1) = instance.weights.get(x);
        let mut pair: Vec<(f64, Lit)> = Vec::with_capacity(2);
        for (w, lit) in [(w0, Lit::neg(x)), (w1, Lit::pos(x))] {
            if w == 0.0 {
                hard.push(vec![!lit]);
                zero_weight_units += 1;
            } else {
                pair.push(((scale * w.ln()).round(), lit));
            }
        }
        let low = pair.iter().map(|&(w, _)| w).fold(f64::INFINITY, f64::min);
        let shift = if low < 1.0 { 1.0 - low } else { 0.0 };
        for (w, lit) in pair {
            let w = w + shift;
            if w > 2f64.powi(53) {
                return Err(WcnfError::Overflow(format!("weight {w} for {lit}")));
            }
            soft.push((w as u64, lit));
        }
    }
    let total = soft
        .iter()
        .try_fold(0u64, |acc, &(w, _)| acc.checked_add(w))
        .ok_or_else(|| WcnfError::Overflow("sum of soft weights".into()))?;
    Ok(Wcnf {
        var_count,
        original_vars: n,
        top: total + 1,
        hard,
        stats: WcnfStats {
            vars: n,
            hard_clauses: instance.formula.clauses().len(),
            soft_clauses: soft.len(),
            zero_weight_units,
        },
        soft,
    })
}

/// Odd parity of `lits`. Two literals need two clauses; longer XORs chain
/// `a_i ↔ t ⊕ l_i` through fresh variables, four clauses per link.
fn tseitin_xor(lits: &[Lit], hard: &mut Vec<Vec<Lit>>, fresh: &mut impl FnMut() -> Var) {
    let (last, init) = lits.split_last().expect("clauses are nonempty");
    if init.is_empty() {
        hard.push(vec![*last]);
        return;
    }
    let mut t = init[0];
    for &l in &init[1..] {
        let a = Lit::pos(fresh());
        hard.push(vec![!a, t, l]);
        hard.push(vec![!a, !t, !l]);
        hard.push(vec![a, !t, l]);
        hard.push(vec![a, t, !l]);
        t = a;
    }
    hard.push(vec![t, *last]);
    hard.push(vec![!t, !*last]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, Assignment, Clause};

    fn brute_hard_models(w: &Wcnf) -> Vec<u64> {
        (0..1u64 << w.var_count)
            .filter(|bits| w.hard_satisfied(|x| bits >> x.pos() & 1 == 1))
            .collect()
    }

    #[test]
    fn unit_clause_weights() {
        let i = parse("p cnf 1 1\n1 0\nw 1 100\nw -1 10\n").unwrap();
        let w = export(&i, DEFAULT_SCALE).unwrap();
        assert_eq!(w.hard, vec![vec![Lit::pos(Var::new(1))]]);
        let k10 = (DEFAULT_SCALE * 10f64.ln()).round() as u64;
        let k100 = (DEFAULT_SCALE * 100f64.ln()).round() as u64;
        assert_eq!(
            w.soft,
            vec![(k10, Lit::neg(Var::new(1))), (k100, Lit::pos(Var::new(1)))]
        );
        assert_eq!(w.top, k10 + k100 + 1);
        assert_eq!(
            w.to_text(),
            format!(
                "c original: 1 variables, 1 hard clauses, 2 soft clauses\n\
                 p wcnf 1 3 {top}\n{top} 1 0\n{k10} -1 0\n{k100} 1 0\n",
                top = k10 + k100 + 1
            )
        );
    }

    #[test]
    fn equal_weights_give_equal_soft_weights() {
        let i = parse("p cnf 3 2\n1 2 0\nx 2 3 0\nw 1 5\nw -1 5\nw 2 5\nw -2 5\nw 3 5\nw -3 5\n")
            .unwrap();
        let w = export(&i, DEFAULT_SCALE).unwrap();
        assert!(w.soft.iter().all(|&(x, _)| x == w.soft[0].0));
        assert_eq!(w.stats.soft_clauses, 6);
        assert_eq!(w.stats.hard_clauses, 2);
    }

    #[test]
    fn small_weights_are_shifted() {
        let i = parse("p cnf 1 0\nw 1 0.5\nw -1 0.25\n").unwrap();
        let w = export(&i, DEFAULT_SCALE).unwrap();
        let lo = (DEFAULT_SCALE * 0.25f64.ln()).round();
        let hi = (DEFAULT_SCALE * 0.5f64.ln()).round();
        assert_eq!(
            w.soft,
            vec![
                (1, Lit::neg(Var::new(1))),
                ((hi - lo + 1.0) as u64, Lit::pos(Var::new(1)))
            ]
        );
    }

    #[test]
    fn zero_weight_becomes_hard_exclusion() {
        let i = parse("p cnf 2 1\n1 2 0\nw 1 0\n").unwrap();
        let w = export(&i, DEFAULT_SCALE).unwrap();
        assert!(w.hard.contains(&vec![Lit::neg(Var::new(1))]));
        assert_eq!(w.stats.zero_weight_units, 1);
        assert_eq!(w.stats.soft_clauses, 3);
    }

    #[test]
    fn refuses_zero_maximum() {
        let i = parse("p cnf 1 2\n1 0\n-1 0\n").unwrap();
        assert!(matches!(
            export(&i, DEFAULT_SCALE),
            Err(WcnfError::NoPositiveModel)
        ));
        let i = parse("p cnf 1 0\nw 1 0\nw -1 0\n").unwrap();
        assert!(matches!(
            export(&i, DEFAULT_SCALE),
            Err(WcnfError::NoPositiveModel)
        ));
        assert!(matches!(
            export(&parse("p cnf 1 0\n").unwrap(), -1.0),
            Err(WcnfError::BadScale(_))
        ));
    }

    #[test]
    fn tseitin_preserves_xor_models() {
        for len in 1..=5u32 {
            for polarity in 0..1u32 << len {
                let lits: Vec<Lit> = (0..len)
                    .map(|i| Lit::new(Var::new(i + 1), polarity >> i & 1 == 1))
                    .collect();
                let clause = Clause::xor(lits).unwrap();
                let mut f = crate::formula::Formula::new(len);
                f.push(clause.clone()).unwrap();
                let inst = Instance::new(f, crate::formula::WeightFunction::uniform(len));
                let w = export(&inst, DEFAULT_SCALE).unwrap();
                assert_eq!(w.var_count, len + len.saturating_sub(2));
                let mut projected: Vec<u64> = brute_hard_models(&w)
                    .into_iter()
                    .map(|b| b & ((1 << len) - 1))
                    .collect();
                projected.sort_unstable();
                let before = projected.len();
                projected.dedup();
                // Auxiliaries are functionally determined.
                assert_eq!(before, projected.len());
                let expected: Vec<u64> = (0..1u64 << len)
                    .filter(|&b| clause.evaluate(&Assignment::from_bits(len, b)).unwrap())
                    .collect();
                assert_eq!(projected, expected);
            }
        }
    }
}
