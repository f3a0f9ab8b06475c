//! Exhaustive enumeration of every total assignment. Slow and simple; the
//! reference for everything else.

use thiserror::Error;

use crate::formula::{Assignment, Instance, Var};

pub const ORACLE_LIMIT: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("oracle limit exceeded: {vars} variables, limit {ORACLE_LIMIT}")]
pub struct OracleLimit {
    pub vars: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub var_count: u32,
    pub maximum: f64,
    /// Every maximizer, packed as in [`Assignment::to_bits`], ascending.
    pub maximizers: Vec<u64>,
    pub wmc: f64,
}

impl OracleResult {
    /// True iff `tau` binds exactly `1..=n` and attains the maximum.
    pub fn is_maximizer(&self, tau: &Assignment) -> bool {
        tau.is_total_for(self.var_count)
            && self
                .maximizers
                .binary_search(&tau.to_bits(self.var_count))
                .is_ok()
    }

    pub fn maximizer_assignments(&self) -> impl Iterator<Item = Assignment> + '_ {
        self.maximizers
            .iter()
            .map(|&bits| Assignment::from_bits(self.var_count, bits))
    }
}

/// Evaluates `⟦φ⟧·W` by direct product at all `2^n` assignments.
pub fn brute_solve(instance: &Instance) -> Result<OracleResult, OracleLimit> {
    let n = instance.var_count();
    if n > ORACLE_LIMIT {
        return Err(OracleLimit { vars: n });
    }
    let mut tau = Assignment::from_bits(n, 0);
    let mut maximum = 0.0;
    let mut maximizers = Vec::new();
    let mut wmc = 0.0;
    for bits in 0..1u64 << n {
        for pos in 0..n as usize {
            tau.set(Var::from_pos(pos), bits >> pos & 1 == 1);
        }
        let value = instance.evaluate(&tau).expect("total assignment");
        wmc += value;
        if value > maximum {
            maximum = value;
            maximizers.clear();
        }
        if value == maximum {
            maximizers.push(bits);
        }
    }
    Ok(OracleResult {
        var_count: n,
        maximum,
        maximizers,
        wmc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, Formula, WeightFunction};
    use crate::planner::tests::FIG1;

    #[test]
    fn unit_clause() {
        let r = brute_solve(&parse("p cnf 1 1\n1 0\n").unwrap()).unwrap();
        assert_eq!(r.maximum, 1.0);
        assert_eq!(r.maximizers, vec![0b1]);
        assert_eq!(r.wmc, 1.0);
    }

    #[test]
    fn weighted_xor() {
        let i = parse("p cnf 2 1\nx 1 2 0\nw 1 100\nw -1 10\nw 2 10\nw -2 100\n").unwrap();
        let r = brute_solve(&i).unwrap();
        assert_eq!(r.maximum, 10000.0);
        assert_eq!(r.maximizers, vec![0b01]);
        assert_eq!(r.wmc, 10100.0);
        assert!(r.is_maximizer(&Assignment::from_pairs([
            (Var::new(1), true),
            (Var::new(2), false)
        ])));
        assert!(!r.is_maximizer(&Assignment::from_pairs([(Var::new(1), true)])));
    }

    #[test]
    fn fig1_models() {
        let i = parse(FIG1).unwrap();
        let r = brute_solve(&i).unwrap();
        assert_eq!(r.maximum, 1.0);
        // x1 = 1, x2 = x4, exactly one of x3 and x5, x6 free.
        assert_eq!(r.maximizers.len(), 2 * 2 * 2);
        assert_eq!(r.wmc, 8.0);
        for tau in r.maximizer_assignments() {
            assert!(i.formula.evaluate(&tau).unwrap());
        }
    }

    #[test]
    fn unsatisfiable_keeps_every_assignment() {
        let i = parse("p cnf 2 2\n1 0\n-1 0\n").unwrap();
        let r = brute_solve(&i).unwrap();
        assert_eq!(r.maximum, 0.0);
        assert_eq!(r.maximizers, vec![0, 1, 2, 3]);
        assert_eq!(r.wmc, 0.0);
    }

    #[test]
    fn no_variables() {
        let r = brute_solve(&Instance::new(Formula::new(0), WeightFunction::uniform(0))).unwrap();
        assert_eq!(
            (r.maximum, r.maximizers.as_slice(), r.wmc),
            (1.0, &[0][..], 1.0)
        );
    }

    #[test]
    fn limit() {
        let i = Instance::new(Formula::new(21), WeightFunction::uniform(21));
        assert_eq!(brute_solve(&i), Err(OracleLimit { vars: 21 }));
    }
}
