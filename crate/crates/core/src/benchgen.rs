//! Random instance generators.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, so a `(parameters, seed)` pair names one instance on
//! every platform.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagram::ValueMode;
use crate::executor::{ExecError, Executor};
use crate::formula::{Clause, Formula, Instance, Lit, Var, WeightFunction};
use crate::planner::{heuristic_order, plan, Heuristic};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("chain needs 1 <= k <= n, got n = {n}, k = {k}")]
    Chain { n: u32, k: u32 },
    #[error("invalid random parameters: {0}")]
    Random(String),
    #[error("no satisfiable instance in {tries} seeds starting at {seed}")]
    NoSatisfiable { seed: u64, tries: u32 },
    #[error("solver failed while screening: {0}")]
    Solver(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSpec {
    pub n: u32,
    pub k: u32,
    pub seed: u64,
}

impl ChainSpec {
    /// `chain_n<n>_k<k>_s<seed>.xcnf`
    pub fn file_name(&self) -> String {
        format!("chain_n{}_k{}_s{}.xcnf", self.n, self.k, self.seed)
    }
}

/// `n - k + 1` clauses, clause `i` over `x_i … x_{i+k-1}`. Each clause is
/// XOR or disjunction with probability 1/2 and each literal's polarity is
/// uniform. Each variable weighs `(10, 100)` or `(100, 10)` with
/// probability 1/2.
pub fn gen_chain(spec: ChainSpec) -> Result<Instance, GenError> {
    let ChainSpec { n, k, seed } = spec;
    if k < 1 || k > n {
        return Err(GenError::Chain { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut formula = Formula::new(n);
    for i in 1..=n - k + 1 {
        let xor = rng.gen_bool(0.5);
        let lits = (i..i + k)
            .map(|j| Lit::new(Var::new(j), rng.gen_bool(0.5)))
            .collect();
        formula
            .push(make_clause(xor, lits))
            .expect("chain variables are in range");
    }
    let mut weights = WeightFunction::uniform(n);
    for x in formula.vars() {
        let (w0, w1) = if rng.gen_bool(0.5) {
            (10.0, 100.0)
        } else {
            (100.0, 10.0)
        };
        weights.set(x, w0, w1).expect("positive weights");
    }
    Ok(Instance::new(formula, weights))
}

/// `m` clauses over distinct uniformly chosen variables, lengths uniform
/// in `1..=max_len`, XOR with probability `xor_prob`. Weights are uniform
/// in `[0, 1]` rounded to three decimals.
pub fn gen_random(
    n: u32,
    m: usize,
    max_len: u32,
    xor_prob: f64,
    seed: u64,
) -> Result<Instance, GenError> {
    if !(0.0..=1.0).contains(&xor_prob) {
        return Err(GenError::Random(format!(
            "xor_prob {xor_prob} outside [0, 1]"
        )));
    }
    if m > 0 && !(1..=n).contains(&max_len) {
        return Err(GenError::Random(format!(
            "max_len {max_len} outside 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut formula = Formula::new(n);
    for _ in 0..m {
        let len = rng.gen_range(1..=max_len) as usize;
        let mut vars = sample(&mut rng, n as usize, len).into_vec();
        vars.sort_unstable();
        let lits = vars
            .into_iter()
            .map(|pos| Lit::new(Var::from_pos(pos), rng.gen_bool(0.5)))
            .collect();
        let xor = rng.gen_bool(xor_prob);
        formula
            .push(make_clause(xor, lits))
            .expect("sampled variables are in range");
    }
    let mut weights = WeightFunction::uniform(n);
    for x in formula.vars() {
        let w0 = round3(rng.gen());
        let w1 = round3(rng.gen());
        weights.set(x, w0, w1).expect("weights in [0, 1]");
    }
    Ok(Instance::new(formula, weights))
}

/// Tries `seed, seed + 1, …` until `generate` yields an instance whose
/// maximum is nonzero.
pub fn first_satisfiable(
    seed: u64,
    tries: u32,
    mut generate: impl FnMut(u64) -> Result<Instance, GenError>,
) -> Result<(u64, Instance), GenError> {
    for s in (0..u64::from(tries)).map(|t| seed.wrapping_add(t)) {
        let instance = generate(s)?;
        let order = heuristic_order(&instance.formula, Heuristic::MinFill);
        let tree = plan(&instance.formula, &order).expect("heuristic orders are permutations");
        let result = Executor::new(ValueMode::Log10)
            .solve(&instance, &tree)
            .map_err(|e: ExecError| GenError::Solver(e.to_string()))?;
        if !result.no_positive_model() {
            return Ok((s, instance));
        }
    }
    Err(GenError::NoSatisfiable { seed, tries })
}

fn make_clause(xor: bool, lits: Vec<Lit>) -> Clause {
    if xor {
        Clause::xor(lits).expect("distinct variables")
    } else {
        Clause::disjunction(lits).expect("distinct variables")
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, print, ClauseKind};
    use crate::planner::{validate, EliminationOrder};

    #[test]
    fn chain_shape() {
        let inst = gen_chain(ChainSpec {
            n: 100,
            k: 10,
            seed: 1,
        })
        .unwrap();
        let clauses = inst.formula.clauses();
        assert_eq!(clauses.len(), 91);
        for (i, c) in clauses.iter().enumerate() {
            let vars: Vec<u32> = c.vars().map(Var::index).collect();
            assert_eq!(vars, (i as u32 + 1..i as u32 + 11).collect::<Vec<_>>());
        }
        for x in inst.formula.vars() {
            let (w0, w1) = inst.weights.get(x);
            assert!((w0, w1) == (10.0, 100.0) || (w0, w1) == (100.0, 10.0));
        }
    }

    #[test]
    fn chain_boundary() {
        let inst = gen_chain(ChainSpec {
            n: 7,
            k: 7,
            seed: 3,
        })
        .unwrap();
        assert_eq!(inst.formula.clauses().len(), 1);
        assert_eq!(inst.formula.clauses()[0].lits().len(), 7);
        assert!(gen_chain(ChainSpec {
            n: 3,
            k: 4,
            seed: 0
        })
        .is_err());
        assert!(gen_chain(ChainSpec {
            n: 3,
            k: 0,
            seed: 0
        })
        .is_err());
    }

    #[test]
    fn chain_is_deterministic() {
        let spec = ChainSpec {
            n: 50,
            k: 5,
            seed: 42,
        };
        assert_eq!(gen_chain(spec).unwrap(), gen_chain(spec).unwrap());
        assert_ne!(
            gen_chain(spec).unwrap(),
            gen_chain(ChainSpec { seed: 43, ..spec }).unwrap()
        );
    }

    #[test]
    fn chain_round_trips_and_plans_with_width_k() {
        for (n, k, seed) in [(20, 3, 0), (40, 7, 1), (30, 30, 2)] {
            let inst = gen_chain(ChainSpec { n, k, seed }).unwrap();
            assert_eq!(parse(&print(&inst)).unwrap(), inst);
            let tree = plan(&inst.formula, &EliminationOrder::identity(n)).unwrap();
            assert_eq!(validate(&tree, &inst.formula), Ok(()));
            assert_eq!(tree.width(&inst.formula), k as usize);
        }
    }

    #[test]
    fn chain_xor_fraction() {
        let mut xor = 0;
        let mut total = 0;
        for seed in 0..100 {
            let inst = gen_chain(ChainSpec { n: 19, k: 10, seed }).unwrap();
            for c in inst.formula.clauses() {
                total += 1;
                xor += usize::from(c.kind() == ClauseKind::Xor);
            }
        }
        assert_eq!(total, 1000);
        let frac = xor as f64 / total as f64;
        assert!((0.4..=0.6).contains(&frac), "{frac}");
    }

    #[test]
    fn chain_file_name() {
        let spec = ChainSpec {
            n: 300,
            k: 20,
            seed: 7,
        };
        assert_eq!(spec.file_name(), "chain_n300_k20_s7.xcnf");
    }

    #[test]
    fn random_edge_cases() {
        let inst = gen_random(5, 0, 3, 0.5, 1).unwrap();
        assert!(inst.formula.clauses().is_empty());
        let inst = gen_random(6, 40, 4, 0.0, 2).unwrap();
        assert!(inst
            .formula
            .clauses()
            .iter()
            .all(|c| c.kind() == ClauseKind::Disjunction && c.lits().len() <= 4));
        assert!(gen_random(3, 1, 4, 0.5, 0).is_err());
        assert!(gen_random(3, 1, 0, 0.5, 0).is_err());
        assert!(gen_random(3, 1, 2, 1.5, 0).is_err());
    }

    #[test]
    fn random_weights_are_rounded() {
        let inst = gen_random(30, 10, 3, 0.5, 9).unwrap();
        for x in inst.formula.vars() {
            let (a, b) = inst.weights.get(x);
            for w in [a, b] {
                assert!((0.0..=1.0).contains(&w));
                assert_eq!(round3(w), w);
            }
        }
    }

    #[test]
    fn random_golden() {
        let inst = gen_random(4, 3, 2, 0.5, 20240601).unwrap();
        let golden = include_str!("../tests/golden/random_n4_m3_l2_s20240601.xcnf");
        assert_eq!(print(&inst), golden);
    }

    #[test]
    fn satisfiable_screening() {
        let (seed, inst) = first_satisfiable(0, 50, |s| gen_random(3, 6, 1, 0.0, s)).unwrap();
        assert_eq!(inst, gen_random(3, 6, 1, 0.0, seed).unwrap());
        let err = first_satisfiable(5, 3, |_| {
            parse("p cnf 1 2\n1 0\n-1 0\n").map_err(|e| GenError::Random(e.to_string()))
        });
        assert_eq!(
            err.unwrap_err(),
            GenError::NoSatisfiable { seed: 5, tries: 3 }
        );
    }
}
