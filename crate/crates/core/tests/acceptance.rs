//! The ten acceptance criteria, run in order in one test so the report
//! reads top to bottom. Each prints one PASS/FAIL line; the test fails if
//! any criterion does.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpe_core::benchgen::{gen_chain, gen_random, ChainSpec};
use mpe_core::diagram::ValueMode;
use mpe_core::executor::{count, solve, verify_checkpoints, Executor, Mutation, Verification};
use mpe_core::formula::{Assignment, Instance, Var};
use mpe_core::oracle::brute_solve;
use mpe_core::planner::{
    heuristic_order, plan, validate, EliminationOrder, Heuristic, NodeKind, ProjectJoinTree,
};
use mpe_core::wcnf::{export, DEFAULT_SCALE};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn min_fill_tree(i: &Instance) -> ProjectJoinTree {
    plan(&i.formula, &heuristic_order(&i.formula, Heuristic::MinFill)).unwrap()
}

/// Random XOR-CNF with `n ≤ max_n`, both clause kinds, and about one
/// literal weight in ten set to zero.
fn random_instance(rng: &mut ChaCha8Rng, max_n: u32) -> Instance {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(0..=2 * n as usize);
    let max_len = rng.gen_range(1..=n.min(4));
    let mut inst = gen_random(n, m, max_len, 0.5, rng.gen()).unwrap();
    for x in inst.formula.vars() {
        let (mut w0, mut w1) = inst.weights.get(x);
        if rng.gen_bool(0.1) {
            w0 = 0.0;
        }
        if rng.gen_bool(0.1) {
            w1 = 0.0;
        }
        inst.weights.set(x, w0, w1).unwrap();
    }
    inst
}

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let line = format!("[{tag}] {id:>2}. {name}: {detail}");
        println!("{line}");
        self.lines.push((pass, line));
    }
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);

    // 1-3 share one corpus.
    let start = Instant::now();
    let corpus: Vec<Instance> = (0..500).map(|_| random_instance(&mut rng, 14)).collect();
    let mut bad_max = Vec::new();
    let mut bad_maximizer = Vec::new();
    let mut bad_wmc = Vec::new();
    for (k, inst) in corpus.iter().enumerate() {
        let oracle = brute_solve(inst).unwrap();
        let tree = min_fill_tree(inst);
        let r = solve(inst, &tree).unwrap();
        if !rel_close(r.maximum, oracle.maximum, 1e-9) {
            bad_max.push(k);
        }
        let direct = inst.evaluate(&r.maximizer).unwrap();
        if !oracle.is_maximizer(&r.maximizer) || direct != r.maximum {
            bad_maximizer.push((k, direct, r.maximum));
        }
        if !rel_close(count(inst, &tree).unwrap(), oracle.wmc, 1e-9) {
            bad_wmc.push(k);
        }
    }
    let elapsed = start.elapsed();
    report.record(
        1,
        "oracle equivalence (maximum)",
        bad_max.is_empty() && elapsed.as_secs() < 120,
        format!(
            "{} of 500 mismatched, corpus time {elapsed:.2?}",
            bad_max.len()
        ),
    );
    report.record(
        2,
        "oracle equivalence (maximizer)",
        bad_maximizer.is_empty(),
        format!(
            "{} of 500 not in argmax or not exactly m{}",
            bad_maximizer.len(),
            bad_maximizer
                .first()
                .map(|(k, d, m)| format!(" (first: #{k}, product {d:e} vs m {m:e})"))
                .unwrap_or_default()
        ),
    );
    report.record(
        3,
        "WMC mode",
        bad_wmc.is_empty(),
        format!("{} of 500 mismatched", bad_wmc.len()),
    );

    // 4
    let mut bad = 0;
    for _ in 0..100 {
        let inst = random_instance(&mut rng, 14);
        let maxima: Vec<f64> = [
            Heuristic::MinFill,
            Heuristic::MinDegree,
            Heuristic::Lexicographic,
        ]
        .into_iter()
        .map(|h| {
            let t = plan(&inst.formula, &heuristic_order(&inst.formula, h)).unwrap();
            solve(&inst, &t).unwrap().maximum
        })
        .collect();
        if !maxima.iter().all(|&m| rel_close(m, maxima[0], 1e-9)) {
            bad += 1;
        }
    }
    report.record(
        4,
        "plan independence",
        bad == 0,
        format!("{bad} of 100 disagreed across min-fill, min-degree, lex"),
    );

    // 5
    let instances: Vec<Instance> = (0..100).map(|_| random_instance(&mut rng, 12)).collect();
    let mut failed = 0;
    let mut checks = 0;
    for inst in &instances {
        match verify_checkpoints(inst, &min_fill_tree(inst)).unwrap() {
            Verification::Pass { checks: c } => checks += c,
            Verification::Fail(_) => failed += 1,
        }
    }
    let mut caught = Vec::new();
    for mutation in [
        Mutation::SkipWeightJoin,
        Mutation::SwapPushProject,
        Mutation::WrongTieBreak,
    ] {
        let exec = Executor::new(ValueMode::Linear).with_mutation(mutation);
        let mut hits = 0;
        for inst in &instances {
            let tree = min_fill_tree(inst);
            let checkpoint = !exec.verify(inst, &tree).unwrap().passed();
            let oracle = brute_solve(inst).unwrap();
            // A solve that trips its own consistency check counts as caught.
            let oracle_test = exec.solve(inst, &tree).map_or(true, |r| {
                !rel_close(r.maximum, oracle.maximum, 1e-9) || !oracle.is_maximizer(&r.maximizer)
            });
            hits += usize::from(checkpoint || oracle_test);
        }
        caught.push((mutation, hits));
    }
    report.record(
        5,
        "checkpoint suite",
        failed == 0 && caught.iter().all(|&(_, h)| h > 0),
        format!(
            "{failed} of 100 failed ({checks} checks); mutations caught on {:?} of 100",
            caught
        ),
    );

    // 6
    let mut wrong = Vec::new();
    for n in [100, 200, 300] {
        for k in [10, 15, 20, 25, 30] {
            let inst = gen_chain(ChainSpec {
                n,
                k,
                seed: u64::from(n + k),
            })
            .unwrap();
            let tree = plan(&inst.formula, &EliminationOrder::identity(n)).unwrap();
            let width = tree.width(&inst.formula);
            if validate(&tree, &inst.formula).is_err() || width != k as usize {
                wrong.push((n, k, width));
            }
        }
    }
    report.record(
        6,
        "chain width",
        wrong.is_empty(),
        format!("15 (n, k) pairs, mismatches {wrong:?}"),
    );

    // 7
    let start = Instant::now();
    let inst = gen_chain(ChainSpec {
        n: 300,
        k: 20,
        seed: 1,
    })
    .unwrap();
    let tree = plan(&inst.formula, &EliminationOrder::identity(300)).unwrap();
    let r = Executor::new(ValueMode::Log10).solve(&inst, &tree).unwrap();
    let elapsed = start.elapsed();
    let peak_mib = peak_rss_kib().map(|k| k / 1024);
    let direct: f64 = inst
        .formula
        .vars()
        .map(|x| {
            inst.weights
                .weight(mpe_core::formula::Lit::new(x, r.maximizer.get(x).unwrap()))
                .log10()
        })
        .sum();
    let consistent =
        inst.formula.evaluate(&r.maximizer).unwrap() && (direct - r.maximum).abs() <= 1e-6;
    report.record(
        7,
        "chain n=300 k=20 log10",
        elapsed.as_secs() < 60 && peak_mib.is_some_and(|m| m < 2048) && consistent,
        format!(
            "{elapsed:.2?}, peak RSS {} MiB, log10 max {:.4}, maximizer consistent {consistent}, peak nodes {}",
            peak_mib.map_or("unknown".into(), |m| m.to_string()),
            r.maximum,
            r.stats.peak_nodes
        ),
    );

    // 8
    let mut worst = 0f64;
    let mut bad = 0;
    for k in 0..100 {
        let inst = if k % 2 == 0 {
            random_instance(&mut rng, 14)
        } else {
            let n = rng.gen_range(10..=60);
            let k = rng.gen_range(1..=6.min(n));
            gen_chain(ChainSpec {
                n,
                k,
                seed: rng.gen(),
            })
            .unwrap()
        };
        let tree = min_fill_tree(&inst);
        let lin = solve(&inst, &tree).unwrap().maximum;
        let log = Executor::new(ValueMode::Log10)
            .solve(&inst, &tree)
            .unwrap()
            .maximum;
        let diff = if lin == 0.0 && log == f64::NEG_INFINITY {
            0.0
        } else {
            (lin.log10() - log).abs()
        };
        worst = worst.max(diff);
        bad += usize::from(diff.is_nan() || diff > 1e-6);
    }
    report.record(
        8,
        "log-mode consistency",
        bad == 0,
        format!("{bad} of 100 off by more than 1e-6, worst {worst:e}"),
    );

    // 9
    let mut bad = Vec::new();
    let mut done = 0;
    let mut seed = 0u64;
    while done < 50 {
        seed += 1;
        let Some(inst) = wcnf_instance(seed) else {
            continue;
        };
        done += 1;
        let n = inst.var_count();
        let w = export(&inst, DEFAULT_SCALE).unwrap();
        let counts_ok = w.stats.vars == n
            && w.stats.hard_clauses == inst.formula.clauses().len()
            && w.stats.soft_clauses == 2 * n as usize;
        let mut best: Option<(u64, u64)> = None;
        for bits in 0..1u64 << w.var_count {
            let value = |x: Var| bits >> x.pos() & 1 == 1;
            if w.hard_satisfied(value) {
                let s = w.soft_sum(value);
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, bits & ((1 << n) - 1)));
                }
            }
        }
        let r = solve(&inst, &min_fill_tree(&inst)).unwrap();
        let agrees = best.map(|(_, b)| b) == Some(r.maximizer.to_bits(n));
        if !(counts_ok && agrees) {
            bad.push(seed);
        }
    }
    report.record(
        9,
        "WCNF export equivalence",
        bad.is_empty(),
        format!("{} of 50 disagreed {bad:?}", bad.len()),
    );

    // 10
    let mut invalid = 0;
    let mut accepted = [0usize; 3];
    let mut tried = [0usize; 3];
    for _ in 0..1000 {
        let inst = random_instance(&mut rng, 14);
        let phi = &inst.formula;
        let mut order: Vec<Var> = phi.vars().collect();
        order.shuffle(&mut rng);
        let tree = plan(phi, &EliminationOrder::new(order)).unwrap();
        if validate(&tree, phi).is_err() {
            invalid += 1;
            continue;
        }
        for (class, mutant) in mutants(&tree, &mut rng).into_iter().enumerate() {
            if let Some(mutant) = mutant {
                tried[class] += 1;
                accepted[class] += usize::from(validate(&mutant, phi).is_ok());
            }
        }
    }
    report.record(
        10,
        "planner validity",
        invalid == 0 && accepted == [0; 3] && tried.iter().all(|&t| t > 0),
        format!(
            "{invalid} of 1000 plans invalid; mutants tried {tried:?}, wrongly accepted {accepted:?}"
        ),
    );

    let failed: Vec<&String> = report
        .lines
        .iter()
        .filter(|(pass, _)| !pass)
        .map(|(_, l)| l)
        .collect();
    assert!(failed.is_empty(), "failing criteria:\n{failed:#?}");
}

/// An instance with `n ≤ 10`, XORs of length at most 3, positive jittered
/// weights, a nonzero maximum, and every pair of model log-weights further
/// apart than rounding can bridge (`n / K`, which also exceeds `2 / K`).
fn wcnf_instance(seed: u64) -> Option<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=10);
    let m = rng.gen_range(0..=n as usize);
    let mut inst = gen_random(n, m, n.min(3), 0.5, rng.gen()).unwrap();
    for x in inst.formula.vars() {
        let jitter = |rng: &mut ChaCha8Rng| (rng.gen_range(-3.0..0.5f64)).exp();
        let (w0, w1) = (jitter(&mut rng), jitter(&mut rng));
        inst.weights.set(x, w0, w1).unwrap();
    }
    let mut sums: Vec<f64> = (0..1u64 << n)
        .map(|bits| inst.evaluate(&Assignment::from_bits(n, bits)).unwrap())
        .filter(|&v| v > 0.0)
        .map(f64::ln)
        .collect();
    if sums.is_empty() {
        return None;
    }
    sums.sort_by(f64::total_cmp);
    let gap = f64::from(n.max(2)) / DEFAULT_SCALE;
    sums.windows(2).all(|w| w[1] - w[0] > gap).then_some(inst)
}

/// One mutant per class, when the tree admits it: drop a π variable,
/// duplicate a π variable on another node, reparent a leaf to the root.
fn mutants(tree: &ProjectJoinTree, rng: &mut ChaCha8Rng) -> [Option<ProjectJoinTree>; 3] {
    let internal: Vec<usize> = (0..tree.len())
        .filter(|&ix| !tree.node(ix).pi().is_empty())
        .collect();

    let drop = internal.choose(rng).map(|&ix| {
        let mut t = tree.clone();
        if let NodeKind::Internal { pi } = &mut t.node_mut(ix).kind {
            pi.remove(0);
        }
        t
    });

    let duplicate = internal.choose(rng).and_then(|&from| {
        let x = tree.node(from).pi()[0];
        let to = (0..tree.len()).find(|&ix| ix != from && !tree.node(ix).is_leaf())?;
        let mut t = tree.clone();
        if let NodeKind::Internal { pi } = &mut t.node_mut(to).kind {
            pi.push(x);
        }
        Some(t)
    });

    let root = tree.root();
    let leaves: Vec<(usize, usize)> = (0..tree.len())
        .flat_map(|p| tree.node(p).children.iter().map(move |&c| (p, c)))
        .filter(|&(p, c)| p != root && tree.node(c).is_leaf())
        .collect();
    let reparent = leaves.choose(rng).map(|&(parent, leaf)| {
        let mut t = tree.clone();
        t.node_mut(parent).children.retain(|&c| c != leaf);
        t.node_mut(root).children.push(leaf);
        t
    });

    [drop, duplicate, reparent]
}

/// Peak resident set size of this process, from `/proc/self/status`.
fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))?
        .trim()
        .trim_end_matches("kB")
        .trim()
        .parse()
        .ok()
}
