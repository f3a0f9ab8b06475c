//! `mpe`: solve, plan, generate, enumerate, and export XOR-CNF MPE instances.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mpe_core::benchgen::{self, ChainSpec, GenError};
use mpe_core::diagram::{Manager, ValueMode};
use mpe_core::executor::{ExecError, Executor, Verification, MONOLITHIC_LIMIT};
use mpe_core::formula::{self, Assignment, Instance};
use mpe_core::oracle::brute_solve;
use mpe_core::planner::{heuristic_order, plan, Heuristic, ProjectJoinTree};
use mpe_core::wcnf::{self, WcnfError};

#[derive(Debug, Parser)]
#[command(
    name = "mpe",
    version,
    about = "Exact Boolean MPE for XOR-CNF formulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the maximum and a maximizer.
    Solve(SolveArgs),
    /// Build a project-join tree and report its width.
    Plan(PlanArgs),
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve by enumerating every assignment (at most 20 variables).
    Oracle(OracleArgs),
    /// Write a weighted partial MaxSAT encoding.
    ExportWcnf(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HeuristicArg {
    MinDegree,
    MinFill,
    Lex,
}

impl From<HeuristicArg> for Heuristic {
    fn from(h: HeuristicArg) -> Self {
        match h {
            HeuristicArg::MinDegree => Heuristic::MinDegree,
            HeuristicArg::MinFill => Heuristic::MinFill,
            HeuristicArg::Lex => Heuristic::Lexicographic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Linear,
    Log10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Debug, Args)]
struct SolveArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "min-fill")]
    plan_heuristic: HeuristicArg,
    /// Use this `.jt` tree instead of planning.
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "linear")]
    mode: ModeArg,
    /// Check every checkpoint by enumeration first (at most 16 variables).
    #[arg(long)]
    verify: bool,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `⟦φ⟧·W` as one Graphviz diagram.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "min-fill")]
    plan_heuristic: HeuristicArg,
    /// Write the tree here; otherwise it goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// A file, or a directory to receive a conventionally named file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Re-roll the seed until the instance has a nonzero maximum.
    #[arg(long, global = true)]
    require_sat: bool,
}

#[derive(Debug, Subcommand)]
enum GenKind {
    /// `n - k + 1` clauses over consecutive windows of `k` variables.
    Chain {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: u32,
    },
    /// Clauses over uniformly chosen variables.
    Random {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        max_len: u32,
        #[arg(long, default_value_t = 0.5)]
        xor_prob: f64,
    },
}

#[derive(Debug, Args)]
struct OracleArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    input: PathBuf,
    #[arg(long, default_value_t = wcnf::DEFAULT_SCALE)]
    wcnf_scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Internal(String),
    Guard(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Guard(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) | CliError::Guard(m) => m,
        }
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::MonolithicLimit { .. } | ExecError::EnumerationLimit { .. } => {
                CliError::Guard(e.to_string())
            }
            ExecError::InvalidTree(_) => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Chain { .. } | GenError::Random(_) => CliError::Usage(e.to_string()),
            GenError::NoSatisfiable { .. } => CliError::Guard(e.to_string()),
            GenError::Solver(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<WcnfError> for CliError {
    fn from(e: WcnfError) -> Self {
        match e {
            WcnfError::BadScale(_) | WcnfError::NoPositiveModel => CliError::Usage(e.to_string()),
            WcnfError::Overflow(_) => CliError::Guard(e.to_string()),
            WcnfError::Solver(e) => e.into(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::ExportWcnf(a) => cmd_export_wcnf(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    formula::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn v_line(tau: &Assignment) -> String {
    let mut line = String::from("v");
    for lit in tau.to_lits() {
        let _ = write!(line, " {lit}");
    }
    line.push_str(" 0");
    line
}

fn heuristic_tree(instance: &Instance, h: HeuristicArg) -> ProjectJoinTree {
    let order = heuristic_order(&instance.formula, h.into());
    plan(&instance.formula, &order).expect("heuristic orders are permutations")
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let instance = read_instance(&args.input)?;
    let start = Instant::now();
    let tree = match &args.tree {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            ProjectJoinTree::from_jt(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => heuristic_tree(&instance, args.plan_heuristic),
    };
    let plan_time = start.elapsed();

    let mut report = String::new();
    if args.verify {
        match Executor::new(ValueMode::Linear).verify(&instance, &tree)? {
            Verification::Pass { checks } => {
                if args.format == Format::Human {
                    let _ = writeln!(report, "c verify: {checks} checkpoints passed");
                }
            }
            Verification::Fail(f) => {
                return Err(CliError::Internal(format!("checkpoint failed: {f}")));
            }
        }
    }
    if let Some(path) = &args.dot {
        write_file(path, &monolithic_dot(&instance)?)?;
    }

    let mode = match args.mode {
        ModeArg::Linear => ValueMode::Linear,
        ModeArg::Log10 => ValueMode::Log10,
    };
    let r = Executor::new(mode).solve(&instance, &tree)?;
    if args.format == Format::Human {
        let s = &r.stats;
        let _ = writeln!(report, "c width {}", s.width);
        let _ = writeln!(report, "c peak diagram nodes {}", s.peak_nodes);
        let _ = writeln!(report, "c allocated nodes {}", s.allocated_nodes);
        let _ = writeln!(
            report,
            "c time plan {:.6}s valuate {:.6}s reconstruct {:.6}s",
            plan_time.as_secs_f64(),
            s.valuate_time.as_secs_f64(),
            s.reconstruct_time.as_secs_f64()
        );
        if r.no_positive_model() {
            let _ = writeln!(report, "c no assignment has nonzero weight");
        }
    }
    let _ = writeln!(report, "s MAXIMUM {}", r.maximum);
    let _ = writeln!(report, "{}", v_line(&r.maximizer));
    emit(args.out.as_deref(), &report)
}

fn monolithic_dot(instance: &Instance) -> Result<String> {
    let n = instance.var_count();
    if n > MONOLITHIC_LIMIT {
        return Err(ExecError::MonolithicLimit {
            vars: n,
            limit: MONOLITHIC_LIMIT,
        }
        .into());
    }
    let diagram = |e| CliError::Internal(format!("{e}"));
    let mut mgr = Manager::new(n, ValueMode::Linear);
    let mut f = mgr.one();
    for clause in instance.formula.clauses() {
        let c = mgr.from_clause(clause).map_err(diagram)?;
        f = mgr.join(f, c).map_err(diagram)?;
    }
    for x in instance.formula.vars() {
        let (w0, w1) = instance.weights.get(x);
        let w = mgr.literal_weight(x, w0, w1).map_err(diagram)?;
        f = mgr.join(f, w).map_err(diagram)?;
    }
    mgr.to_dot(f).map_err(diagram)
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let instance = read_instance(&args.input)?;
    let tree = heuristic_tree(&instance, args.plan_heuristic);
    let jt = tree.to_jt(&instance.formula);
    let width = format!("c width {}\n", tree.width(&instance.formula));
    match &args.out {
        Some(path) => {
            write_file(path, &jt)?;
            print!("{width}");
        }
        None => print!("{jt}{width}"),
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let generate = |seed: u64| match args.kind {
        GenKind::Chain { n, k } => benchgen::gen_chain(ChainSpec { n, k, seed }),
        GenKind::Random {
            n,
            m,
            max_len,
            xor_prob,
        } => benchgen::gen_random(n, m, max_len, xor_prob, seed),
    };
    let (seed, instance) = if args.require_sat {
        benchgen::first_satisfiable(args.seed, 1000, generate)?
    } else {
        (args.seed, generate(args.seed)?)
    };
    let text = formula::print(&instance);
    match &args.out {
        Some(dir) if dir.is_dir() => {
            let name = match args.kind {
                GenKind::Chain { n, k } => ChainSpec { n, k, seed }.file_name(),
                GenKind::Random { n, m, max_len, .. } => {
                    format!("random_n{n}_m{m}_l{max_len}_s{seed}.xcnf")
                }
            };
            let path = dir.join(name);
            write_file(&path, &text)?;
            println!("{}", path.display());
            Ok(())
        }
        out => emit(out.as_deref(), &text),
    }
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let instance = read_instance(&args.input)?;
    let r = brute_solve(&instance).map_err(|e| CliError::Guard(e.to_string()))?;
    let first = r
        .maximizer_assignments()
        .next()
        .expect("enumeration keeps at least one maximizer");
    let mut report = String::new();
    if args.format == Format::Human {
        let _ = writeln!(report, "c maximizers {}", r.maximizers.len());
    }
    let _ = writeln!(report, "s MAXIMUM {}", r.maximum);
    let _ = writeln!(report, "{}", v_line(&first));
    let _ = writeln!(report, "c WMC {}", r.wmc);
    emit(args.out.as_deref(), &report)
}

fn cmd_export_wcnf(args: ExportArgs) -> Result<()> {
    let instance = read_instance(&args.input)?;
    let w = wcnf::export(&instance, args.wcnf_scale)?;
    emit(args.out.as_deref(), &w.to_text())
}
