//! `redline`: plan, validate and generate data for constrained PDDL tasks.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use redline_core::constraint::{
    AllOf, ConstraintOracle, ConstraintPolicy, DecisionLog, DecisionMetrics, NoisyOracle, OracleError,
    SymbolicOracle,
};
use redline_core::datagen::{
    gen_logs, gen_plans_forward, gen_plans_invalid, gen_plans_reverse, write_corpus, write_summary_csv, GenMode,
    GenSpec, MutationKind,
};
use redline_core::kb::{
    attribute_objects, inject_facts, query_attribute, AttributeKb, KbOracle, OpenAiEndpoint, RecordedEndpoint,
};
use redline_core::pddl::{ground, parse_domain, parse_problem, GroundedTask};
use redline_core::planner::{solve, Algorithm, SearchConfig, SearchOutcome};
use redline_core::validator::{explain, validate_with, ValidateOptions};

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_UNSOLVABLE: u8 = 3;
const EXIT_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(name = "redline", version, about = "Constraint-aware PDDL planning, validation and data generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a shortest constraint-respecting plan.
    Plan(PlanArgs),
    /// Check a plan step by step and explain the first failure.
    Validate(ValidateArgs),
    /// Generate a JSONL log of access decisions.
    GenLogs(GenLogsArgs),
    /// Generate a JSONL corpus of (problem, plan, label) items.
    GenPlans(GenPlansArgs),
    /// Ask the knowledge base whether an object is a personal belonging.
    Kb(KbArgs),
}

#[derive(Args)]
struct TaskArgs {
    /// PDDL domain file.
    domain: PathBuf,
    /// PDDL problem file.
    problem: PathBuf,
    /// Policy file. Defaults to `<domain stem>.policy` next to the domain,
    /// or no rules if that does not exist.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Static attribute table (JSON). Missing `personal`/`non_personal`
    /// facts are injected into the problem before grounding.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Recorded chat replies (JSON) used instead of a live endpoint.
    #[arg(long)]
    kb_replies: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// symbolic, noisy:<epsilon>, kb, or several joined with `+`.
    #[arg(long, default_value = "symbolic")]
    oracle: String,
    /// Seed for noisy oracles.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Bfs,
    Astar,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    oracle: OracleArgs,
    #[arg(long, value_enum, default_value = "bfs")]
    algorithm: AlgorithmArg,
    #[arg(long, default_value_t = 1_000_000)]
    max_expansions: usize,
    /// Plan output file; standard output if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Plan file, one `(action args...)` per line.
    plan: PathBuf,
    #[command(flatten)]
    oracle: OracleArgs,
    /// Keep going after constraint failures and list them all.
    #[arg(long)]
    all: bool,
    /// Print the report as JSON instead of a sentence.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenLogsArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    oracle: OracleArgs,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Random-walk horizon for sampled states.
    #[arg(long, default_value_t = 5)]
    depth: usize,
    /// Alternate allow and deny ground truths.
    #[arg(long)]
    balanced: bool,
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Write a one-row CSV summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlansMode {
    Forward,
    Reverse,
    Invalid,
}

#[derive(Args)]
struct GenPlansArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, value_enum)]
    mode: PlansMode,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reverse walk length.
    #[arg(long, default_value_t = 5)]
    depth: usize,
    /// Comma-separated mutation kinds; all when omitted.
    #[arg(long, value_delimiter = ',')]
    mutations: Option<Vec<String>>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 1_000_000)]
    max_expansions: usize,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct KbArgs {
    object: String,
    #[arg(long, default_value = "")]
    context: String,
    /// Static attribute table (JSON).
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Recorded chat replies (JSON) used instead of a live endpoint.
    #[arg(long)]
    kb_replies: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Static table plus an endpoint: recorded replies if given, else one
/// configured through the environment.
fn load_kb(table: Option<&Path>, replies: Option<&Path>) -> Result<AttributeKb> {
    let kb = match table {
        Some(p) => AttributeKb::from_json(&read(p)?).with_context(|| p.display().to_string())?,
        None => AttributeKb::new(Default::default()),
    };
    if let Some(p) = replies {
        let ep = RecordedEndpoint::from_json(&read(p)?).with_context(|| p.display().to_string())?;
        return Ok(kb.with_endpoint(Box::new(ep)));
    }
    match OpenAiEndpoint::from_env() {
        Some(ep) => Ok(kb.with_endpoint(Box::new(ep?))),
        None => Ok(kb),
    }
}

struct Loaded {
    task: GroundedTask,
    policy: ConstraintPolicy,
}

fn load(args: &TaskArgs) -> Result<Loaded> {
    let domain_text = read(&args.domain)?;
    let domain = parse_domain(&domain_text).map_err(|e| anyhow!("{}:{e}", args.domain.display()))?;
    let problem_text = read(&args.problem)?;
    let mut problem = parse_problem(&problem_text, &domain).map_err(|e| anyhow!("{}:{e}", args.problem.display()))?;
    if args.kb.is_some() || args.kb_replies.is_some() {
        let kb = load_kb(args.kb.as_deref(), args.kb_replies.as_deref())?;
        let objects = attribute_objects(&domain, &problem);
        if objects.is_empty() {
            warn!("domain declares no `personal` predicate; knowledge base not used");
        }
        problem = inject_facts(&kb, &problem, &objects);
    }
    let task = ground(&domain, &problem)?;
    let policy_path = args.policy.clone().or_else(|| {
        let sibling = args.domain.with_extension("policy");
        sibling.exists().then_some(sibling)
    });
    let policy = match policy_path {
        Some(p) => {
            info!("policy: {}", p.display());
            ConstraintPolicy::parse(&read(&p)?, &task).map_err(|e| anyhow!("{}:{e}", p.display()))?
        }
        None => {
            info!("no policy file; no constraints apply");
            ConstraintPolicy::empty(&task)
        }
    };
    Ok(Loaded { task, policy })
}

fn build_oracle(spec: &str, seed: u64, loaded: &Loaded, task: &TaskArgs) -> Result<Box<dyn ConstraintOracle>> {
    let mut parts = Vec::new();
    for part in spec.split('+') {
        let part = part.trim();
        let oracle: Box<dyn ConstraintOracle> = if part == "symbolic" {
            Box::new(SymbolicOracle::new(loaded.policy.clone()))
        } else if part == "kb" {
            let kb = load_kb(task.kb.as_deref(), task.kb_replies.as_deref())?;
            Box::new(KbOracle::new(loaded.policy.clone(), kb))
        } else if let Some(eps) = part.strip_prefix("noisy:") {
            let eps: f64 = eps
                .parse()
                .map_err(|_| OracleError::UnknownSpec(part.to_string()))?;
            let noisy = NoisyOracle::new(SymbolicOracle::new(loaded.policy.clone()), eps, seed)?;
            if eps > 0.0 {
                eprintln!(
                    "warning: {} is a simulated learned oracle; its verdicts are deliberately wrong with probability {eps}",
                    noisy.id()
                );
            }
            Box::new(noisy)
        } else {
            bail!(OracleError::UnknownSpec(part.to_string()));
        };
        parts.push(oracle);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Box::new(AllOf::new(parts))
    })
}

fn cmd_plan(args: PlanArgs) -> Result<u8> {
    let loaded = load(&args.task)?;
    let oracle = build_oracle(&args.oracle.oracle, args.oracle.seed, &loaded, &args.task)?;
    let mut config = SearchConfig::new(oracle.as_ref());
    config.algorithm = match args.algorithm {
        AlgorithmArg::Bfs => Algorithm::Bfs,
        AlgorithmArg::Astar => Algorithm::AstarGoalCount,
    };
    config.max_expansions = args.max_expansions;
    let (outcome, stats) = solve(&loaded.task, &config)?;
    let label = match &outcome {
        SearchOutcome::Solved(_) => "solved",
        SearchOutcome::Unsolvable => "unsolvable",
        SearchOutcome::ResourceLimit => "resource-limit",
    };
    let mut report = serde_json::to_value(&stats)?;
    report["outcome"] = label.into();
    report["oracle"] = oracle.id().into();
    if let Some(p) = outcome.plan() {
        report["plan_length"] = p.len().into();
    }
    eprintln!("{report}");
    match outcome {
        SearchOutcome::Solved(plan) => {
            let mut out = output(args.out.as_deref())?;
            out.write_all(plan.to_text().as_bytes())?;
            out.flush()?;
            Ok(0)
        }
        SearchOutcome::Unsolvable => {
            eprintln!("no plan: the goal is unreachable under the constraints");
            Ok(EXIT_UNSOLVABLE)
        }
        SearchOutcome::ResourceLimit => {
            eprintln!("no plan: expansion limit {} reached", args.max_expansions);
            Ok(EXIT_LIMIT)
        }
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<u8> {
    let loaded = load(&args.task)?;
    let oracle = build_oracle(&args.oracle.oracle, args.oracle.seed, &loaded, &args.task)?;
    let plan_text = read(&args.plan)?;
    let opts = ValidateOptions {
        continue_past_constraints: args.all,
    };
    let report = validate_with(&loaded.task, oracle.as_ref(), &plan_text, opts);
    if args.json {
        println!("{}", report.to_json());
    } else {
        println!("{}", explain(&report));
    }
    Ok(if report.is_valid() { 0 } else { EXIT_INVALID })
}

fn cmd_gen_logs(args: GenLogsArgs) -> Result<u8> {
    let loaded = load(&args.task)?;
    let oracle = build_oracle(&args.oracle.oracle, args.oracle.seed, &loaded, &args.task)?;
    let mut spec = GenSpec::new(GenMode::Logs, args.count, args.oracle.seed);
    spec.depth = args.depth;
    spec.balanced = args.balanced;
    let mut buf = DecisionLog::new(Vec::new());
    let summary = gen_logs(&loaded.task, &loaded.policy, oracle.as_ref(), &spec, &mut buf)?;
    let bytes = buf.close()?;
    let records = redline_core::constraint::read_log(bytes.as_slice())?;
    eprintln!("{}", serde_json::to_string(&DecisionMetrics::from_records(&records))?);
    let mut out = output(args.out.as_deref())?;
    out.write_all(&bytes)?;
    out.flush()?;
    if let Some(p) = &args.summary {
        write_summary_csv(fs::File::create(p)?, &[summary])?;
    }
    Ok(0)
}

fn cmd_gen_plans(args: GenPlansArgs) -> Result<u8> {
    let loaded = load(&args.task)?;
    let mode = match args.mode {
        PlansMode::Forward => GenMode::PlansForward,
        PlansMode::Reverse => GenMode::PlansReverse,
        PlansMode::Invalid => GenMode::PlansInvalid,
    };
    let mut spec = GenSpec::new(mode, args.count, args.seed);
    spec.depth = args.depth;
    spec.workers = args.workers;
    spec.max_expansions = args.max_expansions;
    if let Some(kinds) = &args.mutations {
        spec.mutation_kinds = kinds
            .iter()
            .filter(|k| !k.is_empty())
            .map(|k| k.parse::<MutationKind>())
            .collect::<Result<_, _>>()?;
    }
    let (items, summary) = match mode {
        GenMode::PlansForward => gen_plans_forward(&loaded.task, &loaded.policy, &spec)?,
        GenMode::PlansReverse => gen_plans_reverse(&loaded.task, &loaded.policy, &spec)?,
        _ => gen_plans_invalid(&loaded.task, &loaded.policy, &spec)?,
    };
    write_corpus(output(args.out.as_deref())?, &loaded.task, &items)?;
    eprintln!("{}", serde_json::to_string(&summary)?);
    if items.len() < args.count {
        eprintln!("warning: emitted {} of {} requested items", items.len(), args.count);
    }
    if let Some(p) = &args.summary {
        write_summary_csv(fs::File::create(p)?, &[summary])?;
    }
    Ok(0)
}

fn cmd_kb(args: KbArgs) -> Result<u8> {
    let kb = load_kb(args.kb.as_deref(), args.kb_replies.as_deref())?;
    let answer = query_attribute(&kb, &args.object, &args.context);
    if let Some(w) = &answer.warning {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string(&answer)?);
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Validate(a) => cmd_validate(a),
        Command::GenLogs(a) => cmd_gen_logs(a),
        Command::GenPlans(a) => cmd_gen_plans(a),
        Command::Kb(a) => cmd_kb(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
