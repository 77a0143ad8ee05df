//! Command-line front end: validation, classification, supervision,
//! simulation, exploration, proposition checks and benchmark generation.

use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bip_enforce::bench::{philosophers, robots, Bench};
use bip_enforce::enforce::{check_em_soundness, lts_from_graph};
use bip_enforce::model::{parse_model, serialize_model, ModelError, System};
use bip_enforce::property::{parse_oracle, serialize_oracle, Oracle};
use bip_enforce::runner::{run_plain, run_supervised, RunOptions, Supervision};
use bip_enforce::semantics::{explore, Engine, ReachGraph, SchedulerPolicy};
use bip_enforce::transform::{
    check_completeness, check_propositions, parse_sidecar, supervise, SuperviseOptions, SupervisionInfo, TransformError,
};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};

#[derive(Parser)]
#[command(name = "bip-enforce", version, about = "Runtime enforcement for component systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file for structural errors
    Validate { model: PathBuf },
    /// Report whether an oracle can be enforced
    Classify { oracle: PathBuf },
    /// Instrument a model and integrate the monitor of an oracle
    Supervise {
        model: PathBuf,
        oracle: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        variant: Variant,
    },
    /// Simulate a plain or supervised model
    Run(RunArgs),
    /// Explore the reachable configurations of a model
    Explore {
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        bound: usize,
    },
    /// Supervise a model and check the correctness propositions
    Check {
        model: PathBuf,
        oracle: PathBuf,
        #[command(flatten)]
        variant: Variant,
        /// maximum number of explored states
        #[arg(long, default_value_t = 1_000_000)]
        bound: usize,
        /// depth for completeness and the abstract check
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// skip backup injection, producing a deliberately broken system
        #[arg(long)]
        no_backup: bool,
    },
    /// Generate a benchmark model and its oracle
    GenBench {
        #[command(subcommand)]
        bench: BenchCmd,
        #[arg(short, long, global = true, default_value = ".")]
        output: PathBuf,
    },
}

#[derive(Args)]
struct Variant {
    /// integrate with a disabler instead of spin recovery
    #[arg(long)]
    disabler: bool,
    /// instrument every transition of monitored components
    #[arg(long)]
    no_optimize: bool,
}

#[derive(Args)]
struct RunArgs {
    model: PathBuf,
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// provenance file of a supervised model; found next to the model by default
    #[arg(long)]
    provenance: Option<PathBuf>,
    #[arg(long, conflicts_with = "lex", default_value_t = 0)]
    seed: u64,
    /// always pick the first enabled interaction
    #[arg(long)]
    lex: bool,
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    /// stop after this many steps with a good verdict
    #[arg(long)]
    correct_steps: Option<usize>,
    /// write a JSON-lines trace
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCmd {
    Philosophers {
        n: usize,
    },
    Robots {
        k: usize,
        grid: usize,
        #[arg(long, default_value_t = 1000)]
        steps: u32,
    },
}

enum Failure {
    Usage(String),
    Invalid(String),
    Ineligible(String),
    Check,
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<TransformError> for Failure {
    fn from(e: TransformError) -> Self {
        match e {
            TransformError::Ineligible(_) => Failure::Ineligible(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn other(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<System, Failure> {
    parse_model(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_oracle(path: &Path) -> Result<Oracle, Failure> {
    parse_oracle(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn print(v: &Json) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON output"));
}

fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("provenance.json")
}

fn options(v: &Variant, backup: bool) -> SuperviseOptions {
    SuperviseOptions { disabler: v.disabler, optimize: !v.no_optimize, backup }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = match f {
                Failure::Usage(m) => {
                    eprintln!("error: {m}");
                    1
                }
                Failure::Invalid(m) => {
                    eprintln!("invalid input: {m}");
                    2
                }
                Failure::Ineligible(m) => {
                    eprintln!("{m}");
                    3
                }
                Failure::Check => 4,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Validate { model } => {
            let sys = load_model(&model)?;
            println!(
                "ok: {} components, {} connectors, {} priorities",
                sys.components.len(),
                sys.connectors.len(),
                sys.priorities.len()
            );
            Ok(())
        }
        Command::Classify { oracle } => {
            let o = load_oracle(&oracle)?;
            let c = o.classify();
            print(&json!({
                "safety": c.safety,
                "stutter_invariant": c.stutter_invariant,
                "k": c.k.to_string(),
                "eligible": c.eligible(),
                "tautological_events": o.tautological_events(),
            }));
            if c.eligible() {
                Ok(())
            } else {
                Err(Failure::Ineligible(format!("not enforceable: {}", c.failures().join(", "))))
            }
        }
        Command::Supervise { model, oracle, output, variant } => {
            let sys = load_model(&model)?;
            let o = load_oracle(&oracle)?;
            let sup = supervise(&sys, &o, options(&variant, true))?;
            for w in &sup.warnings {
                eprintln!("warning: {w}");
            }
            fs::write(&output, serialize_model(&sup.system))?;
            let side = sidecar_path(&output);
            fs::write(&side, serde_json::to_string_pretty(&sup.sidecar_json(&o)).expect("JSON output"))?;
            print(&json!({
                "model": output,
                "provenance": side,
                "components": sup.system.components.len(),
                "connectors": sup.system.connectors.len(),
                "instrumented": sup.plan.reccomp,
                "recoverable_connectors": sup.plan.recinter,
            }));
            Ok(())
        }
        Command::Run(args) => run(args),
        Command::Explore { model, bound } => {
            let e = Engine::new(load_model(&model)?)?;
            let g = explore(&e, bound).map_err(other)?;
            let path = g.deadlocks.first().map(|&d| shortest_path(&e, &g, d));
            print(&json!({
                "states": g.states.len(),
                "transitions": g.num_edges(),
                "deadlocks": g.deadlocks.len(),
                "truncated": g.truncated,
                "deadlock_path": path,
            }));
            Ok(())
        }
        Command::Check { model, oracle, variant, bound, depth, no_backup } => {
            let sys = load_model(&model)?;
            let o = load_oracle(&oracle)?;
            let sup = supervise(&sys, &o, options(&variant, !no_backup))?;
            check(&sys, &sup.system, &sup.info, &o, bound, depth)
        }
        Command::GenBench { bench, output } => {
            let (name, b): (String, Bench) = match bench {
                BenchCmd::Philosophers { n } => (format!("philosophers-{n}"), philosophers(n).map_err(|e| Failure::Invalid(e.to_string()))?),
                BenchCmd::Robots { k, grid, steps } => {
                    (format!("robots-{k}-{grid}"), robots(k, grid, steps).map_err(|e| Failure::Invalid(e.to_string()))?)
                }
            };
            fs::create_dir_all(&output)?;
            let m = output.join(format!("{name}.model.json"));
            let o = output.join(format!("{name}.oracle.json"));
            fs::write(&m, serialize_model(&b.system))?;
            let oracle = Oracle::from_def(b.oracle).map_err(other)?;
            fs::write(&o, serialize_oracle(&oracle))?;
            print(&json!({"model": m, "oracle": o}));
            Ok(())
        }
    }
}

fn shortest_path(e: &Engine, g: &ReachGraph, target: usize) -> Vec<String> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; g.states.len()];
    let mut seen = vec![false; g.states.len()];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        if s == target {
            break;
        }
        for (k, (_, t)) in g.edges[s].iter().enumerate() {
            if !seen[*t] {
                seen[*t] = true;
                parent[*t] = Some((s, k));
                queue.push_back(*t);
            }
        }
    }
    let mut out = Vec::new();
    let mut cur = target;
    while let Some((p, k)) = parent[cur] {
        out.push(e.interaction_label(&g.edges[p][k].0));
        cur = p;
    }
    out.reverse();
    out
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let sys = load_model(&args.model)?;
    let engine = Engine::new(sys)?;
    let side = args.provenance.clone().or_else(|| Some(sidecar_path(&args.model)).filter(|p| p.exists()));
    let policy = if args.lex { SchedulerPolicy::Lexicographic } else { SchedulerPolicy::Random(args.seed) };
    let opts = RunOptions { policy, max_steps: args.max_steps, correct_steps: args.correct_steps };
    let mut file = args.trace.as_ref().map(File::create).transpose()?.map(BufWriter::new);
    let trace = file.as_mut().map(|w| w as &mut dyn Write);
    let explicit = args.oracle.as_deref().map(load_oracle).transpose()?;
    let summary = match side {
        Some(p) => {
            let sc = parse_sidecar(&read(&p)?)?;
            let original = Engine::new(sc.original)?;
            let oracle = explicit.or(sc.oracle);
            let sv = Supervision { original: &original, info: &sc.info, oracle: oracle.as_ref() };
            run_supervised(&engine, &sv, &opts, trace, |_| false).map_err(other)?
        }
        None => run_plain(&engine, explicit.as_ref(), &opts, trace).map_err(other)?,
    };
    if let Some(mut w) = file {
        w.flush()?;
    }
    print(&serde_json::to_value(&summary).expect("JSON output"));
    Ok(())
}

fn check(orig: &System, sup: &System, info: &SupervisionInfo, o: &Oracle, bound: usize, depth: usize) -> Result<(), Failure> {
    let oe = Engine::new(orig.clone())?;
    let se = Engine::new(sup.clone())?;
    let props = check_propositions(&oe, &se, info, o, bound).map_err(other)?;
    let comp = check_completeness(&oe, &se, info, o, depth).map_err(other)?;
    let g = explore(&oe, bound).map_err(other)?;
    let bound_o = o.bind(&oe).map_err(other)?;
    let lts = lts_from_graph(&oe, &g, &bound_o).map_err(other)?;
    let abs = check_em_soundness(&lts, o, depth).map_err(other)?;
    let violations: Vec<Json> = props
        .violations
        .iter()
        .chain(&comp.failures)
        .map(|v| json!({"property": v.property, "detail": v.detail, "trace": v.trace}))
        .collect();
    let ok = props.ok() && comp.ok() && abs.passed();
    print(&json!({
        "ok": ok,
        "states": props.states,
        "transitions": props.transitions,
        "stable_states": props.stable,
        "deadlocks": props.deadlocks,
        "truncated": props.truncated || g.truncated,
        "propositions": bip_enforce::transform::PROPOSITIONS.iter().map(|p| (p.to_string(), Json::Bool(props.holds(p)))).collect::<serde_json::Map<_, _>>(),
        "completeness": {"ok": comp.ok(), "pairs": comp.pairs, "matched": comp.matched},
        "abstract": abs,
        "violations": violations,
    }));
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}
