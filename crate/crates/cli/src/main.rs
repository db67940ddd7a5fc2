//! `nomos` command-line front end.
//!
//! Exit codes: 0 clean, 1 spec errors, 2 operational failure, 3 bugs found.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use indexmap::IndexMap;
use nomos_core::engine::{write_outputs, SummaryFile, DEFAULT_BUDGET, DEFAULT_MAX_RETRIES};
use nomos_core::models::{
    load_dataset_inferred, load_model, ChildProcessChannel, DataSource, ExternalModel, ModelBackend, DEFAULT_TIMEOUT,
};
use nomos_core::report::{aggregate, render_table};
use nomos_core::sema::{check_with_schemas, schema_env};
use nomos_core::stdlib::StdlibConfig;
use nomos_core::{FunctionRegistry, Harness, RunConfig, RunReport, TypedSpec};

#[derive(Parser)]
#[command(name = "nomos", version, about = "Check k-safety specs and test models against them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a spec; prints `OK, k_static=N` on success.
    Check {
        spec: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run the test loop against a model.
    Run(RunArgs),
    /// Aggregate summary files from earlier runs.
    Report {
        /// `summary.json` files, or directories containing one.
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Input data as `INPUT=file.csv`; a bare path binds every unbound input.
    #[arg(long = "data", value_name = "[INPUT=]PATH")]
    data: Vec<String>,
    /// Column holding ground-truth labels.
    #[arg(long = "label-col", default_value = "label")]
    label_col: String,
}

#[derive(Args)]
struct RunArgs {
    spec: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Model binding as `NAME=model.json`, `NAME=exec:COMMAND`, or without `NAME=`.
    #[arg(long = "model", value_name = "[NAME=]PATH|exec:CMD", required = true)]
    model: Vec<String>,
    /// Precondition-satisfying tests per run.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long = "max-retries", default_value_t = DEFAULT_MAX_RETRIES)]
    max_retries: u64,
    #[arg(long = "wnoise-eps", default_value_t = StdlibConfig::default().wnoise_eps)]
    wnoise_eps: f64,
    #[arg(long = "blur-kernel", default_value_t = StdlibConfig::default().blur_kernel)]
    blur_kernel: usize,
    /// Directory for `bugs.jsonl` and `summary.json`.
    #[arg(long, default_value = "nomos-out")]
    out: PathBuf,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn op(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { spec, data } => cmd_check(&spec, &data),
        Command::Run(args) => cmd_run(&args),
        Command::Report { summaries } => cmd_report(&summaries),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("{}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

/// `NAME=VALUE` or a bare value.
fn split_binding(s: &str) -> (Option<&str>, &str) {
    match s.split_once('=') {
        Some((name, value)) if !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_') => {
            (Some(name), value)
        }
        _ => (None, s),
    }
}

/// Parses, loads data for, and checks a spec. Warnings go to stderr.
type Sources = IndexMap<String, Arc<DataSource>>;

fn load_spec(path: &Path, data: &DataArgs) -> Result<(Arc<TypedSpec>, Sources), Failure> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| op(format!("{file}: {e}")))?;
    let spec = nomos_core::parse(&text).map_err(|e| {
        let span = e.span();
        Failure { code: 1, message: format!("{file}:{}:{}: error: {}", span.line, span.column, e.message()) }
    })?;
    let mut loaded: HashMap<&str, Arc<DataSource>> = HashMap::new();
    let mut sources = IndexMap::new();
    let mut fallback = None;
    for binding in &data.data {
        let (name, p) = split_binding(binding);
        if !loaded.contains_key(p) {
            let src = load_dataset_inferred(Path::new(p), Some(&data.label_col)).map_err(|e| op(e.to_string()))?;
            loaded.insert(p, Arc::new(src));
        }
        let src = Arc::clone(&loaded[p]);
        match name {
            Some(n) if spec.inputs.iter().any(|i| i.name == n) => {
                sources.insert(n.to_string(), src);
            }
            Some(n) => return Err(op(format!("--data binds `{n}`, which is not an input of {file}"))),
            None => fallback = Some(src),
        }
    }
    if let Some(src) = fallback {
        for input in &spec.inputs {
            sources.entry(input.name.clone()).or_insert_with(|| Arc::clone(&src));
        }
    }
    let typed = match check_with_schemas(&spec, &FunctionRegistry::core(), &schema_env(sources.iter())) {
        Ok(t) => t,
        Err(diags) => {
            let mut message = String::new();
            for d in &diags {
                let _ = writeln!(message, "{}", d.render(&file));
            }
            return Err(Failure { code: 1, message: message.trim_end().to_string() });
        }
    };
    for w in &typed.warnings {
        eprintln!("{}", w.render(&file));
    }
    Ok((Arc::new(typed), sources))
}

fn cmd_check(path: &Path, data: &DataArgs) -> Result<u8, Failure> {
    let (typed, _) = load_spec(path, data)?;
    println!("OK, k_static={}", typed.k_static);
    Ok(0)
}

fn load_backend(spec: &TypedSpec, bindings: &[String]) -> Result<Arc<dyn ModelBackend>, Failure> {
    let wanted = spec.spec.imports.first().map(|i| i.name.as_str());
    let parsed: Vec<(Option<&str>, &str)> = bindings.iter().map(|b| split_binding(b)).collect();
    let target = match wanted {
        Some(name) => parsed.iter().find(|(n, _)| *n == Some(name)).or(match parsed.as_slice() {
            [(None, _)] => parsed.first(),
            _ => None,
        }),
        None if parsed.len() == 1 => parsed.first(),
        None => return Err(op("spec imports no model; give exactly one --model")),
    };
    let Some(&(_, target)) = target else {
        return Err(op(format!("no --model binding for `{}`", wanted.unwrap_or_default())));
    };
    if let Some(cmd) = target.strip_prefix("exec:") {
        let chan = ChildProcessChannel::spawn_cmdline(cmd, DEFAULT_TIMEOUT).map_err(|e| op(e.to_string()))?;
        return Ok(Arc::new(ExternalModel::new(chan)));
    }
    load_model(Path::new(target)).map_err(|e| op(e.to_string()))
}

fn cmd_run(args: &RunArgs) -> Result<u8, Failure> {
    if args.budget == 0 {
        return Err(op("--budget must be at least 1"));
    }
    if args.runs == 0 || args.jobs == 0 || args.max_retries == 0 {
        return Err(op("--runs, --jobs and --max-retries must be at least 1"));
    }
    if args.blur_kernel.is_multiple_of(2) {
        return Err(op("--blur-kernel must be odd"));
    }
    if !(args.wnoise_eps >= 0.0 && args.wnoise_eps.is_finite()) {
        return Err(op("--wnoise-eps must be a nonnegative number"));
    }
    let (typed, sources) = load_spec(&args.spec, &args.data)?;
    let model = load_backend(&typed, &args.model)?;
    let stdlib = StdlibConfig { wnoise_eps: args.wnoise_eps, blur_kernel: args.blur_kernel, ..StdlibConfig::default() };
    let harness = Harness::new(typed, &sources, model, stdlib.clone()).map_err(|e| op(e.to_string()))?;
    let configs: Vec<RunConfig> = (0..args.runs)
        .map(|i| RunConfig {
            budget: args.budget,
            seed: args.seed.wrapping_add(i),
            max_retries: args.max_retries,
            stdlib: stdlib.clone(),
        })
        .collect();

    println!(
        "{:>20}  {:>8}  {:>8}  {:>18}  {:>19}  {:>11}",
        "seed", "budget", "passed", "precond_violations", "postcond_violations", "unique_bugs"
    );
    let results = run_all(&harness, &configs, args.jobs);
    let mut reports = Vec::with_capacity(results.len());
    for (cfg, r) in configs.iter().zip(results) {
        let r = r.map_err(|e| op(format!("run with seed {}: {e}", cfg.seed)))?;
        reports.push(r);
    }

    let name = args.spec.file_stem().and_then(|s| s.to_str()).unwrap_or("spec");
    write_outputs(&args.out, name, &reports).map_err(|e| op(format!("{}: {e}", args.out.display())))?;
    Ok(if reports.iter().any(|r| r.unique_bugs > 0) { 3 } else { 0 })
}

fn print_row(r: &RunReport) {
    println!(
        "{:>20}  {:>8}  {:>8}  {:>18}  {:>19}  {:>11}",
        r.seed, r.budget, r.passed, r.precond_violations, r.postcond_violations, r.unique_bugs
    );
}

/// Runs every config on up to `jobs` threads. Results keep config order; a
/// line is printed as each run completes.
fn run_all(harness: &Harness, configs: &[RunConfig], jobs: usize) -> Vec<Result<RunReport, nomos_core::EngineError>> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<RunReport, _>>>> =
        configs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.min(configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                let r = harness.run(cfg);
                if let Ok(report) = &r {
                    print_row(report);
                }
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every run completes")).collect()
}

fn cmd_report(paths: &[PathBuf]) -> Result<u8, Failure> {
    let mut files = Vec::new();
    for p in paths {
        let file = if p.is_dir() { p.join("summary.json") } else { p.clone() };
        let text = std::fs::read_to_string(&file).map_err(|e| op(format!("{}: {e}", file.display())))?;
        let summary: SummaryFile =
            serde_json::from_str(&text).map_err(|e| op(format!("{}: malformed summary: {e}", file.display())))?;
        files.push(summary);
    }
    print!("{}", render_table(&aggregate(&files)));
    Ok(0)
}
