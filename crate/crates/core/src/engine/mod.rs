//! The test loop.
//!
//! Each iteration draws one record per input, evaluates the var
//! declarations in order and checks the preconditions; on failure the
//! precondition-violation counter grows and the whole candidate is
//! regenerated. An accepted candidate runs the code block, then every
//! postcondition is evaluated. The budget counts accepted candidates only.
//!
//! A test's identity is the FNV-1a hash of the raw draws made while
//! producing it (its accepted generation attempt plus any draws in the code
//! block and postconditions). Draws made inside `play` episodes come from a
//! separate generator and never enter the trace.

mod interp;

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

pub use interp::Env;
use interp::Machine;

use crate::models::{value_from_json, value_to_json, DataSource, ModelBackend, ModelError};
use crate::rng::{DrawSource, RngHandle, ScriptedSource, SplitMix64};
use crate::sema::{Role, TypedSpec};
use crate::stdlib::StdlibConfig;
use crate::syntax::SourceSpan;

pub const DEFAULT_BUDGET: u64 = 5000;
pub const DEFAULT_MAX_RETRIES: u64 = 100_000;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the little-endian bytes of each draw, in order.
pub fn hash_trace(draws: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for d in draws {
        for b in d.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("input `{0}` has no data source")]
    MissingSource(String),
    #[error("{attempts} consecutive candidates violated the precondition; it is probably unsatisfiable")]
    RetryExhausted { attempts: u64 },
    #[error("{span}: {message}")]
    Runtime { span: SourceSpan, message: String },
    #[error("{span}: {source}")]
    Model { span: SourceSpan, source: ModelError },
    #[error("postcondition {index}: {source}")]
    Postcondition { index: usize, source: Box<EngineError> },
    #[error("test {test_index}: {source}")]
    AtTest { test_index: u64, source: Box<EngineError> },
    #[error("cannot replay bug: {0}")]
    Replay(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Number of precondition-satisfying tests to execute.
    pub budget: u64,
    pub seed: u64,
    pub max_retries: u64,
    pub stdlib: StdlibConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, seed: 0, max_retries: DEFAULT_MAX_RETRIES, stdlib: StdlibConfig::default() }
    }
}

/// One test whose postcondition failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bug {
    pub trace_hash: u64,
    pub inputs: IndexMap<String, Json>,
    pub vars: IndexMap<String, Json>,
    pub outputs: IndexMap<String, Json>,
    /// Indices of the failed `ensures` clauses, in source order.
    pub violated: Vec<usize>,
    pub seed: u64,
    pub test_index: u64,
    /// Draws made after generation (code block and postconditions), needed
    /// to re-execute the test from `inputs` and `vars`.
    pub replay_draws: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub passed: u64,
    pub precond_violations: u64,
    pub postcond_violations: u64,
    pub unique_bugs: u64,
    pub bugs: Vec<Bug>,
    /// Largest number of `predict`/`play` calls made by a single test.
    pub invocations_per_test: u64,
    pub budget: u64,
    pub seed: u64,
}

impl RunReport {
    /// Candidates drawn, accepted or not.
    pub fn attempts(&self) -> u64 {
        self.budget + self.precond_violations
    }
}

/// A checked spec bound to its data sources and model.
pub struct Harness {
    spec: Arc<TypedSpec>,
    /// One source per input, aligned with `spec.inputs`.
    sources: Vec<Arc<DataSource>>,
    model: Arc<dyn ModelBackend>,
    stdlib: StdlibConfig,
}

impl Harness {
    /// `sources` maps input names to data; every input needs one.
    pub fn new(
        spec: Arc<TypedSpec>,
        sources: &IndexMap<String, Arc<DataSource>>,
        model: Arc<dyn ModelBackend>,
        stdlib: StdlibConfig,
    ) -> Result<Self, EngineError> {
        let sources = spec
            .input_names()
            .map(|n| sources.get(n).cloned().ok_or_else(|| EngineError::MissingSource(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut stdlib = stdlib;
        if let Some(t) = model.terrain_max() {
            stdlib.terrain_max = t;
        }
        Ok(Self { spec, sources, model, stdlib })
    }

    pub fn spec(&self) -> &TypedSpec {
        &self.spec
    }

    fn machine<'a>(&'a self, rng: &'a mut RngHandle) -> Machine<'a> {
        Machine { spec: &self.spec, rng, stdlib: &self.stdlib, model: self.model.as_ref(), invocations: 0 }
    }

    /// Draws candidates until one satisfies every precondition. Each failed
    /// candidate adds one to `precond_violations`. The returned environment
    /// binds inputs and vars; the RNG trace then holds exactly the accepted
    /// candidate's draws.
    pub fn generate_test(
        &self,
        rng: &mut RngHandle,
        max_retries: u64,
        precond_violations: &mut u64,
    ) -> Result<Env, EngineError> {
        let mut failures = 0;
        loop {
            rng.take_trace();
            let mut env = Env::new(self.spec.slot_count());
            for (&slot, source) in self.spec.inputs.iter().zip(&self.sources) {
                let row = source.get(rng.draw_index(source.len()));
                env.slots[slot] = Some(crate::value::Value::Record(Arc::clone(row)));
            }
            let mut m = self.machine(rng);
            for (slot, init) in &self.spec.vars {
                env.slots[*slot] = Some(m.eval(init, &env)?);
            }
            let mut holds = true;
            for p in &self.spec.preconds {
                let v = m.eval(p, &env)?;
                if v.as_bool() != Some(true) {
                    holds = false;
                    break;
                }
            }
            if holds {
                return Ok(env);
            }
            *precond_violations += 1;
            failures += 1;
            if failures >= max_retries {
                return Err(EngineError::RetryExhausted { attempts: failures });
            }
        }
    }

    /// Runs the code block; returns the number of model invocations.
    pub fn exec_code(&self, env: &mut Env, rng: &mut RngHandle) -> Result<u64, EngineError> {
        let mut m = self.machine(rng);
        m.exec(&self.spec.code, env)?;
        Ok(m.invocations)
    }

    /// Indices of the `ensures` clauses that do not hold; empty means pass.
    pub fn check_postconds(&self, env: &Env, rng: &mut RngHandle) -> Result<Vec<usize>, EngineError> {
        let mut m = self.machine(rng);
        let mut violated = Vec::new();
        for (index, p) in self.spec.postconds.iter().enumerate() {
            let v = m.eval(p, env).map_err(|e| EngineError::Postcondition { index, source: Box::new(e) })?;
            if v.as_bool() != Some(true) {
                violated.push(index);
            }
        }
        Ok(violated)
    }

    pub fn run(&self, config: &RunConfig) -> Result<RunReport, EngineError> {
        self.run_with_source(config, Box::new(SplitMix64::new(config.seed)))
    }

    /// Like [`Harness::run`] with an explicit draw source; `config.seed` is
    /// only recorded.
    pub fn run_with_source(&self, config: &RunConfig, source: Box<dyn DrawSource>) -> Result<RunReport, EngineError> {
        let mut rng = RngHandle::new(source);
        let mut report = RunReport {
            passed: 0,
            precond_violations: 0,
            postcond_violations: 0,
            unique_bugs: 0,
            bugs: Vec::new(),
            invocations_per_test: 0,
            budget: config.budget,
            seed: config.seed,
        };
        let mut seen = HashSet::new();
        for test_index in 0..config.budget {
            let at = |e| EngineError::AtTest { test_index, source: Box::new(e) };
            let mut env =
                self.generate_test(&mut rng, config.max_retries, &mut report.precond_violations).map_err(at)?;
            let generated = rng.trace().len();
            let calls = self.exec_code(&mut env, &mut rng).map_err(at)?;
            let violated = self.check_postconds(&env, &mut rng).map_err(at)?;
            let trace = rng.take_trace();
            report.invocations_per_test = report.invocations_per_test.max(calls);
            if violated.is_empty() {
                report.passed += 1;
                continue;
            }
            report.postcond_violations += 1;
            let trace_hash = hash_trace(&trace);
            seen.insert(trace_hash);
            report.bugs.push(self.bug(
                &env,
                violated,
                trace_hash,
                config.seed,
                test_index,
                trace[generated..].to_vec(),
            ));
        }
        report.unique_bugs = seen.len() as u64;
        Ok(report)
    }

    fn bug(
        &self,
        env: &Env,
        violated: Vec<usize>,
        trace_hash: u64,
        seed: u64,
        test_index: u64,
        replay_draws: Vec<u64>,
    ) -> Bug {
        let collect = |role| {
            self.spec
                .symbols
                .with_role(role)
                .filter_map(|s| env.get(s.slot).map(|v| (s.name.clone(), value_to_json(v))))
                .collect::<IndexMap<_, _>>()
        };
        Bug {
            trace_hash,
            inputs: collect(Role::Input),
            vars: collect(Role::Var),
            outputs: collect(Role::Output),
            violated,
            seed,
            test_index,
            replay_draws,
        }
    }

    /// Re-executes a recorded bug from its serialised inputs and vars and
    /// returns the violated postcondition indices.
    pub fn replay(&self, bug: &Bug) -> Result<Vec<usize>, EngineError> {
        let mut env = Env::new(self.spec.slot_count());
        for sym in self.spec.symbols.iter().filter(|s| matches!(s.role, Role::Input | Role::Var)) {
            let j = bug
                .inputs
                .get(&sym.name)
                .or_else(|| bug.vars.get(&sym.name))
                .ok_or_else(|| EngineError::Replay(format!("bug lacks a value for `{}`", sym.name)))?;
            env.slots[sym.slot] = Some(value_from_json(j).map_err(EngineError::Replay)?);
        }
        let mut rng = RngHandle::new(Box::new(ScriptedSource::new(bug.replay_draws.iter().copied())));
        self.exec_code(&mut env, &mut rng)?;
        self.check_postconds(&env, &mut rng)
    }
}

/// Checks, binds and runs in one call.
pub fn run(
    spec: Arc<TypedSpec>,
    sources: &IndexMap<String, Arc<DataSource>>,
    model: Arc<dyn ModelBackend>,
    config: &RunConfig,
) -> Result<RunReport, EngineError> {
    Harness::new(spec, sources, model, config.stdlib.clone())?.run(config)
}

/// Per-run counters as written to `summary.json`: every [`RunReport`] field
/// except the bug list, which goes to `bugs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub passed: u64,
    pub precond_violations: u64,
    pub postcond_violations: u64,
    pub unique_bugs: u64,
    pub invocations_per_test: u64,
    pub budget: u64,
    pub seed: u64,
}

impl From<&RunReport> for RunSummary {
    fn from(r: &RunReport) -> Self {
        Self {
            passed: r.passed,
            precond_violations: r.precond_violations,
            postcond_violations: r.postcond_violations,
            unique_bugs: r.unique_bugs,
            invocations_per_test: r.invocations_per_test,
            budget: r.budget,
            seed: r.seed,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub spec: String,
    pub runs: Vec<RunSummary>,
}

/// Writes `bugs.jsonl` (one bug per line, runs in order) and `summary.json`
/// into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, spec_name: &str, reports: &[RunReport]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut bugs = std::io::BufWriter::new(std::fs::File::create(dir.join("bugs.jsonl"))?);
    for bug in reports.iter().flat_map(|r| &r.bugs) {
        serde_json::to_writer(&mut bugs, bug)?;
        bugs.write_all(b"\n")?;
    }
    bugs.flush()?;
    let summary = SummaryFile { spec: spec_name.to_string(), runs: reports.iter().map(RunSummary::from).collect() };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)
}
