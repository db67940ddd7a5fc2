//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use nomos_core::engine::{write_outputs, SummaryFile};
use nomos_core::models::{load_model, Record};
use nomos_core::report::{aggregate, render_table};
use nomos_core::rng::{ConstantSource, DrawSource, SplitMix64};
use nomos_core::{Harness, RunConfig, RunReport};
use serde_json::Value as Json;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    body: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { name: "corpus parse/check/round-trip", limit: Some(Duration::from_secs(1)), body: corpus },
        Criterion { name: "planted violation detection", limit: Some(Duration::from_secs(5)), body: planted },
        Criterion { name: "soundness on monotone tree", limit: Some(Duration::from_secs(10)), body: soundness },
        Criterion { name: "20-safety episodic property", limit: Some(Duration::from_secs(30)), body: episodic },
        Criterion { name: "generation accounting", limit: None, body: accounting },
        Criterion { name: "determinism and dedup", limit: None, body: determinism },
        Criterion { name: "report shape", limit: None, body: report_shape },
        Criterion { name: "numerical backend oracles", limit: None, body: backend_oracles },
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.body))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let took = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if took > limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:<32} {detail} [{took:.2?}]", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<32} {why} [{took:.2?}]", c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn corpus() -> Outcome {
    let registry = nomos_core::FunctionRegistry::core();
    let names = corpus_names();
    let figure_specs = ["compas_felony_inc", "mnist_blur", "hotel_neg2", "lunar_relax"];
    for f in figure_specs {
        ensure!(names.iter().any(|n| n == f), "missing corpus spec {f}");
    }
    let monotonicity = names.iter().filter(|n| n.starts_with("compas_")).count();
    ensure!(monotonicity >= 7, "only {monotonicity} monotonicity specs");
    for name in &names {
        let src = read_spec(name);
        let spec = nomos_core::parse(&src).map_err(|e| format!("{name}: {}", e.message()))?;
        let sources = bind_all(&src, &source(data_file_for(name)));
        let env = nomos_core::sema::schema_env(sources.iter());
        let typed = nomos_core::sema::check_with_schemas(&spec, &registry, &env)
            .map_err(|d| format!("{name}: {} errors, first {}", d.len(), d[0].render(name)))?;
        ensure!(typed.warnings.is_empty(), "{name}: {}", typed.warnings[0].render(name));
        let printed = nomos_core::pretty_print(&spec);
        let reparsed = nomos_core::parse(&printed).map_err(|e| format!("{name} reprint: {}", e.message()))?;
        ensure!(reparsed == spec, "{name}: pretty-print does not round-trip");
        ensure!(nomos_core::pretty_print(&reparsed) == printed, "{name}: pretty-print not idempotent");
    }
    Ok(format!("{} specs, {monotonicity} monotonicity", names.len()))
}

/// Independent tree evaluator over the raw JSON document.
fn dt_oracle(doc: &Json, x: &[f64]) -> i64 {
    let nodes = doc["nodes"].as_array().unwrap();
    let mut i = doc.get("root").and_then(Json::as_u64).unwrap_or(0) as usize;
    loop {
        let n = &nodes[i];
        if let Some(c) = n.get("class") {
            return c.as_i64().unwrap();
        }
        let f = n["feature"].as_u64().unwrap() as usize;
        i = if x[f] <= n["threshold"].as_f64().unwrap() { &n["left"] } else { &n["right"] }.as_u64().unwrap() as usize;
    }
}

fn json_fixture(name: &str) -> Json {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// Feature rows of `compas.csv`, label dropped, read without the library.
fn compas_rows() -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(fixture("compas.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split(',').take(7).map(|c| c.parse().unwrap()).collect()).collect()
}

/// Every (row, raised felony count) pair the felony spec can generate whose
/// prediction drops.
fn felony_violations(doc: &Json) -> BTreeSet<(Vec<i64>, i64)> {
    let mut out = BTreeSet::new();
    for row in compas_rows() {
        for delta in 1..=10 {
            let v2 = row[1] + delta as f64;
            if v2 > 20.0 {
                continue;
            }
            let mut raised = row.clone();
            raised[1] = v2;
            if dt_oracle(doc, &row) > dt_oracle(doc, &raised) {
                out.insert((row.iter().map(|v| *v as i64).collect(), v2 as i64));
            }
        }
    }
    out
}

fn felony_harness(model_file: &str) -> Harness {
    let (spec, sources) = corpus_spec("compas_felony_inc");
    Harness::new(spec, &sources, model(model_file), Default::default()).unwrap()
}

fn config(budget: u64, seed: u64) -> RunConfig {
    RunConfig { budget, seed, ..RunConfig::default() }
}

fn planted() -> Outcome {
    let oracle = felony_violations(&json_fixture("compas_dt_nonmonotone.json"));
    ensure!(!oracle.is_empty(), "brute force finds no violating pair");
    let harness = felony_harness("compas_dt_nonmonotone.json");
    let report = harness.run(&config(1000, 0)).map_err(|e| e.to_string())?;
    ensure!(report.unique_bugs >= 1, "no bugs found");
    for bug in &report.bugs {
        let replayed = harness.replay(bug).map_err(|e| e.to_string())?;
        ensure!(
            replayed == bug.violated,
            "test {} replays to {replayed:?}, recorded {:?}",
            bug.test_index,
            bug.violated
        );
        let row: Vec<i64> =
            bug.inputs["x1"]["values"].as_array().unwrap().iter().take(7).map(|v| v.as_i64().unwrap()).collect();
        let v2 = bug.vars["v2"].as_i64().unwrap();
        ensure!(oracle.contains(&(row.clone(), v2)), "bug {row:?} -> {v2} is not a brute-force violation");
    }
    Ok(format!(
        "unique_bugs={} postcond_violations={} oracle pairs={}",
        report.unique_bugs,
        report.postcond_violations,
        oracle.len()
    ))
}

fn soundness() -> Outcome {
    let oracle = felony_violations(&json_fixture("compas_dt_monotone.json"));
    ensure!(oracle.is_empty(), "brute force finds {} violating pairs", oracle.len());
    let report = felony_harness("compas_dt_monotone.json").run(&config(5000, 0)).map_err(|e| e.to_string())?;
    ensure!(report.postcond_violations == 0, "{} false positives", report.postcond_violations);
    Ok(format!("passed={} brute-force violating pairs=0", report.passed))
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Lander {
    terrain: i64,
    x: i64,
    vy: i64,
    fuel: i64,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Episode {
    Flying(Lander),
    Done(bool),
}

/// Lander dynamics written out from the model document.
struct LanderOracle {
    gravity: i64,
    full: i64,
    partial: i64,
    success: Vec<f64>,
    safe_v: i64,
    max_steps: u32,
    vy_min: i64,
    vy_max: i64,
    height_max: i64,
    actions: Vec<u8>,
}

impl LanderOracle {
    fn from_doc(doc: &Json) -> Self {
        let env = &doc["env"];
        let pol = &doc["policy"];
        let i = |j: &Json| j.as_i64().unwrap();
        Self {
            gravity: i(&env["gravity"]),
            full: i(&env["thrust_full"]),
            partial: i(&env["thrust_partial"]),
            success: env["thrust_success"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect(),
            safe_v: i(&env["safe_v"]),
            max_steps: env["max_steps"].as_u64().unwrap() as u32,
            vy_min: i(&pol["vy_min"]),
            vy_max: i(&pol["vy_max"]),
            height_max: i(&pol["height_max"]),
            actions: pol["actions"].as_str().unwrap().bytes().collect(),
        }
    }

    fn start(&self, s: Lander) -> Episode {
        if s.x <= s.terrain {
            Episode::Done(s.vy.abs() <= self.safe_v)
        } else {
            Episode::Flying(s)
        }
    }

    /// Success probability if `s` thrusts this step.
    fn thrust_prob(&self, s: &Lander) -> Option<f64> {
        if s.fuel <= 0 {
            return None;
        }
        let v = s.vy.clamp(self.vy_min, self.vy_max) - self.vy_min;
        let h = (s.x - s.terrain).clamp(0, self.height_max);
        let thrust = self.actions[(v * (self.height_max + 1) + h) as usize] == b'T';
        thrust.then(|| self.success[(s.vy.unsigned_abs() as usize).min(self.success.len() - 1)])
    }

    fn advance(&self, e: Episode, u: f64) -> Episode {
        let Episode::Flying(mut s) = e else { return e };
        match self.thrust_prob(&s) {
            Some(p) => {
                s.fuel -= 1;
                s.vy += if u < p { self.full } else { self.partial } - self.gravity;
            }
            None => s.vy -= self.gravity,
        }
        s.x += s.vy;
        self.start(s)
    }

    /// True if some shared draw sequence makes `a` win while `b` loses.
    fn dominance_broken(
        &self,
        a: Episode,
        b: Episode,
        step: u32,
        memo: &mut HashMap<(Episode, Episode, u32), bool>,
    ) -> bool {
        if step == self.max_steps {
            let win = |e| matches!(e, Episode::Done(true));
            return win(a) && !win(b);
        }
        if let (Episode::Done(wa), Episode::Done(wb)) = (a, b) {
            return wa && !wb;
        }
        if let Some(&r) = memo.get(&(a, b, step)) {
            return r;
        }
        let mut cuts = vec![0.0, 1.0];
        for e in [a, b] {
            if let Episode::Flying(s) = e {
                cuts.extend(self.thrust_prob(&s).filter(|p| *p > 0.0 && *p < 1.0));
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let r = cuts.windows(2).any(|w| {
            let u = (w[0] + w[1]) / 2.0;
            self.dominance_broken(self.advance(a, u), self.advance(b, u), step + 1, memo)
        });
        memo.insert((a, b, step), r);
        r
    }
}

fn lander_starts() -> Vec<Lander> {
    let text = std::fs::read_to_string(fixture("lander_states.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let c: Vec<i64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            Lander { terrain: c[0], x: c[1], vy: c[2], fuel: c[3] }
        })
        .collect()
}

/// Start states from which some draw sequence wins the original episode and
/// loses the one over lowered terrain.
fn relax_counterexamples(doc: &Json) -> usize {
    let oracle = LanderOracle::from_doc(doc);
    let mut memo = HashMap::new();
    lander_starts()
        .into_iter()
        .filter(|s| {
            let relaxed = Lander { terrain: (s.terrain - 1).max(0), ..*s };
            oracle.dominance_broken(oracle.start(*s), oracle.start(relaxed), 0, &mut memo)
        })
        .count()
}

fn episodic() -> Outcome {
    let safe_cex = relax_counterexamples(&json_fixture("lander_safe.json"));
    ensure!(safe_cex == 0, "verifier finds {safe_cex} unsafe start states for the safe policy");
    let buggy_cex = relax_counterexamples(&json_fixture("lander_buggy.json"));
    ensure!(buggy_cex > 0, "verifier finds no counterexample for the buggy policy");

    let (spec, sources) = corpus_spec("lunar_relax");
    let run = |file: &str| -> Result<RunReport, String> {
        let model = load_model(&fixture(file)).map_err(|e| e.to_string())?;
        Harness::new(Arc::clone(&spec), &sources, model, Default::default())
            .and_then(|h| h.run(&config(500, 0)))
            .map_err(|e| e.to_string())
    };
    let buggy = run("lander_buggy.json")?;
    let safe = run("lander_safe.json")?;
    ensure!(buggy.unique_bugs >= 1, "buggy policy: no bugs");
    ensure!(safe.postcond_violations == 0, "safe policy: {} violations", safe.postcond_violations);
    for (name, r) in [("buggy", &buggy), ("safe", &safe)] {
        ensure!(r.invocations_per_test == 20, "{name}: invocations_per_test={}", r.invocations_per_test);
    }
    Ok(format!(
        "buggy unique_bugs={} (verifier: {buggy_cex} unsafe starts), safe violations=0 (verified), invocations=20",
        buggy.unique_bugs
    ))
}

/// Counts raw draws as they pass through.
struct Counting {
    inner: SplitMix64,
    draws: Arc<AtomicU64>,
}

impl DrawSource for Counting {
    fn next_u64(&mut self) -> u64 {
        self.draws.fetch_add(1, Ordering::Relaxed);
        self.inner.next_u64()
    }
}

fn accounting() -> Outcome {
    let harness = felony_harness("compas_dt_nonmonotone.json");
    let src = read_spec("compas_felony_inc");
    ensure!(src.contains("requires v2 <= 20;"), "felony spec lacks the v2 <= 20 precondition");
    let mut rejected = 0;
    for budget in [100, 1000, 5000] {
        for seed in [0, 1, 2] {
            let draws = Arc::new(AtomicU64::new(0));
            let source = Counting { inner: SplitMix64::new(seed), draws: Arc::clone(&draws) };
            let r = harness.run_with_source(&config(budget, seed), Box::new(source)).map_err(|e| e.to_string())?;
            // One row index and one randInt per candidate; predict draws nothing.
            let attempts = draws.load(Ordering::Relaxed) / 2;
            ensure!(
                attempts == budget + r.precond_violations,
                "budget {budget} seed {seed}: {attempts} attempts vs {} + {}",
                budget,
                r.precond_violations
            );
            ensure!(r.passed + r.postcond_violations == budget, "budget {budget} seed {seed}: passed+violations");
            rejected += r.precond_violations;
        }
    }
    ensure!(rejected > 0, "precondition never rejected a candidate");
    Ok(format!("9 runs, {rejected} rejected candidates in total"))
}

fn jsonl(reports: &[RunReport]) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), "s", reports).unwrap();
    std::fs::read(dir.path().join("bugs.jsonl")).unwrap()
}

fn determinism() -> Outcome {
    let harness = felony_harness("compas_dt_nonmonotone.json");
    let a = harness.run(&config(1000, 7)).map_err(|e| e.to_string())?;
    let b = felony_harness("compas_dt_nonmonotone.json").run(&config(1000, 7)).map_err(|e| e.to_string())?;
    let (ja, jb) = (jsonl(&[a]), jsonl(&[b]));
    ensure!(!ja.is_empty() && ja == jb, "bugs.jsonl differs between identical runs");

    let mut gen = SplitMix64::new(99);
    let constant = (0..10_000)
        .map(|_| gen.next_u64())
        .find(|&c| {
            harness.run_with_source(&config(5, 0), Box::new(ConstantSource(c))).is_ok_and(|r| r.postcond_violations > 0)
        })
        .ok_or("no constant draw produces a violation")?;
    for budget in [1, 10, 100, 1000] {
        let r = harness.run_with_source(&config(budget, 0), Box::new(ConstantSource(constant))).unwrap();
        ensure!(r.postcond_violations == budget, "constant source: {} of {budget} violate", r.postcond_violations);
        ensure!(r.unique_bugs == 1, "constant source, budget {budget}: unique_bugs={}", r.unique_bugs);
    }
    Ok(format!("{} bytes identical; constant {constant:#x} gives 1 unique bug", ja.len()))
}

fn report_shape() -> Outcome {
    let harness = felony_harness("compas_dt_nonmonotone.json");
    let dir = tempfile::tempdir().unwrap();
    let mut counts = Vec::new();
    let mut files = Vec::new();
    for seed in 0..10 {
        let r = harness.run(&config(200, seed)).map_err(|e| e.to_string())?;
        counts.push(r.unique_bugs);
        let out = dir.path().join(format!("run{seed}"));
        write_outputs(&out, "compas_felony_inc", &[r]).unwrap();
        let text = std::fs::read_to_string(out.join("summary.json")).unwrap();
        files.push(serde_json::from_str::<SummaryFile>(&text).map_err(|e| e.to_string())?);
    }
    let table = render_table(&aggregate(&files));
    let line = table.lines().nth(1).ok_or("table has no data row")?;
    let mean = counts.iter().sum::<u64>() as f64 / 10.0;
    let cols: Vec<&str> = line.split_whitespace().collect();
    ensure!(cols[0] == "compas_felony_inc" && cols[1] == "10", "bad row {line:?}");
    ensure!(cols[2] == format!("{mean:.1}"), "mean column {} but counts {counts:?}", cols[2]);
    let decimals = cols[2].split_once('.').map(|(_, d)| d.len());
    ensure!(decimals == Some(1), "mean not printed to one decimal: {}", cols[2]);
    ensure!(line.ends_with(" violated"), "status column wrong: {line:?}");
    Ok(format!("mean_unique_bugs={} over 10 seeds", cols[2]))
}

fn mlp_oracle(doc: &Json, x: &[f64]) -> Vec<f64> {
    let layers = doc["layers"].as_array().unwrap();
    let mut h = x.to_vec();
    for (li, l) in layers.iter().enumerate() {
        let n_in = l["inputs"].as_u64().unwrap() as usize;
        let n_out = l["outputs"].as_u64().unwrap() as usize;
        let w = l["weights"].as_array().unwrap();
        let b = l["bias"].as_array().unwrap();
        let mut next = vec![0.0; n_out];
        for o in 0..n_out {
            let mut acc = b[o].as_f64().unwrap();
            for i in 0..n_in {
                acc += w[o * n_in + i].as_f64().unwrap() * h[i];
            }
            next[o] = if li + 1 < layers.len() && acc < 0.0 { 0.0 } else { acc };
        }
        h = next;
    }
    h
}

fn argmax(v: &[f64]) -> i64 {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best as i64
}

fn scale_last_layer(doc: &Json, c: f64) -> Json {
    let mut d = doc.clone();
    let last = d["layers"].as_array_mut().unwrap().last_mut().unwrap();
    for key in ["weights", "bias"] {
        for v in last[key].as_array_mut().unwrap() {
            *v = Json::from(v.as_f64().unwrap() * c);
        }
    }
    d
}

fn backend_oracles() -> Outcome {
    let mut checked = 0;
    // Trees: every fixture row plus a dense synthetic grid around the thresholds.
    let mut grid = compas_rows();
    for age in [18, 30, 31, 45, 70] {
        for fel in 0..=25 {
            for pri in 0..=4 {
                grid.push(vec![age as f64, fel as f64, 1.0, pri as f64, 0.0, 1.0, 0.0]);
            }
        }
    }
    for file in ["compas_dt_nonmonotone.json", "compas_dt_monotone.json"] {
        let doc = json_fixture(file);
        let m = model(file);
        let data = source("compas.csv");
        for (i, row) in data.rows().iter().enumerate() {
            ensure!(m.predict(row).unwrap() == dt_oracle(&doc, &grid[i]), "{file}: fixture row {i}");
            checked += 1;
        }
        for x in &grid {
            let rec = tabular(x);
            ensure!(m.predict(&rec).unwrap() == dt_oracle(&doc, x), "{file}: {x:?}");
            checked += 1;
        }
    }
    // Networks: pinned fixture rows, and positive rescaling of the output layer.
    for (file, data) in
        [("compas_mlp.json", "compas.csv"), ("grid_mlp.json", "mnist_grid.csv"), ("grid_mlp.json", "speech_grid.csv")]
    {
        let doc = json_fixture(file);
        let m = model(file);
        for row in source(data).rows() {
            let x = row.flatten().unwrap();
            let want = argmax(&mlp_oracle(&doc, &x));
            ensure!(m.predict(row).unwrap() == want, "{file} on {data}: class differs from oracle");
            for c in [1e-3, 0.5, 2.0, 1e3] {
                let scaled = nomos_core::models::ModelFile::parse(&scale_last_layer(&doc, c).to_string())
                    .unwrap()
                    .into_backend();
                ensure!(scaled.predict(row).unwrap() == want, "{file}: scaling by {c} changes a class");
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} predictions agree"))
}

fn tabular(x: &[f64]) -> Record {
    let names = ["age", "felonies", "misdemeanors", "priors", "others", "is_recid", "is_vrecid"];
    let j = serde_json::json!({"kind": "tabular", "features": names, "values": x.iter().map(|v| *v as i64).collect::<Vec<_>>()});
    Record::from_json(&j).unwrap()
}
