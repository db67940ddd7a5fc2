//! Aggregation of run summaries across seeds.

use indexmap::IndexMap;

use crate::engine::SummaryFile;

#[derive(Debug, Clone, PartialEq)]
pub struct SpecAggregate {
    pub spec: String,
    pub runs: usize,
    /// Arithmetic mean of per-run unique bug counts.
    pub mean_unique_bugs: f64,
    pub runs_with_bugs: usize,
}

impl SpecAggregate {
    pub fn violated(&self) -> bool {
        self.runs_with_bugs > 0
    }
}

/// Groups runs by spec name, keeping first-seen order.
pub fn aggregate(files: &[SummaryFile]) -> Vec<SpecAggregate> {
    let mut by_spec: IndexMap<&str, Vec<u64>> = IndexMap::new();
    for f in files {
        by_spec.entry(&f.spec).or_default().extend(f.runs.iter().map(|r| r.unique_bugs));
    }
    by_spec
        .into_iter()
        .map(|(spec, counts)| {
            let total: u64 = counts.iter().sum();
            SpecAggregate {
                spec: spec.to_string(),
                runs: counts.len(),
                mean_unique_bugs: if counts.is_empty() { 0.0 } else { total as f64 / counts.len() as f64 },
                runs_with_bugs: counts.iter().filter(|&&c| c > 0).count(),
            }
        })
        .collect()
}

pub fn render_table(rows: &[SpecAggregate]) -> String {
    let width = rows.iter().map(|r| r.spec.len()).max().unwrap_or(0).max(4);
    let mut out =
        format!("{:<width$}  {:>4}  {:>16}  {:>14}  status\n", "spec", "runs", "mean_unique_bugs", "runs_with_bugs");
    for r in rows {
        let status = if r.violated() { "violated" } else { "not violated" };
        out.push_str(&format!(
            "{:<width$}  {:>4}  {:>16.1}  {:>14}  {status}\n",
            r.spec, r.runs, r.mean_unique_bugs, r.runs_with_bugs
        ));
    }
    out
}
