use serde_json::{json, Value};

use crate::commands::Command;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields that vary between otherwise identical runs.
#[cfg(test)]
pub const TIMING_FIELDS: &[&str] = &["wall_clock_seconds"];

pub fn envelope(cmd: Command, seed: u64, digest: &str, config: &Value, result: Value, seconds: f64) -> Value {
    json!({
        "command": cmd.name(),
        "version": VERSION,
        "seed": seed,
        "inputs_digest": digest,
        "config": config,
        "result": result,
        "wall_clock_seconds": seconds,
    })
}

/// Mean and sample standard deviation of the `value` of each run.
pub fn aggregate(seeds: &[u64], runs: Vec<Value>) -> Value {
    let values: Vec<f64> = runs.iter().filter_map(|r| r["value"].as_f64()).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let runs: Vec<Value> = seeds
        .iter()
        .zip(runs)
        .map(|(s, r)| json!({ "seed": s, "result": r }))
        .collect();
    json!({ "value": { "mean": mean, "std": std }, "repeats": runs.len(), "runs": runs })
}

/// Copy of a report with timing fields removed, for comparisons.
#[cfg(test)]
pub fn strip_timing(report: &Value) -> Value {
    let mut r = report.clone();
    if let Value::Object(m) = &mut r {
        for f in TIMING_FIELDS {
            m.remove(*f);
        }
    }
    r
}
