use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

/// Significant digits kept for every float in a report.
pub const REPORT_DIGITS: usize = 10;

fn round_sig(x: f64) -> f64 {
    format!("{:.*e}", REPORT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in `v` to `REPORT_DIGITS` significant digits, so
/// reports do not depend on the last bits of a reduction order.
pub fn fixed_precision(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            n.as_f64().map(|x| json!(round_sig(x))).unwrap_or(Value::Number(n))
        }
        Value::Array(a) => Value::Array(a.into_iter().map(fixed_precision).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, fixed_precision(v))).collect()),
        other => other,
    }
}

/// One named pass/fail check and the measurements behind it.
#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    /// The property being verified, in words.
    pub check: &'static str,
    pub passed: bool,
    pub details: Value,
}

impl CheckResult {
    pub fn new<T: Serialize>(name: &'static str, check: &'static str, passed: bool, details: &T) -> Self {
        let details = serde_json::to_value(details).expect("report serializes");
        Self { name, check, passed, details }
    }
}

/// A report with the run identity in front of the results.
pub fn envelope(command: &str, config: &RunConfig, checks: &[CheckResult], extra: Value) -> Value {
    json!({
        "command": command,
        "config_hash": config.hash(),
        "passed": checks.iter().all(|c| c.passed),
        "checks": checks,
        "results": extra,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json(path: &Path, v: Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&fixed_precision(v)).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}
