//! Byte-stable JSON and CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Number, Value};

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Rounds every float in `v`. Object keys are already sorted by `serde_json`.
pub fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(round12(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

pub fn to_canonical<T: Serialize>(value: &T) -> Result<Value> {
    Ok(canonicalize(serde_json::to_value(value)?))
}

pub fn render(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values always serialize");
    s.push('\n');
    s
}

/// Writes `value` to `path`, or to stdout when `path` is `None`.
pub fn emit(value: &Value, path: Option<&Path>) -> Result<()> {
    let text = render(value);
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Plot rows as `time,entropy,series` CSV.
pub fn plot_csv(rows: &[(f64, f64, &str)]) -> String {
    let mut out = String::from("time,entropy,series\n");
    for (t, e, s) in rows {
        out.push_str(&format!("{},{},{}\n", round12(*t), round12(*e), s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(round12(1.0 / 7.0), 0.142857142857);
        assert_eq!(round12(-1e-20), -1e-20);
    }

    #[test]
    fn canonical_output_is_sorted() {
        let v = serde_json::json!({"b": 1.00000000000001, "a": [0.30000000000000004, 2]});
        assert_eq!(serde_json::to_string(&canonicalize(v)).unwrap(), r#"{"a":[0.3,2],"b":1.0}"#);
    }
}
