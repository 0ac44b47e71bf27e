//! Deterministic report serialisation: JSON with every float written to 17 significant digits,
//! and CSV for value tables.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// `{:.16e}`, which round-trips every finite `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON (two-space indent, keys sorted) with floats in [`format_float`] form.
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Malformed(e.to_string()))?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) if !n.is_f64() => write!(out, "{u}").expect("string write"),
            (_, Some(i), _) if !n.is_f64() => write!(out, "{i}").expect("string write"),
            (_, _, Some(f)) => out.push_str(&format_float(f)),
            _ => out.push_str(&n.to_string()),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, depth + 1);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, depth + 1);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// `m,state,value` rows for `values[m][x]`, with states written by label.
pub fn value_table_csv(values: &[Vec<f64>], labels: &[String]) -> String {
    let mut out = String::from("m,state,value\n");
    for (m, row) in values.iter().enumerate() {
        for (x, v) in row.iter().enumerate() {
            writeln!(out, "{m},{},{}", csv_field(&labels[x]), format_float(*v))
                .expect("string write");
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
