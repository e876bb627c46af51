//! Report assembly, schema validation and rendering for the command line.
//!
//! A report carries the command name, the effective seed, content digests of
//! every input, the resolved option set, a structured result object and the
//! accumulated warnings. The JSON rendering is validated against the shipped
//! schema on every emit and is byte-identical for identical input and seed;
//! wall-clock timing appears only in the human-readable rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{Map, Value};

/// Shipped schema; every JSON rendering is checked against it before emit.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// FNV-1a 64-bit content digest, hex encoded.
pub fn digest(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub options: BTreeMap<String, String>,
    pub results: Value,
    pub warnings: Vec<String>,
    /// Wall-clock milliseconds; shown in text output, excluded from JSON.
    pub timing_ms: u128,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Report {
        Report {
            command: command.to_string(),
            seed,
            inputs: BTreeMap::new(),
            options: BTreeMap::new(),
            results: Value::Object(Map::new()),
            warnings: Vec::new(),
            timing_ms: 0,
        }
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
    }

    fn to_json(&self) -> Value {
        let mut top = Map::new();
        top.insert("command".into(), Value::String(self.command.clone()));
        top.insert("seed".into(), Value::from(self.seed));
        let string_map = |m: &BTreeMap<String, String>| {
            let mut out = Map::new();
            for (k, v) in m {
                out.insert(k.clone(), Value::String(v.clone()));
            }
            Value::Object(out)
        };
        top.insert("inputs".into(), string_map(&self.inputs));
        top.insert("options".into(), string_map(&self.options));
        top.insert("results".into(), self.results.clone());
        top.insert(
            "warnings".into(),
            Value::Array(self.warnings.iter().cloned().map(Value::String).collect()),
        );
        Value::Object(top)
    }

    /// Validated, pretty-printed JSON form with a trailing newline.
    pub fn render_json(&self) -> Result<String, SchemaError> {
        let value = self.to_json();
        let schema: Value =
            serde_json::from_str(REPORT_SCHEMA).expect("shipped schema is valid JSON");
        validate(&schema, &value, "$")?;
        let mut s = serde_json::to_string_pretty(&value).expect("report serializes");
        s.push('\n');
        Ok(s)
    }

    /// Human-readable rendering with the same content plus timing.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "liesym {}  (seed {})", self.command, self.seed);
        for (k, v) in &self.inputs {
            let _ = writeln!(out, "input {k}: digest {v}");
        }
        for (k, v) in &self.options {
            let _ = writeln!(out, "option {k}: {v}");
        }
        out.push('\n');
        render_value(&mut out, &self.results, 0);
        if !self.warnings.is_empty() {
            out.push('\n');
            for w in &self.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
        }
        let _ = writeln!(out, "\ntime: {} ms", self.timing_ms);
        out
    }
}

/// Indented text form of a result value: objects as `key: value` lines,
/// arrays as `-` items, scalars inline. Arrays whose elements are all
/// scalars collapse to one `[a, b, c]` line so tables stay readable.
fn render_value(out: &mut String, v: &Value, indent: usize) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                if scalar(v) {
                    let _ = writeln!(out, "{pad}{k}: {}", plain(v));
                } else if let Some(row) = inline_row(v) {
                    let _ = writeln!(out, "{pad}{k}: {row}");
                } else {
                    let _ = writeln!(out, "{pad}{k}:");
                    render_value(out, v, indent + 1);
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                if scalar(item) {
                    let _ = writeln!(out, "{pad}- {}", plain(item));
                } else if let Some(row) = inline_row(item) {
                    let _ = writeln!(out, "{pad}- {row}");
                } else {
                    let _ = writeln!(out, "{pad}-");
                    render_value(out, item, indent + 1);
                }
            }
        }
        _ => {
            let _ = writeln!(out, "{pad}{}", plain(v));
        }
    }
}

fn scalar(v: &Value) -> bool {
    !matches!(v, Value::Object(_) | Value::Array(_))
}

/// `Some("[a, b, c]")` when `v` is an array of scalars only.
fn inline_row(v: &Value) -> Option<String> {
    match v {
        Value::Array(items) if items.iter().all(scalar) => {
            let parts: Vec<String> = items.iter().map(plain).collect();
            Some(format!("[{}]", parts.join(", ")))
        }
        _ => None,
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("report violates shipped schema at {path}: {detail}")]
pub struct SchemaError {
    pub path: String,
    pub detail: String,
}

fn fail(path: &str, detail: impl Into<String>) -> Result<(), SchemaError> {
    Err(SchemaError { path: path.to_string(), detail: detail.into() })
}

/// Check `instance` against the subset of JSON Schema the shipped schema
/// uses: `type`, `enum`, `minimum`, `required`, `properties`,
/// `additionalProperties` and `items`.
pub fn validate(schema: &Value, instance: &Value, path: &str) -> Result<(), SchemaError> {
    let obj = match schema.as_object() {
        Some(o) => o,
        None => return Ok(()),
    };
    if let Some(ty) = obj.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let matches_ty = names.iter().any(|t| match *t {
            "object" => instance.is_object(),
            "array" => instance.is_array(),
            "string" => instance.is_string(),
            "integer" => instance.as_i64().is_some() || instance.as_u64().is_some(),
            "number" => instance.is_number(),
            "boolean" => instance.is_boolean(),
            "null" => instance.is_null(),
            _ => false,
        });
        if !matches_ty {
            return fail(path, format!("expected type {names:?}"));
        }
    }
    if let Some(allowed) = obj.get("enum").and_then(Value::as_array) {
        if !allowed.contains(instance) {
            return fail(path, format!("value {instance} not in enum"));
        }
    }
    if let Some(min) = obj.get("minimum").and_then(Value::as_f64) {
        if let Some(x) = instance.as_f64() {
            if x < min {
                return fail(path, format!("value {x} below minimum {min}"));
            }
        }
    }
    if let Some(inst) = instance.as_object() {
        if let Some(required) = obj.get("required").and_then(Value::as_array) {
            for name in required.iter().filter_map(Value::as_str) {
                if !inst.contains_key(name) {
                    return fail(path, format!("missing required property '{name}'"));
                }
            }
        }
        let props = obj.get("properties").and_then(Value::as_object);
        for (k, v) in inst {
            let sub = format!("{path}.{k}");
            if let Some(ps) = props.and_then(|p| p.get(k)) {
                validate(ps, v, &sub)?;
            } else {
                match obj.get("additionalProperties") {
                    Some(Value::Bool(false)) => {
                        return fail(&sub, "property not allowed by schema");
                    }
                    Some(extra) if extra.is_object() => validate(extra, v, &sub)?,
                    _ => {}
                }
            }
        }
    }
    if let (Some(items), Some(arr)) = (obj.get("items"), instance.as_array()) {
        for (i, item) in arr.iter().enumerate() {
            validate(items, item, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}
