//! Flat key-value report, one `key = value` line per entry, in insertion
//! order. Strings are quoted so the file also reads as TOML.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) if v.is_nan() => write!(f, "nan"),
            Value::Float(v) if v.is_infinite() => {
                write!(f, "{}inf", if *v > 0.0 { "" } else { "-" })
            }
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Text(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn float(&mut self, key: impl Into<String>, v: f64) {
        self.entries.push((key.into(), Value::Float(v)));
    }

    pub fn int(&mut self, key: impl Into<String>, v: i64) {
        self.entries.push((key.into(), Value::Int(v)));
    }

    pub fn flag(&mut self, key: impl Into<String>, v: bool) {
        self.entries.push((key.into(), Value::Bool(v)));
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) {
        self.entries.push((key.into(), Value::Text(v.into())));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_float(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn entries(&self) -> &[(String, Value)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// Entries grouped under their first key segment, for reading at a
    /// terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mut group = "";
        for (k, v) in &self.entries {
            let (g, rest) = k.split_once('.').unwrap_or(("", k));
            if g != group {
                writeln!(s, "{}", if g.is_empty() { "general" } else { g }).unwrap();
                group = g;
            }
            let shown = match v {
                Value::Float(f) if f.is_finite() && f.abs() >= 1e-3 && f.abs() < 1e6 => {
                    format!("{f:.4}")
                }
                Value::Float(f) => format!("{f:.4e}"),
                Value::Text(t) => t.clone(),
                other => other.to_string(),
            };
            writeln!(s, "  {rest:<40} {shown}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut report = Report::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let value = if let Some(inner) = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
                Value::Text(inner.replace("\\\"", "\"").replace("\\\\", "\\"))
            } else if v == "true" || v == "false" {
                Value::Bool(v == "true")
            } else if let Ok(i) = v.parse::<i64>() {
                Value::Int(i)
            } else if let Ok(f) = v.parse::<f64>() {
                Value::Float(f)
            } else {
                return Err(format!("line {}: cannot read value `{v}`", n + 1));
            };
            report.entries.push((k.trim().to_string(), value));
        }
        Ok(report)
    }
}
