//! Structured JSON reports with a fixed field order.
//!
//! Floats are rounded to 6 decimals when rendered; non-finite values must be
//! carried as strings (`"inf"`, `"-inf"`) by the types that can hold them.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "bcpnn-report/1";
const DECIMALS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    head: Map<String, Value>,
    sections: Map<String, Value>,
    warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        let mut head = Map::new();
        head.insert("format".into(), REPORT_FORMAT.into());
        head.insert("command".into(), command.into());
        head.insert("seed".into(), seed.map_or(Value::Null, Value::from));
        Report {
            head,
            sections: Map::new(),
            warnings: Vec::new(),
        }
    }

    /// Top-level field, placed before the sections.
    pub fn set(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.head.insert(key.into(), to_value(value)?);
        Ok(())
    }

    pub fn section(&mut self, id: &str, value: impl Serialize) -> Result<()> {
        self.sections.insert(id.into(), to_value(value)?);
        Ok(())
    }

    /// Mark a requested section as not computable for this model or query.
    pub fn unavailable(&mut self, id: &str, reason: &str) {
        let mut m = Map::new();
        m.insert("available".into(), false.into());
        m.insert("reason".into(), reason.into());
        self.sections.insert(id.into(), Value::Object(m));
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn get_section(&self, id: &str) -> Option<&Value> {
        self.sections.get(id)
    }

    pub fn to_value(&self) -> Value {
        let mut doc = self.head.clone();
        doc.insert("sections".into(), Value::Object(self.sections.clone()));
        doc.insert("warnings".into(), self.warnings.clone().into());
        round(&Value::Object(doc))
    }

    /// Pretty-printed document with a trailing newline.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("a JSON value always serialises");
        s.push('\n');
        s
    }
}

fn to_value(v: impl Serialize) -> Result<Value> {
    let v = serde_json::to_value(v)?;
    if contains_null_float(&v) {
        return Err(Error::invariant("report value serialised a non-finite float as null"));
    }
    Ok(v)
}

// serde_json turns NaN and infinities into null; reports never hold a
// genuine null inside numeric arrays, so a null there means a lost float.
fn contains_null_float(v: &Value) -> bool {
    match v {
        Value::Array(xs) => {
            let numeric = xs.iter().any(Value::is_number);
            xs.iter().any(|x| (numeric && x.is_null()) || contains_null_float(x))
        }
        Value::Object(m) => m.values().any(contains_null_float),
        _ => false,
    }
}

pub fn round_f64(x: f64) -> f64 {
    let r = (x * DECIMALS).round() / DECIMALS;
    if r == 0.0 { 0.0 } else { r }
}

/// Copy of `v` with every non-integer number rounded to 6 decimals.
pub fn round(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_f64(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(xs) => Value::Array(xs.iter().map(round).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), round(x))).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_keep_insertion_order_and_round() {
        let mut r = Report::new("explain", Some(7));
        r.set("digest", "abc").unwrap();
        r.section("p11", vec![-2.0000000000000004, 0.39999999999999997]).unwrap();
        r.unavailable("p8", "recurrence disabled");
        let text = r.render();
        let keys: Vec<&str> = ["\"format\"", "\"command\"", "\"seed\"", "\"digest\"", "\"sections\""]
            .into_iter()
            .collect();
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("-2.0,") && text.contains("0.4\n"));
        assert!(text.contains("\"reason\": \"recurrence disabled\""));
    }

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(round_f64(-1e-9).to_string(), "0");
    }

    #[test]
    fn lost_infinity_is_an_invariant_error() {
        let mut r = Report::new("x", None);
        assert!(r.section("bad", vec![1.0, f64::INFINITY]).is_err());
    }
}
