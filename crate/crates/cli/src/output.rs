//! JSON and CSV rendering of reports.

use serde_json::{Map, Value};

use crate::{CliResult, Format};

/// Version of the CSV layouts, written in the leading comment line.
pub const CSV_VERSION: u32 = 1;

pub struct Report {
    pub command: &'static str,
    pub input: Option<String>,
    pub seed: u64,
    pub knobs: Map<String, Value>,
    pub result: Value,
}

impl Report {
    fn into_value(self) -> Value {
        let mut obj = match self.result {
            Value::Object(map) => map,
            other => {
                let mut map = Map::new();
                map.insert("result".into(), other);
                map
            }
        };
        let mut run = Map::new();
        run.insert("command".into(), self.command.into());
        run.insert("input".into(), self.input.map_or(Value::Null, Value::from));
        run.insert("seed".into(), self.seed.into());
        run.insert("knobs".into(), Value::Object(self.knobs));
        obj.insert("run".into(), Value::Object(run));
        Value::Object(obj)
    }
}

pub fn render(report: Report, format: Format) -> CliResult<String> {
    let command = report.command;
    let value = report.into_value();
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&value).expect("JSON values serialize");
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut cells = Vec::new();
            flatten("", &value, &mut cells);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(cells.iter().map(|(k, _)| k))?;
            w.write_record(cells.iter().map(|(_, v)| v))?;
            let body = String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8");
            Ok(format!("{}{body}", csv_comment(command)))
        }
    }
}

pub fn csv_comment(command: &str) -> String {
    format!("# tally-csv v{CSV_VERSION} {command}\n")
}

/// Dotted paths to scalar leaves, in key order; array elements are indexed.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// `10^l` written as `d.dddddde±k`, exact in range where `f64` would
/// overflow.
pub fn decimal_from_log10(l: f64) -> Option<String> {
    if !l.is_finite() {
        return None;
    }
    let mut exp = l.floor();
    let mut mant = 10f64.powf(l - exp);
    if format!("{mant:.6}").starts_with("10") {
        mant /= 10.0;
        exp += 1.0;
    }
    Some(format!("{mant:.6}e{}", exp as i64))
}
