//! CSV and JSON rendering with a fixed number of significant digits.

use serde_json::{Map, Number, Value};

/// One field of a table row.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Text(String),
}

/// Rows under stable column names.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, digits: usize) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            let fields = row.iter().map(|c| match c {
                Cell::Num(x) => format_number(*x, digits),
                Cell::Text(s) => s.clone(),
            });
            w.write_record(fields).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Array of objects keyed by the column names.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .header
                        .iter()
                        .zip(row)
                        .map(|(h, c)| {
                            let v = match c {
                                Cell::Num(x) => number_value(*x),
                                Cell::Text(s) => Value::String(s.clone()),
                            };
                            ((*h).to_owned(), v)
                        })
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Round to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("formatted float")
}

/// Shortest decimal representation of `x` rounded to `digits` significant
/// digits; `inf`, `-inf` and `nan` for non-finite values.
pub fn format_number(x: f64, digits: usize) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        let r = round_sig(x, digits);
        if r != 0.0 && !(1e-4..1e15).contains(&r.abs()) {
            format!("{r:e}")
        } else {
            format!("{r}")
        }
    }
}

/// JSON numbers for finite values, the strings `"inf"`/`"-inf"` otherwise.
fn number_value(x: f64) -> Value {
    match Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None => Value::String(format_number(x, 1)),
    }
}

fn round_value(v: &Value, digits: usize) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            number_value(round_sig(n.as_f64().expect("f64 number"), digits))
        }
        Value::Array(a) => Value::Array(a.iter().map(|x| round_value(x, digits)).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, x)| (k.clone(), round_value(x, digits))).collect()),
        other => other.clone(),
    }
}

/// Pretty-printed JSON with every float rounded, followed by a newline.
pub fn to_json_text(v: &Value, digits: usize) -> String {
    let mut s = serde_json::to_string_pretty(&round_value(v, digits)).expect("json value");
    s.push('\n');
    s
}
