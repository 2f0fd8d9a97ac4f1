use serde::Serialize;
use serde_json::Value;

use crate::Fail;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

fn fields<T: Serialize>(record: &T) -> Result<Vec<(String, Value)>, Fail> {
    match serde_json::to_value(record).map_err(|e| Fail::config(format!("serialize: {e}")))? {
        Value::Object(map) => Ok(map.into_iter().collect()),
        other => Ok(vec![("value".into(), other)]),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

fn csv_line(cells: impl IntoIterator<Item = String>) -> Result<String, Fail> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(cells).map_err(|e| Fail::config(format!("csv: {e}")))?;
    let bytes = w.into_inner().map_err(|e| Fail::config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 cells"))
}

/// Column names of `record` as a CSV header line.
pub fn csv_header<T: Serialize>(record: &T) -> Result<String, Fail> {
    csv_line(fields(record)?.into_iter().map(|(k, _)| k))
}

/// One record as a line (JSON, CSV row without header, or `key=value` text).
pub fn line<T: Serialize>(record: &T, format: Format) -> Result<String, Fail> {
    match format {
        Format::Json => Ok(serde_json::to_string(record).map_err(|e| Fail::config(format!("serialize: {e}")))? + "\n"),
        Format::Csv => csv_line(fields(record)?.iter().map(|(_, v)| cell(v))),
        Format::Text => {
            let parts: Vec<String> = fields(record)?
                .iter()
                .map(|(k, v)| format!("{k}={}", if v.is_null() { "-".into() } else { cell(v) }))
                .collect();
            Ok(parts.join(" ") + "\n")
        }
    }
}

/// A complete document: CSV gets a header, text gets one `key: value` line
/// per field.
pub fn document<T: Serialize>(records: &[T], format: Format) -> Result<String, Fail> {
    let mut out = String::new();
    match format {
        Format::Csv => {
            if let Some(first) = records.first() {
                out += &csv_header(first)?;
            }
            for r in records {
                out += &line(r, format)?;
            }
        }
        Format::Json => {
            for r in records {
                out += &line(r, format)?;
            }
        }
        Format::Text => {
            for (i, r) in records.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let f = fields(r)?;
                let width = f.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in f {
                    let shown = if v.is_null() { "-".to_string() } else { cell(&v) };
                    out += &format!("{k:<width$}  {shown}\n");
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<f64>,
        c: Vec<u8>,
        s: &'static str,
    }

    #[test]
    fn formats() {
        let r = Row { a: 1, b: None, c: vec![1, 2], s: "x,y" };
        assert_eq!(line(&r, Format::Json).unwrap(), "{\"a\":1,\"b\":null,\"c\":[1,2],\"s\":\"x,y\"}\n");
        assert_eq!(document(&[r], Format::Csv).unwrap(), "a,b,c,s\n1,,1;2,\"x,y\"\n");
        let r = Row { a: 1, b: Some(0.5), c: vec![], s: "z" };
        assert_eq!(line(&r, Format::Text).unwrap(), "a=1 b=0.5 c= s=z\n");
    }
}
