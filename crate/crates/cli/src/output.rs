use anyhow::Result;
use serde::Serialize;

use crate::config::Format;

/// Bumped whenever a column is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;

/// Serializes rows as CSV (header from the field names) or JSON lines.
pub fn encode<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row)?;
            }
            Ok(w.into_inner().map_err(|e| e.into_error())?)
        }
        Format::JsonLines => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, row)?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<f64>,
    }

    #[test]
    fn csv_and_jsonl() {
        let rows = [Row { a: 1, b: Some(0.5) }, Row { a: 2, b: None }];
        let csv = String::from_utf8(encode(&rows, Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "a,b\n1,0.5\n2,\n");
        let jl = String::from_utf8(encode(&rows, Format::JsonLines).unwrap()).unwrap();
        assert_eq!(jl, "{\"a\":1,\"b\":0.5}\n{\"a\":2,\"b\":null}\n");
    }
}
