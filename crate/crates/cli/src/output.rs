use std::io::Write;

use serde_json::Value;

/// Flattens a JSON value into `(path, value)` pairs; paths join object keys and
/// array indices with dots. Empty containers keep a row of their own.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    walk(value, String::new(), &mut rows);
    rows
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn walk(value: &Value, path: String, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                walk(v, join(&path, k), rows);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, v) in items.iter().enumerate() {
                walk(v, join(&path, &i.to_string()), rows);
            }
        }
        Value::String(s) => rows.push((path, s.clone())),
        Value::Null => rows.push((path, String::new())),
        other => rows.push((path, other.to_string())),
    }
}

pub fn write_csv(value: &Value, out: impl Write) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "value"])?;
    for (path, v) in flatten(value) {
        w.write_record([path, v])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_paths() {
        let rows = flatten(&json!({ "a": { "b": [1, "x"] }, "c": null, "d": [] }));
        let want = [("a.b.0", "1"), ("a.b.1", "x"), ("c", ""), ("d", "[]")];
        let want: Vec<(String, String)> = want.iter().map(|(p, v)| (p.to_string(), v.to_string())).collect();
        assert_eq!(rows, want);
    }
}
