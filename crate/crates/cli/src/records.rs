use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Failure;

/// One JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::Data)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Data)?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", path.display(), i + 1))
            .map_err(Failure::Data)?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Data(anyhow!("writing {}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Failure::Internal(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// A JSON object record with an `id` and arbitrary other fields.
pub struct Record {
    pub id: String,
    pub fields: Map<String, Value>,
}

impl Record {
    pub fn str_field(&self, name: &str) -> Result<&str, Failure> {
        self.fields
            .get(name)
            .and_then(Value::as_str)
            .ok_or_else(|| {
                Failure::Data(anyhow!("record `{}` has no string field `{name}`", self.id))
            })
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Record>, Failure> {
    let values: Vec<Value> = read_jsonl(path)?;
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let Value::Object(fields) = v else {
                return Err(Failure::Data(anyhow!(
                    "{} line {}: not an object",
                    path.display(),
                    i + 1
                )));
            };
            let id = match fields.get("id") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => {
                    return Err(Failure::Data(anyhow!(
                        "{} line {}: missing `id`",
                        path.display(),
                        i + 1
                    )))
                }
            };
            Ok(Record { id, fields })
        })
        .collect()
}
