//! CSV tables with a `#` metadata block, and run manifests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ReportError>;

/// A table of already-formatted cells. Metadata lines precede the header as
/// `# key: value`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { metadata: Vec::new(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(ReportError::Malformed(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses column `name` of every row as a number.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column(name).ok_or_else(|| ReportError::Malformed(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| r[i].parse::<f64>().map_err(|e| ReportError::Malformed(format!("{name}: {e}"))))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            if k.contains(':') || k.contains('\n') || v.contains('\n') {
                return Err(ReportError::Malformed(format!("metadata entry {k:?} cannot be written on one line")));
            }
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| ReportError::Malformed(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| ReportError::Malformed(e.to_string()))?);
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut rest = text;
        while let Some(line) = rest.strip_prefix("# ") {
            let end = line.find('\n').unwrap_or(line.len());
            let entry = line[..end].trim_end_matches('\r');
            let (k, v) = entry
                .split_once(": ")
                .ok_or_else(|| ReportError::Malformed(format!("metadata line without ': ': {entry:?}")))?;
            metadata.push((k.to_string(), v.to_string()));
            rest = &line[(end + 1).min(line.len())..];
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
        let columns = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { metadata, columns, rows })
    }
}

/// Shortest round-trippable text for a float.
pub fn fmt(x: f64) -> String {
    format!("{x:e}")
}

/// SHA-256 of the canonical JSON form of `value`, as hex.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value sorts object keys, which makes the text canonical
    let canonical = serde_json::to_string(&serde_json::to_value(value)?)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Everything needed to re-run a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub parameters: serde_json::Value,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}
