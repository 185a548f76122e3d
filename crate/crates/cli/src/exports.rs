//! Result tables: comma-separated columns under `#`-prefixed metadata.
//!
//! Every table carries the tool version, the sha256 of the scenario file
//! that produced it, and the seed when one was in play, so a table can be
//! traced back to its inputs. Data lines are deterministic for a fixed
//! scenario and seed; the only timestamp lives in the run manifest.

use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub enum Cell {
    /// 12 significant digits, enough to notice any numeric drift.
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v:.11e}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => write!(f, "{s}"),
            Cell::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableMeta {
    pub name: &'static str,
    pub version: &'static str,
    pub scenario_sha: String,
    pub seed: Option<u64>,
    /// Extra `# key: value` header lines, written in order.
    pub extras: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write as _;
        write!(out, "{byte:02x}").unwrap();
    }
    out
}

/// Renders the table to bytes; separated from the file write so tests and
/// hashing see exactly what lands on disk.
pub fn render_table(meta: &TableMeta, columns: &[&str], rows: &[Vec<Cell>]) -> Vec<u8> {
    let mut buf = Vec::new();
    writeln!(buf, "# emlc {}", meta.name).unwrap();
    writeln!(buf, "# version: {}", meta.version).unwrap();
    writeln!(buf, "# scenario_sha256: {}", meta.scenario_sha).unwrap();
    if let Some(seed) = meta.seed {
        writeln!(buf, "# seed: {seed}").unwrap();
    }
    for (key, value) in &meta.extras {
        writeln!(buf, "# {key}: {value}").unwrap();
    }
    writeln!(buf, "# columns: {}", columns.join(",")).unwrap();
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(buf, "{}", line.join(",")).unwrap();
    }
    buf
}

/// Writes the table and returns the sha256 of the written bytes for the
/// manifest.
pub fn write_table(
    path: &Path,
    meta: &TableMeta,
    columns: &[&str],
    rows: &[Vec<Cell>],
) -> std::io::Result<String> {
    let bytes = render_table(meta, columns, rows);
    std::fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}
