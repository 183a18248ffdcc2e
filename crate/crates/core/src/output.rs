//! Plain-text table output.
//!
//! Every table starts with `#`-prefixed metadata lines carrying the full
//! resolved run configuration (as TOML between marker lines, so it can be
//! parsed back verbatim), followed by a column declaration and
//! whitespace-separated numeric rows. Floats are printed in Rust's shortest
//! round-trip form; identical runs produce byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const CONFIG_BEGIN: &str = "# --- config ---";
pub const CONFIG_END: &str = "# --- end config ---";

/// FNV-1a hash of the canonical config text; stamped into every table.
pub fn config_hash(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// One output table: column names plus numeric rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Write the table with its metadata header.
    pub fn write<W: Write>(&self, mut out: W, config_toml: &str, hash: u64) -> Result<()> {
        writeln!(out, "{}", CONFIG_BEGIN)?;
        for line in config_toml.lines() {
            writeln!(out, "# {}", line)?;
        }
        writeln!(out, "{}", CONFIG_END)?;
        writeln!(out, "# config_hash = {:016x}", hash)?;
        writeln!(out, "# columns: {}", self.columns.join(" "))?;
        let mut buf = String::new();
        for row in &self.rows {
            buf.clear();
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    buf.push(' ');
                }
                buf.push_str(&format!("{}", v));
            }
            writeln!(out, "{}", buf)?;
        }
        Ok(())
    }

    pub fn write_path(&self, path: &Path, config_toml: &str, hash: u64) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file), config_toml, hash)
    }
}

/// Parsed-back table contents (for round-trip checks and downstream use).
#[derive(Debug, Clone)]
pub struct ParsedTable {
    pub config_toml: String,
    pub config_hash: Option<u64>,
    pub table: Table,
}

/// Read a table written by [`Table::write`].
pub fn read_table(text: &str) -> Result<ParsedTable> {
    let mut config_lines: Vec<&str> = Vec::new();
    let mut in_config = false;
    let mut hash = None;
    let mut columns: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if line == CONFIG_BEGIN {
            in_config = true;
            continue;
        }
        if line == CONFIG_END {
            in_config = false;
            continue;
        }
        if in_config {
            config_lines.push(line.strip_prefix("# ").unwrap_or(line));
            continue;
        }
        if let Some(rest) = line.strip_prefix("# config_hash = ") {
            hash = u64::from_str_radix(rest.trim(), 16).ok();
            continue;
        }
        if let Some(rest) = line.strip_prefix("# columns: ") {
            columns = rest.split_whitespace().map(|s| s.to_string()).collect();
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(|f| f.parse::<f64>()).collect();
        match row {
            Ok(r) => rows.push(r),
            Err(_) => {
                return Err(crate::error::SimError::Config(format!(
                    "unparsable table row: {:?}",
                    line
                )))
            }
        }
    }
    Ok(ParsedTable {
        config_toml: config_lines.join("\n"),
        config_hash: hash,
        table: Table {
            columns,
            rows,
        },
    })
}
