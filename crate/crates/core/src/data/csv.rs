//! Versioned CSV result tables.
//!
//! Layout: `# scatnet-csv v1 <kind>`, then `# inputs-sha256 <hex>`, then the
//! header row and the data rows. Floats use Rust's shortest round-trip
//! formatting, so equal values always print identically.

use std::path::Path;

use super::Manifest;
use crate::error::{Error, Result};

pub const CSV_VERSION: u32 = 1;

pub fn hex(bytes: &[u8]) -> String {
    hex::encode(bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    kind: String,
    manifest: Manifest,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(kind: &str, manifest: Manifest, header: &[&str]) -> Self {
        CsvTable {
            kind: kind.to_owned(),
            manifest,
            header: header.iter().map(|s| (*s).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidInput(format!(
                "{} table row has {} fields, header has {}",
                self.kind,
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let preamble = format!(
            "# scatnet-csv v{CSV_VERSION} {}\n# inputs-sha256 {}\n",
            self.kind,
            hex(&self.manifest)
        );
        let mut w = csv::Writer::from_writer(preamble.into_bytes());
        for r in std::iter::once(&self.header).chain(&self.rows) {
            w.write_record(r).expect("writing to memory cannot fail");
        }
        let bytes = w.into_inner().expect("writing to memory cannot fail");
        String::from_utf8(bytes).expect("records are UTF-8")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}
