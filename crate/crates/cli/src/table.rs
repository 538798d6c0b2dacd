use std::path::Path;

use crate::error::CliError;

/// Version of every CSV layout written by the runner.
pub const SCHEMA_VERSION: u32 = 1;

/// A named CSV table held as text fields, so numbers keep the exact
/// formatting of the writer that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Parses CSV produced by one of the library writers.
    pub fn from_csv(name: &str, bytes: &[u8]) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
        let header = reader.headers()?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            name: name.into(),
            header,
            rows,
        })
    }

    /// Runs a library writer into memory and parses the result.
    pub fn capture(
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<Self, CliError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        Self::from_csv(name, &buf)
    }

    pub fn read(name: &str, path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Self::from_csv(name, &bytes)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}
