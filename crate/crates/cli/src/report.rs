//! CSV report tables.
//!
//! Every file starts with a comment line `# khessian <table> v<version>`,
//! followed by a header row and the data rows. Floats are written in the
//! shortest form that parses back to the same value.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn render(&self) -> Result<Vec<u8>, CliError> {
        let mut out = format!("# khessian {} v{FORMAT_VERSION}\n", self.name).into_bytes();
        let mut w = csv::Writer::from_writer(&mut out);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        drop(w);
        Ok(out)
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Fails before any work is done if a report would be overwritten.
pub fn precheck(dir: &Path, files: &[&str], force: bool) -> Result<(), CliError> {
    if force {
        return Ok(());
    }
    for f in files {
        let p = dir.join(f);
        if p.exists() {
            return Err(CliError::Io(format!("{} exists (pass --force to overwrite)", p.display())));
        }
    }
    Ok(())
}

pub fn write_tables(dir: &Path, tables: &[Table], force: bool) -> Result<Vec<PathBuf>, CliError> {
    let names: Vec<String> = tables.iter().map(Table::file_name).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    precheck(dir, &refs, force)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (t, name) in tables.iter().zip(&names) {
        let p = dir.join(name);
        fs::write(&p, t.render()?).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        written.push(p);
    }
    Ok(written)
}
