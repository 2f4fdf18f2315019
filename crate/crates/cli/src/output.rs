//! Writers for the text artifacts.

use std::fs;
use std::path::Path;

use radiomap::field::{export_raster, import_raster};
use radiomap::{Error, Grid2D};
use serde::Serialize;

use crate::CliResult;

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Error::Io { path: path.to_path_buf(), source: e }.into())
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = toml::to_string(value).map_err(|e| Error::Config(format!("serializing {}: {e}", path.display())))?;
    write_file(path, &text)
}

pub fn write_grid(path: &Path, g: &Grid2D) -> CliResult<()> {
    Ok(export_raster(g, path)?)
}

pub fn read_grid(path: &Path) -> CliResult<Grid2D> {
    Ok(import_raster(path)?)
}

/// Tab-separated table with a header row.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { text: format!("{}\n", header.join("\t")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join("\t"));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_file(path, &self.text)
    }
}

/// Fixed-precision number for tables.
pub fn num(v: f64) -> String {
    format!("{v:.6}")
}
