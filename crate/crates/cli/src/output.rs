//! CSV and JSON result files. Every CSV starts with a `# config_hash=`
//! comment line followed by a header row.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::failure::{AtStage, Failure};

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<D: Display>(&mut self, row: impl IntoIterator<Item = D>) {
        let row: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, config_hash: &str) -> String {
        let mut out = format!("# config_hash={config_hash}\n");
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Formats a float so that it reads back to the same value.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv(dir: &Path, name: &str, table: &Table, config_hash: &str) -> Result<PathBuf, Failure> {
    write_file(dir, &format!("{name}.csv"), table.render(config_hash).as_bytes())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, Failure> {
    let text = serde_json::to_string_pretty(value).expect("results serialize");
    write_file(dir, &format!("{name}.json"), text.as_bytes())
}

fn write_file(dir: &Path, file: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).at("output")?;
    let path = dir.join(file);
    let mut f = fs::File::create(&path).at("output")?;
    f.write_all(bytes).at("output")?;
    Ok(path)
}
