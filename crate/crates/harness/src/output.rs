// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! CSV and SVG artifact writing.

use crate::HarnessError;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Output directory plus the provenance stamped on every table.
#[derive(Clone, Debug)]
pub struct Sink {
    pub dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
}

impl Sink {
    pub fn new(dir: impl Into<PathBuf>, config_hash: String, seed: u64) -> Result<Self, HarnessError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        Ok(Self { dir, config_hash, seed })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write a CSV table preceded by a `# config_hash=… seed=…` line.
    pub fn table<R: AsRef<[String]>>(&self, name: &str, header: &[&str], rows: &[R]) -> Result<PathBuf, HarnessError> {
        let path = self.path(name);
        let mut buf = Vec::new();
        writeln!(buf, "# config_hash={} seed={}", self.config_hash, self.seed).expect("write to memory");
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header).map_err(|e| HarnessError::Io(e.to_string()))?;
            for r in rows {
                w.write_record(r.as_ref()).map_err(|e| HarnessError::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| HarnessError::io(&path, e))?;
        }
        fs::write(&path, buf).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<PathBuf, HarnessError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}

/// Fixed-format float for tables.
pub fn num(v: f64) -> String {
    format!("{v:.6e}")
}

/// Read a table written by [`Sink::table`], skipping the comment line.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(|e| HarnessError::Io(e.to_string()))?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok((header, rows))
}
