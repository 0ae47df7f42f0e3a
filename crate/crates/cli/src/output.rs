use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Destination of command output. With a directory, files are written
/// there and the human summary goes to stdout; without one, the primary
/// machine-readable output goes to stdout and the summary to stderr.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).with_context(|| format!("cannot create output directory {}", d.display()))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub fn say(&self, msg: &str) {
        if self.dir.is_some() {
            println!("{msg}");
        } else {
            eprintln!("{msg}");
        }
    }

    /// Primary output: written to `name` or printed.
    pub fn emit(&self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                std::fs::write(&path, content).with_context(|| format!("cannot write {}", path.display()))?;
                Ok(())
            }
            None => {
                print!("{content}");
                Ok(())
            }
        }
    }

    /// Secondary output, only produced when an output directory is set.
    pub fn attach(&self, name: &str, content: &str) -> Result<()> {
        if self.dir.is_some() {
            self.emit(name, content)
        } else {
            Ok(())
        }
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// RFC 4180 CSV with LF line endings and shortest round-trip floats.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_float(*v)))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Shortest representation that parses back to the same double.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}
