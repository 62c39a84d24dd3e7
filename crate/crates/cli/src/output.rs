//! CSV writers: `,` delimiter, `.` decimals, header row, LF line endings.
//! Data files carry full round-trip precision; summaries 6 significant digits.

use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::format;

/// Key/value summary, rendered both to the terminal and to `_summary.csv`.
#[derive(Debug, Default, Clone)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn num(&mut self, key: impl Into<String>, v: f64) {
        self.entries.push((key.into(), format::sig(v, 6)));
    }

    pub fn int(&mut self, key: impl Into<String>, v: impl std::fmt::Display) {
        self.entries.push((key.into(), v.to_string()));
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) {
        self.entries.push((key.into(), v.into()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn full(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

pub struct Outputs {
    prefix: Option<PathBuf>,
}

impl Outputs {
    pub fn new(prefix: Option<PathBuf>) -> Self {
        Self { prefix }
    }

    fn path(&self, suffix: &str) -> Option<PathBuf> {
        let prefix = self.prefix.as_ref()?;
        let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(format!("_{suffix}.csv"));
        Some(prefix.with_file_name(name))
    }

    /// Writes `<prefix>_<suffix>.csv`; a no-op when no prefix is set.
    pub fn csv<I>(&mut self, suffix: &str, header: &[String], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let Some(path) = self.path(suffix) else {
            return Ok(());
        };
        let mut w = writer(&path)?;
        if !header.is_empty() {
            w.write_record(header)?;
        }
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Like [`csv`](Self::csv) but rows may differ in length.
    pub fn csv_ragged<I>(&mut self, suffix: &str, rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let Some(path) = self.path(suffix) else {
            return Ok(());
        };
        let mut w = writer_builder().flexible(true).from_path(prepare(&path)?)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&mut self, summary: &Summary) -> Result<(), CliError> {
        let rows = summary.entries().iter().map(|(k, v)| vec![k.clone(), v.clone()]);
        self.csv("summary", &["key".to_string(), "value".to_string()], rows)
    }
}

fn writer_builder() -> csv::WriterBuilder {
    let mut b = csv::WriterBuilder::new();
    b.terminator(csv::Terminator::Any(b'\n'));
    b
}

fn prepare(path: &Path) -> Result<&Path, CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    Ok(path)
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    writer_builder().from_path(prepare(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn header<S: AsRef<str>>(cols: &[S]) -> Vec<String> {
    cols.iter().map(|c| c.as_ref().to_string()).collect()
}

pub fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}
