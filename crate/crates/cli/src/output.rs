//! CSV output with a provenance header line.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Formats with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

/// A CSV table with fixed columns.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    fn write_to<W: Write>(&self, mut w: W, cfg: &ExperimentConfig, command: &str) -> Result<(), CliError> {
        writeln!(w, "# quartamp {command}; seed={}; {}", cfg.seed, cfg.to_inline())?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for r in &self.rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Writes to `path`, or to standard output when the path is `-`.
    pub fn write(&self, path: &Path, cfg: &ExperimentConfig, command: &str) -> Result<(), CliError> {
        if path.as_os_str() == "-" {
            return self.write_to(io::stdout().lock(), cfg, command);
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        self.write_to(io::BufWriter::new(File::create(path)?), cfg, command)
    }
}
