//! Tab-separated output tables with a config echo header.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::Path;

pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Writes `# <command>`, `# seed: N`, `# config: …`, `# columns: …`,
    /// then one tab-separated line per row.
    pub fn write_to(&self, path: &Path, command: &str, seed: u64, echo: &str) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "# lidarkit {command}")?;
        writeln!(file, "# seed: {seed}")?;
        writeln!(file, "# config: {echo}")?;
        writeln!(file, "# columns: {}", self.columns.join("\t"))?;
        for row in &self.rows {
            writeln!(file, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

pub fn fmt_ap(ap: Option<f64>) -> String {
    match ap {
        Some(v) => format!("{v:.6}"),
        None => "no-gt".to_string(),
    }
}
