//! Numeric CSV tables with a fixed header.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub struct Table {
    text: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n", width: header.len() }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.width);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            if v.is_finite() {
                let _ = write!(self.text, "{v}");
            }
        }
        self.text.push('\n');
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Rows of a numeric CSV whose header must equal `header`.
pub fn parse(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    if head != header {
        bail!("expected header {}, found {}", header.join(","), head.join(","));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let row: Vec<f64> = l
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("line {}: not a number", i + 2))?;
            if row.len() != header.len() {
                bail!("line {}: expected {} columns, found {}", i + 2, header.len(), row.len());
            }
            Ok(row)
        })
        .collect()
}
