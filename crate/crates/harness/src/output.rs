//! Artifact writers. Floats are printed in Rust's shortest round-trip form
//! so identical runs produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clarity_core::hjb::ValueFunction;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// CSV file with a `#` units comment, a header row and numeric rows.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    /// `columns` pairs each column name with its unit (empty for none).
    pub fn create(path: &Path, columns: &[(&str, &str)]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        let units: Vec<String> = columns
            .iter()
            .map(|(name, unit)| if unit.is_empty() { format!("{name} [-]") } else { format!("{name} [{unit}]") })
            .collect();
        writeln!(out, "# units: {}", units.join(", "))?;
        writeln!(out, "{}", columns.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(","))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            columns: columns.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        debug_assert_eq!(values.len(), self.columns);
        let mut line = String::with_capacity(values.len() * 12);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v}"));
        }
        writeln!(self.out, "{line}").with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush().with_context(|| format!("flushing {}", self.path.display()))?;
        Ok(self.path)
    }
}

/// Writes `V(0, ·)` as little-endian f64 in row-major order (last axis,
/// the clarity axis, fastest) plus a text header describing the layout.
pub fn write_value_function(dir: &Path, stem: &str, vf: &ValueFunction) -> Result<(PathBuf, PathBuf)> {
    let bin = dir.join(format!("{stem}.bin"));
    let hdr = dir.join(format!("{stem}.hdr"));
    let mut out = BufWriter::new(File::create(&bin).with_context(|| format!("creating {}", bin.display()))?);
    for v in vf.initial() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;

    let mut h = String::new();
    h.push_str("format = f64-le\n");
    h.push_str("order = row-major, last axis fastest\n");
    h.push_str(&format!("dims = {}\n", vf.grid.dims()));
    let nodes: Vec<String> = vf.grid.axes().iter().map(|a| a.nodes.to_string()).collect();
    h.push_str(&format!("shape = {}\n", nodes.join(" ")));
    for (i, a) in vf.grid.axes().iter().enumerate() {
        let name = if i + 1 == vf.grid.dims() { "q".to_string() } else { format!("x{}", i + 1) };
        let span = if a.periodic { "periodic [min, max)" } else { "closed [min, max]" };
        h.push_str(&format!("axis{i} = {name} min {} max {} nodes {} {span}\n", a.min, a.max, a.nodes));
    }
    h.push_str(&format!("time = 0\nhorizon = {}\ndt = {}\nsteps = {}\n", vf.horizon, vf.dt, vf.steps));
    std::fs::write(&hdr, h).with_context(|| format!("writing {}", hdr.display()))?;
    Ok((bin, hdr))
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub experiment: &'a str,
    pub config_hash: String,
    pub config: serde_json::Map<String, serde_json::Value>,
    pub files: Vec<String>,
    pub results: serde_json::Value,
}

pub fn write_summary(dir: &Path, summary: &Summary<'_>) -> Result<PathBuf> {
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
