//! Experiment artifacts: CSV tables, SVG heatmaps and the run manifest.
//!
//! Every file goes through [`ArtifactWriter`], which records a SHA-256
//! digest per file. The manifest is written last, through a rename, so its
//! presence marks a complete run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub config_echo: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub scheme_diagnostics: serde_json::Value,
}

/// A rectangular table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip representation, so identical values give identical bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn flag(b: bool) -> String {
    (if b { "true" } else { "false" }).to_string()
}

/// `v` with six significant digits, or `EXTINCT`.
pub fn significant6(v: Option<f64>) -> String {
    match v {
        None => "EXTINCT".to_string(),
        Some(v) if v == 0.0 || !v.is_finite() => format!("{v:.5}"),
        Some(v) => {
            let magnitude = v.abs().log10().floor() as i32;
            let decimals = (5 - magnitude).max(0) as usize;
            format!("{v:.decimals$}")
        }
    }
}

/// Long-format table `t,x,u,extinct` over the selected rows of a field.
pub fn field_table(field: &SpaceTimeField, rows: &[usize]) -> Table {
    let grid = field.grid;
    let mut table = Table::new(&["t", "x", "u", "extinct"]);
    for &k in rows {
        for i in 0..grid.nx {
            let extinct = field.is_extinct_at(k, i);
            table.push(vec![num(grid.time(k)), num(grid.node(i)), num(field.get(k, i)), flag(extinct)]);
        }
    }
    table
}

/// `count` time rows spread evenly from 0 to the final row, always including both.
pub fn snapshot_rows(nt: usize, count: usize) -> Vec<usize> {
    if count <= 1 || nt == 0 {
        return vec![nt];
    }
    let mut rows: Vec<usize> = (0..count).map(|j| (j * nt + (count - 1) / 2) / (count - 1)).collect();
    rows.dedup();
    rows
}

/// Heatmap of a field, with the `{u = level}` crossings drawn as dots.
pub fn heatmap_svg(field: &SpaceTimeField, level: f64, title: &str) -> String {
    const WIDTH: usize = 600;
    const HEIGHT: usize = 300;
    let grid = field.grid;
    let cols = grid.nx.min(WIDTH / 2);
    let rows = (grid.nt + 1).min(HEIGHT / 2);
    let (cw, ch) = (WIDTH as f64 / cols as f64, HEIGHT as f64 / rows as f64);
    let alive: Vec<f64> = field.values().iter().copied().filter(|&v| v > field.floor).collect();
    let lo = alive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = alive.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{}" viewBox="0 0 {WIDTH} {}">"#,
        HEIGHT + 20,
        HEIGHT + 20
    );
    let _ = writeln!(s, r#"<text x="4" y="14" font-family="sans-serif" font-size="12">{title}</text>"#);
    let node = |c: usize| c * (grid.nx - 1) / (cols - 1).max(1);
    let row = |r: usize| r * grid.nt / (rows - 1).max(1);
    for r in 0..rows {
        let k = row(r);
        // time runs upwards
        let y = 20.0 + (rows - 1 - r) as f64 * ch;
        for c in 0..cols {
            let i = node(c);
            let colour = if field.is_extinct_at(k, i) {
                "black".to_string()
            } else {
                let f = ((field.get(k, i) - lo) / span).clamp(0.0, 1.0);
                let (red, blue) = ((255.0 * f) as u8, (255.0 * (1.0 - f)) as u8);
                format!("#{red:02x}40{blue:02x}")
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{colour}"/>"#,
                c as f64 * cw,
                cw + 0.05,
                ch + 0.05
            );
        }
        for c in 1..cols {
            let (a, b) = (field.get(k, node(c - 1)) - level, field.get(k, node(c)) - level);
            if (a >= 0.0) != (b >= 0.0) {
                let frac = a / (a - b);
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="white"/>"#,
                    (c as f64 - 1.0 + frac) * cw + 0.5 * cw,
                    y + 0.5 * ch
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes artifacts into one directory and builds the manifest.
pub struct ArtifactWriter {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
    timings: BTreeMap<String, f64>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), outputs: Vec::new(), timings: BTreeMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        if name == MANIFEST_NAME {
            return Err(Error::Config(format!("{MANIFEST_NAME} is reserved for the manifest")));
        }
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.outputs.push(OutputRecord { path: name.to_string(), sha256: digest(contents.as_bytes()) });
        Ok(path)
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        self.write(name, &table.to_csv())
    }

    /// Runs `f` and records its wall-clock time under `phase`.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(phase.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        out
    }

    pub fn outputs(&self) -> &[OutputRecord] {
        &self.outputs
    }

    /// Writes the manifest and consumes the writer.
    pub fn finish(
        self,
        command: &str,
        config_echo: serde_json::Value,
        scheme_diagnostics: serde_json::Value,
    ) -> Result<ExperimentManifest> {
        let manifest = ExperimentManifest {
            command: command.to_string(),
            config_echo,
            outputs: self.outputs,
            timings: self.timings,
            scheme_diagnostics,
        };
        let tmp = self.dir.join(format!("{MANIFEST_NAME}.partial"));
        fs::write(&tmp, serde_json::to_string_pretty(&manifest)?)?;
        fs::rename(&tmp, self.dir.join(MANIFEST_NAME))?;
        Ok(manifest)
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
