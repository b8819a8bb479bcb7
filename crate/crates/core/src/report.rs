//! Artifact output: manifest headers, CSV tables and PASS/FAIL summaries.
//!
//! Every file starts with `#`-prefixed manifest lines (tool version, config
//! hash, seed, basis stamp), then an RFC-4180-style body: mandatory header
//! row, `.` decimal separator, UTF-8, no quoting needed because fields are
//! numeric or bare identifiers. Nothing time- or thread-dependent goes into
//! the output, so reruns with the same seed are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// FNV-1a 64-bit fingerprint; used for config hashes and basis stamps.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Shared preamble for every artifact written by one experiment run.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub experiment: String,
    pub config_hash: u64,
    pub seed: u64,
    /// Echo of the scientific config, canonical `key = value` per line.
    pub config_lines: Vec<String>,
    /// Basis stamps, one per basis in play.
    pub basis_lines: Vec<String>,
}

impl Manifest {
    pub fn new(experiment: &str, seed: u64, config_lines: Vec<String>) -> Self {
        let mut canon = String::new();
        for l in &config_lines {
            canon.push_str(l);
            canon.push('\n');
        }
        Self {
            experiment: experiment.to_string(),
            config_hash: fnv1a(canon.as_bytes()) ^ fnv1a(&seed.to_le_bytes()),
            seed,
            config_lines,
            basis_lines: Vec::new(),
        }
    }

    pub fn stamp_basis(&mut self, manifest: String) {
        if !self.basis_lines.contains(&manifest) {
            self.basis_lines.push(manifest);
        }
    }

    fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# renwave {} experiment={}", VERSION, self.experiment);
        let _ = writeln!(s, "# config_hash={:016x} seed={}", self.config_hash, self.seed);
        for l in &self.config_lines {
            let _ = writeln!(s, "# config: {l}");
        }
        for l in &self.basis_lines {
            let _ = writeln!(s, "# basis: {l}");
        }
        s
    }
}

/// A CSV table under construction: header row plus formatted rows.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, fields: Vec<String>) {
        assert_eq!(fields.len(), self.columns.len(), "csv row arity");
        self.rows.push(fields);
    }

    pub fn render(&self, manifest: &Manifest) -> String {
        let mut s = manifest.header();
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Shortest-roundtrip decimal rendering of an f64 (deterministic for equal
/// bit patterns).
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// One PASS/FAIL line of a machine-readable summary.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// "le" (value must be <= threshold) or "ge".
    pub direction: &'static str,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            threshold,
            direction: "le",
            pass: value <= threshold,
        }
    }

    pub fn ge(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            threshold,
            direction: "ge",
            pass: value >= threshold,
        }
    }
}

/// The result of one experiment run: tables, checks and optional SVG bodies.
#[derive(Debug)]
pub struct Report {
    pub manifest: Manifest,
    pub tables: Vec<CsvTable>,
    pub checks: Vec<Check>,
    /// (file stem, svg body)
    pub plots: Vec<(String, String)>,
}

impl Report {
    pub fn new(manifest: Manifest) -> Self {
        Self {
            manifest,
            tables: Vec::new(),
            checks: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary_table(&self) -> CsvTable {
        let mut t = CsvTable::new("summary", &["check", "value", "direction", "threshold", "pass"]);
        for c in &self.checks {
            t.push(vec![
                c.name.clone(),
                fmt_f64(c.value),
                c.direction.to_string(),
                fmt_f64(c.threshold),
                if c.pass { "PASS" } else { "FAIL" }.to_string(),
            ]);
        }
        t
    }

    /// Write all artifacts into `dir`; returns the file paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in self.tables.iter().chain(std::iter::once(&self.summary_table())) {
            let path = dir.join(format!("{}.csv", t.name));
            fs::write(&path, t.render(&self.manifest))?;
            written.push(path);
        }
        for (stem, body) in &self.plots {
            let path = dir.join(format!("{stem}.svg"));
            fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }

    /// Console lines, one per check.
    pub fn print_checks(&self) {
        for c in &self.checks {
            println!(
                "{} {} value={} {} threshold={}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.direction,
                c.threshold
            );
        }
    }
}
